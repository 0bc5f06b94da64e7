use super::array::sigmoid;
use super::{Array, AutodiffError, ParamStore};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// The primitive operations a tape can record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Elementwise sum. The right operand may be a `[1, n]` row broadcast
    /// over the rows of an `[m, n]` left operand.
    Add,
    /// Elementwise difference, same broadcasting rule as `Add`.
    Sub,
    ScalarMul(f64),
    /// Elementwise (Hadamard) product of equal shapes.
    Mul,
    MatMul,
    Concat { axis: usize },
    Silu,
    /// Mean of squared differences over all elements; scalar output.
    Mse,
    /// Sum of all elements; scalar output.
    Sum,
}

impl Primitive {
    fn name(self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::ScalarMul(_) => "scalar_mul",
            Primitive::Mul => "mul",
            Primitive::MatMul => "matmul",
            Primitive::Concat { .. } => "concat",
            Primitive::Silu => "silu",
            Primitive::Mse => "mse",
            Primitive::Sum => "sum",
        }
    }
}

#[derive(Debug)]
enum Op {
    Param,
    Constant,
    Apply { prim: Primitive, inputs: Vec<usize>, broadcast: bool },
}

#[derive(Debug)]
struct Node {
    value: Array,
    op: Op,
    requires_grad: bool,
}

/// Eager evaluation record. Node inputs always refer to earlier nodes.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(String, usize)>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable leaf.
    pub fn param(&mut self, name: &str, value: Array) -> Result<Var, AutodiffError> {
        if self.params.iter().any(|(n, _)| n == name) {
            return Err(AutodiffError::DuplicateParameter(name.to_string()));
        }
        let id = self.push(value, Op::Param, true);
        self.params.push((name.to_string(), id));
        Ok(Var(id))
    }

    /// Registers every array of `store` as a trainable leaf.
    pub fn params_from(&mut self, store: &ParamStore) -> Result<Vec<(String, Var)>, AutodiffError> {
        store
            .iter()
            .map(|(name, a)| self.param(name, a.clone()).map(|v| (name.to_string(), v)))
            .collect()
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Array) -> Var {
        Var(self.push(value, Op::Constant, false))
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Array, op: Op, requires_grad: bool) -> usize {
        self.nodes.push(Node { value, op, requires_grad });
        self.nodes.len() - 1
    }

    /// Evaluates `prim` on `inputs` and records it.
    pub fn apply(&mut self, prim: Primitive, inputs: &[Var]) -> Result<Var, AutodiffError> {
        let arity_ok = match prim {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::MatMul | Primitive::Mse => {
                inputs.len() == 2
            }
            Primitive::ScalarMul(_) | Primitive::Silu | Primitive::Sum => inputs.len() == 1,
            Primitive::Concat { .. } => !inputs.is_empty(),
        };
        if !arity_ok {
            let expected = match prim {
                Primitive::Concat { .. } => "at least one input",
                Primitive::ScalarMul(_) | Primitive::Silu | Primitive::Sum => "one input",
                _ => "two inputs",
            };
            return Err(AutodiffError::BadArity { op: prim.name(), expected, found: inputs.len() });
        }
        let ids: Vec<usize> = inputs.iter().map(|v| v.0).collect();
        let (value, broadcast) = self.forward(prim, &ids)?;
        let requires_grad = ids.iter().any(|&i| self.nodes[i].requires_grad);
        let id = self.push(value, Op::Apply { prim, inputs: ids, broadcast }, requires_grad);
        Ok(Var(id))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(Primitive::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(Primitive::Sub, &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, AutodiffError> {
        self.apply(Primitive::ScalarMul(c), &[a])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(Primitive::Mul, &[a, b])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(Primitive::MatMul, &[a, b])
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, AutodiffError> {
        self.apply(Primitive::Concat { axis }, parts)
    }

    pub fn silu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(Primitive::Silu, &[a])
    }

    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.apply(Primitive::Mse, &[a, b])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.apply(Primitive::Sum, &[a])
    }

    fn forward(&self, prim: Primitive, ids: &[usize]) -> Result<(Array, bool), AutodiffError> {
        let val = |i: usize| &self.nodes[ids[i]].value;
        let mismatch = |a: &Array, b: &Array| AutodiffError::ShapeMismatch {
            op: prim.name(),
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        };
        Ok(match prim {
            Primitive::Add | Primitive::Sub => {
                let (a, b) = (val(0), val(1));
                let sign = if prim == Primitive::Add { 1.0 } else { -1.0 };
                if a.shape() == b.shape() {
                    (a.zip_map(b, |x, y| x + sign * y), false)
                } else if is_row_broadcast(a, b) {
                    (a.add_row(&b.map(|y| sign * y)), true)
                } else {
                    return Err(mismatch(a, b));
                }
            }
            Primitive::ScalarMul(c) => (val(0).map(|x| c * x), false),
            Primitive::Mul => {
                let (a, b) = (val(0), val(1));
                if a.shape() != b.shape() {
                    return Err(mismatch(a, b));
                }
                (a.zip_map(b, |x, y| x * y), false)
            }
            Primitive::MatMul => (val(0).matmul(val(1))?, false),
            Primitive::Concat { axis } => {
                let parts: Vec<&Array> = ids.iter().map(|&i| &self.nodes[i].value).collect();
                (concat(&parts, axis).map_err(|(a, b)| mismatch(a, b))?, false)
            }
            Primitive::Silu => (val(0).silu(), false),
            Primitive::Mse => {
                let (a, b) = (val(0), val(1));
                if a.shape() != b.shape() {
                    return Err(mismatch(a, b));
                }
                let n = a.len().max(1) as f64;
                let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
                (Array::scalar(s / n), false)
            }
            Primitive::Sum => (Array::scalar(val(0).data().iter().sum()), false),
        })
    }

    /// Gradients of a scalar node with respect to every registered parameter.
    /// Parameters that do not influence `loss` get zero arrays.
    pub fn backward(&self, loss: Var) -> Result<ParamStore, AutodiffError> {
        let loss_shape = self.nodes[loss.0].value.shape();
        if self.nodes[loss.0].value.len() != 1 {
            return Err(AutodiffError::NonScalarLoss(loss_shape.to_vec()));
        }
        let mut grads: Vec<Option<Array>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Array::filled(loss_shape, 1.0));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            let Op::Apply { prim, inputs, broadcast } = &node.op else {
                continue;
            };
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            let needs = |k: usize| self.nodes[inputs[k]].requires_grad;
            let inp = |k: usize| &self.nodes[inputs[k]].value;
            match *prim {
                Primitive::Add | Primitive::Sub => {
                    let sign = if *prim == Primitive::Add { 1.0 } else { -1.0 };
                    if needs(1) {
                        let gb = if *broadcast { sum_rows(&g).map(|v| sign * v) } else { g.map(|v| sign * v) };
                        accumulate(&mut grads, inputs[1], gb);
                    }
                    if needs(0) {
                        accumulate(&mut grads, inputs[0], g);
                    }
                }
                Primitive::ScalarMul(c) => accumulate(&mut grads, inputs[0], g.map(|v| c * v)),
                Primitive::Mul => {
                    if needs(0) {
                        accumulate(&mut grads, inputs[0], g.zip_map(inp(1), |a, b| a * b));
                    }
                    if needs(1) {
                        accumulate(&mut grads, inputs[1], g.zip_map(inp(0), |a, b| a * b));
                    }
                }
                Primitive::MatMul => {
                    if needs(0) {
                        accumulate(&mut grads, inputs[0], g.matmul_t(inp(1)));
                    }
                    if needs(1) {
                        accumulate(&mut grads, inputs[1], inp(0).t_matmul(&g));
                    }
                }
                Primitive::Concat { axis } => {
                    let shape = node.value.shape();
                    let outer: usize = shape[..axis].iter().product();
                    let inner: usize = shape[axis + 1..].iter().product();
                    let total = shape[axis] * inner;
                    let mut offset = 0;
                    for (k, &src) in inputs.iter().enumerate() {
                        let part = inp(k);
                        let width = part.shape()[axis] * inner;
                        if needs(k) {
                            let mut data = Vec::with_capacity(part.len());
                            for o in 0..outer {
                                let start = o * total + offset;
                                data.extend_from_slice(&g.data()[start..start + width]);
                            }
                            accumulate(&mut grads, src, Array::new(part.shape().to_vec(), data)?);
                        }
                        offset += width;
                    }
                }
                Primitive::Silu => {
                    let d = g.zip_map(inp(0), |gv, x| {
                        let s = sigmoid(x);
                        gv * s * (1.0 + x * (1.0 - s))
                    });
                    accumulate(&mut grads, inputs[0], d);
                }
                Primitive::Mse => {
                    let (a, b) = (inp(0), inp(1));
                    let scale = 2.0 * g.data()[0] / a.len().max(1) as f64;
                    let diff = a.zip_map(b, |x, y| scale * (x - y));
                    if needs(1) {
                        accumulate(&mut grads, inputs[1], diff.map(|v| -v));
                    }
                    if needs(0) {
                        accumulate(&mut grads, inputs[0], diff);
                    }
                }
                Primitive::Sum => {
                    let a = inp(0);
                    accumulate(&mut grads, inputs[0], Array::filled(a.shape(), g.data()[0]));
                }
            }
        }

        let mut out = ParamStore::new();
        for (name, id) in &self.params {
            let g = match grads.get_mut(*id).and_then(Option::take) {
                Some(g) => g,
                None => Array::zeros(self.nodes[*id].value.shape()),
            };
            out.insert(name.clone(), g);
        }
        Ok(out)
    }
}

fn is_row_broadcast(a: &Array, b: &Array) -> bool {
    a.shape().len() == 2 && b.shape().len() == 2 && b.shape()[0] == 1 && a.shape()[1] == b.shape()[1]
}

fn sum_rows(g: &Array) -> Array {
    let n = g.cols();
    let mut out = vec![0.0; n];
    for chunk in g.data().chunks(n) {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    Array::row(out)
}

fn accumulate(grads: &mut [Option<Array>], id: usize, delta: Array) {
    match &mut grads[id] {
        Some(g) => g.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}

fn concat<'a>(parts: &[&'a Array], axis: usize) -> Result<Array, (&'a Array, &'a Array)> {
    let first = parts[0];
    let rank = first.shape().len();
    if axis >= rank {
        return Err((first, first));
    }
    for p in &parts[1..] {
        let ok = p.shape().len() == rank
            && p.shape().iter().zip(first.shape()).enumerate().all(|(d, (a, b))| d == axis || a == b);
        if !ok {
            return Err((first, p));
        }
    }
    let outer: usize = first.shape()[..axis].iter().product();
    let inner: usize = first.shape()[axis + 1..].iter().product();
    let mut shape = first.shape().to_vec();
    shape[axis] = parts.iter().map(|p| p.shape()[axis]).sum();
    let mut data = Vec::with_capacity(shape.iter().product());
    for o in 0..outer {
        for p in parts {
            let width = p.shape()[axis] * inner;
            data.extend_from_slice(&p.data()[o * width..(o + 1) * width]);
        }
    }
    Ok(Array::new(shape, data).expect("concat shape is consistent"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Array {
        Array::matrix(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn primitive_examples() {
        let mut t = Tape::new();
        let a = t.constant(Array::row(vec![1.0, 2.0]));
        let b = t.constant(Array::row(vec![3.0, 4.0]));
        let s = t.add(a, b).unwrap();
        assert_eq!(t.value(s).data(), &[4.0, 6.0]);

        let eye = t.constant(m(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let x = t.constant(m(2, 2, &[1.5, -2.0, 0.25, 7.0]));
        let p = t.matmul(eye, x).unwrap();
        assert_eq!(t.value(p), t.value(x));

        let z = t.constant(Array::row(vec![0.0]));
        let y = t.silu(z).unwrap();
        assert_eq!(t.value(y).data(), &[0.0]);
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.constant(Array::zeros(&[2, 3]));
        let b = t.constant(Array::zeros(&[2, 2]));
        assert!(matches!(t.add(a, b), Err(AutodiffError::ShapeMismatch { .. })));
        assert!(matches!(t.matmul(a, b), Err(AutodiffError::ShapeMismatch { .. })));
        assert!(matches!(t.mse(a, b), Err(AutodiffError::ShapeMismatch { .. })));
        assert!(t.concat(&[a, b], 1).is_ok());
        assert!(t.concat(&[a, b], 0).is_err());
        assert!(matches!(t.apply(Primitive::Add, &[a]), Err(AutodiffError::BadArity { .. })));
        assert!(matches!(t.backward(a), Err(AutodiffError::NonScalarLoss(_))));
    }

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.param("x", Array::row(vec![3.0])).unwrap();
        let sq = t.mul(x, x).unwrap();
        let l = t.sum(sq).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get("x").unwrap().data(), &[6.0]);
    }

    #[test]
    fn self_mse_has_zero_gradient() {
        let mut t = Tape::new();
        let x = t.param("x", Array::row(vec![1.0, -2.0, 0.5])).unwrap();
        let l = t.mse(x, x).unwrap();
        let g = t.backward(l).unwrap();
        assert!(g.get("x").unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unreachable_params_get_zeros() {
        let mut t = Tape::new();
        let x = t.param("x", Array::row(vec![1.0, 2.0])).unwrap();
        let _unused = t.param("w", Array::zeros(&[3, 3])).unwrap();
        let l = t.sum(x).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get("w").unwrap(), &Array::zeros(&[3, 3]));
        assert_eq!(g.get("x").unwrap().data(), &[1.0, 1.0]);
        assert!(t.param("x", Array::scalar(0.0)).is_err());
    }

    #[test]
    fn broadcast_bias_gradient_sums_rows() {
        let mut t = Tape::new();
        let x = t.constant(Array::zeros(&[3, 2]));
        let b = t.param("b", Array::row(vec![0.0, 0.0])).unwrap();
        let y = t.add(x, b).unwrap();
        let l = t.sum(y).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get("b").unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn concat_splits_gradient_back() {
        let mut t = Tape::new();
        let a = t.param("a", m(2, 1, &[1.0, 2.0])).unwrap();
        let b = t.param("b", m(2, 2, &[3.0, 4.0, 5.0, 6.0])).unwrap();
        let c = t.concat(&[a, b], 1).unwrap();
        assert_eq!(t.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let w = t.constant(m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let p = t.mul(c, w).unwrap();
        let l = t.sum(p).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get("a").unwrap().data(), &[1.0, 4.0]);
        assert_eq!(g.get("b").unwrap().data(), &[2.0, 3.0, 5.0, 6.0]);
    }
}
