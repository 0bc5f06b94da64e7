use std::collections::BTreeMap;

use super::AutodiffError;

/// Dense row-major array of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Array {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, AutodiffError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(AutodiffError::BadLength { shape, expected, found: data.len() });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        Self { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    pub fn scalar(value: f64) -> Self {
        Self { shape: Vec::new(), data: vec![value] }
    }

    /// A `[1, n]` row.
    pub fn row(values: Vec<f64>) -> Self {
        Self { shape: vec![1, values.len()], data: values }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AutodiffError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Value of a single-element array.
    pub fn item(&self) -> Option<f64> {
        (self.data.len() == 1).then(|| self.data[0])
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            1
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub(crate) fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self` is `[m, k]`, `other` is `[k, n]`.
    pub fn matmul(&self, other: &Self) -> Result<Self, AutodiffError> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.shape[1] != other.shape[0] {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.data, (k, 1), &other.data, (n, 1), &mut out);
        Ok(Self { shape: vec![m, n], data: out })
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub(crate) fn t_matmul(&self, other: &Self) -> Self {
        let (k, m) = (self.shape[0], self.shape[1]);
        let n = other.shape[1];
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.data, (1, m), &other.data, (n, 1), &mut out);
        Self { shape: vec![m, n], data: out }
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub(crate) fn matmul_t(&self, other: &Self) -> Self {
        let (m, k) = (self.shape[0], self.shape[1]);
        let n = other.shape[0];
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.data, (k, 1), &other.data, (1, k), &mut out);
        Self { shape: vec![m, n], data: out }
    }

    /// Adds a `[1, n]` row to every row of an `[m, n]` matrix.
    pub fn add_row(&self, row: &Self) -> Self {
        let n = self.cols();
        let mut out = self.clone();
        for chunk in out.data.chunks_mut(n) {
            for (v, b) in chunk.iter_mut().zip(&row.data) {
                *v += b;
            }
        }
        out
    }

    pub fn silu(&self) -> Self {
        self.map(|x| x * sigmoid(x))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `c = a · b` with explicit (row, column) strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (usize, usize),
    b: &[f64],
    b_strides: (usize, usize),
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slices cover every index reachable through the given
    // dimensions and strides, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Named arrays in a fixed (sorted) order. Used both for parameters and for
/// the gradients `backward` returns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    arrays: BTreeMap<String, Array>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, array: Array) -> Option<Array> {
        self.arrays.insert(name.into(), array)
    }

    pub fn get(&self, name: &str) -> Result<&Array, AutodiffError> {
        self.arrays.get(name).ok_or_else(|| AutodiffError::UnknownParameter(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array, AutodiffError> {
        self.arrays.get_mut(name).ok_or_else(|| AutodiffError::UnknownParameter(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.arrays.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arrays.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array)> {
        self.arrays.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Array)> {
        self.arrays.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    /// Total number of scalar components.
    pub fn numel(&self) -> usize {
        self.arrays.values().map(Array::len).sum()
    }

    /// Moves every entry of `other` into `self`.
    pub fn extend(&mut self, other: ParamStore) {
        self.arrays.extend(other.arrays);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &Array, b: &Array) -> Vec<f64> {
        let (m, k, n) = (a.rows(), a.cols(), b.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    out[i * n + j] += a.data()[i * k + p] * b.data()[p * n + j];
                }
            }
        }
        out
    }

    #[test]
    fn gemm_variants_agree_with_naive_loops() {
        let a = Array::matrix(3, 4, (0..12).map(|v| v as f64 * 0.5 - 2.0).collect()).unwrap();
        let b = Array::matrix(4, 2, (0..8).map(|v| (v as f64).sin()).collect()).unwrap();
        for (x, y) in a.matmul(&b).unwrap().data().iter().zip(naive(&a, &b)) {
            assert!((x - y).abs() < 1e-12);
        }

        let at = Array::matrix(4, 3, {
            let mut v = vec![0.0; 12];
            for i in 0..3 {
                for j in 0..4 {
                    v[j * 3 + i] = a.data()[i * 4 + j];
                }
            }
            v
        })
        .unwrap();
        let via_t = at.t_matmul(&b);
        for (x, y) in via_t.data().iter().zip(naive(&a, &b)) {
            assert!((x - y).abs() < 1e-12);
        }
        let bt = Array::matrix(2, 4, {
            let mut v = vec![0.0; 8];
            for i in 0..4 {
                for j in 0..2 {
                    v[j * 4 + i] = b.data()[i * 2 + j];
                }
            }
            v
        })
        .unwrap();
        let via_bt = a.matmul_t(&bt);
        for (x, y) in via_bt.data().iter().zip(naive(&a, &b)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn length_checked() {
        assert!(Array::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert_eq!(Array::scalar(3.0).item(), Some(3.0));
        assert!(Array::zeros(&[2, 2]).matmul(&Array::zeros(&[3, 1])).is_err());
    }
}
