use super::{AutodiffError, ParamStore, Tape, Var};
use crate::exec::Exec;

/// Analytic gradients below this magnitude are compared in absolute terms.
const ABSOLUTE_BELOW: f64 = 1e-8;

/// Worst disagreement between taped and finite-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub components: usize,
}

/// Compares `backward` against central differences for every component of
/// every parameter. `build` must register each entry of the store it is given
/// as a parameter and return a scalar loss node.
pub fn grad_check<F>(params: &ParamStore, h: f64, build: F) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var, AutodiffError> + Sync + Send,
{
    let mut tape = Tape::new();
    let loss = build(&mut tape, params)?;
    let analytic = tape.backward(loss)?;
    compare_gradients(params, &analytic, h, Exec::default(), build)
}

/// Finite-difference comparison against a supplied gradient map.
pub fn compare_gradients<F>(
    params: &ParamStore,
    analytic: &ParamStore,
    h: f64,
    exec: Exec,
    build: F,
) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var, AutodiffError> + Sync + Send,
{
    assert!(h > 0.0, "perturbation must be positive");
    let slots: Vec<(String, usize)> = params
        .iter()
        .flat_map(|(name, a)| (0..a.len()).map(move |i| (name.to_string(), i)))
        .collect();

    let eval = |p: &ParamStore| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let loss = build(&mut tape, p)?;
        let v = tape.value(loss);
        v.item().ok_or_else(|| AutodiffError::NonScalarLoss(v.shape().to_vec()))
    };

    let numeric = exec.try_map_range(slots.len(), |k| {
        let (name, i) = &slots[k];
        let mut p = params.clone();
        let base = p.get(name)?.data()[*i];
        p.get_mut(name)?.data_mut()[*i] = base + h;
        let plus = eval(&p)?;
        p.get_mut(name)?.data_mut()[*i] = base - h;
        let minus = eval(&p)?;
        Ok::<f64, AutodiffError>((plus - minus) / (2.0 * h))
    })?;

    let mut report = GradCheckReport {
        max_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        components: slots.len(),
    };
    for ((name, i), num) in slots.iter().zip(numeric) {
        let a = analytic.get(name)?.data()[*i];
        let err = if a.abs() < ABSOLUTE_BELOW {
            (a - num).abs()
        } else {
            (a - num).abs() / a.abs().max(num.abs())
        };
        if err > report.max_error || report.worst_param.is_empty() {
            report.max_error = err.max(report.max_error);
            report.worst_param = name.clone();
            report.worst_index = *i;
            report.analytic = a;
            report.numeric = num;
        }
    }
    Ok(report)
}
