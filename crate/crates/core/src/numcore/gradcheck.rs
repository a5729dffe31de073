use super::mat::Mat;
use crate::error::{Error, Result};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Floor on the relative-error denominator so zero gradients don't blow up.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// A collection of named parameter matrices.
///
/// The order and names returned by `tensors` and `tensors_mut` must agree.
pub trait ParamSet {
    fn tensors(&self) -> Vec<(String, &Mat)>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut Mat)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Coordinate with the largest error, as `name[row,col]`.
    pub worst_parameter: String,
    /// Largest error per named tensor.
    pub per_parameter_errors: Vec<(String, f64)>,
    pub coordinates_checked: usize,
    /// Coordinates whose probes landed on a different branch of a
    /// piecewise-smooth loss, excluded from the error statistics.
    pub kinks: Vec<String>,
}

impl GradCheckReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        self.max_relative_error <= tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / REL_ERROR_FLOOR.max(analytic.abs() + numeric.abs())
}

/// Compares `analytic` against central differences of `loss_fn` for every
/// coordinate of every tensor in `params`.
///
/// `analytic` must hold one entry per tensor name with matching shape.
/// Parameters are restored bit-exactly after each probe. A non-finite loss
/// is reported as an infinite error at the offending coordinate.
pub fn grad_check<P: ParamSet>(
    params: &mut P,
    analytic: &[(String, Mat)],
    step: f64,
    mut loss_fn: impl FnMut(&P) -> f64,
) -> Result<GradCheckReport> {
    grad_check_piecewise(params, analytic, step, |p| (loss_fn(p), ()))
}

/// [`grad_check`] for a piecewise-smooth loss. `eval` returns the loss and
/// the branch it was computed on (e.g. the argmax selections of max
/// pooling). A coordinate whose `+step` or `-step` probe changes branch
/// straddles a kink, where a central difference does not estimate the
/// derivative; it is listed in [`GradCheckReport::kinks`] instead of being
/// scored.
pub fn grad_check_piecewise<P: ParamSet, B: PartialEq>(
    params: &mut P,
    analytic: &[(String, Mat)],
    step: f64,
    mut eval: impl FnMut(&P) -> (f64, B),
) -> Result<GradCheckReport> {
    if !(step > 0.0) {
        return Err(Error::Contract(format!("grad_check step must be > 0, got {step}")));
    }
    let layout: Vec<(String, (usize, usize))> = params
        .tensors()
        .into_iter()
        .map(|(name, m)| (name, m.shape()))
        .collect();
    let (_, base_branch) = eval(params);

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_parameter: String::new(),
        per_parameter_errors: Vec::with_capacity(layout.len()),
        coordinates_checked: 0,
        kinks: Vec::new(),
    };

    for (t, (name, shape)) in layout.iter().enumerate() {
        let grad = analytic
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, g)| g)
            .ok_or_else(|| Error::Contract(format!("no analytic gradient for {name}")))?;
        if grad.shape() != *shape {
            return Err(Error::shape(name, *shape, grad.shape()));
        }

        let mut tensor_max = 0.0f64;
        for idx in 0..shape.0 * shape.1 {
            let coord = || format!("{name}[{},{}]", idx / shape.1, idx % shape.1);
            let orig = params.tensors()[t].1.data()[idx];
            params.tensors_mut()[t].1.data_mut()[idx] = orig + step;
            let (plus, plus_branch) = eval(params);
            params.tensors_mut()[t].1.data_mut()[idx] = orig - step;
            let (minus, minus_branch) = eval(params);
            params.tensors_mut()[t].1.data_mut()[idx] = orig;

            let finite = plus.is_finite() && minus.is_finite();
            if finite && (plus_branch != base_branch || minus_branch != base_branch) {
                report.kinks.push(coord());
                continue;
            }
            let err = if finite {
                let numeric = (plus - minus) / (2.0 * step);
                relative_error(grad.data()[idx], numeric)
            } else {
                f64::INFINITY
            };
            report.coordinates_checked += 1;
            if err > tensor_max {
                tensor_max = err;
            }
            if err > report.max_relative_error || report.worst_parameter.is_empty() {
                report.max_relative_error = report.max_relative_error.max(err);
                report.worst_parameter = coord();
            }
        }
        report.per_parameter_errors.push((name.clone(), tensor_max));
    }
    Ok(report)
}
