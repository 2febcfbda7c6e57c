use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::ShapeError;

use super::params::{Bound, Params};
use super::tape::{Tape, Var};

/// Coordinates checked per tensor before switching to a seeded sample.
pub const FULL_CHECK_LIMIT: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Parameter, coordinate, analytic and numeric value at the worst error.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// `|a - n| / max(|a|, |n|, 1e-5)`. The floor keeps coordinates whose
/// gradient has vanished (long LSTM unrolls) from being scored on
/// finite-difference roundoff alone.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Compares analytic gradients of the scalar program `f` with central
/// differences `(f(x + eps) - f(x - eps)) / 2 eps` over every trainable
/// coordinate, or a seeded sample of [`FULL_CHECK_LIMIT`] per larger tensor.
/// Frozen tensors are skipped.
pub fn grad_check<F>(params: &Params, eps: f64, seed: u64, f: F) -> Result<GradCheckReport, ShapeError>
where
    F: Fn(&mut Tape, &Bound) -> Result<Var, ShapeError>,
{
    let eval = |p: &Params| -> Result<f64, ShapeError> {
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape);
        let loss = f(&mut tape, &bound)?;
        Ok(tape.value(loss).item())
    };
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let loss = f(&mut tape, &bound)?;
    let analytic = bound.grads(params, &tape.backward(loss));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport { max_rel_err: 0.0, checked: 0, worst: None };
    let mut probe = params.clone();
    for (name, grad) in &analytic {
        let n = grad.len();
        let coords: Vec<usize> = if n <= FULL_CHECK_LIMIT { (0..n).collect() } else { sample(&mut rng, n, FULL_CHECK_LIMIT).into_vec() };
        for i in coords {
            let original = params.tensor(name).data[i];
            probe.mut_value(name).expect("same names").data[i] = original + eps;
            let up = eval(&probe)?;
            probe.mut_value(name).expect("same names").data[i] = original - eps;
            let down = eval(&probe)?;
            probe.mut_value(name).expect("same names").data[i] = original;
            let numeric = (up - down) / (2.0 * eps);
            let err = relative_error(grad.data[i], numeric);
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = err;
                report.worst = Some((name.clone(), i, grad.data[i], numeric));
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
