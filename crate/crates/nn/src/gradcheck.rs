//! Central-difference gradient verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::tape::{Mat, Tape, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GradCheckError {
    #[error("non-finite {what} at input {input}, entry ({row}, {col})")]
    NonFinite {
        what: &'static str,
        input: usize,
        row: usize,
        col: usize,
    },
}

/// Detailed outcome of [`grad_check_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_error: f64,
    /// `(input, row, col)` of the worst entry.
    pub worst: (usize, usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Compares the tape gradient of `f` against central differences with step
/// `h` at every input coordinate. Returns the largest
/// `|analytic - numeric| / max(1, |analytic|)`.
///
/// Outputs that are not `1 x 1` are contracted with a fixed pseudo-random
/// weight matrix first, so every output entry contributes.
pub fn grad_check<F>(f: F, inputs: &[Mat], h: f64) -> Result<f64, GradCheckError>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    grad_check_report(f, inputs, h).map(|r| r.max_error)
}

pub fn grad_check_report<F>(f: F, inputs: &[Mat], h: f64) -> Result<GradCheckReport, GradCheckError>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let eval = |xs: &[Mat]| -> (Tape, Vec<Var>, Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let out = f(&mut tape, &vars);
        let out = contract(&mut tape, out);
        (tape, vars, out)
    };
    let (tape, vars, out) = eval(inputs);
    let grads = tape.backward(out);
    let mut report = GradCheckReport {
        max_error: 0.0,
        worst: (0, 0, 0),
        analytic: 0.0,
        numeric: 0.0,
    };
    let mut probe = inputs.to_vec();
    for (i, x) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[i], x.dim());
        for ((r, c), &orig) in x.indexed_iter() {
            probe[i][[r, c]] = orig + h;
            let (t, _, o) = eval(&probe);
            let plus = t.scalar(o);
            probe[i][[r, c]] = orig - h;
            let (t, _, o) = eval(&probe);
            let minus = t.scalar(o);
            probe[i][[r, c]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[[r, c]];
            if !numeric.is_finite() {
                return Err(GradCheckError::NonFinite { what: "numeric gradient", input: i, row: r, col: c });
            }
            if !a.is_finite() {
                return Err(GradCheckError::NonFinite { what: "analytic gradient", input: i, row: r, col: c });
            }
            let err = (a - numeric).abs() / a.abs().max(1.0);
            if err > report.max_error {
                report = GradCheckReport {
                    max_error: err,
                    worst: (i, r, c),
                    analytic: a,
                    numeric,
                };
            }
        }
    }
    Ok(report)
}

fn contract(tape: &mut Tape, out: Var) -> Var {
    let (r, c) = tape.shape(out);
    if (r, c) == (1, 1) {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
    let w = Mat::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0));
    let w = tape.leaf(w);
    let prod = tape.mul(out, w);
    tape.sum_all(prod)
}
