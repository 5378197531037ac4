use super::{Result, Tape, Tensor, TensorError, Var};

/// Outcome of comparing tape gradients against central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// max |analytic − numeric| / max(1, |analytic|) over checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose ±h probes land in different kink regions.
    pub excluded: Vec<usize>,
}

/// Checks the gradient of scalar `f` at `x` against central differences with step `h`.
///
/// A coordinate is excluded when its two probes cross a nondifferentiable point
/// of a relu-like or clamp op (the tape's region signatures differ).
pub fn grad_check<F>(f: F, x: &Tensor, h: f64) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    let analytic = {
        let tape = Tape::new();
        let leaf = tape.leaf(x.clone());
        let out = f(&tape, leaf)?;
        let value = out.item()?;
        if !value.is_finite() {
            return Err(TensorError::Numeric(format!("f(x) = {value}")));
        }
        tape.backward(out)?.wrt(leaf)
    };
    if !analytic.is_finite() {
        return Err(TensorError::Numeric("analytic gradient is not finite".into()));
    }

    let probe = |point: Tensor| -> Result<(f64, Vec<u8>)> {
        let tape = Tape::with_region_tracking();
        let leaf = tape.constant(point);
        let value = f(&tape, leaf)?.item()?;
        if !value.is_finite() {
            return Err(TensorError::Numeric(format!("f evaluated to {value} during probing")));
        }
        Ok((value, tape.region_signature()))
    };

    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, excluded: Vec::new() };
    for i in 0..x.numel() {
        let mut plus = x.clone();
        plus.data_mut()[i] += h;
        let mut minus = x.clone();
        minus.data_mut()[i] -= h;
        // realized step, not 2h: x ± h is rounded
        let step = plus.data()[i] - minus.data()[i];
        let (fp, region_p) = probe(plus)?;
        let (fm, region_m) = probe(minus)?;
        if region_p != region_m {
            report.excluded.push(i);
            continue;
        }
        let numeric = (fp - fm) / step;
        let a = analytic.data()[i];
        let rel = (a - numeric).abs() / a.abs().max(1.0);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}
