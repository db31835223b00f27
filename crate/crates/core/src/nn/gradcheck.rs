use super::mlp::{backward_mlp, forward_mlp, KernelMLP};
use crate::Result;

/// Central-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub worst: Option<ParamError>,
    /// Entries whose relative error exceeds the tolerance.
    pub failures: Vec<ParamError>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn worst_relative_error(&self) -> f64 {
        self.worst.as_ref().map_or(0.0, |w| w.relative_error)
    }
}

/// `|a − n| / max(|a|, |n|, 1e-6)`; the floor keeps vanishing gradients from
/// turning round-off into a large ratio.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares [`backward_mlp`] with central finite differences of the score.
pub fn grad_check(net: &KernelMLP, input: &[f64], tolerance: f64) -> Result<GradCheckReport> {
    let (_, cache) = forward_mlp(net, input)?;
    let analytic = backward_mlp(net, &cache, 1.0)?;
    grad_check_against(net, input, &analytic, tolerance)
}

/// Compares a supplied gradient vector with central finite differences.
pub fn grad_check_against(net: &KernelMLP, input: &[f64], analytic: &[f64], tolerance: f64) -> Result<GradCheckReport> {
    if !(tolerance > 0.0) {
        return Err(crate::Error::invalid("tolerance must be positive"));
    }
    let base = net.params();
    if analytic.len() != base.len() {
        return Err(crate::Error::Dimension {
            context: "analytic gradient",
            expected: base.len(),
            actual: analytic.len(),
        });
    }
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut worst: Option<ParamError> = None;
    let mut failures = Vec::new();
    for i in 0..base.len() {
        params[i] = base[i] + FD_STEP;
        probe.set_params(&params)?;
        let plus = forward_mlp(&probe, input)?.0;
        params[i] = base[i] - FD_STEP;
        probe.set_params(&params)?;
        let minus = forward_mlp(&probe, input)?.0;
        params[i] = base[i];
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let e = ParamError {
            index: i,
            analytic: analytic[i],
            numeric,
            relative_error: relative_error(analytic[i], numeric),
        };
        if e.relative_error > tolerance {
            failures.push(e.clone());
        }
        if worst.as_ref().is_none_or(|w| e.relative_error > w.relative_error) {
            worst = Some(e);
        }
    }
    Ok(GradCheckReport {
        tolerance,
        worst,
        failures,
    })
}
