//! Central-difference verification of hand-written backward passes.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `max_i |analytic_i − numeric_i| / max(1e-8, |numeric_i|)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares `analytic` against central differences of the scalar
/// `L(x) = Σ_i cotangent_i · f(x)_i`, one coordinate at a time:
/// `(L(x + h·e_i) − L(x − h·e_i)) / 2h`.
pub fn finite_diff_check<F>(mut f: F, x: &[f64], cotangent: &[f64], analytic: &[f64], step: f64) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(alloc::format!("finite-difference step {step} must be > 0")));
    }
    if analytic.len() != x.len() {
        return Err(Error::ShapeMismatch(alloc::format!(
            "{} analytic gradient entries for {} inputs",
            analytic.len(),
            x.len()
        )));
    }
    if let Some(v) = x.iter().chain(cotangent).chain(analytic).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(alloc::format!("gradient check input {v}")));
    }
    let mut loss = |probe: &[f64]| -> Result<f64> {
        let y = f(probe)?;
        if y.len() != cotangent.len() {
            return Err(Error::ShapeMismatch(alloc::format!(
                "{} outputs for {} cotangent entries",
                y.len(),
                cotangent.len()
            )));
        }
        let l: f64 = y.iter().zip(cotangent).map(|(a, b)| a * b).sum();
        if !l.is_finite() {
            return Err(Error::NonFinite("loss during gradient check".into()));
        }
        Ok(l)
    };
    let mut probe = x.to_vec();
    let mut report = GradCheck { max_rel_error: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0, coordinates: x.len() };
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = loss(&probe)?;
        probe[i] = x[i] - step;
        let minus = loss(&probe)?;
        probe[i] = x[i];
        let numeric = (plus - minus) / (2.0 * step);
        let rel = libm::fabs(analytic[i] - numeric) / libm::fabs(numeric).max(1e-8);
        if rel > report.max_rel_error || i == 0 {
            report = GradCheck { max_rel_error: rel, worst_index: i, analytic: analytic[i], numeric, coordinates: x.len() };
        }
    }
    Ok(report)
}
