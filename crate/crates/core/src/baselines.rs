//! Smooth-medium index models.
//!
//! The Maxwell-Bloch index follows from density × single-atom
//! polarizability,
//!
//! ```text
//! n_MB(Δ) = √(1 + 3πη/(−Δ − i/2)),
//! ```
//!
//! the Lorentz-Lorenz (Clausius-Mossotti) local-field correction is exactly
//! a detuning shift, `n_LL(Δ) = n_MB(Δ + πη)`, and an inhomogeneously
//! broadened ensemble with resonance distribution `P(ω)` generalizes the MB
//! form to
//!
//! ```text
//! n(Δ) = √(1 + 3πη ∫ P(ω)/(−Δ + ω − i/2) dω).
//! ```
//!
//! The square root is the physical passive branch (`Im n ≥ 0`); for these
//! integrands the imaginary part of the radicand is strictly positive, so
//! the principal root already satisfies it.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::rg::ResonanceHistogram;

#[derive(Debug, thiserror::Error)]
pub enum BaselinesError {
    #[error("maximum of Re n lies on the search boundary at delta = {0}; widen the range")]
    BoundaryMaximum(f64),
    #[error("histogram is not normalized (defect {0:.3e})")]
    NotNormalized(f64),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn passive_sqrt(z: C64) -> C64 {
    let r = z.sqrt();
    if r.im < 0.0 {
        -r
    } else {
        r
    }
}

/// Maxwell-Bloch index `√(1 + 3πη/(−Δ − i/2))`.
pub fn n_mb(delta: f64, eta: f64) -> C64 {
    passive_sqrt(C64::new(1.0, 0.0) + 3.0 * std::f64::consts::PI * eta / C64::new(-delta, -0.5))
}

/// Lorentz-Lorenz index: the MB index shifted by `πη`.
pub fn n_ll(delta: f64, eta: f64) -> C64 {
    n_mb(delta + std::f64::consts::PI * eta, eta)
}

/// Inhomogeneously broadened MB index from a resonance histogram.
///
/// The histogram is taken at face value as a piecewise-constant density and
/// the kernel is integrated exactly over each bin,
/// `∫_bin dω/(−Δ + ω − i/2) = ln[(hi − Δ − i/2)/(lo − Δ − i/2)]`.
/// Plain bin-center sampling would alias the Γ0-wide kernel once the bins
/// are broader than the linewidth, which is the normal situation for the
/// default binning at η ≳ 3. Accepts rescaled histograms (the rescaling is
/// undone through the recorded η).
pub fn n_inhomogeneous(
    delta: f64,
    eta: f64,
    hist: &ResonanceHistogram,
) -> Result<C64, BaselinesError> {
    let defect = hist.normalization_defect();
    if defect > 1e-9 {
        return Err(BaselinesError::NotNormalized(defect));
    }
    // On the unrescaled ω axis a bin carries mass P_b Δω_b; rescaled axes
    // carry the same mass per bin, only the edges must be mapped back.
    let edge_scale = if hist.rescaled { hist.eta } else { 1.0 };
    let width = hist.bin_width();
    let mut integral = C64::new(0.0, 0.0);
    for b in 0..hist.bins() {
        let mass = hist.density[b] * width;
        if mass == 0.0 {
            continue;
        }
        let lo = (hist.min + b as f64 * width) * edge_scale;
        let hi = lo + width * edge_scale;
        let kernel =
            (C64::new(hi - delta, -0.5) / C64::new(lo - delta, -0.5)).ln() / (hi - lo);
        integral += mass * kernel;
    }
    Ok(passive_sqrt(C64::new(1.0, 0.0) + 3.0 * std::f64::consts::PI * eta * integral))
}

/// Detuning-optimized maximum of `Re n`: a 401-point scan of the range
/// followed by golden-section refinement to |ΔΔ| < 1e-3. A maximum on the
/// range boundary is flagged as an error.
pub fn max_index(
    evaluate: impl Fn(f64) -> C64,
    range: (f64, f64),
) -> Result<(f64, f64), BaselinesError> {
    const COARSE: usize = 401;
    let (lo, hi) = range;
    let step = (hi - lo) / (COARSE - 1) as f64;
    let mut best = (lo, evaluate(lo).re);
    let mut best_idx = 0;
    for k in 1..COARSE {
        let d = lo + step * k as f64;
        let v = evaluate(d).re;
        if v > best.1 {
            best = (d, v);
            best_idx = k;
        }
    }
    if best_idx == 0 || best_idx == COARSE - 1 {
        return Err(BaselinesError::BoundaryMaximum(best.0));
    }
    // golden-section refinement inside the bracketing neighbours
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = evaluate(c).re;
    let mut fd = evaluate(d).re;
    while (b - a).abs() > 1e-3 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = evaluate(c).re;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = evaluate(d).re;
        }
    }
    let delta_star = 0.5 * (a + b);
    Ok((delta_star, evaluate(delta_star).re))
}

/// Which analytic model produced an [`IndexCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexModel {
    Mb,
    Ll,
    MbInhomogeneous,
}

impl std::fmt::Display for IndexModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IndexModel::Mb => write!(f, "MB"),
            IndexModel::Ll => write!(f, "LL"),
            IndexModel::MbInhomogeneous => write!(f, "MB-inhomogeneous"),
        }
    }
}

/// An analytic index curve on a detuning grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexCurve {
    pub detunings: Vec<f64>,
    pub n: Vec<C64>,
    pub model: IndexModel,
    pub eta: f64,
}

impl IndexCurve {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), BaselinesError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["delta", "re_n", "im_n", "model", "eta"])?;
        for (d, n) in self.detunings.iter().zip(&self.n) {
            w.write_record([
                format!("{d:.12e}"),
                format!("{:.12e}", n.re),
                format!("{:.12e}", n.im),
                self.model.to_string(),
                format!("{}", self.eta),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
