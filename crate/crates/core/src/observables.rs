//! Mode-projected transmission, complex-index extraction, optical-theorem
//! cross sections and far-field intensity maps.
//!
//! The transmission coefficient is the overlap of the total field with the
//! incident Gaussian mode,
//!
//! ```text
//! t(Δ) = 1 + 3i/(w0 k0)² · Σ_j E_in*(r_j)/E0 · c_j(Δ),
//! ```
//!
//! and the disorder-averaged `⟨t(Δ)⟩` defines the complex index through
//! `⟨t⟩ = exp{i [n(Δ) − 1] k0 d}`. A finite-slab Fresnel inversion is kept
//! as an independent cross-check extractor; the two agree closely wherever
//! the medium behaves as a smooth slab.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{AtomicConfiguration, Vec3};
use crate::optics::{gaussian_beam, scattered_field, BeamSpec};
use crate::solver::DipoleSolution;
use crate::stats::{mean_and_stderr, KahanComplex};

#[derive(Debug, thiserror::Error)]
pub enum ObservablesError {
    #[error("cannot extract an index from zero transmission")]
    ZeroTransmission,
    #[error("Fresnel inversion did not converge (seed value {seed})")]
    FresnelNoConvergence { seed: C64 },
    #[error("need at least 2 configurations per detuning, got {0}")]
    TooFewConfigurations(usize),
    #[error("samples at grid index {index} carry detuning {found}, expected {expected}")]
    MismatchedGrids { index: usize, found: f64, expected: f64 },
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Mode-projected transmission of one configuration at one detuning.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransmissionSample {
    pub t: C64,
    pub delta: f64,
    pub config_seed: u64,
}

/// `t(Δ) = 1 + 3i/(w0 k0)² Σ_j E_in*(r_j)/E0 c_j(Δ)`.
///
/// The solution must have been driven by `E_in(r_j)/E0` of the same beam.
pub fn transmission(
    config: &AtomicConfiguration,
    solution: &DipoleSolution,
    beam: BeamSpec,
) -> TransmissionSample {
    let mut overlap = KahanComplex::default();
    for (p, c) in config.positions.iter().zip(&solution.amplitudes) {
        overlap.add(gaussian_beam(*p, beam).conj() * c);
    }
    let prefactor = C64::new(0.0, 3.0 / (beam.waist * beam.waist));
    TransmissionSample {
        t: C64::new(1.0, 0.0) + prefactor * overlap.value(),
        delta: solution.delta,
        config_seed: config.seed,
    }
}

/// Invert `⟨t⟩ = exp{i(n−1) k0 d}` with the principal branch.
pub fn index_from_transmission(mean_t: C64, thickness: f64) -> Result<C64, ObservablesError> {
    if mean_t.norm_sqr() == 0.0 {
        return Err(ObservablesError::ZeroTransmission);
    }
    // n = 1 + arg(t)/d − i·ln|t|/d
    Ok(C64::new(1.0 + mean_t.arg() / thickness, -mean_t.norm().ln() / thickness))
}

/// Index along a detuning grid with phase unwrapping: adjacent grid points
/// are assumed to differ in transmission phase by less than π.
pub fn index_curve_from_transmission(
    mean_t: &[C64],
    thickness: f64,
) -> Result<Vec<C64>, ObservablesError> {
    let mut out = Vec::with_capacity(mean_t.len());
    let mut prev_phase: Option<f64> = None;
    for &t in mean_t {
        if t.norm_sqr() == 0.0 {
            return Err(ObservablesError::ZeroTransmission);
        }
        let mut phase = t.arg();
        if let Some(prev) = prev_phase {
            while phase - prev > std::f64::consts::PI {
                phase -= std::f64::consts::TAU;
            }
            while prev - phase > std::f64::consts::PI {
                phase += std::f64::consts::TAU;
            }
        }
        prev_phase = Some(phase);
        out.push(C64::new(1.0 + phase / thickness, -t.norm().ln() / thickness));
    }
    Ok(out)
}

/// Transmission of a homogeneous slab of index `n` and thickness `d`,
/// referenced to vacuum propagation over the same distance (so `n = 1`
/// gives exactly 1).
pub fn slab_transmission(n: C64, thickness: f64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let phase = (i * (n - one) * thickness).exp();
    let internal = (2.0 * i * n * thickness).exp();
    4.0 * n * phase / ((one + n) * (one + n) - (one - n) * (one - n) * internal)
}

/// Extract the index by numerically inverting the slab Fresnel formula,
/// seeded from the logarithmic extraction.
pub fn index_fresnel(mean_t: C64, thickness: f64) -> Result<C64, ObservablesError> {
    let seed = index_from_transmission(mean_t, thickness)?;
    let mut n = seed;
    let h = 1e-7;
    for _ in 0..100 {
        let f = slab_transmission(n, thickness) - mean_t;
        if f.norm() <= 1e-12 * mean_t.norm().max(1e-300) {
            return Ok(n);
        }
        // complex Newton step with a numerical derivative
        let df = (slab_transmission(n + C64::new(h, 0.0), thickness)
            - slab_transmission(n - C64::new(h, 0.0), thickness))
            / (2.0 * h);
        if df.norm_sqr() == 0.0 {
            break;
        }
        let step = f / df;
        n -= step;
        if step.norm() < 1e-13 * n.norm().max(1.0) {
            let f = slab_transmission(n, thickness) - mean_t;
            if f.norm() <= 1e-8 * mean_t.norm().max(1e-300) {
                return Ok(n);
            }
        }
    }
    let f = slab_transmission(n, thickness) - mean_t;
    if f.norm() <= 1e-8 * mean_t.norm().max(1e-300) {
        Ok(n)
    } else {
        Err(ObservablesError::FresnelNoConvergence { seed })
    }
}

/// Optical-theorem scattering cross section in units of
/// `σ_sc = 3λ0²/2π`: `σ/σ_sc = ½ Im Σ_j drive_j* c_j`.
pub fn scattering_cross_section(solution: &DipoleSolution, drive: &[C64]) -> f64 {
    let mut acc = KahanComplex::default();
    for (d, c) in drive.iter().zip(&solution.amplitudes) {
        acc.add(d.conj() * c);
    }
    0.5 * acc.value().im
}

/// Relative intensity `|E(r)|²` of the field radiated by fixed dipole
/// moments, evaluated on a grid of observation points.
pub fn far_field_intensity(
    dipoles: &[(Vec3, [C64; 3])],
    surface_grid: &[Vec3],
) -> Result<Vec<f64>, ObservablesError> {
    surface_grid
        .iter()
        .map(|&r| {
            let e = scattered_field(dipoles, r)?;
            Ok(e[0].norm_sqr() + e[1].norm_sqr() + e[2].norm_sqr())
        })
        .collect()
}

/// Same as [`far_field_intensity`] with an incident field added coherently.
pub fn far_field_intensity_with_incident(
    dipoles: &[(Vec3, [C64; 3])],
    surface_grid: &[Vec3],
    incident: impl Fn(Vec3) -> [C64; 3],
) -> Result<Vec<f64>, ObservablesError> {
    surface_grid
        .iter()
        .map(|&r| {
            let mut e = scattered_field(dipoles, r)?;
            let inc = incident(r);
            for k in 0..3 {
                e[k] += inc[k];
            }
            Ok(e[0].norm_sqr() + e[1].norm_sqr() + e[2].norm_sqr())
        })
        .collect()
}

/// Disorder-averaged transmission and extracted index on a detuning grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub detunings: Vec<f64>,
    pub t_mean: Vec<C64>,
    /// Componentwise (re, im) standard errors of the mean transmission.
    pub t_stderr: Vec<C64>,
    pub n: Vec<C64>,
    /// Componentwise (re, im) standard errors of the extracted index.
    pub n_stderr: Vec<C64>,
    pub n_configs: usize,
    /// Slab thickness used in the extraction, in `1/k0` units.
    pub thickness: f64,
}

impl Spectrum {
    /// Passivity diagnostics: `|⟨t⟩| ≤ 1 + 3σ` and `Im n ≥ −3σ` at every
    /// detuning. Returns a description per violated point.
    pub fn passivity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for k in 0..self.detunings.len() {
            let t = self.t_mean[k];
            let sigma = self.t_stderr[k];
            let mag_err = if t.norm() > 0.0 {
                ((t.re * sigma.re).powi(2) + (t.im * sigma.im).powi(2)).sqrt() / t.norm()
            } else {
                sigma.norm()
            };
            if t.norm() > 1.0 + 3.0 * mag_err {
                out.push(format!(
                    "delta {}: |t| = {} exceeds 1 + 3σ = {}",
                    self.detunings[k],
                    t.norm(),
                    1.0 + 3.0 * mag_err
                ));
            }
            if self.n[k].im < -3.0 * self.n_stderr[k].im {
                out.push(format!(
                    "delta {}: Im n = {} below −3σ = {}",
                    self.detunings[k],
                    self.n[k].im,
                    -3.0 * self.n_stderr[k].im
                ));
            }
        }
        out
    }

    /// Index of the grid point with the largest `Re n`.
    pub fn argmax_re_n(&self) -> usize {
        let mut best = 0;
        for k in 1..self.n.len() {
            if self.n[k].re > self.n[best].re {
                best = k;
            }
        }
        best
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), ObservablesError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "delta",
            "re_t_mean",
            "im_t_mean",
            "re_t_stderr",
            "im_t_stderr",
            "re_n",
            "im_n",
            "re_n_err",
            "im_n_err",
            "n_configs",
        ])?;
        for k in 0..self.detunings.len() {
            w.write_record([
                format!("{:.17e}", self.detunings[k]),
                format!("{:.17e}", self.t_mean[k].re),
                format!("{:.17e}", self.t_mean[k].im),
                format!("{:.17e}", self.t_stderr[k].re),
                format!("{:.17e}", self.t_stderr[k].im),
                format!("{:.17e}", self.n[k].re),
                format!("{:.17e}", self.n[k].im),
                format!("{:.17e}", self.n_stderr[k].re),
                format!("{:.17e}", self.n_stderr[k].im),
                self.n_configs.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Average per-configuration transmissions into a [`Spectrum`].
///
/// `samples[k]` holds the samples of grid point `k` (all with the same
/// detuning, one per configuration, in configuration order so the reduction
/// is worker-count independent). Index errors come from first-order
/// propagation of the transmission errors through the extraction;
/// cross-covariance of the components is neglected.
pub fn average_spectra(
    detunings: &[f64],
    samples: &[Vec<TransmissionSample>],
    thickness: f64,
) -> Result<Spectrum, ObservablesError> {
    assert_eq!(detunings.len(), samples.len());
    let mut t_mean = Vec::with_capacity(detunings.len());
    let mut t_stderr = Vec::with_capacity(detunings.len());
    let mut n_configs = usize::MAX;
    for (k, group) in samples.iter().enumerate() {
        if group.len() < 2 {
            return Err(ObservablesError::TooFewConfigurations(group.len()));
        }
        n_configs = n_configs.min(group.len());
        for s in group {
            if s.delta != detunings[k] {
                return Err(ObservablesError::MismatchedGrids {
                    index: k,
                    found: s.delta,
                    expected: detunings[k],
                });
            }
        }
        let re: Vec<f64> = group.iter().map(|s| s.t.re).collect();
        let im: Vec<f64> = group.iter().map(|s| s.t.im).collect();
        let (re_mean, re_err) = mean_and_stderr(&re);
        let (im_mean, im_err) = mean_and_stderr(&im);
        t_mean.push(C64::new(re_mean, im_mean));
        t_stderr.push(C64::new(re_err, im_err));
    }
    let n = index_curve_from_transmission(&t_mean, thickness)?;
    let n_stderr = t_mean
        .iter()
        .zip(&t_stderr)
        .map(|(t, sigma)| {
            // δn = w δt with w = 1/(i k0 d t)
            let w = C64::new(0.0, -1.0) / (thickness * t);
            C64::new(
                ((w.re * sigma.re).powi(2) + (w.im * sigma.im).powi(2)).sqrt(),
                ((w.im * sigma.re).powi(2) + (w.re * sigma.im).powi(2)).sqrt(),
            )
        })
        .collect();
    Ok(Spectrum {
        detunings: detunings.to_vec(),
        t_mean,
        t_stderr,
        n,
        n_stderr,
        n_configs,
        thickness,
    })
}

/// Write a far-field map as `theta,phi,intensity` rows.
pub fn write_far_field_csv(
    path: &std::path::Path,
    rows: &[(f64, f64, f64)],
) -> Result<(), ObservablesError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta", "phi", "intensity"])?;
    for (theta, phi, intensity) in rows {
        w.write_record([
            format!("{theta:.12e}"),
            format!("{phi:.12e}"),
            format!("{intensity:.12e}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
