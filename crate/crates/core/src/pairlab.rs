//! Exact two-atom analytics: eigenmodes, spectra, resonant cross sections
//! and orientation averages.
//!
//! Two x̂-polarized atoms at separation `ρ12 ≪ 1` hybridize into a symmetric
//! and an anti-symmetric mode with frequencies split by the near field
//! (`ν ≈ ∓Re G12`) and linewidths `Γ± = 1 ± 2 Im G12` (superradiant → 2,
//! subradiant → ρ12²(2 − cos²θ)/10). The resonant cross sections of the two
//! modes are defined through the full pair response, `σ± ≡ σ_pair(Δ = ν±)`.
//!
//! The separation vector is parametrized as
//! `ρ̂ = (cos θ, sin θ cos φ, sin θ sin φ)` with θ measured from the
//! polarization axis x̂; atoms sit at `±ρ12/2` around the origin.

use num_complex::Complex64 as C64;

use crate::ensemble::Vec3;
use crate::observables::scattering_cross_section;
use crate::optics::{gaussian_beam, green_projected, plane_wave, BeamSpec, GreenCoupling};
use crate::solver::{solve_spectrum_system, Backend, DipoleSolution, System};

#[derive(Debug, thiserror::Error)]
pub enum PairlabError {
    #[error("separation {rho} below the floor rho_min = {rho_min}")]
    SeparationTooSmall { rho: f64, rho_min: f64 },
    #[error("asymptotic cross sections need rho <= 0.2 (got {0}) and identical atoms")]
    OutsideAsymptoticRegime(f64),
    #[error("spectrum grid does not resolve two peaks (found {0})")]
    PeaksNotResolved(usize),
    #[error(transparent)]
    Optics(#[from] crate::optics::OpticsError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
}

/// How the pair is driven.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairDrive {
    /// x̂-polarized plane wave along ẑ.
    PlaneWave,
    /// Paraxial Gaussian beam focused at the pair center.
    Gaussian(BeamSpec),
}

/// A two-atom problem: separation vector, detuning offset
/// `δω12 = (ω1 − ω2)/2`, and drive.
#[derive(Debug, Clone, Copy)]
pub struct PairSpec {
    pub separation: Vec3,
    pub delta_omega: f64,
    pub drive: PairDrive,
}

impl PairSpec {
    pub fn identical(separation: Vec3) -> Self {
        PairSpec { separation, delta_omega: 0.0, drive: PairDrive::PlaneWave }
    }

    pub fn rho(&self) -> f64 {
        let s = self.separation;
        (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt()
    }

    /// Atom positions `±ρ12/2` around the origin.
    pub fn positions(&self) -> [Vec3; 2] {
        let h = [0.5 * self.separation[0], 0.5 * self.separation[1], 0.5 * self.separation[2]];
        [h, [-h[0], -h[1], -h[2]]]
    }

    /// Individual resonance frequencies `(ω1, ω2) = (±δω12)`.
    pub fn omegas(&self) -> [f64; 2] {
        [self.delta_omega, -self.delta_omega]
    }

    pub fn coupling(&self) -> Result<GreenCoupling, PairlabError> {
        Ok(green_projected(self.separation, 0.0)?)
    }

    fn drive_at(&self, p: Vec3) -> C64 {
        match self.drive {
            PairDrive::PlaneWave => plane_wave(p),
            PairDrive::Gaussian(beam) => gaussian_beam(p, beam),
        }
    }

    fn drive_vector(&self) -> [C64; 2] {
        let pos = self.positions();
        [self.drive_at(pos[0]), self.drive_at(pos[1])]
    }

    fn interaction(&self) -> Result<crate::solver::InteractionMatrix, PairlabError> {
        let g12 = self.coupling()?;
        let i_half = C64::new(0.0, 0.5);
        Ok(crate::solver::InteractionMatrix {
            g: vec![i_half, g12.value, g12.value, i_half],
            g_near: vec![0.0, g12.near_part, g12.near_part, 0.0],
            n: 2,
            seed: 0,
        })
    }

    fn solve(&self, detunings: &[f64]) -> Result<Vec<DipoleSolution>, PairlabError> {
        let matrix = self.interaction()?;
        let omegas = self.omegas();
        let system = System::Dense { matrix: &matrix, omega_eff: Some(&omegas), l_mask: None };
        Ok(solve_spectrum_system(&system, &self.drive_vector(), detunings, Backend::Lu)?)
    }
}

/// Exact eigenmodes of the 2×2 matrix `diag(ω) − G_pair`.
///
/// `plus` labels the mode whose eigenvector is closer to the symmetric
/// combination (1,1)/√2, so `gamma_plus ≈ 2` for close pairs regardless of
/// the sign of the near-field coupling.
#[derive(Debug, Clone, Copy)]
pub struct PairEigenmodes {
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub mode_plus: [C64; 2],
    pub mode_minus: [C64; 2],
}

/// Frequencies are real parts of the eigenvalues, linewidths are −2× the
/// imaginary parts (an isolated atom has linewidth 1).
pub fn pair_eigenmodes(pair: &PairSpec) -> Result<PairEigenmodes, PairlabError> {
    let g12 = pair.coupling()?.value;
    let [omega1, omega2] = pair.omegas();
    let mean = C64::new(0.5 * (omega1 + omega2), -0.5);
    let half_diff = 0.5 * (omega1 - omega2);
    let root = (C64::new(half_diff, 0.0).powi(2) + g12 * g12).sqrt();
    let (lambda_a, lambda_b) = (mean + root, mean - root);
    // eigenvector of [[ω1−i/2, −g],[−g, ω2−i/2]] for eigenvalue λ:
    // (−g, λ − (ω1 − i/2)) up to normalization
    let vector = |lambda: C64| -> [C64; 2] {
        let v = [-g12, lambda - C64::new(omega1, -0.5)];
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        [v[0] / norm, v[1] / norm]
    };
    let (va, vb) = (vector(lambda_a), vector(lambda_b));
    let symmetric_weight = |v: &[C64; 2]| (v[0] + v[1]).norm_sqr();
    let a_is_plus = symmetric_weight(&va) >= symmetric_weight(&vb);
    let ((lp, vp), (lm, vm)) =
        if a_is_plus { ((lambda_a, va), (lambda_b, vb)) } else { ((lambda_b, vb), (lambda_a, va)) };
    Ok(PairEigenmodes {
        omega_plus: lp.re,
        omega_minus: lm.re,
        gamma_plus: -2.0 * lp.im,
        gamma_minus: -2.0 * lm.im,
        mode_plus: vp,
        mode_minus: vm,
    })
}

/// One point of a pair absorption spectrum.
#[derive(Debug, Clone, Copy)]
pub struct PairSpectrumPoint {
    pub delta: f64,
    /// Optical-theorem cross section, units of `σ_sc`.
    pub sigma: f64,
    /// `−ln|t|` of the pair transmission (Eq.-7-style with `k0 d = 1`;
    /// the two-atom "index" has no intrinsic thickness, so this fixes the
    /// normalization explicitly).
    pub im_n: f64,
}

/// A located resonance peak.
#[derive(Debug, Clone, Copy)]
pub struct Peak {
    pub position: f64,
    /// Full width at half maximum from linear interpolation of the
    /// half-crossings.
    pub width: f64,
    pub height: f64,
}

/// Solve the pair over a detuning grid and report σ(Δ) and the pair "index".
pub fn pair_spectrum(
    pair: &PairSpec,
    detunings: &[f64],
) -> Result<Vec<PairSpectrumPoint>, PairlabError> {
    let drive = pair.drive_vector();
    let solutions = pair.solve(detunings)?;
    let beam_for_t = BeamSpec::new(50.0 * crate::config::LAMBDA0);
    Ok(solutions
        .iter()
        .map(|sol| {
            let sigma = scattering_cross_section(sol, &drive);
            // project on a very wide Gaussian mode (plane-wave limit)
            let mut overlap = C64::new(0.0, 0.0);
            for (p, c) in pair.positions().iter().zip(&sol.amplitudes) {
                overlap += gaussian_beam(*p, beam_for_t).conj() * c;
            }
            let t = C64::new(1.0, 0.0)
                + C64::new(0.0, 3.0 / (beam_for_t.waist * beam_for_t.waist)) * overlap;
            PairSpectrumPoint { delta: sol.delta, sigma, im_n: -t.norm().ln() }
        })
        .collect())
}

/// Find the two tallest interior local maxima of σ(Δ) and their FWHM.
pub fn find_two_peaks(points: &[PairSpectrumPoint]) -> Result<[Peak; 2], PairlabError> {
    let mut maxima = Vec::new();
    for k in 1..points.len().saturating_sub(1) {
        if points[k].sigma > points[k - 1].sigma && points[k].sigma >= points[k + 1].sigma {
            maxima.push(k);
        }
    }
    if maxima.len() < 2 {
        return Err(PairlabError::PeaksNotResolved(maxima.len()));
    }
    maxima.sort_by(|&a, &b| points[b].sigma.total_cmp(&points[a].sigma));
    let mut peaks = Vec::new();
    for &k in maxima.iter().take(2) {
        let height = points[k].sigma;
        let half = 0.5 * height;
        // walk outwards to the half-maximum crossings
        let mut left = points[k].delta;
        for m in (0..k).rev() {
            if points[m].sigma <= half {
                let (x0, y0) = (points[m].delta, points[m].sigma);
                let (x1, y1) = (points[m + 1].delta, points[m + 1].sigma);
                left = x0 + (half - y0) / (y1 - y0) * (x1 - x0);
                break;
            }
        }
        let mut right = points[k].delta;
        for m in (k + 1)..points.len() {
            if points[m].sigma <= half {
                let (x0, y0) = (points[m - 1].delta, points[m - 1].sigma);
                let (x1, y1) = (points[m].delta, points[m].sigma);
                right = x0 + (half - y0) / (y1 - y0) * (x1 - x0);
                break;
            }
        }
        peaks.push(Peak { position: points[k].delta, width: right - left, height });
    }
    peaks.sort_by(|a, b| a.position.total_cmp(&b.position));
    Ok([peaks[0], peaks[1]])
}

/// Resonant cross sections of the two modes, `σ± = σ_pair(Δ = ν±)`,
/// from the full two-atom solve (valid at any separation).
#[derive(Debug, Clone, Copy)]
pub struct PairCrossSections {
    pub sigma_plus: f64,
    pub sigma_minus: f64,
}

pub fn pair_cross_sections(pair: &PairSpec) -> Result<PairCrossSections, PairlabError> {
    let modes = pair_eigenmodes(pair)?;
    let drive = pair.drive_vector();
    let solutions = pair.solve(&[modes.omega_plus, modes.omega_minus])?;
    Ok(PairCrossSections {
        sigma_plus: scattering_cross_section(&solutions[0], &drive),
        sigma_minus: scattering_cross_section(&solutions[1], &drive),
    })
}

/// Small-separation closed form (plane-wave drive, identical atoms):
/// `σ±/σ = (E12*·v±)(E12·v±)/Γ±` with `v± = (1,±1)/√2` and
/// `Γ± = 1 ± 2 Im G12`.
pub fn asymptotic_pair_cross_sections(pair: &PairSpec) -> Result<PairCrossSections, PairlabError> {
    if pair.rho() > 0.2 || pair.delta_omega != 0.0 {
        return Err(PairlabError::OutsideAsymptoticRegime(pair.rho()));
    }
    let g12 = pair.coupling()?.value;
    let drive = pair.drive_vector();
    let sqrt2 = f64::sqrt(2.0);
    let e_plus = (drive[0] + drive[1]) / sqrt2;
    let e_minus = (drive[0] - drive[1]) / sqrt2;
    Ok(PairCrossSections {
        sigma_plus: e_plus.norm_sqr() / (1.0 + 2.0 * g12.im),
        sigma_minus: e_minus.norm_sqr() / (1.0 - 2.0 * g12.im),
    })
}

/// Gauss-Legendre nodes and weights on [−1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `σ₋(θ, φ)/σ` of an identical pair at separation `rho` and orientation
/// `(θ, φ)`, by the small-separation closed form.
pub fn antisym_cross_section_at(rho: f64, theta: f64, phi: f64) -> f64 {
    let sep = [
        rho * theta.cos(),
        rho * theta.sin() * phi.cos(),
        rho * theta.sin() * phi.sin(),
    ];
    let pair = PairSpec::identical(sep);
    asymptotic_pair_cross_sections(&pair).expect("rho <= 0.2 by construction").sigma_minus
}

/// Orientation average `⟨σ₋/σ⟩` over the sphere (solid-angle weight), by
/// 64×64 Gauss-Legendre × uniform-φ quadrature.
pub fn antisym_avg_cross_section(rho: f64) -> Result<f64, PairlabError> {
    if rho > 0.2 {
        return Err(PairlabError::OutsideAsymptoticRegime(rho));
    }
    let (nodes, weights) = gauss_legendre(64);
    let n_phi = 64;
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        let theta = x.acos();
        for kp in 0..n_phi {
            let phi = std::f64::consts::TAU * (kp as f64 + 0.5) / n_phi as f64;
            total += w * antisym_cross_section_at(rho, theta, phi) / n_phi as f64;
        }
    }
    // ∫ dΩ/4π with dΩ = dcosθ dφ: the cosθ weights sum to 2
    Ok(total / 2.0)
}

/// Closed-form orientation average for a detuned pair,
/// `ζ = δω12/(ρ12 G12^near)`:
/// `⟨σ₋(ζ)/σ⟩ = (5/2)[1 − (3ζ²+1)·artanh(1/√(5ζ²+2))/√(5ζ²+2)]`,
/// which rises from ≈0.94 at ζ = 0 towards 1 as |ζ| → ∞.
pub fn antisym_avg_cross_section_zeta(zeta: f64) -> f64 {
    let w = 5.0 * zeta * zeta + 2.0;
    let root = w.sqrt();
    2.5 * (1.0 - (3.0 * zeta * zeta + 1.0) * (1.0 / root).atanh() / root)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_pair_frequencies_are_near_field_split() {
        let rho = 0.05;
        let pair = PairSpec::identical([rho, 0.0, 0.0]);
        let modes = pair_eigenmodes(&pair).unwrap();
        let g_near = 3.0 / (2.0 * rho * rho * rho); // 12000
        assert!((modes.omega_plus + g_near).abs() / g_near < 0.02, "ω+ = {}", modes.omega_plus);
        assert!((modes.omega_minus - g_near).abs() / g_near < 0.02);
    }

    #[test]
    fn linewidths_follow_the_exact_two_atom_algebra() {
        // Γ± = 1 ± 2 Im G12; the subradiant width is ρ²(2 − cos²θ)/10 to
        // leading order, so Γ₋/ρ² ranges over [0.1, 0.2] with orientation.
        for (dir, expect) in [([1.0, 0.0, 0.0], 0.1), ([0.0, 1.0, 0.0], 0.2), ([0.0, 0.0, 1.0], 0.2)]
        {
            let rho = 0.05;
            let pair = PairSpec::identical([rho * dir[0], rho * dir[1], rho * dir[2]]);
            let modes = pair_eigenmodes(&pair).unwrap();
            assert!(modes.gamma_plus > 1.9 && modes.gamma_plus <= 2.0);
            let ratio = modes.gamma_minus / (rho * rho);
            assert!((ratio - expect).abs() < 0.01 * expect.max(0.1), "Γ₋/ρ² = {ratio}");
        }
    }

    #[test]
    fn subradiant_width_scales_quadratically() {
        let widths: Vec<f64> = [0.02, 0.04, 0.08]
            .iter()
            .map(|&rho| {
                let pair = PairSpec::identical([rho, 0.0, 0.0]);
                pair_eigenmodes(&pair).unwrap().gamma_minus
            })
            .collect();
        let slope1 = (widths[1] / widths[0]).log2();
        let slope2 = (widths[2] / widths[1]).log2();
        assert!((slope1 - 2.0).abs() < 0.01, "exponent {slope1}");
        assert!((slope2 - 2.0).abs() < 0.01, "exponent {slope2}");
    }

    #[test]
    fn detuned_pair_decouples() {
        let rho = 0.3;
        let g_near = 3.0f64 / (2.0 * rho * rho * rho);
        let delta_omega = 500.0 * g_near;
        let pair = PairSpec {
            separation: [rho, 0.0, 0.0],
            delta_omega,
            drive: PairDrive::PlaneWave,
        };
        let modes = pair_eigenmodes(&pair).unwrap();
        let mut freqs = [modes.omega_plus, modes.omega_minus];
        freqs.sort_by(f64::total_cmp);
        assert!((freqs[0] + delta_omega).abs() / delta_omega < 1e-4);
        assert!((freqs[1] - delta_omega).abs() / delta_omega < 1e-4);
    }

    #[test]
    fn exchange_symmetry_of_pair_observables() {
        let pair_a = PairSpec {
            separation: [0.05, 0.03, -0.02],
            delta_omega: 0.8,
            drive: PairDrive::PlaneWave,
        };
        // swapping the atom labels flips the separation and the offset sign
        let pair_b = PairSpec {
            separation: [-0.05, -0.03, 0.02],
            delta_omega: -0.8,
            drive: PairDrive::PlaneWave,
        };
        let ma = pair_eigenmodes(&pair_a).unwrap();
        let mb = pair_eigenmodes(&pair_b).unwrap();
        assert!((ma.omega_plus - mb.omega_plus).abs() < 1e-10);
        assert!((ma.gamma_minus - mb.gamma_minus).abs() < 1e-12);
        let sa = pair_cross_sections(&pair_a).unwrap();
        let sb = pair_cross_sections(&pair_b).unwrap();
        assert!((sa.sigma_plus - sb.sigma_plus).abs() < 1e-9);
        assert!((sa.sigma_minus - sb.sigma_minus).abs() < 1e-9);
    }

    #[test]
    fn spectrum_peaks_sit_at_the_eigenfrequencies() {
        // ẑ-aligned separation so the drive phase difference excites both
        // modes (an x̂-aligned pair leaves the anti-symmetric mode dark)
        let rho = 0.1;
        let pair = PairSpec::identical([0.0, 0.0, rho]);
        let modes = pair_eigenmodes(&pair).unwrap();
        // adaptive grid: fine cluster around each resonance
        let mut grid = Vec::new();
        for (mode, gamma) in
            [(modes.omega_plus, modes.gamma_plus), (modes.omega_minus, modes.gamma_minus)]
        {
            for k in -60..=60 {
                grid.push(mode + k as f64 * gamma / 10.0);
            }
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let spectrum = pair_spectrum(&pair, &grid).unwrap();
        let peaks = find_two_peaks(&spectrum).unwrap();
        // peak positions at ∓Re G12 (the exact eigenfrequencies) within one
        // local grid step
        let g12_re = pair.coupling().unwrap().value.re;
        let mut expect = [-g12_re, g12_re];
        expect.sort_by(f64::total_cmp);
        for (peak, (mode, gamma)) in peaks.iter().zip([
            (modes.omega_plus.min(modes.omega_minus), 0.0),
            (modes.omega_plus.max(modes.omega_minus), 0.0),
        ]) {
            let _ = gamma;
            let step = (modes.gamma_plus.min(modes.gamma_minus)) / 10.0;
            assert!(
                (peak.position - mode).abs() <= 10.0 * step.max(1e-6),
                "peak at {} vs mode at {mode}",
                peak.position
            );
        }
        assert!((peaks[0].position - expect[0]).abs() / expect[0].abs() < 0.02);
        assert!((peaks[1].position - expect[1]).abs() / expect[1].abs() < 0.02);
        // fitted widths vs eigen linewidths within 10%, matched by position
        for peak in &peaks {
            let (gamma, _) = if (peak.position - modes.omega_plus).abs()
                < (peak.position - modes.omega_minus).abs()
            {
                (modes.gamma_plus, "plus")
            } else {
                (modes.gamma_minus, "minus")
            };
            assert!(
                (peak.width / gamma - 1.0).abs() < 0.1,
                "fitted width {} vs Γ = {gamma}",
                peak.width
            );
        }
        let ratio = peaks[0].width.max(peaks[1].width) / peaks[0].width.min(peaks[1].width);
        let expect_ratio = modes.gamma_plus.max(modes.gamma_minus)
            / modes.gamma_plus.min(modes.gamma_minus);
        assert!((ratio / expect_ratio - 1.0).abs() < 0.1);
    }

    #[test]
    fn distant_pair_is_two_independent_atoms() {
        let pair = PairSpec::identical([12.0, 0.0, 0.0]);
        let detunings: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.1).collect();
        let spectrum = pair_spectrum(&pair, &detunings).unwrap();
        for p in &spectrum {
            let single = 0.25 / (p.delta * p.delta + 0.25);
            assert!(
                (p.sigma - 2.0 * single).abs() <= 0.05 * 2.0 * single,
                "σ = {} vs 2×Lorentzian = {} at Δ = {}",
                p.sigma,
                2.0 * single,
                p.delta
            );
        }
        // σ₊ + σ₋ against the independent-atom sum at the two resonances
        let modes = pair_eigenmodes(&pair).unwrap();
        let s = pair_cross_sections(&pair).unwrap();
        let indep = |d: f64| 2.0 * 0.25 / (d * d + 0.25);
        let expect = indep(modes.omega_plus) + indep(modes.omega_minus);
        assert!(
            ((s.sigma_plus + s.sigma_minus) / expect - 1.0).abs() < 0.05,
            "{} vs {expect}",
            s.sigma_plus + s.sigma_minus
        );
    }

    #[test]
    fn close_pair_cross_sections_match_the_small_rho_forms() {
        // σ₊/σ ≈ 1 for any orientation
        for dir in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.6, 0.48, 0.64]] {
            let pair = PairSpec::identical([0.01 * dir[0], 0.01 * dir[1], 0.01 * dir[2]]);
            let s = pair_cross_sections(&pair).unwrap();
            assert!((s.sigma_plus - 1.0).abs() < 0.02, "σ+ = {}", s.sigma_plus);
        }
        // σ₋/σ = f/g: (sinθ sinφ)² / [(2−cos²θ)/5]
        let s = pair_cross_sections(&PairSpec::identical([0.0, 0.0, 0.01])).unwrap();
        assert!((s.sigma_minus - 2.5).abs() < 0.05 * 2.5, "σ− = {}", s.sigma_minus);
        // ŷ-aligned separation: f = 0
        let s = pair_cross_sections(&PairSpec::identical([0.0, 0.01, 0.0])).unwrap();
        assert!(s.sigma_minus.abs() < 1e-3, "σ− = {}", s.sigma_minus);
    }

    #[test]
    fn asymptotic_matches_exact_within_five_percent() {
        let mut state = 0xC0FFEEu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let rho = 0.05;
        let mut checked = 0;
        while checked < 100 {
            let cos_t = 2.0 * next() - 1.0;
            let sin_t = (1.0 - cos_t * cos_t).sqrt();
            let phi = std::f64::consts::TAU * next();
            let sep = [rho * cos_t, rho * sin_t * phi.cos(), rho * sin_t * phi.sin()];
            let pair = PairSpec::identical(sep);
            let exact = pair_cross_sections(&pair).unwrap();
            let asym = asymptotic_pair_cross_sections(&pair).unwrap();
            // skip orientations where the subradiant mode is dark (both → 0)
            if asym.sigma_minus > 1e-2 {
                assert!(
                    (exact.sigma_minus / asym.sigma_minus - 1.0).abs() < 0.05,
                    "σ−: exact {} vs asymptotic {}",
                    exact.sigma_minus,
                    asym.sigma_minus
                );
                checked += 1;
            }
            assert!((exact.sigma_plus / asym.sigma_plus - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn orientation_average_from_two_independent_integrators() {
        let quadrature = antisym_avg_cross_section(0.01).unwrap();
        assert!((quadrature - 0.94).abs() <= 0.01, "⟨σ−/σ⟩ = {quadrature}");

        // Monte Carlo oracle with its own statistics
        let mut state = 0xFACEu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let samples = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            let cos_t = 2.0 * next() - 1.0;
            let phi = std::f64::consts::TAU * next();
            let v = antisym_cross_section_at(0.01, cos_t.acos(), phi);
            assert!((0.0..=2.5 + 1e-9).contains(&v), "integrand out of bounds: {v}");
            sum += v;
            sum_sq += v * v;
        }
        let mc_mean = sum / samples as f64;
        let mc_var = sum_sq / samples as f64 - mc_mean * mc_mean;
        let mc_err = (mc_var / samples as f64).sqrt();
        assert!(
            (mc_mean - quadrature).abs() < 3.0 * mc_err,
            "MC {mc_mean} ± {mc_err} vs quadrature {quadrature}"
        );
    }

    #[test]
    fn detuned_average_closed_form() {
        let at_zero = antisym_avg_cross_section_zeta(0.0);
        assert!((at_zero - 0.9419).abs() < 1e-3, "ζ=0 value {at_zero}");
        let far = antisym_avg_cross_section_zeta(1e3);
        assert!((far - 1.0).abs() < 1e-3, "ζ→∞ value {far}");
        // monotone non-decreasing in |ζ| and bounded by (0.94, 1]
        let mut prev = at_zero;
        for k in 1..=1000 {
            let zeta = k as f64 * 0.05;
            let v = antisym_avg_cross_section_zeta(zeta);
            assert!(v >= prev - 1e-12, "not monotone at ζ = {zeta}");
            assert!(v > 0.94 - 1e-3 && v <= 1.0 + 1e-12);
            prev = v;
        }
    }
}
