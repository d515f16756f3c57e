//! Free-space dyadic Green's tensor, its x̂-projected scalar coupling, and
//! the paraxial Gaussian drive field.
//!
//! All quantities are evaluated at the atomic resonance frequency: the
//! interaction matrix is detuning-independent because optical dispersion in
//! a near-resonant medium is dominated by the atoms, not the vacuum. The
//! drive field is frozen at resonance for the same reason.
//!
//! In dimensionless units (`k0 = 1`) the tensor reads
//!
//! ```text
//! G(ρ) = e^{iρ}/4π · [ (1/ρ + i/ρ² − 1/ρ³) I
//!                      + (−1/ρ − 3i/ρ² + 3/ρ³) ρ̂⊗ρ̂ ]
//! ```
//!
//! and the scalar coupling between x̂-polarized dipoles is its projection
//! `G_ij = 3π x̂·G·x̂`, with `cos θ = ρ_x/ρ`. The purely real `1/ρ³` part of
//! the projection, `3(−1 + 3cos²θ)/(4ρ³)`, is the near-field coupling that
//! drives the RG scheme; it vanishes at the magic angle `cos²θ = 1/3`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::ensemble::Vec3;

#[derive(Debug, thiserror::Error)]
pub enum OpticsError {
    #[error("Green's tensor evaluated at zero separation")]
    ZeroSeparation,
    #[error("pair separation {rho} below the floor rho_min = {rho_min}")]
    BelowSeparationFloor { rho: f64, rho_min: f64 },
}

/// x̂-projected dipole-dipole coupling at one separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenCoupling {
    /// `3π x̂·G·x̂`; dimensionless (units of `Γ0`).
    pub value: C64,
    /// The real `1/ρ³` near-field part, `3(−1+3cos²θ)/(4ρ³)`.
    pub near_part: f64,
    /// Separation `ρ = k0 |r − r'|`.
    pub rho: f64,
    /// Cosine of the polar angle between the separation and x̂.
    pub cos_theta: f64,
}

impl GreenCoupling {
    pub fn theta(&self) -> f64 {
        self.cos_theta.clamp(-1.0, 1.0).acos()
    }
}

/// Full 3×3 dyadic Green's tensor at separation `rho_vec` (row-major).
pub fn green_tensor(rho_vec: Vec3) -> Result<[[C64; 3]; 3], OpticsError> {
    let rho2 = rho_vec[0] * rho_vec[0] + rho_vec[1] * rho_vec[1] + rho_vec[2] * rho_vec[2];
    if rho2 == 0.0 {
        return Err(OpticsError::ZeroSeparation);
    }
    let rho = rho2.sqrt();
    let phase = C64::from_polar(1.0, rho) / (4.0 * std::f64::consts::PI);
    let inv = 1.0 / rho;
    let inv2 = inv * inv;
    let inv3 = inv2 * inv;
    let iso = C64::new(inv - inv3, inv2);
    let aniso = C64::new(-inv + 3.0 * inv3, -3.0 * inv2);
    let mut out = [[C64::new(0.0, 0.0); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            let unit = rho_vec[i] * rho_vec[j] / rho2;
            let delta = if i == j { 1.0 } else { 0.0 };
            *entry = phase * (iso * delta + aniso * unit);
        }
    }
    Ok(out)
}

/// Scattered field of a set of point dipoles at an observation point:
/// `E(r) = Σ_j G(r − r_j) · d_j` (relative units).
pub fn scattered_field(
    dipoles: &[(Vec3, [C64; 3])],
    observation: Vec3,
) -> Result<[C64; 3], OpticsError> {
    let mut field = [C64::new(0.0, 0.0); 3];
    for &(pos, moment) in dipoles {
        let sep = [observation[0] - pos[0], observation[1] - pos[1], observation[2] - pos[2]];
        let tensor = green_tensor(sep)?;
        for i in 0..3 {
            for j in 0..3 {
                field[i] += tensor[i][j] * moment[j];
            }
        }
    }
    Ok(field)
}

/// Unchecked core of [`green_projected`]; `rho2` must be positive.
///
/// Returns `(value, near_part, rho, cos_theta)`. Kept branch-free for the
/// O(N²) assembly loop.
#[inline]
pub(crate) fn coupling_parts(rho2: f64, rho_x: f64) -> (C64, f64, f64, f64) {
    let rho = rho2.sqrt();
    let cos_theta = rho_x / rho;
    let cos2 = cos_theta * cos_theta;
    let inv = 1.0 / rho;
    let inv2 = inv * inv;
    let inv3 = inv2 * inv;
    // (1/ρ + i/ρ² − 1/ρ³) + (−1/ρ − 3i/ρ² + 3/ρ³) cos²θ
    let bracket = C64::new(
        inv - inv3 + (3.0 * inv3 - inv) * cos2,
        inv2 - 3.0 * inv2 * cos2,
    );
    let (sin_rho, cos_rho) = rho.sin_cos();
    let value = 0.75 * C64::new(cos_rho, sin_rho) * bracket;
    let near = 0.75 * (3.0 * cos2 - 1.0) * inv3;
    (value, near, rho, cos_theta)
}

/// x̂-projected coupling `3π x̂·G·x̂` with its near-field part split out.
pub fn green_projected(rho_vec: Vec3, rho_min: f64) -> Result<GreenCoupling, OpticsError> {
    let rho2 = rho_vec[0] * rho_vec[0] + rho_vec[1] * rho_vec[1] + rho_vec[2] * rho_vec[2];
    if rho2 == 0.0 {
        return Err(OpticsError::ZeroSeparation);
    }
    let (value, near_part, rho, cos_theta) = coupling_parts(rho2, rho_vec[0]);
    if rho < rho_min {
        return Err(OpticsError::BelowSeparationFloor { rho, rho_min });
    }
    Ok(GreenCoupling { value, near_part, rho, cos_theta })
}

/// Near-field coupling alone, `3(−1+3cos²θ)/(4ρ³)`.
#[inline]
pub fn near_field_coupling(rho_vec: Vec3) -> f64 {
    let rho2 = rho_vec[0] * rho_vec[0] + rho_vec[1] * rho_vec[1] + rho_vec[2] * rho_vec[2];
    let rho = rho2.sqrt();
    let cos2 = (rho_vec[0] / rho) * (rho_vec[0] / rho);
    0.75 * (3.0 * cos2 - 1.0) / (rho2 * rho)
}

/// x̂-polarized, ẑ-directed paraxial Gaussian beam focused at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    /// Waist at focus, in `1/k0` units.
    pub waist: f64,
}

impl BeamSpec {
    pub fn new(waist: f64) -> Self {
        BeamSpec { waist }
    }

    /// Rayleigh range `z_R = k0 w0²/2`.
    pub fn rayleigh_range(&self) -> f64 {
        0.5 * self.waist * self.waist
    }

    /// Transverse beam extent `w(z) = w0 √(1 + (z/z_R)²)`.
    pub fn width(&self, z: f64) -> f64 {
        let zr = self.rayleigh_range();
        self.waist * (1.0 + (z / zr).powi(2)).sqrt()
    }
}

/// Beam amplitude `E_in(r)/E0` in the paraxial approximation:
/// `[w0/w(z)] exp{−[r⊥/w(z)]² + i[z + φ(r)]}` with Gouy and wavefront
/// curvature phase `φ = −arctan(z/z_R) + r⊥²/{2z[1+(z_R/z)²]}`.
pub fn gaussian_beam(r: Vec3, beam: BeamSpec) -> C64 {
    let z = r[2];
    let r_perp2 = r[0] * r[0] + r[1] * r[1];
    let zr = beam.rayleigh_range();
    let w = beam.width(z);
    let amplitude = (beam.waist / w) * (-r_perp2 / (w * w)).exp();
    // curvature term has limit 0 at the focal plane
    let curvature = if z == 0.0 { 0.0 } else { r_perp2 / (2.0 * z * (1.0 + (zr / z).powi(2))) };
    let phase = z - (z / zr).atan() + curvature;
    C64::from_polar(amplitude, phase)
}

/// x̂-polarized plane wave travelling along ẑ: `E_in/E0 = e^{iz}`.
pub fn plane_wave(r: Vec3) -> C64 {
    C64::from_polar(1.0, r[2])
}
