//! Strong-disorder renormalization group over the near-field couplings.
//!
//! The flow repeatedly replaces the most strongly near-field-coupled pair of
//! (effective) atoms by two non-interacting resonances
//!
//! ```text
//! ω± = ⟨ω⟩_ij ∓ √(δω_ij² + (G_ij^near)²),
//! ```
//!
//! ranked by the interaction parameter
//! `K_ij = L_ij |G_ij^near| / (|δω_ij| + 1)` with `δω_ij = (ω_i − ω_j)/2`.
//! The two new frequencies are assigned to the original atom positions in a
//! random order; positions are never moved (re-positioning at the pair
//! midpoint shrinks a finite sample step by step and distorts the density).
//! Linewidths are never renormalized: the near field is purely real, and
//! dissipation does not decompose into pairs.
//!
//! After a pair renormalizes, `L_ik ← L_ik·L_jk` (and symmetrically) for
//! every k, which masks the pair itself and prevents any backflow through
//! previously frozen degrees of freedom. The flow terminates when no allowed
//! pair exceeds the cutoff `K_cutoff`.
//!
//! Since `K_ij ≤ |G_ij^near|` and `|G^near| ≤ 3/(2ρ³)`, only pairs closer
//! than `(3/(2 K_cutoff))^{1/3}` can ever be selected; a cell-list prefilter
//! reduces each step to a scan over those candidate pairs.

mod histogram;
mod mask;

pub use histogram::{histogram_from_values, ResonanceHistogram};
pub use mask::BitMatrix;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::ensemble::{AtomicConfiguration, Vec3};
use crate::optics::near_field_coupling;

#[derive(Debug, thiserror::Error)]
pub enum RgError {
    #[error("pair ({i}, {j}) has L = 0 and cannot be renormalized")]
    MaskedPair { i: usize, j: usize },
    #[error("RG flow did not terminate within {0} steps")]
    NonTermination(usize),
    #[error("no RG states supplied")]
    EmptyInput,
    #[error("states pooled into one histogram must share eta (found {0} and {1})")]
    MixedDensities(f64, f64),
    #[error("histogram range [{min}, {max}] does not cover [-1, 1]")]
    RangeTooNarrow { min: f64, max: f64 },
    #[error("near-resonant density needs an unrescaled histogram")]
    RescaledHistogram,
    #[error("flow was run without nearest-neighbour tracking")]
    DiagnosticsDisabled,
    #[error(transparent)]
    Lapack(#[from] crate::solver::lapack::LapackError),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// `K_ij = L_ij |g_near| / (|ω_i − ω_j|/2 + 1)`.
#[inline]
pub fn interaction_parameter(g_near: f64, allowed: bool, omega_i: f64, omega_j: f64) -> f64 {
    if !allowed {
        return 0.0;
    }
    g_near.abs() / (0.5 * (omega_i - omega_j).abs() + 1.0)
}

/// One renormalization event in the flow log.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowEvent {
    /// Batch step the event belongs to.
    pub step: usize,
    pub i: usize,
    pub j: usize,
    /// Interaction parameter at selection time.
    pub k_value: f64,
    /// Distance between the renormalized atoms.
    pub rho_rg: f64,
    /// Mean distance from the two atoms to their nearest still-interacting
    /// neighbour (selection-time state); NaN when tracking is off.
    pub rho_nearest: f64,
    /// Fraction of atoms never renormalized, after this event.
    pub n0_fraction: f64,
}

/// State of one RG flow.
pub struct RgState {
    pub omega_eff: Vec<f64>,
    pub l: BitMatrix,
    pub n_renormalized: Vec<u32>,
    pub flow_log: Vec<FlowEvent>,
    pub eta: f64,
    pub k_cutoff: f64,
    /// Seed of the flow's own random stream (ω± assignment order).
    pub seed: u64,
    positions: Vec<Vec3>,
    rng: ChaCha12Rng,
    never_renormalized: usize,
    track_nearest: bool,
}

impl RgState {
    pub fn new(config: &AtomicConfiguration, k_cutoff: f64, seed: u64, track_nearest: bool) -> Self {
        let n = config.len();
        RgState {
            omega_eff: vec![0.0; n],
            l: BitMatrix::all_ones(n),
            n_renormalized: vec![0; n],
            flow_log: Vec::new(),
            eta: config.eta,
            k_cutoff,
            seed,
            positions: config.positions.clone(),
            rng: ChaCha12Rng::seed_from_u64(seed),
            never_renormalized: n,
            track_nearest,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.omega_eff.len()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    /// Fraction of atoms never renormalized.
    pub fn n0_fraction(&self) -> f64 {
        self.never_renormalized as f64 / self.n_atoms() as f64
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.positions[i], self.positions[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Distance to the nearest atom still allowed to interact with `i`
    /// (the partner of a pending pair counts: early in the flow the nearest
    /// interacting neighbour typically *is* the partner).
    fn nearest_allowed_distance(&self, i: usize) -> f64 {
        let row = self.l.row(i);
        let mut best = f64::INFINITY;
        for (word_idx, &word) in row.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                let k = word_idx * 64 + bit;
                let d = self.distance(i, k);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Replace the resonance frequencies of an allowed pair by
    /// `ω± = ⟨ω⟩ ∓ √(δω² + g_near²)`, assigned in random order, and update
    /// the allowance mask. Atom positions are untouched.
    pub fn renormalize_pair(
        &mut self,
        step: usize,
        i: usize,
        j: usize,
        g_near: f64,
        k_value: f64,
    ) -> Result<(), RgError> {
        if !self.l.get(i, j) {
            return Err(RgError::MaskedPair { i, j });
        }
        let rho_nearest = if self.track_nearest {
            0.5 * (self.nearest_allowed_distance(i) + self.nearest_allowed_distance(j))
        } else {
            f64::NAN
        };
        let mean = 0.5 * (self.omega_eff[i] + self.omega_eff[j]);
        let half_diff = 0.5 * (self.omega_eff[i] - self.omega_eff[j]);
        let split = (half_diff * half_diff + g_near * g_near).sqrt();
        let (omega_plus, omega_minus) = (mean - split, mean + split);
        if self.rng.gen_bool(0.5) {
            self.omega_eff[i] = omega_plus;
            self.omega_eff[j] = omega_minus;
        } else {
            self.omega_eff[i] = omega_minus;
            self.omega_eff[j] = omega_plus;
        }
        for atom in [i, j] {
            if self.n_renormalized[atom] == 0 {
                self.never_renormalized -= 1;
            }
            self.n_renormalized[atom] += 1;
        }
        self.l.renormalize_pair(i, j);
        self.flow_log.push(FlowEvent {
            step,
            i,
            j,
            k_value,
            rho_rg: self.distance(i, j),
            rho_nearest,
            n0_fraction: self.n0_fraction(),
        });
        Ok(())
    }

    /// Snapshot as JSON: effective frequencies plus the masked-pair list.
    pub fn write_snapshot(&self, path: &std::path::Path) -> Result<(), RgError> {
        #[derive(Serialize)]
        struct Snapshot<'a> {
            eta: f64,
            k_cutoff: f64,
            seed: u64,
            n_events: usize,
            omega_eff: &'a [f64],
            masked_pairs: Vec<(usize, usize)>,
        }
        let snap = Snapshot {
            eta: self.eta,
            k_cutoff: self.k_cutoff,
            seed: self.seed,
            n_events: self.flow_log.len(),
            omega_eff: &self.omega_eff,
            masked_pairs: self.l.masked_pairs(),
        };
        std::fs::write(path, serde_json::to_string(&snap)?)?;
        Ok(())
    }

    /// Flow log as CSV (`step,i,j,K,rho_rg,rho_nearest,n0_fraction`).
    pub fn write_flow_log(&self, path: &std::path::Path) -> Result<(), RgError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "i", "j", "K", "rho_rg", "rho_nearest", "n0_fraction"])?;
        for e in &self.flow_log {
            w.write_record([
                e.step.to_string(),
                e.i.to_string(),
                e.j.to_string(),
                format!("{:.12e}", e.k_value),
                format!("{:.12e}", e.rho_rg),
                format!("{:.12e}", e.rho_nearest),
                format!("{:.12e}", e.n0_fraction),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A pair that could ever exceed the cutoff (`K ≤ |G^near|`).
#[derive(Debug, Clone, Copy)]
struct CandidatePair {
    i: u32,
    j: u32,
    g_near: f64,
}

/// All pairs with `|G^near| > k_cutoff`, via a cell list of edge equal to
/// the maximum admissible separation `(3/(2 K_cutoff))^{1/3}`.
fn candidate_pairs(positions: &[Vec3], k_cutoff: f64) -> Vec<CandidatePair> {
    let reach = (1.5 / k_cutoff).cbrt();
    let cell = reach;
    let key = |p: Vec3| -> [i64; 3] {
        [(p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64, (p[2] / cell).floor() as i64]
    };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for (idx, &p) in positions.iter().enumerate() {
        grid.entry(key(p)).or_default().push(idx as u32);
    }
    let mut out = Vec::new();
    for (idx, &p) in positions.iter().enumerate() {
        let i = idx as u32;
        let k = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &j in bucket {
                        if j <= i {
                            continue;
                        }
                        let q = positions[j as usize];
                        let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
                        let rho2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                        if rho2 > reach * reach {
                            continue;
                        }
                        let g = near_field_coupling(d);
                        if g.abs() > k_cutoff {
                            out.push(CandidatePair { i, j, g_near: g });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Heap entry ordered by K descending, ties by lexicographic (i, j).
#[derive(Debug)]
struct Ranked {
    k: f64,
    i: u32,
    j: u32,
    g_near: f64,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: larger K wins; on ties the
        // lexicographically smaller (i, j) must pop first.
        self.k
            .total_cmp(&other.k)
            .then_with(|| other.i.cmp(&self.i))
            .then_with(|| other.j.cmp(&self.j))
    }
}

/// Greedy disjoint selection: repeatedly take the largest remaining K above
/// the cutoff whose atoms are unused this step, until `n_step` pairs or
/// exhaustion. Ties break lexicographically.
pub fn select_pairs(
    table: &[(usize, usize, f64)],
    n_step: usize,
    k_cutoff: f64,
) -> Vec<(usize, usize)> {
    let mut heap: BinaryHeap<Ranked> = table
        .iter()
        .filter(|&&(_, _, k)| k > k_cutoff)
        .map(|&(i, j, k)| Ranked { k, i: i as u32, j: j as u32, g_near: 0.0 })
        .collect();
    let mut used = vec![false; table.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0)];
    let mut out = Vec::new();
    while out.len() < n_step {
        let Some(top) = heap.pop() else { break };
        let (i, j) = (top.i as usize, top.j as usize);
        if used[i] || used[j] {
            continue;
        }
        used[i] = true;
        used[j] = true;
        out.push((i, j));
    }
    out
}

/// Options for [`run_rg_with`].
#[derive(Debug, Clone, Copy)]
pub struct RgOptions {
    pub k_cutoff: f64,
    pub step_fraction: f64,
    pub seed: u64,
    /// Record the nearest-interacting-neighbour distance per event
    /// (an O(N) scan per renormalized atom; needed for flow diagnostics).
    pub track_nearest: bool,
}

/// Run a complete RG flow on one configuration.
pub fn run_rg(
    config: &AtomicConfiguration,
    k_cutoff: f64,
    step_fraction: f64,
    seed: u64,
) -> Result<RgState, RgError> {
    run_rg_with(config, RgOptions { k_cutoff, step_fraction, seed, track_nearest: true })
}

/// Run a complete RG flow with explicit options.
pub fn run_rg_with(config: &AtomicConfiguration, opts: RgOptions) -> Result<RgState, RgError> {
    let n = config.len();
    let mut state = RgState::new(config, opts.k_cutoff, opts.seed, opts.track_nearest);
    if n < 2 {
        return Ok(state);
    }
    let candidates = candidate_pairs(&state.positions, opts.k_cutoff);
    let n_step = ((opts.step_fraction * n as f64).round() as usize).max(1);
    let step_bound = n * n;
    let mut used = vec![false; n];

    for step in 0.. {
        if step > step_bound {
            return Err(RgError::NonTermination(step_bound));
        }
        // rank the currently allowed candidates
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(candidates.len());
        for c in &candidates {
            let (i, j) = (c.i as usize, c.j as usize);
            if !state.l.get(i, j) {
                continue;
            }
            let k = interaction_parameter(c.g_near, true, state.omega_eff[i], state.omega_eff[j]);
            if k > opts.k_cutoff {
                heap.push(Ranked { k, i: c.i, j: c.j, g_near: c.g_near });
            }
        }
        if heap.is_empty() {
            break;
        }
        used.iter_mut().for_each(|u| *u = false);
        let mut selected = Vec::with_capacity(n_step);
        while selected.len() < n_step {
            let Some(top) = heap.pop() else { break };
            let (i, j) = (top.i as usize, top.j as usize);
            if used[i] || used[j] {
                continue;
            }
            used[i] = true;
            used[j] = true;
            selected.push(top);
        }
        for pair in selected {
            state.renormalize_pair(step, pair.i as usize, pair.j as usize, pair.g_near, pair.k)?;
        }
    }
    Ok(state)
}

/// Pooled (optionally η-rescaled) distribution of effective resonance
/// frequencies, spanning ±10η in units of `Γ0`.
pub fn resonance_distribution(
    states: &[RgState],
    eta: f64,
    bins: usize,
    rescale: bool,
) -> Result<ResonanceHistogram, RgError> {
    if states.is_empty() {
        return Err(RgError::EmptyInput);
    }
    for s in states {
        if s.eta != eta {
            return Err(RgError::MixedDensities(eta, s.eta));
        }
    }
    let values: Vec<f64> = states.iter().flat_map(|s| s.omega_eff.iter().copied()).collect();
    Ok(histogram_from_values(&values, eta, bins, rescale))
}

/// Real eigenvalues of `−G_near` by dense symmetric diagonalization.
pub fn near_field_eigenvalues(config: &AtomicConfiguration) -> Result<Vec<f64>, RgError> {
    let n = config.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let positions = &config.positions;
    let mut m = vec![0.0f64; n * n];
    use rayon::prelude::*;
    m.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        let pj = positions[j];
        for (i, slot) in col.iter_mut().enumerate() {
            if i == j {
                *slot = 0.0;
            } else {
                let pi = positions[i];
                *slot = -near_field_coupling([pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]]);
            }
        }
    });
    Ok(crate::solver::lapack::sym_eigenvalues(&mut m, n)?)
}

/// Atoms per `k0⁻³` within ±Γ0 of the bare resonance:
/// `η ∫_{−1}^{+1} P(ω_eff) dω`.
pub fn near_resonant_density(hist: &ResonanceHistogram, eta: f64) -> Result<f64, RgError> {
    if hist.rescaled {
        return Err(RgError::RescaledHistogram);
    }
    if hist.min > -1.0 || hist.max < 1.0 {
        return Err(RgError::RangeTooNarrow { min: hist.min, max: hist.max });
    }
    Ok(eta * hist.integrate(-1.0, 1.0))
}

/// Diagnostics table binned over the normalized flow position
/// `N_RG / N_RG^final`.
#[derive(Debug, Clone, Serialize)]
pub struct FlowBin {
    /// Bin center in normalized flow position (0, 1].
    pub position: f64,
    pub mean_rho_rg: f64,
    pub mean_rho_nearest: f64,
    pub n0_fraction: f64,
    pub events: usize,
}

/// Bin the flow logs of completed runs (with nearest-neighbour tracking)
/// into `bins` equal slices of normalized flow position.
pub fn flow_diagnostics(states: &[RgState], bins: usize) -> Result<Vec<FlowBin>, RgError> {
    if states.is_empty() {
        return Err(RgError::EmptyInput);
    }
    let mut rho_rg = vec![0.0; bins];
    let mut rho_nearest = vec![0.0; bins];
    let mut n0 = vec![0.0; bins];
    let mut count = vec![0usize; bins];
    for state in states {
        let total = state.flow_log.len();
        if total == 0 {
            continue;
        }
        for (idx, e) in state.flow_log.iter().enumerate() {
            if e.rho_nearest.is_nan() {
                return Err(RgError::DiagnosticsDisabled);
            }
            let position = (idx + 1) as f64 / total as f64;
            let b = ((position * bins as f64).ceil() as usize).saturating_sub(1).min(bins - 1);
            rho_rg[b] += e.rho_rg;
            rho_nearest[b] += e.rho_nearest;
            n0[b] += e.n0_fraction;
            count[b] += 1;
        }
    }
    Ok((0..bins)
        .map(|b| FlowBin {
            position: (b as f64 + 0.5) / bins as f64,
            mean_rho_rg: rho_rg[b] / count[b].max(1) as f64,
            mean_rho_nearest: rho_nearest[b] / count[b].max(1) as f64,
            n0_fraction: n0[b] / count[b].max(1) as f64,
            events: count[b],
        })
        .collect())
}
