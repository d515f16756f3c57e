//! Disorder-averaged sweeps: reproducible seeding, a worker pool over
//! configurations, resumable persistence and distribution comparisons.
//!
//! Parallelism granularity is one atomic configuration (assembly plus all
//! detunings); workers share nothing mutable. Per-configuration transmission
//! samples are keyed by configuration index and reduced in index order with
//! compensated summation, so results do not depend on the worker count.
//! Samples are appended to per-density CSV files as whole-configuration
//! chunks; a resumed run skips configuration indices that are already on
//! disk and reproduces bit-identical positions from the derived seeds.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::baselines::{n_inhomogeneous, IndexCurve, IndexModel};
use crate::config::RunConfig;
use crate::ensemble::{sample_configuration, Geometry};
use crate::observables::{average_spectra, transmission, Spectrum, TransmissionSample};
use crate::optics::{gaussian_beam, BeamSpec};
use crate::rg::{resonance_distribution, run_rg_with, ResonanceHistogram, RgOptions, RgState};
use crate::solver::{
    assemble_interaction, lapack::set_blas_threads, solve_spectrum_system, Backend, System,
};
use crate::{Error, Result};

/// Environment variable overriding the default worker count.
pub const WORKERS_ENV: &str = "RINDEX_WORKERS";

/// Default worker count: `RINDEX_WORKERS` or the number of CPUs.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

/// Deterministic per-configuration seed (splitmix64 of the master seed and
/// the configuration index; order-independent across workers).
pub fn config_seed(master_seed: u64, index: usize) -> u64 {
    splitmix(master_seed ^ 0x636f6e666967u64, index as u64)
}

/// Seed of the RG random stream for one configuration.
pub fn rg_seed(master_seed: u64, index: usize) -> u64 {
    splitmix(master_seed ^ 0x72672d666c6f77u64, index as u64)
}

fn splitmix(salted: u64, index: u64) -> u64 {
    let mut z = salted.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E3779B97F4A7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// On-disk record of a sweep: configuration snapshot, seeds, registered
/// outputs and completion status per density cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub created_unix: u64,
    /// Rendered TOML of the run configuration (the resume key).
    pub config_text: String,
    pub master_seed: u64,
    pub cells: BTreeMap<String, CellStatus>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CellStatus {
    pub eta: f64,
    pub configs_done: usize,
    pub configs_total: usize,
    pub complete: bool,
    /// Files registered before the cell is considered final.
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            config_text: crate::config::render_config(config),
            master_seed: config.master_seed,
            cells: BTreeMap::new(),
        }
    }

    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join("manifest.json")
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join("manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self).map_err(io_err)?)?;
        std::fs::rename(tmp, Self::path_in(dir))?;
        Ok(())
    }

    /// Load an existing manifest for resumption. The stored config must
    /// match the requested one in everything except the configuration
    /// count: per-configuration seeds are index-keyed, so growing the
    /// statistics of an existing run is a valid resume.
    pub fn load_for_resume(dir: &Path, config: &RunConfig) -> Result<Option<Self>> {
        let path = Self::path_in(dir);
        if !path.exists() {
            return Ok(None);
        }
        let manifest: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(&path)?).map_err(io_err)?;
        let neutral = |text: &str| -> String {
            match crate::config::parse_config(text) {
                Ok(mut c) => {
                    c.configs = 1;
                    crate::config::render_config(&c)
                }
                Err(_) => text.to_string(),
            }
        };
        let mut expect = config.clone();
        expect.configs = 1;
        if neutral(&manifest.config_text) != crate::config::render_config(&expect) {
            return Err(Error::Harness(format!(
                "manifest at {} was produced by a different configuration; refusing to resume",
                path.display()
            )));
        }
        Ok(Some(manifest))
    }
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Harness(e.to_string())
}

fn cell_id(eta: f64) -> String {
    format!("eta{eta}")
}

/// Thickness used for index extraction; cylinders only.
fn extraction_thickness(geometry: Geometry) -> Result<f64> {
    match geometry {
        Geometry::Cylinder { thickness, .. } => Ok(thickness),
        Geometry::Sphere { .. } => Err(Error::Harness(
            "index extraction requires a cylinder (slab) geometry".to_string(),
        )),
    }
}

/// Columns of a per-configuration transmission samples file.
#[derive(Debug, Serialize, Deserialize)]
struct SampleRow {
    config_index: usize,
    seed: u64,
    delta: f64,
    re_t: f64,
    im_t: f64,
}

fn samples_path(dir: &Path, tag: &str, eta: f64) -> PathBuf {
    dir.join(format!("samples_{tag}_eta{eta}.csv"))
}

fn read_completed(
    path: &Path,
    n_detunings: usize,
) -> Result<BTreeMap<usize, Vec<TransmissionSample>>> {
    let mut by_config: BTreeMap<usize, Vec<TransmissionSample>> = BTreeMap::new();
    if !path.exists() {
        return Ok(by_config);
    }
    let mut reader = csv::Reader::from_path(path).map_err(io_err)?;
    for row in reader.deserialize::<SampleRow>() {
        let row = row.map_err(io_err)?;
        by_config.entry(row.config_index).or_default().push(TransmissionSample {
            t: C64::new(row.re_t, row.im_t),
            delta: row.delta,
            config_seed: row.seed,
        });
    }
    // a configuration counts as done only with one sample per grid point
    by_config.retain(|_, v| v.len() == n_detunings);
    Ok(by_config)
}

fn append_samples(
    file: &Mutex<std::fs::File>,
    config_index: usize,
    seed: u64,
    samples: &[TransmissionSample],
) -> Result<()> {
    let mut chunk = String::new();
    for s in samples {
        chunk.push_str(&format!(
            "{config_index},{seed},{:.17e},{:.17e},{:.17e}\n",
            s.delta, s.t.re, s.t.im
        ));
    }
    let mut guard = file.lock().map_err(|_| Error::Harness("samples file poisoned".into()))?;
    guard.write_all(chunk.as_bytes())?;
    guard.flush()?;
    Ok(())
}

fn open_samples_file(path: &Path) -> Result<Mutex<std::fs::File>> {
    let fresh = !path.exists();
    let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        file.write_all(b"config_index,seed,delta,re_t,im_t\n")?;
    }
    Ok(Mutex::new(file))
}

/// Backend-appropriate spectrum of one sampled configuration.
fn transmissions_for_config(
    run: &RunConfig,
    eta: f64,
    detunings: &[f64],
    index: usize,
    renormalize: bool,
) -> Result<(u64, Vec<TransmissionSample>)> {
    let seed = config_seed(run.master_seed, index);
    let config = sample_configuration(run.geometry, eta, seed, run.rho_min)?;
    let beam = BeamSpec::new(run.waist);
    let drive: Vec<C64> = config.positions.iter().map(|&p| gaussian_beam(p, beam)).collect();

    let rg_state: Option<RgState> = if renormalize {
        Some(crate::rg::run_rg_with(
            &config,
            RgOptions {
                k_cutoff: run.k_cutoff,
                step_fraction: run.step_fraction,
                seed: rg_seed(run.master_seed, index),
                track_nearest: false,
            },
        )?)
    } else {
        None
    };
    let omega_ref = rg_state.as_ref().map(|s| s.omega_eff.as_slice());
    let mask_ref = rg_state.as_ref().map(|s| &s.l);

    // Above this size the dense f64 matrix no longer pays for itself next
    // to the single-precision reduction buffers; regenerate entries instead.
    const DENSE_LIMIT: usize = 11_000;
    let backend = Backend::from(run.solver_method);
    let solutions = if backend == Backend::Hessenberg && config.len() > DENSE_LIMIT {
        let system = System::Lazy {
            positions: &config.positions,
            omega_eff: omega_ref,
            l_mask: mask_ref,
            seed,
        };
        solve_spectrum_system(&system, &drive, detunings, backend)?
    } else {
        let matrix = assemble_interaction(&config, run.rho_min)?;
        let system = System::Dense { matrix: &matrix, omega_eff: omega_ref, l_mask: mask_ref };
        solve_spectrum_system(&system, &drive, detunings, backend)?
    };
    let samples = solutions.iter().map(|sol| transmission(&config, sol, beam)).collect();
    Ok((seed, samples))
}

/// Run one resumable transmission sweep cell and average it.
///
/// `tag` distinguishes the physical ("full") and RG-renormalized solves in
/// the sample files; `renormalize` switches the solved system.
pub fn run_transmission_cell(
    run: &RunConfig,
    eta: f64,
    workers: usize,
    resume: bool,
    tag: &str,
    renormalize: bool,
) -> Result<Spectrum> {
    let dir = &run.out_dir;
    std::fs::create_dir_all(dir)?;
    let detunings = run.detuning.values();
    let thickness = extraction_thickness(run.geometry)?;
    let path = samples_path(dir, tag, eta);
    if !resume && path.exists() {
        std::fs::remove_file(&path)?;
    }
    let done = read_completed(&path, detunings.len())?;
    let pending: Vec<usize> = (0..run.configs).filter(|i| !done.contains_key(i)).collect();

    let file = open_samples_file(&path)?;
    let workers = workers.max(1);
    set_blas_threads(if workers > 1 { 1 } else { default_workers().max(2) });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .stack_size(32 * 1024 * 1024)
        .build()
        .map_err(io_err)?;
    let failures: Vec<Error> = pool.install(|| {
        pending
            .par_iter()
            .filter_map(|&index| {
                match transmissions_for_config(run, eta, &detunings, index, renormalize) {
                    Ok((seed, samples)) => {
                        append_samples(&file, index, seed, &samples).err()
                    }
                    Err(e) => Some(e),
                }
            })
            .collect()
    });
    set_blas_threads(default_workers().max(2));
    if let Some(e) = failures.into_iter().next() {
        return Err(e);
    }

    // deterministic reduction: configuration-index order, grid order
    let by_config = read_completed(&path, detunings.len())?;
    if by_config.len() < run.configs {
        return Err(Error::Harness(format!(
            "cell eta = {eta}: {} of {} configurations completed",
            by_config.len(),
            run.configs
        )));
    }
    let mut grouped: Vec<Vec<TransmissionSample>> = vec![Vec::new(); detunings.len()];
    for (_, samples) in by_config.iter().take(run.configs) {
        for s in samples {
            let k = detunings
                .iter()
                .position(|&d| d == s.delta)
                .ok_or_else(|| Error::Harness(format!("sample at unknown delta {}", s.delta)))?;
            grouped[k].push(*s);
        }
    }
    Ok(average_spectra(&detunings, &grouped, thickness)?)
}

/// Index sweep over densities: sample, solve, project, average and persist
/// one [`Spectrum`] per η. Resumable per configuration.
pub fn run_index_sweep(
    run: &RunConfig,
    etas: &[f64],
    workers: usize,
    resume: bool,
) -> Result<Vec<Spectrum>> {
    let dir = &run.out_dir;
    std::fs::create_dir_all(dir)?;
    let mut manifest = match RunManifest::load_for_resume(dir, run)? {
        Some(m) if resume => m,
        _ => RunManifest::new(run),
    };
    let mut out = Vec::with_capacity(etas.len());
    for &eta in etas {
        let spectrum = run_transmission_cell(run, eta, workers, resume, "full", false)?;
        let spectrum_path = dir.join(format!("spectrum_eta{eta}.csv"));
        spectrum.write_csv(&spectrum_path)?;
        manifest.cells.insert(
            cell_id(eta),
            CellStatus {
                eta,
                configs_done: run.configs,
                configs_total: run.configs,
                complete: true,
                outputs: vec![samples_path(dir, "full", eta), spectrum_path],
            },
        );
        manifest.save(dir)?;
        out.push(spectrum);
    }
    Ok(out)
}

/// Products of an RG sweep at one density.
pub struct RgSweepCell {
    pub eta: f64,
    pub states: Vec<RgState>,
    pub histogram: ResonanceHistogram,
    pub histogram_rescaled: ResonanceHistogram,
    /// Eq.-9-style index curve from the pooled histogram.
    pub inhomogeneous_curve: IndexCurve,
    /// Spectrum of the renormalized coupled-dipole solve, when requested.
    pub renormalized_spectrum: Option<Spectrum>,
}

/// RG sweep over densities: flows, pooled histograms, the inhomogeneous-MB
/// index curve and (optionally) the renormalized coupled-dipole spectrum.
pub fn run_rg_sweep(
    run: &RunConfig,
    etas: &[f64],
    workers: usize,
    resume: bool,
    bins: usize,
    track_nearest: bool,
    with_renormalized_solve: bool,
) -> Result<Vec<RgSweepCell>> {
    let dir = &run.out_dir;
    std::fs::create_dir_all(dir)?;
    let detunings = run.detuning.values();
    let mut out = Vec::with_capacity(etas.len());
    for &eta in etas {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .stack_size(32 * 1024 * 1024)
            .build()
            .map_err(io_err)?;
        let states: Vec<RgState> = pool.install(|| {
            (0..run.configs)
                .into_par_iter()
                .map(|index| {
                    let config = sample_configuration(
                        run.geometry,
                        eta,
                        config_seed(run.master_seed, index),
                        run.rho_min,
                    )?;
                    Ok(run_rg_with(
                        &config,
                        RgOptions {
                            k_cutoff: run.k_cutoff,
                            step_fraction: run.step_fraction,
                            seed: rg_seed(run.master_seed, index),
                            track_nearest,
                        },
                    )?)
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let histogram = resonance_distribution(&states, eta, bins, false)?;
        let histogram_rescaled = resonance_distribution(&states, eta, bins, true)?;
        histogram.write_csv(&dir.join(format!("pomega_eta{eta}.csv")))?;
        histogram_rescaled.write_csv(&dir.join(format!("pomega_rescaled_eta{eta}.csv")))?;
        if track_nearest {
            if let Some(first) = states.first() {
                first.write_flow_log(&dir.join(format!("flowlog_eta{eta}_config0.csv")))?;
            }
        }

        let inhomogeneous_curve = IndexCurve {
            detunings: detunings.clone(),
            n: detunings
                .iter()
                .map(|&d| n_inhomogeneous(d, eta, &histogram))
                .collect::<std::result::Result<Vec<_>, _>>()?,
            model: IndexModel::MbInhomogeneous,
            eta,
        };
        inhomogeneous_curve.write_csv(&dir.join(format!("eq9_index_eta{eta}.csv")))?;

        let renormalized_spectrum = if with_renormalized_solve {
            let spectrum = run_transmission_cell(run, eta, workers, resume, "rg", true)?;
            spectrum.write_csv(&dir.join(format!("rg_spectrum_eta{eta}.csv")))?;
            Some(spectrum)
        } else {
            None
        };

        out.push(RgSweepCell {
            eta,
            states,
            histogram,
            histogram_rescaled,
            inhomogeneous_curve,
            renormalized_spectrum,
        });
    }
    Ok(out)
}

/// Quantified overlay of two histograms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistributionComparison {
    /// `∫|p − q|` over the common range plus the out-of-range mass
    /// difference; ranges over [0, 2].
    pub l1: f64,
    /// Kolmogorov-Smirnov statistic of the binned CDFs; ranges over [0, 1].
    pub ks: f64,
    /// True when the supports share no mass at all.
    pub disjoint: bool,
}

/// L¹ and KS distances between two histograms (rebinned onto a common grid
/// when their binnings differ).
pub fn compare_distributions(
    a: &ResonanceHistogram,
    b: &ResonanceHistogram,
) -> DistributionComparison {
    let (pa, pb, width) = if a.min == b.min && a.max == b.max && a.bins() == b.bins() {
        (a.density.clone(), b.density.clone(), a.bin_width())
    } else {
        let min = a.min.min(b.min);
        let max = a.max.max(b.max);
        let bins = a.bins().max(b.bins());
        (
            rebin(a, min, max, bins),
            rebin(b, min, max, bins),
            (max - min) / bins as f64,
        )
    };
    let mut l1 = 0.0;
    let mut overlap = 0.0;
    let mut cdf_a = 0.0;
    let mut cdf_b = 0.0;
    let mut ks: f64 = 0.0;
    for (da, db) in pa.iter().zip(&pb) {
        l1 += (da - db).abs() * width;
        overlap += da.min(*db) * width;
        cdf_a += da * width;
        cdf_b += db * width;
        ks = ks.max((cdf_a - cdf_b).abs());
    }
    l1 += (a.out_of_range_mass() - b.out_of_range_mass()).abs();
    DistributionComparison { l1, ks, disjoint: overlap <= f64::EPSILON }
}

fn rebin(h: &ResonanceHistogram, min: f64, max: f64, bins: usize) -> Vec<f64> {
    let width = (max - min) / bins as f64;
    let mut out = vec![0.0; bins];
    for (b, slot) in out.iter_mut().enumerate() {
        let lo = min + b as f64 * width;
        *slot = h.integrate(lo, lo + width) / width;
    }
    out
}
