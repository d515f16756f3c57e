//! Command-line driver for the coupled-dipole refractive-index simulator.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

use rindex_core::baselines::{max_index, n_inhomogeneous, n_ll, n_mb, IndexCurve, IndexModel};
use rindex_core::config::{parse_config, RunConfig};
use rindex_core::ensemble::{sample_configuration, save_configuration};
use rindex_core::harness::{
    compare_distributions, config_seed, default_workers, run_index_sweep, run_rg_sweep,
};
use rindex_core::observables::{far_field_intensity, write_far_field_csv};
use rindex_core::pairlab::{
    antisym_avg_cross_section, antisym_avg_cross_section_zeta, pair_cross_sections,
    pair_eigenmodes, pair_spectrum, PairDrive, PairSpec,
};
use rindex_core::rg::ResonanceHistogram;
use rindex_core::solver::{assemble_interaction, solve_dipoles};
use rindex_core::Complex64 as C64;

#[derive(Parser)]
#[command(
    name = "rindex",
    version,
    about = "Refractive index of disordered atomic ensembles by coupled-dipole simulation and strong-disorder RG"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker count (default: RINDEX_WORKERS or the CPU count).
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Resume a previous run in the same output directory.
    #[arg(long)]
    resume: bool,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let text = std::fs::read_to_string(&self.config)
            .with_context(|| format!("reading {}", self.config.display()))?;
        let mut run = parse_config(&text)?;
        if let Some(out) = &self.out {
            run.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            run.master_seed = seed;
        }
        Ok(run)
    }

    fn workers(&self) -> usize {
        self.workers.unwrap_or_else(default_workers)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample atomic configurations and write them as CSV + JSON sidecars.
    Sample {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Disorder-averaged transmission sweep and index extraction.
    Spectrum {
        #[command(flatten)]
        run: RunArgs,
    },
    /// RG flows: resonance histograms, flow logs and the Eq.-9-style index.
    Rg {
        #[command(flatten)]
        run: RunArgs,
        /// Also solve the renormalized coupled-dipole system and extract
        /// the RG-predicted spectrum (dense solves; slow at large N).
        #[arg(long)]
        with_spectrum: bool,
        /// Histogram bins.
        #[arg(long, default_value_t = 201)]
        bins: usize,
        /// Record nearest-interacting-neighbour distances per RG event.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Two-atom analytics at a given separation.
    Pair {
        /// Separation ρ12 in 1/k0 units.
        #[arg(long)]
        rho: f64,
        /// Polar angle of the separation from x̂ (radians).
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Azimuth of the separation (radians).
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        /// Detuning offset δω12 = (ω1 − ω2)/2 in Γ0.
        #[arg(long, default_value_t = 0.0)]
        delta_omega: f64,
        /// Detuning grid as min:max:count (defaults to a span bracketing
        /// both resonances).
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<String>,
        /// Output CSV for the pair spectrum.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic index curves (MB, LL, or the inhomogeneous Eq.-9 form).
    Baseline {
        /// Model: mb | ll | eq9.
        #[arg(long)]
        model: String,
        #[arg(long)]
        eta: f64,
        /// Detuning grid as min:max:count.
        #[arg(long, allow_hyphen_values = true)]
        delta: String,
        /// Resonance histogram CSV (eq9 only).
        #[arg(long)]
        hist: Option<PathBuf>,
        #[arg(long, default_value = "baseline.csv")]
        out: PathBuf,
    },
    /// Far-field intensity map of one solved configuration.
    Farfield {
        #[command(flatten)]
        run: RunArgs,
        /// Detuning of the drive.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Configuration index (selects the derived seed).
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Radius of the observation hemisphere in λ0.
        #[arg(long, default_value_t = 35.0)]
        radius_lambda0: f64,
        /// Polar grid resolution (azimuthal is twice this).
        #[arg(long, default_value_t = 48)]
        grid: usize,
        /// Add the incident beam coherently to the scattered field.
        #[arg(long)]
        with_incident: bool,
    },
    /// L¹ and KS distances between two histogram CSVs.
    Compare { a: PathBuf, b: PathBuf },
    /// Pretty-print an acceptance results file.
    Report {
        /// Directory holding acceptance_results.json.
        #[arg(long, default_value = "target/acceptance")]
        dir: PathBuf,
    },
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be min:max:count, got `{spec}`");
    }
    let (min, max): (f64, f64) = (parts[0].parse()?, parts[1].parse()?);
    let count: usize = parts[2].parse()?;
    if count == 0 || (count > 1 && max <= min) {
        bail!("grid must be strictly increasing with count >= 1");
    }
    Ok(if count == 1 {
        vec![min]
    } else {
        (0..count).map(|k| min + (max - min) * k as f64 / (count - 1) as f64).collect()
    })
}

/// Read a histogram CSV written by the library back into memory.
fn read_histogram(path: &Path, eta: f64) -> Result<ResonanceHistogram> {
    let mut reader = csv::Reader::from_path(path)?;
    let rescaled = reader.headers()?.get(0).map(|h| h == "omega_over_eta").unwrap_or(false);
    let mut centers = Vec::new();
    let mut density = Vec::new();
    let mut counts = Vec::new();
    for row in reader.records() {
        let row = row?;
        centers.push(row[0].parse::<f64>()?);
        density.push(row[1].parse::<f64>()?);
        counts.push(row[2].parse::<u64>()?);
    }
    if centers.len() < 2 {
        bail!("histogram {} has fewer than 2 bins", path.display());
    }
    let width = centers[1] - centers[0];
    let min = centers[0] - 0.5 * width;
    let max = centers[centers.len() - 1] + 0.5 * width;
    let in_range: u64 = counts.iter().sum();
    let mass: f64 = density.iter().map(|d| d * width).sum();
    // out-of-range counts are not stored in the CSV; reconstruct them from
    // the normalization so the density invariant still holds
    let total = if mass > 0.0 { (in_range as f64 / mass).round() as u64 } else { in_range };
    Ok(ResonanceHistogram {
        min,
        max,
        density,
        counts,
        total_samples: total,
        out_of_range: total.saturating_sub(in_range),
        eta,
        rescaled,
    })
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sample { run } => {
            let cfg = run.load()?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            for index in 0..cfg.configs {
                let seed = config_seed(cfg.master_seed, index);
                let config = sample_configuration(cfg.geometry, cfg.eta, seed, cfg.rho_min)?;
                let path = cfg.out_dir.join(format!("positions_{index:05}.csv"));
                save_configuration(&config, &path)?;
            }
            println!("wrote {} configurations to {}", cfg.configs, cfg.out_dir.display());
        }
        Command::Spectrum { run } => {
            let cfg = run.load()?;
            let spectra = run_index_sweep(&cfg, &[cfg.eta], run.workers(), run.resume)?;
            let spectrum = &spectra[0];
            let k = spectrum.argmax_re_n();
            println!(
                "eta = {}: {} configs, max Re n = {:.4} at delta = {:.3}; outputs in {}",
                cfg.eta,
                spectrum.n_configs,
                spectrum.n[k].re,
                spectrum.detunings[k],
                cfg.out_dir.display()
            );
            for warning in spectrum.passivity_violations() {
                eprintln!("warning: {warning}");
            }
        }
        Command::Rg { run, with_spectrum, bins, diagnostics } => {
            let cfg = run.load()?;
            let cells = run_rg_sweep(
                &cfg,
                &[cfg.eta],
                run.workers(),
                run.resume,
                bins,
                diagnostics,
                with_spectrum,
            )?;
            let cell = &cells[0];
            println!(
                "eta = {}: {} flows, {} renormalization events in flow 0, outputs in {}",
                cfg.eta,
                cell.states.len(),
                cell.states[0].flow_log.len(),
                cfg.out_dir.display()
            );
            if let Some(spectrum) = &cell.renormalized_spectrum {
                let k = spectrum.argmax_re_n();
                println!(
                    "renormalized solve: max Re n = {:.4} at delta = {:.3}",
                    spectrum.n[k].re, spectrum.detunings[k]
                );
            }
        }
        Command::Pair { rho, theta, phi, delta_omega, delta, out } => {
            let separation =
                [rho * theta.cos(), rho * theta.sin() * phi.cos(), rho * theta.sin() * phi.sin()];
            let pair = PairSpec { separation, delta_omega, drive: PairDrive::PlaneWave };
            let modes = pair_eigenmodes(&pair)?;
            println!(
                "eigenmodes: nu+ = {:.6e} (Gamma+ = {:.6}), nu- = {:.6e} (Gamma- = {:.6e})",
                modes.omega_plus, modes.gamma_plus, modes.omega_minus, modes.gamma_minus
            );
            let sections = pair_cross_sections(&pair)?;
            println!(
                "resonant cross sections: sigma+/sigma = {:.4}, sigma-/sigma = {:.4}",
                sections.sigma_plus, sections.sigma_minus
            );
            if rho <= 0.2 && delta_omega == 0.0 {
                println!(
                    "orientation averages: <sigma-/sigma> = {:.4}; zeta-form at 0 = {:.4}",
                    antisym_avg_cross_section(rho)?,
                    antisym_avg_cross_section_zeta(0.0)
                );
            }
            let grid = match delta {
                Some(spec) => parse_grid(&spec)?,
                None => {
                    let span = 1.2 * modes.omega_minus.abs().max(modes.omega_plus.abs()).max(2.0);
                    parse_grid(&format!("{}:{}:801", -span, span))?
                }
            };
            let spectrum = pair_spectrum(&pair, &grid)?;
            if let Some(path) = out {
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(["delta", "sigma_over_sigma_sc", "im_n"])?;
                for p in &spectrum {
                    w.write_record([
                        format!("{:.12e}", p.delta),
                        format!("{:.12e}", p.sigma),
                        format!("{:.12e}", p.im_n),
                    ])?;
                }
                w.flush()?;
                println!("pair spectrum written to {}", path.display());
            }
        }
        Command::Baseline { model, eta, delta, hist, out } => {
            let detunings = parse_grid(&delta)?;
            let histogram = match (&model[..], &hist) {
                ("eq9", Some(path)) => Some(read_histogram(path, eta)?),
                ("eq9", None) => bail!("--hist is required for the eq9 model"),
                _ => None,
            };
            let evaluate = |d: f64| -> Result<C64> {
                Ok(match model.as_str() {
                    "mb" => n_mb(d, eta),
                    "ll" => n_ll(d, eta),
                    "eq9" => n_inhomogeneous(d, eta, histogram.as_ref().unwrap())?,
                    other => bail!("unknown model `{other}` (expected mb, ll or eq9)"),
                })
            };
            let curve_model = match model.as_str() {
                "mb" => IndexModel::Mb,
                "ll" => IndexModel::Ll,
                "eq9" => IndexModel::MbInhomogeneous,
                other => bail!("unknown model `{other}` (expected mb, ll or eq9)"),
            };
            let n = detunings.iter().map(|&d| evaluate(d)).collect::<Result<Vec<_>>>()?;
            let curve = IndexCurve { detunings: detunings.clone(), n, model: curve_model, eta };
            curve.write_csv(&out)?;
            match max_index(|d| evaluate(d).unwrap_or(C64::new(f64::MIN, 0.0)), (detunings[0], *detunings.last().unwrap())) {
                Ok((d_star, max_n)) => println!(
                    "{} curve written to {}; max Re n = {max_n:.4} at delta = {d_star:.3}",
                    curve.model,
                    out.display()
                ),
                Err(e) => println!("{} curve written to {}; {e}", curve.model, out.display()),
            }
        }
        Command::Farfield { run, delta, index, radius_lambda0, grid, with_incident } => {
            let cfg = run.load()?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let seed = config_seed(cfg.master_seed, index);
            let config = sample_configuration(cfg.geometry, cfg.eta, seed, cfg.rho_min)?;
            let matrix = assemble_interaction(&config, cfg.rho_min)?;
            let beam = rindex_core::optics::BeamSpec::new(cfg.waist);
            let drive: Vec<C64> = config
                .positions
                .iter()
                .map(|&p| rindex_core::optics::gaussian_beam(p, beam))
                .collect();
            let solution = solve_dipoles(&matrix, None, None, &drive, delta)?;
            let dipoles: Vec<([f64; 3], [C64; 3])> = config
                .positions
                .iter()
                .zip(&solution.amplitudes)
                .map(|(&p, &c)| (p, [c, C64::new(0.0, 0.0), C64::new(0.0, 0.0)]))
                .collect();
            let radius = radius_lambda0 * rindex_core::config::LAMBDA0;
            let mut points = Vec::new();
            let mut angles = Vec::new();
            for it in 0..grid {
                // forward hemisphere (z > 0)
                let theta = std::f64::consts::FRAC_PI_2 * (it as f64 + 0.5) / grid as f64;
                for ip in 0..(2 * grid) {
                    let phi = std::f64::consts::TAU * (ip as f64 + 0.5) / (2 * grid) as f64;
                    angles.push((theta, phi));
                    points.push([
                        radius * theta.sin() * phi.cos(),
                        radius * theta.sin() * phi.sin(),
                        radius * theta.cos(),
                    ]);
                }
            }
            let intensity = if with_incident {
                rindex_core::observables::far_field_intensity_with_incident(
                    &dipoles,
                    &points,
                    |p| {
                        [
                            rindex_core::optics::gaussian_beam(p, beam),
                            C64::new(0.0, 0.0),
                            C64::new(0.0, 0.0),
                        ]
                    },
                )?
            } else {
                far_field_intensity(&dipoles, &points)?
            };
            let rows: Vec<(f64, f64, f64)> =
                angles.iter().zip(&intensity).map(|(&(t, p), &i)| (t, p, i)).collect();
            let path = cfg.out_dir.join(format!("farfield_delta{delta}_config{index}.csv"));
            write_far_field_csv(&path, &rows)?;
            println!("far-field map ({} points) written to {}", rows.len(), path.display());
        }
        Command::Compare { a, b } => {
            let ha = read_histogram(&a, 1.0)?;
            let hb = read_histogram(&b, 1.0)?;
            let cmp = compare_distributions(&ha, &hb);
            println!("L1 = {:.6}", cmp.l1);
            println!("KS = {:.6}", cmp.ks);
            if cmp.disjoint {
                println!("supports are disjoint");
            }
        }
        Command::Report { dir } => {
            let path = dir.join("acceptance_results.json");
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("no acceptance results at {}", path.display()))?;
            let results: serde_json::Value = serde_json::from_str(&text)?;
            let Some(list) = results.get("criteria").and_then(|c| c.as_array()) else {
                bail!("malformed results file");
            };
            let mut passed = 0;
            for item in list {
                let ok = item["pass"].as_bool().unwrap_or(false);
                passed += ok as usize;
                println!(
                    "[{}] criterion {:>2}: {}",
                    if ok { "PASS" } else { "FAIL" },
                    item["id"],
                    item["summary"].as_str().unwrap_or("?")
                );
            }
            println!("{passed}/{} criteria passed", list.len());
        }
    }
    Ok(())
}
