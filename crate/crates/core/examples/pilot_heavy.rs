//! Wall-clock pilot of one Hessenberg-backend configuration at a given η.

use std::time::Instant;
use rindex_core::config::{DetuningGrid, RunConfig, SolverMethod, LAMBDA0};
use rindex_core::ensemble::{atom_count, Geometry};
use rindex_core::harness::run_transmission_cell;

fn main() {
    let eta: f64 = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(2.0);
    let configs: usize = std::env::args().nth(2).and_then(|v| v.parse().ok()).unwrap_or(1);
    let geometry = Geometry::Cylinder { radius: 4.0 * LAMBDA0, thickness: 0.4 * LAMBDA0 };
    let run = RunConfig {
        geometry,
        waist: 2.0 * LAMBDA0,
        eta,
        detuning: DetuningGrid { min: -4.0 * eta, max: 2.0 * eta, count: 37 },
        configs,
        master_seed: 0xC2,
        k_cutoff: 1.0,
        step_fraction: 0.025,
        solver_method: SolverMethod::Hessenberg,
        rho_min: 1e-3,
        out_dir: std::path::PathBuf::from("/tmp/pilot-heavy"),
    };
    println!("eta = {eta}, N = {}, {configs} config(s)", atom_count(geometry, eta));
    let t = Instant::now();
    let spectrum = run_transmission_cell(&run, eta, 1, true, "full", false).unwrap();
    println!("total {:.1}s", t.elapsed().as_secs_f64());
    let k = spectrum.argmax_re_n();
    println!(
        "max Re n = {:.4} at delta = {:.3}; t stderr at peak = {:.4}",
        spectrum.n[k].re, spectrum.detunings[k], spectrum.t_stderr[k].re
    );
    for (k, &d) in spectrum.detunings.iter().enumerate() {
        println!("  delta {:7.3}  n = {:.4} {:+.4}i  |t| = {:.4}", d, spectrum.n[k].re, spectrum.n[k].im, spectrum.t_mean[k].norm());
    }
}
