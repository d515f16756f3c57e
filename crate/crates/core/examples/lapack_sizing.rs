//! Rough wall-clock sizing of the dense kernels on the local machine.
//! Used to pick sensible disorder-average batch sizes; not a benchmark.

use num_complex::Complex64 as C64;
use rindex_core::solver::lapack;
use std::time::Instant;

fn random_matrix(n: usize, seed: u64) -> Vec<C64> {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state as f64 / u64::MAX as f64) - 0.5
    };
    (0..n * n).map(|_| C64::new(next(), next())).collect()
}

fn main() {
    let threads: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    lapack::set_blas_threads(threads);
    println!("threads = {threads}");

    for &n in &[1000usize, 2000, 4000] {
        let mut a = random_matrix(n, 7);
        for i in 0..n {
            a[i + i * n] += C64::new(n as f64, 0.0);
        }
        let t = Instant::now();
        let _ = lapack::lu_factor(&mut a, n).unwrap();
        let t_lu = t.elapsed().as_secs_f64();

        let mut a = random_matrix(n, 8);
        let t = Instant::now();
        let tau = lapack::hessenberg_reduce(&mut a, n).unwrap();
        let t_hess = t.elapsed().as_secs_f64();
        let mut x = vec![C64::new(1.0, 0.0); n];
        let t = Instant::now();
        lapack::apply_q_conj_left(&a, &tau, n, &mut x).unwrap();
        let t_q = t.elapsed().as_secs_f64();

        // symmetrize for zsytrf
        let mut s = random_matrix(n, 9);
        for j in 0..n {
            for i in 0..j {
                let v = s[i + j * n];
                s[j + i * n] = v;
            }
            s[j + j * n] += C64::new(n as f64, 0.0);
        }
        let t = Instant::now();
        let _ = lapack::sym_factor(s, n).unwrap();
        let t_sy = t.elapsed().as_secs_f64();

        let mut g = vec![0.0f64; n * n];
        for j in 0..n {
            for i in 0..n {
                g[i + j * n] = ((i * 31 + j * 17) % 101) as f64 / 101.0;
            }
        }
        for j in 0..n {
            for i in 0..j {
                g[j + i * n] = g[i + j * n];
            }
        }
        let t = Instant::now();
        let _ = lapack::sym_eigenvalues(&mut g, n).unwrap();
        let t_ev = t.elapsed().as_secs_f64();

        println!(
            "n={n}: zgetrf {t_lu:.2}s  zgehrd {t_hess:.2}s  zunmhr(vec) {t_q:.3}s  zsytrf {t_sy:.2}s  dsyev(N) {t_ev:.2}s"
        );
    }
}
