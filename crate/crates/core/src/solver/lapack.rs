//! Thin FFI onto the system OpenBLAS/LAPACK for the dense kernels.
//!
//! All matrices are stored column-major (`a[i + j*n]` is the `(i, j)`
//! element) to match the Fortran convention. Only the handful of routines
//! the solver backends actually use are bound here.

use num_complex::Complex32 as C32;
use num_complex::Complex64 as C64;
use std::os::raw::c_int;

extern "C" {
    fn openblas_set_num_threads(n: c_int);

    fn zgetrf_(m: *const c_int, n: *const c_int, a: *mut C64, lda: *const c_int, ipiv: *mut c_int, info: *mut c_int);
    fn zgetrs_(trans: *const u8, n: *const c_int, nrhs: *const c_int, a: *const C64, lda: *const c_int, ipiv: *const c_int, b: *mut C64, ldb: *const c_int, info: *mut c_int);
    fn zgecon_(norm: *const u8, n: *const c_int, a: *const C64, lda: *const c_int, anorm: *const f64, rcond: *mut f64, work: *mut C64, rwork: *mut f64, info: *mut c_int);
    fn zsytrf_(uplo: *const u8, n: *const c_int, a: *mut C64, lda: *const c_int, ipiv: *mut c_int, work: *mut C64, lwork: *const c_int, info: *mut c_int);
    fn zsytrs_(uplo: *const u8, n: *const c_int, nrhs: *const c_int, a: *const C64, lda: *const c_int, ipiv: *const c_int, b: *mut C64, ldb: *const c_int, info: *mut c_int);
    fn zgehrd_(n: *const c_int, ilo: *const c_int, ihi: *const c_int, a: *mut C64, lda: *const c_int, tau: *mut C64, work: *mut C64, lwork: *const c_int, info: *mut c_int);
    fn zunmhr_(side: *const u8, trans: *const u8, m: *const c_int, n: *const c_int, ilo: *const c_int, ihi: *const c_int, a: *const C64, lda: *const c_int, tau: *const C64, c: *mut C64, ldc: *const c_int, work: *mut C64, lwork: *const c_int, info: *mut c_int);
    fn zgeev_(jobvl: *const u8, jobvr: *const u8, n: *const c_int, a: *mut C64, lda: *const c_int, w: *mut C64, vl: *mut C64, ldvl: *const c_int, vr: *mut C64, ldvr: *const c_int, work: *mut C64, lwork: *const c_int, rwork: *mut f64, info: *mut c_int);
    fn dsyev_(jobz: *const u8, uplo: *const u8, n: *const c_int, a: *mut f64, lda: *const c_int, w: *mut f64, work: *mut f64, lwork: *const c_int, info: *mut c_int);
    fn zgemv_(trans: *const u8, m: *const c_int, n: *const c_int, alpha: *const C64, a: *const C64, lda: *const c_int, x: *const C64, incx: *const c_int, beta: *const C64, y: *mut C64, incy: *const c_int);

    fn cgehrd_(n: *const c_int, ilo: *const c_int, ihi: *const c_int, a: *mut C32, lda: *const c_int, tau: *mut C32, work: *mut C32, lwork: *const c_int, info: *mut c_int);
    fn cunmhr_(side: *const u8, trans: *const u8, m: *const c_int, n: *const c_int, ilo: *const c_int, ihi: *const c_int, a: *const C32, lda: *const c_int, tau: *const C32, c: *mut C32, ldc: *const c_int, work: *mut C32, lwork: *const c_int, info: *mut c_int);
    fn csytrf_(uplo: *const u8, n: *const c_int, a: *mut C32, lda: *const c_int, ipiv: *mut c_int, work: *mut C32, lwork: *const c_int, info: *mut c_int);
    fn csytrs_(uplo: *const u8, n: *const c_int, nrhs: *const c_int, a: *const C32, lda: *const c_int, ipiv: *const c_int, b: *mut C32, ldb: *const c_int, info: *mut c_int);
}

/// Set the global OpenBLAS thread count.
///
/// The harness drops this to 1 while rayon parallelizes over configurations
/// and raises it again for single large factorizations.
pub fn set_blas_threads(n: usize) {
    unsafe { openblas_set_num_threads(n.max(1) as c_int) };
}

#[derive(Debug, thiserror::Error)]
pub enum LapackError {
    #[error("{routine}: illegal argument {arg}")]
    BadArgument { routine: &'static str, arg: i32 },
    #[error("{routine}: matrix is singular (zero pivot at {pivot})")]
    Singular { routine: &'static str, pivot: i32 },
    #[error("{routine}: did not converge (info = {info})")]
    NoConvergence { routine: &'static str, info: i32 },
}

fn check(routine: &'static str, info: c_int, singular_means_failure: bool) -> Result<(), LapackError> {
    if info < 0 {
        Err(LapackError::BadArgument { routine, arg: -info })
    } else if info > 0 && singular_means_failure {
        Err(LapackError::Singular { routine, pivot: info })
    } else if info > 0 {
        Err(LapackError::NoConvergence { routine, info })
    } else {
        Ok(())
    }
}

/// LU factorization in place; returns the pivot indices.
pub fn lu_factor(a: &mut [C64], n: usize) -> Result<Vec<c_int>, LapackError> {
    debug_assert_eq!(a.len(), n * n);
    let mut ipiv = vec![0 as c_int; n];
    let (m, nn, lda) = (n as c_int, n as c_int, n as c_int);
    let mut info = 0;
    unsafe { zgetrf_(&m, &nn, a.as_mut_ptr(), &lda, ipiv.as_mut_ptr(), &mut info) };
    check("zgetrf", info, true)?;
    Ok(ipiv)
}

/// Solve with a factorization from [`lu_factor`]; `b` is overwritten.
pub fn lu_solve(a: &[C64], ipiv: &[c_int], n: usize, b: &mut [C64]) -> Result<(), LapackError> {
    let nrhs = (b.len() / n) as c_int;
    let (nn, lda, ldb) = (n as c_int, n as c_int, n as c_int);
    let mut info = 0;
    unsafe { zgetrs_(b"N".as_ptr(), &nn, &nrhs, a.as_ptr(), &lda, ipiv.as_ptr(), b.as_mut_ptr(), &ldb, &mut info) };
    check("zgetrs", info, true)
}

/// Reciprocal 1-norm condition estimate from an LU factorization.
pub fn lu_rcond(a_factored: &[C64], n: usize, anorm_one: f64) -> Result<f64, LapackError> {
    let nn = n as c_int;
    let lda = n as c_int;
    let mut rcond = 0.0;
    let mut work = vec![C64::new(0.0, 0.0); 2 * n];
    let mut rwork = vec![0.0f64; 2 * n];
    let mut info = 0;
    unsafe {
        zgecon_(b"1".as_ptr(), &nn, a_factored.as_ptr(), &lda, &anorm_one, &mut rcond, work.as_mut_ptr(), rwork.as_mut_ptr(), &mut info)
    };
    check("zgecon", info, true)?;
    Ok(rcond)
}

/// 1-norm (maximum column sum of moduli) of a column-major matrix.
pub fn one_norm(a: &[C64], n: usize) -> f64 {
    (0..n)
        .map(|j| a[j * n..(j + 1) * n].iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Factorization state for the complex-symmetric (Bunch-Kaufman) solver.
pub struct SymFactor {
    pub a: Vec<C64>,
    pub ipiv: Vec<c_int>,
    pub n: usize,
}

/// Bunch-Kaufman factorization of a complex *symmetric* matrix (in place).
pub fn sym_factor(mut a: Vec<C64>, n: usize) -> Result<SymFactor, LapackError> {
    let mut ipiv = vec![0 as c_int; n];
    let (nn, lda) = (n as c_int, n as c_int);
    let mut info = 0;
    let lwork_query = -1 as c_int;
    let mut wkopt = [C64::new(0.0, 0.0)];
    unsafe { zsytrf_(b"L".as_ptr(), &nn, a.as_mut_ptr(), &lda, ipiv.as_mut_ptr(), wkopt.as_mut_ptr(), &lwork_query, &mut info) };
    check("zsytrf", info, true)?;
    let lwork = wkopt[0].re as c_int;
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe { zsytrf_(b"L".as_ptr(), &nn, a.as_mut_ptr(), &lda, ipiv.as_mut_ptr(), work.as_mut_ptr(), &lwork, &mut info) };
    check("zsytrf", info, true)?;
    Ok(SymFactor { a, ipiv, n })
}

/// Solve with a [`SymFactor`]; `b` is overwritten with the solution.
pub fn sym_solve(f: &SymFactor, b: &mut [C64]) -> Result<(), LapackError> {
    let nrhs = (b.len() / f.n) as c_int;
    let (nn, lda, ldb) = (f.n as c_int, f.n as c_int, f.n as c_int);
    let mut info = 0;
    unsafe { zsytrs_(b"L".as_ptr(), &nn, &nrhs, f.a.as_ptr(), &lda, f.ipiv.as_ptr(), b.as_mut_ptr(), &ldb, &mut info) };
    check("zsytrs", info, true)
}

/// Reduce `a` to upper Hessenberg form in place; returns the reflector scalars.
///
/// On exit the upper Hessenberg part of `a` holds `H = Q^H A Q` and the
/// entries below the first subdiagonal hold the Householder vectors.
pub fn hessenberg_reduce(a: &mut [C64], n: usize) -> Result<Vec<C64>, LapackError> {
    let (nn, ilo, ihi, lda) = (n as c_int, 1 as c_int, n as c_int, n as c_int);
    let mut tau = vec![C64::new(0.0, 0.0); n.saturating_sub(1).max(1)];
    let mut info = 0;
    let lwork_query = -1 as c_int;
    let mut wkopt = [C64::new(0.0, 0.0)];
    unsafe { zgehrd_(&nn, &ilo, &ihi, a.as_mut_ptr(), &lda, tau.as_mut_ptr(), wkopt.as_mut_ptr(), &lwork_query, &mut info) };
    check("zgehrd", info, false)?;
    let lwork = wkopt[0].re as c_int;
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe { zgehrd_(&nn, &ilo, &ihi, a.as_mut_ptr(), &lda, tau.as_mut_ptr(), work.as_mut_ptr(), &lwork, &mut info) };
    check("zgehrd", info, false)?;
    Ok(tau)
}

/// Apply `Q^H` (from [`hessenberg_reduce`]) to a vector on the left.
pub fn apply_q_conj_left(a: &[C64], tau: &[C64], n: usize, x: &mut [C64]) -> Result<(), LapackError> {
    debug_assert_eq!(x.len(), n);
    let (m, nn, ilo, ihi, lda, ldc) = (n as c_int, 1 as c_int, 1 as c_int, n as c_int, n as c_int, n as c_int);
    let mut info = 0;
    let lwork_query = -1 as c_int;
    let mut wkopt = [C64::new(0.0, 0.0)];
    unsafe {
        zunmhr_(b"L".as_ptr(), b"C".as_ptr(), &m, &nn, &ilo, &ihi, a.as_ptr(), &lda, tau.as_ptr(), x.as_mut_ptr(), &ldc, wkopt.as_mut_ptr(), &lwork_query, &mut info)
    };
    check("zunmhr", info, false)?;
    let lwork = wkopt[0].re as c_int;
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        zunmhr_(b"L".as_ptr(), b"C".as_ptr(), &m, &nn, &ilo, &ihi, a.as_ptr(), &lda, tau.as_ptr(), x.as_mut_ptr(), &ldc, work.as_mut_ptr(), &lwork, &mut info)
    };
    check("zunmhr", info, false)
}

/// Apply `Q` (from [`hessenberg_reduce`]) to a vector on the left.
pub fn apply_q_left(a: &[C64], tau: &[C64], n: usize, x: &mut [C64]) -> Result<(), LapackError> {
    debug_assert_eq!(x.len(), n);
    let (m, nn, ilo, ihi, lda, ldc) = (n as c_int, 1 as c_int, 1 as c_int, n as c_int, n as c_int, n as c_int);
    let mut info = 0;
    let lwork_query = -1 as c_int;
    let mut wkopt = [C64::new(0.0, 0.0)];
    unsafe {
        zunmhr_(b"L".as_ptr(), b"N".as_ptr(), &m, &nn, &ilo, &ihi, a.as_ptr(), &lda, tau.as_ptr(), x.as_mut_ptr(), &ldc, wkopt.as_mut_ptr(), &lwork_query, &mut info)
    };
    check("zunmhr", info, false)?;
    let lwork = wkopt[0].re as c_int;
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        zunmhr_(b"L".as_ptr(), b"N".as_ptr(), &m, &nn, &ilo, &ihi, a.as_ptr(), &lda, tau.as_ptr(), x.as_mut_ptr(), &ldc, work.as_mut_ptr(), &lwork, &mut info)
    };
    check("zunmhr", info, false)
}

/// Eigenvalues and right eigenvectors of a general complex matrix.
///
/// `a` is destroyed; returns `(w, vr)` with eigenvectors in the columns of
/// `vr` (column-major).
pub fn eig(a: &mut [C64], n: usize) -> Result<(Vec<C64>, Vec<C64>), LapackError> {
    let (nn, lda) = (n as c_int, n as c_int);
    let mut w = vec![C64::new(0.0, 0.0); n];
    let mut vr = vec![C64::new(0.0, 0.0); n * n];
    let mut rwork = vec![0.0f64; 2 * n];
    let mut info = 0;
    let ldvl = 1 as c_int;
    let ldvr = n as c_int;
    let lwork_query = -1 as c_int;
    let mut wkopt = [C64::new(0.0, 0.0)];
    unsafe {
        zgeev_(b"N".as_ptr(), b"V".as_ptr(), &nn, a.as_mut_ptr(), &lda, w.as_mut_ptr(), std::ptr::null_mut(), &ldvl, vr.as_mut_ptr(), &ldvr, wkopt.as_mut_ptr(), &lwork_query, rwork.as_mut_ptr(), &mut info)
    };
    check("zgeev", info, false)?;
    let lwork = wkopt[0].re as c_int;
    let mut work = vec![C64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        zgeev_(b"N".as_ptr(), b"V".as_ptr(), &nn, a.as_mut_ptr(), &lda, w.as_mut_ptr(), std::ptr::null_mut(), &ldvl, vr.as_mut_ptr(), &ldvr, work.as_mut_ptr(), &lwork, rwork.as_mut_ptr(), &mut info)
    };
    check("zgeev", info, false)?;
    Ok((w, vr))
}

/// Eigenvalues of a real symmetric matrix (`a` is destroyed).
pub fn sym_eigenvalues(a: &mut [f64], n: usize) -> Result<Vec<f64>, LapackError> {
    let (nn, lda) = (n as c_int, n as c_int);
    let mut w = vec![0.0f64; n];
    let mut info = 0;
    let lwork_query = -1 as c_int;
    let mut wkopt = [0.0f64];
    unsafe { dsyev_(b"N".as_ptr(), b"L".as_ptr(), &nn, a.as_mut_ptr(), &lda, w.as_mut_ptr(), wkopt.as_mut_ptr(), &lwork_query, &mut info) };
    check("dsyev", info, false)?;
    let lwork = wkopt[0] as c_int;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe { dsyev_(b"N".as_ptr(), b"L".as_ptr(), &nn, a.as_mut_ptr(), &lda, w.as_mut_ptr(), work.as_mut_ptr(), &lwork, &mut info) };
    check("dsyev", info, false)?;
    Ok(w)
}

/// `y <- alpha * A x + beta * y` for a column-major matrix.
pub fn gemv(n: usize, alpha: C64, a: &[C64], x: &[C64], beta: C64, y: &mut [C64]) {
    let (m, nn, lda) = (n as c_int, n as c_int, n as c_int);
    let (incx, incy) = (1 as c_int, 1 as c_int);
    unsafe { zgemv_(b"N".as_ptr(), &m, &nn, &alpha, a.as_ptr(), &lda, x.as_ptr(), &incx, &beta, y.as_mut_ptr(), &incy) };
}

/// Single-precision Hessenberg reduction (see [`hessenberg_reduce`]).
pub fn hessenberg_reduce_f32(a: &mut [C32], n: usize) -> Result<Vec<C32>, LapackError> {
    let (nn, ilo, ihi, lda) = (n as c_int, 1 as c_int, n as c_int, n as c_int);
    let mut tau = vec![C32::new(0.0, 0.0); n.saturating_sub(1).max(1)];
    let mut info = 0;
    let lwork_query = -1 as c_int;
    let mut wkopt = [C32::new(0.0, 0.0)];
    unsafe { cgehrd_(&nn, &ilo, &ihi, a.as_mut_ptr(), &lda, tau.as_mut_ptr(), wkopt.as_mut_ptr(), &lwork_query, &mut info) };
    check("cgehrd", info, false)?;
    let lwork = wkopt[0].re as c_int;
    let mut work = vec![C32::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe { cgehrd_(&nn, &ilo, &ihi, a.as_mut_ptr(), &lda, tau.as_mut_ptr(), work.as_mut_ptr(), &lwork, &mut info) };
    check("cgehrd", info, false)?;
    Ok(tau)
}

/// Apply `Q^H` or `Q` from [`hessenberg_reduce_f32`] to a single vector.
pub fn apply_q_f32(a: &[C32], tau: &[C32], n: usize, x: &mut [C32], conjugate: bool) -> Result<(), LapackError> {
    debug_assert_eq!(x.len(), n);
    let trans: &[u8; 1] = if conjugate { b"C" } else { b"N" };
    let (m, nn, ilo, ihi, lda, ldc) = (n as c_int, 1 as c_int, 1 as c_int, n as c_int, n as c_int, n as c_int);
    let mut info = 0;
    let lwork_query = -1 as c_int;
    let mut wkopt = [C32::new(0.0, 0.0)];
    unsafe {
        cunmhr_(b"L".as_ptr(), trans.as_ptr(), &m, &nn, &ilo, &ihi, a.as_ptr(), &lda, tau.as_ptr(), x.as_mut_ptr(), &ldc, wkopt.as_mut_ptr(), &lwork_query, &mut info)
    };
    check("cunmhr", info, false)?;
    let lwork = wkopt[0].re as c_int;
    let mut work = vec![C32::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        cunmhr_(b"L".as_ptr(), trans.as_ptr(), &m, &nn, &ilo, &ihi, a.as_ptr(), &lda, tau.as_ptr(), x.as_mut_ptr(), &ldc, work.as_mut_ptr(), &lwork, &mut info)
    };
    check("cunmhr", info, false)
}

/// Single-precision complex-symmetric factorization state.
pub struct SymFactorF32 {
    pub a: Vec<C32>,
    pub ipiv: Vec<c_int>,
    pub n: usize,
}

/// Single-precision Bunch-Kaufman factorization of a complex symmetric matrix.
pub fn sym_factor_f32(mut a: Vec<C32>, n: usize) -> Result<SymFactorF32, LapackError> {
    let mut ipiv = vec![0 as c_int; n];
    let (nn, lda) = (n as c_int, n as c_int);
    let mut info = 0;
    let lwork_query = -1 as c_int;
    let mut wkopt = [C32::new(0.0, 0.0)];
    unsafe { csytrf_(b"L".as_ptr(), &nn, a.as_mut_ptr(), &lda, ipiv.as_mut_ptr(), wkopt.as_mut_ptr(), &lwork_query, &mut info) };
    check("csytrf", info, true)?;
    let lwork = wkopt[0].re as c_int;
    let mut work = vec![C32::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe { csytrf_(b"L".as_ptr(), &nn, a.as_mut_ptr(), &lda, ipiv.as_mut_ptr(), work.as_mut_ptr(), &lwork, &mut info) };
    check("csytrf", info, true)?;
    Ok(SymFactorF32 { a, ipiv, n })
}

/// Solve with a [`SymFactorF32`]; `b` is overwritten.
pub fn sym_solve_f32(f: &SymFactorF32, b: &mut [C32]) -> Result<(), LapackError> {
    let nrhs = (b.len() / f.n) as c_int;
    let (nn, lda, ldb) = (f.n as c_int, f.n as c_int, f.n as c_int);
    let mut info = 0;
    unsafe { csytrs_(b"L".as_ptr(), &nn, &nrhs, f.a.as_ptr(), &lda, f.ipiv.as_ptr(), b.as_mut_ptr(), &ldb, &mut info) };
    check("csytrs", info, true)
}
