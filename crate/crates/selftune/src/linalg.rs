//! Dense control-theoretic linear algebra: the Riccati recursion, a
//! discrete algebraic Riccati equation (DARE) solver, LQR gain synthesis,
//! and diagnostics (controllability rank, spectral radius, PSD Cholesky).
//!
//! The DARE solver iterates the finite-horizon value recursion to its fixed
//! point. Divergence of the iteration is reported as ordinary
//! non-convergence rather than an error: it is the signal that the pair
//! (A, B) is not stabilizable, which callers (notably greedy actuator
//! selection) rely on.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition-number limit for the input-penalty inversion in the Riccati
/// step and gain computation.
const INNER_CONDITION_LIMIT: f64 = 1e14;

/// How [`solve_dare`] evaluates the value recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DareMethod {
    /// One Riccati step per iteration, starting from P = Q.
    #[default]
    ValueIteration,
    /// Doubling iteration: each step squares the underlying symplectic map,
    /// producing the value-iteration sequence at geometrically spaced
    /// indices. Same fixed point and the same divergence behaviour, in
    /// O(log) iterations; preferred for larger state dimensions.
    Doubling,
}

/// Tolerances and limits for [`solve_dare`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DareOptions {
    /// Relative Frobenius-norm change below which the iteration stops.
    pub tol: f64,
    /// Iteration cap for value iteration (the doubling method reaches an
    /// equivalent horizon of 2^64 and uses its own fixed cap).
    pub max_iter: usize,
    /// Iterate norm beyond which the recursion is declared divergent.
    pub divergence_threshold: f64,
    pub method: DareMethod,
    /// Optional warm-start iterate for value iteration (the doubling method
    /// always starts from Q). Any symmetric PSD matrix is valid.
    #[serde(skip)]
    pub initial: Option<DMatrix<f64>>,
}

impl Default for DareOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
            divergence_threshold: 1e12,
            method: DareMethod::ValueIteration,
            initial: None,
        }
    }
}

impl DareOptions {
    pub fn doubling() -> Self {
        Self {
            method: DareMethod::Doubling,
            ..Self::default()
        }
    }
}

/// Result of a DARE solve. `converged == false` means the iterate either
/// exceeded the divergence threshold or the iteration cap; `p` is the last
/// iterate in that case.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    /// Value matrix: the fixed point if converged, otherwise the last iterate.
    pub p: DMatrix<f64>,
    /// Iterations used (Riccati steps, or squarings for the doubling method).
    pub iterations: usize,
    /// Frobenius norm of the fixed-point defect ||f(P) - P||.
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive definite matrix via its eigendecomposition,
/// rejecting singular or ill-conditioned inputs.
fn sym_pd_inverse(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let k = m.nrows();
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eig = symmetrize(m).symmetric_eigen();
    let max = eig.eigenvalues.amax();
    let min = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min <= 0.0 || min.is_nan() || max / min > INNER_CONDITION_LIMIT {
        return Err(Error::Numeric(format!(
            "{context}: matrix is singular or ill-conditioned \
             (min eigenvalue {min:.3e}, max {max:.3e})"
        )));
    }
    let inv_vals = DVector::from_iterator(k, eig.eigenvalues.iter().map(|&l| 1.0 / l));
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&inv_vals) * v.transpose())
}

fn check_riccati_dims(
    p_next: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || p_next.nrows() != n || p_next.ncols() != n || q.nrows() != n || q.ncols() != n
    {
        return Err(Error::Dimension(format!(
            "riccati step: A, P, Q must all be {n}x{n}"
        )));
    }
    if b.nrows() != n {
        return Err(Error::Dimension(format!(
            "riccati step: B must have {n} rows, got {}",
            b.nrows()
        )));
    }
    if r.nrows() != b.ncols() || r.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "riccati step: R must be {0}x{0} to match B's {0} columns",
            b.ncols()
        )));
    }
    Ok(n)
}

/// One backward step of the finite-horizon value recursion:
/// `Q + A'PA - A'PB (R + B'PB)^-1 B'PA`, symmetrized.
///
/// With zero input columns this degenerates to the Lyapunov step
/// `Q + A'PA`.
pub fn riccati_step(
    p_next: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_riccati_dims(p_next, a, b, q, r)?;
    let pa = p_next * a;
    let open_loop = q + a.transpose() * &pa;
    if b.ncols() == 0 {
        return Ok(symmetrize(&open_loop));
    }
    let btp = b.transpose() * p_next;
    let inner = r + &btp * b;
    let inner_inv = sym_pd_inverse(&inner, "riccati step inner matrix")?;
    let bpa = &btp * a;
    let closed = open_loop - bpa.transpose() * inner_inv * &bpa;
    Ok(symmetrize(&closed))
}

/// LQR feedback gain `-(R + B'PB)^-1 B'PA` for a given value matrix P.
pub fn lqr_gain(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_riccati_dims(p, a, b, &DMatrix::zeros(a.nrows(), a.ncols()), r)?;
    if b.ncols() == 0 {
        return Ok(DMatrix::zeros(0, a.nrows()));
    }
    let btp = b.transpose() * p;
    let inner = r + &btp * b;
    let inner_inv = sym_pd_inverse(&inner, "lqr gain inner matrix")?;
    Ok(-(inner_inv * btp * a))
}

/// Solves the DARE `P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA` by iterating the
/// value recursion from P = Q until the relative change drops below
/// `opts.tol`, the iterate norm exceeds `opts.divergence_threshold`, or the
/// iteration cap is reached. Non-convergence is returned, not raised.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &DareOptions,
) -> RiccatiSolution {
    match opts.method {
        DareMethod::ValueIteration => solve_dare_vi(a, b, q, r, opts),
        DareMethod::Doubling => solve_dare_doubling(a, b, q, r, opts),
    }
}

fn defect(p: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> f64 {
    match riccati_step(p, a, b, q, r) {
        Ok(next) => (next - p).norm(),
        Err(_) => f64::INFINITY,
    }
}

fn solve_dare_vi(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &DareOptions,
) -> RiccatiSolution {
    let mut p = opts.initial.clone().unwrap_or_else(|| q.clone());
    let mut last_change = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let next = match riccati_step(&p, a, b, q, r) {
            Ok(next) => next,
            Err(_) => {
                return RiccatiSolution {
                    p,
                    iterations: k,
                    residual: f64::INFINITY,
                    converged: false,
                }
            }
        };
        last_change = (&next - &p).norm();
        let scale = p.norm().max(1.0);
        p = next;
        if last_change <= opts.tol * scale {
            let residual = defect(&p, a, b, q, r);
            return RiccatiSolution {
                p,
                iterations: k,
                residual,
                converged: true,
            };
        }
        if p.norm() > opts.divergence_threshold {
            return RiccatiSolution {
                p,
                iterations: k,
                residual: last_change,
                converged: false,
            };
        }
    }
    RiccatiSolution {
        p,
        iterations: opts.max_iter,
        residual: last_change,
        converged: false,
    }
}

/// Doubling cap: each squaring doubles the equivalent value-iteration
/// horizon, so 64 squarings exhaust what f64 can resolve.
const DOUBLING_MAX_ITER: usize = 64;

fn solve_dare_doubling(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &DareOptions,
) -> RiccatiSolution {
    let n = a.nrows();
    let fail = |p: DMatrix<f64>, k: usize| RiccatiSolution {
        p,
        iterations: k,
        residual: f64::INFINITY,
        converged: false,
    };
    // G0 = B R^-1 B'
    let g0 = if b.ncols() == 0 {
        DMatrix::zeros(n, n)
    } else {
        match sym_pd_inverse(r, "dare input penalty") {
            Ok(r_inv) => b * r_inv * b.transpose(),
            Err(_) => return fail(q.clone(), 0),
        }
    };
    let mut ak = a.clone();
    let mut g = symmetrize(&g0);
    let mut h = q.clone();
    let eye = DMatrix::identity(n, n);
    for k in 1..=DOUBLING_MAX_ITER {
        let w = &eye + &g * &h;
        let lu = w.lu();
        let (x, y) = match (lu.solve(&ak), lu.solve(&g)) {
            (Some(x), Some(y)) => (x, y),
            _ => return fail(h, k),
        };
        let h_next = symmetrize(&(&h + ak.transpose() * (&h * &x)));
        let g_next = symmetrize(&(&g + &ak * (&y * ak.transpose())));
        let change = (&h_next - &h).norm();
        let scale = h.norm().max(1.0);
        ak = &ak * &x;
        g = g_next;
        h = h_next;
        if change <= opts.tol * scale {
            let residual = defect(&h, a, b, q, r);
            return RiccatiSolution {
                p: h,
                iterations: k,
                residual,
                converged: true,
            };
        }
        if h.norm() > opts.divergence_threshold {
            return RiccatiSolution {
                p: h,
                iterations: k,
                residual: change,
                converged: false,
            };
        }
    }
    let residual = defect(&h, a, b, q, r);
    RiccatiSolution {
        p: h,
        iterations: DOUBLING_MAX_ITER,
        residual,
        converged: false,
    }
}

/// Numerical rank of the controllability matrix `[B, AB, ..., A^{N-1}B]`
/// (singular values above 1e-9 of the largest count toward the rank).
pub fn controllability_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::Dimension(
            "controllability: A must be square and B must have matching rows".into(),
        ));
    }
    let k = b.ncols();
    if k == 0 {
        return Ok(0);
    }
    let mut kalman = DMatrix::zeros(n, n * k);
    let mut block = b.clone();
    for i in 0..n {
        kalman.view_mut((0, i * k), (n, k)).copy_from(&block);
        block = a * &block;
    }
    let svs = kalman.singular_values();
    let max = svs.amax();
    if max == 0.0 {
        return Ok(0);
    }
    Ok(svs.iter().filter(|&&s| s > 1e-9 * max).count())
}

/// Magnitude of the dominant eigenvalue, via the real Schur form.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension("spectral radius needs a square matrix".into()));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-12, 100_000).ok_or_else(|| {
        Error::Numeric(format!(
            "Schur iteration did not converge; power-iteration estimate {:.6e}",
            power_iteration_estimate(a)
        ))
    })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max))
}

fn power_iteration_estimate(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..500 {
        let av = a * &v;
        let norm = av.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = norm;
        v = av / norm;
    }
    estimate
}

/// Lower-triangular L with `L L' = W` for symmetric positive semidefinite W.
///
/// Pivots in `[-1e-12, 1e-12]` (relative to the diagonal scale) are treated
/// as exact zeros, so genuinely semidefinite inputs (including W = 0)
/// factor cleanly. A pivot below the tolerance is an error naming the
/// offending index.
pub fn cholesky_psd(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::Dimension("cholesky: matrix must be square".into()));
    }
    let scale = (0..n).map(|i| w[(i, i)].abs()).fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = w[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -tol {
            return Err(Error::Numeric(format!(
                "matrix is not positive semidefinite: pivot {j} is {d:.3e}"
            )));
        }
        if d <= tol {
            // semidefinite direction: zero column
            continue;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..n {
            let mut v = w[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / root;
        }
    }
    Ok(l)
}

/// Smallest eigenvalue of a symmetric matrix; used by tests and the
/// dominance-pruning pass.
pub(crate) fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}
