//! Shared test oracle: exact per-sequence finite-horizon LQR costs computed
//! by batch least squares over the stacked input vector, with no Riccati
//! recursion anywhere. For a fixed sequence of input matrices B_0..B_{T-1},
//! the optimal cost from x is x' M x with
//!   M = M0 - g' H^-1 g,
//!   H = Rbar + sum_t Gamma_t' Q_t Gamma_t,
//!   g = sum_t Gamma_t' Q_t Phi_t,
//!   M0 = sum_t Phi_t' Q_t Phi_t,
//! where x(t) = Phi_t x + Gamma_t u_stacked. Noise-free scenarios only.

use nalgebra::{DMatrix, DVector};
use selftune::model::{build_input_matrix, enumerate_subsets, ActuatorSubset, Scenario};

/// Exact optimal cost matrix for one input-matrix sequence.
pub fn sequence_cost_matrix(
    a: &DMatrix<f64>,
    bseq: &[DMatrix<f64>],
    q: &DMatrix<f64>,
    r_unit: f64,
    q_term: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = a.nrows();
    let horizon = bseq.len();
    let widths: Vec<usize> = bseq.iter().map(|b| b.ncols()).collect();
    let total: usize = widths.iter().sum();
    let offsets: Vec<usize> = widths
        .iter()
        .scan(0, |acc, w| {
            let o = *acc;
            *acc += w;
            Some(o)
        })
        .collect();

    // powers of A
    let mut phis = Vec::with_capacity(horizon + 1);
    phis.push(DMatrix::identity(n, n));
    for t in 0..horizon {
        let next = a * &phis[t];
        phis.push(next);
    }
    // Gamma_t: column block j holds A^{t-1-j} B_j for j < t
    let gammas: Vec<DMatrix<f64>> = (0..=horizon)
        .map(|t| {
            let mut g = DMatrix::zeros(n, total);
            for j in 0..t {
                let block = &phis[t - 1 - j] * &bseq[j];
                g.view_mut((0, offsets[j]), (n, widths[j])).copy_from(&block);
            }
            g
        })
        .collect();

    let mut h = DMatrix::identity(total, total) * r_unit;
    let mut g = DMatrix::zeros(total, n);
    let mut m0 = DMatrix::zeros(n, n);
    for t in 0..=horizon {
        let qt = if t == horizon { q_term } else { q };
        h += gammas[t].transpose() * qt * &gammas[t];
        g += gammas[t].transpose() * qt * &phis[t];
        m0 += phis[t].transpose() * qt * &phis[t];
    }
    let m = if total == 0 {
        m0
    } else {
        let chol = h.clone().cholesky().expect("H is positive definite");
        m0 - g.transpose() * chol.solve(&g)
    };
    (&m + m.transpose()) * 0.5
}

/// All cost matrices for subset sequences of length `horizon`, in the same
/// lexicographic order (first decision most significant) that the value
/// tables use for their pieces.
pub fn all_sequence_cost_matrices(
    scenario: &Scenario,
    horizon: usize,
) -> (Vec<Vec<ActuatorSubset>>, Vec<DMatrix<f64>>) {
    let subsets = enumerate_subsets(scenario.library.len(), scenario.budget).unwrap();
    let bs: Vec<DMatrix<f64>> = subsets
        .iter()
        .map(|s| build_input_matrix(&scenario.library, s).unwrap())
        .collect();
    let n_sub = subsets.len();
    let count = n_sub.pow(horizon as u32);
    let a = &scenario.modes[0].a;
    let mut seqs = Vec::with_capacity(count);
    let mut mats = Vec::with_capacity(count);
    for idx in 0..count {
        // odometer with the first decision as the most significant digit
        let mut digits = Vec::with_capacity(horizon);
        let mut rem = idx;
        for pos in 0..horizon {
            let base = n_sub.pow((horizon - 1 - pos) as u32);
            digits.push(rem / base);
            rem %= base;
        }
        let bseq: Vec<DMatrix<f64>> = digits.iter().map(|&d| bs[d].clone()).collect();
        mats.push(sequence_cost_matrix(
            a,
            &bseq,
            &scenario.cost.q,
            scenario.cost.r_unit,
            &scenario.cost.q_terminal,
        ));
        seqs.push(digits.iter().map(|&d| subsets[d].clone()).collect());
    }
    (seqs, mats)
}

/// Minimum cost over all sequences at `x`, with the index of the first
/// minimizer (same tie rule as the value tables).
pub fn oracle_min(mats: &[DMatrix<f64>], x: &DVector<f64>) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, m) in mats.iter().enumerate() {
        let v = (x.transpose() * m * x)[(0, 0)];
        if v < best.0 {
            best = (v, i);
        }
    }
    best
}
