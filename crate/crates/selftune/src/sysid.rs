//! Least-squares identification of the state matrix from state-input
//! history, and residual-based mode detection over a finite hypothesis set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::DynamicsMode;

/// Recorded closed-loop data: states x(0..t), inputs u(0..t-1), and the
/// input matrix that was active at each step.
#[derive(Debug, Clone)]
pub struct History {
    states: Vec<DVector<f64>>,
    inputs: Vec<DVector<f64>>,
    input_matrices: Vec<DMatrix<f64>>,
}

impl History {
    pub fn new(x0: DVector<f64>) -> Self {
        Self {
            states: vec![x0],
            inputs: Vec::new(),
            input_matrices: Vec::new(),
        }
    }

    /// Appends one transition `x(t) --u, B--> x(t+1)`.
    pub fn record(
        &mut self,
        input: DVector<f64>,
        input_matrix: DMatrix<f64>,
        next_state: DVector<f64>,
    ) -> Result<()> {
        let n = self.dim();
        if next_state.len() != n {
            return Err(Error::Dimension(format!(
                "next state has dimension {}, expected {n}",
                next_state.len()
            )));
        }
        if input_matrix.nrows() != n || input_matrix.ncols() != input.len() {
            return Err(Error::Dimension(format!(
                "input matrix is {}x{} but the state is {n}-dimensional and the input has {} entries",
                input_matrix.nrows(),
                input_matrix.ncols(),
                input.len()
            )));
        }
        self.inputs.push(input);
        self.input_matrices.push(input_matrix);
        self.states.push(next_state);
        Ok(())
    }

    /// State dimension N.
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    /// Number of recorded transitions t.
    pub fn transitions(&self) -> usize {
        self.inputs.len()
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn input_matrices(&self) -> &[DMatrix<f64>] {
        &self.input_matrices
    }

    /// Squared prediction residual of `mode` on transition `tau`.
    fn residual_sq(&self, mode: &DynamicsMode, tau: usize) -> f64 {
        let predicted = &mode.a * &self.states[tau] + &self.input_matrices[tau] * &self.inputs[tau];
        (&self.states[tau + 1] - predicted).norm_squared()
    }

    /// One row per transition: `t, x(t)..., u(t)..., x(t+1)...`.
    ///
    /// Assumes a fixed input width, which holds for every policy in this
    /// crate (exactly K actuators are active each step).
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        let n = self.dim();
        let k = self.inputs.first().map_or(0, |u| u.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=k).map(|i| format!("u{i}")));
        header.extend((1..=n).map(|i| format!("xnext{i}")));
        writeln!(out, "{}", header.join(","))?;
        for tau in 0..self.transitions() {
            let mut row = vec![tau.to_string()];
            row.extend(self.states[tau].iter().map(|v| v.to_string()));
            row.extend(self.inputs[tau].iter().map(|v| v.to_string()));
            row.extend(self.states[tau + 1].iter().map(|v| v.to_string()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Output of [`fit_dynamics`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub a_hat: DMatrix<f64>,
    /// Numerical rank of the state regressor matrix.
    pub regressor_rank: usize,
    /// True when the regressors do not span the state space, i.e. the
    /// ridge term is what makes the solution unique.
    pub rank_deficient: bool,
}

/// Least-squares estimate of the state matrix: minimizes
/// `sum_tau ||x(tau+1) - A x(tau) - B_tau u(tau)||^2 + ridge ||A||_F^2`.
///
/// Solved row-wise through the shared normal equations
/// `(X X' + ridge I) a_i = X y_i`; rank-deficient regressors never error
/// (eigenvalues near zero are pseudo-inverted), they are only flagged.
pub fn fit_dynamics(history: &History, ridge: f64) -> Result<FitResult> {
    let t = history.transitions();
    if t == 0 {
        return Err(Error::InvalidArgument(
            "fit_dynamics needs at least one transition".into(),
        ));
    }
    if ridge < 0.0 {
        return Err(Error::InvalidArgument("ridge must be nonnegative".into()));
    }
    let n = history.dim();
    let mut x = DMatrix::zeros(n, t);
    let mut y = DMatrix::zeros(n, t);
    for tau in 0..t {
        x.set_column(tau, &history.states()[tau]);
        let driven = &history.input_matrices()[tau] * &history.inputs()[tau];
        y.set_column(tau, &(&history.states()[tau + 1] - driven));
    }

    let regressor_rank = {
        let svs = x.clone().singular_values();
        let max = svs.amax();
        if max == 0.0 {
            0
        } else {
            svs.iter().filter(|&&s| s > 1e-9 * max).count()
        }
    };

    let gram = &x * x.transpose() + DMatrix::identity(n, n) * ridge;
    let rhs = &x * y.transpose(); // G A' = X Y'
    let eig = gram.symmetric_eigen();
    let max_eig = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let cutoff = 1e-14 * max_eig;
    let inv_vals = DVector::from_iterator(
        n,
        eig.eigenvalues
            .iter()
            .map(|&l| if l > cutoff { 1.0 / l } else { 0.0 }),
    );
    let v = &eig.eigenvectors;
    let gram_pinv = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
    let a_hat = (gram_pinv * rhs).transpose();

    Ok(FitResult {
        a_hat,
        regressor_rank,
        rank_deficient: regressor_rank < n,
    })
}

/// Picks the mode whose one-step predictions best explain the last
/// `window` transitions (sum of squared residuals; ties go to the first
/// mode in the list). `window` is clamped to the available history.
pub fn detect_mode<'a>(
    history: &History,
    modes: &'a [DynamicsMode],
    window: usize,
) -> Result<&'a DynamicsMode> {
    if history.transitions() == 0 {
        return Err(Error::EmptyHistory);
    }
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    if modes.is_empty() {
        return Err(Error::InvalidArgument(
            "detect_mode needs at least one candidate mode".into(),
        ));
    }
    let n = history.dim();
    if let Some(m) = modes.iter().find(|m| m.dim() != n) {
        return Err(Error::Dimension(format!(
            "mode '{}' has dimension {}, history has {n}",
            m.label,
            m.dim()
        )));
    }
    let t = history.transitions();
    let start = t.saturating_sub(window);
    let mut best: Option<(&DynamicsMode, f64)> = None;
    for mode in modes {
        let score: f64 = (start..t).map(|tau| history.residual_sq(mode, tau)).sum();
        match best {
            Some((_, s)) if score >= s => {}
            _ => best = Some((mode, score)),
        }
    }
    Ok(best.expect("modes is nonempty").0)
}
