//! Core value types: dynamics modes, actuator libraries and subsets, cost
//! specifications, and full experiment scenarios.
//!
//! All types are plain immutable data once constructed and are safe to share
//! across threads.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// One linear dynamics hypothesis: a state matrix together with the
/// covariance of the additive process noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsMode {
    /// Identifier used by switching schedules and mode detection.
    pub label: String,
    /// State transition matrix, N x N.
    pub a: DMatrix<f64>,
    /// Process-noise covariance, N x N symmetric positive semidefinite.
    pub w: DMatrix<f64>,
}

impl DynamicsMode {
    pub fn new(label: impl Into<String>, a: DMatrix<f64>, w: DMatrix<f64>) -> Result<Self> {
        let mode = Self {
            label: label.into(),
            a,
            w,
        };
        mode.validate()?;
        Ok(mode)
    }

    /// State dimension N.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.nrows() != self.a.ncols() {
            return Err(Error::Dimension(format!(
                "mode '{}': state matrix must be square, got {}x{}",
                self.label,
                self.a.nrows(),
                self.a.ncols()
            )));
        }
        if self.w.nrows() != self.a.nrows() || self.w.ncols() != self.a.ncols() {
            return Err(Error::Dimension(format!(
                "mode '{}': noise covariance must be {0}x{0}, got {1}x{2}",
                self.label,
                self.w.nrows(),
                self.w.ncols()
            )));
        }
        let scale = self.w.amax().max(1.0);
        for i in 0..self.w.nrows() {
            for j in 0..i {
                if (self.w[(i, j)] - self.w[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "mode '{}': noise covariance is not symmetric at ({i},{j})",
                        self.label
                    )));
                }
            }
        }
        // PSD check: the pivoted Cholesky rejects any pivot below -1e-12.
        linalg::cholesky_psd(&self.w).map_err(|e| {
            Error::InvalidArgument(format!(
                "mode '{}': noise covariance is not positive semidefinite ({e})",
                self.label
            ))
        })?;
        Ok(())
    }
}

/// The ordered set of candidate actuator columns b_1, ..., b_M.
///
/// Actuators are referred to by 1-based index throughout (subset `{1, 2}`
/// activates the first two library columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorLibrary {
    columns: Vec<DVector<f64>>,
}

impl ActuatorLibrary {
    pub fn new(columns: Vec<DVector<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument(
                "actuator library must contain at least one column".into(),
            ));
        }
        let n = columns[0].len();
        if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(Error::Dimension(format!(
                "actuator column {} has dimension {}, expected {}",
                i + 1,
                c.len(),
                n
            )));
        }
        Ok(Self { columns })
    }

    /// Library with the first `m` standard basis vectors of R^n.
    pub fn standard_basis(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::InvalidArgument(format!(
                "standard basis library needs 1 <= m <= n, got m={m}, n={n}"
            )));
        }
        let columns = (0..m)
            .map(|i| DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 }))
            .collect();
        Ok(Self { columns })
    }

    /// Number of candidate actuators M.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// State dimension N.
    pub fn dim(&self) -> usize {
        self.columns[0].len()
    }

    /// Column for 1-based actuator index.
    pub fn column(&self, index: usize) -> Result<&DVector<f64>> {
        if index == 0 || index > self.columns.len() {
            return Err(Error::InvalidArgument(format!(
                "actuator index {index} out of range 1..={}",
                self.columns.len()
            )));
        }
        Ok(&self.columns[index - 1])
    }

    pub fn columns(&self) -> &[DVector<f64>] {
        &self.columns
    }
}

/// A canonical (sorted, duplicate-free) set of 1-based actuator indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ActuatorSubset {
    indices: Vec<usize>,
}

impl ActuatorSubset {
    /// Builds the canonical form of `indices`; the input may be in any order.
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::InvalidArgument(
                "actuator indices are 1-based; 0 is not a valid index".into(),
            ));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate actuator index in subset {indices:?}"
            )));
        }
        Ok(Self { indices })
    }

    /// The empty subset (no actuation).
    pub fn empty() -> Self {
        Self {
            indices: Vec::new(),
        }
    }

    /// The full subset {1, ..., m}.
    pub fn full(m: usize) -> Self {
        Self {
            indices: (1..=m).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

impl std::fmt::Display for ActuatorSubset {
    /// Renders as `1+3` (or `-` for the empty subset); used as the CSV label.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.indices.is_empty() {
            return write!(f, "-");
        }
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join("+"))
    }
}

impl TryFrom<Vec<usize>> for ActuatorSubset {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ActuatorSubset> for Vec<usize> {
    fn from(s: ActuatorSubset) -> Self {
        s.indices
    }
}

/// Quadratic stage and terminal cost data.
///
/// The input penalty for a subset of size K is `r_unit * I_K`, so input
/// costs are comparable across subsets of equal cardinality.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    /// State cost, N x N symmetric PSD.
    pub q: DMatrix<f64>,
    /// Per-actuator input cost; the K x K input penalty is `r_unit * I`.
    pub r_unit: f64,
    /// Terminal state cost, N x N symmetric PSD.
    pub q_terminal: DMatrix<f64>,
}

impl CostSpec {
    pub fn new(q: DMatrix<f64>, r_unit: f64, q_terminal: DMatrix<f64>) -> Result<Self> {
        let spec = Self {
            q,
            r_unit,
            q_terminal,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Identity state and terminal costs with unit input cost.
    pub fn identity(n: usize) -> Self {
        Self {
            q: DMatrix::identity(n, n),
            r_unit: 1.0,
            q_terminal: DMatrix::identity(n, n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, m) in [("Q", &self.q), ("Q_terminal", &self.q_terminal)] {
            if m.nrows() != m.ncols() {
                return Err(Error::Dimension(format!("{name} must be square")));
            }
            linalg::cholesky_psd(m).map_err(|e| {
                Error::InvalidArgument(format!("{name} is not symmetric PSD ({e})"))
            })?;
        }
        if self.q.nrows() != self.q_terminal.nrows() {
            return Err(Error::Dimension(
                "Q and Q_terminal must have the same dimension".into(),
            ));
        }
        if self.r_unit <= 0.0 || self.r_unit.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "r_unit must be positive, got {}",
                self.r_unit
            )));
        }
        Ok(())
    }

    /// Input penalty matrix for a subset of cardinality `k`.
    pub fn r_for(&self, k: usize) -> DMatrix<f64> {
        DMatrix::identity(k, k) * self.r_unit
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }
}

/// Deterministic map from time step to the active mode label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum SwitchSchedule {
    /// One mode for the whole horizon.
    Constant { label: String },
    /// Cycles through `order`, holding each entry for `dwell` steps.
    Periodic { dwell: usize, order: Vec<String> },
    /// One label per step; the last label extends past the end of the list.
    Explicit { labels: Vec<String> },
}

impl SwitchSchedule {
    pub fn label_at(&self, t: usize) -> &str {
        match self {
            SwitchSchedule::Constant { label } => label,
            SwitchSchedule::Periodic { dwell, order } => {
                let phase = (t / (*dwell).max(1)) % order.len();
                &order[phase]
            }
            SwitchSchedule::Explicit { labels } => {
                let idx = t.min(labels.len() - 1);
                &labels[idx]
            }
        }
    }

    fn labels(&self) -> Vec<&str> {
        match self {
            SwitchSchedule::Constant { label } => vec![label.as_str()],
            SwitchSchedule::Periodic { order, .. } => order.iter().map(|s| s.as_str()).collect(),
            SwitchSchedule::Explicit { labels } => labels.iter().map(|s| s.as_str()).collect(),
        }
    }

    fn validate(&self, horizon: usize) -> Result<()> {
        match self {
            SwitchSchedule::Constant { .. } => Ok(()),
            SwitchSchedule::Periodic { dwell, order } => {
                if *dwell == 0 {
                    return Err(Error::InvalidArgument("dwell must be at least 1".into()));
                }
                if order.is_empty() {
                    return Err(Error::InvalidArgument(
                        "periodic schedule needs at least one mode label".into(),
                    ));
                }
                Ok(())
            }
            SwitchSchedule::Explicit { labels } => {
                if labels.is_empty() {
                    return Err(Error::InvalidArgument(
                        "explicit schedule needs at least one label".into(),
                    ));
                }
                if labels.len() < horizon {
                    return Err(Error::InvalidArgument(format!(
                        "explicit schedule has {} labels but the horizon is {horizon}",
                        labels.len()
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Initial-state specification for rollouts.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Fixed(DVector<f64>),
    Gaussian {
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
    },
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Fixed(x) => x.len(),
            InitialState::Gaussian { mean, .. } => mean.len(),
        }
    }
}

/// A complete closed-loop experiment description: modes and their switching
/// schedule, the actuator library and budget, costs, horizon, and the
/// initial-state distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub modes: Vec<DynamicsMode>,
    pub switching: SwitchSchedule,
    pub library: ActuatorLibrary,
    pub cost: CostSpec,
    /// Actuator budget K: exactly this many actuators are active per step.
    pub budget: usize,
    /// Number of decision stages; the terminal cost applies to x(horizon).
    pub horizon: usize,
    pub initial: InitialState,
    pub seed: u64,
}

impl Scenario {
    /// State dimension N.
    pub fn dim(&self) -> usize {
        self.library.dim()
    }

    /// Resolves the mode active at step `t`.
    pub fn mode_at(&self, t: usize) -> &DynamicsMode {
        let label = self.switching.label_at(t);
        self.modes
            .iter()
            .find(|m| m.label == label)
            .expect("validated schedule references a known mode")
    }

    pub fn mode_by_label(&self, label: &str) -> Option<&DynamicsMode> {
        self.modes.iter().find(|m| m.label == label)
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::InvalidArgument(
                "scenario needs at least one dynamics mode".into(),
            ));
        }
        let n = self.library.dim();
        for mode in &self.modes {
            mode.validate()?;
            if mode.dim() != n {
                return Err(Error::Dimension(format!(
                    "mode '{}' has dimension {} but the actuator library has dimension {n}",
                    mode.label,
                    mode.dim()
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for mode in &self.modes {
            if !seen.insert(mode.label.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate mode label '{}'",
                    mode.label
                )));
            }
        }
        self.cost.validate()?;
        if self.cost.dim() != n {
            return Err(Error::Dimension(format!(
                "cost matrices have dimension {} but the state dimension is {n}",
                self.cost.dim()
            )));
        }
        if self.budget > self.library.len() {
            return Err(Error::InvalidArgument(format!(
                "actuator budget {} exceeds library size {}",
                self.budget,
                self.library.len()
            )));
        }
        self.switching.validate(self.horizon)?;
        for label in self.switching.labels() {
            if self.mode_by_label(label).is_none() {
                return Err(Error::InvalidArgument(format!(
                    "switching schedule references unknown mode '{label}'"
                )));
            }
        }
        match &self.initial {
            InitialState::Fixed(x) => {
                if x.len() != n {
                    return Err(Error::Dimension(format!(
                        "initial state has dimension {}, expected {n}",
                        x.len()
                    )));
                }
            }
            InitialState::Gaussian { mean, covariance } => {
                if mean.len() != n || covariance.nrows() != n || covariance.ncols() != n {
                    return Err(Error::Dimension(
                        "initial-state mean/covariance dimensions must match the state".into(),
                    ));
                }
                linalg::cholesky_psd(covariance).map_err(|e| {
                    Error::InvalidArgument(format!("initial covariance is not PSD ({e})"))
                })?;
            }
        }
        Ok(())
    }
}

/// Stacks the selected library columns (ascending index order) into the
/// N x K input matrix.
pub fn build_input_matrix(
    library: &ActuatorLibrary,
    subset: &ActuatorSubset,
) -> Result<DMatrix<f64>> {
    let n = library.dim();
    let mut b = DMatrix::zeros(n, subset.len());
    for (j, &idx) in subset.indices().iter().enumerate() {
        b.set_column(j, library.column(idx)?);
    }
    Ok(b)
}

/// All cardinality-`k` subsets of `{1, ..., m}` in lexicographic order.
pub fn enumerate_subsets(m: usize, k: usize) -> Result<Vec<ActuatorSubset>> {
    if k > m {
        return Err(Error::InvalidArgument(format!(
            "subset cardinality {k} exceeds library size {m}"
        )));
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn recurse(
        start: usize,
        m: usize,
        k: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<ActuatorSubset>,
    ) {
        if current.len() == k {
            out.push(ActuatorSubset {
                indices: current.clone(),
            });
            return;
        }
        let remaining = k - current.len();
        for i in start..=(m + 1 - remaining) {
            current.push(i);
            recurse(i + 1, m, k, current, out);
            current.pop();
        }
    }
    recurse(1, m, k, &mut current, &mut out);
    Ok(out)
}

/// C(m, k) without overflow, saturating at `u128::MAX`.
pub(crate) fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((m - i) as u128) / (i as u128 + 1);
    }
    acc
}
