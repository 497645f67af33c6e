//! JSON-facing mirror of [`Scenario`]: plain nested arrays in row-major
//! order for matrices, with validation at the conversion boundary.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ActuatorLibrary, CostSpec, DynamicsMode, InitialState, Scenario, SwitchSchedule,
};

pub const SCHEMA_VERSION: u32 = 1;

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::Config(format!("{what}: matrix has no rows")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{what}: ragged matrix rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeConfig {
    pub label: String,
    /// Row-major N x N state matrix.
    pub a: Vec<Vec<f64>>,
    /// Row-major N x N noise covariance.
    pub w: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostConfig {
    pub q: Vec<Vec<f64>>,
    pub r_unit: f64,
    pub q_terminal: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InitialStateConfig {
    Fixed { value: Vec<f64> },
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
}

/// Serializable scenario description; see the repository README for the
/// schema walk-through.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub modes: Vec<ModeConfig>,
    pub switching: SwitchSchedule,
    /// One entry per actuator: the N-dimensional input column.
    pub library: Vec<Vec<f64>>,
    pub cost: CostConfig,
    pub k: usize,
    pub horizon: usize,
    pub initial_state: InitialStateConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}

impl ScenarioConfig {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            version: SCHEMA_VERSION,
            modes: s
                .modes
                .iter()
                .map(|m| ModeConfig {
                    label: m.label.clone(),
                    a: matrix_to_rows(&m.a),
                    w: matrix_to_rows(&m.w),
                })
                .collect(),
            switching: s.switching.clone(),
            library: s
                .library
                .columns()
                .iter()
                .map(|c| c.iter().cloned().collect())
                .collect(),
            cost: CostConfig {
                q: matrix_to_rows(&s.cost.q),
                r_unit: s.cost.r_unit,
                q_terminal: matrix_to_rows(&s.cost.q_terminal),
            },
            k: s.budget,
            horizon: s.horizon,
            initial_state: match &s.initial {
                InitialState::Fixed(x) => InitialStateConfig::Fixed {
                    value: x.iter().cloned().collect(),
                },
                InitialState::Gaussian { mean, covariance } => InitialStateConfig::Gaussian {
                    mean: mean.iter().cloned().collect(),
                    covariance: matrix_to_rows(covariance),
                },
            },
            seed: s.seed,
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported scenario schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        let modes = self
            .modes
            .iter()
            .map(|m| {
                DynamicsMode::new(
                    m.label.clone(),
                    rows_to_matrix(&m.a, &format!("mode '{}' A", m.label))?,
                    rows_to_matrix(&m.w, &format!("mode '{}' W", m.label))?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let library = ActuatorLibrary::new(
            self.library
                .iter()
                .map(|c| DVector::from_column_slice(c))
                .collect(),
        )?;
        let cost = CostSpec::new(
            rows_to_matrix(&self.cost.q, "Q")?,
            self.cost.r_unit,
            rows_to_matrix(&self.cost.q_terminal, "Q_terminal")?,
        )?;
        let initial = match &self.initial_state {
            InitialStateConfig::Fixed { value } => {
                InitialState::Fixed(DVector::from_column_slice(value))
            }
            InitialStateConfig::Gaussian { mean, covariance } => InitialState::Gaussian {
                mean: DVector::from_column_slice(mean),
                covariance: rows_to_matrix(covariance, "initial covariance")?,
            },
        };
        let scenario = Scenario {
            modes,
            switching: self.switching.clone(),
            library,
            cost,
            budget: self.k,
            horizon: self.horizon,
            initial,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
