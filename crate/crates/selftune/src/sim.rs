//! Seeded closed-loop rollouts of architecture-policies on switched linear
//! scenarios, and multi-policy/multi-seed comparison summaries.
//!
//! Reproducibility: every stochastic draw comes from a ChaCha8 stream
//! seeded with the rollout seed (the initial state first, then one
//! standard-normal state-dimension block per step, pushed through the
//! Cholesky factor of the active mode's noise covariance). The stream is
//! consumed identically regardless of the policy, so policies compared
//! under the same seed see the same disturbance realization.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::Arc;

use crate::dp::PiecewiseQuadratic;
use crate::error::{Error, Result};
use crate::greedy::GreedySelector;
use crate::linalg::{cholesky_psd, lqr_gain, solve_dare, DareOptions};
use crate::model::{build_input_matrix, ActuatorSubset, InitialState, Scenario};
use crate::sysid::{detect_mode, fit_dynamics, History};

/// State-norm guard: a rollout whose state exceeds this is truncated with
/// the divergence flag set and its cost marked +inf.
pub const OVERFLOW_GUARD: f64 = 1e30;

/// An architecture-policy to roll out.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum PolicyKind {
    /// LQR with a fixed actuator subset. The gain is solved against the
    /// scenario's first mode; if that DARE diverges (unstabilizable fixed
    /// architecture) the last Riccati iterate before the divergence guard
    /// is used so the policy still produces inputs.
    FixedArchitectureLqr {
        subset: ActuatorSubset,
        dare: DareOptions,
    },
    /// Greedy subset selection against the true scheduled mode.
    GreedyKnownModel { period: usize, dare: DareOptions },
    /// Greedy subset selection against a least-squares estimate refit from
    /// the full history each selection step.
    GreedySelfTuning {
        period: usize,
        ridge: f64,
        dare: DareOptions,
    },
    /// Greedy subset selection against the mode minimizing recent one-step
    /// prediction residuals.
    ModeAwareGreedy {
        period: usize,
        window: usize,
        dare: DareOptions,
    },
    /// Follows precomputed exact-DP value tables (single-mode scenarios).
    ExactDp {
        tables: Arc<Vec<PiecewiseQuadratic>>,
    },
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PolicyKind::FixedArchitectureLqr { subset, .. } => write!(f, "fixed[{subset}]"),
            PolicyKind::GreedyKnownModel { .. } => write!(f, "greedy-known"),
            PolicyKind::GreedySelfTuning { .. } => write!(f, "greedy-selftuning"),
            PolicyKind::ModeAwareGreedy { .. } => write!(f, "mode-aware-greedy"),
            PolicyKind::ExactDp { .. } => write!(f, "exact-dp"),
        }
    }
}

/// Per-step record of a rollout.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    pub mode: String,
    pub x: DVector<f64>,
    pub subset: ActuatorSubset,
    pub input: DVector<f64>,
    pub stage_cost: f64,
}

/// Full closed-loop trajectory with cost accounting.
#[derive(Debug, Clone)]
pub struct RolloutTrace {
    pub steps: Vec<StepRecord>,
    pub terminal_cost: f64,
    /// Sum of stage costs plus terminal cost; +inf when the rollout was
    /// truncated by the overflow guard.
    pub total_cost: f64,
    pub diverged: bool,
    pub max_state_norm: f64,
    pub final_state: DVector<f64>,
}

impl RolloutTrace {
    /// CSV with header `t,mode,subset,stage_cost,norm_x`; `include_state`
    /// appends the full state columns.
    pub fn write_csv<W: std::io::Write>(&self, include_state: bool, out: &mut W) -> Result<()> {
        let n = self.final_state.len();
        let mut header = "t,mode,subset,stage_cost,norm_x".to_string();
        if include_state {
            for i in 1..=n {
                header.push_str(&format!(",x{i}"));
            }
        }
        writeln!(out, "{header}")?;
        for step in &self.steps {
            let mut row = format!(
                "{},{},{},{},{}",
                step.t,
                step.mode,
                step.subset,
                step.stage_cost,
                step.x.norm()
            );
            if include_state {
                for v in step.x.iter() {
                    row.push_str(&format!(",{v}"));
                }
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// Per-policy driver state built once per rollout.
#[allow(clippy::large_enum_variant)]
enum Driver {
    Fixed {
        subset: ActuatorSubset,
        b: DMatrix<f64>,
        gain: DMatrix<f64>,
    },
    Greedy {
        selector: GreedySelector,
        flavor: GreedyFlavor,
        period: usize,
        current: Option<(ActuatorSubset, DMatrix<f64>, DMatrix<f64>)>, // subset, B, gain
    },
    ExactDp {
        tables: Arc<Vec<PiecewiseQuadratic>>,
    },
}

enum GreedyFlavor {
    KnownModel,
    SelfTuning { ridge: f64 },
    ModeAware { window: usize },
}

fn build_driver(scenario: &Scenario, policy: &PolicyKind) -> Result<Driver> {
    let q = scenario.cost.q.clone();
    match policy {
        PolicyKind::FixedArchitectureLqr { subset, dare } => {
            if subset.len() != scenario.budget {
                return Err(Error::InvalidArgument(format!(
                    "fixed subset {subset} has cardinality {}, scenario budget is {}",
                    subset.len(),
                    scenario.budget
                )));
            }
            let b = build_input_matrix(&scenario.library, subset)?;
            let nominal = &scenario.modes[0];
            let r = scenario.cost.r_for(subset.len());
            let sol = solve_dare(&nominal.a, &b, &q, &r, dare);
            // diverged solve: keep the truncated iterate so the loop closes
            let gain = lqr_gain(&sol.p, &nominal.a, &b, &r)?;
            Ok(Driver::Fixed {
                subset: subset.clone(),
                b,
                gain,
            })
        }
        PolicyKind::GreedyKnownModel { period, dare } => Ok(Driver::Greedy {
            selector: GreedySelector::new(
                scenario.library.clone(),
                scenario.budget,
                q,
                scenario.cost.r_unit,
                dare.clone(),
            )?,
            flavor: GreedyFlavor::KnownModel,
            period: (*period).max(1),
            current: None,
        }),
        PolicyKind::GreedySelfTuning {
            period,
            ridge,
            dare,
        } => Ok(Driver::Greedy {
            selector: GreedySelector::new(
                scenario.library.clone(),
                scenario.budget,
                q,
                scenario.cost.r_unit,
                dare.clone(),
            )?,
            flavor: GreedyFlavor::SelfTuning { ridge: *ridge },
            period: (*period).max(1),
            current: None,
        }),
        PolicyKind::ModeAwareGreedy {
            period,
            window,
            dare,
        } => Ok(Driver::Greedy {
            selector: GreedySelector::new(
                scenario.library.clone(),
                scenario.budget,
                q,
                scenario.cost.r_unit,
                dare.clone(),
            )?,
            flavor: GreedyFlavor::ModeAware { window: *window },
            period: (*period).max(1),
            current: None,
        }),
        PolicyKind::ExactDp { tables } => {
            if tables.len() != scenario.horizon + 1 {
                return Err(Error::InvalidArgument(format!(
                    "exact-DP tables cover horizon {}, scenario horizon is {}",
                    tables.len().saturating_sub(1),
                    scenario.horizon
                )));
            }
            Ok(Driver::ExactDp {
                tables: Arc::clone(tables),
            })
        }
    }
}

impl Driver {
    /// Decide (subset, B, input) at step `t` from the information available
    /// to the policy.
    fn decide(
        &mut self,
        scenario: &Scenario,
        t: usize,
        x: &DVector<f64>,
        history: &History,
    ) -> Result<(ActuatorSubset, DMatrix<f64>, DVector<f64>)> {
        match self {
            Driver::Fixed { subset, b, gain } => {
                let u = &*gain * x;
                Ok((subset.clone(), b.clone(), u))
            }
            Driver::Greedy {
                selector,
                flavor,
                period,
                current,
            } => {
                if current.is_none() || t.is_multiple_of(*period) {
                    let a_hat = match flavor {
                        GreedyFlavor::KnownModel => scenario.mode_at(t).a.clone(),
                        GreedyFlavor::SelfTuning { ridge } => {
                            if history.transitions() == 0 {
                                DMatrix::zeros(scenario.dim(), scenario.dim())
                            } else {
                                fit_dynamics(history, *ridge)?.a_hat
                            }
                        }
                        GreedyFlavor::ModeAware { window } => {
                            if history.transitions() == 0 {
                                scenario.modes[0].a.clone()
                            } else {
                                detect_mode(history, &scenario.modes, *window)?.a.clone()
                            }
                        }
                    };
                    let state = selector.select(&a_hat, x)?;
                    let b = build_input_matrix(&scenario.library, &state.subset)?;
                    *current = Some((state.subset, b, state.gain));
                }
                let (subset, b, gain) = current.as_ref().expect("selection just ran");
                Ok((subset.clone(), b.clone(), gain * x))
            }
            Driver::ExactDp { tables } => {
                let (_, idx) = tables[t].evaluate(x)?;
                let piece = &tables[t].pieces[idx];
                let subset = piece
                    .seq
                    .first()
                    .ok_or_else(|| {
                        Error::InvalidArgument("terminal table reached during rollout".into())
                    })?
                    .clone();
                let tail = piece.tail.expect("non-terminal piece has a continuation");
                let p_next = &tables[t + 1].pieces[tail].p;
                let b = build_input_matrix(&scenario.library, &subset)?;
                let r = scenario.cost.r_for(subset.len());
                let gain = lqr_gain(p_next, &scenario.mode_at(t).a, &b, &r)?;
                Ok((subset, b, gain * x))
            }
        }
    }
}

/// Simulates the closed loop for `scenario.horizon` steps under `policy`.
pub fn rollout(scenario: &Scenario, policy: &PolicyKind, seed: u64) -> Result<RolloutTrace> {
    scenario.validate()?;
    let n = scenario.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
    };

    let mut x = match &scenario.initial {
        InitialState::Fixed(x0) => x0.clone(),
        InitialState::Gaussian { mean, covariance } => {
            let l = cholesky_psd(covariance)?;
            mean + l * normal(&mut rng)
        }
    };

    // per-mode noise Cholesky factors
    let mut noise_factors: HashMap<&str, DMatrix<f64>> = HashMap::new();
    for mode in &scenario.modes {
        noise_factors.insert(mode.label.as_str(), cholesky_psd(&mode.w)?);
    }

    let mut driver = build_driver(scenario, policy)?;
    let mut history = History::new(x.clone());
    let mut steps = Vec::with_capacity(scenario.horizon);
    let mut total = 0.0;
    let mut max_norm = x.norm();
    let mut diverged = false;

    for t in 0..scenario.horizon {
        let mode = scenario.mode_at(t);
        let (subset, b, u) = driver.decide(scenario, t, &x, &history)?;
        let r = scenario.cost.r_for(u.len());
        let stage =
            (x.transpose() * &scenario.cost.q * &x)[(0, 0)] + (u.transpose() * r * &u)[(0, 0)];
        total += stage;

        let noise = &noise_factors[mode.label.as_str()] * normal(&mut rng);
        let x_next = &mode.a * &x + &b * &u + noise;

        steps.push(StepRecord {
            t,
            mode: mode.label.clone(),
            x: x.clone(),
            subset,
            input: u.clone(),
            stage_cost: stage,
        });
        history.record(u, b, x_next.clone())?;
        max_norm = max_norm.max(x_next.norm());
        x = x_next;
        if x.norm() > OVERFLOW_GUARD {
            diverged = true;
            break;
        }
    }

    let terminal_cost = if diverged {
        f64::INFINITY
    } else {
        (x.transpose() * &scenario.cost.q_terminal * &x)[(0, 0)]
    };
    let total_cost = if diverged {
        f64::INFINITY
    } else {
        total + terminal_cost
    };
    Ok(RolloutTrace {
        steps,
        terminal_cost,
        total_cost,
        diverged,
        max_state_norm: max_norm,
        final_state: x,
    })
}

/// One (policy, seed) outcome inside a [`CompareSummary`].
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub policy: String,
    pub seed: u64,
    /// +inf serializes as JSON null; `diverged` carries the flag.
    pub total_cost: f64,
    pub diverged: bool,
    pub max_state_norm: f64,
}

/// Per-policy aggregate over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyAggregate {
    pub policy: String,
    pub median_cost: f64,
    /// Median over seeds of cost(first policy) / cost(this policy); 1.0 for
    /// the first policy itself. A diverged first policy against a finite
    /// one gives +inf.
    pub median_ratio_vs_first: f64,
    pub divergent_runs: usize,
}

/// Comparison table: one rollout per (policy, seed) pair.
#[derive(Debug, Clone, Serialize)]
pub struct CompareSummary {
    pub rows: Vec<CompareRow>,
    pub aggregates: Vec<PolicyAggregate>,
}

/// Median of a possibly infinite-valued sample (mean of the middle pair for
/// even lengths; NaN-free inputs assumed).
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let mid = sorted.len() / 2;
    let odd = sorted.len() % 2 == 1;
    if odd || (sorted[mid - 1].is_infinite() && sorted[mid].is_infinite()) {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

fn cost_ratio(reference: f64, cost: f64) -> f64 {
    if reference.is_infinite() && cost.is_infinite() {
        1.0 // equally divergent
    } else if cost == 0.0 {
        if reference == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        reference / cost
    }
}

/// Rolls out every policy under every seed (in parallel) and aggregates
/// per-policy medians and cost ratios against the first policy.
pub fn compare(
    scenario: &Scenario,
    policies: &[PolicyKind],
    seeds: &[u64],
) -> Result<CompareSummary> {
    if policies.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "compare needs at least one policy and one seed".into(),
        ));
    }
    let jobs: Vec<(usize, u64)> = (0..policies.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let rows: Vec<CompareRow> = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let trace = rollout(scenario, &policies[p], seed)?;
            Ok(CompareRow {
                policy: policies[p].to_string(),
                seed,
                total_cost: trace.total_cost,
                diverged: trace.diverged,
                max_state_norm: trace.max_state_norm,
            })
        })
        .collect::<Result<_>>()?;

    let per_policy = |p: usize| -> Vec<&CompareRow> {
        rows[p * seeds.len()..(p + 1) * seeds.len()].iter().collect()
    };
    let first_costs: Vec<f64> = per_policy(0).iter().map(|r| r.total_cost).collect();
    let aggregates = (0..policies.len())
        .map(|p| {
            let rows_p = per_policy(p);
            let costs: Vec<f64> = rows_p.iter().map(|r| r.total_cost).collect();
            let ratios: Vec<f64> = first_costs
                .iter()
                .zip(costs.iter())
                .map(|(&f, &c)| cost_ratio(f, c))
                .collect();
            PolicyAggregate {
                policy: policies[p].to_string(),
                median_cost: median(&costs),
                median_ratio_vs_first: median(&ratios),
                divergent_runs: rows_p.iter().filter(|r| r.diverged).count(),
            }
        })
        .collect();
    Ok(CompareSummary { rows, aggregates })
}
