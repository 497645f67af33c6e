//! Greedy actuator-subset selection: grows a cardinality-K subset one
//! column at a time, scoring each candidate by the infinite-horizon
//! quadratic cost x' P x at the current state, where P solves the DARE for
//! the augmented input matrix. Candidates whose DARE diverges (an
//! unstabilizable augmented pair) score +inf and are skipped; only a round
//! in which every candidate diverges is an error.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{lqr_gain, solve_dare, DareOptions};
use crate::model::{build_input_matrix, ActuatorLibrary, ActuatorSubset};

/// Score of one candidate actuator within a greedy round.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateScore {
    /// 1-based library index of the candidate.
    pub actuator: usize,
    /// x' P x for the augmented subset; `None` when the DARE diverged.
    pub score: Option<f64>,
    pub converged: bool,
}

/// Result of one greedy selection: identified dynamics, chosen subset, its
/// DARE solution and feedback gain, plus per-round candidate diagnostics.
#[derive(Debug, Clone)]
pub struct GreedyPolicyState {
    pub a_hat: DMatrix<f64>,
    pub subset: ActuatorSubset,
    /// DARE solution for the selected subset (columns in canonical order).
    pub p: DMatrix<f64>,
    /// Feedback gain K x N; the input is `gain * x`, applied through the
    /// canonical input matrix of `subset`.
    pub gain: DMatrix<f64>,
    /// Candidate scores for each of the K rounds.
    pub rounds: Vec<Vec<CandidateScore>>,
}

/// Reusable greedy selector.
///
/// Caches DARE solutions per subset: repeated selections against the same
/// dynamics estimate (the common case when the model is known or has
/// converged) skip the solves entirely. The cache is invalidated whenever
/// the dynamics estimate changes.
pub struct GreedySelector {
    library: ActuatorLibrary,
    budget: usize,
    q: DMatrix<f64>,
    r_unit: f64,
    opts: DareOptions,
    cache: HashMap<Vec<usize>, Option<DMatrix<f64>>>,
    cached_a: Option<DMatrix<f64>>,
}

impl GreedySelector {
    pub fn new(
        library: ActuatorLibrary,
        budget: usize,
        q: DMatrix<f64>,
        r_unit: f64,
        opts: DareOptions,
    ) -> Result<Self> {
        if budget == 0 || budget > library.len() {
            return Err(Error::InvalidArgument(format!(
                "budget must be in 1..={}, got {budget}",
                library.len()
            )));
        }
        if q.nrows() != library.dim() || q.ncols() != library.dim() {
            return Err(Error::Dimension(
                "state cost dimension must match the actuator library".into(),
            ));
        }
        if r_unit <= 0.0 || r_unit.is_nan() {
            return Err(Error::InvalidArgument("r_unit must be positive".into()));
        }
        Ok(Self {
            library,
            budget,
            q,
            r_unit,
            opts,
            cache: HashMap::new(),
            cached_a: None,
        })
    }

    fn dare_for(&self, a_hat: &DMatrix<f64>, key: &[usize]) -> Result<Option<DMatrix<f64>>> {
        let subset = ActuatorSubset::new(key.to_vec())?;
        let b = build_input_matrix(&self.library, &subset)?;
        let r = DMatrix::identity(key.len(), key.len()) * self.r_unit;
        let sol = solve_dare(a_hat, &b, &self.q, &r, &self.opts);
        Ok(sol.converged.then_some(sol.p))
    }

    /// Runs the K greedy rounds at state `x` under dynamics estimate `a_hat`.
    pub fn select(&mut self, a_hat: &DMatrix<f64>, x: &DVector<f64>) -> Result<GreedyPolicyState> {
        let n = self.library.dim();
        if a_hat.nrows() != n || a_hat.ncols() != n {
            return Err(Error::Dimension(format!(
                "dynamics estimate must be {n}x{n}"
            )));
        }
        if x.len() != n {
            return Err(Error::Dimension(format!(
                "state has dimension {}, expected {n}",
                x.len()
            )));
        }
        if self.cached_a.as_ref() != Some(a_hat) {
            self.cache.clear();
            self.cached_a = Some(a_hat.clone());
        }

        let m = self.library.len();
        let mut selected: Vec<usize> = Vec::with_capacity(self.budget);
        let mut rounds = Vec::with_capacity(self.budget);
        for round in 0..self.budget {
            let candidates: Vec<usize> =
                (1..=m).filter(|i| !selected.contains(i)).collect();
            // solve the missing DAREs for this round in parallel
            let missing: Vec<Vec<usize>> = candidates
                .iter()
                .map(|&s| {
                    let mut key = selected.clone();
                    key.push(s);
                    key.sort_unstable();
                    key
                })
                .filter(|key| !self.cache.contains_key(key))
                .collect();
            let solved: Vec<(Vec<usize>, Option<DMatrix<f64>>)> = missing
                .par_iter()
                .map(|key| Ok((key.clone(), self.dare_for(a_hat, key)?)))
                .collect::<Result<_>>()?;
            for (key, p) in solved {
                self.cache.insert(key, p);
            }

            let mut scores = Vec::with_capacity(candidates.len());
            let mut best: Option<(usize, f64)> = None;
            for &s in &candidates {
                let mut key = selected.clone();
                key.push(s);
                key.sort_unstable();
                let entry = self.cache.get(&key).expect("solved above");
                let score = entry.as_ref().map(|p| (x.transpose() * p * x)[(0, 0)]);
                scores.push(CandidateScore {
                    actuator: s,
                    score,
                    converged: entry.is_some(),
                });
                if let Some(v) = score {
                    // strict < keeps the lowest library index on ties
                    if best.is_none_or(|(_, bv)| v < bv) {
                        best = Some((s, v));
                    }
                }
            }
            let Some((winner, _)) = best else {
                let detail: Vec<String> = scores
                    .iter()
                    .map(|c| format!("actuator {}: diverged", c.actuator))
                    .collect();
                return Err(Error::Unstabilizable(format!(
                    "greedy round {}: no candidate extends subset {:?} to a stabilizable \
                     architecture [{}]",
                    round + 1,
                    selected,
                    detail.join(", ")
                )));
            };
            selected.push(winner);
            rounds.push(scores);
        }

        let subset = ActuatorSubset::new(selected)?;
        let key = subset.indices().to_vec();
        let p = self
            .cache
            .get(&key)
            .and_then(|p| p.clone())
            .expect("winning subset converged in its round");
        let b = build_input_matrix(&self.library, &subset)?;
        let r = DMatrix::identity(subset.len(), subset.len()) * self.r_unit;
        let gain = lqr_gain(&p, a_hat, &b, &r)?;
        Ok(GreedyPolicyState {
            a_hat: a_hat.clone(),
            subset,
            p,
            gain,
            rounds,
        })
    }
}

/// One-shot greedy selection (no cache reuse across calls).
pub fn greedy_select(
    x: &DVector<f64>,
    a_hat: &DMatrix<f64>,
    library: &ActuatorLibrary,
    budget: usize,
    q: &DMatrix<f64>,
    r_unit: f64,
    opts: &DareOptions,
) -> Result<GreedyPolicyState> {
    GreedySelector::new(library.clone(), budget, q.clone(), r_unit, opts.clone())?
        .select(a_hat, x)
}

/// Feedback input for the selected architecture: `u = gain * x`.
pub fn greedy_input(state: &GreedyPolicyState, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != state.gain.ncols() {
        return Err(Error::Dimension(format!(
            "state has dimension {}, gain expects {}",
            x.len(),
            state.gain.ncols()
        )));
    }
    Ok(&state.gain * x)
}
