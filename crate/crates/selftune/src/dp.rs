//! Exact finite-horizon dynamic programming over joint actuator-subset and
//! input choices. Each cost-to-go is stored as the pointwise minimum of
//! quadratics, one per actuator-subset sequence: the table at time t holds
//! C(M,K)^(horizon - t) pieces when unpruned.
//!
//! Evaluation ties break to the lowest piece index, which by construction
//! is the lexicographically smallest subset sequence, so partitions of the
//! state space are reproducible.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, riccati_step};
use crate::model::{binomial, build_input_matrix, enumerate_subsets, ActuatorSubset, Scenario};

/// One quadratic cost-to-go candidate `x' P x + offset`, tagged with the
/// actuator-subset sequence that generated it.
#[derive(Debug, Clone)]
pub struct QuadraticPiece {
    pub p: DMatrix<f64>,
    /// Accumulated noise offset along the sequence (zero when W = 0).
    pub offset: f64,
    /// Subset choices from this time to the end of the horizon.
    pub seq: Vec<ActuatorSubset>,
    /// Index of the continuation piece in the next table (None at the
    /// terminal time). Survives pruning: indices refer to the pruned list.
    pub(crate) tail: Option<usize>,
}

impl QuadraticPiece {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.p * x)[(0, 0)] + self.offset
    }
}

/// Pointwise minimum of quadratic pieces: the cost-to-go at one time step.
#[derive(Debug, Clone)]
pub struct PiecewiseQuadratic {
    pub t: usize,
    pub pieces: Vec<QuadraticPiece>,
}

impl PiecewiseQuadratic {
    /// Minimum value over pieces and the index of the first minimizer.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<(f64, usize)> {
        if self.pieces.is_empty() {
            return Err(Error::InvalidArgument(
                "piecewise quadratic has no pieces".into(),
            ));
        }
        let n = self.pieces[0].p.nrows();
        if x.len() != n {
            return Err(Error::Dimension(format!(
                "state has dimension {}, expected {n}",
                x.len()
            )));
        }
        let mut best = (self.pieces[0].value(x), 0);
        for (i, piece) in self.pieces.iter().enumerate().skip(1) {
            let v = piece.value(x);
            if v < best.0 {
                best = (v, i);
            }
        }
        Ok(best)
    }

    /// Subset to activate now: the head of the minimizing piece's sequence.
    pub fn optimal_subset(&self, x: &DVector<f64>) -> Result<&ActuatorSubset> {
        let (_, idx) = self.evaluate(x)?;
        self.pieces[idx].seq.first().ok_or_else(|| {
            Error::InvalidArgument("terminal table has no actuator decision".into())
        })
    }
}

/// Options for [`backward_pieces`].
#[derive(Debug, Clone)]
pub struct DpOptions {
    /// Upper bound on the piece count of the time-0 table.
    pub piece_budget: usize,
    /// Drop pieces that are dominated (P_j <= P_i in the Loewner order and
    /// offset_j <= offset_i). Off by default: tables stay exact
    /// representations of every subset sequence.
    pub prune: bool,
}

impl Default for DpOptions {
    fn default() -> Self {
        Self {
            piece_budget: 1_000_000,
            prune: false,
        }
    }
}

/// Builds the cost-to-go tables for t = 0..=horizon by backward recursion.
///
/// Requires a single dynamics mode over the whole horizon. Each piece at
/// time t is one Riccati step of a continuation piece under one subset
/// choice, with the noise offset `trace(P_next W)` accumulated along the
/// sequence.
pub fn backward_pieces(scenario: &Scenario, opts: &DpOptions) -> Result<Vec<PiecewiseQuadratic>> {
    scenario.validate()?;
    let mode = scenario.mode_at(0);
    for t in 1..scenario.horizon {
        if scenario.mode_at(t).label != mode.label {
            return Err(Error::InvalidArgument(
                "exact DP requires a single dynamics mode over the horizon".into(),
            ));
        }
    }
    let m = scenario.library.len();
    let k = scenario.budget;
    let n_subsets = binomial(m, k);
    let worst_case = n_subsets
        .checked_pow(scenario.horizon as u32)
        .unwrap_or(u128::MAX);
    if worst_case > opts.piece_budget as u128 {
        return Err(Error::Capacity(format!(
            "time-0 table would hold {n_subsets}^{} pieces (budget {}); enable pruning, reduce \
             the horizon, or shrink the library",
            scenario.horizon, opts.piece_budget
        )));
    }

    let subsets = enumerate_subsets(m, k)?;
    let input_matrices: Vec<DMatrix<f64>> = subsets
        .iter()
        .map(|s| build_input_matrix(&scenario.library, s))
        .collect::<Result<_>>()?;
    let r = scenario.cost.r_for(k);
    let a = &mode.a;
    let w = &mode.w;
    let q = &scenario.cost.q;

    let mut tables = vec![PiecewiseQuadratic {
        t: scenario.horizon,
        pieces: vec![QuadraticPiece {
            p: scenario.cost.q_terminal.clone(),
            offset: 0.0,
            seq: Vec::new(),
            tail: None,
        }],
    }];

    for back in 0..scenario.horizon {
        let t = scenario.horizon - 1 - back;
        let next = &tables[back];
        let n_next = next.pieces.len();
        // lexicographic order: subset-major, continuation-minor
        let pieces: Vec<QuadraticPiece> = (0..subsets.len() * n_next)
            .into_par_iter()
            .map(|idx| {
                let si = idx / n_next;
                let pi = idx % n_next;
                let tail_piece = &next.pieces[pi];
                let p = riccati_step(&tail_piece.p, a, &input_matrices[si], q, &r)?;
                let offset = tail_piece.offset + (&tail_piece.p * w).trace();
                let mut seq = Vec::with_capacity(tail_piece.seq.len() + 1);
                seq.push(subsets[si].clone());
                seq.extend(tail_piece.seq.iter().cloned());
                Ok(QuadraticPiece {
                    p,
                    offset,
                    seq,
                    tail: Some(pi),
                })
            })
            .collect::<Result<_>>()?;
        let pieces = if opts.prune { prune_dominated(pieces) } else { pieces };
        tables.push(PiecewiseQuadratic { t, pieces });
    }

    tables.reverse();
    Ok(tables)
}

/// Best-effort dominance pruning: piece i is dropped when an already-kept
/// piece j has P_j <= P_i (Loewner) and offset_j <= offset_i. Keeps the
/// first piece on exact ties, preserving the evaluation tie rule.
fn prune_dominated(pieces: Vec<QuadraticPiece>) -> Vec<QuadraticPiece> {
    let mut kept: Vec<QuadraticPiece> = Vec::with_capacity(pieces.len());
    'candidate: for piece in pieces {
        for keeper in &kept {
            let scale = piece.p.norm().max(1.0);
            if keeper.offset <= piece.offset + 1e-12 * scale
                && min_symmetric_eigenvalue(&(&piece.p - &keeper.p)) >= -1e-12 * scale
            {
                continue 'candidate;
            }
        }
        kept.push(piece);
    }
    kept
}

/// How [`sample_partition`] draws points in the plane.
#[derive(Debug, Clone)]
pub enum PartitionSampling {
    /// `samples` points uniform in the square, from a seeded generator.
    Uniform { samples: usize, seed: u64 },
    /// Regular `nx` x `ny` lattice including the endpoints.
    Grid { nx: usize, ny: usize },
}

/// One labeled sample of the optimal-actuator partition.
#[derive(Debug, Clone)]
pub struct PartitionPoint {
    pub x1: f64,
    pub x2: f64,
    pub t: usize,
    /// Canonical subset label, e.g. `2` or `1+3`.
    pub label: String,
}

/// Labels planar states with the optimal actuator subset at each requested
/// time. Rows are grouped by time, in sample order within each group.
/// Only two-dimensional systems can be rasterized.
pub fn sample_partition(
    tables: &[PiecewiseQuadratic],
    bounds: (f64, f64),
    sampling: &PartitionSampling,
    times: &[usize],
) -> Result<Vec<PartitionPoint>> {
    if tables.is_empty() {
        return Err(Error::InvalidArgument("no value tables given".into()));
    }
    let n = tables[0].pieces[0].p.nrows();
    if n != 2 {
        return Err(Error::InvalidArgument(format!(
            "partition sampling is only defined for 2-dimensional systems, got N={n}"
        )));
    }
    let horizon = tables.len() - 1;
    if let Some(&t) = times.iter().find(|&&t| t >= horizon) {
        return Err(Error::InvalidArgument(format!(
            "time {t} has no actuator decision (horizon {horizon})"
        )));
    }
    let (lo, hi) = bounds;
    if hi <= lo || lo.is_nan() || hi.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "invalid bounds [{lo}, {hi}]"
        )));
    }
    let points: Vec<(f64, f64)> = match sampling {
        PartitionSampling::Uniform { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*samples)
                .map(|_| (rng.random_range(lo..hi), rng.random_range(lo..hi)))
                .collect()
        }
        PartitionSampling::Grid { nx, ny } => {
            if *nx < 1 || *ny < 1 {
                return Err(Error::InvalidArgument("grid counts must be positive".into()));
            }
            let coord = |i: usize, count: usize| {
                if count == 1 {
                    (lo + hi) / 2.0
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            };
            let mut pts = Vec::with_capacity(nx * ny);
            for i in 0..*nx {
                for j in 0..*ny {
                    pts.push((coord(i, *nx), coord(j, *ny)));
                }
            }
            pts
        }
    };

    let mut out = Vec::with_capacity(points.len() * times.len());
    for &t in times {
        let table = &tables[t];
        for &(x1, x2) in &points {
            let x = DVector::from_column_slice(&[x1, x2]);
            let label = table.optimal_subset(&x)?.to_string();
            out.push(PartitionPoint { x1, x2, t, label });
        }
    }
    Ok(out)
}

/// Writes partition points as CSV with header `x1,x2,t,subset`.
pub fn write_partition_csv<W: std::io::Write>(
    points: &[PartitionPoint],
    out: &mut W,
) -> Result<()> {
    writeln!(out, "x1,x2,t,subset")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.x1, p.x2, p.t, p.label)?;
    }
    Ok(())
}
