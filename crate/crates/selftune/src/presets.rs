//! Ready-made experiment scenarios: the two-mode switching example, the
//! planar optimal-actuator partition system, and seeded 50-node network
//! instances for the fixed-vs-self-tuning cost comparison.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::{spectral_radius, DareOptions};
use crate::model::{
    ActuatorLibrary, ActuatorSubset, CostSpec, DynamicsMode, InitialState, Scenario,
    SwitchSchedule,
};
use crate::sim::PolicyKind;

/// Two-mode switching scenario on R^2.
///
/// The modes differ in the sign of the off-diagonal coupling; the library
/// holds the two candidate columns [1, 1]' and [1, -1]', each of which is
/// an eigenvector of both modes. Actuator 1 cannot stabilize mode `A2` and
/// actuator 2 cannot stabilize mode `A1`, so any fixed single-actuator
/// architecture fails whenever the wrong mode dwells long enough, while a
/// mode-aware architecture switches actuators and keeps the loop stable.
///
/// The schedule starts in `A2` (the mode hostile to actuator 1) and
/// alternates with the given dwell. The initial state [60, -60]' lies on
/// the unstable eigendirection of `A2`, so a dwell of 25 pushes the fixed
/// architecture's state norm above 1e6 before the first switch.
pub fn simple_example_scenario(dwell: usize, horizon: usize) -> Result<Scenario> {
    let sigma2 = 0.01; // noise std 0.1
    let a1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let a2 = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
    let w = DMatrix::identity(2, 2) * sigma2;
    let scenario = Scenario {
        modes: vec![
            DynamicsMode::new("A1", a1, w.clone())?,
            DynamicsMode::new("A2", a2, w)?,
        ],
        switching: SwitchSchedule::Periodic {
            dwell: dwell.max(1),
            order: vec!["A2".into(), "A1".into()],
        },
        library: ActuatorLibrary::new(vec![
            DVector::from_column_slice(&[1.0, 1.0]),
            DVector::from_column_slice(&[1.0, -1.0]),
        ])?,
        cost: CostSpec::identity(2),
        budget: 1,
        horizon,
        initial: InitialState::Fixed(DVector::from_column_slice(&[60.0, -60.0])),
        seed: 0,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Fixed-architecture LQR pinned to actuator 1 (the doomed choice for the
/// switching example).
pub fn fixed_b1_policy() -> PolicyKind {
    PolicyKind::FixedArchitectureLqr {
        subset: ActuatorSubset::new(vec![1]).expect("valid subset"),
        dare: DareOptions::default(),
    }
}

/// Mode detection plus greedy selection, re-run every step.
pub fn mode_aware_policy() -> PolicyKind {
    PolicyKind::ModeAwareGreedy {
        period: 1,
        window: 5,
        dare: DareOptions::default(),
    }
}

/// Planar system whose optimal-actuator regions form a nontrivial
/// partition: strongly non-normal dynamics, two basis actuators, budget 1,
/// state cost diag(1, 2), unit input cost, no process noise. Four decision
/// stages (five time points).
pub fn partition_scenario() -> Result<Scenario> {
    let a = DMatrix::from_row_slice(2, 2, &[-2.2639, 0.6379, -0.2619, 0.6383]);
    let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
    let scenario = Scenario {
        modes: vec![DynamicsMode::new("A", a, DMatrix::zeros(2, 2))?],
        switching: SwitchSchedule::Constant { label: "A".into() },
        library: ActuatorLibrary::standard_basis(2, 2)?,
        cost: CostSpec::new(q.clone(), 1.0, q)?,
        budget: 1,
        horizon: 4,
        initial: InitialState::Fixed(DVector::zeros(2)),
        seed: 0,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Seeded 50-node network instance for the fixed-vs-self-tuning comparison.
///
/// Generator (all draws from one ChaCha8 stream per instance seed):
/// a ring of 50 nodes with self-coefficients uniform in [0.3, 0.8] and
/// nearest-neighbour couplings of random sign and magnitude uniform in
/// [0.05, 0.25]; a three-node "hot" cluster centred uniformly within the
/// actuated half gets self-coefficients in [1.0, 1.1]; the whole matrix is
/// then scaled to spectral radius 1.05. Because the unstable cluster is
/// spatially localized, a fixed input pair at nodes 1-2 is (near-)useless
/// unless it happens to sit on the cluster, while a state-aware selection
/// from the 25 basis actuators can always reach it.
///
/// Budget K = 2 from the 25 standard basis actuators, identity costs,
/// noise covariance 1e-4 I, initial state N(0, 25 I), horizon 100.
pub fn lqr50_scenario(instance_seed: u64) -> Result<Scenario> {
    const N: usize = 50;
    const M: usize = 25;
    const TARGET_RADIUS: f64 = 1.05;
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let mut a = DMatrix::zeros(N, N);
    for i in 0..N {
        a[(i, i)] = rng.random_range(0.3..0.8);
    }
    for i in 0..N {
        let sign = |r: &mut ChaCha8Rng| if r.random_range(0..2) == 0 { -1.0 } else { 1.0 };
        let fwd = rng.random_range(0.05..0.25) * sign(&mut rng);
        let bwd = rng.random_range(0.05..0.25) * sign(&mut rng);
        a[(i, (i + 1) % N)] = fwd;
        a[(i, (i + N - 1) % N)] = bwd;
    }
    let hot = rng.random_range(0..M as i64);
    for d in -1..=1i64 {
        let j = ((hot + d).rem_euclid(N as i64)) as usize;
        a[(j, j)] = rng.random_range(1.0..1.1);
    }
    let radius = spectral_radius(&a)?;
    a *= TARGET_RADIUS / radius;

    let scenario = Scenario {
        modes: vec![DynamicsMode::new(
            "A",
            a,
            DMatrix::identity(N, N) * 1e-4,
        )?],
        switching: SwitchSchedule::Constant { label: "A".into() },
        library: ActuatorLibrary::standard_basis(N, M)?,
        cost: CostSpec::identity(N),
        budget: 2,
        horizon: 100,
        initial: InitialState::Gaussian {
            mean: DVector::zeros(N),
            covariance: DMatrix::identity(N, N) * 25.0,
        },
        seed: instance_seed,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Policies compared in the 50-node experiment: the fixed pair {1, 2}
/// versus per-step greedy selection with the known model. Both use the
/// doubling DARE evaluation; at N = 50 plain value iteration would
/// dominate the runtime.
pub fn lqr50_policies() -> Vec<PolicyKind> {
    vec![
        PolicyKind::FixedArchitectureLqr {
            subset: ActuatorSubset::new(vec![1, 2]).expect("valid subset"),
            dare: DareOptions::doubling(),
        },
        PolicyKind::GreedyKnownModel {
            period: 1,
            dare: DareOptions::doubling(),
        },
    ]
}

/// Policies compared in the switching example: the doomed fixed actuator
/// versus the mode-aware greedy architecture.
pub fn simple_example_policies() -> Vec<PolicyKind> {
    vec![fixed_b1_policy(), mode_aware_policy()]
}
