//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`) with its measured runtime.
//! Criteria with runtime budgets take a shared lock so timing is not
//! skewed by concurrent heavy tests.

mod common;

use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selftune::dp::{backward_pieces, sample_partition, DpOptions, PartitionSampling};
use selftune::linalg::{
    controllability_rank, lqr_gain, riccati_step, solve_dare, spectral_radius, DareOptions,
};
use selftune::model::{
    ActuatorLibrary, CostSpec, DynamicsMode, InitialState, Scenario, SwitchSchedule,
};
use selftune::sim::{median, rollout, PolicyKind};
use selftune::sysid::{fit_dynamics, History};
use selftune::{greedy, presets};

static TIMING: Mutex<()> = Mutex::new(());

fn report(criterion: usize, name: &str, started: Instant, budget_s: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    println!("ACCEPTANCE {criterion} ({name}): PASS in {elapsed:.2}s (budget {budget_s}s)");
    assert!(
        elapsed < budget_s,
        "criterion {criterion} exceeded its {budget_s}s runtime budget: {elapsed:.2}s"
    );
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Criterion 1: the planar optimal-actuator partition. Labels of 10000
/// uniform samples in [-4,4]^2 at every decision time must agree exactly
/// with brute-force enumeration of all actuator sequences, each priced by
/// the batch least-squares oracle, and both actuators must appear at every
/// time.
#[test]
fn acceptance_1_partition_reproduction() {
    let _guard = TIMING.lock().unwrap();
    let started = Instant::now();

    let scenario = presets::partition_scenario().unwrap();
    let tables = backward_pieces(&scenario, &DpOptions::default()).unwrap();
    let times = [0, 1, 2, 3];
    let points = sample_partition(
        &tables,
        (-4.0, 4.0),
        &PartitionSampling::Uniform {
            samples: 10_000,
            seed: 1,
        },
        &times,
    )
    .unwrap();
    assert_eq!(points.len(), 40_000);

    let mut mismatches = 0usize;
    for &t in &times {
        let (seqs, mats) = common::all_sequence_cost_matrices(&scenario, scenario.horizon - t);
        assert_eq!(mats.len(), 2usize.pow((scenario.horizon - t) as u32));
        let mut saw = std::collections::HashSet::new();
        for p in points.iter().filter(|p| p.t == t) {
            let x = DVector::from_column_slice(&[p.x1, p.x2]);
            let (_, idx) = common::oracle_min(&mats, &x);
            let oracle_label = seqs[idx][0].to_string();
            if oracle_label != p.label {
                mismatches += 1;
            }
            saw.insert(p.label.clone());
        }
        assert!(
            saw.contains("1") && saw.contains("2"),
            "time {t}: expected both actuator labels, saw {saw:?}"
        );
    }
    assert_eq!(mismatches, 0, "partition labels must match the oracle exactly");

    report(1, "partition reproduction", started, 10.0);
}

/// Criterion 2: unstabilizability detection on the two-mode example. The
/// actuator aligned with the stable eigendirection leaves the unstable mode
/// unreachable (controllability rank 1, divergent DARE); the other actuator
/// admits a converging DARE with a stable closed loop.
#[test]
fn acceptance_2_unstabilizability_detection() {
    let started = Instant::now();
    let a2 = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
    let b1 = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]);
    let b2 = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
    let q = DMatrix::identity(2, 2);
    let r = DMatrix::identity(1, 1);

    assert_eq!(controllability_rank(&a2, &b1).unwrap(), 1);

    let bad = solve_dare(&a2, &b1, &q, &r, &DareOptions::default());
    assert!(!bad.converged, "unstabilizable pair must not converge");

    let good = solve_dare(&a2, &b2, &q, &r, &DareOptions::default());
    assert!(good.converged);
    assert!(
        good.residual <= 1e-8,
        "fixed-point residual {} exceeds 1e-8",
        good.residual
    );
    let gain = lqr_gain(&good.p, &a2, &b2, &r).unwrap();
    let rho = spectral_radius(&(a2 + b2 * gain)).unwrap();
    assert!(rho < 1.0, "closed loop must be stable, got radius {rho}");

    report(2, "unstabilizability detection", started, 10.0);
}

/// Criterion 3: on the dwell-25 switching scenario over 20 seeds, the fixed
/// actuator-1 LQR exceeds state norm 1e6 on every seed while the mode-aware
/// greedy architecture keeps every run finite with state norm below 1e3.
#[test]
fn acceptance_3_simple_example_dominance() {
    let _guard = TIMING.lock().unwrap();
    let started = Instant::now();

    let scenario = presets::simple_example_scenario(25, 200).unwrap();
    let fixed = presets::fixed_b1_policy();
    let adaptive = presets::mode_aware_policy();
    for seed in 0..20u64 {
        let trace = rollout(&scenario, &fixed, seed).unwrap();
        assert!(
            trace.max_state_norm > 1e6,
            "seed {seed}: fixed architecture stayed below 1e6 ({})",
            trace.max_state_norm
        );
        let trace = rollout(&scenario, &adaptive, seed).unwrap();
        assert!(
            trace.total_cost.is_finite(),
            "seed {seed}: mode-aware cost diverged"
        );
        assert!(
            trace.max_state_norm < 1e3,
            "seed {seed}: mode-aware norm {} reached 1e3",
            trace.max_state_norm
        );
    }

    report(3, "switching-example dominance", started, 5.0);
}

/// Criterion 4: over ten seeded 50-node unstable instances, the median of
/// fixed-architecture cost over greedy self-tuning cost is at least 10
/// (divergent fixed runs count as ratio +inf).
#[test]
fn acceptance_4_fifty_node_experiment() {
    let _guard = TIMING.lock().unwrap();
    let started = Instant::now();

    let policies = presets::lqr50_policies();
    let mut ratios = Vec::new();
    for instance in 0..10u64 {
        let scenario = presets::lqr50_scenario(instance).unwrap();
        let fixed = rollout(&scenario, &policies[0], instance).unwrap();
        let tuned = rollout(&scenario, &policies[1], instance).unwrap();
        assert!(
            tuned.total_cost.is_finite(),
            "instance {instance}: greedy self-tuning run diverged"
        );
        let ratio = if fixed.diverged {
            f64::INFINITY
        } else {
            fixed.total_cost / tuned.total_cost
        };
        ratios.push(ratio);
    }
    let med = median(&ratios);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3e}")).collect();
    println!(
        "  fifty-node cost ratios (fixed / self-tuning): [{}], median {med:.3e}",
        shown.join(", ")
    );
    assert!(
        med >= 10.0,
        "median cost ratio {med} is below the required factor of 10"
    );

    report(4, "fifty-node cost dominance", started, 60.0);
}

/// Criterion 5: on 50 random noiseless instances, value tables match the
/// sequence-enumeration oracle at 10 random states each to 1e-8 relative,
/// and the exact-DP policy's realized rollout cost never exceeds the greedy
/// policy's from the same initial state.
#[test]
fn acceptance_5_dp_oracle_equivalence() {
    let _guard = TIMING.lock().unwrap();
    let started = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(555);
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < 50 {
        attempts += 1;
        assert!(attempts < 500, "instance generation stalled");
        let n = rng.random_range(2..=3);
        let m = rng.random_range(2..=3usize);
        let horizon = rng.random_range(2..=4);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let library = ActuatorLibrary::new(
            (0..m)
                .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let scenario = Scenario {
            modes: vec![DynamicsMode::new("A", a, DMatrix::zeros(n, n)).unwrap()],
            switching: SwitchSchedule::Constant { label: "A".into() },
            library,
            cost: CostSpec::identity(n),
            budget: 1,
            horizon,
            initial: InitialState::Fixed(x0.clone()),
            seed: 0,
        };
        let tables = backward_pieces(&scenario, &DpOptions::default()).unwrap();

        let (_, mats) = common::all_sequence_cost_matrices(&scenario, horizon);
        for _ in 0..10 {
            let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let (dp_val, _) = tables[0].evaluate(&x).unwrap();
            let (oracle_val, _) = common::oracle_min(&mats, &x);
            assert!(
                (dp_val - oracle_val).abs() / oracle_val.abs().max(1.0) <= 1e-8,
                "table value {dp_val} vs oracle {oracle_val}"
            );
        }

        // realized-cost comparison needs the greedy bootstrap to be
        // stabilizable; skip (rare) instances where it is not
        let dp_policy = PolicyKind::ExactDp {
            tables: std::sync::Arc::new(tables),
        };
        let greedy_policy = PolicyKind::GreedyKnownModel {
            period: 1,
            dare: DareOptions::default(),
        };
        let Ok(greedy_trace) = rollout(&scenario, &greedy_policy, 0) else {
            continue;
        };
        let dp_trace = rollout(&scenario, &dp_policy, 0).unwrap();
        assert!(
            dp_trace.total_cost <= greedy_trace.total_cost * (1.0 + 1e-9) + 1e-9,
            "exact DP cost {} exceeded greedy cost {}",
            dp_trace.total_cost,
            greedy_trace.total_cost
        );
        done += 1;
    }

    report(5, "value-table oracle equivalence", started, 30.0);
}

/// Criterion 6: noiseless persistently excited trajectories of length 2N
/// recover the state matrix to 1e-8 Frobenius error on 20 random instances,
/// and under noise 1e-2 the median error over 21 seeds shrinks when the
/// sample count grows from 10N to 100N.
#[test]
fn acceptance_6_identification_exactness() {
    let _guard = TIMING.lock().unwrap();
    let started = Instant::now();

    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..20 {
        let n = rng.random_range(2..=6);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.6..0.6));
        let b = DMatrix::<f64>::identity(n, n);
        let mut history = History::new(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
        for _ in 0..(2 * n) {
            let x = history.states().last().unwrap().clone();
            let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let next = &a * &x + &b * &u;
            history.record(u, b.clone(), next).unwrap();
        }
        let fit = fit_dynamics(&history, 0.0).unwrap();
        let err = (fit.a_hat - &a).norm();
        assert!(err <= 1e-8, "noiseless recovery error {err}");
    }

    let n = 5;
    let sigma = 1e-2;
    let mut medians = Vec::new();
    for &steps in &[10 * n, 100 * n] {
        let mut errs = Vec::new();
        for seed in 0..21u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.4..0.4));
            let b = DMatrix::<f64>::identity(n, n);
            let mut history =
                History::new(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
            for _ in 0..steps {
                let x = history.states().last().unwrap().clone();
                let u = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let w = DVector::from_fn(n, |_, _| {
                    sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)
                });
                let next = &a * &x + &b * &u + w;
                history.record(u, b.clone(), next).unwrap();
            }
            let fit = fit_dynamics(&history, 1e-8).unwrap();
            errs.push((fit.a_hat - &a).norm());
        }
        medians.push(median(&errs));
    }
    assert!(
        medians[1] < medians[0],
        "median identification error should shrink with 10x samples: {medians:?}"
    );

    report(6, "identification exactness", started, 30.0);
}

/// Criterion 7: numerical invariants on randomized instances, at least 100
/// cases each: Riccati symmetry and PSD preservation, actuation
/// monotonicity in the Loewner order, DARE residual bounds, and noiseless
/// argmin scale invariance.
#[test]
fn acceptance_7_numerical_invariants() {
    let _guard = TIMING.lock().unwrap();
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);

    // Riccati step: symmetry and PSD preservation
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=n);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        let b = DMatrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0));
        let base = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = &base * base.transpose();
        let base_p = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let p = &base_p * base_p.transpose();
        let r = DMatrix::identity(k, k);
        let out = riccati_step(&p, &a, &b, &q, &r).unwrap();
        assert!((out.clone() - out.transpose()).norm() <= 1e-10 * out.norm().max(1.0));
        assert!(min_eig(&out) >= -1e-8 * out.norm().max(1.0));
    }

    // actuation monotonicity: P for a grown subset never increases
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(2..=5);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b1 = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let b2 = DMatrix::from_fn(n, 1, |_, _| rng.random_range(-1.0..1.0));
        let q = DMatrix::identity(n, n);
        let small = solve_dare(&a, &b1, &q, &DMatrix::identity(1, 1), &DareOptions::default());
        let grown = DMatrix::from_fn(n, 2, |i, j| if j == 0 { b1[(i, 0)] } else { b2[(i, 0)] });
        let large = solve_dare(&a, &grown, &q, &DMatrix::identity(2, 2), &DareOptions::default());
        if !(small.converged && large.converged) {
            continue;
        }
        let scale = small.p.norm().max(1.0);
        assert!(
            min_eig(&(&small.p - &large.p)) >= -1e-8 * scale,
            "adding an actuator increased the value matrix"
        );
        checked += 1;
    }

    // DARE residual bound on converged solves
    let opts = DareOptions::default();
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(2..=6);
        let k = rng.random_range(1..=2);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.2..1.2));
        let b = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        let q = DMatrix::identity(n, n);
        let r = DMatrix::identity(k, k);
        let sol = solve_dare(&a, &b, &q, &r, &opts);
        if !sol.converged {
            continue;
        }
        assert!(
            sol.residual <= 10.0 * opts.tol * sol.p.norm().max(1.0),
            "residual bound violated: {} for |P| = {}",
            sol.residual,
            sol.p.norm()
        );
        checked += 1;
    }

    // noiseless argmin scale invariance of greedy selection
    let mut checked = 0;
    while checked < 100 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(2..=4usize);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let library = ActuatorLibrary::new(
            (0..m)
                .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let q = DMatrix::identity(n, n);
        let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let Ok(at_x) = greedy::greedy_select(&x, &a, &library, 1, &q, 1.0, &DareOptions::default())
        else {
            continue;
        };
        for alpha in [0.5, 2.0, 10.0] {
            let scaled = greedy::greedy_select(
                &(&x * alpha),
                &a,
                &library,
                1,
                &q,
                1.0,
                &DareOptions::default(),
            )
            .unwrap();
            assert_eq!(at_x.subset, scaled.subset, "selection changed under scaling");
        }
        checked += 1;
    }

    report(7, "numerical invariant suite", started, 30.0);
}
