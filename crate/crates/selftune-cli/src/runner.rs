//! Preset execution: turns a resolved configuration into CSV/JSON
//! artifacts plus a manifest. All numeric output uses Rust's shortest
//! round-trip float formatting, so identical runs produce byte-identical
//! files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use selftune::dp::{backward_pieces, sample_partition, DpOptions, PartitionSampling};
use selftune::model::Scenario;
use selftune::presets;
use selftune::sim::{compare, median, rollout, CompareSummary, PolicyKind, RolloutTrace};

use crate::config::{ExperimentConfig, Manifest, TOOLKIT_VERSION};

pub struct RunOutput {
    pub artifacts: Vec<String>,
}

fn create(out_dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = out_dir.join(name);
    let file =
        File::create(&path).with_context(|| format!("creating artifact {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

pub fn run(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<RunOutput> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let artifacts = match config.preset.as_str() {
        "partition" => run_partition(config, out_dir)?,
        "simple-example" => run_simple_example(config, out_dir)?,
        "lqr50" => run_lqr50(config, out_dir)?,
        "custom" => run_custom(config, out_dir)?,
        other => anyhow::bail!("unknown preset '{other}'"),
    };
    let manifest = Manifest {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        config: config.clone(),
        artifacts: artifacts.clone(),
    };
    let mut w = create(out_dir, "manifest.json")?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    let mut all = artifacts;
    all.push("manifest.json".into());
    Ok(RunOutput { artifacts: all })
}

fn run_partition(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<Vec<String>> {
    let scenario = match &config.scenario {
        Some(sc) => sc.to_scenario()?,
        None => presets::partition_scenario()?,
    };
    let samples = config.samples.unwrap_or(10_000);
    let seed = config.seed.unwrap_or(1);
    let tables = backward_pieces(&scenario, &DpOptions::default())?;
    let times: Vec<usize> = (0..scenario.horizon).collect();
    let points = sample_partition(
        &tables,
        (-4.0, 4.0),
        &PartitionSampling::Uniform { samples, seed },
        &times,
    )?;
    let mut w = create(out_dir, "partition.csv")?;
    selftune::dp::write_partition_csv(&points, &mut w)?;
    Ok(vec!["partition.csv".into()])
}

/// Writes one wide row per seed: cost, divergence flag, and peak state
/// norm per policy.
fn write_costs_wide<W: Write>(
    out: &mut W,
    names: &[String],
    seeds: &[u64],
    summary: &CompareSummary,
) -> anyhow::Result<()> {
    let mut header = vec!["seed".to_string()];
    for name in names {
        header.push(format!("{name}_cost"));
        header.push(format!("{name}_diverged"));
        header.push(format!("{name}_max_norm"));
    }
    writeln!(out, "{}", header.join(","))?;
    for (si, seed) in seeds.iter().enumerate() {
        let mut row = vec![seed.to_string()];
        for pi in 0..names.len() {
            let r = &summary.rows[pi * seeds.len() + si];
            row.push(r.total_cost.to_string());
            row.push(r.diverged.to_string());
            row.push(r.max_state_norm.to_string());
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Long-format per-step records for a set of labeled traces.
fn write_states_csv<W: Write>(
    out: &mut W,
    traces: &[(String, u64, RolloutTrace)],
) -> anyhow::Result<()> {
    writeln!(out, "policy,seed,t,mode,subset,stage_cost,norm_x")?;
    for (name, seed, trace) in traces {
        for step in &trace.steps {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                name,
                seed,
                step.t,
                step.mode,
                step.subset,
                step.stage_cost,
                step.x.norm()
            )?;
        }
    }
    Ok(())
}

fn policy_names(policies: &[PolicyKind]) -> Vec<String> {
    let mut names: Vec<String> = policies.iter().map(|p| sanitize(&p.to_string())).collect();
    for i in 0..names.len() {
        let clashes = names[..i].contains(&names[i]);
        if clashes {
            names[i] = format!("{}_{i}", names[i]);
        }
    }
    names
}

fn run_simple_example(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<Vec<String>> {
    let dwell = config.dwell.unwrap_or(25);
    let scenario = presets::simple_example_scenario(dwell, 200)?;
    let policies = presets::simple_example_policies();
    let names = policy_names(&policies);
    let n_seeds = config.seeds.unwrap_or(20);
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| config.seed.unwrap_or(0) + i).collect();

    let summary = compare(&scenario, &policies, &seeds)?;
    let mut w = create(out_dir, "costs.csv")?;
    write_costs_wide(&mut w, &names, &seeds, &summary)?;

    let mut traces = Vec::new();
    for (pi, policy) in policies.iter().enumerate() {
        for &seed in &seeds {
            traces.push((names[pi].clone(), seed, rollout(&scenario, policy, seed)?));
        }
    }
    let mut w = create(out_dir, "states.csv")?;
    write_states_csv(&mut w, &traces)?;
    Ok(vec!["costs.csv".into(), "states.csv".into()])
}

#[derive(Serialize)]
struct Lqr50Summary {
    policies: Vec<String>,
    instances: Vec<u64>,
    /// Per-instance fixed/self-tuning cost ratio (null when infinite).
    ratios: Vec<f64>,
    ratios_display: Vec<String>,
    median_ratio: f64,
    median_ratio_display: String,
    divergent_fixed_runs: usize,
}

fn run_lqr50(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<Vec<String>> {
    let n_instances = config.seeds.unwrap_or(10);
    let instances: Vec<u64> = (0..n_instances as u64).map(|i| config.seed.unwrap_or(0) + i).collect();
    let policies = presets::lqr50_policies();
    let names = policy_names(&policies);

    let mut costs = create(out_dir, "costs.csv")?;
    writeln!(costs, "instance,policy,total_cost,diverged,max_norm")?;
    let mut ratios = Vec::new();
    let mut divergent_fixed = 0usize;
    let mut first_traces = Vec::new();
    for &instance in &instances {
        let scenario = presets::lqr50_scenario(instance)?;
        let mut per_policy = Vec::new();
        for (pi, policy) in policies.iter().enumerate() {
            let trace = rollout(&scenario, policy, instance)?;
            writeln!(
                costs,
                "{},{},{},{},{}",
                instance, names[pi], trace.total_cost, trace.diverged, trace.max_state_norm
            )?;
            per_policy.push(trace);
        }
        let fixed = &per_policy[0];
        let tuned = &per_policy[1];
        if fixed.diverged {
            divergent_fixed += 1;
        }
        let ratio = if fixed.diverged {
            f64::INFINITY
        } else {
            fixed.total_cost / tuned.total_cost
        };
        ratios.push(ratio);
        if instance == instances[0] {
            for (pi, trace) in per_policy.into_iter().enumerate() {
                first_traces.push((names[pi].clone(), instance, trace));
            }
        }
    }
    drop(costs);

    let med = median(&ratios);
    let summary = Lqr50Summary {
        policies: names,
        instances,
        ratios: ratios.clone(),
        ratios_display: ratios.iter().map(|r| format!("{r:.6e}")).collect(),
        median_ratio: med,
        median_ratio_display: format!("{med:.6e}"),
        divergent_fixed_runs: divergent_fixed,
    };
    let mut w = create(out_dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;

    let mut w = create(out_dir, "states.csv")?;
    write_states_csv(&mut w, &first_traces)?;
    Ok(vec!["costs.csv".into(), "summary.json".into(), "states.csv".into()])
}

fn run_custom(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<Vec<String>> {
    let scenario: Scenario = config
        .scenario
        .as_ref()
        .expect("validated")
        .to_scenario()?;
    let policy_configs = config.policies.as_ref().expect("validated");
    let policies: Vec<PolicyKind> = policy_configs
        .iter()
        .map(|p| p.instantiate(&scenario))
        .collect::<anyhow::Result<_>>()?;
    let names = policy_names(&policies);
    let n_seeds = config.seeds.unwrap_or(1);
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| config.seed.unwrap_or(0) + i).collect();

    let summary = compare(&scenario, &policies, &seeds)?;
    let mut w = create(out_dir, "costs.csv")?;
    write_costs_wide(&mut w, &names, &seeds, &summary)?;

    let mut w = create(out_dir, "summary.json")?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;

    let mut traces = Vec::new();
    for (pi, policy) in policies.iter().enumerate() {
        for &seed in &seeds {
            traces.push((names[pi].clone(), seed, rollout(&scenario, policy, seed)?));
        }
    }
    let mut w = create(out_dir, "states.csv")?;
    write_states_csv(&mut w, &traces)?;
    Ok(vec!["costs.csv".into(), "summary.json".into(), "states.csv".into()])
}

/// Output directory resolution: flag > config > environment > default.
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = &config.out {
        return PathBuf::from(dir);
    }
    if let Ok(dir) = std::env::var("SELFTUNE_OUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from("selftune-out")
}
