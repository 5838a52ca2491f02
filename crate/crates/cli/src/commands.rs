use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use streamalloc_core::catalog::Catalog;
use streamalloc_core::fixtures;
use streamalloc_core::model::{self, compare_strategies, workload_from_json, ModelError, StrategyRow, Workload};
use streamalloc_core::profiles::{fit_profile, samples_from_json, speedup, Device, ProfileKey, ProfileStore, ScalingModes};
use streamalloc_core::simulator::{generate_test_run, simulate};
use streamalloc_core::Plan;

use crate::{Command, Inputs};

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_UNDERPERFORMING: u8 = 3;

/// Plans below this overall performance fail `simulate`.
const PERFORMANCE_TARGET: f64 = 0.9;

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Plan { inputs, strategy, solver, out } => {
            let loaded = Loaded::from(&inputs)?;
            match model::plan(&loaded.workload, &loaded.catalog, &loaded.profiles, strategy, inputs.headroom, &solver.limits()) {
                Ok(plan) => {
                    emit(out.as_deref(), &plan.to_json())?;
                    let summary = format!("{strategy}: {} instance(s), hourly cost {}", plan.instances.len(), plan.hourly_cost);
                    if out.is_some() {
                        println!("{summary}");
                    } else {
                        eprintln!("{summary}");
                    }
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) if e.is_infeasibility() || matches!(e, ModelError::NoAllowedTypes(_)) => {
                    report_infeasible(strategy.to_string(), &e);
                    Ok(ExitCode::from(EXIT_INFEASIBLE))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Compare { inputs, solver, out } => {
            let loaded = Loaded::from(&inputs)?;
            let rows = compare_strategies(&loaded.workload, &loaded.catalog, &loaded.profiles, inputs.headroom, &solver.limits())?;
            stdout(&comparison_table(&rows, &loaded.catalog))?;
            if let Some(path) = out {
                write(&path, &comparison_json(&rows, &loaded.catalog))?;
            }
            if rows.iter().all(|r| r.outcome.is_err()) {
                return Ok(ExitCode::from(EXIT_INFEASIBLE));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { inputs, plan, out } => {
            let loaded = Loaded::from(&inputs)?;
            let plan = Plan::from_json(&read(&plan)?).with_context(|| format!("parsing plan {}", plan.display()))?;
            let report = simulate(&plan, &loaded.workload, &loaded.profiles, &loaded.catalog)?;
            emit(out.as_deref(), &report.to_json())?;
            eprintln!("overall performance {:.3}", report.overall_performance);
            if report.overall_performance >= PERFORMANCE_TARGET {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("overall performance below {PERFORMANCE_TARGET}");
                Ok(ExitCode::from(EXIT_UNDERPERFORMING))
            }
        }
        Command::ProfileFit { samples, program, device, frame_size, reference_machine, max_rate, out } => {
            let samples = samples_from_json(&read(&samples)?).with_context(|| format!("parsing {}", samples.display()))?;
            let key = ProfileKey { program, frame_size, device };
            let mut profile = fit_profile(key, &samples, reference_machine, ScalingModes::default())?;
            profile.max_rate_fps = max_rate;

            let mut store = if out.exists() {
                ProfileStore::from_json(&read(&out)?).with_context(|| format!("parsing {}", out.display()))?
            } else {
                ProfileStore::default()
            };
            store.upsert(profile.clone())?;
            write(&out, &store.to_json())?;

            let u = profile.utilization;
            if [u.cpu, u.memory, u.gpu, u.gpu_memory].iter().all(|v| *v == 0.0) {
                eprintln!("warning: every fitted utilization is zero");
            }
            let r = profile.reference_rate_fps;
            println!(
                "{}: per-FPS cpu {:.6}, gpu {:.6}; memory {:.6}, gpu memory {:.6}",
                profile.key(),
                u.cpu / r,
                u.gpu / r,
                u.memory,
                u.gpu_memory
            );
            let other = match device {
                Device::CpuOnly => Device::GpuAssisted,
                Device::GpuAssisted => Device::CpuOnly,
            };
            if let Some(pair) = store.lookup(&profile.program, frame_size, other) {
                let (cpu, gpu) = match device {
                    Device::CpuOnly => (&profile, pair),
                    Device::GpuAssisted => (pair, &profile),
                };
                if let Ok(s) = speedup(cpu, gpu) {
                    println!("{} speedup {s:.2}", profile.program);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::TestRun { profiles, program, device, frame_size, rate, count, noise, seed, out } => {
            let store = load_profiles(profiles.as_deref())?;
            let truth = store
                .lookup(&program, frame_size, device)
                .with_context(|| format!("no {device} profile for {program} at {frame_size}"))?;
            let samples = generate_test_run(truth, rate, count, noise, seed)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&samples)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { catalog, profiles, workload, plan } => {
            let mut checked = 0;
            let catalog = match catalog {
                Some(path) => {
                    checked += 1;
                    let c = Catalog::from_json(&read(&path)?).with_context(|| format!("{}", path.display()))?;
                    println!("{}: ok ({} instance types, {} GPU slots)", path.display(), c.instance_types().len(), c.n_max());
                    Some(c)
                }
                None => None,
            };
            if let Some(path) = profiles {
                checked += 1;
                let p = ProfileStore::from_json(&read(&path)?).with_context(|| format!("{}", path.display()))?;
                println!("{}: ok ({} profiles)", path.display(), p.profiles().len());
            }
            if let Some(path) = workload {
                checked += 1;
                let w = workload_from_json(&read(&path)?).with_context(|| format!("{}", path.display()))?;
                println!("{}: ok ({} streams)", path.display(), model::expand_streams(&w).len());
            }
            if let Some(path) = plan {
                checked += 1;
                let p = Plan::from_json(&read(&path)?).with_context(|| format!("{}", path.display()))?;
                if let Some(c) = &catalog {
                    p.check_structure(c).map_err(anyhow::Error::msg).with_context(|| format!("{}", path.display()))?;
                }
                println!("{}: ok ({} instances)", path.display(), p.instances.len());
            }
            if checked == 0 {
                bail!("nothing to validate; pass --catalog, --profiles, --workload or --plan");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

struct Loaded {
    catalog: Catalog,
    profiles: ProfileStore,
    workload: Workload,
}

impl Loaded {
    fn from(inputs: &Inputs) -> Result<Self> {
        let catalog = match &inputs.catalog {
            Some(path) => Catalog::from_json(&read(path)?).with_context(|| format!("loading catalog {}", path.display()))?,
            None => fixtures::experiment_catalog(),
        };
        let profiles = load_profiles(inputs.profiles.as_deref())?;
        let workload = workload_from_json(&read(&inputs.workload)?)
            .with_context(|| format!("loading workload {}", inputs.workload.display()))?;
        Ok(Loaded { catalog, profiles, workload })
    }
}

fn load_profiles(path: Option<&Path>) -> Result<ProfileStore> {
    match path {
        Some(path) => ProfileStore::from_json(&read(path)?).with_context(|| format!("loading profiles {}", path.display())),
        None => Ok(fixtures::profiles()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &PathBuf, contents: &str) -> Result<()> {
    fs::write(path, format!("{contents}\n")).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write(&path.to_path_buf(), contents),
        None => stdout(&format!("{contents}\n")),
    }
}

/// Writes to standard output; a closed pipe (`| head`) is not an error.
fn stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).context("writing to standard output"),
        _ => Ok(()),
    }
}

fn report_infeasible(strategy: String, e: &ModelError) {
    let reason = json!({ "status": "infeasible", "strategy": strategy, "reason": e.to_string() });
    println!("{reason}");
    eprintln!("infeasible: {e}");
}

#[derive(Serialize)]
struct ComparisonRow {
    strategy: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    instances: Option<std::collections::BTreeMap<String, usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    non_gpu_instances: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gpu_instances: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hourly_cost: Option<streamalloc_core::Cost>,
    #[serde(skip_serializing_if = "Option::is_none")]
    savings_pct: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

fn comparison_json(rows: &[StrategyRow], catalog: &Catalog) -> String {
    let rows: Vec<ComparisonRow> = rows
        .iter()
        .map(|row| match &row.outcome {
            Ok(plan) => {
                let (non_gpu, gpu) = plan.gpu_split(catalog);
                ComparisonRow {
                    strategy: row.strategy.to_string(),
                    status: "ok",
                    instances: Some(plan.instance_counts().into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
                    non_gpu_instances: Some(non_gpu),
                    gpu_instances: Some(gpu),
                    hourly_cost: Some(plan.hourly_cost),
                    savings_pct: row.savings_pct,
                    reason: None,
                }
            }
            Err(reason) => ComparisonRow {
                strategy: row.strategy.to_string(),
                status: "fail",
                instances: None,
                non_gpu_instances: None,
                gpu_instances: None,
                hourly_cost: None,
                savings_pct: None,
                reason: Some(reason.clone()),
            },
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "rows": rows })).expect("comparison serializes")
}

fn comparison_table(rows: &[StrategyRow], catalog: &Catalog) -> String {
    let mut out = format!("{:<8} {:>7} {:>4}  {:>9}  {:>7}  {}\n", "strategy", "non-GPU", "GPU", "hourly", "savings", "instances");
    for row in rows {
        let line = match &row.outcome {
            Ok(plan) => {
                let (non_gpu, gpu) = plan.gpu_split(catalog);
                let dash = |n: usize| if n == 0 { "-".to_string() } else { n.to_string() };
                let types: Vec<String> = plan.instance_counts().iter().map(|(t, n)| format!("{n} x {t}")).collect();
                format!(
                    "{:<8} {:>7} {:>4}  {:>9}  {:>6}%  {}",
                    row.strategy.to_string(),
                    dash(non_gpu),
                    dash(gpu),
                    plan.hourly_cost.to_string(),
                    row.savings_pct.unwrap_or(0),
                    types.join(", ")
                )
            }
            Err(reason) => format!("{:<8} {:>7} {:>4}  {:>9}  {:>7}  {reason}", row.strategy.to_string(), "FAIL", "FAIL", "FAIL", "FAIL"),
        };
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
