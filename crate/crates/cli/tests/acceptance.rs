//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use streamalloc_core::fixtures;
use streamalloc_core::model::{expand_streams, plan, Assignment, PlannedInstance, Processor, Strategy, StreamRequest};
use streamalloc_core::profiles::{fit_profile, FrameSize, ResourceKind, Scaling};
use streamalloc_core::simulator::{check_plan, generate_test_run, simulate};
use streamalloc_core::solver::{brute_force, lower_bound, solve_exact, solve_heuristic, SolverLimits};
use streamalloc_core::testing::{random_instance, RandomShape};
use streamalloc_core::{Cost, Plan};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamalloc")).args(args).output().expect("binary runs")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Expected compare rows: (non-GPU count, GPU count, cost in dollars, savings %), None for a failure.
type Row = Option<(u64, u64, f64, i64)>;

fn scenario_tables() -> Outcome {
    let expected: [[Row; 3]; 3] = [
        [Some((4, 0, 1.676, 0)), Some((0, 1, 0.650, 61)), Some((0, 1, 0.650, 61))],
        [Some((1, 0, 0.419, 36)), Some((0, 1, 0.650, 0)), Some((1, 0, 0.419, 36))],
        [None, Some((0, 11, 7.150, 0)), Some((1, 10, 6.919, 3))],
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("cmp.json");
    let start = Instant::now();
    for (n, rows) in expected.iter().enumerate() {
        let w = fixture(&format!("scenario{}.json", n + 1));
        let o = cli(&["compare", "--workload", w.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        ensure(o.status.success(), || format!("scenario {}: exit {:?}", n + 1, o.status.code()))?;
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).map_err(|e| e.to_string())?;
        for (i, want) in rows.iter().enumerate() {
            let got = &v["rows"][i];
            let tag = format!("scenario {} ST{}", n + 1, i + 1);
            match want {
                None => ensure(got["status"] == "fail", || format!("{tag}: expected failure, got {got}"))?,
                Some((cpu, gpu, cost, pct)) => {
                    ensure(got["status"] == "ok", || format!("{tag}: {got}"))?;
                    ensure(got["non_gpu_instances"] == *cpu && got["gpu_instances"] == *gpu, || {
                        format!("{tag}: counts {} / {}", got["non_gpu_instances"], got["gpu_instances"])
                    })?;
                    let c = got["hourly_cost"].as_f64().unwrap_or(f64::NAN);
                    ensure((c - cost).abs() <= 0.001 + 1e-9, || format!("{tag}: cost {c} vs {cost}"))?;
                    let s = got["savings_pct"].as_i64().unwrap_or(-100);
                    ensure((s - pct).abs() <= 1, || format!("{tag}: savings {s} vs {pct}"))?;
                }
            }
        }
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(5), || format!("took {took:?}"))?;
    Ok(format!("9 rows match in {:.2}s", took.as_secs_f64()))
}

fn speedups() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = dir.path().join("profiles.json");
    let mut found = Vec::new();
    for (prog, file, cpu_max, gpu_max, want) in
        [("VGG-16", "vgg16", "0.28", "3.61", 12.89), ("ZF", "zf", "0.56", "9.15", 16.34)]
    {
        for (device, max) in [("cpu", cpu_max), ("gpu", gpu_max)] {
            let samples = fixture(&format!("samples_{file}_{device}.json"));
            let o = cli(&[
                "profile-fit", "--samples", samples.to_str().unwrap(), "--program", prog, "--device", device,
                "--max-rate", max, "--out", store.to_str().unwrap(),
            ]);
            ensure(o.status.success(), || format!("{prog} {device}: exit {:?}", o.status.code()))?;
            if device == "gpu" {
                let text = String::from_utf8_lossy(&o.stdout);
                let got: f64 = text
                    .lines()
                    .find_map(|l| l.strip_prefix(&format!("{prog} speedup ")))
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| format!("{prog}: no speedup line in {text:?}"))?;
                ensure((got - want).abs() <= 0.01, || format!("{prog}: speedup {got} vs {want}"))?;
                found.push(format!("{prog} {got:.2}"));
            }
        }
    }
    Ok(found.join(", "))
}

fn solver_oracle() -> Outcome {
    let start = Instant::now();
    let limits = SolverLimits::default();
    for seed in 0..100 {
        let inst = random_instance(seed, RandomShape::SMALL);
        let brute = brute_force(&inst).map_err(|e| format!("seed {seed}: brute force: {e}"))?;
        let exact = solve_exact(&inst, &limits).map_err(|e| format!("seed {seed}: exact: {e}"))?;
        let heur = solve_heuristic(&inst).map_err(|e| format!("seed {seed}: heuristic: {e}"))?;
        ensure(exact.total_cost == brute.total_cost, || {
            format!("seed {seed}: exact {} vs brute {}", exact.total_cost, brute.total_cost)
        })?;
        ensure(heur.total_cost >= exact.total_cost, || format!("seed {seed}: heuristic below optimum"))?;
        let bound = lower_bound(&inst).unwrap_or(Cost::from_micros(0));
        ensure(bound <= exact.total_cost, || format!("seed {seed}: bound {bound} > {}", exact.total_cost))?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("100 instances in {:.2}s", took.as_secs_f64()))
}

fn profile_linearity() -> Outcome {
    let store = fixtures::profiles();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for profile in store.profiles() {
        for _ in 0..20 {
            let rate = rng.random_range(0.01..10.0);
            let k = rng.random_range(0.1..5.0);
            let (base, scaled) = (profile.demand_fraction(rate), profile.demand_fraction(k * rate));
            for kind in ResourceKind::ALL {
                let want = match profile.scaling.get(kind) {
                    Scaling::LinearInRate => k * base.get(kind),
                    Scaling::Constant => base.get(kind),
                };
                let err = (scaled.get(kind) - want).abs();
                worst = worst.max(err);
                ensure(err <= 1e-9, || format!("{}: {kind:?} off by {err:e} at {rate}", profile.key()))?;
            }
        }
        let rate = 0.8 * profile.max_rate_fps.unwrap_or(1.0);
        let samples = generate_test_run(profile, rate, 8, 0.0, 9).map_err(|e| e.to_string())?;
        let fitted = fit_profile(profile.key(), &samples, profile.reference_machine, profile.scaling)
            .map_err(|e| e.to_string())?;
        for rate in [0.1, 0.7, 2.5] {
            let (a, b) = (profile.demand_fraction(rate), fitted.demand_fraction(rate));
            for kind in ResourceKind::ALL {
                let err = (a.get(kind) - b.get(kind)).abs();
                worst = worst.max(err);
                ensure(err <= 1e-9, || format!("{}: round trip {kind:?} off by {err:e}", profile.key()))?;
            }
        }
    }
    Ok(format!("{} profiles, max error {worst:.1e}", store.profiles().len()))
}

const VGA: FrameSize = FrameSize { w: 640, h: 480 };

fn simulator_coherence() -> Outcome {
    let (catalog, profiles) = (fixtures::experiment_catalog(), fixtures::profiles());
    let limits = SolverLimits::default();
    let check = |tag: &str, workload: &[StreamRequest], strategy: Strategy| -> Result<bool, String> {
        let p = match plan(workload, &catalog, &profiles, strategy, 0.9, &limits) {
            Ok(p) => p,
            Err(e) if e.is_infeasibility() => return Ok(false),
            Err(e) => return Err(format!("{tag}: {e}")),
        };
        let violations = check_plan(&p, workload, &profiles, &catalog, 0.9).map_err(|e| e.to_string())?;
        ensure(violations.is_empty(), || format!("{tag} {strategy}: {}", violations[0]))?;
        let report = simulate(&p, workload, &profiles, &catalog).map_err(|e| e.to_string())?;
        ensure(report.overall_performance == 1.0, || format!("{tag} {strategy}: {}", report.overall_performance))?;
        Ok(true)
    };

    let mut plans = 0;
    for n in 1..=3 {
        for strategy in Strategy::ALL {
            plans += check(&format!("scenario {n}"), &fixtures::scenario(n), strategy)? as usize;
        }
    }

    // Rates stay a little under the GPU caps so that headroom, not the cap,
    // decides feasibility.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut random = 0;
    while random < 50 {
        let workload: Vec<StreamRequest> = (0..rng.random_range(1..=4))
            .map(|i| {
                let vgg = rng.random_bool(0.5);
                StreamRequest {
                    stream_id: format!("s{i}"),
                    program: if vgg { "VGG-16" } else { "ZF" }.into(),
                    frame_size: VGA,
                    desired_rate_fps: if vgg { rng.random_range(0.05..3.3) } else { rng.random_range(0.05..8.1) },
                    replicas: rng.random_range(1..=2),
                }
            })
            .collect();
        if check(&format!("random workload {random}"), &workload, Strategy::St3)? {
            random += 1;
            plans += 1;
        }
    }

    // Overload: k ZF streams on one c4.2xlarge CPU at f times its capacity.
    let zf_cpu_per_fps = 0.178 / 0.2;
    for k in 2..=6u32 {
        let rate = 0.5;
        let f = k as f64 * rate * zf_cpu_per_fps;
        let workload = [StreamRequest {
            stream_id: "zf".into(),
            program: "ZF".into(),
            frame_size: VGA,
            desired_rate_fps: rate,
            replicas: k,
        }];
        let p = Plan {
            instances: vec![PlannedInstance { instance_type: "c4.2xlarge".into(), ordinal: 0 }],
            assignments: expand_streams(&workload)
                .into_iter()
                .map(|(stream_id, _)| Assignment { stream_id, instance: 0, device: Processor::Cpu })
                .collect(),
            hourly_cost: Cost::from_millis(419),
        };
        let report = simulate(&p, &workload, &profiles, &catalog).map_err(|e| e.to_string())?;
        let want = if f > 1.0 { 1.0 / f } else { 1.0 };
        ensure((report.overall_performance - want).abs() <= 1e-9, || {
            format!("overload {f:.3}: performance {} vs {want}", report.overall_performance)
        })?;
    }
    Ok(format!("{plans} clean plans, overload 1/f on 5 hand plans"))
}

fn infeasible_exit() -> Outcome {
    let w = fixture("scenario3.json");
    let o = cli(&["plan", "--workload", w.to_str().unwrap(), "--strategy", "st1"]);
    ensure(o.status.code() == Some(2), || format!("exit {:?}", o.status.code()))?;
    let text = String::from_utf8_lossy(&o.stdout);
    ensure(text.contains("0.56"), || format!("reason lacks the cap: {text}"))?;
    Ok("exit 2, reason names cpu max 0.56".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("scenario comparison tables", scenario_tables),
        ("profile-fit speedups", speedups),
        ("exact solver vs brute force", solver_oracle),
        ("profile linearity and fit round trip", profile_linearity),
        ("simulator coherence", simulator_coherence),
        ("infeasible strategy reporting", infeasible_exit),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
