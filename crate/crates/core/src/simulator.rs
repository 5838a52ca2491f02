//! Analytic steady-state evaluation of plans.
//!
//! Demands add up per instance. A stream meets its desired rate unless its
//! device's rate cap is lower or an instance dimension it uses is loaded
//! past raw capacity; an overloaded dimension is shared proportionally, so
//! every stream using it runs at `capacity / demand` of its desired rate.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, ResourceVector, CPU, MEMORY};
use crate::model::{expand_streams, Plan, Processor, StreamRequest};
use crate::packing::CAPACITY_SLACK;
use crate::profiles::{Device, Profile, ProfileStore, ResourceKind, TestRunSample};

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("stream `{0}` is not assigned")]
    Unassigned(String),
    #[error("plan assigns unknown stream `{0}`")]
    UnknownStream(String),
    #[error("no {device} profile for `{program}`")]
    MissingProfile { program: String, device: Device },
    #[error("rate {rate} FPS exceeds the profile's max rate {max} FPS")]
    AboveMaxRate { rate: f64, max: f64 },
    #[error("{0}")]
    BadArgument(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceUtilization {
    pub ordinal: usize,
    #[serde(rename = "type")]
    pub instance_type: String,
    /// Demand over raw capacity, per dimension; 0 where capacity is 0.
    pub utilization: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamPerformance {
    pub stream_id: String,
    pub performance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub per_instance: Vec<InstanceUtilization>,
    pub per_stream: Vec<StreamPerformance>,
    /// Mean stream performance; 1.0 when there are no streams.
    pub overall_performance: f64,
}

impl SimulationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn performance_of(&self, stream_id: &str) -> Option<f64> {
        self.per_stream.iter().find(|s| s.stream_id == stream_id).map(|s| s.performance)
    }
}

/// Human-readable name of dimension `d`.
pub fn dimension_name(d: usize) -> String {
    match d {
        CPU => "cpu".into(),
        MEMORY => "memory".into(),
        _ if d % 2 == 0 => format!("gpu{}", (d - 2) / 2),
        _ => format!("gpu{}_memory", (d - 3) / 2),
    }
}

struct Resolved<'a> {
    stream_id: String,
    instance: usize,
    rate: f64,
    profile: &'a Profile,
    demand: ResourceVector,
}

fn resolve<'a>(
    plan: &Plan,
    workload: &'a [StreamRequest],
    profiles: &'a ProfileStore,
    catalog: &Catalog,
) -> Result<Vec<Resolved<'a>>, SimulationError> {
    plan.check_structure(catalog).map_err(SimulationError::Plan)?;
    let streams: HashMap<String, &StreamRequest> = expand_streams(workload).into_iter().collect();
    if let Some(a) = plan.assignments.iter().find(|a| !streams.contains_key(&a.stream_id)) {
        return Err(SimulationError::UnknownStream(a.stream_id.clone()));
    }
    let assigned: HashMap<&str, _> = plan.assignments.iter().map(|a| (a.stream_id.as_str(), a)).collect();

    let mut out = Vec::new();
    for (stream_id, req) in expand_streams(workload) {
        let a = assigned.get(stream_id.as_str()).ok_or_else(|| SimulationError::Unassigned(stream_id.clone()))?;
        let device = a.device.device();
        let profile = profiles
            .lookup(&req.program, req.frame_size, device)
            .ok_or_else(|| SimulationError::MissingProfile { program: req.program.clone(), device })?;
        let demand = profile
            .demand_vector(req.desired_rate_fps, catalog.n_max(), a.device.slot())
            .map_err(|e| SimulationError::Plan(e.to_string()))?;
        out.push(Resolved { stream_id, instance: a.instance, rate: req.desired_rate_fps, profile, demand });
    }
    Ok(out)
}

fn instance_loads(plan: &Plan, catalog: &Catalog, streams: &[Resolved]) -> (Vec<ResourceVector>, Vec<ResourceVector>) {
    let capacities: Vec<ResourceVector> = plan
        .instances
        .iter()
        .map(|i| catalog.capacity(catalog.get(&i.instance_type).expect("checked by check_structure")))
        .collect();
    let mut loads = vec![ResourceVector::zeros(catalog.dims()); plan.instances.len()];
    for s in streams {
        loads[s.instance].add_assign(&s.demand);
    }
    (capacities, loads)
}

/// Utilization and performance of `plan` serving `workload`.
pub fn simulate(
    plan: &Plan,
    workload: &[StreamRequest],
    profiles: &ProfileStore,
    catalog: &Catalog,
) -> Result<SimulationReport, SimulationError> {
    let streams = resolve(plan, workload, profiles, catalog)?;
    let (capacities, loads) = instance_loads(plan, catalog, &streams);

    let per_instance = plan
        .instances
        .iter()
        .zip(capacities.iter().zip(&loads))
        .map(|(inst, (cap, load))| InstanceUtilization {
            ordinal: inst.ordinal,
            instance_type: inst.instance_type.clone(),
            utilization: load
                .as_slice()
                .iter()
                .zip(cap.as_slice())
                .map(|(l, c)| if *c > 0.0 { l / c } else { 0.0 })
                .collect(),
        })
        .collect();

    let per_stream: Vec<StreamPerformance> = streams
        .iter()
        .map(|s| {
            let rate_cap = s.profile.max_rate_fps.map_or(1.0, |max| max / s.rate);
            let (cap, load) = (&capacities[s.instance], &loads[s.instance]);
            let bottleneck = (0..cap.dims())
                .filter(|&d| s.demand[d] > 0.0)
                .map(|d| (cap[d] / load[d]).min(1.0))
                .fold(1.0, f64::min);
            StreamPerformance { stream_id: s.stream_id.clone(), performance: rate_cap.min(bottleneck).min(1.0) }
        })
        .collect();

    let overall_performance = if per_stream.is_empty() {
        1.0
    } else {
        per_stream.iter().map(|s| s.performance).sum::<f64>() / per_stream.len() as f64
    };
    Ok(SimulationReport { per_instance, per_stream, overall_performance })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    Capacity {
        ordinal: usize,
        instance_type: String,
        dimension: String,
        utilization: f64,
        limit: f64,
    },
    RateCap {
        stream_id: String,
        device: Processor,
        desired_rate_fps: f64,
        max_rate_fps: f64,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Capacity { ordinal, instance_type, dimension, utilization, limit } => write!(
                f,
                "instance {ordinal} ({instance_type}): {dimension} at {:.1}% > {:.1}%",
                utilization * 100.0,
                limit * 100.0
            ),
            Violation::RateCap { stream_id, device, desired_rate_fps, max_rate_fps } => write!(
                f,
                "stream {stream_id}: desired {desired_rate_fps:.2} FPS > {device} max {max_rate_fps:.2}"
            ),
        }
    }
}

/// Every place `plan` breaks the headroom rule or a device rate cap.
pub fn check_plan(
    plan: &Plan,
    workload: &[StreamRequest],
    profiles: &ProfileStore,
    catalog: &Catalog,
    headroom: f64,
) -> Result<Vec<Violation>, SimulationError> {
    let streams = resolve(plan, workload, profiles, catalog)?;
    let (capacities, loads) = instance_loads(plan, catalog, &streams);
    let device_of: HashMap<&str, Processor> =
        plan.assignments.iter().map(|a| (a.stream_id.as_str(), a.device)).collect();

    let mut violations = Vec::new();
    for (inst, (cap, load)) in plan.instances.iter().zip(capacities.iter().zip(&loads)) {
        for d in 0..cap.dims() {
            if load[d] > headroom * cap[d] + CAPACITY_SLACK {
                violations.push(Violation::Capacity {
                    ordinal: inst.ordinal,
                    instance_type: inst.instance_type.clone(),
                    dimension: dimension_name(d),
                    utilization: if cap[d] > 0.0 { load[d] / cap[d] } else { f64::INFINITY },
                    limit: headroom,
                });
            }
        }
    }
    for s in &streams {
        if let Some(max) = s.profile.max_rate_fps.filter(|&max| s.rate > max) {
            violations.push(Violation::RateCap {
                stream_id: s.stream_id.clone(),
                device: device_of[s.stream_id.as_str()],
                desired_rate_fps: s.rate,
                max_rate_fps: max,
            });
        }
    }
    Ok(violations)
}

/// Synthetic monitored test run of `truth` at `rate`: each sample is the
/// true utilization plus Gaussian noise, clamped to [0, 1]. GPU kinds of a
/// cpu-only profile stay at zero.
pub fn generate_test_run(
    truth: &Profile,
    rate: f64,
    n_samples: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Vec<TestRunSample>, SimulationError> {
    if !(rate > 0.0) {
        return Err(SimulationError::BadArgument(format!("rate must be positive, got {rate}")));
    }
    if let Some(max) = truth.max_rate_fps.filter(|&max| rate > max) {
        return Err(SimulationError::AboveMaxRate { rate, max });
    }
    let bad_sd = || SimulationError::BadArgument(format!("noise_sd must be >= 0, got {noise_sd}"));
    if !(noise_sd >= 0.0) {
        return Err(bad_sd());
    }
    let noise = Normal::new(0.0, noise_sd).map_err(|_| bad_sd())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let expected = truth.demand_fraction(rate);
    let noisy_kinds: &[ResourceKind] = match truth.device {
        Device::CpuOnly => &[ResourceKind::Cpu, ResourceKind::Memory],
        Device::GpuAssisted => &ResourceKind::ALL,
    };
    Ok((0..n_samples)
        .map(|_| {
            let mut utilization = expected;
            if noise_sd > 0.0 {
                for &kind in noisy_kinds {
                    let u = utilization.get_mut(kind);
                    *u = (*u + noise.sample(&mut rng)).clamp(0.0, 1.0);
                }
            }
            TestRunSample { rate_fps: rate, utilization, duration_s: 60.0 }
        })
        .collect())
}
