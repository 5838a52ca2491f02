//! Turns a camera workload into a packing instance and packing solutions
//! back into deployment plans.
//!
//! Each stream becomes one item per replica. Its choices are running on the
//! CPU (when a cpu-only profile exists and its rate cap allows the desired
//! rate) or on any one GPU slot (likewise for the gpu-assisted profile).
//! Bin capacities are the raw instance capacities scaled by the headroom.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{gpu_cores_dim, gpu_memory_dim, Catalog, InstanceType};
use crate::cost::Cost;
use crate::packing::{self, BinType, Choice, InstanceError, Item, PackingInstance, Solution, CAPACITY_SLACK};
use crate::profiles::{Device, FrameSize, ProfileStore};
use crate::solver::{solve_exact, SolveError, SolverLimits};

/// Fraction of raw capacity the planner lets itself use.
pub const DEFAULT_HEADROOM: f64 = 0.9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("workload parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("stream `{stream}`: {problem}")]
    BadStream { stream: String, problem: String },
    #[error("duplicate stream id `{0}`")]
    DuplicateStream(String),
    #[error("headroom must be in (0, 1], got {0}")]
    Headroom(f64),
    #[error("strategy {0} allows no instance type in the catalog")]
    NoAllowedTypes(Strategy),
    #[error("no profile for program `{program}` at {frame_size}")]
    MissingProfile { program: String, frame_size: FrameSize },
    #[error("no feasible choice for stream `{stream}`: {}", reasons.join("; "))]
    NoFeasibleChoice { stream: String, reasons: Vec<String> },
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("solution violates the packing contract")]
    InfeasibleSolution,
}

impl ModelError {
    /// True for errors meaning "this workload cannot be served", as opposed
    /// to malformed input.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            ModelError::NoFeasibleChoice { .. } | ModelError::Solve(SolveError::Infeasible(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamRequest {
    pub stream_id: String,
    pub program: String,
    pub frame_size: FrameSize,
    pub desired_rate_fps: f64,
    #[serde(default = "one")]
    pub replicas: u32,
}

fn one() -> u32 {
    1
}

pub type Workload = Vec<StreamRequest>;

pub fn workload_from_json(json: &str) -> Result<Workload, ModelError> {
    let workload: Workload = serde_json::from_str(json)?;
    validate_workload(&workload)?;
    Ok(workload)
}

pub fn validate_workload(workload: &[StreamRequest]) -> Result<(), ModelError> {
    let mut ids = HashSet::new();
    for s in workload {
        if !(s.desired_rate_fps > 0.0 && s.desired_rate_fps.is_finite()) {
            return Err(ModelError::BadStream {
                stream: s.stream_id.clone(),
                problem: format!("desired_rate_fps must be positive, got {}", s.desired_rate_fps),
            });
        }
        if s.replicas == 0 {
            return Err(ModelError::BadStream { stream: s.stream_id.clone(), problem: "replicas must be >= 1".into() });
        }
    }
    for (id, _) in expand_streams(workload) {
        if !ids.insert(id.clone()) {
            return Err(ModelError::DuplicateStream(id));
        }
    }
    Ok(())
}

/// One `(stream id, request)` pair per analyzed stream. Replicated requests
/// get ids `<stream_id>#<k>` for k = 1..=replicas.
pub fn expand_streams(workload: &[StreamRequest]) -> Vec<(String, &StreamRequest)> {
    workload
        .iter()
        .flat_map(|s| {
            (1..=s.replicas).map(move |k| {
                let id = if s.replicas == 1 { s.stream_id.clone() } else { format!("{}#{k}", s.stream_id) };
                (id, s)
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Non-GPU instances only.
    St1,
    /// GPU instances only.
    St2,
    /// Every instance type.
    St3,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::St1, Strategy::St2, Strategy::St3];

    pub fn allows(self, t: &InstanceType) -> bool {
        match self {
            Strategy::St1 => !t.has_gpus(),
            Strategy::St2 => t.has_gpus(),
            Strategy::St3 => true,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::St1 => "ST1",
            Strategy::St2 => "ST2",
            Strategy::St3 => "ST3",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "st1" => Ok(Strategy::St1),
            "st2" => Ok(Strategy::St2),
            "st3" => Ok(Strategy::St3),
            other => Err(format!("unknown strategy `{other}` (expected st1, st2 or st3)")),
        }
    }
}

/// Where a stream runs on its instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Processor {
    Cpu,
    GpuSlot(usize),
}

impl Processor {
    pub fn device(self) -> Device {
        match self {
            Processor::Cpu => Device::CpuOnly,
            Processor::GpuSlot(_) => Device::GpuAssisted,
        }
    }

    pub fn slot(self) -> Option<usize> {
        match self {
            Processor::Cpu => None,
            Processor::GpuSlot(g) => Some(g),
        }
    }
}

impl fmt::Display for Processor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Processor::Cpu => f.write_str("cpu"),
            Processor::GpuSlot(g) => write!(f, "gpu{g}"),
        }
    }
}

impl FromStr for Processor {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "cpu" {
            return Ok(Processor::Cpu);
        }
        s.strip_prefix("gpu")
            .and_then(|n| n.parse().ok())
            .map(Processor::GpuSlot)
            .ok_or_else(|| format!("bad device `{s}` (expected cpu or gpu<N>)"))
    }
}

impl Serialize for Processor {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Processor {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A packing instance plus what is needed to map its solutions back.
#[derive(Debug, Clone)]
pub struct PlanningProblem {
    pub packing: PackingInstance,
    /// Catalog index of each bin type.
    pub bin_type_catalog_index: Vec<usize>,
    /// Stream id of each item.
    pub item_streams: Vec<String>,
    /// Processor of each choice of each item.
    pub item_processors: Vec<Vec<Processor>>,
    pub headroom: f64,
}

/// Builds the packing instance for `workload` under `strategy`.
pub fn build_instance(
    workload: &[StreamRequest],
    catalog: &Catalog,
    profiles: &ProfileStore,
    strategy: Strategy,
    headroom: f64,
) -> Result<PlanningProblem, ModelError> {
    if !(headroom > 0.0 && headroom <= 1.0) {
        return Err(ModelError::Headroom(headroom));
    }
    validate_workload(workload)?;
    let n_max = catalog.n_max();
    let dims = catalog.dims();

    let allowed: Vec<usize> = catalog
        .instance_types()
        .iter()
        .enumerate()
        .filter(|(_, t)| strategy.allows(t))
        .map(|(i, _)| i)
        .collect();
    if allowed.is_empty() {
        return Err(ModelError::NoAllowedTypes(strategy));
    }
    let bin_types: Vec<BinType> = allowed
        .iter()
        .map(|&i| {
            let t = &catalog.instance_types()[i];
            BinType { name: t.name.clone(), capacity: catalog.capacity(t).scaled(headroom), cost: t.hourly_cost }
        })
        .collect();
    let fits_some_bin = |demand: &crate::catalog::ResourceVector| {
        bin_types.iter().any(|b| demand.fits_within(&b.capacity, CAPACITY_SLACK))
    };

    let mut items = Vec::new();
    let mut item_streams = Vec::new();
    let mut item_processors = Vec::new();
    for (stream_id, req) in expand_streams(workload) {
        let rate = req.desired_rate_fps;
        let cpu = profiles.lookup(&req.program, req.frame_size, Device::CpuOnly);
        let gpu = profiles.lookup(&req.program, req.frame_size, Device::GpuAssisted);
        if cpu.is_none() && gpu.is_none() {
            return Err(ModelError::MissingProfile { program: req.program.clone(), frame_size: req.frame_size });
        }

        let mut choices = Vec::new();
        let mut processors = Vec::new();
        let mut reasons = Vec::new();
        if let Some(p) = cpu {
            if !p.rate_feasible(rate) {
                reasons.push(format!(
                    "{} desired {rate:.2} FPS > cpu max {:.2}",
                    req.program,
                    p.max_rate_fps.unwrap_or_default()
                ));
            } else {
                let demand = p.demand_vector(rate, n_max, None).expect("cpu-only profile without slot");
                if fits_some_bin(&demand) {
                    choices.push(Choice { label: Processor::Cpu.to_string(), demand });
                    processors.push(Processor::Cpu);
                } else {
                    reasons.push(format!("{} cpu demand {demand} fits no allowed instance type", req.program));
                }
            }
        }
        if let Some(p) = gpu {
            if !p.rate_feasible(rate) {
                reasons.push(format!(
                    "{} desired {rate:.2} FPS > gpu max {:.2}",
                    req.program,
                    p.max_rate_fps.unwrap_or_default()
                ));
            } else {
                let mut any_fit = false;
                for slot in 0..n_max {
                    let demand = p.demand_vector(rate, n_max, Some(slot)).expect("slot below n_max");
                    if fits_some_bin(&demand) {
                        any_fit = true;
                        choices.push(Choice { label: Processor::GpuSlot(slot).to_string(), demand });
                        processors.push(Processor::GpuSlot(slot));
                    }
                }
                if !any_fit {
                    reasons.push(format!("{} gpu demand fits no allowed instance type", req.program));
                }
            }
        }
        if choices.is_empty() {
            return Err(ModelError::NoFeasibleChoice { stream: stream_id, reasons });
        }
        items.push(Item { id: stream_id.clone(), choices });
        item_streams.push(stream_id);
        item_processors.push(processors);
    }

    let slots_in_use = allowed.iter().map(|&i| catalog.instance_types()[i].gpus.len()).max().unwrap_or(0);
    let blocks = (0..slots_in_use).map(|g| vec![gpu_cores_dim(g), gpu_memory_dim(g)]).collect();
    let packing = PackingInstance::new(dims, bin_types, items)?.with_interchangeable_blocks(blocks)?;
    Ok(PlanningProblem {
        packing,
        bin_type_catalog_index: allowed,
        item_streams,
        item_processors,
        headroom,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannedInstance {
    #[serde(rename = "type")]
    pub instance_type: String,
    pub ordinal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub stream_id: String,
    pub instance: usize,
    pub device: Processor,
}

/// Instances to open, where each stream runs, and the hourly bill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Plan {
    pub instances: Vec<PlannedInstance>,
    pub assignments: Vec<Assignment>,
    pub hourly_cost: Cost,
}

impl Plan {
    pub fn empty() -> Self {
        Plan { instances: Vec::new(), assignments: Vec::new(), hourly_cost: Cost::ZERO }
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    /// Instance counts by type name, in name order.
    pub fn instance_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for i in &self.instances {
            *counts.entry(i.instance_type.as_str()).or_default() += 1;
        }
        counts
    }

    /// (non-GPU, GPU) instance counts.
    pub fn gpu_split(&self, catalog: &Catalog) -> (usize, usize) {
        self.instances.iter().fold((0, 0), |(cpu, gpu), i| {
            match catalog.get(&i.instance_type).is_some_and(InstanceType::has_gpus) {
                true => (cpu, gpu + 1),
                false => (cpu + 1, gpu),
            }
        })
    }

    /// Structural checks against the catalog: known types, ordinals 0..n,
    /// each stream once, GPU slots present, and cost = sum of instance costs.
    pub fn check_structure(&self, catalog: &Catalog) -> Result<(), String> {
        let mut types = Vec::with_capacity(self.instances.len());
        for (k, inst) in self.instances.iter().enumerate() {
            if inst.ordinal != k {
                return Err(format!("instance ordinals must be 0..{} in order", self.instances.len()));
            }
            let t = catalog
                .get(&inst.instance_type)
                .ok_or_else(|| format!("unknown instance type `{}`", inst.instance_type))?;
            types.push(t);
        }
        let mut seen = HashSet::new();
        for a in &self.assignments {
            if !seen.insert(a.stream_id.as_str()) {
                return Err(format!("stream `{}` assigned more than once", a.stream_id));
            }
            let t = types
                .get(a.instance)
                .ok_or_else(|| format!("stream `{}` assigned to missing instance {}", a.stream_id, a.instance))?;
            if let Processor::GpuSlot(g) = a.device {
                if g >= t.gpus.len() {
                    return Err(format!("stream `{}` uses gpu{g} but {} has {} GPUs", a.stream_id, t.name, t.gpus.len()));
                }
            }
        }
        let cost: Cost = types.iter().map(|t| t.hourly_cost).sum();
        if cost != self.hourly_cost {
            return Err(format!("hourly_cost {} does not match instance total {cost}", self.hourly_cost));
        }
        Ok(())
    }
}

/// Maps a verified packing solution to a plan. Instances are ordered by type
/// name, then by the order the solver opened them.
pub fn solution_to_plan(problem: &PlanningProblem, catalog: &Catalog, solution: &Solution) -> Result<Plan, ModelError> {
    if !packing::verify(&problem.packing, solution) {
        return Err(ModelError::InfeasibleSolution);
    }
    let name_of = |bin: usize| &catalog.instance_types()[problem.bin_type_catalog_index[solution.bins[bin]]].name;
    let mut by_name: Vec<usize> = (0..solution.bins.len()).collect();
    by_name.sort_by(|&a, &b| name_of(a).cmp(name_of(b)).then(a.cmp(&b)));
    let mut ordinal_of = vec![0; solution.bins.len()];
    for (ordinal, &bin) in by_name.iter().enumerate() {
        ordinal_of[bin] = ordinal;
    }
    let instances = by_name
        .iter()
        .enumerate()
        .map(|(ordinal, &bin)| PlannedInstance { instance_type: name_of(bin).clone(), ordinal })
        .collect();
    let assignments = solution
        .placement
        .iter()
        .enumerate()
        .map(|(i, p)| Assignment {
            stream_id: problem.item_streams[i].clone(),
            instance: ordinal_of[p.bin],
            device: problem.item_processors[i][p.choice],
        })
        .collect();
    Ok(Plan { instances, assignments, hourly_cost: solution.total_cost })
}

/// Builds, solves exactly, and converts to a plan.
pub fn plan(
    workload: &[StreamRequest],
    catalog: &Catalog,
    profiles: &ProfileStore,
    strategy: Strategy,
    headroom: f64,
    limits: &SolverLimits,
) -> Result<Plan, ModelError> {
    let problem = build_instance(workload, catalog, profiles, strategy, headroom)?;
    let solution = solve_exact(&problem.packing, limits)?;
    solution_to_plan(&problem, catalog, &solution)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRow {
    pub strategy: Strategy,
    pub outcome: Result<Plan, String>,
    /// Whole-percent saving against the most expensive feasible strategy.
    pub savings_pct: Option<u32>,
}

impl StrategyRow {
    pub fn hourly_cost(&self) -> Option<Cost> {
        self.outcome.as_ref().ok().map(|p| p.hourly_cost)
    }
}

/// `1 - cost / worst`, in whole percent rounded half up.
pub fn savings_percent(cost: Cost, worst: Cost) -> u32 {
    let (cost, worst) = (cost.micros() as i128, worst.micros() as i128);
    if worst <= 0 {
        return 0;
    }
    ((200 * (worst - cost) + worst) / (2 * worst)) as u32
}

/// Plans the workload under every strategy. Infeasible strategies become
/// failure rows; malformed input is still an error.
pub fn compare_strategies(
    workload: &[StreamRequest],
    catalog: &Catalog,
    profiles: &ProfileStore,
    headroom: f64,
    limits: &SolverLimits,
) -> Result<Vec<StrategyRow>, ModelError> {
    let mut rows = Vec::new();
    for strategy in Strategy::ALL {
        let outcome = match plan(workload, catalog, profiles, strategy, headroom, limits) {
            Ok(p) => Ok(p),
            Err(e) if e.is_infeasibility() || matches!(e, ModelError::NoAllowedTypes(_)) => Err(e.to_string()),
            Err(e) => return Err(e),
        };
        rows.push(StrategyRow { strategy, outcome, savings_pct: None });
    }
    let worst = rows.iter().filter_map(StrategyRow::hourly_cost).max();
    if let Some(worst) = worst {
        for row in &mut rows {
            row.savings_pct = row.hourly_cost().map(|c| savings_percent(c, worst));
        }
    }
    Ok(rows)
}
