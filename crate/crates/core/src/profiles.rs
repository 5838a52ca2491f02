//! Per-program resource profiles measured from test runs.
//!
//! A profile records what fraction of a reference machine a program uses
//! when analyzing one stream at a reference frame rate, on either the CPU
//! alone or with GPU assistance. Compute demand scales linearly with the
//! frame rate; memory demand stays constant unless overridden.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{dims_for, gpu_cores_dim, gpu_memory_dim, ResourceVector, CPU, MEMORY};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("no test-run samples")]
    NoSamples,
    #[error("{what} must be positive (got {value})")]
    NonPositiveRate { what: &'static str, value: f64 },
    #[error("{kind} utilization {value} is outside [0, 1]")]
    FractionOutOfRange { kind: ResourceKind, value: f64 },
    #[error("cpu-only profile for `{0}` has nonzero GPU utilization")]
    GpuUseOnCpuProfile(String),
    #[error("a GPU slot is required for gpu-assisted profiles and forbidden for cpu-only ones")]
    SlotUsage,
    #[error("GPU slot {slot} is out of range for {n_max} slots")]
    SlotOutOfRange { slot: usize, n_max: usize },
    #[error("profile for `{0}` has no max_rate_fps")]
    MissingMaxRate(String),
    #[error("profiles describe different workloads: {0} vs {1}")]
    Mismatched(ProfileKey, ProfileKey),
    #[error("duplicate profile {0}")]
    Duplicate(ProfileKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Device {
    CpuOnly,
    GpuAssisted,
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Device::CpuOnly => "cpu-only",
            Device::GpuAssisted => "gpu-assisted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSize {
    pub w: u32,
    pub h: u32,
}

impl fmt::Display for FrameSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResourceKind {
    Cpu,
    Memory,
    Gpu,
    GpuMemory,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 4] = [
        ResourceKind::Cpu,
        ResourceKind::Memory,
        ResourceKind::Gpu,
        ResourceKind::GpuMemory,
    ];
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResourceKind::Cpu => "cpu",
            ResourceKind::Memory => "memory",
            ResourceKind::Gpu => "gpu",
            ResourceKind::GpuMemory => "gpu_memory",
        })
    }
}

/// Utilization fractions of a reference machine, one per resource kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utilization {
    pub cpu: f64,
    #[serde(default)]
    pub memory: f64,
    #[serde(default)]
    pub gpu: f64,
    #[serde(default)]
    pub gpu_memory: f64,
}

impl Utilization {
    pub fn get(&self, kind: ResourceKind) -> f64 {
        match kind {
            ResourceKind::Cpu => self.cpu,
            ResourceKind::Memory => self.memory,
            ResourceKind::Gpu => self.gpu,
            ResourceKind::GpuMemory => self.gpu_memory,
        }
    }

    pub fn get_mut(&mut self, kind: ResourceKind) -> &mut f64 {
        match kind {
            ResourceKind::Cpu => &mut self.cpu,
            ResourceKind::Memory => &mut self.memory,
            ResourceKind::Gpu => &mut self.gpu,
            ResourceKind::GpuMemory => &mut self.gpu_memory,
        }
    }

    fn check_fractions(&self) -> Result<(), ProfileError> {
        for kind in ResourceKind::ALL {
            let value = self.get(kind);
            if !(0.0..=1.0).contains(&value) {
                return Err(ProfileError::FractionOutOfRange { kind, value });
            }
        }
        Ok(())
    }

    fn uses_gpu(&self) -> bool {
        self.gpu != 0.0 || self.gpu_memory != 0.0
    }
}

/// Hardware the utilization fractions were measured on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceMachine {
    pub cpu_cores: f64,
    pub memory_gb: f64,
    #[serde(default)]
    pub gpu_cores: f64,
    #[serde(default)]
    pub gpu_memory_gb: f64,
}

impl ReferenceMachine {
    fn units(&self, kind: ResourceKind) -> f64 {
        match kind {
            ResourceKind::Cpu => self.cpu_cores,
            ResourceKind::Memory => self.memory_gb,
            ResourceKind::Gpu => self.gpu_cores,
            ResourceKind::GpuMemory => self.gpu_memory_gb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    LinearInRate,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingModes {
    #[serde(default = "linear")]
    pub cpu: Scaling,
    #[serde(default = "constant")]
    pub memory: Scaling,
    #[serde(default = "linear")]
    pub gpu: Scaling,
    #[serde(default = "constant")]
    pub gpu_memory: Scaling,
}

fn linear() -> Scaling {
    Scaling::LinearInRate
}

fn constant() -> Scaling {
    Scaling::Constant
}

impl Default for ScalingModes {
    fn default() -> Self {
        ScalingModes {
            cpu: Scaling::LinearInRate,
            memory: Scaling::Constant,
            gpu: Scaling::LinearInRate,
            gpu_memory: Scaling::Constant,
        }
    }
}

impl ScalingModes {
    pub fn get(&self, kind: ResourceKind) -> Scaling {
        match kind {
            ResourceKind::Cpu => self.cpu,
            ResourceKind::Memory => self.memory,
            ResourceKind::Gpu => self.gpu,
            ResourceKind::GpuMemory => self.gpu_memory,
        }
    }
}

/// Lookup key for a profile.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProfileKey {
    pub program: String,
    pub frame_size: FrameSize,
    pub device: Device,
}

impl fmt::Display for ProfileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}/{}", self.program, self.frame_size, self.device)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub program: String,
    pub frame_size: FrameSize,
    pub device: Device,
    pub reference_rate_fps: f64,
    pub utilization: Utilization,
    pub reference_machine: ReferenceMachine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rate_fps: Option<f64>,
    #[serde(default)]
    pub scaling: ScalingModes,
}

impl Profile {
    pub fn key(&self) -> ProfileKey {
        ProfileKey {
            program: self.program.clone(),
            frame_size: self.frame_size,
            device: self.device,
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        positive("reference_rate_fps", self.reference_rate_fps)?;
        if let Some(max) = self.max_rate_fps {
            positive("max_rate_fps", max)?;
        }
        self.utilization.check_fractions()?;
        if self.device == Device::CpuOnly && self.utilization.uses_gpu() {
            return Err(ProfileError::GpuUseOnCpuProfile(self.program.clone()));
        }
        Ok(())
    }

    /// Utilization fractions at `rate`. Values above 1 mean one reference
    /// machine is not enough.
    pub fn demand_fraction(&self, rate: f64) -> Utilization {
        let ratio = rate / self.reference_rate_fps;
        let mut out = self.utilization;
        for kind in ResourceKind::ALL {
            if self.scaling.get(kind) == Scaling::LinearInRate {
                *out.get_mut(kind) *= ratio;
            }
        }
        out
    }

    /// Absolute demand at `rate`, with GPU demand placed on `gpu_slot`.
    pub fn demand_vector(
        &self,
        rate: f64,
        n_max: usize,
        gpu_slot: Option<usize>,
    ) -> Result<ResourceVector, ProfileError> {
        match (self.device, gpu_slot) {
            (Device::CpuOnly, None) | (Device::GpuAssisted, Some(_)) => {}
            _ => return Err(ProfileError::SlotUsage),
        }
        let fractions = self.demand_fraction(rate);
        let units = |kind| fractions.get(kind) * self.reference_machine.units(kind);
        let mut values = vec![0.0; dims_for(n_max)];
        values[CPU] = units(ResourceKind::Cpu);
        values[MEMORY] = units(ResourceKind::Memory);
        if let Some(slot) = gpu_slot {
            if slot >= n_max {
                return Err(ProfileError::SlotOutOfRange { slot, n_max });
            }
            values[gpu_cores_dim(slot)] = units(ResourceKind::Gpu);
            values[gpu_memory_dim(slot)] = units(ResourceKind::GpuMemory);
        }
        Ok(ResourceVector::new(values))
    }

    /// False iff the profile has a measured rate cap below `rate`.
    pub fn rate_feasible(&self, rate: f64) -> bool {
        self.max_rate_fps.is_none_or(|max| rate <= max)
    }
}

fn positive(what: &'static str, value: f64) -> Result<(), ProfileError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ProfileError::NonPositiveRate { what, value })
    }
}

/// Ratio of the GPU-assisted rate cap to the CPU-only rate cap.
pub fn speedup(cpu: &Profile, gpu: &Profile) -> Result<f64, ProfileError> {
    if cpu.program != gpu.program || cpu.frame_size != gpu.frame_size {
        return Err(ProfileError::Mismatched(cpu.key(), gpu.key()));
    }
    let cpu_max = cpu
        .max_rate_fps
        .ok_or_else(|| ProfileError::MissingMaxRate(cpu.program.clone()))?;
    let gpu_max = gpu
        .max_rate_fps
        .ok_or_else(|| ProfileError::MissingMaxRate(gpu.program.clone()))?;
    Ok(gpu_max / cpu_max)
}

/// One monitored test run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRunSample {
    pub rate_fps: f64,
    pub utilization: Utilization,
    #[serde(default)]
    pub duration_s: f64,
}

pub fn samples_from_json(json: &str) -> Result<Vec<TestRunSample>, ProfileError> {
    Ok(serde_json::from_str(json)?)
}

/// Fits a profile to test-run samples.
///
/// Linear kinds get a least-squares slope through the origin; constant
/// kinds get the sample mean. The reference rate is the mean sample rate,
/// and the stored utilization is the fit evaluated there.
pub fn fit_profile(
    key: ProfileKey,
    samples: &[TestRunSample],
    reference_machine: ReferenceMachine,
    scaling: ScalingModes,
) -> Result<Profile, ProfileError> {
    if samples.is_empty() {
        return Err(ProfileError::NoSamples);
    }
    for s in samples {
        positive("sample rate_fps", s.rate_fps)?;
        s.utilization.check_fractions()?;
    }
    let n = samples.len() as f64;
    let mean_rate = samples.iter().map(|s| s.rate_fps).sum::<f64>() / n;
    let sum_rate_sq: f64 = samples.iter().map(|s| s.rate_fps * s.rate_fps).sum();

    let mut utilization = Utilization::default();
    for kind in ResourceKind::ALL {
        let value = match scaling.get(kind) {
            Scaling::LinearInRate => {
                let sum_cross: f64 = samples.iter().map(|s| s.rate_fps * s.utilization.get(kind)).sum();
                sum_cross / sum_rate_sq * mean_rate
            }
            Scaling::Constant => samples.iter().map(|s| s.utilization.get(kind)).sum::<f64>() / n,
        };
        *utilization.get_mut(kind) = value;
    }
    if key.device == Device::CpuOnly {
        if utilization.uses_gpu() {
            return Err(ProfileError::GpuUseOnCpuProfile(key.program));
        }
    }
    let profile = Profile {
        program: key.program,
        frame_size: key.frame_size,
        device: key.device,
        reference_rate_fps: mean_rate,
        utilization,
        reference_machine,
        max_rate_fps: None,
        scaling,
    };
    profile.validate()?;
    Ok(profile)
}

/// Read-mostly collection of profiles keyed by (program, frame size, device).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileStore {
    profiles: Vec<Profile>,
}

impl ProfileStore {
    pub fn new(profiles: Vec<Profile>) -> Result<Self, ProfileError> {
        let mut store = ProfileStore::default();
        for p in profiles {
            if store.get(&p.key()).is_some() {
                return Err(ProfileError::Duplicate(p.key()));
            }
            p.validate()?;
            store.profiles.push(p);
        }
        Ok(store)
    }

    pub fn from_json(json: &str) -> Result<Self, ProfileError> {
        ProfileStore::new(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.profiles).expect("profiles serialize")
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn get(&self, key: &ProfileKey) -> Option<&Profile> {
        self.profiles.iter().find(|p| p.key() == *key)
    }

    pub fn lookup(&self, program: &str, frame_size: FrameSize, device: Device) -> Option<&Profile> {
        self.profiles
            .iter()
            .find(|p| p.program == program && p.frame_size == frame_size && p.device == device)
    }

    /// Inserts or replaces the profile with the same key.
    pub fn upsert(&mut self, profile: Profile) -> Result<(), ProfileError> {
        profile.validate()?;
        match self.profiles.iter_mut().find(|p| p.key() == profile.key()) {
            Some(slot) => *slot = profile,
            None => self.profiles.push(profile),
        }
        Ok(())
    }
}
