//! Instance types, their capacity vectors, and catalog validation.
//!
//! Every vector in a planning problem has the same layout: CPU cores, memory
//! (GB), then one (GPU cores, GPU memory GB) pair per GPU slot, with as many
//! slots as the largest GPU count in the catalog.

use std::collections::HashSet;
use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::Cost;

pub const CPU: usize = 0;
pub const MEMORY: usize = 1;

/// Number of dimensions for a catalog whose largest instance has `n_max` GPUs.
pub const fn dims_for(n_max: usize) -> usize {
    2 + 2 * n_max
}

/// Index of the GPU-cores dimension of slot `slot`.
pub const fn gpu_cores_dim(slot: usize) -> usize {
    2 + 2 * slot
}

/// Index of the GPU-memory dimension of slot `slot`.
pub const fn gpu_memory_dim(slot: usize) -> usize {
    3 + 2 * slot
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("catalog is empty")]
    Empty,
    #[error("duplicate instance type name `{0}`")]
    DuplicateName(String),
    #[error("instance type `{name}`: {field} must be positive (got {value})")]
    NonPositive { name: String, field: &'static str, value: f64 },
    #[error("instance type `{name}` has {gpus} GPUs but the vector layout only has {n_max} slots")]
    Dimension { name: String, gpus: usize, n_max: usize },
}

/// Fixed-layout, nonnegative resource vector (demand or capacity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceVector(Vec<f64>);

impl ResourceVector {
    pub fn zeros(dims: usize) -> Self {
        ResourceVector(vec![0.0; dims])
    }

    /// Panics if any entry is negative or not finite.
    pub fn new(values: Vec<f64>) -> Self {
        assert!(
            values.iter().all(|v| v.is_finite() && *v >= 0.0),
            "resource vector entries must be finite and nonnegative: {values:?}"
        );
        ResourceVector(values)
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ResourceVector::new(self.0.iter().map(|v| v * factor).collect())
    }

    pub fn add_assign(&mut self, other: &ResourceVector) {
        debug_assert_eq!(self.dims(), other.dims());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    /// True when `self[d] <= capacity[d] + slack` in every dimension.
    pub fn fits_within(&self, capacity: &ResourceVector, slack: f64) -> bool {
        self.0.iter().zip(&capacity.0).all(|(d, c)| *d <= *c + slack)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

impl Index<usize> for ResourceVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gpu {
    pub gpu_cores: u32,
    pub gpu_memory_gb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceType {
    pub name: String,
    pub cpu_cores: u32,
    pub memory_gb: f64,
    #[serde(default)]
    pub gpus: Vec<Gpu>,
    pub hourly_cost: Cost,
}

impl InstanceType {
    pub fn has_gpus(&self) -> bool {
        !self.gpus.is_empty()
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let non_positive = |field, value: f64| CatalogError::NonPositive {
            name: self.name.clone(),
            field,
            value,
        };
        if !self.hourly_cost.is_positive() {
            return Err(non_positive("hourly_cost", self.hourly_cost.dollars()));
        }
        if self.cpu_cores == 0 {
            return Err(non_positive("cpu_cores", 0.0));
        }
        if !(self.memory_gb > 0.0 && self.memory_gb.is_finite()) {
            return Err(non_positive("memory_gb", self.memory_gb));
        }
        for gpu in &self.gpus {
            if gpu.gpu_cores == 0 {
                return Err(non_positive("gpu_cores", 0.0));
            }
            if !(gpu.gpu_memory_gb > 0.0 && gpu.gpu_memory_gb.is_finite()) {
                return Err(non_positive("gpu_memory_gb", gpu.gpu_memory_gb));
            }
        }
        Ok(())
    }
}

/// Capacity vector of `t` in the layout for `n_max` GPU slots. GPUs occupy
/// the lowest slots in declaration order.
pub fn capacity_vector(t: &InstanceType, n_max: usize) -> Result<ResourceVector, CatalogError> {
    if t.gpus.len() > n_max {
        return Err(CatalogError::Dimension {
            name: t.name.clone(),
            gpus: t.gpus.len(),
            n_max,
        });
    }
    let mut values = vec![0.0; dims_for(n_max)];
    values[CPU] = f64::from(t.cpu_cores);
    values[MEMORY] = t.memory_gb;
    for (slot, gpu) in t.gpus.iter().enumerate() {
        values[gpu_cores_dim(slot)] = f64::from(gpu.gpu_cores);
        values[gpu_memory_dim(slot)] = gpu.gpu_memory_gb;
    }
    Ok(ResourceVector::new(values))
}

/// A validated, immutable set of instance types.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    types: Vec<InstanceType>,
    n_max: usize,
}

impl Catalog {
    pub fn new(types: Vec<InstanceType>) -> Result<Self, CatalogError> {
        if types.is_empty() {
            return Err(CatalogError::Empty);
        }
        let mut seen = HashSet::new();
        for t in &types {
            if !seen.insert(t.name.as_str()) {
                return Err(CatalogError::DuplicateName(t.name.clone()));
            }
            t.validate()?;
        }
        let n_max = types.iter().map(|t| t.gpus.len()).max().unwrap_or(0);
        Ok(Catalog { types, n_max })
    }

    pub fn from_json(json: &str) -> Result<Self, CatalogError> {
        let types: Vec<InstanceType> = serde_json::from_str(json)?;
        Catalog::new(types)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.types).expect("catalog serializes")
    }

    pub fn instance_types(&self) -> &[InstanceType] {
        &self.types
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dims(&self) -> usize {
        dims_for(self.n_max)
    }

    pub fn get(&self, name: &str) -> Option<&InstanceType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn capacity(&self, t: &InstanceType) -> ResourceVector {
        capacity_vector(t, self.n_max).expect("n_max covers every catalog type")
    }
}

/// Parses and validates a catalog document.
pub fn load_catalog(json: &str) -> Result<Catalog, CatalogError> {
    Catalog::from_json(json)
}
