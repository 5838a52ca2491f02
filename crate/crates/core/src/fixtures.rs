//! Bundled reference data: EC2 instance types, VGG-16/ZF profiles at
//! 640x480, the three comparison scenarios, and single test-run samples.
//!
//! `EXPERIMENT_CATALOG` is the two-type subset (c4.2xlarge, g2.2xlarge)
//! the scenario comparison is priced against.

use crate::catalog::Catalog;
use crate::model::{workload_from_json, Workload};
use crate::profiles::{samples_from_json, ProfileStore, TestRunSample};

pub const EC2_CATALOG: &str = include_str!("../fixtures/catalog_ec2.json");
pub const EXPERIMENT_CATALOG: &str = include_str!("../fixtures/catalog_experiment.json");
pub const PROFILES: &str = include_str!("../fixtures/profiles_640x480.json");
pub const SCENARIOS: [&str; 3] = [
    include_str!("../fixtures/scenario1.json"),
    include_str!("../fixtures/scenario2.json"),
    include_str!("../fixtures/scenario3.json"),
];
pub const SAMPLES_VGG16_CPU: &str = include_str!("../fixtures/samples_vgg16_cpu.json");
pub const SAMPLES_VGG16_GPU: &str = include_str!("../fixtures/samples_vgg16_gpu.json");
pub const SAMPLES_ZF_CPU: &str = include_str!("../fixtures/samples_zf_cpu.json");
pub const SAMPLES_ZF_GPU: &str = include_str!("../fixtures/samples_zf_gpu.json");

pub fn ec2_catalog() -> Catalog {
    Catalog::from_json(EC2_CATALOG).expect("bundled catalog is valid")
}

pub fn experiment_catalog() -> Catalog {
    Catalog::from_json(EXPERIMENT_CATALOG).expect("bundled catalog is valid")
}

pub fn profiles() -> ProfileStore {
    ProfileStore::from_json(PROFILES).expect("bundled profiles are valid")
}

/// Scenario `n` (1-based).
pub fn scenario(n: usize) -> Workload {
    workload_from_json(SCENARIOS[n - 1]).expect("bundled scenario is valid")
}

pub fn samples(json: &str) -> Vec<TestRunSample> {
    samples_from_json(json).expect("bundled samples are valid")
}
