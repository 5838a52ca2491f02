//! Seeded random packing instances for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::ResourceVector;
use crate::cost::Cost;
use crate::packing::{BinType, Choice, Item, PackingInstance};

/// Shape limits for [`random_instance`].
#[derive(Debug, Clone, Copy)]
pub struct RandomShape {
    pub max_items: usize,
    pub max_choices: usize,
    pub max_bin_types: usize,
    pub max_dims: usize,
}

impl RandomShape {
    /// At most 4 items, 2 choices, 2 bin types, 4 dimensions.
    pub const SMALL: RandomShape = RandomShape { max_items: 4, max_choices: 2, max_bin_types: 2, max_dims: 4 };
}

/// Random instance in which every choice fits at least one bin type.
/// Roughly a third of the items repeat the previous item exactly.
pub fn random_instance(seed: u64, shape: RandomShape) -> PackingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = rng.random_range(1..=shape.max_dims);
    let bin_types: Vec<BinType> = (0..rng.random_range(1..=shape.max_bin_types))
        .map(|t| BinType {
            name: format!("bin{t}"),
            capacity: ResourceVector::new((0..dims).map(|_| rng.random_range(4.0..10.0)).collect()),
            cost: Cost::from_millis(rng.random_range(100..1000)),
        })
        .collect();

    let n_items = rng.random_range(1..=shape.max_items);
    let mut items: Vec<Item> = Vec::with_capacity(n_items);
    for i in 0..n_items {
        if i > 0 && rng.random_bool(0.3) {
            let prev = items[i - 1].clone();
            items.push(Item { id: format!("item{i}"), ..prev });
            continue;
        }
        let choices = (0..rng.random_range(1..=shape.max_choices))
            .map(|k| {
                let host = &bin_types[rng.random_range(0..bin_types.len())].capacity;
                let demand = (0..dims).map(|d| host[d] * rng.random_range(0.0..0.8)).collect();
                Choice { label: format!("c{k}"), demand: ResourceVector::new(demand) }
            })
            .collect();
        items.push(Item { id: format!("item{i}"), choices });
    }
    PackingInstance::new(dims, bin_types, items).expect("generated instance is well formed")
}

/// Random CPU/GPU-style instance: dimensions are CPU, memory, then
/// `slots` (GPU cores, GPU memory) pairs. Bin types carry 0..=`slots` GPUs;
/// each item may run on the CPU or on any GPU slot, so the GPU slots are
/// declared interchangeable.
pub fn random_gpu_instance(seed: u64, max_items: usize, slots: usize) -> PackingInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = 2 + 2 * slots;
    let bin_types: Vec<BinType> = (0..=slots)
        .map(|gpus| {
            let scale = gpus.max(1) as f64;
            let mut cap = vec![0.0; dims];
            cap[0] = 8.0 * scale;
            cap[1] = 15.0 * scale;
            for g in 0..gpus {
                cap[2 + 2 * g] = 1536.0;
                cap[3 + 2 * g] = 4.0;
            }
            let base = if gpus == 0 { 419 } else { 650 * gpus as i64 };
            BinType {
                name: format!("type{gpus}"),
                capacity: ResourceVector::new(cap).scaled(0.9),
                cost: Cost::from_millis(base + rng.random_range(-50..50)),
            }
        })
        .collect();

    let n_items = rng.random_range(1..=max_items);
    let mut items: Vec<Item> = Vec::with_capacity(n_items);
    for i in 0..n_items {
        if i > 0 && rng.random_bool(0.4) {
            let prev = items[i - 1].clone();
            items.push(Item { id: format!("s{i}"), ..prev });
            continue;
        }
        let cpu_cores = rng.random_range(0.5..7.0);
        let gpu_cpu = cpu_cores * rng.random_range(0.05..0.5);
        let gpu_cores = rng.random_range(50.0..1300.0);
        let memory = rng.random_range(0.0..3.0);
        let mut choices = Vec::new();
        if rng.random_bool(0.8) {
            let mut d = vec![0.0; dims];
            d[0] = cpu_cores;
            d[1] = memory;
            choices.push(Choice { label: "cpu".into(), demand: ResourceVector::new(d) });
        }
        for g in 0..slots {
            let mut d = vec![0.0; dims];
            d[0] = gpu_cpu;
            d[1] = memory;
            d[2 + 2 * g] = gpu_cores;
            d[3 + 2 * g] = 0.5;
            choices.push(Choice { label: format!("gpu{g}"), demand: ResourceVector::new(d) });
        }
        items.push(Item { id: format!("s{i}"), choices });
    }
    let blocks = (0..slots).map(|g| vec![2 + 2 * g, 3 + 2 * g]).collect();
    PackingInstance::new(dims, bin_types, items)
        .and_then(|inst| inst.with_interchangeable_blocks(blocks))
        .expect("generated instance is well formed")
}
