use crate::cost::Cost;
use crate::packing::{Item, PackingInstance};

/// Per-dimension data the bound needs, computed once per instance.
pub(super) struct BoundData {
    /// For each item, the least demand any of its choices puts on each dimension.
    min_demand: Vec<Vec<f64>>,
    /// Largest capacity per micro-dollar over bin types, per dimension.
    best_ratio: Vec<f64>,
}

impl BoundData {
    pub(super) fn new(inst: &PackingInstance) -> Self {
        let dims = inst.dims();
        let min_demand = inst.items().iter().map(|item| item_min_demand(item, dims)).collect();
        let best_ratio = (0..dims)
            .map(|d| {
                inst.bin_types()
                    .iter()
                    .map(|b| b.capacity[d] / b.cost.micros() as f64)
                    .fold(0.0, f64::max)
            })
            .collect();
        BoundData { min_demand, best_ratio }
    }

    pub(super) fn item_min_demand(&self, item: usize) -> &[f64] {
        &self.min_demand[item]
    }

    /// Lower bound, in micro-dollars, on the cost of completing a partial
    /// packing: the committed cost plus, for the worst dimension, whatever
    /// remaining demand the open bins cannot absorb priced at the best
    /// capacity-per-cost rate. Infinite when some demand has nowhere to go.
    pub(super) fn completion(&self, committed: Cost, remaining: &[f64], open_residual: &[f64]) -> f64 {
        let extra = remaining
            .iter()
            .zip(open_residual)
            .zip(&self.best_ratio)
            .map(|((need, free), ratio)| {
                let uncovered = need - free.max(0.0);
                if uncovered <= crate::packing::CAPACITY_SLACK {
                    0.0
                } else if *ratio > 0.0 {
                    uncovered / ratio
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        committed.micros() as f64 + extra
    }
}

fn item_min_demand(item: &Item, dims: usize) -> Vec<f64> {
    (0..dims)
        .map(|d| item.choices.iter().map(|c| c.demand[d]).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Admissible lower bound on the optimal cost of `inst`, rounded down to the
/// micro-dollar. Returns `None` if some dimension has demand but no bin type
/// offers capacity in it.
pub fn lower_bound(inst: &PackingInstance) -> Option<Cost> {
    let data = BoundData::new(inst);
    let mut remaining = vec![0.0; inst.dims()];
    for i in 0..inst.items().len() {
        for (r, m) in remaining.iter_mut().zip(data.item_min_demand(i)) {
            *r += m;
        }
    }
    let micros = data.completion(Cost::ZERO, &remaining, &vec![0.0; inst.dims()]);
    // Shave float noise so the bound never rises above an exact optimum.
    micros.is_finite().then(|| Cost::from_micros((micros * (1.0 - 1e-12)).floor() as i64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ResourceVector;
    use crate::packing::{BinType, Choice};

    #[test]
    fn empty_instance_bound_is_zero() {
        let inst = PackingInstance::new(4, vec![], vec![]).unwrap();
        assert_eq!(lower_bound(&inst), Some(Cost::ZERO));
    }

    #[test]
    fn half_a_bin() {
        let inst = PackingInstance::new(
            2,
            vec![BinType {
                name: "c4.2xlarge".into(),
                capacity: ResourceVector::new(vec![8.0, 15.0]),
                cost: Cost::from_millis(419),
            }],
            vec![Item {
                id: "a".into(),
                choices: vec![
                    Choice { label: "x".into(), demand: ResourceVector::new(vec![4.0, 1.0]) },
                    Choice { label: "y".into(), demand: ResourceVector::new(vec![4.0, 3.0]) },
                ],
            }],
        )
        .unwrap();
        let bound = lower_bound(&inst).unwrap();
        assert!(bound >= Cost::from_micros(209_499), "{bound}");
        assert!(bound <= Cost::from_millis(419));
    }

    #[test]
    fn open_residual_absorbs_remaining_demand() {
        let inst = PackingInstance::new(
            1,
            vec![BinType { name: "b".into(), capacity: ResourceVector::new(vec![10.0]), cost: Cost::from_millis(100) }],
            vec![],
        )
        .unwrap();
        let data = BoundData::new(&inst);
        assert_eq!(data.completion(Cost::from_millis(100), &[3.0], &[5.0]), 100_000.0);
        assert_eq!(data.completion(Cost::from_millis(100), &[8.0], &[5.0]), 130_000.0);
    }
}
