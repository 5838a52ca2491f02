//! Multiple-choice vector bin packing instances and solutions.
//!
//! Bins come in types, each with a capacity vector and a cost; any number of
//! bins of a type may be opened. Every item must be placed in exactly one
//! bin using exactly one of its candidate demand vectors.

use thiserror::Error;

use crate::catalog::ResourceVector;
use crate::cost::Cost;

/// Absolute slack, in resource units, allowed on every capacity comparison.
pub const CAPACITY_SLACK: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension { expected: usize, got: usize, context: String },
    #[error("item `{0}` has no choices")]
    NoChoices(String),
    #[error("bin type `{0}` must have a positive cost")]
    NonPositiveCost(String),
    #[error("interchangeable blocks must be disjoint, equally sized, and in range")]
    BadBlocks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinType {
    pub name: String,
    pub capacity: ResourceVector,
    pub cost: Cost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub label: String,
    pub demand: ResourceVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub choices: Vec<Choice>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingInstance {
    dims: usize,
    bin_types: Vec<BinType>,
    items: Vec<Item>,
    /// Groups of dimensions that may be permuted as whole blocks without
    /// changing the problem (identical GPU slots). Empty when unknown.
    blocks: Vec<Vec<usize>>,
}

impl PackingInstance {
    pub fn new(dims: usize, bin_types: Vec<BinType>, items: Vec<Item>) -> Result<Self, InstanceError> {
        let check = |v: &ResourceVector, context: String| {
            if v.dims() == dims {
                Ok(())
            } else {
                Err(InstanceError::Dimension { expected: dims, got: v.dims(), context })
            }
        };
        for b in &bin_types {
            check(&b.capacity, format!("bin type {}", b.name))?;
            if !b.cost.is_positive() {
                return Err(InstanceError::NonPositiveCost(b.name.clone()));
            }
        }
        for item in &items {
            if item.choices.is_empty() {
                return Err(InstanceError::NoChoices(item.id.clone()));
            }
            for c in &item.choices {
                check(&c.demand, format!("item {} choice {}", item.id, c.label))?;
            }
        }
        Ok(PackingInstance { dims, bin_types, items, blocks: Vec::new() })
    }

    /// Declares interchangeable dimension blocks. The declaration is kept
    /// only if every item's choice set is closed under swapping any two
    /// blocks; otherwise it is silently dropped and no slot symmetry is used.
    pub fn with_interchangeable_blocks(mut self, blocks: Vec<Vec<usize>>) -> Result<Self, InstanceError> {
        let width = blocks.first().map_or(0, Vec::len);
        let mut seen = vec![false; self.dims];
        for block in &blocks {
            if block.len() != width {
                return Err(InstanceError::BadBlocks);
            }
            for &d in block {
                if d >= self.dims || seen[d] {
                    return Err(InstanceError::BadBlocks);
                }
                seen[d] = true;
            }
        }
        self.blocks = blocks;
        if !self.choices_closed_under_block_swaps() {
            self.blocks.clear();
        }
        Ok(self)
    }

    fn choices_closed_under_block_swaps(&self) -> bool {
        let n = self.blocks.len();
        self.items.iter().all(|item| {
            item.choices.iter().all(|c| {
                (0..n).all(|a| {
                    (a + 1..n).all(|b| {
                        let swapped = self.swap_blocks(c.demand.as_slice(), a, b);
                        item.choices.iter().any(|o| o.demand.as_slice() == swapped.as_slice())
                    })
                })
            })
        })
    }

    fn swap_blocks(&self, values: &[f64], a: usize, b: usize) -> Vec<f64> {
        let mut out = values.to_vec();
        for (&da, &db) in self.blocks[a].iter().zip(&self.blocks[b]) {
            out.swap(da, db);
        }
        out
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn bin_types(&self) -> &[BinType] {
        &self.bin_types
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Cheapest bin type (lowest index on ties) whose empty capacity holds `demand`.
    pub fn cheapest_fitting_type(&self, demand: &ResourceVector) -> Option<usize> {
        self.bin_types
            .iter()
            .enumerate()
            .filter(|(_, b)| demand.fits_within(&b.capacity, CAPACITY_SLACK))
            .min_by_key(|(i, b)| (b.cost, *i))
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Placement {
    pub bin: usize,
    pub choice: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Bin type index for each opened bin, indexed by bin ordinal.
    pub bins: Vec<usize>,
    /// Placement of each item, indexed like `PackingInstance::items`.
    pub placement: Vec<Placement>,
    pub total_cost: Cost,
    /// True when the cost is proven minimal.
    pub optimal: bool,
    /// Search nodes expanded; zero for non-search methods.
    pub nodes: u64,
}

impl Solution {
    pub fn empty() -> Self {
        Solution { bins: Vec::new(), placement: Vec::new(), total_cost: Cost::ZERO, optimal: true, nodes: 0 }
    }
}

/// Checks every solution invariant against `inst`: one valid placement per
/// item, no bin over capacity beyond [`CAPACITY_SLACK`], no empty bins, and
/// a total cost equal to the opened bins' costs.
pub fn verify(inst: &PackingInstance, sol: &Solution) -> bool {
    if sol.placement.len() != inst.items().len() {
        return false;
    }
    if sol.bins.iter().any(|&t| t >= inst.bin_types().len()) {
        return false;
    }
    let mut loads = vec![ResourceVector::zeros(inst.dims()); sol.bins.len()];
    let mut used = vec![false; sol.bins.len()];
    for (item, p) in inst.items().iter().zip(&sol.placement) {
        let (Some(load), Some(choice)) = (loads.get_mut(p.bin), item.choices.get(p.choice)) else {
            return false;
        };
        load.add_assign(&choice.demand);
        used[p.bin] = true;
    }
    let within = loads
        .iter()
        .zip(&sol.bins)
        .all(|(load, &t)| load.fits_within(&inst.bin_types()[t].capacity, CAPACITY_SLACK));
    let cost: Cost = sol.bins.iter().map(|&t| inst.bin_types()[t].cost).sum();
    within && used.iter().all(|u| *u) && cost == sol.total_cost
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> ResourceVector {
        ResourceVector::new(values.to_vec())
    }

    fn toy() -> PackingInstance {
        PackingInstance::new(
            2,
            vec![BinType { name: "b".into(), capacity: v(&[1.0, 1.0]), cost: Cost::from_millis(100) }],
            vec![
                Item { id: "a".into(), choices: vec![Choice { label: "x".into(), demand: v(&[0.5, 0.2]) }] },
                Item { id: "b".into(), choices: vec![Choice { label: "x".into(), demand: v(&[0.5, 0.2]) }] },
            ],
        )
        .unwrap()
    }

    fn one_bin() -> Solution {
        Solution {
            bins: vec![0],
            placement: vec![Placement { bin: 0, choice: 0 }, Placement { bin: 0, choice: 0 }],
            total_cost: Cost::from_millis(100),
            optimal: false,
            nodes: 0,
        }
    }

    #[test]
    fn accepts_a_feasible_solution() {
        assert!(verify(&toy(), &one_bin()));
    }

    #[test]
    fn rejects_duplicated_or_missing_items() {
        let mut sol = one_bin();
        sol.placement.push(Placement { bin: 0, choice: 0 });
        assert!(!verify(&toy(), &sol));
        sol.placement.truncate(1);
        assert!(!verify(&toy(), &sol));
    }

    #[test]
    fn rejects_overfill_beyond_slack() {
        let mut inst = toy();
        inst.items[1].choices[0].demand = v(&[0.5 + 2.0 * CAPACITY_SLACK + 1e-9, 0.2]);
        assert!(!verify(&inst, &one_bin()));
        inst.items[1].choices[0].demand = v(&[0.5 + CAPACITY_SLACK * 0.5, 0.2]);
        assert!(verify(&inst, &one_bin()));
    }

    #[test]
    fn rejects_wrong_cost_and_empty_bins() {
        let mut sol = one_bin();
        sol.total_cost = Cost::from_millis(99);
        assert!(!verify(&toy(), &sol));
        let mut sol = one_bin();
        sol.bins.push(0);
        sol.total_cost = Cost::from_millis(200);
        assert!(!verify(&toy(), &sol));
    }

    #[test]
    fn construction_errors() {
        let err = PackingInstance::new(
            2,
            vec![],
            vec![Item { id: "a".into(), choices: vec![] }],
        )
        .unwrap_err();
        assert_eq!(err, InstanceError::NoChoices("a".into()));
        let err = PackingInstance::new(
            3,
            vec![BinType { name: "b".into(), capacity: v(&[1.0, 1.0]), cost: Cost::from_millis(1) }],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, InstanceError::Dimension { expected: 3, got: 2, .. }));
    }

    #[test]
    fn blocks_dropped_when_choices_not_closed() {
        let inst = PackingInstance::new(
            4,
            vec![],
            vec![Item {
                id: "a".into(),
                choices: vec![Choice { label: "g0".into(), demand: v(&[0.0, 0.0, 1.0, 1.0]) }],
            }],
        )
        .unwrap()
        .with_interchangeable_blocks(vec![vec![0, 1], vec![2, 3]])
        .unwrap();
        assert!(inst.blocks().is_empty());
    }
}
