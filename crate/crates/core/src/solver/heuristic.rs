use crate::catalog::ResourceVector;
use crate::cost::Cost;
use crate::packing::{PackingInstance, Placement, Solution, CAPACITY_SLACK};

use super::{checked, SolveError};

/// Largest `demand[d] / capacity[d]` over dimensions with nonzero capacity.
pub(super) fn load_fraction(demand: &ResourceVector, capacity: &ResourceVector) -> f64 {
    demand
        .as_slice()
        .iter()
        .zip(capacity.as_slice())
        .filter(|(_, c)| **c > 0.0)
        .map(|(d, c)| d / c)
        .fold(0.0, f64::max)
}

/// Item order shared by the heuristic and the exact search: descending size,
/// where an item's size is its largest choice measured against the cheapest
/// bin type that holds that choice. Identical items stay adjacent.
pub(super) fn item_order(inst: &PackingInstance) -> Result<Vec<usize>, SolveError> {
    let mut sizes = Vec::with_capacity(inst.items().len());
    for item in inst.items() {
        let size = item
            .choices
            .iter()
            .filter_map(|c| {
                inst.cheapest_fitting_type(&c.demand)
                    .map(|t| load_fraction(&c.demand, &inst.bin_types()[t].capacity))
            })
            .reduce(f64::max)
            .ok_or_else(|| SolveError::Infeasible(item.id.clone()))?;
        sizes.push(size);
    }
    let class = identical_classes(inst);
    let mut order: Vec<usize> = (0..inst.items().len()).collect();
    order.sort_by(|&a, &b| {
        sizes[b]
            .total_cmp(&sizes[a])
            .then(class[a].cmp(&class[b]))
            .then(a.cmp(&b))
    });
    Ok(order)
}

/// For each item, the index of the first item with exactly the same choices.
pub(super) fn identical_classes(inst: &PackingInstance) -> Vec<usize> {
    let items = inst.items();
    (0..items.len())
        .map(|i| {
            (0..i)
                .find(|&j| {
                    items[j].choices.len() == items[i].choices.len()
                        && items[j]
                            .choices
                            .iter()
                            .zip(&items[i].choices)
                            .all(|(a, b)| a.demand == b.demand)
                })
                .unwrap_or(i)
        })
        .collect()
}

/// Multiple-choice best-fit decreasing.
///
/// Items are taken in [`item_order`]. Each goes into an already open bin
/// when any of its choices fits one, picking per bin the lightest choice and
/// then the bin left tightest. Otherwise a new bin is opened, picking the
/// (type, choice) pair that spends the least cost on the capacity it takes.
pub fn solve_heuristic(inst: &PackingInstance) -> Result<Solution, SolveError> {
    let order = item_order(inst)?;
    let types = inst.bin_types();
    let mut bins: Vec<usize> = Vec::new();
    let mut residual: Vec<Vec<f64>> = Vec::new();
    let mut placement = vec![Placement { bin: 0, choice: 0 }; inst.items().len()];

    for &i in &order {
        let item = &inst.items()[i];
        let mut best: Option<(f64, Placement)> = None;
        for (b, res) in residual.iter().enumerate() {
            let cap = &types[bins[b]].capacity;
            let lightest = item
                .choices
                .iter()
                .enumerate()
                .filter(|(_, c)| fits(&c.demand, res))
                .map(|(k, c)| (load_fraction(&c.demand, cap), k))
                .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            if let Some((_, k)) = lightest {
                let slack = normalized_slack_after(res, &item.choices[k].demand, cap);
                if best.as_ref().is_none_or(|(s, _)| slack < *s) {
                    best = Some((slack, Placement { bin: b, choice: k }));
                }
            }
        }
        let p = match best {
            Some((_, p)) => p,
            None => {
                let (t, k) = cheapest_new_bin(inst, i).ok_or_else(|| SolveError::Infeasible(item.id.clone()))?;
                bins.push(t);
                residual.push(types[t].capacity.as_slice().to_vec());
                Placement { bin: bins.len() - 1, choice: k }
            }
        };
        for (r, d) in residual[p.bin].iter_mut().zip(item.choices[p.choice].demand.as_slice()) {
            *r -= d;
        }
        placement[i] = p;
    }

    let total_cost: Cost = bins.iter().map(|&t| types[t].cost).sum();
    checked(inst, Solution { bins, placement, total_cost, optimal: false, nodes: 0 })
}

fn fits(demand: &ResourceVector, residual: &[f64]) -> bool {
    demand.as_slice().iter().zip(residual).all(|(d, r)| *d <= *r + CAPACITY_SLACK)
}

fn normalized_slack_after(residual: &[f64], demand: &ResourceVector, cap: &ResourceVector) -> f64 {
    residual
        .iter()
        .zip(demand.as_slice())
        .zip(cap.as_slice())
        .filter(|(_, c)| **c > 0.0)
        .map(|((r, d), c)| (r - d) / c)
        .sum()
}

fn cheapest_new_bin(inst: &PackingInstance, item: usize) -> Option<(usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (t, bin) in inst.bin_types().iter().enumerate() {
        for (k, c) in inst.items()[item].choices.iter().enumerate() {
            if !c.demand.fits_within(&bin.capacity, CAPACITY_SLACK) {
                continue;
            }
            let score = bin.cost.micros() as f64 * load_fraction(&c.demand, &bin.capacity);
            if best.is_none_or(|(s, _, _)| score < s) {
                best = Some((score, t, k));
            }
        }
    }
    best.map(|(_, t, k)| (t, k))
}
