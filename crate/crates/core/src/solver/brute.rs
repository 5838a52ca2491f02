use crate::catalog::ResourceVector;
use crate::cost::Cost;
use crate::packing::{PackingInstance, Placement, Solution};

use super::{checked, SolveError};

pub const BRUTE_FORCE_MAX_ITEMS: usize = 6;
pub const BRUTE_FORCE_MAX_CHOICES: usize = 3;

/// Exhaustive optimum for tiny instances.
///
/// Enumerates every partition of the items into groups (restricted-growth
/// strings) and every choice per item, and prices each group at the
/// cheapest bin type that holds its summed demand. Shares no code with the
/// search-based solvers.
pub fn brute_force(inst: &PackingInstance) -> Result<Solution, SolveError> {
    let n = inst.items().len();
    if n > BRUTE_FORCE_MAX_ITEMS {
        return Err(SolveError::TooLarge(format!("{n} items > {BRUTE_FORCE_MAX_ITEMS}")));
    }
    if let Some(item) = inst.items().iter().find(|i| i.choices.len() > BRUTE_FORCE_MAX_CHOICES) {
        return Err(SolveError::TooLarge(format!(
            "item `{}` has {} choices > {BRUTE_FORCE_MAX_CHOICES}",
            item.id,
            item.choices.len()
        )));
    }
    if n == 0 {
        return Ok(Solution::empty());
    }

    let mut best: Option<(Cost, Vec<usize>, Vec<usize>, Vec<usize>)> = None;
    let mut groups = vec![0usize; n];
    let mut choices = vec![0usize; n];
    loop {
        let group_count = groups.iter().max().unwrap() + 1;
        loop {
            if let Some((cost, types)) = price(inst, &groups, &choices, group_count) {
                if best.as_ref().is_none_or(|b| cost < b.0) {
                    best = Some((cost, groups.clone(), choices.clone(), types));
                }
            }
            if !next_choices(inst, &mut choices) {
                break;
            }
        }
        if !next_partition(&mut groups) {
            break;
        }
    }

    let Some((total_cost, groups, choices, bins)) = best else {
        let stuck = inst
            .items()
            .iter()
            .find(|i| i.choices.iter().all(|c| inst.cheapest_fitting_type(&c.demand).is_none()))
            .map_or_else(|| "(combination)".to_string(), |i| i.id.clone());
        return Err(SolveError::Infeasible(stuck));
    };
    let placement = groups
        .iter()
        .zip(&choices)
        .map(|(&bin, &choice)| Placement { bin, choice })
        .collect();
    checked(inst, Solution { bins, placement, total_cost, optimal: true, nodes: 0 })
}

fn price(inst: &PackingInstance, groups: &[usize], choices: &[usize], group_count: usize) -> Option<(Cost, Vec<usize>)> {
    let mut loads = vec![ResourceVector::zeros(inst.dims()); group_count];
    for (i, item) in inst.items().iter().enumerate() {
        loads[groups[i]].add_assign(&item.choices[choices[i]].demand);
    }
    let types: Option<Vec<usize>> = loads.iter().map(|l| inst.cheapest_fitting_type(l)).collect();
    let types = types?;
    let cost = types.iter().map(|&t| inst.bin_types()[t].cost).sum();
    Some((cost, types))
}

/// Advances a restricted-growth string; false after the last partition.
fn next_partition(groups: &mut [usize]) -> bool {
    for i in (1..groups.len()).rev() {
        let prefix_max = groups[..i].iter().copied().max().unwrap_or(0);
        if groups[i] <= prefix_max {
            groups[i] += 1;
            for g in &mut groups[i + 1..] {
                *g = 0;
            }
            return true;
        }
    }
    false
}

fn next_choices(inst: &PackingInstance, choices: &mut [usize]) -> bool {
    for (i, c) in choices.iter_mut().enumerate().rev() {
        if *c + 1 < inst.items()[i].choices.len() {
            *c += 1;
            return true;
        }
        *c = 0;
    }
    false
}
