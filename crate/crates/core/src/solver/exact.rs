use std::time::Instant;

use log::debug;

use crate::cost::Cost;
use crate::packing::{PackingInstance, Placement, Solution, CAPACITY_SLACK};

use super::bound::BoundData;
use super::heuristic::{identical_classes, item_order, solve_heuristic};
use super::{checked, SolveError, SolverLimits};

/// Minimum-cost packing by depth-first branch-and-bound.
///
/// Items are branched in heuristic order; each item tries the open bins in
/// ordinal order and then a new bin of each type, with every choice that
/// fits. The heuristic solution is the first incumbent. Symmetric branches
/// are skipped:
///
/// * consecutive identical items take nondecreasing (bin, choice) pairs;
/// * placements that leave the same multiset of bin states are tried once,
///   which covers interchangeable open bins and interchangeable GPU slots.
///
/// When a limit is hit the incumbent is returned with `optimal = false`.
pub fn solve_exact(inst: &PackingInstance, limits: &SolverLimits) -> Result<Solution, SolveError> {
    if inst.items().is_empty() {
        return Ok(Solution::empty());
    }
    let seed = solve_heuristic(inst)?;
    let order = item_order(inst)?;
    let class = identical_classes(inst);
    let same_as_prev: Vec<bool> = (0..order.len())
        .map(|k| k > 0 && class[order[k]] == class[order[k - 1]])
        .collect();

    let bound = BoundData::new(inst);
    let mut remaining = vec![0.0; inst.dims()];
    for i in 0..inst.items().len() {
        for (r, m) in remaining.iter_mut().zip(bound.item_min_demand(i)) {
            *r += m;
        }
    }

    debug!("exact search: {} items, seed cost {}", order.len(), seed.total_cost);
    let mut search = Search {
        inst,
        limits,
        started: Instant::now(),
        order,
        same_as_prev,
        bound,
        bins: Vec::new(),
        residual: Vec::new(),
        placement: vec![Placement { bin: 0, choice: 0 }; inst.items().len()],
        committed: Cost::ZERO,
        remaining,
        open_residual: vec![0.0; inst.dims()],
        best: seed,
        nodes: 0,
        aborted: false,
    };
    search.descend(0);

    let Search { mut best, nodes, aborted, .. } = search;
    debug!("exact search: {nodes} nodes, best cost {}, aborted = {aborted}", best.total_cost);
    if aborted && limits.optimality_required {
        return Err(SolveError::ResourceExhausted);
    }
    best.optimal = !aborted;
    best.nodes = nodes;
    checked(inst, best)
}

struct Search<'a> {
    inst: &'a PackingInstance,
    limits: &'a SolverLimits,
    started: Instant,
    order: Vec<usize>,
    same_as_prev: Vec<bool>,
    bound: BoundData,
    bins: Vec<usize>,
    residual: Vec<Vec<f64>>,
    placement: Vec<Placement>,
    committed: Cost,
    remaining: Vec<f64>,
    open_residual: Vec<f64>,
    best: Solution,
    nodes: u64,
    aborted: bool,
}

#[derive(Clone, Copy)]
enum Target {
    Open(usize),
    New(usize),
}

struct Candidate {
    target: Target,
    choice: usize,
    bound: f64,
}

impl Search<'_> {
    fn out_of_budget(&mut self) -> bool {
        if self.nodes >= self.limits.max_nodes
            || (self.nodes % 4096 == 0 && self.started.elapsed() >= self.limits.time_budget)
        {
            self.aborted = true;
        }
        self.aborted
    }

    fn descend(&mut self, depth: usize) {
        self.nodes += 1;
        if self.out_of_budget() {
            return;
        }
        if depth == self.order.len() {
            if self.committed < self.best.total_cost {
                debug!("incumbent {} at node {}", self.committed, self.nodes);
                self.best = Solution {
                    bins: self.bins.clone(),
                    placement: self.placement.clone(),
                    total_cost: self.committed,
                    optimal: false,
                    nodes: 0,
                };
            }
            return;
        }

        let item = self.order[depth];
        let floor = self.same_as_prev[depth].then(|| self.placement[self.order[depth - 1]]);
        for cand in self.candidates(item, floor) {
            // Costs are whole micro-dollars, so a child can only improve on
            // the incumbent if its bound is at least one micro-dollar lower.
            if cand.bound > self.best.total_cost.micros() as f64 - 0.5 {
                continue;
            }
            self.apply(item, &cand);
            self.descend(depth + 1);
            self.undo(item, &cand);
            if self.aborted {
                return;
            }
        }
    }

    fn candidates(&self, item: usize, floor: Option<Placement>) -> Vec<Candidate> {
        let inst = self.inst;
        let choices = &inst.items()[item].choices;
        let min_demand = self.bound.item_min_demand(item);
        let remaining_after: Vec<f64> = self.remaining.iter().zip(min_demand).map(|(r, m)| r - m).collect();
        let allowed = |p: Placement| floor.is_none_or(|f| p >= f);

        let mut seen: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
        let mut out = Vec::new();

        for (b, res) in self.residual.iter().enumerate() {
            for (k, c) in choices.iter().enumerate() {
                if !allowed(Placement { bin: b, choice: k }) {
                    continue;
                }
                let demand = c.demand.as_slice();
                if !demand.iter().zip(res).all(|(d, r)| *d <= *r + CAPACITY_SLACK) {
                    continue;
                }
                let after: Vec<f64> = res.iter().zip(demand).map(|(r, d)| r - d).collect();
                let key = (self.bins[b], self.canonical(res), self.canonical(&after));
                if seen.contains(&key) {
                    continue;
                }
                seen.push(key);
                let open: Vec<f64> = self.open_residual.iter().zip(demand).map(|(o, d)| o - d).collect();
                let bound = self.bound.completion(self.committed, &remaining_after, &open);
                out.push(Candidate { target: Target::Open(b), choice: k, bound });
            }
        }

        for (t, bin) in inst.bin_types().iter().enumerate() {
            let cap = bin.capacity.as_slice();
            for (k, c) in choices.iter().enumerate() {
                if !c.demand.fits_within(&bin.capacity, CAPACITY_SLACK) {
                    continue;
                }
                let demand = c.demand.as_slice();
                let after: Vec<f64> = cap.iter().zip(demand).map(|(r, d)| r - d).collect();
                let key = (usize::MAX - t, self.canonical(cap), self.canonical(&after));
                if seen.contains(&key) {
                    continue;
                }
                seen.push(key);
                let open: Vec<f64> = self.open_residual.iter().zip(&after).map(|(o, a)| o + a).collect();
                let bound = self.bound.completion(self.committed + bin.cost, &remaining_after, &open);
                out.push(Candidate { target: Target::New(t), choice: k, bound });
            }
        }
        out
    }

    /// Residual vector with interchangeable blocks sorted, so that states
    /// differing only by a slot permutation compare equal.
    fn canonical(&self, values: &[f64]) -> Vec<f64> {
        let blocks = self.inst.blocks();
        if blocks.is_empty() {
            return values.to_vec();
        }
        let in_block: Vec<bool> = (0..values.len()).map(|d| blocks.iter().any(|b| b.contains(&d))).collect();
        let mut out: Vec<f64> = values.iter().zip(&in_block).filter(|(_, b)| !**b).map(|(v, _)| *v).collect();
        let mut tuples: Vec<Vec<f64>> = blocks.iter().map(|b| b.iter().map(|&d| values[d]).collect()).collect();
        tuples.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        out.extend(tuples.into_iter().flatten());
        out
    }

    fn apply(&mut self, item: usize, cand: &Candidate) {
        let inst = self.inst;
        let demand = inst.items()[item].choices[cand.choice].demand.as_slice();
        let bin = match cand.target {
            Target::Open(b) => b,
            Target::New(t) => {
                self.bins.push(t);
                self.residual.push(inst.bin_types()[t].capacity.as_slice().to_vec());
                self.committed += inst.bin_types()[t].cost;
                for (o, c) in self.open_residual.iter_mut().zip(inst.bin_types()[t].capacity.as_slice()) {
                    *o += c;
                }
                self.bins.len() - 1
            }
        };
        for (r, d) in self.residual[bin].iter_mut().zip(demand) {
            *r -= d;
        }
        for (o, d) in self.open_residual.iter_mut().zip(demand) {
            *o -= d;
        }
        for (r, m) in self.remaining.iter_mut().zip(self.bound.item_min_demand(item)) {
            *r -= m;
        }
        self.placement[item] = Placement { bin, choice: cand.choice };
    }

    fn undo(&mut self, item: usize, cand: &Candidate) {
        let inst = self.inst;
        let demand = inst.items()[item].choices[cand.choice].demand.as_slice();
        for (r, m) in self.remaining.iter_mut().zip(self.bound.item_min_demand(item)) {
            *r += m;
        }
        for (o, d) in self.open_residual.iter_mut().zip(demand) {
            *o += d;
        }
        match cand.target {
            Target::Open(b) => {
                for (r, d) in self.residual[b].iter_mut().zip(demand) {
                    *r += d;
                }
            }
            Target::New(t) => {
                self.bins.pop();
                self.residual.pop();
                self.committed = Cost::from_micros(self.committed.micros() - inst.bin_types()[t].cost.micros());
                for (o, c) in self.open_residual.iter_mut().zip(inst.bin_types()[t].capacity.as_slice()) {
                    *o -= c;
                }
            }
        }
    }
}
