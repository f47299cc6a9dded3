//! Delete-relaxation heuristics: h_max and LM-cut.

use crate::pddl::{GroundTask, State};

/// Cost value standing for "unreachable".
pub const INF: u32 = u32::MAX;
const NO_SUPPORTER: u32 = u32::MAX;

/// Monotone priority queue over small integer costs.
#[derive(Default)]
struct BucketQueue {
    buckets: Vec<Vec<u32>>,
    current: usize,
    len: usize,
}

impl BucketQueue {
    fn clear(&mut self) {
        if self.len > 0 {
            self.buckets.iter_mut().for_each(Vec::clear);
        }
        self.current = 0;
        self.len = 0;
    }

    fn push(&mut self, cost: u32, item: u32) {
        let c = cost as usize;
        if c >= self.buckets.len() {
            self.buckets.resize_with(c + 1, Vec::new);
        }
        self.buckets[c].push(item);
        self.current = self.current.min(c);
        self.len += 1;
    }

    fn pop(&mut self) -> Option<(u32, u32)> {
        if self.len == 0 {
            return None;
        }
        while self.buckets[self.current].is_empty() {
            self.current += 1;
        }
        self.len -= 1;
        let item = self.buckets[self.current].pop().expect("non-empty bucket");
        Some((self.current as u32, item))
    }
}

/// Rows of small integers stored back to back.
struct Csr {
    offsets: Vec<u32>,
    data: Vec<u32>,
}

impl Csr {
    fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [u32]>) -> Self {
        let mut offsets = vec![0];
        let mut data = Vec::new();
        for row in rows {
            data.extend_from_slice(row);
            offsets.push(data.len() as u32);
        }
        Csr { offsets, data }
    }

    /// Inverse relation: row `x` lists the rows containing `x`.
    fn transpose(&self, width: usize) -> Self {
        let mut rows = vec![Vec::new(); width];
        for i in 0..self.len() {
            for &x in self.row(i) {
                rows[x as usize].push(i as u32);
            }
        }
        Csr::from_rows(rows.iter().map(Vec::as_slice))
    }

    fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    fn row(&self, i: usize) -> &[u32] {
        &self.data[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

/// Relaxed view of a task: action preconditions (positive only) and add
/// effects, plus an artificial zero-cost goal operator achieving a fresh
/// goal proposition.
pub struct RelaxedExplorer {
    pre: Csr,
    eff: Csr,
    base_cost: Vec<u32>,
    precondition_of: Csr,
    achievers: Csr,
    no_pre_ops: Vec<u32>,
    goal_prop: u32,

    prop_cost: Vec<u32>,
    unsatisfied: Vec<u32>,
    supporter: Vec<u32>,
    op_reach: Vec<u32>,
    queue: BucketQueue,
    costs: Vec<u32>,
    /// Propositions stamped with the current round are in the goal zone.
    zone_mark: Vec<u32>,
    /// Propositions stamped with the current round were reached from the state.
    reached_mark: Vec<u32>,
    round: u32,
    in_cut: Vec<bool>,
    stack: Vec<u32>,
}

impl RelaxedExplorer {
    pub fn new(task: &GroundTask) -> Self {
        let goal_prop = task.num_atoms() as u32;
        let num_props = task.num_atoms() + 1;
        let goal_eff = [goal_prop];
        let actions = task.actions();
        let pre = Csr::from_rows(actions.iter().map(|a| a.pre_pos.as_slice()).chain([task.goal()]));
        let eff = Csr::from_rows(actions.iter().map(|a| a.add.as_slice()).chain([&goal_eff[..]]));
        let base_cost: Vec<u32> = actions.iter().map(|a| a.cost).chain([0]).collect();
        let n_ops = base_cost.len();
        let no_pre_ops = (0..n_ops as u32).filter(|&o| pre.row(o as usize).is_empty()).collect();
        RelaxedExplorer {
            precondition_of: pre.transpose(num_props),
            achievers: eff.transpose(num_props),
            pre,
            eff,
            costs: base_cost.clone(),
            base_cost,
            no_pre_ops,
            goal_prop,
            prop_cost: vec![INF; num_props],
            unsatisfied: vec![0; n_ops],
            supporter: vec![NO_SUPPORTER; n_ops],
            op_reach: vec![INF; n_ops],
            queue: BucketQueue::default(),
            zone_mark: vec![0; num_props],
            reached_mark: vec![0; num_props],
            round: 0,
            in_cut: vec![false; n_ops],
            stack: Vec::new(),
        }
    }

    /// Costliest precondition of `op`, lowest index on ties.
    #[inline]
    fn choose_supporter(&self, op: u32) -> (u32, u32) {
        let mut best = NO_SUPPORTER;
        let mut best_cost = 0;
        for &p in self.pre.row(op as usize) {
            let c = self.prop_cost[p as usize];
            if best == NO_SUPPORTER || c > best_cost {
                best = p;
                best_cost = c;
            }
        }
        (best, best_cost)
    }

    #[inline]
    fn relax_effects(&mut self, op: u32, reach: u32) {
        let Self { eff, prop_cost, queue, .. } = self;
        for &e in eff.row(op as usize) {
            let slot = &mut prop_cost[e as usize];
            if reach < *slot {
                *slot = reach;
                queue.push(reach, e);
            }
        }
    }

    fn trigger(&mut self, op: u32) {
        let (supporter, pre_cost) = self.choose_supporter(op);
        self.supporter[op as usize] = supporter;
        let reach = pre_cost.saturating_add(self.costs[op as usize]);
        self.op_reach[op as usize] = reach;
        self.relax_effects(op, reach);
    }

    /// Max-cost fixpoint from `state` under the current working costs.
    fn explore(&mut self, state: &State) {
        self.prop_cost.fill(INF);
        self.supporter.fill(NO_SUPPORTER);
        self.op_reach.fill(INF);
        for (u, w) in self.unsatisfied.iter_mut().zip(self.pre.offsets.windows(2)) {
            *u = w[1] - w[0];
        }
        self.queue.clear();
        for p in state.iter() {
            self.prop_cost[p as usize] = 0;
            self.queue.push(0, p);
        }
        for i in 0..self.no_pre_ops.len() {
            self.trigger(self.no_pre_ops[i]);
        }
        while let Some((c, p)) = self.queue.pop() {
            if c > self.prop_cost[p as usize] {
                continue;
            }
            let (lo, hi) = self.row_bounds(p);
            for k in lo..hi {
                let op = self.precondition_of.data[k];
                let u = &mut self.unsatisfied[op as usize];
                *u -= 1;
                if *u == 0 {
                    self.trigger(op);
                }
            }
        }
    }

    #[inline]
    fn row_bounds(&self, p: u32) -> (usize, usize) {
        let o = &self.precondition_of.offsets;
        (o[p as usize] as usize, o[p as usize + 1] as usize)
    }

    /// Restores the fixpoint after the costs of `cut` dropped. Costs only
    /// decrease, so only operators whose supporter got cheaper are revisited.
    fn explore_after_cut(&mut self, cut: &[u32]) {
        self.queue.clear();
        for &op in cut {
            let (_, pre_cost) = self.choose_supporter(op);
            let reach = pre_cost.saturating_add(self.costs[op as usize]);
            self.op_reach[op as usize] = reach;
            self.relax_effects(op, reach);
        }
        while let Some((c, p)) = self.queue.pop() {
            if c > self.prop_cost[p as usize] {
                continue;
            }
            let (lo, hi) = self.row_bounds(p);
            for k in lo..hi {
                let op = self.precondition_of.data[k];
                if self.supporter[op as usize] != p {
                    continue;
                }
                let (supporter, pre_cost) = self.choose_supporter(op);
                self.supporter[op as usize] = supporter;
                let reach = pre_cost.saturating_add(self.costs[op as usize]);
                if reach < self.op_reach[op as usize] {
                    self.op_reach[op as usize] = reach;
                    self.relax_effects(op, reach);
                }
            }
        }
    }

    /// h_max: cost of the costliest goal atom under delete relaxation.
    pub fn h_max(&mut self, state: &State) -> u32 {
        self.costs.copy_from_slice(&self.base_cost);
        self.explore(state);
        self.prop_cost[self.goal_prop as usize]
    }

    /// LM-cut: sum of disjunctive action landmark costs extracted from
    /// successive justification-graph cuts.
    pub fn lm_cut(&mut self, state: &State) -> u32 {
        self.lm_cut_with(state, true)
    }

    fn lm_cut_with(&mut self, state: &State, incremental: bool) -> u32 {
        self.costs.copy_from_slice(&self.base_cost);
        self.explore(state);
        if self.prop_cost[self.goal_prop as usize] == INF {
            return INF;
        }
        let mut total = 0u32;
        let mut cut: Vec<u32> = Vec::new();
        while self.prop_cost[self.goal_prop as usize] != 0 {
            self.next_round();
            self.mark_goal_zone();
            cut.clear();
            self.find_cut(state, &mut cut);
            let cut_cost = cut.iter().map(|&o| self.costs[o as usize]).min().unwrap_or(0);
            debug_assert!(cut_cost > 0, "cut with zero cost");
            if cut_cost == 0 {
                break;
            }
            total += cut_cost;
            for &o in &cut {
                self.costs[o as usize] -= cut_cost;
                self.in_cut[o as usize] = false;
            }
            if incremental {
                self.explore_after_cut(&cut);
            } else {
                self.explore(state);
            }
        }
        total
    }

    fn next_round(&mut self) {
        self.round = self.round.wrapping_add(1);
        if self.round == 0 {
            self.zone_mark.fill(0);
            self.reached_mark.fill(0);
            self.round = 1;
        }
    }

    /// Goal zone: propositions reaching the goal proposition through
    /// zero-cost operators along supporter edges.
    fn mark_goal_zone(&mut self) {
        let round = self.round;
        let Self { achievers, supporter, unsatisfied, costs, zone_mark, stack, goal_prop, .. } = self;
        stack.clear();
        zone_mark[*goal_prop as usize] = round;
        stack.push(*goal_prop);
        while let Some(p) = stack.pop() {
            for &op in achievers.row(p as usize) {
                let op = op as usize;
                if unsatisfied[op] != 0 || costs[op] != 0 {
                    continue;
                }
                let s = supporter[op];
                if s != NO_SUPPORTER && zone_mark[s as usize] != round {
                    zone_mark[s as usize] = round;
                    stack.push(s);
                }
            }
        }
    }

    /// Operators leaving the state-reachable region into the goal zone.
    fn find_cut(&mut self, state: &State, cut: &mut Vec<u32>) {
        let round = self.round;
        let Self { eff, precondition_of, supporter, unsatisfied, zone_mark, reached_mark, in_cut, stack, no_pre_ops, .. } =
            self;
        stack.clear();
        for p in state.iter() {
            if reached_mark[p as usize] != round {
                reached_mark[p as usize] = round;
                stack.push(p);
            }
        }
        let mut visit = |op: u32, stack: &mut Vec<u32>| {
            for &e in eff.row(op as usize) {
                let e = e as usize;
                if zone_mark[e] == round {
                    if !in_cut[op as usize] {
                        in_cut[op as usize] = true;
                        cut.push(op);
                    }
                } else if reached_mark[e] != round {
                    reached_mark[e] = round;
                    stack.push(e as u32);
                }
            }
        };
        for &op in no_pre_ops.iter() {
            visit(op, stack);
        }
        while let Some(p) = stack.pop() {
            for &op in precondition_of.row(p as usize) {
                if supporter[op as usize] == p && unsatisfied[op as usize] == 0 {
                    visit(op, stack);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{bundled, ground_task, parse_domain, parse_problem};

    #[test]
    fn diamond_lmcut_exceeds_hmax() {
        // Two independent goals, each needing one action: h_max = 1, LM-cut = 2.
        let dom = parse_domain(
            "(define (domain d) (:predicates (a) (b))
               (:action ma :parameters () :precondition (and) :effect (a))
               (:action mb :parameters () :precondition (and) :effect (b)))",
        )
        .unwrap();
        let prob = parse_problem("(define (problem p) (:domain d) (:objects) (:init) (:goal (and (a) (b))))", &dom)
            .unwrap();
        let t = ground_task(&dom, &prob).unwrap();
        let mut h = RelaxedExplorer::new(&t);
        assert_eq!(h.h_max(t.init()), 1);
        assert_eq!(h.lm_cut(t.init()), 2);
    }

    #[test]
    fn goal_state_is_zero_and_unreachable_is_infinite() {
        let dom = bundled::domain(bundled::BLOCKSWORLD);
        let prob = parse_problem(
            "(define (problem p) (:domain blocksworld) (:objects a) (:init (ontable a) (clear a) (handempty)) (:goal (and (ontable a))))",
            &dom,
        )
        .unwrap();
        let t = ground_task(&dom, &prob).unwrap();
        let mut h = RelaxedExplorer::new(&t);
        assert_eq!(h.h_max(t.init()), 0);
        assert_eq!(h.lm_cut(t.init()), 0);
        // From the empty state nothing is reachable.
        let empty = State::empty(t.num_atoms());
        assert_eq!(h.h_max(&empty), INF);
        assert_eq!(h.lm_cut(&empty), INF);
    }

    #[test]
    fn incremental_update_matches_full_recomputation() {
        use crate::generators::{instance_seed, regenerate, DomainTag, GeneratorConfig};
        use crate::pddl::{apply_unchecked, is_applicable};
        for tag in DomainTag::ALL {
            let cfg = GeneratorConfig::new(tag, 1, 9);
            let dom = tag.domain();
            for i in 0..5 {
                let (_, prob) = regenerate(&cfg, instance_seed(9, i));
                let t = ground_task(&dom, &prob).unwrap();
                let mut h = RelaxedExplorer::new(&t);
                // Walk a few steps, checking every visited state.
                let mut s = t.init().clone();
                for step in 0..8 {
                    assert_eq!(h.lm_cut_with(&s, true), h.lm_cut_with(&s, false), "{tag} #{i} step {step}");
                    let Some(a) = t.actions().iter().filter(|a| is_applicable(&s, a)).nth(step % 3) else { break };
                    s = apply_unchecked(&s, a);
                }
            }
        }
    }
}
