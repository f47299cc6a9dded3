use std::cmp::{Ordering, Reverse};
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::time::Instant;

use super::pruning::StubbornSets;
use super::symmetry::Symmetries;
use super::{Evaluator, Heuristic, LimitKind, SearchOptions, SearchOutcome, SearchResult};
use crate::pddl::{apply_unchecked, goal_satisfied, is_applicable, ActionRef, GroundTask, Plan, State};

const NO_PARENT: u32 = u32::MAX;
const TIME_CHECK_INTERVAL: u64 = 1024;

/// Applicable-action lookup: actions bucketed by their lowest positive
/// precondition so only buckets of true atoms are scanned.
pub struct SuccessorGenerator {
    by_atom: Vec<Vec<u32>>,
    unconditional: Vec<u32>,
}

impl SuccessorGenerator {
    pub fn new(task: &GroundTask) -> Self {
        let mut by_atom = vec![Vec::new(); task.num_atoms()];
        let mut unconditional = Vec::new();
        for (i, a) in task.actions().iter().enumerate() {
            match a.pre_pos.iter().min() {
                Some(&p) => by_atom[p as usize].push(i as u32),
                None => unconditional.push(i as u32),
            }
        }
        SuccessorGenerator { by_atom, unconditional }
    }

    /// Indices of actions applicable in `s`, ascending.
    pub fn applicable(&self, task: &GroundTask, s: &State, out: &mut Vec<u32>) {
        out.clear();
        let actions = task.actions();
        out.extend(self.unconditional.iter().copied().filter(|&i| is_applicable(s, &actions[i as usize])));
        for p in s.iter() {
            out.extend(self.by_atom[p as usize].iter().copied().filter(|&i| is_applicable(s, &actions[i as usize])));
        }
        out.sort_unstable();
    }
}

struct Node {
    parent: u32,
    action: u32,
    g: u32,
    /// Heuristic value once evaluated, else an admissible bound inherited
    /// from the parent.
    h: u32,
    evaluated: bool,
    closed: bool,
    /// Symmetry generators applied after `action` to reach this node's
    /// stored state.
    trace: Vec<u16>,
}

#[derive(PartialEq, Eq)]
struct OpenEntry {
    f: u32,
    g: u32,
    seq: u64,
    node: u32,
}

impl Ord for OpenEntry {
    // Max-heap order: lower f, then higher g, then earlier insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        Reverse(self.f)
            .cmp(&Reverse(other.f))
            .then(self.g.cmp(&other.g))
            .then(Reverse(self.seq).cmp(&Reverse(other.seq)))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn extract_plan(task: &GroundTask, parents: impl Fn(u32) -> (u32, u32), mut node: u32) -> Plan {
    let mut refs = Vec::new();
    loop {
        let (parent, action) = parents(node);
        if parent == NO_PARENT {
            break;
        }
        refs.push(ActionRef::Search(action as usize));
        node = parent;
    }
    refs.reverse();
    Plan::from_refs(task, refs)
}

/// Plan in the original task from a path through orbit representatives.
/// The stored state of node `i` on the path is `p_i(real_i)` for a
/// permutation `p_i`; each step's action is mapped back through `p_i`.
fn orbit_plan(task: &GroundTask, sym: &Symmetries, nodes: &[Node], root_trace: &[u16], goal: u32) -> Plan {
    let mut path = Vec::new();
    let mut node = goal;
    while nodes[node as usize].parent != NO_PARENT {
        path.push(node);
        node = nodes[node as usize].parent;
    }
    path.reverse();
    let mut refs = Vec::with_capacity(path.len());
    for (k, &n) in path.iter().enumerate() {
        let mut a = nodes[n as usize].action;
        for &prev in path[..k].iter().rev() {
            a = sym.unmap_action(a, &nodes[prev as usize].trace);
        }
        a = sym.unmap_action(a, root_trace);
        refs.push(ActionRef::Search(a as usize));
    }
    Plan::from_refs(task, refs)
}

/// A* with default limits.
pub fn astar_plan(task: &GroundTask, heuristic: Heuristic) -> SearchResult {
    astar_plan_with(task, heuristic, &SearchOptions::default(), |_, _, _| {})
}

/// A* search. `on_expand(state, g, h)` is called for every expanded state.
pub fn astar_plan_with(
    task: &GroundTask,
    heuristic: Heuristic,
    opts: &SearchOptions,
    mut on_expand: impl FnMut(&State, u32, u32),
) -> SearchResult {
    let start = Instant::now();
    let done = |outcome| SearchResult { outcome, wall_time: start.elapsed().as_secs_f64() };

    let mut eval = Evaluator::new(task, heuristic);
    let succ = SuccessorGenerator::new(task);
    let mut pruning = if opts.stubborn_sets { StubbornSets::new(task) } else { None };
    let Some(h0) = eval.estimate(task.init()) else {
        return done(SearchOutcome::Unsolvable);
    };

    let symmetries = if opts.symmetry { Symmetries::detect(task) } else { None };
    let mut root = task.init().clone();
    let mut root_trace = Vec::new();
    if let Some(sym) = &symmetries {
        sym.canonicalize(&mut root, &mut root_trace);
    }
    let mut states: Vec<State> = vec![root.clone()];
    let mut nodes =
        vec![Node { parent: NO_PARENT, action: 0, g: 0, h: h0, evaluated: true, closed: false, trace: Vec::new() }];
    let mut index: HashMap<State, u32> = HashMap::new();
    index.insert(root, 0);
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;
    open.push(OpenEntry { f: h0, g: 0, seq, node: 0 });

    let mut expansions = 0u64;
    let mut applicable = Vec::new();
    while let Some(entry) = open.pop() {
        let id = entry.node as usize;
        if nodes[id].closed || entry.g != nodes[id].g {
            continue;
        }
        if goal_satisfied(&states[id], task) {
            let plan = match &symmetries {
                Some(sym) => orbit_plan(task, sym, &nodes, &root_trace, entry.node),
                None => extract_plan(task, |n| (nodes[n as usize].parent, nodes[n as usize].action), entry.node),
            };
            let cost = plan.cost();
            return done(SearchOutcome::Solved { plan, cost, expansions });
        }
        // Children are queued with their parent's bound and evaluated on
        // first pop; a node whose real f is higher goes back in the queue.
        if !nodes[id].evaluated {
            nodes[id].evaluated = true;
            match eval.estimate(&states[id]) {
                None => {
                    nodes[id].h = super::INF;
                    nodes[id].closed = true;
                    continue;
                }
                Some(h) => {
                    let h = h.max(nodes[id].h);
                    nodes[id].h = h;
                    if entry.g + h > entry.f {
                        seq += 1;
                        open.push(OpenEntry { f: entry.g + h, g: entry.g, seq, node: entry.node });
                        continue;
                    }
                }
            }
        }
        if expansions >= opts.max_expansions {
            return done(SearchOutcome::ResourceLimit(LimitKind::Expansions));
        }
        if expansions.is_multiple_of(TIME_CHECK_INTERVAL) && start.elapsed().as_secs_f64() > opts.max_seconds {
            return done(SearchOutcome::ResourceLimit(LimitKind::Time));
        }
        nodes[id].closed = true;
        expansions += 1;
        let g = nodes[id].g;
        let h = nodes[id].h;
        on_expand(&states[id], g, h);

        succ.applicable(task, &states[id], &mut applicable);
        if let Some(p) = pruning.as_mut() {
            p.prune(task, &states[id], &mut applicable);
        }
        for &a in &applicable {
            let action = &task.actions()[a as usize];
            let mut next = apply_unchecked(&states[id], action);
            let mut trace = Vec::new();
            if let Some(sym) = &symmetries {
                sym.canonicalize(&mut next, &mut trace);
            }
            let ng = g + action.cost;
            let child = match index.entry(next) {
                Entry::Occupied(e) => {
                    let c = *e.get();
                    let node = &mut nodes[c as usize];
                    if ng >= node.g || node.h == super::INF {
                        continue;
                    }
                    node.g = ng;
                    node.parent = id as u32;
                    node.action = a;
                    node.trace = trace;
                    node.closed = false;
                    if !node.evaluated {
                        node.h = node.h.max(h.saturating_sub(action.cost));
                    }
                    c
                }
                Entry::Vacant(e) => {
                    let c = nodes.len() as u32;
                    states.push(e.key().clone());
                    e.insert(c);
                    let bound = h.saturating_sub(action.cost);
                    nodes.push(Node { parent: id as u32, action: a, g: ng, h: bound, evaluated: false, closed: false, trace });
                    c
                }
            };
            seq += 1;
            let n = &nodes[child as usize];
            open.push(OpenEntry { f: n.g + n.h, g: n.g, seq, node: child });
        }
    }
    done(SearchOutcome::Unsolvable)
}

/// Breadth-first search from the initial state, capped at one million stored states.
pub fn bfs_oracle(task: &GroundTask) -> SearchResult {
    bfs_from(task, task.init(), 1_000_000)
}

/// Breadth-first search from an arbitrary `start` state; gives up once more
/// than `max_states` distinct states are stored.
pub fn bfs_from(task: &GroundTask, start: &State, max_states: usize) -> SearchResult {
    let t0 = Instant::now();
    let done = |outcome| SearchResult { outcome, wall_time: t0.elapsed().as_secs_f64() };
    if task.is_unsolvable() {
        return done(SearchOutcome::Unsolvable);
    }
    let succ = SuccessorGenerator::new(task);
    let mut links: Vec<(u32, u32)> = vec![(NO_PARENT, 0)];
    let mut states: Vec<State> = vec![start.clone()];
    let mut seen: HashMap<State, u32> = HashMap::new();
    seen.insert(start.clone(), 0);
    let mut queue = VecDeque::from([0u32]);
    let mut expansions = 0u64;
    let solved = |links: &[(u32, u32)], node: u32, expansions: u64| {
        let plan = extract_plan(task, |n| links[n as usize], node);
        let cost = plan.cost();
        SearchOutcome::Solved { plan, cost, expansions }
    };
    if goal_satisfied(start, task) {
        return done(solved(&links, 0, 0));
    }
    let mut applicable = Vec::new();
    while let Some(id) = queue.pop_front() {
        expansions += 1;
        succ.applicable(task, &states[id as usize], &mut applicable);
        for &a in &applicable {
            let next = apply_unchecked(&states[id as usize], &task.actions()[a as usize]);
            if let Entry::Vacant(e) = seen.entry(next) {
                let c = states.len() as u32;
                states.push(e.key().clone());
                e.insert(c);
                links.push((id, a));
                if goal_satisfied(&states[c as usize], task) {
                    return done(solved(&links, c, expansions));
                }
                if states.len() > max_states {
                    return done(SearchOutcome::ResourceLimit(LimitKind::States));
                }
                queue.push_back(c);
            }
        }
    }
    done(SearchOutcome::Unsolvable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{bundled, ground_task, parse_problem};
    use crate::planner::{h_lmcut, h_max};

    fn four_blocks() -> GroundTask {
        let dom = bundled::domain(bundled::BLOCKSWORLD);
        let prob = parse_problem(include_str!("../../tests/fixtures/bw_four_blocks.pddl"), &dom).unwrap();
        ground_task(&dom, &prob).unwrap()
    }

    fn hanoi(n: usize) -> GroundTask {
        let dom = bundled::domain(bundled::HANOI);
        let discs: Vec<String> = (1..=n).map(|i| format!("d{i}")).collect();
        let mut init = Vec::new();
        for peg in ["peg1", "peg2", "peg3"] {
            for d in &discs {
                init.push(format!("(smaller {peg} {d})"));
            }
        }
        for (i, small) in discs.iter().enumerate() {
            for big in &discs[i + 1..] {
                init.push(format!("(smaller {big} {small})"));
            }
        }
        // d1 smallest, stacked on d2 ... on dn on peg1.
        for i in 0..n {
            let below = if i + 1 < n { discs[i + 1].clone() } else { "peg1".into() };
            init.push(format!("(on {} {below})", discs[i]));
        }
        init.push("(clear d1) (clear peg2) (clear peg3)".into());
        let mut goal = Vec::new();
        for i in 0..n {
            let below = if i + 1 < n { discs[i + 1].clone() } else { "peg3".into() };
            goal.push(format!("(on {} {below})", discs[i]));
        }
        let text = format!(
            "(define (problem h) (:domain hanoi) (:objects peg1 peg2 peg3 {}) (:init {}) (:goal (and {})))",
            discs.join(" "),
            init.join(" "),
            goal.join(" ")
        );
        ground_task(&dom, &parse_problem(&text, &dom).unwrap()).unwrap()
    }

    #[test]
    fn four_blocks_costs_six() {
        let t = four_blocks();
        for h in [Heuristic::Blind, Heuristic::HMax, Heuristic::LmCut] {
            let r = astar_plan(&t, h);
            assert_eq!(r.cost(), Some(6), "{h:?}");
            let end = r.plan().unwrap().execute(&t).unwrap();
            assert!(goal_satisfied(&end, &t));
        }
        assert_eq!(bfs_oracle(&t).cost(), Some(6));
        let hm = h_max(&t, t.init()).unwrap();
        let lm = h_lmcut(&t, t.init()).unwrap();
        assert!((1..=6).contains(&hm) && hm <= lm && lm <= 6, "{hm} {lm}");
    }

    #[test]
    fn hanoi_towers_cost_two_to_the_n_minus_one() {
        for (n, want) in [(2, 3), (3, 7), (4, 15), (5, 31)] {
            let t = hanoi(n);
            assert_eq!(astar_plan(&t, Heuristic::LmCut).cost(), Some(want), "n={n}");
            assert_eq!(bfs_oracle(&t).cost(), Some(want), "n={n}");
        }
        let t = hanoi(3);
        let lm = h_lmcut(&t, t.init()).unwrap();
        assert!(lm <= 7 && lm >= h_max(&t, t.init()).unwrap());
    }

    #[test]
    fn mutual_stacking_is_unsolvable() {
        let dom = bundled::domain(bundled::BLOCKSWORLD);
        let prob = parse_problem(
            "(define (problem p) (:domain blocksworld) (:objects b1 b2)
               (:init (handempty) (ontable b1) (ontable b2) (clear b1) (clear b2))
               (:goal (and (on b1 b2) (on b2 b1))))",
            &dom,
        )
        .unwrap();
        let t = ground_task(&dom, &prob).unwrap();
        for h in [Heuristic::Blind, Heuristic::HMax, Heuristic::LmCut] {
            assert_eq!(astar_plan(&t, h).outcome, SearchOutcome::Unsolvable);
        }
        assert_eq!(bfs_oracle(&t).outcome, SearchOutcome::Unsolvable);
    }

    #[test]
    fn goal_at_init_gives_empty_plan() {
        let dom = bundled::domain(bundled::BLOCKSWORLD);
        let prob = parse_problem(
            "(define (problem p) (:domain blocksworld) (:objects a) (:init (handempty) (ontable a) (clear a)) (:goal (and (clear a))))",
            &dom,
        )
        .unwrap();
        let t = ground_task(&dom, &prob).unwrap();
        assert_eq!(bfs_oracle(&t).cost(), Some(0));
        assert_eq!(astar_plan(&t, Heuristic::LmCut).cost(), Some(0));
    }

    #[test]
    fn limits_are_reported() {
        let t = hanoi(4);
        let opts = SearchOptions { max_expansions: 3, ..Default::default() };
        let r = astar_plan_with(&t, Heuristic::Blind, &opts, |_, _, _| {});
        assert_eq!(r.outcome, SearchOutcome::ResourceLimit(LimitKind::Expansions));
        assert_eq!(bfs_from(&t, t.init(), 5).outcome, SearchOutcome::ResourceLimit(LimitKind::States));
    }

    #[test]
    fn search_is_deterministic() {
        let t = four_blocks();
        let a = astar_plan(&t, Heuristic::LmCut);
        let b = astar_plan(&t, Heuristic::LmCut);
        assert_eq!(a.plan(), b.plan());
    }

    #[test]
    fn lmcut_is_admissible_on_expanded_states() {
        let t = hanoi(3);
        let mut audited = 0;
        astar_plan_with(&t, Heuristic::LmCut, &SearchOptions::default(), |s, _, h| {
            let d = bfs_from(&t, s, 100_000).cost().unwrap() as u32;
            assert!(h <= d, "h={h} d={d}");
            audited += 1;
        });
        assert!(audited > 0);
    }

    #[test]
    fn reductions_keep_costs_optimal() {
        use crate::generators::{instance_seed, regenerate, DomainTag, GeneratorConfig};
        let small = [
            (DomainTag::Bw, "blocks", 5),
            (DomainTag::Hn, "disks", 4),
            (DomainTag::Gr, "balls", 3),
            (DomainTag::Dl, "packages", 3),
        ];
        for (tag, param, hi) in small {
            let lo = tag.default_ranges().iter().find(|r| r.0 == param).unwrap().1;
            let mut cfg = GeneratorConfig::new(tag, 1, 11).with_range(param, lo, hi).unwrap();
            if tag == DomainTag::Gr {
                cfg = cfg.with_range("robots", 2, 2).unwrap();
            }
            for i in 0..12 {
                let (_, prob) = regenerate(&cfg, instance_seed(11, i));
                let t = crate::pddl::ground_task(&tag.domain(), &prob).unwrap();
                let want = bfs_oracle(&t).cost();
                for (sss, sym) in [(false, false), (true, false), (false, true), (true, true)] {
                    let opts = SearchOptions { stubborn_sets: sss, symmetry: sym, ..Default::default() };
                    let r = astar_plan_with(&t, Heuristic::LmCut, &opts, |_, _, _| {});
                    assert_eq!(r.cost(), want, "{tag} #{i} sss={sss} sym={sym}");
                    if let Some(plan) = r.plan() {
                        assert!(goal_satisfied(&plan.execute(&t).unwrap(), &t), "{tag} #{i}");
                    }
                }
            }
        }
    }
}
