//! Strong stubborn sets: optimality-preserving partial-order pruning.

use crate::pddl::{GroundTask, State};

const UNMARKED: u32 = u32::MAX;

pub struct StubbornSets {
    achievers: Vec<Vec<u32>>,
    deleters: Vec<Vec<u32>>,
    precondition_of: Vec<Vec<u32>>,
    interference: Vec<Option<Vec<u32>>>,
    mark: Vec<u32>,
    epoch: u32,
    queue: Vec<u32>,
}

impl StubbornSets {
    /// `None` for tasks with negative preconditions, where the binary
    /// achiever relation below would be incomplete.
    pub fn new(task: &GroundTask) -> Option<Self> {
        if task.actions().iter().any(|a| !a.pre_neg.is_empty()) {
            return None;
        }
        let n = task.num_atoms();
        let mut achievers = vec![Vec::new(); n];
        let mut deleters = vec![Vec::new(); n];
        let mut precondition_of = vec![Vec::new(); n];
        for (i, a) in task.actions().iter().enumerate() {
            let i = i as u32;
            a.add.iter().for_each(|&p| achievers[p as usize].push(i));
            a.del.iter().for_each(|&p| deleters[p as usize].push(i));
            a.pre_pos.iter().for_each(|&p| precondition_of[p as usize].push(i));
        }
        let ops = task.actions().len();
        Some(StubbornSets {
            achievers,
            deleters,
            precondition_of,
            interference: vec![None; ops],
            mark: vec![UNMARKED; ops],
            epoch: 0,
            queue: Vec::new(),
        })
    }

    /// Actions that can disable `op`, be disabled by it, or conflict with
    /// its effects.
    fn ensure_interference(&mut self, task: &GroundTask, op: u32) {
        if self.interference[op as usize].is_none() {
            let a = &task.actions()[op as usize];
            let mut out = Vec::new();
            for &d in &a.del {
                out.extend_from_slice(&self.precondition_of[d as usize]);
                out.extend_from_slice(&self.achievers[d as usize]);
            }
            for &p in a.pre_pos.iter().chain(&a.add) {
                out.extend_from_slice(&self.deleters[p as usize]);
            }
            out.sort_unstable();
            out.dedup();
            out.retain(|&b| b != op);
            self.interference[op as usize] = Some(out);
        }
    }

    fn enqueue(&mut self, ops: impl IntoIterator<Item = u32>) {
        for op in ops {
            if self.mark[op as usize] != self.epoch {
                self.mark[op as usize] = self.epoch;
                self.queue.push(op);
            }
        }
    }

    /// Keeps only the actions of `applicable` (ascending indices) that lie in
    /// a strong stubborn set for `s`. `s` must not satisfy the goal.
    pub fn prune(&mut self, task: &GroundTask, s: &State, applicable: &mut Vec<u32>) {
        let Some(&goal) = task.goal().iter().find(|&&g| !s.contains(g)) else {
            return;
        };
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == UNMARKED {
            self.mark.fill(UNMARKED);
            self.epoch = 0;
        }
        self.queue.clear();
        let seed = std::mem::take(&mut self.achievers[goal as usize]);
        self.enqueue(seed.iter().copied());
        self.achievers[goal as usize] = seed;
        while let Some(op) = self.queue.pop() {
            let a = &task.actions()[op as usize];
            match a.pre_pos.iter().find(|&&p| !s.contains(p)) {
                Some(&p) => {
                    let next = std::mem::take(&mut self.achievers[p as usize]);
                    self.enqueue(next.iter().copied());
                    self.achievers[p as usize] = next;
                }
                None => {
                    self.ensure_interference(task, op);
                    let next = self.interference[op as usize].take().unwrap_or_default();
                    self.enqueue(next.iter().copied());
                    self.interference[op as usize] = Some(next);
                }
            }
        }
        let epoch = self.epoch;
        applicable.retain(|&op| self.mark[op as usize] == epoch);
    }
}
