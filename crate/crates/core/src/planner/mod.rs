//! Optimal search: A* with blind, h_max or LM-cut guidance, and a
//! breadth-first oracle.

mod pruning;
mod relaxed;
mod search;
mod symmetry;

use serde::Serialize;

use crate::pddl::{GroundTask, Plan, State};

pub use pruning::StubbornSets;
pub use relaxed::{RelaxedExplorer, INF};
pub use search::{astar_plan, astar_plan_with, bfs_from, bfs_oracle, SuccessorGenerator};
pub use symmetry::Symmetries;

/// Heuristic guiding [`astar_plan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// Zero everywhere: uniform-cost search.
    Blind,
    HMax,
    #[default]
    LmCut,
}

impl std::str::FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "blind" => Ok(Heuristic::Blind),
            "hmax" | "h_max" => Ok(Heuristic::HMax),
            "lmcut" | "lm-cut" | "lm_cut" => Ok(Heuristic::LmCut),
            other => Err(format!("unknown heuristic '{other}' (expected blind, hmax or lmcut)")),
        }
    }
}

/// Caps and pruning switches for one A* search. Both reductions keep plans
/// optimal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub max_expansions: u64,
    pub max_seconds: f64,
    /// Expand only actions in a strong stubborn set. Plans stay optimal.
    pub stubborn_sets: bool,
    /// Store one state per orbit of the task's object symmetries.
    pub symmetry: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { max_expansions: 5_000_000, max_seconds: 60.0, stubborn_sets: true, symmetry: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    Expansions,
    Time,
    States,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    Solved { plan: Plan, cost: usize, expansions: u64 },
    Unsolvable,
    ResourceLimit(LimitKind),
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub outcome: SearchOutcome,
    /// Seconds spent searching.
    pub wall_time: f64,
}

impl SearchResult {
    pub fn plan(&self) -> Option<&Plan> {
        match &self.outcome {
            SearchOutcome::Solved { plan, .. } => Some(plan),
            _ => None,
        }
    }

    pub fn cost(&self) -> Option<usize> {
        match &self.outcome {
            SearchOutcome::Solved { cost, .. } => Some(*cost),
            _ => None,
        }
    }

    pub fn is_solved(&self) -> bool {
        matches!(self.outcome, SearchOutcome::Solved { .. })
    }
}

/// h_max of `s`; `None` stands for infinity.
pub fn h_max(task: &GroundTask, s: &State) -> Option<u32> {
    if task.is_unsolvable() {
        return None;
    }
    finite(RelaxedExplorer::new(task).h_max(s))
}

/// LM-cut value of `s`; `None` stands for infinity.
pub fn h_lmcut(task: &GroundTask, s: &State) -> Option<u32> {
    if task.is_unsolvable() {
        return None;
    }
    finite(RelaxedExplorer::new(task).lm_cut(s))
}

fn finite(v: u32) -> Option<u32> {
    (v != INF).then_some(v)
}

/// Reusable heuristic evaluator bound to one task.
pub struct Evaluator {
    kind: Heuristic,
    explorer: Option<RelaxedExplorer>,
    unsolvable: bool,
}

impl Evaluator {
    pub fn new(task: &GroundTask, kind: Heuristic) -> Self {
        let explorer = (kind != Heuristic::Blind).then(|| RelaxedExplorer::new(task));
        Evaluator { kind, explorer, unsolvable: task.is_unsolvable() }
    }

    /// Estimate for `s`; `None` means the goal is unreachable from `s`.
    pub fn estimate(&mut self, s: &State) -> Option<u32> {
        if self.unsolvable {
            return None;
        }
        match (self.kind, self.explorer.as_mut()) {
            (Heuristic::HMax, Some(e)) => finite(e.h_max(s)),
            (Heuristic::LmCut, Some(e)) => finite(e.lm_cut(s)),
            _ => Some(0),
        }
    }
}
