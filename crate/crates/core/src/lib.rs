//! Symbolic planning toolkit for the linearized plan-generation benchmark.
//!
//! The crate covers the whole non-learned pipeline:
//!
//! * [`pddl`]: parse, print, ground and execute STRIPS+typing PDDL.
//! * [`codec`]: the tagged single-line task encoding and plan strings.
//! * [`generators`]: random solvable instances for blocksworld, hanoi,
//!   grippers and driverlog, and the reference corpus builder.
//! * [`planner`]: optimal A* with LM-cut, h_max and a BFS oracle.
//! * [`validator`]: plan simulation and the valid/failed/incomplete taxonomy.
//! * [`metrics`]: ROUGE-L, BLEU and evaluation reports.
//! * [`harness`]: JSONL corpora, train/test splits and batch evaluation.

pub mod codec;
pub mod generators;
pub mod harness;
pub mod metrics;
pub mod pddl;
pub mod planner;
pub mod validator;

pub use generators::{build_dataset, DatasetRecord, DomainTag, GeneratorConfig};
pub use harness::{evaluate, Candidate, SplitSpec};
pub use metrics::{BleuMode, EvalReport};
pub use planner::{astar_plan, bfs_oracle, Heuristic, SearchOptions, SearchOutcome, SearchResult};
pub use validator::{classify_plan, simulate_plan, OutcomeClass, PlanOutcome};
pub use pddl::{
    ground_task, parse_domain, parse_problem, Atom, Domain, GroundAction, GroundTask, Plan, Problem, State,
};
