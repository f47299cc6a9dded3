//! STRIPS+typing PDDL: parsing, printing, grounding and execution.

pub mod bundled;
mod emit;
mod ground;
mod model;
mod parse;
pub mod sexpr;

use thiserror::Error;

pub use emit::{emit_domain, emit_problem, emit_problem_with, InitOrder};
pub use ground::{
    apply_action, apply_unchecked, goal_satisfied, ground_task, is_applicable, ActionRef, AtomId, GroundAction,
    GroundTask, Plan, PlanStep, State,
};
pub use model::*;
pub use parse::{parse_domain, parse_problem};

use sexpr::Pos;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("unsupported construct `{construct}` at {pos}")]
    Unsupported { construct: String, pos: Pos },
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("undeclared object `{0}`")]
    UndeclaredObject(String),
    #[error("predicate `{predicate}` takes {expected} arguments, found {found}")]
    Arity { predicate: String, expected: usize, found: usize },
    #[error("problem targets domain `{found}` but domain `{expected}` was given")]
    DomainMismatch { expected: String, found: String },
    #[error("negated goal {0} not supported: goals must be positive conjunctions")]
    NegativeGoal(String),
    #[error("type mismatch in `{atom}`: `{object}` is a {found}, expected {expected}")]
    TypeMismatch { atom: String, object: String, expected: String, found: String },
    #[error("action `{0}` is not applicable")]
    Inapplicable(String),
    #[error("{0}")]
    Invalid(String),
}
