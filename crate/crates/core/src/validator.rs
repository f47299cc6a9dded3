//! Plan simulation and the valid / failed / incomplete taxonomy.

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::codec::{parse_plan_text, ParsedStep};
use crate::pddl::{apply_unchecked, goal_satisfied, GroundAction, GroundTask, State};

/// First step that could not be executed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepFailure {
    /// 1-based position in the plan.
    pub step: usize,
    pub action: String,
    /// First unsatisfied precondition; `None` when the action is unknown.
    pub violated: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simulation {
    pub final_state: State,
    pub failure: Option<StepFailure>,
    /// Number of steps applied before stopping.
    pub executed: usize,
    /// Shortest prefix length after which the goal held, if any.
    pub goal_first_reached: Option<usize>,
}

fn first_violation(t: &GroundTask, s: &State, a: &GroundAction) -> Option<String> {
    if let Some(&p) = a.pre_pos.iter().find(|&&p| !s.contains(p)) {
        return Some(t.atom(p).to_string());
    }
    a.pre_neg.iter().find(|&&p| s.contains(p)).map(|&p| format!("not {}", t.atom(p)))
}

/// Applies `steps` in order from the initial state, stopping at the first
/// unknown or inapplicable action.
pub fn simulate_plan(t: &GroundTask, steps: &[ParsedStep]) -> Simulation {
    let mut state = t.init().clone();
    let mut goal_first_reached = goal_satisfied(&state, t).then_some(0);
    for (i, step) in steps.iter().enumerate() {
        let failure = match step {
            ParsedStep::Unknown(name) => Some(StepFailure { step: i + 1, action: name.clone(), violated: None }),
            ParsedStep::Resolved(r) => {
                let a = t.action(*r);
                first_violation(t, &state, a).map(|v| StepFailure {
                    step: i + 1,
                    action: a.display_name(),
                    violated: Some(v),
                })
            }
        };
        if failure.is_some() {
            return Simulation { final_state: state, failure, executed: i, goal_first_reached };
        }
        if let ParsedStep::Resolved(r) = step {
            state = apply_unchecked(&state, t.action(*r));
        }
        if goal_first_reached.is_none() && goal_satisfied(&state, t) {
            goal_first_reached = Some(i + 1);
        }
    }
    Simulation { final_state: state, failure: None, executed: steps.len(), goal_first_reached }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IncompleteReason {
    /// The text ends in the middle of an action.
    Truncated,
    /// Every action applies but the goal does not hold at the end.
    GoalNotReached,
    /// No candidate was supplied for the task.
    MissingCandidate,
}

impl IncompleteReason {
    pub fn as_str(self) -> &'static str {
        match self {
            IncompleteReason::Truncated => "truncated",
            IncompleteReason::GoalNotReached => "goal_not_reached",
            IncompleteReason::MissingCandidate => "missing_candidate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutcomeClass {
    /// `optimal` is `None` when no reference cost was given.
    Valid { optimal: Option<bool> },
    /// Unknown action or unsatisfied precondition at `step` (1-based).
    Failed { step: usize, violated_precondition: Option<String> },
    Incomplete { reason: IncompleteReason },
}

impl OutcomeClass {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeClass::Valid { .. } => "valid",
            OutcomeClass::Failed { .. } => "failed",
            OutcomeClass::Incomplete { .. } => "incomplete",
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, OutcomeClass::Valid { .. })
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, OutcomeClass::Valid { optimal: Some(true) })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanOutcome {
    pub class: OutcomeClass,
    pub executed_prefix: usize,
    /// Plan length, when the whole candidate parsed and executed.
    pub candidate_cost: Option<usize>,
}

impl PlanOutcome {
    /// Outcome recorded for a task with no candidate plan.
    pub fn missing() -> Self {
        PlanOutcome {
            class: OutcomeClass::Incomplete { reason: IncompleteReason::MissingCandidate },
            executed_prefix: 0,
            candidate_cost: None,
        }
    }
}

impl Serialize for PlanOutcome {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut m = ser.serialize_map(None)?;
        m.serialize_entry("class", self.class.name())?;
        match &self.class {
            OutcomeClass::Valid { optimal } => {
                if let Some(o) = optimal {
                    m.serialize_entry("optimal", o)?;
                }
            }
            OutcomeClass::Failed { step, violated_precondition } => {
                m.serialize_entry("step", step)?;
                match violated_precondition {
                    Some(v) => {
                        m.serialize_entry("reason", "precondition")?;
                        m.serialize_entry("violated", v)?;
                    }
                    None => m.serialize_entry("reason", "unknown_action")?,
                }
            }
            OutcomeClass::Incomplete { reason } => m.serialize_entry("reason", reason.as_str())?,
        }
        m.end()
    }
}

/// Parses and classifies a candidate plan string. With `reference_cost`,
/// a valid plan is optimal iff its length equals that cost.
pub fn classify_plan(t: &GroundTask, text: &str, reference_cost: Option<usize>) -> PlanOutcome {
    let parsed = parse_plan_text(text, t);
    let sim = simulate_plan(t, &parsed.steps);
    if let Some(f) = sim.failure {
        return PlanOutcome {
            class: OutcomeClass::Failed { step: f.step, violated_precondition: f.violated },
            executed_prefix: sim.executed,
            candidate_cost: None,
        };
    }
    if parsed.truncated {
        return PlanOutcome {
            class: OutcomeClass::Incomplete { reason: IncompleteReason::Truncated },
            executed_prefix: sim.executed,
            candidate_cost: None,
        };
    }
    let cost = parsed.steps.len();
    let class = if goal_satisfied(&sim.final_state, t) {
        OutcomeClass::Valid { optimal: reference_cost.map(|r| r == cost) }
    } else {
        OutcomeClass::Incomplete { reason: IncompleteReason::GoalNotReached }
    };
    PlanOutcome { class, executed_prefix: sim.executed, candidate_cost: Some(cost) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pddl::{bundled, ground_task, parse_problem};

    const FOUR_BLOCKS_PLAN: &str = "unstack b4 b2, put-down b4, pick-up b1, stack b1 b2, pick-up b4, stack b4 b1";

    fn bw(problem: &str) -> GroundTask {
        let dom = bundled::domain(bundled::BLOCKSWORLD);
        ground_task(&dom, &parse_problem(problem, &dom).unwrap()).unwrap()
    }

    fn four_blocks() -> GroundTask {
        bw(include_str!("../tests/fixtures/bw_four_blocks.pddl"))
    }

    #[test]
    fn four_blocks_plan_is_valid_and_optimal() {
        let t = four_blocks();
        let out = classify_plan(&t, FOUR_BLOCKS_PLAN, Some(6));
        assert_eq!(out.class, OutcomeClass::Valid { optimal: Some(true) });
        assert_eq!(out.executed_prefix, 6);
        assert_eq!(classify_plan(&t, FOUR_BLOCKS_PLAN, None).class, OutcomeClass::Valid { optimal: None });
    }

    #[test]
    fn empty_plan_keeps_init() {
        let t = four_blocks();
        let sim = simulate_plan(&t, &[]);
        assert_eq!(&sim.final_state, t.init());
        assert!(sim.failure.is_none());
        let out = classify_plan(&t, "", Some(6));
        assert_eq!(out.class, OutcomeClass::Incomplete { reason: IncompleteReason::GoalNotReached });
    }

    #[test]
    fn looping_generation_fails_at_step_six() {
        // Tower b2 / b4 / b1 / b3, as implied by the reference plan.
        let t = bw("(define (problem f3) (:domain blocksworld) (:objects b1 b2 b3 b4)
            (:init (handempty) (clear b2) (on b2 b4) (on b4 b1) (on b1 b3) (ontable b3))
            (:goal (and (on b4 b2) (on b2 b1))))");
        let actual = "unstack b2 b4, put-down b2, unstack b4 b1, put-down b4, unstack b1 b3, put-down b1, \
                      pick-up b2, stack b2 b1, pick-up b4, stack b4 b2";
        assert!(classify_plan(&t, actual, None).class.is_valid());
        let generated = "unstack b2 b4, put-down b2, unstack b4 b1, put-down b4, unstack b1 b3, put-down b4, \
                         unstack b4 b1, put-down b4, unstack b1 b3, put-down b4, unstack b4 b2, put-down b4, \
                         unstack b2 b4, stack b2 b1, pick-up b4, stack b4 b2";
        let out = classify_plan(&t, generated, None);
        assert_eq!(
            out.class,
            OutcomeClass::Failed { step: 6, violated_precondition: Some("holding b4".into()) }
        );
        assert_eq!(out.executed_prefix, 5);
    }

    #[test]
    fn cut_off_generation_is_incomplete() {
        let t = bw("(define (problem f3b) (:domain blocksworld) (:objects b1 b3 b4)
            (:init (handempty) (clear b1) (on b1 b3) (ontable b3) (clear b4) (ontable b4))
            (:goal (and (on b4 b1))))");
        assert_eq!(
            classify_plan(&t, "unstack b1 b3, put-down b1, pick-up b4, stack b4 b1", Some(4)).class,
            OutcomeClass::Valid { optimal: Some(true) }
        );
        let out = classify_plan(&t, "unstack b1 b3, put-down b1, pick-up", Some(4));
        assert_eq!(out.class, OutcomeClass::Incomplete { reason: IncompleteReason::Truncated });
        assert_eq!(out.executed_prefix, 2);
    }

    #[test]
    fn padded_plan_is_not_optimal() {
        let t = four_blocks();
        let padded = "unstack b4 b2, put-down b4, pick-up b4, put-down b4, pick-up b1, stack b1 b2, pick-up b4, stack b4 b1";
        let out = classify_plan(&t, padded, Some(6));
        assert_eq!(out.class, OutcomeClass::Valid { optimal: Some(false) });
        assert_eq!(out.candidate_cost, Some(8));
    }

    #[test]
    fn unknown_action_fails_at_its_position() {
        let t = four_blocks();
        let out = classify_plan(&t, "unstack b4 b2, fly b4, put-down b4", None);
        assert_eq!(out.class, OutcomeClass::Failed { step: 2, violated_precondition: None });
    }

    #[test]
    fn goal_reached_early_then_undone_is_incomplete() {
        let t = four_blocks();
        let sim_text = format!("{FOUR_BLOCKS_PLAN}, unstack b4 b1");
        let parsed = parse_plan_text(&sim_text, &t);
        let sim = simulate_plan(&t, &parsed.steps);
        assert_eq!(sim.goal_first_reached, Some(6));
        let out = classify_plan(&t, &sim_text, Some(6));
        assert_eq!(out.class, OutcomeClass::Incomplete { reason: IncompleteReason::GoalNotReached });
    }

    #[test]
    fn json_encoding() {
        let t = four_blocks();
        let v = serde_json::to_value(classify_plan(&t, FOUR_BLOCKS_PLAN, Some(6))).unwrap();
        assert_eq!(v, serde_json::json!({"class": "valid", "optimal": true}));
        let v = serde_json::to_value(classify_plan(&t, "put-down b4", None)).unwrap();
        assert_eq!(v, serde_json::json!({"class": "failed", "step": 1, "reason": "precondition", "violated": "holding b4"}));
        let v = serde_json::to_value(PlanOutcome::missing()).unwrap();
        assert_eq!(v, serde_json::json!({"class": "incomplete", "reason": "missing_candidate"}));
    }
}
