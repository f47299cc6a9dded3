//! The tagged single-line task encoding and comma-separated plan strings.
//!
//! A task renders as
//!
//! ```text
//! <GOAL> on b1 b2, clear b1 <INIT> handempty, ... <ACTION> pick-up <PRE> clear x, ... <EFFECT> not ontable x, ...
//! ```
//!
//! Object declarations and types are dropped; schema variables appear under
//! their parameter names without `?`. Decoding reattaches types by matching
//! the action sections against a [`Registry`] of known domains.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::bundled;
use crate::pddl::{
    ActionRef, ActionSchema, Atom, Domain, GroundTask, Literal, Plan, PredicateSchema, Problem, TypedObject,
    TypedVar, ROOT_TYPE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("malformed task string: {0}")]
    Malformed(String),
    #[error("predicate `{predicate}` used with {first} and {second} arguments")]
    ArityConflict { predicate: String, first: usize, second: usize },
}

/// Surface form of the five section tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagStyle {
    /// `<GOAL>`
    #[default]
    Angle,
    /// `[GOAL]`
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Goal,
    Init,
    Action,
    Pre,
    Effect,
}

impl Tag {
    const ALL: [Tag; 5] = [Tag::Goal, Tag::Init, Tag::Action, Tag::Pre, Tag::Effect];

    fn word(self) -> &'static str {
        match self {
            Tag::Goal => "GOAL",
            Tag::Init => "INIT",
            Tag::Action => "ACTION",
            Tag::Pre => "PRE",
            Tag::Effect => "EFFECT",
        }
    }

    fn render(self, style: TagStyle) -> String {
        match style {
            TagStyle::Angle => format!("<{}>", self.word()),
            TagStyle::Square => format!("[{}]", self.word()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSection {
    pub name: String,
    pub pre_text: String,
    pub effect_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearizedTask {
    pub goal_text: String,
    pub init_text: String,
    pub actions: Vec<ActionSection>,
    pub rendered: String,
}

impl LinearizedTask {
    fn assemble(goal_text: String, init_text: String, actions: Vec<ActionSection>, style: TagStyle) -> Self {
        let mut parts: Vec<String> = Vec::new();
        let mut section = |tag: Tag, body: &str| {
            parts.push(tag.render(style));
            if !body.is_empty() {
                parts.push(body.to_string());
            }
        };
        section(Tag::Goal, &goal_text);
        section(Tag::Init, &init_text);
        for a in &actions {
            section(Tag::Action, &a.name);
            section(Tag::Pre, &a.pre_text);
            section(Tag::Effect, &a.effect_text);
        }
        let rendered = parts.join(" ");
        LinearizedTask { goal_text, init_text, actions, rendered }
    }

    /// Splits a rendered string into its sections. Accepts either tag style.
    pub fn parse(text: &str) -> Result<LinearizedTask, CodecError> {
        let mut found: Vec<(Tag, usize, usize)> = Vec::new();
        let bytes = text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let close = match bytes[i] {
                b'<' => b'>',
                b'[' => b']',
                _ => {
                    i += 1;
                    continue;
                }
            };
            let hit = Tag::ALL.iter().find(|t| {
                let w = t.word().as_bytes();
                bytes.len() >= i + w.len() + 2 && &bytes[i + 1..i + 1 + w.len()] == w && bytes[i + 1 + w.len()] == close
            });
            match hit {
                Some(&t) => {
                    let end = i + t.word().len() + 2;
                    found.push((t, i, end));
                    i = end;
                }
                None => i += 1,
            }
        }
        if found.is_empty() {
            return Err(CodecError::Malformed("no section tags".into()));
        }
        if !text[..found[0].1].trim().is_empty() {
            return Err(CodecError::Malformed("text before the first tag".into()));
        }
        let bodies: Vec<(Tag, String)> = found
            .iter()
            .enumerate()
            .map(|(k, &(t, _, end))| {
                let stop = found.get(k + 1).map_or(text.len(), |n| n.1);
                (t, normalize_ws(&text[end..stop]))
            })
            .collect();

        let tags: Vec<Tag> = bodies.iter().map(|b| b.0).collect();
        if tags.len() < 2 || tags[0] != Tag::Goal || tags[1] != Tag::Init || !(tags.len() - 2).is_multiple_of(3) {
            return Err(CodecError::Malformed("expected GOAL, INIT, then ACTION/PRE/EFFECT triples".into()));
        }
        let mut actions = Vec::new();
        for chunk in bodies[2..].chunks(3) {
            if chunk[0].0 != Tag::Action || chunk[1].0 != Tag::Pre || chunk[2].0 != Tag::Effect {
                return Err(CodecError::Malformed("expected ACTION, PRE, EFFECT in order".into()));
            }
            if chunk[0].1.is_empty() || chunk[0].1.contains(' ') {
                return Err(CodecError::Malformed(format!("bad action name `{}`", chunk[0].1)));
            }
            actions.push(ActionSection {
                name: chunk[0].1.to_lowercase(),
                pre_text: chunk[1].1.clone(),
                effect_text: chunk[2].1.clone(),
            });
        }
        let style = if text[found[0].1..].starts_with('[') { TagStyle::Square } else { TagStyle::Angle };
        Ok(LinearizedTask::assemble(bodies[0].1.clone(), bodies[1].1.clone(), actions, style))
    }

    pub fn goal_atoms(&self) -> Result<Vec<Atom>, CodecError> {
        atom_list(&self.goal_text)
    }

    pub fn init_atoms(&self) -> Result<Vec<Atom>, CodecError> {
        atom_list(&self.init_text)
    }
}

impl fmt::Display for LinearizedTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered)
    }
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn chunks(text: &str) -> Result<Vec<&str>, CodecError> {
    if text.trim().is_empty() {
        return Ok(vec![]);
    }
    text.split(',')
        .map(|c| {
            let c = c.trim();
            if c.is_empty() {
                Err(CodecError::Malformed(format!("empty atom in `{text}`")))
            } else {
                Ok(c)
            }
        })
        .collect()
}

fn atom_list(text: &str) -> Result<Vec<Atom>, CodecError> {
    Ok(chunks(text)?.into_iter().filter_map(|c| Atom::parse_spaced(&c.to_lowercase())).collect())
}

fn literal_list(text: &str) -> Result<Vec<Literal>, CodecError> {
    chunks(text)?
        .into_iter()
        .map(|c| {
            let c = c.to_lowercase();
            let mut words: Vec<String> = c.split_whitespace().map(str::to_string).collect();
            let negated = words.len() >= 2 && words[0] == "not";
            if negated {
                words.remove(0);
            }
            let predicate = words.remove(0);
            Ok(Literal { negated, predicate, args: words })
        })
        .collect()
}

fn render_literals(lits: &[Literal]) -> String {
    lits.iter()
        .map(|l| {
            let mut s = String::new();
            if l.negated {
                s.push_str("not ");
            }
            s.push_str(&l.predicate);
            for a in &l.args {
                s.push(' ');
                s.push_str(a);
            }
            s
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn render_atoms(atoms: &[Atom]) -> String {
    atoms.iter().map(Atom::to_string).collect::<Vec<_>>().join(", ")
}

fn action_sections(dom: &Domain) -> Vec<ActionSection> {
    dom.actions
        .iter()
        .map(|a| ActionSection {
            name: a.name.clone(),
            pre_text: render_literals(&a.preconditions),
            effect_text: render_literals(&a.effects),
        })
        .collect()
}

pub fn encode_task(dom: &Domain, prob: &Problem) -> LinearizedTask {
    encode_task_with(dom, prob, TagStyle::Angle)
}

pub fn encode_task_with(dom: &Domain, prob: &Problem, style: TagStyle) -> LinearizedTask {
    LinearizedTask::assemble(render_atoms(&prob.goal), render_atoms(&prob.init), action_sections(dom), style)
}

/// A known domain plus object-name hints for types that predicate
/// signatures alone cannot pin down (e.g. drivers vs. packages, both `locatable`).
#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub tag: String,
    pub domain: Domain,
    /// `(name prefix, type)`; an object named `<prefix><digits>` gets `type`.
    pub type_hints: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    pub entries: Vec<RegistryEntry>,
}

impl Registry {
    /// The four bundled benchmark domains.
    pub fn bundled() -> Registry {
        let hint = |p: &str, t: &str| (p.to_string(), t.to_string());
        let entries = bundled::ALL
            .iter()
            .map(|&(tag, src)| RegistryEntry {
                tag: tag.to_string(),
                domain: bundled::domain(src),
                type_hints: match tag {
                    "dl" => vec![hint("driver", "driver"), hint("truck", "truck"), hint("package", "obj")],
                    _ => vec![],
                },
            })
            .collect();
        Registry { entries }
    }

    pub fn get(&self, tag: &str) -> Option<&RegistryEntry> {
        self.entries.iter().find(|e| e.tag == tag)
    }
}

#[derive(Debug, Clone)]
pub struct DecodedTask {
    pub domain: Domain,
    pub problem: Problem,
    /// Tag of the registry entry whose action sections matched, if any.
    pub registry_tag: Option<String>,
    pub warnings: Vec<String>,
}

/// Rebuilds a domain/problem pair from a rendered task string.
pub fn decode_task(text: &str, registry: Option<&Registry>) -> Result<DecodedTask, CodecError> {
    let lin = LinearizedTask::parse(text)?;
    let goal = lin.goal_atoms()?;
    let init = lin.init_atoms()?;
    let mut schemas = Vec::new();
    for a in &lin.actions {
        schemas.push((a.name.clone(), literal_list(&a.pre_text)?, literal_list(&a.effect_text)?));
    }

    let mut arity: HashMap<&str, usize> = HashMap::new();
    let occurrences = init
        .iter()
        .chain(&goal)
        .map(|a| (a.predicate.as_str(), a.args.len()))
        .chain(schemas.iter().flat_map(|(_, p, e)| p.iter().chain(e).map(|l| (l.predicate.as_str(), l.args.len()))));
    for (p, n) in occurrences {
        match arity.get(p) {
            Some(&m) if m != n => {
                return Err(CodecError::ArityConflict { predicate: p.to_string(), first: m, second: n })
            }
            _ => {
                arity.insert(p, n);
            }
        }
    }

    let mut objects: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for a in init.iter().chain(&goal) {
        for o in &a.args {
            if seen.insert(o.clone()) {
                objects.push(o.clone());
            }
        }
    }

    if let Some(reg) = registry {
        for entry in &reg.entries {
            if action_sections(&entry.domain) != lin.actions {
                continue;
            }
            let declared = init.iter().chain(&goal).all(|a| {
                entry.domain.predicate(&a.predicate).is_some_and(|p| p.arity() == a.args.len())
            });
            if !declared {
                continue;
            }
            let mut warnings = Vec::new();
            let typed: Vec<TypedObject> = objects
                .iter()
                .map(|o| TypedObject { name: o.clone(), type_name: infer_type(entry, o, &init, &goal, &mut warnings) })
                .collect();
            let problem = Problem {
                name: "task".into(),
                domain_name: entry.domain.name.clone(),
                objects: typed,
                init,
                goal,
            };
            return Ok(DecodedTask { domain: entry.domain.clone(), problem, registry_tag: Some(entry.tag.clone()), warnings });
        }
    }

    let domain = synthesize_domain(&schemas, &init, &goal, &arity);
    let problem = Problem {
        name: "task".into(),
        domain_name: domain.name.clone(),
        objects: objects.into_iter().map(|name| TypedObject { name, type_name: ROOT_TYPE.into() }).collect(),
        init,
        goal,
    };
    let warnings = vec!["no registry domain matched the action sections; types are unrecoverable".into()];
    Ok(DecodedTask { domain, problem, registry_tag: None, warnings })
}

fn infer_type(entry: &RegistryEntry, object: &str, init: &[Atom], goal: &[Atom], warnings: &mut Vec<String>) -> String {
    let dom = &entry.domain;
    let mut constraints: Vec<&str> = Vec::new();
    for atom in init.iter().chain(goal) {
        let schema = dom.predicate(&atom.predicate).expect("checked before inference");
        for (arg, ty) in atom.args.iter().zip(schema.param_types()) {
            if arg == object && !constraints.contains(&ty) {
                constraints.push(ty);
            }
        }
    }
    // The most specific constraint must lie below all the others.
    let most_specific = constraints
        .iter()
        .copied()
        .find(|&c| constraints.iter().all(|&o| dom.is_subtype(c, o)))
        .unwrap_or(ROOT_TYPE);
    if constraints.iter().any(|&c| !dom.is_subtype(most_specific, c)) {
        warnings.push(format!("`{object}` has incompatible type constraints {constraints:?}; using object"));
        return ROOT_TYPE.into();
    }
    if !dom.has_subtypes(most_specific) {
        return most_specific.to_string();
    }
    let hinted = entry.type_hints.iter().find(|(prefix, ty)| {
        object.strip_prefix(prefix.as_str()).is_some_and(|rest| rest.chars().all(|c| c.is_ascii_digit()))
            && dom.is_subtype(ty, most_specific)
    });
    match hinted {
        Some((_, ty)) => ty.clone(),
        None => {
            warnings.push(format!("type of `{object}` is ambiguous below `{most_specific}`; using object"));
            ROOT_TYPE.into()
        }
    }
}

type SchemaParts = (String, Vec<Literal>, Vec<Literal>);

fn synthesize_domain(schemas: &[SchemaParts], init: &[Atom], goal: &[Atom], arity: &HashMap<&str, usize>) -> Domain {
    let mut predicates: Vec<PredicateSchema> = Vec::new();
    let mut declare = |name: &str| {
        if predicates.iter().all(|p| p.name != name) {
            let params = (1..=arity[name])
                .map(|i| TypedVar { name: format!("x{i}"), type_name: ROOT_TYPE.into() })
                .collect();
            predicates.push(PredicateSchema { name: name.to_string(), params });
        }
    };
    for (_, pre, eff) in schemas {
        for l in pre.iter().chain(eff) {
            declare(&l.predicate);
        }
    }
    for a in init.iter().chain(goal) {
        declare(&a.predicate);
    }

    let mut negative = false;
    let actions = schemas
        .iter()
        .map(|(name, pre, eff)| {
            let mut params: Vec<TypedVar> = Vec::new();
            for l in pre.iter().chain(eff) {
                for v in &l.args {
                    if params.iter().all(|p| &p.name != v) {
                        params.push(TypedVar { name: v.clone(), type_name: ROOT_TYPE.into() });
                    }
                }
            }
            negative |= pre.iter().any(|l| l.negated);
            ActionSchema { name: name.clone(), params, preconditions: pre.clone(), effects: eff.clone() }
        })
        .collect();
    let mut requirements = vec![":strips".to_string()];
    if negative {
        requirements.push(":negative-preconditions".into());
    }
    Domain { name: "linearized".into(), requirements, types: vec![], predicates, actions }
}

/// A plan rendered as `action arg ..., action arg ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlanText {
    pub rendered: String,
}

impl fmt::Display for PlanText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered)
    }
}

pub fn encode_plan(p: &Plan) -> PlanText {
    PlanText { rendered: p.steps.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(", ") }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedStep {
    Resolved(ActionRef),
    /// Unresolvable chunk, kept in position for the validator.
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedPlan {
    pub steps: Vec<ParsedStep>,
    /// The final chunk named a schema but carried too few arguments.
    pub truncated: bool,
    pub unknown: Vec<String>,
}

impl ParsedPlan {
    pub fn resolved(&self) -> impl Iterator<Item = ActionRef> + '_ {
        self.steps.iter().filter_map(|s| match s {
            ParsedStep::Resolved(r) => Some(*r),
            ParsedStep::Unknown(_) => None,
        })
    }
}

/// Resolves free-form plan text against a task's ground actions. Never fails:
/// malformed text is reported through `unknown` and `truncated`.
pub fn parse_plan_text(text: &str, t: &GroundTask) -> ParsedPlan {
    let lowered = text.to_lowercase();
    let chunks: Vec<&str> = lowered.split(',').map(str::trim).filter(|c| !c.is_empty()).collect();
    let mut out = ParsedPlan::default();
    for (i, chunk) in chunks.iter().enumerate() {
        let mut words = chunk.split_whitespace();
        let name = words.next().unwrap_or_default();
        let args: Vec<&str> = words.collect();
        if let Some(r) = t.resolve(name, &args) {
            out.steps.push(ParsedStep::Resolved(r));
            continue;
        }
        let last = i + 1 == chunks.len();
        if last && t.schema_arity(name).is_some_and(|n| n > args.len()) {
            out.truncated = true;
            continue;
        }
        let normalized = std::iter::once(name).chain(args.iter().copied()).collect::<Vec<_>>().join(" ");
        out.unknown.push(normalized.clone());
        out.steps.push(ParsedStep::Unknown(normalized));
    }
    out
}
