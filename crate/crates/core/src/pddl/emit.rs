use std::fmt::Write;

use super::model::*;

/// Order in which [`emit_problem_with`] writes `:init` facts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitOrder {
    /// Sorted by predicate, then arguments.
    #[default]
    Lexicographic,
    /// As stored in the problem.
    Source,
}

/// Groups consecutive names sharing a type: `a b - t c - u`.
fn typed_list<'a>(items: impl Iterator<Item = (&'a str, &'a str)>, with_types: bool, prefix: &str) -> String {
    let items: Vec<_> = items.collect();
    let mut out = String::new();
    let mut i = 0;
    while i < items.len() {
        let ty = items[i].1;
        let mut j = i;
        while j < items.len() && items[j].1 == ty {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(prefix);
            out.push_str(items[j].0);
            j += 1;
        }
        if with_types {
            write!(out, " - {ty}").unwrap();
        }
        i = j;
    }
    out
}

fn literal(l: &Literal) -> String {
    let mut atom = format!("({}", l.predicate);
    for a in &l.args {
        write!(atom, " ?{a}").unwrap();
    }
    atom.push(')');
    if l.negated {
        format!("(not {atom})")
    } else {
        atom
    }
}

fn conjunction(lits: &[Literal]) -> String {
    let parts: Vec<_> = lits.iter().map(literal).collect();
    format!("(and{}{})", if parts.is_empty() { "" } else { " " }, parts.join(" "))
}

fn is_typed(dom: &Domain) -> bool {
    !dom.types.is_empty() || dom.requirements.iter().any(|r| r == ":typing")
}

/// Canonical PDDL text for a domain; schemas keep declaration order.
pub fn emit_domain(dom: &Domain) -> String {
    let with_types = is_typed(dom);
    let mut out = String::new();
    writeln!(out, "(define (domain {})", dom.name).unwrap();
    if !dom.requirements.is_empty() {
        writeln!(out, "  (:requirements {})", dom.requirements.join(" ")).unwrap();
    }
    if !dom.types.is_empty() {
        let list = typed_list(dom.types.iter().map(|t| (t.name.as_str(), t.parent.as_str())), true, "");
        writeln!(out, "  (:types {list})").unwrap();
    }
    out.push_str("  (:predicates");
    for p in &dom.predicates {
        let params = typed_list(p.params.iter().map(|v| (v.name.as_str(), v.type_name.as_str())), with_types, "?");
        if params.is_empty() {
            write!(out, "\n    ({})", p.name).unwrap();
        } else {
            write!(out, "\n    ({} {params})", p.name).unwrap();
        }
    }
    out.push_str(")\n");
    for a in &dom.actions {
        let params = typed_list(a.params.iter().map(|v| (v.name.as_str(), v.type_name.as_str())), with_types, "?");
        writeln!(out, "  (:action {}", a.name).unwrap();
        writeln!(out, "    :parameters ({params})").unwrap();
        writeln!(out, "    :precondition {}", conjunction(&a.preconditions)).unwrap();
        writeln!(out, "    :effect {})", conjunction(&a.effects)).unwrap();
    }
    out.push_str(")\n");
    out
}

/// Canonical PDDL text for a problem with lexicographically ordered `:init`.
pub fn emit_problem(prob: &Problem) -> String {
    emit_problem_with(prob, InitOrder::Lexicographic)
}

pub fn emit_problem_with(prob: &Problem, order: InitOrder) -> String {
    let with_types = prob.objects.iter().any(|o| o.type_name != ROOT_TYPE);
    let mut out = String::new();
    writeln!(out, "(define (problem {})", prob.name).unwrap();
    writeln!(out, "  (:domain {})", prob.domain_name).unwrap();
    let objects = typed_list(prob.objects.iter().map(|o| (o.name.as_str(), o.type_name.as_str())), with_types, "");
    writeln!(out, "  (:objects {objects})").unwrap();

    let mut init: Vec<&Atom> = prob.init.iter().collect();
    if order == InitOrder::Lexicographic {
        init.sort();
    }
    out.push_str("  (:init");
    for a in init {
        write!(out, "\n    {}", a.to_pddl()).unwrap();
    }
    out.push_str(")\n");
    out.push_str("  (:goal (and");
    for a in &prob.goal {
        write!(out, "\n    {}", a.to_pddl()).unwrap();
    }
    out.push_str("))\n)\n");
    out
}
