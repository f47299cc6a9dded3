use std::collections::HashSet;

use super::model::*;
use super::sexpr::{read_document, Pos, Sexp};
use super::PddlError;

const SUPPORTED_REQUIREMENTS: &[&str] = &[":strips", ":typing", ":negative-preconditions"];

/// Parses a STRIPS+typing domain definition.
pub fn parse_domain(text: &str) -> Result<Domain, PddlError> {
    let doc = read_document(text)?;
    let items = expect_define(&doc)?;
    let name = header_name(&items[1], "domain")?;

    let mut dom = Domain { name, requirements: vec![], types: vec![], predicates: vec![], actions: vec![] };
    for section in &items[2..] {
        let list = section.as_list().ok_or_else(|| syntax(section.pos(), "expected a section list"))?;
        let key = section.head().ok_or_else(|| syntax(section.pos(), "expected a section keyword"))?;
        match key {
            ":requirements" => dom.requirements = parse_requirements(&list[1..])?,
            ":types" => {
                for (name, parent) in parse_typed_list(&list[1..], false)? {
                    dom.types.push(TypeDecl { name, parent });
                }
            }
            ":predicates" => {
                for p in &list[1..] {
                    dom.predicates.push(parse_predicate_schema(p)?);
                }
            }
            ":action" => dom.actions.push(parse_action(list, section.pos())?),
            other => return Err(unsupported(other, section.pos())),
        }
    }
    dom.validate()?;
    Ok(dom)
}

/// Parses a problem and validates it against `dom`.
pub fn parse_problem(text: &str, dom: &Domain) -> Result<Problem, PddlError> {
    let doc = read_document(text)?;
    let items = expect_define(&doc)?;
    let name = header_name(&items[1], "problem")?;

    let mut prob = Problem { name, domain_name: String::new(), objects: vec![], init: vec![], goal: vec![] };
    let mut seen_init = HashSet::new();
    for section in &items[2..] {
        let list = section.as_list().ok_or_else(|| syntax(section.pos(), "expected a section list"))?;
        let key = section.head().ok_or_else(|| syntax(section.pos(), "expected a section keyword"))?;
        match key {
            ":domain" => {
                prob.domain_name = list
                    .get(1)
                    .and_then(Sexp::as_atom)
                    .ok_or_else(|| syntax(section.pos(), "expected domain name"))?
                    .to_string();
            }
            ":requirements" => {
                parse_requirements(&list[1..])?;
            }
            ":objects" => {
                for (name, type_name) in parse_typed_list(&list[1..], false)? {
                    prob.objects.push(TypedObject { name, type_name });
                }
            }
            ":init" => {
                for fact in &list[1..] {
                    if fact.head() == Some("not") || fact.head() == Some("=") {
                        return Err(unsupported(fact.head().unwrap(), fact.pos()));
                    }
                    let atom = parse_ground_atom(fact)?;
                    if seen_init.insert(atom.clone()) {
                        prob.init.push(atom);
                    }
                }
            }
            ":goal" => {
                let gd = list.get(1).ok_or_else(|| syntax(section.pos(), "empty goal section"))?;
                prob.goal = parse_goal(gd)?;
            }
            other => return Err(unsupported(other, section.pos())),
        }
    }
    prob.validate(dom)?;
    Ok(prob)
}

fn syntax(pos: Pos, msg: &str) -> PddlError {
    PddlError::Syntax { pos, msg: msg.to_string() }
}

fn unsupported(construct: &str, pos: Pos) -> PddlError {
    PddlError::Unsupported { construct: construct.to_string(), pos }
}

fn expect_define(doc: &Sexp) -> Result<&[Sexp], PddlError> {
    match doc.as_list() {
        Some(items) if items.len() >= 2 && items[0].as_atom() == Some("define") => Ok(items),
        _ => Err(syntax(doc.pos(), "expected (define ...)")),
    }
}

fn header_name(header: &Sexp, kind: &str) -> Result<String, PddlError> {
    match header.as_list() {
        Some([Sexp::Atom(k, _), Sexp::Atom(name, _)]) if k == kind => Ok(name.clone()),
        _ => Err(syntax(header.pos(), &format!("expected ({kind} <name>)"))),
    }
}

fn parse_requirements(items: &[Sexp]) -> Result<Vec<String>, PddlError> {
    items
        .iter()
        .map(|r| {
            let flag = r.as_atom().ok_or_else(|| syntax(r.pos(), "expected requirement flag"))?;
            if SUPPORTED_REQUIREMENTS.contains(&flag) {
                Ok(flag.to_string())
            } else {
                Err(unsupported(flag, r.pos()))
            }
        })
        .collect()
}

/// `a b - t c` → [(a,t), (b,t), (c,object)]. With `vars`, names must start with `?`
/// and are returned without it.
fn parse_typed_list(items: &[Sexp], vars: bool) -> Result<Vec<(String, String)>, PddlError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let item = &items[i];
        let tok = match item {
            Sexp::Atom(t, _) => t.as_str(),
            Sexp::List(..) => {
                let construct = item.head().unwrap_or("(...)");
                return Err(unsupported(construct, item.pos()));
            }
        };
        if tok == "-" {
            let ty = items.get(i + 1).ok_or_else(|| syntax(item.pos(), "missing type after '-'"))?;
            let ty = match ty {
                Sexp::Atom(t, _) => t.clone(),
                Sexp::List(..) => return Err(unsupported(ty.head().unwrap_or("(...)"), ty.pos())),
            };
            if pending.is_empty() {
                return Err(syntax(item.pos(), "type annotation without names"));
            }
            out.extend(pending.drain(..).map(|n| (n, ty.clone())));
            i += 2;
            continue;
        }
        let name = if vars {
            tok.strip_prefix('?').ok_or_else(|| syntax(item.pos(), "expected a ?variable"))?
        } else {
            tok
        };
        if name.is_empty() {
            return Err(syntax(item.pos(), "empty identifier"));
        }
        pending.push(name.to_string());
        i += 1;
    }
    out.extend(pending.into_iter().map(|n| (n, ROOT_TYPE.to_string())));
    Ok(out)
}

fn parse_predicate_schema(p: &Sexp) -> Result<PredicateSchema, PddlError> {
    let list = p.as_list().ok_or_else(|| syntax(p.pos(), "expected predicate declaration"))?;
    let name = list
        .first()
        .and_then(Sexp::as_atom)
        .ok_or_else(|| syntax(p.pos(), "expected predicate name"))?;
    let params = parse_typed_list(&list[1..], true)?
        .into_iter()
        .map(|(name, type_name)| TypedVar { name, type_name })
        .collect();
    Ok(PredicateSchema { name: name.to_string(), params })
}

fn parse_action(list: &[Sexp], pos: Pos) -> Result<ActionSchema, PddlError> {
    let name = list
        .get(1)
        .and_then(Sexp::as_atom)
        .ok_or_else(|| syntax(pos, "expected action name"))?;
    let mut action = ActionSchema { name: name.to_string(), params: vec![], preconditions: vec![], effects: vec![] };
    let mut i = 2;
    while i < list.len() {
        let key = list[i].as_atom().ok_or_else(|| syntax(list[i].pos(), "expected action keyword"))?;
        let body = list.get(i + 1).ok_or_else(|| syntax(list[i].pos(), "missing value for keyword"))?;
        match key {
            ":parameters" => {
                let items = body.as_list().ok_or_else(|| syntax(body.pos(), "expected parameter list"))?;
                action.params = parse_typed_list(items, true)?
                    .into_iter()
                    .map(|(name, type_name)| TypedVar { name, type_name })
                    .collect();
            }
            ":precondition" => action.preconditions = parse_conjunction(body, false)?,
            ":effect" => action.effects = parse_conjunction(body, true)?,
            other => return Err(unsupported(other, list[i].pos())),
        }
        i += 2;
    }
    Ok(action)
}

const ADL_CONNECTIVES: &[&str] = &["or", "imply", "exists", "forall", "when", "=", "either"];
const NUMERIC_EFFECTS: &[&str] = &["increase", "decrease", "assign", "scale-up", "scale-down"];

fn parse_conjunction(gd: &Sexp, effect: bool) -> Result<Vec<Literal>, PddlError> {
    let list = gd.as_list().ok_or_else(|| syntax(gd.pos(), "expected a formula"))?;
    if list.is_empty() {
        return Ok(vec![]);
    }
    if gd.head() == Some("and") {
        list[1..].iter().map(|l| parse_schema_literal(l, effect)).collect()
    } else {
        Ok(vec![parse_schema_literal(gd, effect)?])
    }
}

fn parse_schema_literal(l: &Sexp, effect: bool) -> Result<Literal, PddlError> {
    let head = l.head().ok_or_else(|| syntax(l.pos(), "expected a literal"))?;
    if ADL_CONNECTIVES.contains(&head) || head == "and" || (effect && NUMERIC_EFFECTS.contains(&head)) {
        return Err(unsupported(head, l.pos()));
    }
    if head == "not" {
        let inner = match l.as_list() {
            Some([_, inner]) => inner,
            _ => return Err(syntax(l.pos(), "(not ...) takes exactly one atom")),
        };
        let mut lit = parse_schema_literal(inner, effect)?;
        if lit.negated {
            return Err(unsupported("not (nested)", l.pos()));
        }
        lit.negated = true;
        return Ok(lit);
    }
    let items = l.as_list().unwrap();
    let mut args = Vec::with_capacity(items.len() - 1);
    for a in &items[1..] {
        let tok = a.as_atom().ok_or_else(|| syntax(a.pos(), "expected a term"))?;
        match tok.strip_prefix('?') {
            Some(v) if !v.is_empty() => args.push(v.to_string()),
            _ => return Err(unsupported("constant term in action schema", a.pos())),
        }
    }
    Ok(Literal::positive(head, args))
}

fn parse_ground_atom(fact: &Sexp) -> Result<Atom, PddlError> {
    let items = fact.as_list().ok_or_else(|| syntax(fact.pos(), "expected an atom"))?;
    let mut parts = Vec::with_capacity(items.len());
    for it in items {
        let tok = it.as_atom().ok_or_else(|| syntax(it.pos(), "expected an identifier"))?;
        if tok.starts_with('?') {
            return Err(syntax(it.pos(), "variables are not allowed in ground atoms"));
        }
        parts.push(tok.to_string());
    }
    if parts.is_empty() {
        return Err(syntax(fact.pos(), "empty atom"));
    }
    let predicate = parts.remove(0);
    Ok(Atom { predicate, args: parts })
}

fn parse_goal(gd: &Sexp) -> Result<Vec<Atom>, PddlError> {
    let list = gd.as_list().ok_or_else(|| syntax(gd.pos(), "expected a goal formula"))?;
    let conjuncts: &[Sexp] = match gd.head() {
        None if list.is_empty() => &[],
        Some("and") => &list[1..],
        _ => std::slice::from_ref(gd),
    };
    let mut goal = Vec::new();
    for c in conjuncts {
        match c.head() {
            Some("not") => {
                let shown = c.as_list().and_then(|l| l.get(1)).map(render).unwrap_or_default();
                return Err(PddlError::NegativeGoal(shown));
            }
            Some(h) if ADL_CONNECTIVES.contains(&h) || h == "and" => return Err(unsupported(h, c.pos())),
            _ => {}
        }
        let atom = parse_ground_atom(c)?;
        if !goal.contains(&atom) {
            goal.push(atom);
        }
    }
    Ok(goal)
}

fn render(s: &Sexp) -> String {
    match s {
        Sexp::Atom(a, _) => a.clone(),
        Sexp::List(items, _) => format!("({})", items.iter().map(render).collect::<Vec<_>>().join(" ")),
    }
}
