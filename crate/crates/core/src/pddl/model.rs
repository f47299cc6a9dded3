use std::collections::{HashMap, HashSet};
use std::fmt;

use super::PddlError;

/// Root of every type hierarchy.
pub const ROOT_TYPE: &str = "object";

/// A ground atom such as `on b1 b2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl Atom {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        Atom { predicate: predicate.into(), args: args.into_iter().map(Into::into).collect() }
    }

    /// Parses the space-separated form, e.g. `"on b1 b2"`.
    pub fn parse_spaced(text: &str) -> Option<Atom> {
        let mut parts = text.split_whitespace();
        let predicate = parts.next()?;
        Some(Atom::new(predicate, parts))
    }

    /// PDDL form, e.g. `(on b1 b2)`.
    pub fn to_pddl(&self) -> String {
        if self.args.is_empty() {
            format!("({})", self.predicate)
        } else {
            format!("({} {})", self.predicate, self.args.join(" "))
        }
    }
}

/// Space-separated form, e.g. `on b1 b2`.
impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        Ok(())
    }
}

/// A schema variable with its declared type. Names are stored without `?`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedVar {
    pub name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypedObject {
    pub name: String,
    pub type_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<TypedVar>,
}

impl PredicateSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_types(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.type_name.as_str())
    }
}

/// A schema literal; `args` are parameter names of the owning action.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub negated: bool,
    pub predicate: String,
    pub args: Vec<String>,
}

impl Literal {
    pub fn positive(predicate: impl Into<String>, args: Vec<String>) -> Self {
        Literal { negated: false, predicate: predicate.into(), args }
    }

    pub fn negative(predicate: impl Into<String>, args: Vec<String>) -> Self {
        Literal { negated: true, predicate: predicate.into(), args }
    }

    /// Instantiates the literal's atom under a parameter binding.
    pub fn ground(&self, binding: &HashMap<&str, &str>) -> Atom {
        Atom {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|v| binding[v.as_str()].to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedVar>,
    pub preconditions: Vec<Literal>,
    pub effects: Vec<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    /// Declared types in declaration order; `object` is implicit.
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<PredicateSchema>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        name == ROOT_TYPE || self.types.iter().any(|t| t.name == name)
    }

    pub fn parent_of(&self, name: &str) -> Option<&str> {
        self.types.iter().find(|t| t.name == name).map(|t| t.parent.as_str())
    }

    /// True when `child` equals `ancestor` or transitively derives from it.
    pub fn is_subtype(&self, child: &str, ancestor: &str) -> bool {
        if ancestor == ROOT_TYPE {
            return true;
        }
        let mut cur = Some(child);
        let mut steps = 0;
        while let Some(t) = cur {
            if t == ancestor {
                return true;
            }
            steps += 1;
            if steps > self.types.len() + 1 {
                return false;
            }
            cur = self.parent_of(t);
        }
        false
    }

    /// Whether any declared type derives from `name`.
    pub fn has_subtypes(&self, name: &str) -> bool {
        self.types.iter().any(|t| t.parent == name)
    }

    /// Checks the structural invariants of a domain.
    pub fn validate(&self) -> Result<(), PddlError> {
        let mut seen_types = HashSet::new();
        for t in &self.types {
            if t.name == ROOT_TYPE || !seen_types.insert(t.name.as_str()) {
                return Err(PddlError::Invalid(format!("type `{}` declared twice", t.name)));
            }
        }
        for t in &self.types {
            if !self.has_type(&t.parent) {
                return Err(PddlError::UndeclaredType(t.parent.clone()));
            }
            // Walk to the root; more steps than declared types means a cycle.
            let mut cur = t.name.as_str();
            let mut steps = 0;
            while cur != ROOT_TYPE {
                steps += 1;
                if steps > self.types.len() {
                    return Err(PddlError::Invalid(format!("type hierarchy cycle through `{}`", t.name)));
                }
                cur = self.parent_of(cur).unwrap_or(ROOT_TYPE);
            }
        }

        let mut preds = HashSet::new();
        for p in &self.predicates {
            if !preds.insert(p.name.as_str()) {
                return Err(PddlError::Invalid(format!("predicate `{}` declared twice", p.name)));
            }
            for v in &p.params {
                if !self.has_type(&v.type_name) {
                    return Err(PddlError::UndeclaredType(v.type_name.clone()));
                }
            }
        }

        let mut names = HashSet::new();
        for a in &self.actions {
            if !names.insert(a.name.as_str()) {
                return Err(PddlError::Invalid(format!("action `{}` declared twice", a.name)));
            }
            let mut params = HashSet::new();
            for v in &a.params {
                if !self.has_type(&v.type_name) {
                    return Err(PddlError::UndeclaredType(v.type_name.clone()));
                }
                if !params.insert(v.name.as_str()) {
                    return Err(PddlError::Invalid(format!("parameter `?{}` repeated in `{}`", v.name, a.name)));
                }
            }
            for lit in a.preconditions.iter().chain(&a.effects) {
                let schema = self
                    .predicate(&lit.predicate)
                    .ok_or_else(|| PddlError::UndeclaredPredicate(lit.predicate.clone()))?;
                if schema.arity() != lit.args.len() {
                    return Err(PddlError::Arity {
                        predicate: lit.predicate.clone(),
                        expected: schema.arity(),
                        found: lit.args.len(),
                    });
                }
                for arg in &lit.args {
                    if !params.contains(arg.as_str()) {
                        return Err(PddlError::Invalid(format!(
                            "variable `?{arg}` in `{}` is not a parameter",
                            a.name
                        )));
                    }
                }
            }
            for (i, e) in a.effects.iter().enumerate() {
                let clash = a.effects[..i]
                    .iter()
                    .any(|o| o.negated != e.negated && o.predicate == e.predicate && o.args == e.args);
                if clash {
                    return Err(PddlError::Invalid(format!(
                        "action `{}` both adds and deletes `{}`",
                        a.name, e.predicate
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub domain_name: String,
    pub objects: Vec<TypedObject>,
    /// Initial atoms, deduplicated, in source order.
    pub init: Vec<Atom>,
    /// Goal atoms (positive conjunction), in source order.
    pub goal: Vec<Atom>,
}

impl Problem {
    pub fn object(&self, name: &str) -> Option<&TypedObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    /// Checks the problem against its domain.
    pub fn validate(&self, dom: &Domain) -> Result<(), PddlError> {
        if self.domain_name != dom.name {
            return Err(PddlError::DomainMismatch { expected: dom.name.clone(), found: self.domain_name.clone() });
        }
        let mut names = HashSet::new();
        for o in &self.objects {
            if !names.insert(o.name.as_str()) {
                return Err(PddlError::Invalid(format!("object `{}` declared twice", o.name)));
            }
            if !dom.has_type(&o.type_name) {
                return Err(PddlError::UndeclaredType(o.type_name.clone()));
            }
        }
        for atom in self.init.iter().chain(&self.goal) {
            let schema = dom
                .predicate(&atom.predicate)
                .ok_or_else(|| PddlError::UndeclaredPredicate(atom.predicate.clone()))?;
            if schema.arity() != atom.args.len() {
                return Err(PddlError::Arity {
                    predicate: atom.predicate.clone(),
                    expected: schema.arity(),
                    found: atom.args.len(),
                });
            }
            for a in &atom.args {
                if !names.contains(a.as_str()) {
                    return Err(PddlError::UndeclaredObject(a.clone()));
                }
            }
        }
        Ok(())
    }

    /// Copy with init and goal sorted lexicographically.
    pub fn canonical(&self) -> Problem {
        let mut p = self.clone();
        p.init.sort();
        p.goal.sort();
        p
    }
}
