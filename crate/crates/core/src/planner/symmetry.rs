//! Object symmetries and orbit canonicalization.
//!
//! A swap of objects that maps the atom table, the search
//! actions, the initial state, the goal and the static facts onto themselves
//! is an automorphism of the task. States related by such permutations have
//! the same goal distance, so search may store one representative per orbit.

use std::collections::{HashMap, HashSet};

use crate::pddl::{ActionRef, Atom, AtomId, GroundTask, State};

/// Involutive permutation of atoms and actions induced by an object swap.
struct Transposition {
    /// Atom pairs `(i, j)` with `i < j` exchanged by the permutation.
    swaps: Vec<(AtomId, AtomId)>,
    /// Image of every search action.
    action_image: Vec<u32>,
}

pub struct Symmetries {
    generators: Vec<Transposition>,
}

/// Object permutation made of disjoint transpositions.
type Swap<'a> = HashMap<&'a str, &'a str>;

fn map_atom(atom: &Atom, sigma: &Swap) -> Atom {
    Atom {
        predicate: atom.predicate.clone(),
        args: atom.args.iter().map(|x| sigma.get(x.as_str()).copied().unwrap_or(x).to_string()).collect(),
    }
}

impl Symmetries {
    /// Object swaps that are task automorphisms: plain transpositions, and
    /// for objects owning others (a robot and its grippers) the swap of both
    /// owners together with their owned objects. `None` when there is none.
    pub fn detect(task: &GroundTask) -> Option<Self> {
        let objects = task.objects();
        let init: HashSet<AtomId> = task.init().iter().collect();
        let goal: HashSet<AtomId> = task.goal().iter().copied().collect();
        let facts: Vec<Atom> = task
            .init()
            .iter()
            .chain(task.goal().iter().copied())
            .map(|id| task.atom(id).clone())
            .chain(task.statics().iter().cloned())
            .collect();
        let owned = |a: &str| -> Vec<(String, &str)> {
            let mut out: Vec<(String, &str)> = objects
                .iter()
                .filter(|&&c| c != a)
                .filter_map(|&c| {
                    let with_c: Vec<&Atom> = facts.iter().filter(|f| f.args.iter().any(|x| x == c)).collect();
                    let owned = !with_c.is_empty() && with_c.iter().all(|f| f.args.iter().any(|x| x == a));
                    owned.then(|| {
                        let mut sig: Vec<String> = with_c
                            .iter()
                            .map(|f| {
                                let args: Vec<&str> = f
                                    .args
                                    .iter()
                                    .map(|x| if x == a { "#" } else if x == c { "@" } else { x.as_str() })
                                    .collect();
                                format!("{} {}", f.predicate, args.join(" "))
                            })
                            .collect();
                        sig.sort();
                        (sig.join(","), c)
                    })
                })
                .collect();
            out.sort();
            out
        };
        let mut generators = Vec::new();
        for (i, &a) in objects.iter().enumerate() {
            for &b in &objects[i + 1..] {
                let mut sigma: Swap = HashMap::from([(a, b), (b, a)]);
                if let Some(t) = Self::check(task, &sigma, &init, &goal) {
                    generators.push(t);
                    continue;
                }
                let (oa, ob) = (owned(a), owned(b));
                let matched = !oa.is_empty()
                    && oa.len() == ob.len()
                    && oa.iter().zip(&ob).all(|(x, y)| x.0 == y.0 && x.1 != b && y.1 != a);
                if matched {
                    for ((_, x), (_, y)) in oa.iter().zip(&ob) {
                        sigma.insert(x, y);
                        sigma.insert(y, x);
                    }
                    if let Some(t) = Self::check(task, &sigma, &init, &goal) {
                        generators.push(t);
                    }
                }
            }
        }
        (!generators.is_empty()).then_some(Symmetries { generators })
    }

    fn check(task: &GroundTask, sigma: &Swap, init: &HashSet<AtomId>, goal: &HashSet<AtomId>) -> Option<Transposition> {
        if task.statics().iter().any(|s| !task.statics().contains(&map_atom(s, sigma))) {
            return None;
        }
        let mut image = Vec::with_capacity(task.num_atoms());
        for (id, atom) in task.atoms().iter().enumerate() {
            let j = task.atom_id(&map_atom(atom, sigma))?;
            let id = id as AtomId;
            if init.contains(&id) != init.contains(&j) || goal.contains(&id) != goal.contains(&j) {
                return None;
            }
            image.push(j);
        }
        let mapped = |ids: &[AtomId]| {
            let mut v: Vec<AtomId> = ids.iter().map(|&x| image[x as usize]).collect();
            v.sort_unstable();
            v
        };
        let sorted = |ids: &[AtomId]| {
            let mut v = ids.to_vec();
            v.sort_unstable();
            v
        };
        let mut action_image = Vec::with_capacity(task.actions().len());
        for act in task.actions() {
            let args: Vec<&str> = act.args.iter().map(|x| sigma.get(x.as_str()).copied().unwrap_or(x)).collect();
            let Some(ActionRef::Search(k)) = task.resolve(&act.schema, &args) else {
                return None;
            };
            let other = &task.actions()[k];
            let same = other.cost == act.cost
                && sorted(&other.pre_pos) == mapped(&act.pre_pos)
                && sorted(&other.pre_neg) == mapped(&act.pre_neg)
                && sorted(&other.add) == mapped(&act.add)
                && sorted(&other.del) == mapped(&act.del);
            if !same {
                return None;
            }
            action_image.push(k as u32);
        }
        let swaps = image.iter().enumerate().filter(|&(i, &j)| (i as AtomId) < j).map(|(i, &j)| (i as AtomId, j)).collect();
        Some(Transposition { swaps, action_image })
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Rewrites `s` into a representative of its orbit by applying
    /// transpositions while each one makes it lexicographically smaller.
    /// The applied generators are appended to `trace` in order.
    pub fn canonicalize(&self, s: &mut State, trace: &mut Vec<u16>) {
        loop {
            let mut improved = false;
            for (k, t) in self.generators.iter().enumerate() {
                // Swaps are sorted by their lower atom, so the first
                // differing pair decides the comparison.
                let first = t.swaps.iter().find(|&&(i, j)| s.contains(i) != s.contains(j));
                if let Some(&(_, j)) = first {
                    if s.contains(j) {
                        for &(i, j) in &t.swaps {
                            let (x, y) = (s.contains(i), s.contains(j));
                            if x != y {
                                if y {
                                    s.insert(i);
                                    s.remove(j);
                                } else {
                                    s.insert(j);
                                    s.remove(i);
                                }
                            }
                        }
                        trace.push(k as u16);
                        improved = true;
                    }
                }
            }
            if !improved {
                return;
            }
        }
    }

    /// Maps `action` through the inverse of the permutation recorded in
    /// `trace`.
    pub fn unmap_action(&self, action: u32, trace: &[u16]) -> u32 {
        trace.iter().rev().fold(action, |a, &k| self.generators[k as usize].action_image[a as usize])
    }
}
