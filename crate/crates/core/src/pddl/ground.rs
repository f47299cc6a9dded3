use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use super::model::*;
use super::PddlError;

pub type AtomId = u32;

/// Truth assignment over a task's fluent atoms (closed world).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    words: Box<[u64]>,
}

impl State {
    pub fn empty(num_atoms: usize) -> Self {
        State { words: vec![0; num_atoms.div_ceil(64)].into_boxed_slice() }
    }

    pub fn from_atoms(num_atoms: usize, atoms: impl IntoIterator<Item = AtomId>) -> Self {
        let mut s = State::empty(num_atoms);
        for a in atoms {
            s.insert(a);
        }
        s
    }

    #[inline]
    pub fn contains(&self, atom: AtomId) -> bool {
        let i = atom as usize;
        self.words.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
    }

    #[inline]
    pub fn insert(&mut self, atom: AtomId) {
        let i = atom as usize;
        self.words[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn remove(&mut self, atom: AtomId) {
        let i = atom as usize;
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// True atom indices in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = AtomId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros();
                bits &= bits - 1;
                Some((wi * 64) as AtomId + b)
            })
        })
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A unit-cost propositional action over a task's atom table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundAction {
    pub schema: String,
    pub args: Vec<String>,
    pub pre_pos: Vec<AtomId>,
    pub pre_neg: Vec<AtomId>,
    pub add: Vec<AtomId>,
    pub del: Vec<AtomId>,
    pub cost: u32,
}

impl GroundAction {
    /// Display form, e.g. `unstack b4 b2`.
    pub fn display_name(&self) -> String {
        let mut s = self.schema.clone();
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_name())
    }
}

/// Where a resolved action lives inside a [`GroundTask`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionRef {
    /// Index into [`GroundTask::actions`].
    Search(usize),
    /// Index into [`GroundTask::idle_actions`]: applicable but state-preserving.
    Idle(usize),
}

#[derive(Debug, Clone)]
pub struct GroundTask {
    atoms: Vec<Atom>,
    atom_index: HashMap<Atom, AtomId>,
    statics: BTreeSet<Atom>,
    actions: Vec<GroundAction>,
    idle_actions: Vec<GroundAction>,
    action_index: HashMap<String, ActionRef>,
    schemas: Vec<(String, usize)>,
    objects: HashSet<String>,
    init: State,
    goal: Vec<AtomId>,
    unreachable_goals: Vec<Atom>,
}

impl GroundTask {
    /// Fluent atom table, sorted by predicate then arguments.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn atom(&self, id: AtomId) -> &Atom {
        &self.atoms[id as usize]
    }

    pub fn atom_id(&self, atom: &Atom) -> Option<AtomId> {
        self.atom_index.get(atom).copied()
    }

    /// Atoms of static predicates that hold in every state.
    pub fn statics(&self) -> &BTreeSet<Atom> {
        &self.statics
    }

    /// Reachable, state-changing ground actions used by search.
    pub fn actions(&self) -> &[GroundAction] {
        &self.actions
    }

    /// Reachable actions whose effects never change a state they apply to.
    pub fn idle_actions(&self) -> &[GroundAction] {
        &self.idle_actions
    }

    pub fn action(&self, r: ActionRef) -> &GroundAction {
        match r {
            ActionRef::Search(i) => &self.actions[i],
            ActionRef::Idle(i) => &self.idle_actions[i],
        }
    }

    /// Looks up a ground action by schema name and arguments.
    pub fn resolve(&self, schema: &str, args: &[&str]) -> Option<ActionRef> {
        let mut key = schema.to_string();
        for a in args {
            key.push(' ');
            key.push_str(a);
        }
        self.action_index.get(&key).copied()
    }

    /// Arity of the named action schema, if the domain declares it.
    pub fn schema_arity(&self, name: &str) -> Option<usize> {
        self.schemas.iter().find(|(n, _)| n == name).map(|&(_, a)| a)
    }

    /// Problem object names, sorted.
    pub fn objects(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.objects.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    pub fn has_object(&self, name: &str) -> bool {
        self.objects.contains(name)
    }

    pub fn init(&self) -> &State {
        &self.init
    }

    pub fn goal(&self) -> &[AtomId] {
        &self.goal
    }

    /// Goal atoms that no sequence of actions can make true.
    pub fn unreachable_goals(&self) -> &[Atom] {
        &self.unreachable_goals
    }

    /// Grounding proved some goal atom unreachable.
    pub fn is_unsolvable(&self) -> bool {
        !self.unreachable_goals.is_empty()
    }

    /// Names of the atoms true in `s`, in table order.
    pub fn describe(&self, s: &State) -> Vec<String> {
        s.iter().map(|a| self.atom(a).to_string()).collect()
    }
}

pub fn is_applicable(s: &State, a: &GroundAction) -> bool {
    a.pre_pos.iter().all(|&p| s.contains(p)) && !a.pre_neg.iter().any(|&p| s.contains(p))
}

/// Successor state; deletes are applied before adds.
pub fn apply_unchecked(s: &State, a: &GroundAction) -> State {
    let mut next = s.clone();
    for &d in &a.del {
        next.remove(d);
    }
    for &p in &a.add {
        next.insert(p);
    }
    next
}

pub fn apply_action(s: &State, a: &GroundAction) -> Result<State, PddlError> {
    if !is_applicable(s, a) {
        return Err(PddlError::Inapplicable(a.display_name()));
    }
    Ok(apply_unchecked(s, a))
}

/// Goal atoms all hold in `s`. Never true for a task with unreachable goals.
pub fn goal_satisfied(s: &State, t: &GroundTask) -> bool {
    !t.is_unsolvable() && t.goal.iter().all(|&g| s.contains(g))
}

/// A unit-cost plan over a particular [`GroundTask`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    pub action: ActionRef,
    pub name: String,
}

impl Plan {
    pub fn from_refs(task: &GroundTask, refs: impl IntoIterator<Item = ActionRef>) -> Self {
        Plan {
            steps: refs
                .into_iter()
                .map(|r| PlanStep { action: r, name: task.action(r).display_name() })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Unit costs: the number of steps.
    pub fn cost(&self) -> usize {
        self.steps.len()
    }

    /// Executes the plan from the task's initial state.
    pub fn execute(&self, task: &GroundTask) -> Result<State, PddlError> {
        self.steps.iter().try_fold(task.init.clone(), |s, step| apply_action(&s, task.action(step.action)))
    }
}

struct Candidate {
    schema: usize,
    args: Vec<String>,
    pre_pos: Vec<usize>,
    pre_neg: Vec<usize>,
    add: Vec<usize>,
    del: Vec<usize>,
}

#[derive(Default)]
struct Interner {
    ids: HashMap<Atom, usize>,
    atoms: Vec<Atom>,
}

impl Interner {
    fn intern(&mut self, atom: Atom) -> usize {
        if let Some(&i) = self.ids.get(&atom) {
            return i;
        }
        let i = self.atoms.len();
        self.ids.insert(atom.clone(), i);
        self.atoms.push(atom);
        i
    }
}

/// Instantiates all schemas over the problem's objects, compiles static
/// predicates away and prunes everything unreachable under delete relaxation.
pub fn ground_task(dom: &Domain, prob: &Problem) -> Result<GroundTask, PddlError> {
    prob.validate(dom)?;
    let object_type: HashMap<&str, &str> =
        prob.objects.iter().map(|o| (o.name.as_str(), o.type_name.as_str())).collect();
    for atom in prob.init.iter().chain(&prob.goal) {
        let schema = dom.predicate(&atom.predicate).expect("validated");
        for (arg, ty) in atom.args.iter().zip(schema.param_types()) {
            let actual = object_type[arg.as_str()];
            if !dom.is_subtype(actual, ty) {
                return Err(PddlError::TypeMismatch {
                    atom: atom.to_string(),
                    object: arg.clone(),
                    expected: ty.to_string(),
                    found: actual.to_string(),
                });
            }
        }
    }

    let fluent_preds: HashSet<&str> =
        dom.actions.iter().flat_map(|a| a.effects.iter().map(|e| e.predicate.as_str())).collect();
    let is_static = |p: &str| !fluent_preds.contains(p);
    let statics: BTreeSet<Atom> = prob.init.iter().filter(|a| is_static(&a.predicate)).cloned().collect();

    let mut interner = Interner::default();
    let mut candidates = Vec::new();
    for (si, schema) in dom.actions.iter().enumerate() {
        instantiate(dom, prob, si, schema, &statics, &is_static, &mut interner, &mut candidates);
    }

    // Relaxed reachability by counting satisfied positive fluent preconditions.
    let n = interner.atoms.len();
    let mut reached = vec![false; n];
    let mut waiting: Vec<Vec<usize>> = vec![vec![]; n];
    let mut missing: Vec<usize> = Vec::with_capacity(candidates.len());
    let mut queue = Vec::new();
    let mut fired = vec![false; candidates.len()];
    for (ci, c) in candidates.iter().enumerate() {
        missing.push(c.pre_pos.len());
        for &p in &c.pre_pos {
            waiting[p].push(ci);
        }
    }
    for atom in prob.init.iter().filter(|a| !is_static(&a.predicate)) {
        let id = interner.intern(atom.clone());
        if id >= reached.len() {
            reached.resize(id + 1, false);
            waiting.resize(id + 1, vec![]);
        }
        if !reached[id] {
            reached[id] = true;
            queue.push(id);
        }
    }
    let mut ready: Vec<usize> = (0..candidates.len()).filter(|&ci| missing[ci] == 0).collect();
    loop {
        while let Some(ci) = ready.pop() {
            if fired[ci] {
                continue;
            }
            fired[ci] = true;
            for &e in &candidates[ci].add {
                if !reached[e] {
                    reached[e] = true;
                    queue.push(e);
                }
            }
        }
        let Some(atom) = queue.pop() else { break };
        for &ci in &waiting[atom] {
            missing[ci] -= 1;
            if missing[ci] == 0 {
                ready.push(ci);
            }
        }
    }

    let mut table: Vec<Atom> =
        (0..reached.len()).filter(|&i| reached[i]).map(|i| interner.atoms[i].clone()).collect();
    table.sort();
    let atom_index: HashMap<Atom, AtomId> =
        table.iter().enumerate().map(|(i, a)| (a.clone(), i as AtomId)).collect();
    let remap = |ids: &[usize]| -> Vec<AtomId> {
        let mut out: Vec<AtomId> =
            ids.iter().filter_map(|&i| atom_index.get(&interner.atoms[i]).copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    };

    let mut actions = Vec::new();
    let mut idle_actions = Vec::new();
    let mut action_index = HashMap::new();
    for (ci, c) in candidates.iter().enumerate() {
        if !fired[ci] {
            continue;
        }
        let pre_pos = remap(&c.pre_pos);
        let pre_neg = remap(&c.pre_neg);
        let add = remap(&c.add);
        let mut del = remap(&c.del);
        del.retain(|d| add.binary_search(d).is_err());
        let action = GroundAction {
            schema: dom.actions[c.schema].name.clone(),
            args: c.args.clone(),
            pre_pos,
            pre_neg,
            add,
            del,
            cost: 1,
        };
        let idle = action.del.is_empty() && action.add.iter().all(|a| action.pre_pos.binary_search(a).is_ok());
        let key = action.display_name();
        if idle {
            action_index.insert(key, ActionRef::Idle(idle_actions.len()));
            idle_actions.push(action);
        } else {
            action_index.insert(key, ActionRef::Search(actions.len()));
            actions.push(action);
        }
    }

    let init = State::from_atoms(
        table.len(),
        prob.init.iter().filter_map(|a| atom_index.get(a).copied()),
    );
    let mut goal = Vec::new();
    let mut unreachable_goals = Vec::new();
    for g in &prob.goal {
        if is_static(&g.predicate) {
            if !statics.contains(g) {
                unreachable_goals.push(g.clone());
            }
        } else {
            match atom_index.get(g) {
                Some(&id) => goal.push(id),
                None => unreachable_goals.push(g.clone()),
            }
        }
    }
    goal.sort_unstable();
    goal.dedup();

    Ok(GroundTask {
        atoms: table,
        atom_index,
        statics,
        actions,
        idle_actions,
        action_index,
        schemas: dom.actions.iter().map(|a| (a.name.clone(), a.params.len())).collect(),
        objects: prob.objects.iter().map(|o| o.name.clone()).collect(),
        init,
        goal,
        unreachable_goals,
    })
}

struct SchemaGrounder<'a> {
    schema_idx: usize,
    schema: &'a ActionSchema,
    domains: Vec<Vec<&'a str>>,
    position: HashMap<&'a str, usize>,
    /// Static literals grouped by the number of bound parameters they need.
    checks: Vec<Vec<&'a Literal>>,
    statics: &'a BTreeSet<Atom>,
    is_static: &'a dyn Fn(&str) -> bool,
}

impl<'a> SchemaGrounder<'a> {
    fn ground(&self, lit: &Literal, binding: &[&str]) -> Atom {
        Atom {
            predicate: lit.predicate.clone(),
            args: lit.args.iter().map(|a| binding[self.position[a.as_str()]].to_string()).collect(),
        }
    }

    fn statics_hold(&self, bound: usize, binding: &[&str]) -> bool {
        self.checks[bound].iter().all(|l| self.statics.contains(&self.ground(l, binding)) != l.negated)
    }

    fn run(&self, binding: &mut Vec<&'a str>, interner: &mut Interner, out: &mut Vec<Candidate>) {
        let depth = binding.len();
        if depth == self.domains.len() {
            out.push(self.candidate(binding, interner));
            return;
        }
        for &obj in &self.domains[depth] {
            binding.push(obj);
            if self.statics_hold(depth + 1, binding) {
                self.run(binding, interner, out);
            }
            binding.pop();
        }
    }

    fn candidate(&self, binding: &[&str], interner: &mut Interner) -> Candidate {
        let mut c = Candidate {
            schema: self.schema_idx,
            args: binding.iter().map(|s| s.to_string()).collect(),
            pre_pos: vec![],
            pre_neg: vec![],
            add: vec![],
            del: vec![],
        };
        for lit in self.schema.preconditions.iter().filter(|l| !(self.is_static)(&l.predicate)) {
            let id = interner.intern(self.ground(lit, binding));
            if lit.negated { c.pre_neg.push(id) } else { c.pre_pos.push(id) }
        }
        for lit in &self.schema.effects {
            let id = interner.intern(self.ground(lit, binding));
            if lit.negated { c.del.push(id) } else { c.add.push(id) }
        }
        c
    }
}

#[allow(clippy::too_many_arguments)]
fn instantiate(
    dom: &Domain,
    prob: &Problem,
    schema_idx: usize,
    schema: &ActionSchema,
    statics: &BTreeSet<Atom>,
    is_static: &dyn Fn(&str) -> bool,
    interner: &mut Interner,
    out: &mut Vec<Candidate>,
) {
    let domains: Vec<Vec<&str>> = schema
        .params
        .iter()
        .map(|p| {
            prob.objects
                .iter()
                .filter(|o| dom.is_subtype(&o.type_name, &p.type_name))
                .map(|o| o.name.as_str())
                .collect()
        })
        .collect();
    let position: HashMap<&str, usize> =
        schema.params.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    let mut checks: Vec<Vec<&Literal>> = vec![vec![]; schema.params.len() + 1];
    for lit in schema.preconditions.iter().filter(|l| is_static(&l.predicate)) {
        let last = lit.args.iter().map(|a| position[a.as_str()] + 1).max().unwrap_or(0);
        checks[last].push(lit);
    }
    let grounder = SchemaGrounder { schema_idx, schema, domains, position, checks, statics, is_static };
    let mut binding = Vec::with_capacity(schema.params.len());
    if grounder.statics_hold(0, &binding) {
        grounder.run(&mut binding, interner, out);
    }
}
