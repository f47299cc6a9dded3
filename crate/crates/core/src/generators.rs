//! Random instance generators and the reference corpus builder.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{encode_plan, encode_task};
use crate::pddl::{bundled, ground_task, Atom, Domain, Problem, TypedObject};
use crate::planner::{astar_plan_with, Heuristic, SearchOptions, SearchOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainTag {
    Bw,
    Hn,
    Gr,
    Dl,
}

impl DomainTag {
    pub const ALL: [DomainTag; 4] = [DomainTag::Bw, DomainTag::Hn, DomainTag::Gr, DomainTag::Dl];

    pub fn as_str(self) -> &'static str {
        match self {
            DomainTag::Bw => "bw",
            DomainTag::Hn => "hn",
            DomainTag::Gr => "gr",
            DomainTag::Dl => "dl",
        }
    }

    /// PDDL name of the bundled domain.
    pub fn domain_name(self) -> &'static str {
        match self {
            DomainTag::Bw => "blocksworld",
            DomainTag::Hn => "hanoi",
            DomainTag::Gr => "grippers",
            DomainTag::Dl => "driverlog",
        }
    }

    pub fn domain(self) -> Domain {
        let source = bundled::ALL.iter().find(|(t, _)| *t == self.as_str()).expect("every tag is bundled").1;
        bundled::domain(source)
    }

    /// Sampled parameters with their default inclusive ranges.
    pub fn default_ranges(self) -> &'static [(&'static str, u32, u32)] {
        match self {
            DomainTag::Bw => &[("blocks", 2, 5)],
            DomainTag::Hn => &[("disks", 2, 5)],
            DomainTag::Gr => &[("balls", 2, 5), ("robots", 3, 5), ("rooms", 2, 4)],
            DomainTag::Dl => &[("drivers", 1, 3), ("trucks", 1, 3), ("packages", 2, 4), ("locations", 3, 6)],
        }
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DomainTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s || t.domain_name() == s)
            .ok_or_else(|| format!("unknown domain '{s}' (expected bw, hn, gr or dl)"))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("only {produced} unique instances found for {requested} requested after {attempts} attempts")]
    Exhausted { requested: usize, produced: usize, attempts: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub domain: DomainTag,
    /// Inclusive range per parameter.
    pub ranges: BTreeMap<String, (u32, u32)>,
    pub count: usize,
    pub seed: u64,
    /// Share of hanoi instances that move a full tower from the first peg to the last.
    pub hanoi_tower_share: f64,
    /// Consecutive attempts without a new record before giving up.
    pub stall_limit: u64,
    pub search: SearchOptions,
}

impl GeneratorConfig {
    pub fn new(domain: DomainTag, count: usize, seed: u64) -> Self {
        GeneratorConfig {
            domain,
            ranges: domain.default_ranges().iter().map(|&(k, lo, hi)| (k.to_owned(), (lo, hi))).collect(),
            count,
            seed,
            hanoi_tower_share: 0.5,
            stall_limit: 20_000,
            search: SearchOptions::default(),
        }
    }

    pub fn with_range(mut self, param: &str, lo: u32, hi: u32) -> Result<Self, GenerateError> {
        match self.ranges.get_mut(param) {
            Some(r) => *r = (lo, hi),
            None => {
                return Err(GenerateError::InvalidConfig(format!(
                    "{} has no parameter '{param}'",
                    self.domain.domain_name()
                )))
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        let bad = |m: String| Err(GenerateError::InvalidConfig(m));
        if self.count == 0 {
            return bad("count must be at least 1".into());
        }
        for (k, &(lo, hi)) in &self.ranges {
            let floor = if k == "drivers" || k == "trucks" { 1 } else { 2 };
            if lo > hi {
                return bad(format!("{k}: empty range {lo}..{hi}"));
            }
            if lo < floor || hi > 20 {
                return bad(format!("{k}: range {lo}..{hi} outside {floor}..20"));
            }
        }
        if !(0.0..=1.0).contains(&self.hanoi_tower_share) {
            return bad("hanoi tower share must lie in [0, 1]".into());
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> BTreeMap<String, u32> {
        self.ranges.iter().map(|(k, &(lo, hi))| (k.clone(), rng.random_range(lo..=hi))).collect()
    }
}

fn objects(names: &[String], type_name: &str) -> Vec<TypedObject> {
    names.iter().map(|n| TypedObject { name: n.clone(), type_name: type_name.into() }).collect()
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Number of ways to arrange `n` labelled blocks into unordered towers.
fn tower_arrangements(n: usize) -> Vec<f64> {
    let mut t = vec![1.0f64; n + 1];
    for m in 1..=n {
        let mut binom = 1.0; // C(m-1, k-1)
        let mut fact = 1.0; // k!
        let mut sum = 0.0;
        for k in 1..=m {
            fact *= k as f64;
            sum += binom * fact * t[m - k];
            binom = binom * (m - k) as f64 / k as f64;
        }
        t[m] = sum;
    }
    t
}

/// Uniformly random arrangement of blocks `0..n` into towers, each listed
/// bottom to top.
pub fn random_towers(n: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let counts = tower_arrangements(n);
    let mut rest: Vec<usize> = (0..n).collect();
    let mut towers = Vec::new();
    while let Some(&first) = rest.first() {
        let m = rest.len();
        // Size of the tower holding `first`.
        let mut weights = Vec::with_capacity(m);
        let (mut binom, mut fact) = (1.0, 1.0);
        for k in 1..=m {
            fact *= k as f64;
            weights.push(binom * fact * counts[m - k]);
            binom = binom * (m - k) as f64 / k as f64;
        }
        let mut pick = rng.random::<f64>() * weights.iter().sum::<f64>();
        let mut size = m;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                size = i + 1;
                break;
            }
            pick -= w;
        }
        let mut others: Vec<usize> = rest[1..].to_vec();
        others.shuffle(rng);
        let mut tower: Vec<usize> = others[..size - 1].to_vec();
        tower.push(first);
        tower.shuffle(rng);
        rest.retain(|b| !tower.contains(b));
        towers.push(tower);
    }
    towers
}

/// Position and clear atoms, block by block.
fn tower_atoms(names: &[String], towers: &[Vec<usize>]) -> Vec<Atom> {
    let mut below = vec![None; names.len()];
    let mut top = vec![false; names.len()];
    for t in towers {
        for w in t.windows(2) {
            below[w[1]] = Some(w[0]);
        }
        if let Some(&last) = t.last() {
            top[last] = true;
        }
    }
    let mut atoms = Vec::new();
    for (b, name) in names.iter().enumerate() {
        match below[b] {
            Some(u) => atoms.push(Atom::new("on", [name.as_str(), names[u].as_str()])),
            None => atoms.push(Atom::new("ontable", [name.as_str()])),
        }
        if top[b] {
            atoms.push(Atom::new("clear", [name.as_str()]));
        }
    }
    atoms
}

fn canonical_towers(mut towers: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    towers.sort();
    towers
}

/// Random blocksworld problem: independent uniform tower layouts for init
/// and goal, resampled until they differ.
pub fn gen_blocksworld(blocks: usize, rng: &mut impl Rng) -> Problem {
    let names = numbered("b", blocks);
    let init = canonical_towers(random_towers(blocks, rng));
    let goal = loop {
        let g = canonical_towers(random_towers(blocks, rng));
        if g != init || blocks < 2 {
            break g;
        }
    };
    let mut init_atoms = vec![Atom::new("handempty", Vec::<String>::new())];
    init_atoms.extend(tower_atoms(&names, &init));
    Problem {
        name: format!("bw-{blocks}"),
        domain_name: "blocksworld".into(),
        objects: objects(&names, "object"),
        init: init_atoms,
        goal: tower_atoms(&names, &goal),
    }
}

/// `on`/`clear` atoms for disks placed by peg index (disk 0 smallest).
fn hanoi_atoms(pegs: &[String], disks: &[String], placement: &[usize], with_empty_pegs: bool) -> Vec<Atom> {
    let mut atoms = Vec::new();
    for (i, d) in disks.iter().enumerate() {
        let peg = placement[i];
        let below = (i + 1..disks.len()).find(|&j| placement[j] == peg);
        let support = below.map_or(&pegs[peg], |j| &disks[j]);
        atoms.push(Atom::new("on", [d.as_str(), support.as_str()]));
        if !(0..i).any(|j| placement[j] == peg) {
            atoms.push(Atom::new("clear", [d.as_str()]));
        }
    }
    if with_empty_pegs {
        for (p, name) in pegs.iter().enumerate() {
            if !placement.contains(&p) {
                atoms.push(Atom::new("clear", [name.as_str()]));
            }
        }
    }
    atoms
}

/// Random hanoi problem over three pegs. With probability `tower_share`
/// the whole tower moves from the first peg to the last; otherwise init and
/// goal are independent random legal placements.
pub fn gen_hanoi(disks: usize, tower_share: f64, rng: &mut impl Rng) -> Problem {
    let pegs = numbered("peg", 3);
    let names = numbered("d", disks);
    let (init, goal) = if rng.random_bool(tower_share) {
        (vec![0; disks], vec![2; disks])
    } else {
        let init: Vec<usize> = (0..disks).map(|_| rng.random_range(0..3)).collect();
        let goal = loop {
            let g: Vec<usize> = (0..disks).map(|_| rng.random_range(0..3)).collect();
            if g != init {
                break g;
            }
        };
        (init, goal)
    };
    let mut init_atoms = Vec::new();
    for p in &pegs {
        for d in &names {
            init_atoms.push(Atom::new("smaller", [p.as_str(), d.as_str()]));
        }
    }
    for (i, small) in names.iter().enumerate() {
        for big in &names[i + 1..] {
            init_atoms.push(Atom::new("smaller", [big.as_str(), small.as_str()]));
        }
    }
    init_atoms.extend(hanoi_atoms(&pegs, &names, &init, true));
    let mut objs = pegs.clone();
    objs.extend(names.iter().cloned());
    Problem {
        name: format!("hn-{disks}"),
        domain_name: "hanoi".into(),
        objects: objects(&objs, "object"),
        init: init_atoms,
        goal: hanoi_atoms(&pegs, &names, &goal, false),
    }
}

/// Random grippers problem: robots and balls in random rooms, a random goal
/// room per ball.
pub fn gen_grippers(robots: usize, rooms: usize, balls: usize, rng: &mut impl Rng) -> Problem {
    let robot_names = numbered("robot", robots);
    let room_names = numbered("room", rooms);
    let ball_names = numbered("ball", balls);
    let mut grippers = Vec::new();
    let mut init = Vec::new();
    for (i, r) in robot_names.iter().enumerate() {
        let room = &room_names[rng.random_range(0..rooms)];
        init.push(Atom::new("at-robby", [r.as_str(), room.as_str()]));
        for side in ["lgripper", "rgripper"] {
            let g = format!("{side}{}", i + 1);
            init.push(Atom::new("free", [r.as_str(), g.as_str()]));
            grippers.push(g);
        }
    }
    let mut goal = Vec::new();
    for b in &ball_names {
        init.push(Atom::new("at", [b.as_str(), room_names[rng.random_range(0..rooms)].as_str()]));
    }
    for b in &ball_names {
        goal.push(Atom::new("at", [b.as_str(), room_names[rng.random_range(0..rooms)].as_str()]));
    }
    let mut objs = objects(&robot_names, "robot");
    objs.extend(objects(&room_names, "room"));
    objs.extend(objects(&ball_names, "ball"));
    objs.extend(objects(&grippers, "gripper"));
    Problem { name: format!("gr-{robots}-{rooms}-{balls}"), domain_name: "grippers".into(), objects: objs, init, goal }
}

/// Random connected road map over `n` locations: a random spanning tree
/// plus each remaining pair with probability one half. Edges as `(i, j)`, `i < j`.
pub fn random_road_map(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = HashSet::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        let (a, b) = (order[i], order[j]);
        edges.insert((a.min(b), a.max(b)));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !edges.contains(&(a, b)) && rng.random_bool(0.5) {
                edges.insert((a, b));
            }
        }
    }
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.sort();
    edges
}

/// Random driverlog problem: connected links, drivers, empty trucks and
/// packages at random locations, a random goal location per package. No
/// `path` facts are emitted, so drivers move only by truck.
pub fn gen_driverlog(drivers: usize, trucks: usize, packages: usize, locations: usize, rng: &mut impl Rng) -> Problem {
    let driver_names = numbered("driver", drivers);
    let truck_names = numbered("truck", trucks);
    let package_names = numbered("package", packages);
    let locs = numbered("s", locations);
    let place = |rng: &mut dyn RngCore| locs[rng.random_range(0..locations)].clone();
    let mut init = Vec::new();
    for d in &driver_names {
        init.push(Atom::new("at", [d.clone(), place(rng)]));
    }
    for t in &truck_names {
        init.push(Atom::new("at", [t.clone(), place(rng)]));
        init.push(Atom::new("empty", [t.as_str()]));
    }
    for (a, b) in random_road_map(locations, rng) {
        init.push(Atom::new("link", [locs[a].as_str(), locs[b].as_str()]));
        init.push(Atom::new("link", [locs[b].as_str(), locs[a].as_str()]));
    }
    for p in &package_names {
        init.push(Atom::new("at", [p.clone(), place(rng)]));
    }
    let goal = package_names.iter().map(|p| Atom::new("at", [p.clone(), place(rng)])).collect();
    let mut objs = objects(&driver_names, "driver");
    objs.extend(objects(&truck_names, "truck"));
    objs.extend(objects(&package_names, "obj"));
    objs.extend(objects(&locs, "location"));
    Problem {
        name: format!("dl-{drivers}-{trucks}-{packages}-{locations}"),
        domain_name: "driverlog".into(),
        objects: objs,
        init,
        goal,
    }
}

/// Generates one problem for `tag` from sampled parameter values.
pub fn generate(tag: DomainTag, params: &BTreeMap<String, u32>, hanoi_tower_share: f64, rng: &mut impl Rng) -> Problem {
    let p = |k: &str| params.get(k).copied().unwrap_or_else(|| panic!("missing parameter {k}")) as usize;
    match tag {
        DomainTag::Bw => gen_blocksworld(p("blocks"), rng),
        DomainTag::Hn => gen_hanoi(p("disks"), hanoi_tower_share, rng),
        DomainTag::Gr => gen_grippers(p("robots"), p("rooms"), p("balls"), rng),
        DomainTag::Dl => gen_driverlog(p("drivers"), p("trucks"), p("packages"), p("locations"), rng),
    }
}

/// Dedup key: domain tag, sorted init, sorted goal.
pub fn canonical_key(tag: DomainTag, prob: &Problem) -> String {
    let c = prob.canonical();
    let join = |atoms: &[Atom]| atoms.iter().map(Atom::to_string).collect::<Vec<_>>().join(";");
    format!("{}|{}|{}", tag, join(&c.init), join(&c.goal))
}

/// One line of a reference corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub domain: DomainTag,
    pub task: String,
    pub plan: String,
    pub plan_length: usize,
    pub config: BTreeMap<String, u32>,
    /// Seed of the instance RNG; [`regenerate`] rebuilds the problem from it.
    pub seed: u64,
}

/// Seed for attempt `index` of a corpus seeded with `seed`.
pub fn instance_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Rebuilds the problem behind a record (or any attempt) from its instance seed.
pub fn regenerate(cfg: &GeneratorConfig, instance_seed: u64) -> (BTreeMap<String, u32>, Problem) {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let params = cfg.sample(&mut rng);
    let prob = generate(cfg.domain, &params, cfg.hanoi_tower_share, &mut rng);
    (params, prob)
}

struct Attempt {
    seed: u64,
    params: BTreeMap<String, u32>,
    problem: Problem,
    key: String,
}

fn attempt(cfg: &GeneratorConfig, index: u64) -> Option<Attempt> {
    let seed = instance_seed(cfg.seed, index);
    let (params, mut problem) = regenerate(cfg, seed);
    // Goals that already hold make zero-length plans; skip them.
    if problem.goal.iter().all(|g| problem.init.contains(g)) {
        return None;
    }
    let key = canonical_key(cfg.domain, &problem);
    problem.name = format!("{}-{}", cfg.domain, &hash_hex(&key)[..12]);
    Some(Attempt { seed, params, problem, key })
}

fn hash_hex(key: &str) -> String {
    hex::encode(Sha256::digest(key.as_bytes()))
}

fn solve(cfg: &GeneratorConfig, domain: &Domain, a: &Attempt) -> Option<DatasetRecord> {
    let task = match ground_task(domain, &a.problem) {
        Ok(t) => t,
        Err(e) => {
            log::warn!("{}: grounding failed: {e}", a.problem.name);
            return None;
        }
    };
    let result = astar_plan_with(&task, Heuristic::LmCut, &cfg.search, |_, _, _| {});
    match result.outcome {
        SearchOutcome::Solved { plan, cost, .. } if cost > 0 => Some(DatasetRecord {
            id: format!("{}-{}", cfg.domain, &hash_hex(&a.key)[..16]),
            domain: cfg.domain,
            task: encode_task(domain, &a.problem).rendered,
            plan: encode_plan(&plan).rendered,
            plan_length: cost,
            config: a.params.clone(),
            seed: a.seed,
        }),
        SearchOutcome::Solved { .. } => None,
        SearchOutcome::Unsolvable => {
            log::debug!("{}: unsolvable, resampling", a.problem.name);
            None
        }
        SearchOutcome::ResourceLimit(kind) => {
            log::warn!("{}: search hit the {kind:?} limit, skipping", a.problem.name);
            None
        }
    }
}

/// Builds `cfg.count` unique solved records. Attempts are generated and
/// solved in parallel batches but committed in attempt order, so the output
/// depends only on the config.
pub fn build_dataset(cfg: &GeneratorConfig) -> Result<Vec<DatasetRecord>, GenerateError> {
    cfg.validate()?;
    let domain = cfg.domain.domain();
    let mut seen: HashSet<String> = HashSet::new();
    let mut records = Vec::with_capacity(cfg.count);
    let mut next = 0u64;
    let mut last_success = 0u64;
    while records.len() < cfg.count {
        let need = (cfg.count - records.len()) as u64;
        let batch = (need + need / 4 + 16).min(4096);
        let attempts: Vec<(u64, Option<Attempt>)> =
            (next..next + batch).into_par_iter().map(|i| (i, attempt(cfg, i))).collect();
        let fresh: Vec<(u64, Attempt)> = attempts
            .into_iter()
            .filter_map(|(i, a)| a.map(|a| (i, a)))
            .filter(|(_, a)| seen.insert(a.key.clone()))
            .collect();
        let solved: Vec<(u64, Option<DatasetRecord>)> =
            fresh.par_iter().map(|(i, a)| (*i, solve(cfg, &domain, a))).collect();
        for (i, rec) in solved {
            if let Some(rec) = rec {
                if records.len() < cfg.count {
                    records.push(rec);
                    last_success = i + 1;
                }
            }
        }
        next += batch;
        if records.len() < cfg.count && next - last_success >= cfg.stall_limit {
            return Err(GenerateError::Exhausted { requested: cfg.count, produced: records.len(), attempts: next });
        }
    }
    Ok(records)
}
