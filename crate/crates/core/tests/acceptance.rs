//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! for each, and exits non-zero if any fails.
//!
//! Corpora are generated once and shared:
//! * a 100-instance set per domain for the oracle sweep, self-evaluation and
//!   timing;
//! * a 4,500-instance set per domain (18,000 in total) for corpus statistics
//!   and reference-plan validation.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use symplan_core::codec::{encode_task, parse_plan_text};
use symplan_core::generators::regenerate;
use symplan_core::harness::{evaluate, split_indices, Candidate};
use symplan_core::metrics::{lcs_len, rouge_l, tokenize_plan};
use symplan_core::pddl::{apply_unchecked, bundled, is_applicable, ActionRef};
use symplan_core::planner::{astar_plan_with, bfs_from, h_lmcut, h_max};
use symplan_core::validator::{IncompleteReason, OutcomeClass};
use symplan_core::{
    astar_plan, bfs_oracle, build_dataset, classify_plan, ground_task, parse_problem, BleuMode, DatasetRecord,
    DomainTag, GeneratorConfig, GroundTask, Heuristic, SearchOptions, SplitSpec, State,
};

const SEED: u64 = 2024;
const SWEEP_COUNT: usize = 100;
const CORPUS_COUNT: usize = 4_500;

const FOUR_BLOCKS_TASK: &str = "<GOAL> on b1 b2, on b2 b3, ontable b3, on b4 b1, clear b4 <INIT> handempty, ontable b1, clear b1, on b2 b3, ontable b3, on b4 b2, clear b4 <ACTION> pick-up <PRE> clear x, ontable x, handempty <EFFECT> not ontable x, not clear x, not handempty, holding x <ACTION> put-down <PRE> holding x <EFFECT> not holding x, clear x, handempty, ontable x <ACTION> stack <PRE> holding x, clear y <EFFECT> not holding x, not clear y, clear x, handempty, on x y <ACTION> unstack <PRE> on x y, clear x, handempty <EFFECT> holding x, clear y, not clear x, not handempty, not on x y";
const FOUR_BLOCKS_PLAN: &str = "unstack b4 b2, put-down b4, pick-up b1, stack b1 b2, pick-up b4, stack b4 b1";

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bw_task(problem: &str) -> GroundTask {
    let dom = bundled::domain(bundled::BLOCKSWORLD);
    ground_task(&dom, &parse_problem(problem, &dom).unwrap()).unwrap()
}

fn record_task(tag: DomainTag, rec: &DatasetRecord) -> GroundTask {
    let cfg = GeneratorConfig::new(tag, 1, SEED);
    let (_, prob) = regenerate(&cfg, rec.seed);
    ground_task(&tag.domain(), &prob).unwrap()
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let dom = bundled::domain(bundled::BLOCKSWORLD);
    let prob = parse_problem(include_str!("fixtures/bw_four_blocks.pddl"), &dom).unwrap();
    let encoded = encode_task(&dom, &prob).rendered;
    ensure(encoded == FOUR_BLOCKS_TASK, || format!("task string differs:\n  got  {encoded}\n  want {FOUR_BLOCKS_TASK}"))?;
    let t = ground_task(&dom, &prob).unwrap();
    let class = classify_plan(&t, FOUR_BLOCKS_PLAN, Some(6)).class;
    ensure(class == OutcomeClass::Valid { optimal: Some(true) }, || format!("plan classified {class:?}"))?;
    let a = astar_plan(&t, Heuristic::LmCut).cost();
    let b = bfs_oracle(&t).cost();
    ensure(a == Some(6) && b == Some(6), || format!("astar {a:?}, bfs {b:?}"))?;
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 1.0, || format!("took {secs:.2}s"))?;
    Ok(format!("string byte-exact, plan valid+optimal, A* = BFS = 6, {secs:.3}s"))
}

fn hanoi_tower(n: usize) -> GroundTask {
    let dom = bundled::domain(bundled::HANOI);
    let discs: Vec<String> = (1..=n).map(|i| format!("d{i}")).collect();
    let mut init = Vec::new();
    for peg in ["peg1", "peg2", "peg3"] {
        init.extend(discs.iter().map(|d| format!("(smaller {peg} {d})")));
    }
    for (i, small) in discs.iter().enumerate() {
        init.extend(discs[i + 1..].iter().map(|big| format!("(smaller {big} {small})")));
    }
    let stack = |peg: &str| -> Vec<String> {
        (0..n)
            .map(|i| {
                let below = if i + 1 < n { discs[i + 1].clone() } else { peg.to_string() };
                format!("(on {} {below})", discs[i])
            })
            .collect()
    };
    init.extend(stack("peg1"));
    init.push("(clear d1) (clear peg2) (clear peg3)".into());
    let text = format!(
        "(define (problem tower{n}) (:domain hanoi) (:objects peg1 peg2 peg3 {}) (:init {}) (:goal (and {})))",
        discs.join(" "),
        init.join(" "),
        stack("peg3").join(" ")
    );
    ground_task(&dom, &parse_problem(&text, &dom).unwrap()).unwrap()
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut costs = Vec::new();
    for n in 2..=5 {
        let t = hanoi_tower(n);
        let want = (1usize << n) - 1;
        let a = astar_plan(&t, Heuristic::LmCut).cost();
        let b = bfs_oracle(&t).cost();
        ensure(a == Some(want) && b == Some(want), || format!("n={n}: astar {a:?}, bfs {b:?}, want {want}"))?;
        costs.push(want);
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1}s"))?;
    Ok(format!("costs {costs:?} match BFS and 2^n - 1, {secs:.2}s"))
}

/// Per-instance search times from the sweep, reused by the timing criterion.
type Timings = BTreeMap<DomainTag, Vec<f64>>;

fn criterion_3(sweep: &BTreeMap<DomainTag, Vec<DatasetRecord>>, timings: &mut Timings) -> Outcome {
    let t0 = Instant::now();
    let mut summary = Vec::new();
    for (&tag, records) in sweep {
        let (mut oracle_done, mut audited) = (0, 0);
        for rec in records {
            let t = record_task(tag, rec);
            // Keep expansions 1, 2, 4, 8, ... for the admissibility audit.
            let mut samples: Vec<(State, u32)> = Vec::new();
            let mut k = 0u64;
            let r = astar_plan_with(&t, Heuristic::LmCut, &SearchOptions::default(), |s, _, h| {
                k += 1;
                if k.is_power_of_two() && samples.len() < 8 {
                    samples.push((s.clone(), h));
                }
            });
            timings.entry(tag).or_default().push(r.wall_time);
            let cost = r.cost();
            ensure(cost == Some(rec.plan_length), || format!("{}: A* {cost:?} vs corpus {}", rec.id, rec.plan_length))?;
            let oracle = bfs_oracle(&t);
            if oracle.is_solved() {
                oracle_done += 1;
                ensure(oracle.cost() == cost, || format!("{}: A* {cost:?} vs BFS {:?}", rec.id, oracle.cost()))?;
            }
            for (s, h) in &samples {
                let Some(d) = bfs_from(&t, s, 200_000).cost() else { continue };
                let (hm, lm) = (h_max(&t, s).unwrap(), h_lmcut(&t, s).unwrap());
                ensure(*h as usize <= d && lm as usize <= d, || format!("{}: h={h} lmcut={lm} > d={d}", rec.id))?;
                ensure(hm <= lm, || format!("{}: h_max {hm} > lmcut {lm}", rec.id))?;
                audited += 1;
            }
        }
        summary.push(format!("{tag}: oracle {oracle_done}/{}, {audited} states audited", records.len()));
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(secs < 600.0, || format!("took {secs:.0}s"))?;
    Ok(format!("{}; {secs:.1}s", summary.join("; ")))
}

fn criterion_4(corpora: &BTreeMap<DomainTag, Vec<DatasetRecord>>) -> Outcome {
    let mut total = 0;
    for (&tag, records) in corpora {
        let bad: Vec<String> = records
            .par_iter()
            .filter_map(|rec| {
                let t = record_task(tag, rec);
                let class = classify_plan(&t, &rec.plan, Some(rec.plan_length)).class;
                (class != OutcomeClass::Valid { optimal: Some(true) }).then(|| format!("{} {class:?}", rec.id))
            })
            .collect();
        ensure(bad.is_empty(), || format!("{tag}: {} reference plans not valid+optimal, e.g. {}", bad.len(), bad[0]))?;
        total += records.len();
    }
    Ok(format!("{total}/{total} reference plans valid and optimal"))
}

fn length_profile(records: &[DatasetRecord]) -> String {
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    for r in records {
        *hist.entry(r.plan_length).or_default() += 1;
    }
    hist.iter().map(|(l, c)| format!("{l}:{c}")).collect::<Vec<_>>().join(" ")
}

fn mean_length(records: &[DatasetRecord]) -> f64 {
    records.iter().map(|r| r.plan_length as f64).sum::<f64>() / records.len() as f64
}

fn criterion_5(corpora: &BTreeMap<DomainTag, Vec<DatasetRecord>>) -> Outcome {
    let target = |tag| match tag {
        DomainTag::Bw => 9.0,
        DomainTag::Gr => 9.0,
        DomainTag::Dl => 10.0,
        DomainTag::Hn => 12.0,
    };
    let mut lines = Vec::new();
    let mut failed = false;
    for (&tag, records) in corpora {
        let mean = mean_length(records);
        let first_500 = mean_length(&records[..500]);
        let ok = (mean - target(tag)).abs() <= 3.0;
        failed |= !ok;
        lines.push(format!(
            "    {tag}: n={} mean {mean:.2} (target {} +/- 3, {}), first 500 mean {first_500:.2}; lengths {}",
            records.len(),
            target(tag),
            if ok { "ok" } else { "OUT OF BAND" },
            length_profile(records)
        ));
    }
    let report = lines.join("\n");
    if failed {
        Err(format!("mean plan length out of band\n{report}"))
    } else {
        Ok(format!("all means within +/- 3\n{report}"))
    }
}

fn criterion_6(sweep: &BTreeMap<DomainTag, Vec<DatasetRecord>>) -> Outcome {
    let f3 = bw_task(
        "(define (problem f3) (:domain blocksworld) (:objects b1 b2 b3 b4)
           (:init (handempty) (clear b2) (on b2 b4) (on b4 b1) (on b1 b3) (ontable b3))
           (:goal (and (on b4 b2) (on b2 b1))))",
    );
    let generated = "unstack b2 b4, put-down b2, unstack b4 b1, put-down b4, unstack b1 b3, put-down b4, \
                     unstack b4 b1, put-down b4, unstack b1 b3, put-down b4, unstack b4 b2, put-down b4, \
                     unstack b2 b4, stack b2 b1, pick-up b4, stack b4 b2";
    let class = classify_plan(&f3, generated, None).class;
    ensure(matches!(class, OutcomeClass::Failed { step: 6, .. }), || format!("failed exhibit gave {class:?}"))?;
    let f3b = bw_task(
        "(define (problem f3b) (:domain blocksworld) (:objects b1 b3 b4)
           (:init (handempty) (clear b1) (on b1 b3) (ontable b3) (clear b4) (ontable b4))
           (:goal (and (on b4 b1))))",
    );
    let class = classify_plan(&f3b, "unstack b1 b3, put-down b1, pick-up", Some(4)).class;
    ensure(matches!(class, OutcomeClass::Incomplete { .. }), || format!("truncated exhibit gave {class:?}"))?;

    // 100 corruptions: 25 plans per domain, alternating inapplicable insertions and suffix cuts.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut inserted, mut cut) = (0, 0);
    for (&tag, records) in sweep {
        for rec in records.iter().take(25) {
            let t = record_task(tag, rec);
            let steps: Vec<ActionRef> = parse_plan_text(&rec.plan, &t).resolved().collect();
            let names: Vec<String> = steps.iter().map(|&r| t.action(r).display_name()).collect();
            if (inserted + cut) % 2 == 0 {
                let k = rng.random_range(0..=steps.len());
                let mut s = t.init().clone();
                for &r in &steps[..k] {
                    s = apply_unchecked(&s, t.action(r));
                }
                let blocked: Vec<_> = t.actions().iter().filter(|a| !is_applicable(&s, a)).collect();
                let bad = blocked[rng.random_range(0..blocked.len())].display_name();
                let mut plan = names.clone();
                plan.insert(k, bad);
                let class = classify_plan(&t, &plan.join(", "), Some(rec.plan_length)).class;
                let want = k + 1;
                ensure(matches!(class, OutcomeClass::Failed { step, .. } if step == want), || {
                    format!("{}: insertion at step {want} gave {class:?}", rec.id)
                })?;
                inserted += 1;
            } else {
                let keep = rng.random_range(0..names.len());
                let class = classify_plan(&t, &names[..keep].join(", "), Some(rec.plan_length)).class;
                ensure(class == OutcomeClass::Incomplete { reason: IncompleteReason::GoalNotReached }, || {
                    format!("{}: keeping {keep}/{} steps gave {class:?}", rec.id, names.len())
                })?;
                cut += 1;
            }
        }
    }
    ensure(inserted + cut == 100, || format!("only {} corruptions", inserted + cut))?;
    Ok(format!("exhibits classified; {inserted} insertions Failed, {cut} truncations Incomplete"))
}

/// Longest common subsequence by enumerating subsequences of `a`.
fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
    let is_subseq = |sub: &[u8]| {
        let mut it = b.iter();
        sub.iter().all(|x| it.any(|y| y == x))
    };
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let sub: Vec<u8> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
            is_subseq(&sub).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

fn criterion_7(sweep: &BTreeMap<DomainTag, Vec<DatasetRecord>>) -> Outcome {
    let corpus: Vec<DatasetRecord> = sweep.values().flatten().cloned().collect();
    let cands: Vec<Candidate> = corpus.iter().map(|r| Candidate { id: r.id.clone(), plan: r.plan.clone() }).collect();
    let report = evaluate(&corpus, &cands, BleuMode::Corpus).map_err(|e| e.to_string())?.report;
    let o = &report.overall;
    ensure(
        o.rouge_l.recall == 1.0 && o.rouge_l.precision == 1.0 && o.rouge_l.fmeasure == 1.0 && o.bleu == 1.0,
        || format!("self-evaluation gave rouge {:?}, bleu {}", o.rouge_l, o.bleu),
    )?;
    ensure(o.valid_pct == 100.0, || format!("self-evaluation valid {}%", o.valid_pct))?;

    let reference = tokenize_plan(FOUR_BLOCKS_PLAN);
    let prefix = tokenize_plan("unstack b4 b2, put-down b4");
    let r = rouge_l(&reference, &prefix);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9;
    ensure(close(r.recall, 1.0 / 3.0) && close(r.precision, 1.0) && close(r.fmeasure, 0.5), || {
        format!("prefix case gave {r:?}")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..1000 {
        let seq = |rng: &mut ChaCha8Rng| -> Vec<u8> {
            let n = rng.random_range(0..=8);
            (0..n).map(|_| rng.random_range(b'a'..=b'd')).collect()
        };
        let (a, b) = (seq(&mut rng), seq(&mut rng));
        let (fast, slow) = (lcs_len(&a, &b), brute_lcs(&a, &b));
        ensure(fast == slow, || format!("lcs({a:?}, {b:?}) = {fast}, brute force {slow}"))?;
    }
    Ok(format!(
        "self-eval ROUGE-L (1,1,1) BLEU 1.0 on {} rows; prefix case ({:.4}, {:.1}, {:.1}); 1000 LCS pairs agree",
        corpus.len(),
        r.recall,
        r.precision,
        r.fmeasure
    ))
}

fn criterion_8() -> Outcome {
    let folds = split_indices(18_000, &SplitSpec::default()).map_err(|e| e.to_string())?;
    ensure(folds.len() == 5, || format!("{} folds", folds.len()))?;
    for (k, f) in folds.iter().enumerate() {
        ensure(f.train.len() == 14_400 && f.test.len() == 3_600, || {
            format!("fold {k}: {}/{}", f.train.len(), f.test.len())
        })?;
    }
    let mut seen = vec![0u8; 18_000];
    for f in &folds {
        f.test.iter().for_each(|&i| seen[i] += 1);
    }
    ensure(seen.iter().all(|&c| c == 1), || "test sets do not partition the rows".into())?;
    Ok("5 folds of 14400/3600; test sets partition 18000 rows".into())
}

fn criterion_9(timings: &Timings) -> Outcome {
    let mut lines = Vec::new();
    for (&tag, times) in timings {
        let limit = if tag == DomainTag::Bw { 0.1 } else { 5.0 };
        let worst = times.iter().copied().fold(0.0, f64::max);
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        ensure(worst < limit, || format!("{tag}: slowest instance {worst:.3}s, limit {limit}s"))?;
        lines.push(format!("{tag} max {:.1}ms mean {:.1}ms", worst * 1e3, mean * 1e3));
    }
    Ok(lines.join(", "))
}

fn corpora(count: usize) -> BTreeMap<DomainTag, Vec<DatasetRecord>> {
    DomainTag::ALL
        .par_iter()
        .map(|&tag| (tag, build_dataset(&GeneratorConfig::new(tag, count, SEED)).expect("corpus generation")))
        .collect()
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut run = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t0.elapsed().as_secs_f64();
        let status = if outcome.is_ok() { "PASS" } else { "FAIL" };
        let detail = match &outcome {
            Ok(s) | Err(s) => s,
        };
        println!("criterion {n} [{status}] {name} ({secs:.1}s): {detail}");
        results.push((n, name, outcome, secs));
    };

    let t0 = Instant::now();
    let sweep = corpora(SWEEP_COUNT);
    println!("built {SWEEP_COUNT}-instance sweep per domain in {:.1}s", t0.elapsed().as_secs_f64());
    let t0 = Instant::now();
    let large = corpora(CORPUS_COUNT);
    println!("built {CORPUS_COUNT}-instance corpus per domain in {:.1}s", t0.elapsed().as_secs_f64());

    let mut timings = Timings::new();
    run(1, "four-block golden", &mut criterion_1);
    run(2, "hanoi tower optimality", &mut criterion_2);
    run(3, "oracle equivalence sweep", &mut || criterion_3(&sweep, &mut timings));
    run(4, "reference plans valid and optimal", &mut || criterion_4(&large));
    run(5, "corpus plan-length statistics", &mut || criterion_5(&large));
    run(6, "taxonomy fidelity", &mut || criterion_6(&sweep));
    run(7, "metric sanity", &mut || criterion_7(&sweep));
    run(8, "split arithmetic", &mut criterion_8);
    run(9, "performance envelope", &mut || criterion_9(&timings));

    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
