use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use symplan_core::generators::{instance_seed, regenerate};
use symplan_core::metrics::{bleu, rouge_l, tokenize_plan};
use symplan_core::planner::{astar_plan, Evaluator};
use symplan_core::{build_dataset, ground_task, BleuMode, DomainTag, GeneratorConfig, GroundTask, Heuristic, Problem};

fn problems(tag: DomainTag, n: u64) -> Vec<Problem> {
    let cfg = GeneratorConfig::new(tag, 1, 5);
    (0..n).map(|i| regenerate(&cfg, instance_seed(5, i)).1).collect()
}

fn tasks(tag: DomainTag, n: u64) -> Vec<GroundTask> {
    let dom = tag.domain();
    problems(tag, n).iter().map(|p| ground_task(&dom, p).unwrap()).collect()
}

fn grounding(c: &mut Criterion) {
    let mut group = c.benchmark_group("ground");
    for tag in DomainTag::ALL {
        let dom = tag.domain();
        let probs = problems(tag, 8);
        group.bench_function(tag.as_str(), |b| {
            b.iter(|| probs.iter().map(|p| ground_task(&dom, black_box(p)).unwrap().actions().len()).sum::<usize>())
        });
    }
    group.finish();
}

fn heuristics(c: &mut Criterion) {
    let mut group = c.benchmark_group("heuristic_init");
    for tag in DomainTag::ALL {
        let ts = tasks(tag, 8);
        for h in [Heuristic::HMax, Heuristic::LmCut] {
            let mut evals: Vec<Evaluator> = ts.iter().map(|t| Evaluator::new(t, h)).collect();
            group.bench_with_input(BenchmarkId::new(format!("{h:?}"), tag), &ts, |b, ts| {
                b.iter(|| ts.iter().zip(evals.iter_mut()).map(|(t, e)| e.estimate(t.init())).collect::<Vec<_>>())
            });
        }
    }
    group.finish();
}

fn search(c: &mut Criterion) {
    let mut group = c.benchmark_group("astar_lmcut");
    group.sample_size(10);
    for tag in DomainTag::ALL {
        let ts = tasks(tag, 4);
        group.bench_function(tag.as_str(), |b| {
            b.iter(|| ts.iter().map(|t| astar_plan(black_box(t), Heuristic::LmCut).cost()).collect::<Vec<_>>())
        });
    }
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let corpus = build_dataset(&GeneratorConfig::new(DomainTag::Dl, 200, 5)).unwrap();
    let refs: Vec<Vec<String>> = corpus.iter().map(|r| tokenize_plan(&r.plan)).collect();
    let cands: Vec<Vec<String>> = refs.iter().map(|r| r[..r.len() / 2].to_vec()).collect();
    c.bench_function("rouge_l/200", |b| {
        b.iter(|| refs.iter().zip(&cands).map(|(r, c)| rouge_l(r, c).fmeasure).sum::<f64>())
    });
    c.bench_function("bleu_corpus/200", |b| b.iter(|| bleu(black_box(&refs), &cands, BleuMode::Corpus).unwrap()));
}

criterion_group!(benches, grounding, heuristics, search, scoring);
criterion_main!(benches);
