//! Corpus files, train/test splits and batch evaluation.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_task, Registry};
use crate::generators::DatasetRecord;
use crate::metrics::{aggregate_report, BleuMode, EvalReport, MetricsError, ScoredInstance};
use crate::pddl::ground_task;
use crate::validator::{classify_plan, PlanOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {source}")]
    Json { path: PathBuf, line: usize, source: serde_json::Error },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("record '{id}': {message}")]
    BadRecord { id: String, message: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_owned(), source }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|source| HarnessError::Json { path: path.to_owned(), line: i + 1, source })?;
        out.push(value);
    }
    Ok(out)
}

/// Writes `items` one per line, creating parent directories as needed.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| HarnessError::Io { path: path.to_owned(), source: e.into() })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// One line of a candidates file: a model's plan for a corpus id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub plan: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// k-fold cross-validation: test sets partition the corpus.
    #[default]
    Folds,
    /// Independent shuffled train/test splits.
    Repeats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Share of rows used for training. In fold mode with two or more folds
    /// the test share is `1 / folds` instead.
    pub train_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub mode: SplitMode,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, folds: 5, seed: 0, mode: SplitMode::Folds }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(HarnessError::InvalidSplit(format!("train fraction {} not in (0, 1)", self.train_fraction)));
        }
        if self.folds == 0 {
            return Err(HarnessError::InvalidSplit("need at least one fold".into()));
        }
        Ok(())
    }
}

/// Row indices of one train/test split, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn shuffled(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn fold_from(order: &[usize], lo: usize, hi: usize) -> Fold {
    let mut test = order[lo..hi].to_vec();
    let mut train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
    test.sort_unstable();
    train.sort_unstable();
    Fold { train, test }
}

/// Splits `n` rows according to `spec`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Vec<Fold>, HarnessError> {
    spec.validate()?;
    let test_len = n - (n as f64 * spec.train_fraction).round() as usize;
    match spec.mode {
        SplitMode::Folds if spec.folds >= 2 => {
            if n < spec.folds {
                return Err(HarnessError::InvalidSplit(format!("{n} rows cannot fill {} folds", spec.folds)));
            }
            let order = shuffled(n, spec.seed, 0);
            let (base, extra) = (n / spec.folds, n % spec.folds);
            let mut lo = 0;
            Ok((0..spec.folds)
                .map(|k| {
                    let hi = lo + base + usize::from(k < extra);
                    let f = fold_from(&order, lo, hi);
                    lo = hi;
                    f
                })
                .collect())
        }
        SplitMode::Folds => Ok(vec![fold_from(&shuffled(n, spec.seed, 0), 0, test_len)]),
        SplitMode::Repeats => {
            Ok((0..spec.folds).map(|r| fold_from(&shuffled(n, spec.seed, r as u64), 0, test_len)).collect())
        }
    }
}

/// Per-instance line of an evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceResult {
    pub id: String,
    pub domain: String,
    pub outcome: PlanOutcome,
    pub reference_length: usize,
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub instances: Vec<InstanceResult>,
    pub report: EvalReport,
    /// Candidate ids with no corpus row; they are not scored.
    pub unmatched_candidates: Vec<String>,
}

/// Scores `candidates` against the test `corpus`, joined by id. Every corpus
/// row yields one result, in corpus order; rows without a candidate are
/// Incomplete with reason `missing_candidate`. Wall time covers validation
/// only.
pub fn evaluate(
    corpus: &[DatasetRecord],
    candidates: &[Candidate],
    mode: BleuMode,
) -> Result<Evaluation, HarnessError> {
    let mut by_id: HashMap<&str, &str> = HashMap::with_capacity(candidates.len());
    for c in candidates {
        if by_id.insert(&c.id, &c.plan).is_some() {
            return Err(HarnessError::DuplicateId(c.id.clone()));
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(corpus.len());
    for r in corpus {
        if !seen.insert(r.id.as_str()) {
            return Err(HarnessError::DuplicateId(r.id.clone()));
        }
    }
    let unmatched_candidates = candidates.iter().filter(|c| !seen.contains(c.id.as_str())).map(|c| c.id.clone()).collect();

    let registry = Registry::bundled();
    let scored: Vec<(InstanceResult, ScoredInstance)> = corpus
        .par_iter()
        .map(|r| {
            let domain = r.domain.as_str().to_string();
            let candidate = by_id.get(r.id.as_str()).copied();
            let (outcome, wall_time) = match candidate {
                None => (PlanOutcome::missing(), None),
                Some(plan) => {
                    let bad = |message: String| HarnessError::BadRecord { id: r.id.clone(), message };
                    let decoded = decode_task(&r.task, Some(&registry)).map_err(|e| bad(e.to_string()))?;
                    let task = ground_task(&decoded.domain, &decoded.problem).map_err(|e| bad(e.to_string()))?;
                    let t0 = Instant::now();
                    let outcome = classify_plan(&task, plan, Some(r.plan_length));
                    (outcome, Some(t0.elapsed().as_secs_f64()))
                }
            };
            let row = InstanceResult {
                id: r.id.clone(),
                domain: domain.clone(),
                outcome: outcome.clone(),
                reference_length: r.plan_length,
                wall_time,
            };
            let scored = ScoredInstance {
                domain,
                outcome,
                reference: r.plan.clone(),
                candidate: candidate.unwrap_or("").to_string(),
                wall_time,
            };
            Ok((row, scored))
        })
        .collect::<Result<_, HarnessError>>()?;
    let (instances, items): (Vec<_>, Vec<_>) = scored.into_iter().unzip();
    let report = aggregate_report(&items, mode)?;
    Ok(Evaluation { instances, report, unmatched_candidates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(folds: usize, mode: SplitMode) -> SplitSpec {
        SplitSpec { folds, mode, seed: 3, ..Default::default() }
    }

    #[test]
    fn folds_partition_rows() {
        let folds = split_indices(103, &spec(5, SplitMode::Folds)).unwrap();
        let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, [21, 21, 21, 20, 20]);
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        for f in &folds {
            assert_eq!(f.train.len() + f.test.len(), 103);
            assert!(f.train.iter().all(|i| f.test.binary_search(i).is_err()));
        }
    }

    #[test]
    fn repeats_use_the_train_fraction() {
        let folds = split_indices(50, &spec(3, SplitMode::Repeats)).unwrap();
        assert_eq!(folds.len(), 3);
        assert!(folds.iter().all(|f| f.train.len() == 40 && f.test.len() == 10));
        assert_ne!(folds[0].test, folds[1].test);
    }

    #[test]
    fn splits_are_seeded() {
        let a = split_indices(40, &spec(5, SplitMode::Folds)).unwrap();
        assert_eq!(a, split_indices(40, &spec(5, SplitMode::Folds)).unwrap());
        let other = SplitSpec { seed: 4, ..spec(5, SplitMode::Folds) };
        assert_ne!(a, split_indices(40, &other).unwrap());
    }

    #[test]
    fn bad_specs_are_rejected() {
        let frac = SplitSpec { train_fraction: 1.0, ..Default::default() };
        assert!(split_indices(10, &frac).is_err());
        assert!(split_indices(10, &spec(0, SplitMode::Folds)).is_err());
        assert!(split_indices(3, &spec(5, SplitMode::Folds)).is_err());
    }

    #[test]
    fn jsonl_roundtrip() {
        let dir = std::env::temp_dir().join(format!("symplan-jsonl-{}", std::process::id()));
        let path = dir.join("c.jsonl");
        let rows = vec![Candidate { id: "a".into(), plan: "x".into() }, Candidate { id: "b".into(), plan: "".into() }];
        write_jsonl(&path, &rows).unwrap();
        assert_eq!(read_jsonl::<Candidate>(&path).unwrap(), rows);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn evaluation_joins_by_id() {
        use crate::generators::{build_dataset, DomainTag, GeneratorConfig};
        use crate::validator::OutcomeClass;
        let corpus = build_dataset(&GeneratorConfig::new(DomainTag::Bw, 6, 2)).unwrap();
        let mut cands: Vec<Candidate> =
            corpus.iter().map(|r| Candidate { id: r.id.clone(), plan: r.plan.clone() }).collect();
        let all = evaluate(&corpus, &cands, BleuMode::Corpus).unwrap();
        assert_eq!(all.report.overall.valid_pct, 100.0);
        assert_eq!(all.report.overall.optimal_pct, 100.0);

        let dropped = cands.remove(2);
        cands.push(Candidate { id: "stray".into(), plan: String::new() });
        let e = evaluate(&corpus, &cands, BleuMode::Corpus).unwrap();
        assert_eq!(e.instances.len(), corpus.len());
        assert_eq!(e.instances[2].id, dropped.id);
        assert_eq!(e.instances[2].outcome, PlanOutcome::missing());
        assert!(matches!(e.instances[2].outcome.class, OutcomeClass::Incomplete { .. }));
        assert_eq!(e.unmatched_candidates, ["stray"]);

        cands.push(cands[0].clone());
        assert!(matches!(evaluate(&corpus, &cands, BleuMode::Corpus), Err(HarnessError::DuplicateId(_))));
    }
}
