//! ROUGE-L, BLEU and evaluation reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::validator::{OutcomeClass, PlanOutcome};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{refs} references but {cands} candidates")]
    LengthMismatch { refs: usize, cands: usize },
    #[error("nothing to aggregate")]
    Empty,
}

const SMOOTHING: f64 = 1e-9;
const MAX_ORDER: usize = 4;

/// Splits on commas, then whitespace.
pub fn tokenize_plan(text: &str) -> Vec<String> {
    text.split(',').flat_map(str::split_whitespace).map(str::to_owned).collect()
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub recall: f64,
    pub precision: f64,
    pub fmeasure: f64,
}

pub fn rouge_l<T: PartialEq>(reference: &[T], candidate: &[T]) -> RougeScore {
    if reference.is_empty() && candidate.is_empty() {
        return RougeScore { recall: 1.0, precision: 1.0, fmeasure: 1.0 };
    }
    let l = lcs_len(reference, candidate) as f64;
    let ratio = |n: usize| if n == 0 { 0.0 } else { l / n as f64 };
    let recall = ratio(reference.len());
    let precision = ratio(candidate.len());
    let fmeasure = if recall + precision == 0.0 { 0.0 } else { 2.0 * recall * precision / (recall + precision) };
    RougeScore { recall, precision, fmeasure }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BleuMode {
    /// Pooled n-gram counts over the whole corpus.
    #[default]
    Corpus,
    /// Mean of per-pair scores.
    Sentence,
}

impl std::str::FromStr for BleuMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "corpus" => Ok(BleuMode::Corpus),
            "sentence" => Ok(BleuMode::Sentence),
            other => Err(format!("unknown BLEU mode '{other}' (expected corpus or sentence)")),
        }
    }
}

#[derive(Default, Clone, Copy)]
struct NgramStats {
    matches: [u64; MAX_ORDER],
    totals: [u64; MAX_ORDER],
    cand_len: u64,
    ref_len: u64,
}

impl NgramStats {
    fn add(&mut self, other: &NgramStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.cand_len += other.cand_len;
        self.ref_len += other.ref_len;
    }

    fn score(&self) -> f64 {
        if self.cand_len == 0 {
            return 0.0;
        }
        // Orders with no candidate n-grams are left out; the rest share
        // uniform weight.
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_ORDER {
            if self.totals[n] == 0 {
                continue;
            }
            let num = if self.matches[n] == 0 { SMOOTHING } else { self.matches[n] as f64 };
            log_sum += (num / self.totals[n] as f64).ln();
            orders += 1;
        }
        let precision = (log_sum / orders as f64).exp();
        let bp = if self.cand_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.cand_len as f64).exp()
        };
        (bp * precision).clamp(0.0, 1.0)
    }
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut m = HashMap::new();
    for w in tokens.windows(n) {
        *m.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    m
}

fn pair_stats<T: AsRef<str>>(reference: &[T], candidate: &[T]) -> NgramStats {
    let mut s = NgramStats { cand_len: candidate.len() as u64, ref_len: reference.len() as u64, ..Default::default() };
    for n in 1..=MAX_ORDER {
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        s.totals[n - 1] = cand.values().sum();
        s.matches[n - 1] = cand.iter().map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0))).sum();
    }
    s
}

/// BLEU over aligned reference/candidate token lists, 1..4-gram uniform
/// weights, brevity penalty and epsilon smoothing of zero match counts.
pub fn bleu<T: AsRef<str> + Sync>(refs: &[Vec<T>], cands: &[Vec<T>], mode: BleuMode) -> Result<f64, MetricsError> {
    if refs.len() != cands.len() {
        return Err(MetricsError::LengthMismatch { refs: refs.len(), cands: cands.len() });
    }
    if refs.is_empty() {
        return Ok(0.0);
    }
    let stats: Vec<NgramStats> = refs.par_iter().zip(cands.par_iter()).map(|(r, c)| pair_stats(r, c)).collect();
    Ok(match mode {
        BleuMode::Corpus => {
            let mut total = NgramStats::default();
            stats.iter().for_each(|s| total.add(s));
            total.score()
        }
        BleuMode::Sentence => {
            let sum: f64 = stats
                .iter()
                .map(|s| if s.cand_len == 0 && s.ref_len == 0 { 1.0 } else { s.score() })
                .sum();
            sum / stats.len() as f64
        }
    })
}

/// One scored instance fed to [`aggregate_report`].
#[derive(Debug, Clone)]
pub struct ScoredInstance {
    pub domain: String,
    pub outcome: PlanOutcome,
    pub reference: String,
    pub candidate: String,
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub valid: usize,
    pub optimal: usize,
    pub failed: usize,
    pub incomplete: usize,
    /// Incomplete outcomes broken down by reason.
    pub incomplete_reasons: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub domain: String,
    pub instance_count: usize,
    pub valid_pct: f64,
    pub optimal_pct: f64,
    pub failed_pct: f64,
    pub incomplete_pct: f64,
    pub rouge_l: RougeScore,
    pub bleu: f64,
    pub mean_wall_time_s: Option<f64>,
    pub counts: ClassCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu_mode: BleuMode,
    /// Per-domain rows in tag order.
    pub domains: Vec<ReportRow>,
    pub overall: ReportRow,
}

fn summarize(domain: &str, items: &[&ScoredInstance], mode: BleuMode) -> ReportRow {
    let n = items.len();
    let mut counts = ClassCounts::default();
    for it in items {
        match &it.outcome.class {
            OutcomeClass::Valid { optimal } => {
                counts.valid += 1;
                counts.optimal += usize::from(*optimal == Some(true));
            }
            OutcomeClass::Failed { .. } => counts.failed += 1,
            OutcomeClass::Incomplete { reason } => {
                counts.incomplete += 1;
                *counts.incomplete_reasons.entry(reason.as_str().to_owned()).or_default() += 1;
            }
        }
    }
    let pct = |c: usize| 100.0 * c as f64 / n as f64;

    let tokens: Vec<(Vec<String>, Vec<String>)> =
        items.par_iter().map(|it| (tokenize_plan(&it.reference), tokenize_plan(&it.candidate))).collect();
    let rouges: Vec<RougeScore> = tokens.par_iter().map(|(r, c)| rouge_l(r, c)).collect();
    let mean = |f: fn(&RougeScore) -> f64| rouges.iter().map(f).sum::<f64>() / n as f64;
    let rouge = RougeScore { recall: mean(|r| r.recall), precision: mean(|r| r.precision), fmeasure: mean(|r| r.fmeasure) };
    let (refs, cands): (Vec<_>, Vec<_>) = tokens.into_iter().unzip();
    let bleu = bleu(&refs, &cands, mode).expect("aligned by construction");

    let times: Vec<f64> = items.iter().filter_map(|it| it.wall_time).collect();
    let mean_wall_time_s = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
    ReportRow {
        domain: domain.to_owned(),
        instance_count: n,
        valid_pct: pct(counts.valid),
        optimal_pct: pct(counts.optimal),
        failed_pct: pct(counts.failed),
        incomplete_pct: pct(counts.incomplete),
        rouge_l: rouge,
        bleu,
        mean_wall_time_s,
        counts,
    }
}

/// Per-domain and overall breakdown. ROUGE-L is macro-averaged over
/// instances; BLEU follows `mode`. Percentages are of all instances.
pub fn aggregate_report(items: &[ScoredInstance], mode: BleuMode) -> Result<EvalReport, MetricsError> {
    if items.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut groups: BTreeMap<&str, Vec<&ScoredInstance>> = BTreeMap::new();
    for it in items {
        groups.entry(it.domain.as_str()).or_default().push(it);
    }
    let domains = groups.iter().map(|(d, g)| summarize(d, g, mode)).collect();
    let all: Vec<&ScoredInstance> = items.iter().collect();
    Ok(EvalReport { bleu_mode: mode, domains, overall: summarize("overall", &all, mode) })
}

impl EvalReport {
    /// Aligned text table, one row per domain plus the overall row.
    pub fn to_table(&self) -> String {
        let header = [
            "domain", "n", "valid%", "optimal%", "failed%", "incompl%", "rouge_r", "rouge_p", "rouge_f", "bleu", "time_s",
        ];
        let mut rows = vec![header.iter().map(|h| h.to_string()).collect::<Vec<_>>()];
        for r in self.domains.iter().chain(std::iter::once(&self.overall)) {
            rows.push(vec![
                r.domain.clone(),
                r.instance_count.to_string(),
                format!("{:.2}", r.valid_pct),
                format!("{:.2}", r.optimal_pct),
                format!("{:.2}", r.failed_pct),
                format!("{:.2}", r.incomplete_pct),
                format!("{:.4}", r.rouge_l.recall),
                format!("{:.4}", r.rouge_l.precision),
                format!("{:.4}", r.rouge_l.fmeasure),
                format!("{:.4}", r.bleu),
                r.mean_wall_time_s.map_or("-".into(), |t| format!("{t:.4}")),
            ]);
        }
        let widths: Vec<usize> =
            (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, &w))| if i == 0 { format!("{cell:<w$}") } else { format!("{cell:>w$}") })
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        }
        out
    }
}
