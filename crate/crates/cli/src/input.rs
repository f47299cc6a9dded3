//! Loading a planning task from PDDL files or a linearized string.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use symplan_core::codec::{decode_task, Registry};
use symplan_core::{parse_domain, parse_problem, Domain, DomainTag, Problem};

#[derive(Debug, Args)]
pub struct TaskArgs {
    /// Domain PDDL file, or a bundled domain tag (bw, hn, gr, dl).
    #[arg(long, requires = "problem", conflicts_with_all = ["task", "task_file"])]
    pub domain: Option<String>,
    /// Problem PDDL file.
    #[arg(long, requires = "domain")]
    pub problem: Option<PathBuf>,
    /// Linearized task string.
    #[arg(long, conflicts_with = "task_file")]
    pub task: Option<String>,
    /// File holding a linearized task string.
    #[arg(long)]
    pub task_file: Option<PathBuf>,
    /// Decode linearized input without the bundled domain registry.
    #[arg(long)]
    pub no_registry: bool,
}

pub fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn load_domain(spec: &str) -> Result<Domain> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Ok(tag) = spec.parse::<DomainTag>() {
            return Ok(tag.domain());
        }
    }
    let text = read(path)?;
    parse_domain(&text).with_context(|| format!("parsing {}", path.display()))
}

impl TaskArgs {
    pub fn linearized_text(&self) -> Result<Option<String>> {
        match (&self.task, &self.task_file) {
            (Some(t), _) => Ok(Some(t.trim().to_string())),
            (None, Some(p)) => Ok(Some(read(p)?.trim().to_string())),
            _ => Ok(None),
        }
    }

    /// The task as a domain/problem pair. Decoding warnings go to stderr.
    pub fn load(&self) -> Result<(Domain, Problem)> {
        if let (Some(d), Some(p)) = (&self.domain, &self.problem) {
            let dom = load_domain(d)?;
            let prob = parse_problem(&read(p)?, &dom).with_context(|| format!("parsing {}", p.display()))?;
            return Ok((dom, prob));
        }
        let Some(text) = self.linearized_text()? else {
            bail!("no task given: pass --domain and --problem, --task, or --task-file");
        };
        let registry = (!self.no_registry).then(Registry::bundled);
        let decoded = decode_task(&text, registry.as_ref()).context("decoding task string")?;
        for w in &decoded.warnings {
            eprintln!("warning: {w}");
        }
        Ok((decoded.domain, decoded.problem))
    }
}
