use crate::{CliError, Flags};
use bidding_core::{BudgetState, GameGraph, Mechanism};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Experiment config file. Relative paths resolve against the config's
/// directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: Option<PathBuf>,
    pub mechanism: Option<String>,
    pub max: Option<String>,
    pub min: Option<String>,
    pub budget_max: Option<f64>,
    pub budget_min: Option<f64>,
    pub eps: Option<f64>,
    pub steps: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub checks: Option<Vec<String>>,
    pub p: Option<f64>,
    pub mode: Option<String>,
    pub start: Option<usize>,
    pub trace: Option<PathBuf>,
    pub trace_out: Option<PathBuf>,
    pub grid: Option<String>,
}

fn rebase(dir: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_relative() { dir.join(p) } else { p })
}

/// Loads `--config` (if any) and lets flags override it.
pub fn merge(f: Flags) -> Result<Flags, CliError> {
    let Some(path) = f.config.clone() else {
        return Ok(f);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let c: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    Ok(Flags {
        config: f.config,
        graph: f.graph.or(rebase(dir, c.graph)),
        mechanism: f.mechanism.or(c.mechanism),
        max: f.max.or(c.max),
        min: f.min.or(c.min),
        budget_max: f.budget_max.or(c.budget_max),
        budget_min: f.budget_min.or(c.budget_min),
        eps: f.eps.or(c.eps),
        steps: f.steps.or(c.steps),
        trials: f.trials.or(c.trials),
        seed: f.seed.or(c.seed),
        out: f.out.or(rebase(dir, c.out)),
        checks: f.checks.or(c.checks.map(|v| v.join(","))),
        p: f.p.or(c.p),
        mode: f.mode.or(c.mode),
        start: f.start.or(c.start),
        trace_out: f.trace_out.or(rebase(dir, c.trace_out)),
        trace: f.trace.or(rebase(dir, c.trace)),
        grid: f.grid.or(c.grid),
    })
}

pub fn load_graph(f: &Flags) -> Result<GameGraph, CliError> {
    let path = f.graph.as_ref().ok_or_else(|| CliError::Usage("--graph is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    GameGraph::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn mechanism(f: &Flags) -> Result<Mechanism, CliError> {
    let m = f.mechanism.as_deref().ok_or_else(|| CliError::Usage("--mechanism is required".into()))?;
    Mechanism::parse(m).map_err(|e| CliError::Validation(e.to_string()))
}

/// Budgets as given. Asymmetric games pin Min's budget to 1.
pub fn budgets(f: &Flags, mech: &Mechanism) -> Result<BudgetState, CliError> {
    let b = f.budget_max.ok_or_else(|| CliError::Usage("--budget-max is required".into()))?;
    let c = match (f.budget_min, mech) {
        (None, Mechanism::Asymmetric { .. }) => 1.0,
        (Some(c), Mechanism::Asymmetric { .. }) if c != 1.0 => {
            return Err(CliError::Validation("asymmetric games fix Min's budget at 1".into()))
        }
        (Some(c), _) => c,
        (None, _) => return Err(CliError::Usage("--budget-min is required".into())),
    };
    if !(b.is_finite() && c.is_finite() && b >= 0.0 && c >= 0.0 && b + c > 0.0) {
        return Err(CliError::Validation(format!("illegal budgets ({b}, {c})")));
    }
    Ok(BudgetState::new(b, c))
}

pub fn positive(name: &str, v: Option<usize>, default: usize) -> Result<usize, CliError> {
    match v.unwrap_or(default) {
        0 => Err(CliError::Validation(format!("--{name} must be at least 1"))),
        n => Ok(n),
    }
}
