//! Seeded simulation of bidding plays and Monte Carlo payoff estimates.

use crate::arena::{
    energy_and_payoff, resolve_bidding, ArenaError, BudgetState, GameGraph, Mechanism, Side, StepRecord,
};
use crate::strategy::{Agent, BidAction, StrategyHandle, View};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlayError {
    #[error(transparent)]
    Arena(#[from] ArenaError),
    #[error("responder strategy faces a randomised opponent")]
    ResponderAgainstMixed,
    #[error("both strategies are responders")]
    BothResponders,
    #[error("{side:?} moved from {from} to {to}, which is not an edge")]
    IllegalMove { side: Side, from: usize, to: usize },
    #[error("start vertex {0} out of range")]
    BadStart(usize),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("trace io: {0}")]
    Io(String),
}

/// A finite play. Budgets are raw (never normalised).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayTrace {
    pub mechanism: Mechanism,
    pub initial: BudgetState,
    pub start: usize,
    pub seed: u64,
    pub trial: u64,
    pub steps: Vec<StepRecord>,
}

impl PlayTrace {
    /// Budgets before step `i`.
    pub fn budgets_before(&self, i: usize) -> BudgetState {
        if i == 0 {
            self.initial
        } else {
            self.steps[i - 1].budgets_after
        }
    }

    pub fn max_wins(&self) -> usize {
        self.steps.iter().filter(|s| s.winner == Side::Max).count()
    }
}

/// First line of a trace file; the remaining lines are `StepRecord`s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub mechanism: Mechanism,
    pub initial: BudgetState,
    pub start: usize,
    pub seed: u64,
    pub trial: u64,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_strategy: Option<String>,
}

pub fn write_trace_jsonl(
    trace: &PlayTrace,
    strategies: (Option<&str>, Option<&str>),
    mut out: impl Write,
) -> Result<(), PlayError> {
    let header = TraceHeader {
        mechanism: trace.mechanism,
        initial: trace.initial,
        start: trace.start,
        seed: trace.seed,
        trial: trace.trial,
        steps: trace.steps.len(),
        max_strategy: strategies.0.map(str::to_owned),
        min_strategy: strategies.1.map(str::to_owned),
    };
    let io = |e: std::io::Error| PlayError::Io(e.to_string());
    let js = |e: serde_json::Error| PlayError::Io(e.to_string());
    writeln!(out, "{}", serde_json::to_string(&header).map_err(js)?).map_err(io)?;
    for s in &trace.steps {
        writeln!(out, "{}", serde_json::to_string(s).map_err(js)?).map_err(io)?;
    }
    Ok(())
}

pub fn read_trace_jsonl(input: impl BufRead) -> Result<(TraceHeader, PlayTrace), PlayError> {
    let mut lines = input.lines().filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()));
    let first = lines
        .next()
        .ok_or_else(|| PlayError::Io("empty trace file".into()))?
        .map_err(|e| PlayError::Io(e.to_string()))?;
    let header: TraceHeader =
        serde_json::from_str(&first).map_err(|e| PlayError::Io(format!("header: {e}")))?;
    let mut steps = Vec::with_capacity(header.steps);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| PlayError::Io(e.to_string()))?;
        let rec: StepRecord =
            serde_json::from_str(&line).map_err(|e| PlayError::Io(format!("step {i}: {e}")))?;
        steps.push(rec);
    }
    if steps.len() != header.steps {
        return Err(PlayError::Io(format!(
            "header announces {} steps, file has {}",
            header.steps,
            steps.len()
        )));
    }
    let trace = PlayTrace {
        mechanism: header.mechanism,
        initial: header.initial,
        start: header.start,
        seed: header.seed,
        trial: header.trial,
        steps,
    };
    Ok((header, trace))
}

/// Counter-based uniform draws: a pure function of (seed, trial, step, index).
struct Draws {
    rng: ChaCha8Rng,
}

impl Draws {
    fn new(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        Draws { rng }
    }

    fn uniform(&mut self, step: u64, idx: u64) -> f64 {
        self.rng.set_word_pos(u128::from(step * 8 + idx * 2));
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

fn sample(a: &BidAction, draws: &mut Draws, step: u64, base: u64) -> f64 {
    let mut k = 0;
    a.distribution.sample(&mut || {
        let u = draws.uniform(step, base + k.min(1));
        k += 1;
        u
    })
}

fn check_pairing(f: &StrategyHandle, g: &StrategyHandle) -> Result<(), PlayError> {
    match (f.is_responder(), g.is_responder()) {
        (true, true) => Err(PlayError::BothResponders),
        (true, false) if !g.is_deterministic() => Err(PlayError::ResponderAgainstMixed),
        (false, true) if !f.is_deterministic() => Err(PlayError::ResponderAgainstMixed),
        _ => Ok(()),
    }
}

/// Simulates `steps` biddings. Deterministic in all inputs.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    graph: &GameGraph,
    mech: &Mechanism,
    f: &StrategyHandle,
    g: &StrategyHandle,
    budgets: BudgetState,
    start: usize,
    steps: usize,
    seed: u64,
) -> Result<PlayTrace, PlayError> {
    simulate_trial(graph, mech, f, g, budgets, start, steps, seed, 0)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_trial(
    graph: &GameGraph,
    mech: &Mechanism,
    f: &StrategyHandle,
    g: &StrategyHandle,
    budgets: BudgetState,
    start: usize,
    steps: usize,
    seed: u64,
    trial: u64,
) -> Result<PlayTrace, PlayError> {
    mech.validate()?;
    check_pairing(f, g)?;
    if start >= graph.len() {
        return Err(PlayError::BadStart(start));
    }
    if !(budgets.max_budget >= 0.0 && budgets.min_budget >= 0.0)
        || !budgets.max_budget.is_finite()
        || !budgets.min_budget.is_finite()
    {
        return Err(ArenaError::DegenerateBudget(format!("{budgets:?}")).into());
    }
    let mut max_agent = Agent::new(f);
    let mut min_agent = Agent::new(g);
    let mut draws = Draws::new(seed, trial);
    let mut b = budgets;
    let mut v = start;
    let mut out = Vec::with_capacity(steps);
    for step in 0..steps as u64 {
        let vmax = View {
            graph,
            mechanism: *mech,
            side: Side::Max,
            step,
            vertex: v,
            own: b.max_budget,
            opponent: b.min_budget,
        };
        let vmin = View { side: Side::Min, own: b.min_budget, opponent: b.max_budget, ..vmax };
        let (amax, amin, x, y);
        if f.is_responder() {
            let a = min_agent.act(&vmin);
            y = sample(&a, &mut draws, step, 2);
            let r = max_agent.respond(&vmax, y);
            x = sample(&r, &mut draws, step, 0);
            (amax, amin) = (r, a);
        } else if g.is_responder() {
            let a = max_agent.act(&vmax);
            x = sample(&a, &mut draws, step, 0);
            let r = min_agent.respond(&vmin, x);
            y = sample(&r, &mut draws, step, 2);
            (amax, amin) = (a, r);
        } else {
            let a = max_agent.act(&vmax);
            let c = min_agent.act(&vmin);
            x = sample(&a, &mut draws, step, 0);
            y = sample(&c, &mut draws, step, 2);
            (amax, amin) = (a, c);
        }
        let (winner, nb) = resolve_bidding(mech, b, x, y)?;
        let to = match winner {
            Side::Max => amax.move_on_win,
            Side::Min => amin.move_on_win,
        };
        if !graph.has_edge(v, to) {
            return Err(PlayError::IllegalMove { side: winner, from: v, to });
        }
        max_agent.observe(&vmax, x, y);
        min_agent.observe(&vmin, y, x);
        out.push(StepRecord { vertex: v, bid_max: x, bid_min: y, winner, move_to: to, budgets_after: nb });
        b = nb;
        v = to;
    }
    Ok(PlayTrace { mechanism: *mech, initial: budgets, start, seed, trial, steps: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trial: u64,
    pub horizon_average: f64,
    pub tail_min_average: f64,
    pub max_wins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffStats {
    pub trials: Vec<TrialStats>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Smallest per-trial tail-min average.
    pub min_tail: f64,
    pub trial_count: usize,
    pub horizon: usize,
}

/// Runs `trials` independent plays in parallel; trial `i` uses stream `i`
/// of `base_seed`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_payoff(
    graph: &GameGraph,
    mech: &Mechanism,
    f: &StrategyHandle,
    g: &StrategyHandle,
    budgets: BudgetState,
    start: usize,
    steps: usize,
    trials: usize,
    base_seed: u64,
) -> Result<PayoffStats, PlayError> {
    if trials == 0 {
        return Err(PlayError::NoTrials);
    }
    if steps == 0 {
        return Err(ArenaError::EmptyTrace.into());
    }
    let per: Vec<TrialStats> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let tr = simulate_trial(graph, mech, f, g, budgets, start, steps, base_seed, t)?;
            let e = energy_and_payoff(&tr.steps, graph)?;
            Ok(TrialStats {
                trial: t,
                horizon_average: e.payoff_estimate,
                tail_min_average: e.tail_min_average,
                max_wins: tr.max_wins(),
            })
        })
        .collect::<Result<_, PlayError>>()?;
    Ok(aggregate(per, steps))
}

/// Folds per-trial results; order-independent up to the trial order it sorts into.
pub fn aggregate(mut per: Vec<TrialStats>, horizon: usize) -> PayoffStats {
    per.sort_by_key(|t| t.trial);
    let n = per.len();
    let mean = per.iter().map(|t| t.horizon_average).sum::<f64>() / n as f64;
    let min = per.iter().map(|t| t.horizon_average).fold(f64::INFINITY, f64::min);
    let max = per.iter().map(|t| t.horizon_average).fold(f64::NEG_INFINITY, f64::max);
    let min_tail = per.iter().map(|t| t.tail_min_average).fold(f64::INFINITY, f64::min);
    // Rounding can put the mean a hair outside [min, max] when all trials agree.
    let mean = mean.clamp(min, max);
    PayoffStats { trials: per, mean, min, max, min_tail, trial_count: n, horizon }
}
