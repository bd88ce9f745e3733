use crate::config::{budgets, load_graph, mechanism, merge, positive};
use crate::{CliError, Flags};
use bidding_core::certify::{check_magic_exhaustive, CheckKind, MagicReport};
use bidding_core::parity::ParityError;
use bidding_core::play::{read_trace_jsonl, simulate_trial, write_trace_jsonl, TraceHeader};
use bidding_core::strategy::StrategyError;
use bidding_core::{
    certify_trace, decide_parity, equivalent_p, estimate_payoff, solve_mean_payoff, value_curve,
    ArenaError, BudgetState, CertifyReport, GameGraph, LedgerParams, Mechanism, Mode, ParityGame,
    PayoffStats, PlayError, Side, SolverError, StrategyHandle, StrategySpec,
};
use serde::Serialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

const DEFAULT_STEPS: usize = 100_000;
const DEFAULT_TRIALS: usize = 20;
const MAGIC_LEN: usize = 8;

fn solver_err(e: SolverError) -> CliError {
    match e {
        SolverError::NoConvergence(_) | SolverError::SingularSystem => CliError::Numeric(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}

fn strategy_err(e: StrategyError) -> CliError {
    match e {
        StrategyError::Solver(s) => solver_err(s),
        e => CliError::Validation(e.to_string()),
    }
}

fn play_err(e: PlayError) -> CliError {
    match e {
        PlayError::Arena(ArenaError::IllegalBid(_)) | PlayError::IllegalMove { .. } => {
            CliError::Numeric(e.to_string())
        }
        e => CliError::Validation(e.to_string()),
    }
}

fn parity_err(e: ParityError) -> CliError {
    match e {
        ParityError::Solver(s) => solver_err(s),
        ParityError::CertificateFailed { .. } => CliError::Numeric(e.to_string()),
        e => CliError::Validation(e.to_string()),
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(format!("serialising: {e}")))?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn mode(f: &Flags) -> Result<Mode, CliError> {
    match f.mode.as_deref().unwrap_or("mixed") {
        "pure" => Ok(Mode::Pure),
        "mixed" => Ok(Mode::Mixed),
        other => Err(CliError::Validation(format!("unknown mode {other}"))),
    }
}

fn build(
    spec: &str,
    g: &GameGraph,
    mech: &Mechanism,
    b: BudgetState,
    side: Side,
) -> Result<StrategyHandle, CliError> {
    StrategySpec::parse(spec)
        .and_then(|s| s.build(g, mech, b, side))
        .map_err(strategy_err)
}

fn spec<'a>(v: &'a Option<String>, flag: &str) -> Result<&'a str, CliError> {
    v.as_deref().ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

#[derive(Serialize)]
struct SolveReport {
    p: f64,
    p_source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    mechanism: Option<Mechanism>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    budgets: Option<BudgetState>,
    value: f64,
    sigma_max: Vec<usize>,
    sigma_min: Vec<usize>,
    pot: Vec<f64>,
    strength: Vec<f64>,
    s_max: f64,
    s_min_pos: Option<f64>,
}

pub fn solve(f: Flags) -> Result<(), CliError> {
    let f = merge(f)?;
    let g = load_graph(&f)?;
    let (p, src, mech, md, bs) = match f.p {
        Some(p) => (p, "given", None, None, None),
        None => {
            if f.mechanism.is_none() {
                return Err(CliError::Usage("give --p or --mechanism with budgets".into()));
            }
            let m = mechanism(&f)?;
            let b = budgets(&f, &m)?;
            let md = mode(&f)?;
            (equivalent_p(&m, b, md).map_err(solver_err)?, "derived", Some(m), Some(md), Some(b))
        }
    };
    let sol = solve_mean_payoff(&g, p).map_err(solver_err)?;
    emit(
        f.out.as_deref(),
        &SolveReport {
            p,
            p_source: src,
            mechanism: mech,
            mode: md,
            budgets: bs,
            value: sol.value,
            sigma_max: sol.sigma_max,
            sigma_min: sol.sigma_min,
            pot: sol.pot,
            strength: sol.strength,
            s_max: sol.s_max,
            s_min_pos: sol.s_min_pos,
        },
    )
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    mechanism: Mechanism,
    max: &'a str,
    min: &'a str,
    budgets: BudgetState,
    start: usize,
    seed: u64,
    stats: PayoffStats,
}

pub fn simulate(f: Flags) -> Result<(), CliError> {
    let f = merge(f)?;
    let g = load_graph(&f)?;
    let mech = mechanism(&f)?;
    let b = budgets(&f, &mech)?;
    let (ms, ns) = (spec(&f.max, "max")?, spec(&f.min, "min")?);
    let fmax = build(ms, &g, &mech, b, Side::Max)?;
    let fmin = build(ns, &g, &mech, b, Side::Min)?;
    let steps = positive("steps", f.steps, DEFAULT_STEPS)?;
    let trials = positive("trials", f.trials, DEFAULT_TRIALS)?;
    let seed = f.seed.unwrap_or(0);
    let start = f.start.unwrap_or(0);
    let stats = estimate_payoff(&g, &mech, &fmax, &fmin, b, start, steps, trials, seed).map_err(play_err)?;
    if let Some(path) = &f.trace_out {
        let t = simulate_trial(&g, &mech, &fmax, &fmin, b, start, steps, seed, 0).map_err(play_err)?;
        let file = File::create(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_trace_jsonl(&t, (Some(ms), Some(ns)), &mut w).map_err(play_err)?;
        w.flush().map_err(|e| CliError::Validation(e.to_string()))?;
    }
    emit(
        f.out.as_deref(),
        &SimulateReport { mechanism: mech, max: ms, min: ns, budgets: b, start, seed, stats },
    )
}

#[derive(Serialize)]
struct CertifyOutput {
    #[serde(flatten)]
    report: CertifyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    magic: Option<MagicReport>,
}

pub fn certify(f: Flags) -> Result<(), CliError> {
    let f = merge(f)?;
    let g = load_graph(&f)?;
    let (header, trace) = match &f.trace {
        Some(path) => {
            let file = File::open(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            read_trace_jsonl(BufReader::new(file)).map_err(|e| CliError::Validation(e.to_string()))?
        }
        None => {
            let mech = mechanism(&f)?;
            let b = budgets(&f, &mech)?;
            let (ms, ns) = (spec(&f.max, "max")?, spec(&f.min, "min")?);
            let fmax = build(ms, &g, &mech, b, Side::Max)?;
            let fmin = build(ns, &g, &mech, b, Side::Min)?;
            let steps = positive("steps", f.steps, DEFAULT_STEPS)?;
            let seed = f.seed.unwrap_or(0);
            let t = simulate_trial(&g, &mech, &fmax, &fmin, b, f.start.unwrap_or(0), steps, seed, 0)
                .map_err(play_err)?;
            let h = TraceHeader {
                mechanism: mech,
                initial: b,
                start: t.start,
                seed,
                trial: 0,
                steps: t.steps.len(),
                max_strategy: Some(ms.to_string()),
                min_strategy: Some(ns.to_string()),
            };
            (h, t)
        }
    };
    if let Some(v) = trace.steps.iter().map(|s| s.vertex.max(s.move_to)).max() {
        if v >= g.len() {
            return Err(CliError::Validation(format!("trace visits vertex {v}, graph has {}", g.len())));
        }
    }
    let ms = f
        .max
        .clone()
        .or(header.max_strategy.clone())
        .ok_or_else(|| CliError::Usage("--max is required (trace header names no strategy)".into()))?;
    let fmax = build(&ms, &g, &trace.mechanism, trace.initial, Side::Max)?;
    let names = f.checks.clone().unwrap_or_else(|| "all".into());
    let mut want_magic = false;
    let list: Vec<&str> = names
        .split(',')
        .map(str::trim)
        .filter(|n| {
            let m = *n == "magic";
            want_magic |= m || *n == "all";
            !m
        })
        .collect();
    let checks = CheckKind::parse_list(&list.join(",")).map_err(|e| CliError::Usage(e.to_string()))?;
    let report = certify_trace(&g, &trace, &fmax, &checks).map_err(|e| CliError::Validation(e.to_string()))?;
    let magic = if want_magic {
        let (nu, mu) = match LedgerParams::from_handle(&fmax, trace.initial) {
            Ok((p, _)) => (p.nu, p.mu),
            Err(_) => (1.0, 1.0 + f.eps.unwrap_or(0.0)),
        };
        if nu > 0.0 && mu > 0.0 {
            let sol = solve_mean_payoff(&g, nu / (nu + mu)).map_err(solver_err)?;
            Some(
                check_magic_exhaustive(&g, &sol, nu, mu, MAGIC_LEN)
                    .map_err(|e| CliError::Validation(e.to_string()))?,
            )
        } else {
            None
        }
    } else {
        None
    };
    let mut report = report;
    report.passed &= magic.as_ref().is_none_or(|m| m.holds);
    let passed = report.passed;
    emit(f.out.as_deref(), &CertifyOutput { report, magic })?;
    if passed {
        Ok(())
    } else {
        Err(CliError::CheckFailed)
    }
}

pub fn parity(f: Flags) -> Result<(), CliError> {
    let f = merge(f)?;
    let g = load_graph(&f)?;
    let mech = mechanism(&f)?;
    let b = budgets(&f, &mech)?;
    let pg = ParityGame::new(g).map_err(parity_err)?;
    let d = decide_parity(&pg, &mech, b.ratio()).map_err(parity_err)?;
    emit(f.out.as_deref(), &d)
}

fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |e: String| CliError::Validation(format!("grid {s}: {e}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| bad(e.to_string()));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(h > 0.0 && b >= a) {
            return Err(bad("need a ≤ b and step > 0".into()));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| a + i as f64 * h).collect())
    } else {
        s.split(',').map(num).collect()
    }
}

#[derive(Serialize)]
struct SweepPoint {
    p: f64,
    value: f64,
}

pub fn sweep(f: Flags) -> Result<(), CliError> {
    let f = merge(f)?;
    let g = load_graph(&f)?;
    let grid = parse_grid(f.grid.as_deref().unwrap_or("0.05:0.95:0.05"))?;
    let curve = value_curve(&g, &grid).map_err(solver_err)?;
    let pts: Vec<SweepPoint> = curve.into_iter().map(|(p, value)| SweepPoint { p, value }).collect();
    emit(f.out.as_deref(), &pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.1,0.5").unwrap(), vec![0.1, 0.5]);
        let g = parse_grid("0.1:0.9:0.1").unwrap();
        assert_eq!(g.len(), 9);
        assert!(parse_grid("0.5:0.1:0.1").is_err());
    }
}
