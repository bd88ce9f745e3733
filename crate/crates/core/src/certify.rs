//! Ledgers (I⁺, G⁺, H, L) and per-step checkers for the budget invariants,
//! ledger bounds, expected-luck identities and the potential inequality.

use crate::arena::{resolve_bidding, BudgetState, GameGraph, Mechanism, Side, StepRecord};
use crate::play::PlayTrace;
use crate::solver::StochasticSolution;
use crate::strategy::{budget_bid, lift_scale, Profile, StrategyHandle, StrategyKind, StrategyParams};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

/// Relative slack for all inequality checks (log scale where applicable).
pub const TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("variant {0:?} has no luck ledger")]
    VariantWithoutLuck(Variant),
    #[error("y = {y} outside [0, {beta}]")]
    YOutOfRange { y: f64, beta: f64 },
    #[error("no certificate for this strategy: {0}")]
    VariantMismatch(String),
    #[error("the arena has no vertex with positive strength")]
    NoPositiveStrength,
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("paths longer than 12 are not enumerated (asked for {0})")]
    TooLong(usize),
    #[error("solution at p = {got}, inequality needs p = {want}")]
    ParameterMismatch { got: f64, want: f64 },
    #[error("unknown check {0}")]
    UnknownCheck(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    ApRichman,
    FpRichman,
    FpPoorman,
    AsymPure,
    AsymMixedHighW,
    AsymMixedLowW,
}

impl Variant {
    pub fn has_luck(self) -> bool {
        matches!(self, Variant::ApRichman | Variant::AsymMixedHighW | Variant::AsymMixedLowW)
    }

    /// Construction kind the variant certifies.
    pub fn kind(self) -> StrategyKind {
        match self {
            Variant::ApRichman => StrategyKind::ApRichmanMixed,
            Variant::FpRichman => StrategyKind::FpRichman,
            Variant::FpPoorman => StrategyKind::FpPoorman,
            Variant::AsymPure => StrategyKind::AsymPure,
            Variant::AsymMixedHighW => StrategyKind::AsymMixedHighW,
            Variant::AsymMixedLowW => StrategyKind::AsymMixedLowW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerParams {
    pub variant: Variant,
    pub mu: f64,
    pub nu: f64,
    pub c: f64,
    pub alpha: f64,
    pub w: f64,
    pub s_max: f64,
    pub s_min_pos: Option<f64>,
    pub n: f64,
    /// Initial budget in the variant's units: share of the total for the
    /// Richman variants, B/C for first-price poorman, B for asymmetric games.
    pub b0: f64,
    pub epsilon: f64,
    pub k0: u32,
    pub spare_change: f64,
    pub uniform_weight: f64,
}

impl LedgerParams {
    /// Ledger parameters of a construction (the lift's inner construction for
    /// a lifted strategy).
    pub fn from_handle(h: &StrategyHandle, initial: BudgetState) -> Result<(Self, Arc<Profile>), CertifyError> {
        let (variant, b0) = match &h.kind {
            StrategyKind::ApRichmanMixed => (Variant::ApRichman, initial.ratio()),
            StrategyKind::FpRichman => (Variant::FpRichman, h.params.b0),
            StrategyKind::FpPoorman => (Variant::FpPoorman, h.params.b0),
            StrategyKind::AsymPure => (Variant::AsymPure, initial.max_budget),
            StrategyKind::AsymMixedHighW => (Variant::AsymMixedHighW, initial.max_budget),
            StrategyKind::AsymMixedLowW => (Variant::AsymMixedLowW, initial.max_budget),
            StrategyKind::PoormanLift { inner } => {
                let (mut p, prof) = Self::from_handle(inner, BudgetState::new(h.params.b0, 1.0))?;
                p.b0 = h.params.b0;
                return Ok((p, prof));
            }
            _ => return Err(CertifyError::VariantMismatch(h.name().to_string())),
        };
        let prof = h.profile.clone().ok_or_else(|| CertifyError::VariantMismatch(h.name().into()))?;
        let sp = h.params;
        Ok((
            LedgerParams {
                variant,
                mu: sp.mu,
                nu: sp.nu,
                c: sp.c,
                alpha: sp.alpha,
                w: sp.w,
                s_max: prof.s_max,
                s_min_pos: prof.s_min_pos,
                n: sp.n,
                b0,
                epsilon: sp.epsilon,
                k0: sp.k0,
                spare_change: sp.spare_change,
                uniform_weight: sp.uniform_weight,
            },
            prof,
        ))
    }

    pub fn strategy_params(&self) -> StrategyParams {
        StrategyParams {
            epsilon: self.epsilon,
            c: self.c,
            alpha: self.alpha,
            w: self.w,
            n: self.n,
            mu: self.mu,
            nu: self.nu,
            spare_change: self.spare_change,
            k0: self.k0,
            b0: self.b0,
            uniform_weight: self.uniform_weight,
        }
    }

    /// log base 1+α.
    pub fn lg(&self, z: f64) -> f64 {
        z.ln() / self.alpha.ln_1p()
    }

    /// Constant part of H (nonzero only for first-price poorman).
    pub fn h_offset(&self) -> f64 {
        match self.variant {
            Variant::FpPoorman => -self.n * self.lg(self.epsilon),
            _ => 0.0,
        }
    }

    /// Luck before the first step.
    pub fn l0(&self) -> f64 {
        match self.variant {
            Variant::ApRichman => 2.0 * self.s_max * self.lg(self.b0),
            _ => 0.0,
        }
    }

    /// Upper end of the uniform bid at strength `s`, budget `b`.
    pub fn beta(&self, s: f64, b: f64) -> f64 {
        if self.s_max <= 0.0 {
            return 0.0;
        }
        let rel = s / self.s_max;
        match self.variant {
            Variant::AsymMixedHighW => rel / self.w * self.alpha * b,
            _ => rel * self.alpha * b,
        }
    }

    /// Whether the construction bids deterministically at (s, b).
    pub fn deterministic_branch(&self, s: f64, b: f64) -> bool {
        let sm = self.s_max;
        match self.variant {
            Variant::AsymMixedHighW => s > 0.0 && b > 2.0 * self.w * self.w * sm / (self.alpha * s),
            Variant::AsymMixedLowW => s > 0.0 && b > 2.0 * sm / (self.alpha * s),
            Variant::ApRichman => false,
            _ => true,
        }
    }
}

/// Luck increment of one bidding. `b` is Max's budget before the step in the
/// variant's units; Min's bid is capped at the uniform upper end.
pub fn luck_increment(p: &LedgerParams, s: f64, b: f64, x: f64, y: f64) -> Result<f64, CertifyError> {
    if !p.variant.has_luck() {
        return Err(CertifyError::VariantWithoutLuck(p.variant));
    }
    if s <= 0.0 || b <= 0.0 {
        return Ok(0.0);
    }
    let y = y.min(p.beta(s, b));
    let sm = p.s_max;
    let ab = p.alpha * b;
    Ok(match p.variant {
        Variant::ApRichman => {
            let t = 2.0 * sm * (y - x) / ab;
            if x > y {
                p.c * (s + t)
            } else {
                -s + t
            }
        }
        Variant::AsymMixedHighW => {
            let w = p.w;
            let t = 2.0 * w * sm * (w * y - x) / ab;
            if x <= y {
                t - p.nu * s
            } else if x <= w * y {
                t + p.mu * s
            } else {
                p.mu * t + p.mu * s
            }
        }
        Variant::AsymMixedLowW => {
            let w = p.w;
            let t = 2.0 * sm * (w * y - x) / ab;
            if x <= w * y {
                t - p.nu * s
            } else if x <= y {
                (1.0 + p.epsilon) * t - p.nu * s
            } else {
                (1.0 + p.epsilon) * t + p.mu * s
            }
        }
        _ => unreachable!(),
    })
}

/// E_x[ΔL] against a fixed Min bid `y ∈ [0, β]`, in closed form.
pub fn expected_luck_closed_form(p: &LedgerParams, s: f64, b: f64, y: f64) -> Result<f64, CertifyError> {
    if !p.variant.has_luck() {
        return Err(CertifyError::VariantWithoutLuck(p.variant));
    }
    let beta = p.beta(s, b);
    if !(y >= 0.0 && y <= beta * (1.0 + 1e-12)) {
        return Err(CertifyError::YOutOfRange { y, beta });
    }
    if s <= 0.0 || beta <= 0.0 {
        return Ok(0.0);
    }
    let y = y.min(beta);
    let eps = p.epsilon;
    let w = p.w;
    Ok(match p.variant {
        Variant::ApRichman => (p.c - 1.0) * p.s_max * y * (beta - y) / (beta * p.alpha * b),
        Variant::AsymMixedHighW => {
            if p.deterministic_branch(s, b) {
                let x = s / (2.0 * w * p.s_max) * p.alpha * b;
                luck_increment(p, s, b, x, y)?
            } else {
                let mut t = (beta - y) * eps * s;
                if w * y <= beta {
                    t -= eps * s * (beta - w * y).powi(2) / beta;
                }
                t / beta
            }
        }
        Variant::AsymMixedLowW => {
            if p.deterministic_branch(s, b) {
                let x = s / (2.0 * p.s_max) * p.alpha * b;
                luck_increment(p, s, b, x, y)?
            } else {
                let q = p.uniform_weight;
                let u = y / beta;
                s * ((1.0 - q) * (2.0 * w * u - p.nu)
                    + q * ((1.0 - w) * (1.0 - 2.0 * u) + eps * w * u * (2.0 - w * u)))
            }
        }
        _ => unreachable!(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LedgerState {
    pub i_plus: f64,
    pub g_plus: f64,
    pub h: f64,
    pub l: f64,
}

/// Ledger along a trace; `states[i]` is the ledger after `i` steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ledger {
    pub states: Vec<LedgerState>,
    /// Max wins followed by a move other than v⁺ (contribute to neither sum).
    pub off_plus_wins: usize,
    /// Strength at the vertex of each step.
    #[serde(skip)]
    pub strengths: Vec<f64>,
}

/// Max's budget in the variant's units.
pub fn unit_budget(p: &LedgerParams, b: BudgetState, total0: f64) -> f64 {
    match p.variant {
        Variant::ApRichman | Variant::FpRichman => b.max_budget / total0,
        Variant::FpPoorman => b.max_budget / b.min_budget,
        _ => b.max_budget,
    }
}

/// Bid scale matching `unit_budget`.
fn unit_scale(p: &LedgerParams, b: BudgetState, total0: f64) -> f64 {
    match p.variant {
        Variant::ApRichman | Variant::FpRichman => 1.0 / total0,
        Variant::FpPoorman => 1.0 / b.min_budget,
        _ => 1.0,
    }
}

pub fn replay_ledger(p: &LedgerParams, prof: &Profile, trace: &PlayTrace) -> Result<Ledger, CertifyError> {
    let total0 = trace.initial.sum();
    let mut st = LedgerState { l: p.l0(), ..Default::default() };
    st.h = p.mu * st.i_plus - p.nu * st.g_plus + p.h_offset();
    let mut states = Vec::with_capacity(trace.steps.len() + 1);
    states.push(st);
    let mut off = 0;
    let mut strengths = Vec::with_capacity(trace.steps.len());
    for (i, r) in trace.steps.iter().enumerate() {
        let s = *prof
            .strength
            .get(r.vertex)
            .ok_or_else(|| CertifyError::InvalidPath(format!("vertex {} out of range", r.vertex)))?;
        strengths.push(s);
        let before = trace.budgets_before(i);
        if p.variant.has_luck() {
            let k = unit_scale(p, before, total0);
            let b = unit_budget(p, before, total0);
            st.l += luck_increment(p, s, b, r.bid_max * k, r.bid_min * k)?;
        }
        match r.winner {
            Side::Max if r.move_to == prof.toward[r.vertex] => st.i_plus += s,
            Side::Max => off += 1,
            Side::Min => st.g_plus += s,
        }
        st.h = p.mu * st.i_plus - p.nu * st.g_plus + p.h_offset();
        states.push(st);
    }
    Ok(Ledger { states, off_plus_wins: off, strengths })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub applicable: bool,
    pub passed: bool,
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<usize>,
    pub worst_margin: f64,
    pub worst_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Margin per prefix length (not exported).
    #[serde(skip)]
    pub margins: Vec<f64>,
}

impl CheckReport {
    fn skipped(name: &str, why: &str) -> Self {
        CheckReport {
            name: name.into(),
            applicable: false,
            passed: true,
            checked: 0,
            violations: 0,
            first_violation: None,
            worst_margin: f64::INFINITY,
            worst_step: None,
            note: Some(why.into()),
            margins: Vec::new(),
        }
    }

    /// Builds a report from (margin, tolerance) pairs; a step fails when
    /// `margin < -tol`.
    fn from_margins(name: &str, items: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut r = CheckReport::skipped(name, "");
        r.applicable = true;
        r.note = None;
        for (i, (m, tol)) in items.into_iter().enumerate() {
            r.checked += 1;
            r.margins.push(m);
            // NaN margins count as violations.
            if !(m >= -tol) {
                r.violations += 1;
                r.first_violation.get_or_insert(i);
            }
            if !(m >= r.worst_margin) {
                r.worst_margin = m;
                r.worst_step = Some(i);
            }
        }
        r.passed = r.violations == 0;
        r
    }
}

fn rel_tol(scale: f64) -> f64 {
    TOL * scale.abs().max(1.0)
}

/// a / S_max with trivial games mapped to 0.
fn per_s(a: f64, s: f64) -> f64 {
    if s > 0.0 {
        a / s
    } else {
        0.0
    }
}

/// First-price Richman main budget (share of the initial total) at every
/// prefix, replayed from the bids. Bids beyond the main budget come out of the
/// spare change.
fn replay_main(p: &LedgerParams, trace: &PlayTrace) -> Vec<f64> {
    let total0 = trace.initial.sum();
    let mut main = trace.initial.max_budget / total0 - p.spare_change;
    let mut out = Vec::with_capacity(trace.steps.len() + 1);
    out.push(main);
    for r in &trace.steps {
        main = match r.winner {
            Side::Max => (main - r.bid_max / total0).max(0.0),
            Side::Min => main + r.bid_min / total0,
        };
        out.push(main);
    }
    out
}

/// Checks the budget invariant of the variant at every prefix. Prefixes whose
/// bound lies below the normal f64 range cannot be checked and are counted in
/// the note.
pub fn check_invariant(
    p: &LedgerParams,
    ledger: &Ledger,
    trace: &PlayTrace,
) -> Result<CheckReport, CertifyError> {
    let total0 = trace.initial.sum();
    let sm = p.s_max;
    let floor = p.lg(f64::MIN_POSITIVE);
    let main = if p.variant == Variant::FpRichman { replay_main(p, trace) } else { Vec::new() };
    let mut unrepresentable = 0;
    let items: Vec<(f64, f64)> = ledger
        .states
        .iter()
        .enumerate()
        .map(|(i, st)| {
            let bs = trace.budgets_before(i);
            let b = unit_budget(p, bs, total0);
            let (lhs, rhs) = match p.variant {
                // lg r + (L − L₀ − H)/(2S_max), which keeps its base value when S_max = 0.
                Variant::ApRichman => (p.lg(b), p.lg(p.b0) + per_s(st.l - p.l0() - st.h, 2.0 * sm)),
                Variant::FpRichman => (p.lg(main[i]), -per_s(st.h, sm) - p.k0 as f64),
                Variant::FpPoorman => {
                    let lhs = if bs.min_budget > 0.0 { p.lg(b - p.w) } else { f64::INFINITY };
                    (lhs, -per_s(st.h, p.n))
                }
                Variant::AsymPure => (p.lg(b), p.lg(p.b0) - per_s(st.h, p.n)),
                Variant::AsymMixedHighW => (p.lg(b), p.lg(p.b0) + per_s(st.l - st.h, 2.0 * p.w * sm)),
                Variant::AsymMixedLowW => (p.lg(b), p.lg(p.b0) + per_s(st.l - st.h, 2.0 * sm)),
            };
            if rhs < floor {
                unrepresentable += 1;
                return (f64::INFINITY, 0.0);
            }
            let m = if lhs == f64::INFINITY { f64::INFINITY } else { lhs - rhs };
            (m, rel_tol(rhs))
        })
        .collect();
    let mut rep = CheckReport::from_margins("invariant", items);
    if unrepresentable > 0 {
        rep.note = Some(format!("{unrepresentable} prefixes with a bound below the f64 range"));
    }
    Ok(rep)
}

/// The ledger bound M of the variant, together with whether it is a lower
/// bound on H (true) or an upper bound on L − H (false).
pub fn h_bound(p: &LedgerParams) -> Result<(f64, bool), CertifyError> {
    let sm = p.s_max;
    let smin = p.s_min_pos.ok_or(CertifyError::NoPositiveStrength)?;
    let a = p.alpha;
    Ok(match p.variant {
        Variant::AsymPure => {
            let lead = -p.n * p.lg(p.n / (a * smin * p.b0));
            ((lead - p.nu * sm).min(0.0), true)
        }
        Variant::FpPoorman => {
            let lead = -p.n * p.lg(p.n / (a * smin)) + p.n * p.lg(p.epsilon);
            ((lead - p.w * sm).min(0.0), true)
        }
        Variant::AsymMixedHighW => {
            let w = p.w;
            let lead = 2.0 * w * sm * p.lg(2.0 * w * w * sm / (a * smin * p.b0));
            ((lead + (2.0 * w * w + 1.0) * p.mu * sm + p.nu * sm).max(0.0), false)
        }
        Variant::AsymMixedLowW => {
            let w = p.w;
            let lead = 2.0 * sm * p.lg(2.0 * sm / (a * smin * p.b0));
            ((lead + (2.0 * w + 1.0) * p.mu * sm + p.nu * sm).max(0.0), false)
        }
        Variant::FpRichman => (-(p.k0 as f64) * sm, true),
        Variant::ApRichman => {
            return Err(CertifyError::VariantMismatch("all-pay Richman has no H bound".into()))
        }
    })
}

/// Checks the ledger bound at every prefix. For the mixed asymmetric variants
/// it also checks that L − H does not grow on deterministic-branch steps.
pub fn check_h_bound(p: &LedgerParams, ledger: &Ledger, trace: &PlayTrace) -> Result<CheckReport, CertifyError> {
    let (m, lower) = h_bound(p)?;
    let off = p.h_offset();
    let mut items: Vec<(f64, f64)> = ledger
        .states
        .iter()
        .map(|st| {
            let h = st.h - off;
            if lower {
                (h - m, rel_tol(m))
            } else {
                (m - (st.l - st.h), rel_tol(m))
            }
        })
        .collect();
    if p.variant == Variant::FpRichman {
        // Strict: H/S_max > −k₀.
        for it in items.iter_mut() {
            if it.0 <= 0.0 {
                it.0 = it.0.min(-2.0 * it.1);
            }
        }
    }
    let mut rep = CheckReport::from_margins("h-bound", items);
    rep.note = Some(format!("M = {m}"));
    if matches!(p.variant, Variant::AsymMixedHighW | Variant::AsymMixedLowW) {
        let mut det = 0;
        for (i, &s) in ledger.strengths.iter().enumerate() {
            let b = trace.budgets_before(i).max_budget;
            if s > 0.0 && p.deterministic_branch(s, b) {
                det += 1;
                let d0 = ledger.states[i].l - ledger.states[i].h;
                let d1 = ledger.states[i + 1].l - ledger.states[i + 1].h;
                // The drop shrinks to 0 as B nears the branch threshold, so
                // it is resolved only up to the tolerance.
                if !(d1 <= d0 + rel_tol(d0)) {
                    rep.violations += 1;
                    rep.first_violation.get_or_insert(i + 1);
                    rep.passed = false;
                }
            }
        }
        rep.note = Some(format!("M = {m}; deterministic-branch steps = {det}"));
    }
    Ok(rep)
}

/// Per-play energy bound for all-pay Richman traces:
/// energy(πⁿ) ≥ ((c+1)/c)·Lₙ + Pot(η₀) − Pot(ηₙ) + n·MP.
pub fn check_energy_bound(
    p: &LedgerParams,
    prof: &Profile,
    ledger: &Ledger,
    graph: &GameGraph,
    trace: &PlayTrace,
) -> CheckReport {
    if p.variant != Variant::ApRichman {
        return CheckReport::skipped("energy-bound", "all-pay Richman only");
    }
    let mut energy = 0.0;
    let mut v = trace.start;
    let v0 = trace.start;
    let mut items = Vec::with_capacity(ledger.states.len());
    for (n, st) in ledger.states.iter().enumerate() {
        if n > 0 {
            let r = &trace.steps[n - 1];
            energy += graph.weight(r.vertex);
            v = r.move_to;
        }
        let rhs = (p.c + 1.0) / p.c * st.l + prof.pot[v0] - prof.pot[v] + n as f64 * prof.value;
        items.push((energy - rhs, TOL * (1.0 + energy.abs() + rhs.abs())));
    }
    CheckReport::from_margins("energy-bound", items)
}

/// Recomputes every step with `resolve_bidding` and checks moves and the
/// vertex chain.
pub fn check_replay(graph: &GameGraph, trace: &PlayTrace) -> CheckReport {
    let mut items = Vec::with_capacity(trace.steps.len());
    let mut v = trace.start;
    for (i, r) in trace.steps.iter().enumerate() {
        let before = trace.budgets_before(i);
        let ok = r.vertex == v
            && graph.has_edge(r.vertex, r.move_to)
            && matches!(
                resolve_bidding(&trace.mechanism, before, r.bid_max, r.bid_min),
                Ok((w, b)) if w == r.winner && b == r.budgets_after
            )
            && r.budgets_after.max_budget >= 0.0
            && r.budgets_after.min_budget >= 0.0;
        items.push((if ok { 0.0 } else { -1.0 }, 0.0));
        v = r.move_to;
    }
    CheckReport::from_margins("replay", items)
}

/// Budget-sum conservation for money-conserving mechanisms; allows 1e-12
/// relative drift per 10⁵ steps.
pub fn check_conservation(trace: &PlayTrace) -> CheckReport {
    if !trace.mechanism.conserves_sum() {
        return CheckReport::skipped("conservation", "mechanism does not conserve the budget sum");
    }
    let s0 = trace.initial.sum();
    let items = trace.steps.iter().enumerate().map(|(i, r)| {
        let tol = 1e-12 * s0 * ((i + 1) as f64 / 1e5).max(1.0);
        (tol - (r.budgets_after.sum() - s0).abs(), 0.0)
    });
    CheckReport::from_margins("conservation", items.collect::<Vec<_>>())
}

/// Replays a lifted all-pay poorman trace as the simulated asymmetric game.
/// Budgets of the result are (B̃, 1).
pub fn project_lifted_trace(trace: &PlayTrace, w: f64, b_tilde0: f64) -> PlayTrace {
    let mut bt = b_tilde0;
    let mut steps = Vec::with_capacity(trace.steps.len());
    for (i, r) in trace.steps.iter().enumerate() {
        let b = trace.budgets_before(i);
        let k = lift_scale(b.max_budget, b.min_budget, bt, w);
        let (xt, yt) = (r.bid_max / k, r.bid_min / k);
        bt = bt - xt + w * yt;
        steps.push(StepRecord { bid_max: xt, bid_min: yt, budgets_after: BudgetState::new(bt, 1.0), ..*r });
    }
    PlayTrace {
        mechanism: Mechanism::Asymmetric { w },
        initial: BudgetState::new(b_tilde0, 1.0),
        steps,
        ..trace.clone()
    }
}

/// Lift invariant B/C − W ≥ B̃ at every prefix (vacuous once C = 0).
pub fn check_lift(trace: &PlayTrace, projected: &PlayTrace, w: f64) -> CheckReport {
    let items = (0..=trace.steps.len()).map(|i| {
        let b = trace.budgets_before(i);
        let bt = projected.budgets_before(i).max_budget;
        if b.min_budget > 0.0 {
            let lhs = b.max_budget / b.min_budget - w;
            (lhs - bt, rel_tol(bt))
        } else {
            (f64::INFINITY, 0.0)
        }
    });
    CheckReport::from_margins("lift", items.collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Replay,
    Conservation,
    Invariant,
    HBound,
    EnergyBound,
    Lift,
}

impl CheckKind {
    pub const ALL: [CheckKind; 6] = [
        CheckKind::Replay,
        CheckKind::Conservation,
        CheckKind::Invariant,
        CheckKind::HBound,
        CheckKind::EnergyBound,
        CheckKind::Lift,
    ];

    /// Parses a comma-separated list; "all" selects every check.
    pub fn parse_list(s: &str) -> Result<Vec<CheckKind>, CertifyError> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "all" => out.extend(Self::ALL),
                "replay" => out.push(CheckKind::Replay),
                "conservation" => out.push(CheckKind::Conservation),
                "invariant" => out.push(CheckKind::Invariant),
                "h-bound" => out.push(CheckKind::HBound),
                "energy-bound" => out.push(CheckKind::EnergyBound),
                "lift" => out.push(CheckKind::Lift),
                other => return Err(CertifyError::UnknownCheck(other.into())),
            }
        }
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub strategy: String,
    pub variant: Option<Variant>,
    pub steps: usize,
    pub off_plus_wins: usize,
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

/// Runs the requested checks on a trace played by `max` as Max.
pub fn certify_trace(
    graph: &GameGraph,
    trace: &PlayTrace,
    max: &StrategyHandle,
    checks: &[CheckKind],
) -> Result<CertifyReport, CertifyError> {
    let setup = LedgerParams::from_handle(max, trace.initial).ok();
    let lifted = matches!(max.kind, StrategyKind::PoormanLift { .. });
    let projected = setup.as_ref().filter(|_| lifted).map(|(p, _)| project_lifted_trace(trace, p.w, p.b0));
    let ledger_trace = projected.as_ref().unwrap_or(trace);
    let ledger = match &setup {
        Some((p, prof)) => Some(replay_ledger(p, prof, ledger_trace)?),
        None => None,
    };
    let mut out = Vec::new();
    for c in checks {
        let rep = match (c, &setup, &ledger) {
            (CheckKind::Replay, _, _) => check_replay(graph, trace),
            (CheckKind::Conservation, _, _) => check_conservation(trace),
            (CheckKind::Invariant, Some((p, _)), Some(l)) => check_invariant(p, l, ledger_trace)?,
            (CheckKind::HBound, Some((p, _)), Some(l)) => match p.variant {
                Variant::ApRichman => CheckReport::skipped("h-bound", "all-pay Richman has no H bound"),
                _ if p.s_min_pos.is_none() => {
                    CheckReport::skipped("h-bound", "no vertex with positive strength")
                }
                _ => check_h_bound(p, l, ledger_trace)?,
            },
            (CheckKind::EnergyBound, Some((p, prof)), Some(l)) => {
                check_energy_bound(p, prof, l, graph, ledger_trace)
            }
            (CheckKind::Lift, Some((p, _)), _) if lifted => {
                check_lift(trace, projected.as_ref().expect("projected"), p.w)
            }
            (CheckKind::Lift, _, _) => CheckReport::skipped("lift", "strategy is not a lift"),
            (k, _, _) => CheckReport::skipped(
                &serde_json::to_value(k).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                "strategy has no ledger",
            ),
        };
        out.push(rep);
    }
    Ok(CertifyReport {
        strategy: max.name().into(),
        variant: setup.as_ref().map(|(p, _)| p.variant),
        steps: trace.steps.len(),
        off_plus_wins: ledger.as_ref().map_or(0, |l| l.off_plus_wins),
        passed: out.iter().all(|r| r.passed),
        checks: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagicResult {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn magic_p(sol: &StochasticSolution, nu: f64, mu: f64) -> Result<(), CertifyError> {
    let want = nu / (nu + mu);
    if (sol.p - want).abs() > 1e-12 {
        return Err(CertifyError::ParameterMismatch { got: sol.p, want });
    }
    Ok(())
}

/// Pot(v₁) − Pot(vₙ) + (n−1)·MP ≤ energy + (ν+μ)(G⁺/μ − I⁺/ν) for a path,
/// with a step counted as investment when it follows σ⁺.
pub fn check_magic(
    g: &GameGraph,
    sol: &StochasticSolution,
    nu: f64,
    mu: f64,
    path: &[usize],
) -> Result<MagicResult, CertifyError> {
    magic_p(sol, nu, mu)?;
    let (first, last) = match (path.first(), path.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(CertifyError::InvalidPath("empty path".into())),
    };
    if path.iter().any(|&v| v >= g.len()) {
        return Err(CertifyError::InvalidPath("vertex out of range".into()));
    }
    let (mut energy, mut ip, mut gp) = (0.0, 0.0, 0.0);
    for win in path.windows(2) {
        let (a, b) = (win[0], win[1]);
        if !g.has_edge(a, b) {
            return Err(CertifyError::InvalidPath(format!("no edge {a} -> {b}")));
        }
        energy += g.weight(a);
        if b == sol.sigma_max[a] {
            ip += sol.strength[a];
        } else {
            gp += sol.strength[a];
        }
    }
    let lhs = sol.pot[first] - sol.pot[last] + (path.len() - 1) as f64 * sol.value;
    let rhs = energy + (nu + mu) * (gp / mu - ip / nu);
    Ok(MagicResult { lhs, rhs, holds: lhs <= rhs + TOL * (1.0 + lhs.abs() + rhs.abs()) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MagicReport {
    pub paths: usize,
    pub worst_margin: f64,
    pub worst_path: Vec<usize>,
    pub holds: bool,
}

/// Checks the potential inequality on every path with at most `max_len`
/// edges, by depth-first search with running sums.
pub fn check_magic_exhaustive(
    g: &GameGraph,
    sol: &StochasticSolution,
    nu: f64,
    mu: f64,
    max_len: usize,
) -> Result<MagicReport, CertifyError> {
    magic_p(sol, nu, mu)?;
    struct Walk<'a> {
        g: &'a GameGraph,
        sol: &'a StochasticSolution,
        nu: f64,
        mu: f64,
        max_len: usize,
        path: Vec<usize>,
        rep: MagicReport,
    }
    fn visit(w: &mut Walk, energy: f64, ip: f64, gp: f64) {
        let first = w.path[0];
        let last = *w.path.last().expect("nonempty");
        let lhs = w.sol.pot[first] - w.sol.pot[last] + (w.path.len() - 1) as f64 * w.sol.value;
        let rhs = energy + (w.nu + w.mu) * (gp / w.mu - ip / w.nu);
        let margin = rhs - lhs;
        w.rep.paths += 1;
        if margin < w.rep.worst_margin {
            w.rep.worst_margin = margin;
            w.rep.worst_path = w.path.clone();
        }
        if margin < -TOL * (1.0 + lhs.abs() + rhs.abs()) {
            w.rep.holds = false;
        }
        if w.path.len() > w.max_len {
            return;
        }
        let s = w.sol.strength[last];
        let e = energy + w.g.weight(last);
        for &u in w.g.successors(last) {
            w.path.push(u);
            if u == w.sol.sigma_max[last] {
                visit(w, e, ip + s, gp);
            } else {
                visit(w, e, ip, gp + s);
            }
            w.path.pop();
        }
    }
    let mut walk = Walk {
        g,
        sol,
        nu,
        mu,
        max_len,
        path: Vec::new(),
        rep: MagicReport { paths: 0, worst_margin: f64::INFINITY, worst_path: Vec::new(), holds: true },
    };
    for v in 0..g.len() {
        walk.path.push(v);
        visit(&mut walk, 0.0, 0.0, 0.0);
        walk.path.pop();
    }
    Ok(walk.rep)
}

/// Iterator over all directed paths with exactly `n` edges, in lexicographic
/// order of vertex ids.
pub struct Paths<'a> {
    g: &'a GameGraph,
    n: usize,
    path: Vec<usize>,
    idx: Vec<usize>,
    done: bool,
}

pub fn enumerate_paths(g: &GameGraph, n: usize) -> Result<Paths<'_>, CertifyError> {
    if n > 12 {
        return Err(CertifyError::TooLong(n));
    }
    let mut p = Paths { g, n, path: vec![0], idx: Vec::new(), done: g.is_empty() };
    p.fill();
    Ok(p)
}

impl Paths<'_> {
    /// Extends the current prefix with first successors up to length n.
    fn fill(&mut self) {
        while self.idx.len() < self.n {
            let last = *self.path.last().expect("nonempty");
            self.idx.push(0);
            self.path.push(self.g.successors(last)[0]);
        }
    }

    fn advance(&mut self) {
        while let Some(i) = self.idx.pop() {
            self.path.pop();
            let from = *self.path.last().expect("nonempty");
            let succ = self.g.successors(from);
            if i + 1 < succ.len() {
                self.idx.push(i + 1);
                self.path.push(succ[i + 1]);
                self.fill();
                return;
            }
        }
        let next = self.path[0] + 1;
        if next >= self.g.len() {
            self.done = true;
        } else {
            self.path[0] = next;
            self.fill();
        }
    }
}

impl Iterator for Paths<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.path.clone();
        self.advance();
        Some(out)
    }
}

/// A state at which the one-step luck is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LuckState {
    pub s: f64,
    pub b: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LuckSample {
    pub state: LuckState,
    pub mean: f64,
    pub sd: f64,
    pub max_abs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmartingaleReport {
    pub bound: f64,
    pub trials: usize,
    pub states: Vec<LuckSample>,
    pub passed: bool,
}

/// Bound on |ΔL| for the variant.
pub fn luck_bound(p: &LedgerParams) -> Result<f64, CertifyError> {
    let sm = p.s_max;
    Ok(match p.variant {
        Variant::ApRichman => 3.0 * p.c * sm,
        Variant::AsymMixedHighW => 2.0 * sm * (p.w * p.w + 1.0) * (p.mu + p.nu),
        Variant::AsymMixedLowW => (2.0 * (1.0 + p.epsilon) + p.mu + p.nu) * sm,
        v => return Err(CertifyError::VariantWithoutLuck(v)),
    })
}

/// Monte Carlo check that the luck has nonnegative drift (mean ≥ −3σ̂/√n)
/// and bounded increments at each grid state.
pub fn empirical_submartingale(
    p: &LedgerParams,
    grid: &[LuckState],
    trials: usize,
    seed: u64,
) -> Result<SubmartingaleReport, CertifyError> {
    let bound = luck_bound(p)?;
    let kind = p.variant.kind();
    let sp = p.strategy_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let mut states = Vec::with_capacity(grid.len());
    for &st in grid {
        let dist = budget_bid(&kind, &sp, st.s, p.s_max, st.b, 1.0);
        let (mut sum, mut sq, mut max_abs) = (0.0, 0.0, 0.0f64);
        for _ in 0..trials {
            let x = dist.sample(&mut draw);
            let d = luck_increment(p, st.s, st.b, x, st.y)?;
            sum += d;
            sq += d * d;
            max_abs = max_abs.max(d.abs());
        }
        let n = trials.max(1) as f64;
        let mean = sum / n;
        let sd = ((sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0)).sqrt();
        let drift_ok = mean >= -3.0 * sd / n.sqrt() - 1e-12 * bound;
        let bound_ok = match p.variant {
            Variant::AsymMixedHighW => max_abs < bound || bound == 0.0,
            _ => max_abs <= bound,
        };
        states.push(LuckSample { state: st, mean, sd, max_abs, passed: drift_ok && bound_ok });
    }
    let passed = states.iter().all(|s| s.passed);
    Ok(SubmartingaleReport { bound, trials, states, passed })
}
