//! Bidding strategies: the budget-based constructions, the responder
//! counter-strategies, the poorman lift, role duals and a few heuristic
//! opponents used as adversary rosters.

use crate::arena::{BudgetState, GameGraph, Mechanism, Side};
use crate::shift::{shift_inverse, ShiftError};
use crate::solver::{solve_mean_payoff, SolverError, StochasticSolution};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("epsilon must be positive (got {0})")]
    InvalidEpsilon(f64),
    #[error("initial budget {budget} does not exceed W = {w}")]
    BudgetBelowW { budget: f64, w: f64 },
    #[error("W must exceed 1 (got {0})")]
    WNotAboveOne(f64),
    #[error("W must lie in (0,1] (got {0})")]
    WOutOfRange(f64),
    #[error("epsilon {eps} too large for W = {w}")]
    EpsilonTooLarge { eps: f64, w: f64 },
    #[error("W = {w} must be below the budget ratio B0/C0 = {ratio}")]
    RatioTooSmall { w: f64, ratio: f64 },
    #[error("solution computed at p = {got}, construction needs p = {want}")]
    ParameterMismatch { got: f64, want: f64 },
    #[error("initial budget must lie in (0,1) (got {0})")]
    BadInitialBudget(f64),
    #[error("the lift needs an asymmetric-game strategy")]
    NotAsymmetric,
    #[error("{0} can only play as {1:?}")]
    WrongSide(&'static str, Side),
    #[error("strategy spec: {0}")]
    Parse(String),
    #[error(transparent)]
    Shift(#[from] ShiftError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Bid distribution. Uniform draws are on `[0, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BidDistribution {
    PointMass { bid: f64 },
    Uniform { upper: f64 },
    Mixture { parts: Vec<(f64, BidDistribution)> },
}

impl BidDistribution {
    pub fn point(b: f64) -> Self {
        BidDistribution::PointMass { bid: b }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, BidDistribution::PointMass { .. })
    }

    /// Largest bid in the support.
    pub fn sup(&self) -> f64 {
        match self {
            BidDistribution::PointMass { bid } => *bid,
            BidDistribution::Uniform { upper } => *upper,
            BidDistribution::Mixture { parts } => {
                parts.iter().map(|(_, d)| d.sup()).fold(0.0, f64::max)
            }
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        match self {
            BidDistribution::PointMass { bid } => BidDistribution::PointMass { bid: bid * k },
            BidDistribution::Uniform { upper } => BidDistribution::Uniform { upper: upper * k },
            BidDistribution::Mixture { parts } => BidDistribution::Mixture {
                parts: parts.iter().map(|(q, d)| (*q, d.scaled(k))).collect(),
            },
        }
    }

    /// Draws a bid. Each call to `draw` yields a fresh uniform in [0,1).
    pub fn sample(&self, draw: &mut impl FnMut() -> f64) -> f64 {
        match self {
            BidDistribution::PointMass { bid } => *bid,
            BidDistribution::Uniform { upper } => draw() * upper,
            BidDistribution::Mixture { parts } => {
                let u = draw();
                let mut acc = 0.0;
                for (q, d) in parts {
                    acc += q;
                    if u < acc {
                        return d.sample(draw);
                    }
                }
                parts.last().expect("nonempty mixture").1.sample(draw)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BidAction {
    pub distribution: BidDistribution,
    pub move_on_win: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Observability {
    Standard,
    Responder,
}

/// Construction constants. Fields a construction does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StrategyParams {
    pub epsilon: f64,
    pub c: f64,
    pub alpha: f64,
    pub w: f64,
    pub n: f64,
    pub mu: f64,
    pub nu: f64,
    pub spare_change: f64,
    pub k0: u32,
    /// Initial own budget in the construction's units (lift: B̃₀).
    pub b0: f64,
    /// Probability of the uniform branch in the low-W mixed construction.
    pub uniform_weight: f64,
}

/// Per-vertex data taken from a random-turn solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub p: f64,
    pub value: f64,
    pub strength: Vec<f64>,
    pub toward: Vec<usize>,
    pub pot: Vec<f64>,
    pub s_max: f64,
    pub s_min_pos: Option<f64>,
}

impl Profile {
    pub fn from_solution(sol: &StochasticSolution) -> Self {
        Self {
            p: sol.p,
            value: sol.value,
            strength: sol.strength.clone(),
            toward: sol.sigma_max.clone(),
            pot: sol.pot.clone(),
            s_max: sol.s_max,
            s_min_pos: sol.s_min_pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Heuristic {
    Zero,
    Constant { bid: f64 },
    Fraction { f: f64 },
    Uniform,
    AllIn,
    AllInOnce,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyKind {
    FpRichman,
    FpPoorman,
    ApRichmanMixed,
    MinCounter,
    AsymPure,
    AsymResponder,
    AsymMixedHighW,
    AsymMixedLowW,
    PoormanLift { inner: Box<StrategyHandle> },
    Dual { inner: Box<StrategyHandle> },
    Heuristic { rule: Heuristic },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyHandle {
    pub kind: StrategyKind,
    pub params: StrategyParams,
    pub observability: Observability,
    #[serde(skip)]
    pub profile: Option<Arc<Profile>>,
}

impl StrategyHandle {
    /// Whether every emitted distribution is a point mass.
    pub fn is_deterministic(&self) -> bool {
        match &self.kind {
            StrategyKind::ApRichmanMixed
            | StrategyKind::AsymMixedHighW
            | StrategyKind::AsymMixedLowW => false,
            StrategyKind::Heuristic { rule } => *rule != Heuristic::Uniform,
            StrategyKind::PoormanLift { inner } | StrategyKind::Dual { inner } => {
                inner.is_deterministic()
            }
            _ => true,
        }
    }

    pub fn is_responder(&self) -> bool {
        self.observability == Observability::Responder
    }

    /// Whether the game was trivial (all strengths zero) when built.
    pub fn is_trivial(&self) -> bool {
        self.profile.as_ref().is_some_and(|p| p.s_max == 0.0)
    }

    pub fn name(&self) -> &'static str {
        match &self.kind {
            StrategyKind::FpRichman => "fp-richman",
            StrategyKind::FpPoorman => "fp-poorman",
            StrategyKind::ApRichmanMixed => "ap-richman-mixed",
            StrategyKind::MinCounter => "min-counter",
            StrategyKind::AsymPure => "asym-pure",
            StrategyKind::AsymResponder => "asym-responder",
            StrategyKind::AsymMixedHighW | StrategyKind::AsymMixedLowW => "asym-mixed",
            StrategyKind::PoormanLift { .. } => "lift",
            StrategyKind::Dual { .. } => "dual",
            StrategyKind::Heuristic { rule } => match rule {
                Heuristic::Zero => "zero",
                Heuristic::Constant { .. } => "const",
                Heuristic::Fraction { .. } => "fraction",
                Heuristic::Uniform => "uniform",
                Heuristic::AllIn => "all-in",
                Heuristic::AllInOnce => "all-in-once",
            },
        }
    }
}

fn check_p(sol: &StochasticSolution, want: f64) -> Result<(), StrategyError> {
    if (sol.p - want).abs() > 1e-12 {
        return Err(StrategyError::ParameterMismatch { got: sol.p, want });
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<(), StrategyError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(StrategyError::InvalidEpsilon(eps));
    }
    Ok(())
}

fn standard(kind: StrategyKind, params: StrategyParams, sol: &StochasticSolution) -> StrategyHandle {
    StrategyHandle {
        kind,
        params,
        observability: Observability::Standard,
        profile: Some(Arc::new(Profile::from_solution(sol))),
    }
}

/// p used by the first-price Richman and all-pay Richman constructions.
pub fn richman_p(eps: f64) -> f64 {
    1.0 / (2.0 + eps)
}

/// Pure first-price Richman strategy; `initial_budget` is the own budget with
/// the budgets summing to 1.
pub fn fp_richman_strategy(
    sol: &StochasticSolution,
    eps: f64,
    initial_budget: f64,
) -> Result<StrategyHandle, StrategyError> {
    check_eps(eps)?;
    check_p(sol, richman_p(eps))?;
    if !(initial_budget > 0.0 && initial_budget < 1.0) {
        return Err(StrategyError::BadInitialBudget(initial_budget));
    }
    let c = 1.0 + eps;
    let alpha = shift_inverse(c)?;
    let mut k0 = 0u32;
    while (1.0 + alpha).powi(-(k0 as i32)) >= initial_budget {
        k0 += 1;
    }
    let main = (1.0 + alpha).powi(-(k0 as i32));
    let params = StrategyParams {
        epsilon: eps,
        c,
        alpha,
        mu: c,
        nu: 1.0,
        spare_change: initial_budget - main,
        k0,
        b0: initial_budget,
        ..Default::default()
    };
    Ok(standard(StrategyKind::FpRichman, params, sol))
}

pub fn fp_poorman_p(b0: f64, eps: f64) -> f64 {
    (b0 - eps) / (b0 + 1.0)
}

/// Pure first-price poorman strategy; `b0` is Max's budget with Min's set to 1.
pub fn fp_poorman_strategy(
    sol: &StochasticSolution,
    b0: f64,
    eps: f64,
) -> Result<StrategyHandle, StrategyError> {
    check_eps(eps)?;
    let w = b0 - eps;
    if !(w > 0.0) {
        return Err(StrategyError::BudgetBelowW { budget: b0, w });
    }
    check_p(sol, fp_poorman_p(b0, eps))?;
    let c = 1.0 + eps;
    let params = StrategyParams {
        epsilon: eps,
        c,
        alpha: shift_inverse(c)?,
        w,
        n: w.max(1.0) * sol.s_max,
        mu: c,
        nu: w,
        b0,
        ..Default::default()
    };
    Ok(standard(StrategyKind::FpPoorman, params, sol))
}

/// Mixed all-pay Richman strategy: uniform on [0, αB·s/S_max].
pub fn ap_richman_mixed(sol: &StochasticSolution, eps: f64) -> Result<StrategyHandle, StrategyError> {
    check_eps(eps)?;
    check_p(sol, richman_p(eps))?;
    let c = 1.0 + eps;
    let params =
        StrategyParams { epsilon: eps, c, alpha: shift_inverse(c)?, mu: c, nu: 1.0, ..Default::default() };
    Ok(standard(StrategyKind::ApRichmanMixed, params, sol))
}

/// Min's counter to any pure Max: match the bid when affordable, else bid 0.
/// Moves along Min's optimal moves of the game where Min controls every turn.
pub fn ap_richman_min_counter(g: &GameGraph) -> Result<StrategyHandle, StrategyError> {
    let sol = solve_mean_payoff(g, 0.0)?;
    let mut profile = Profile::from_solution(&sol);
    profile.toward = sol.sigma_min.clone();
    Ok(StrategyHandle {
        kind: StrategyKind::MinCounter,
        params: StrategyParams::default(),
        observability: Observability::Responder,
        profile: Some(Arc::new(profile)),
    })
}

pub fn asym_pure_p(w: f64, eps: f64) -> f64 {
    1.0 - (1.0 + eps) / (w + eps)
}

pub fn asym_pure_max(sol: &StochasticSolution, w: f64, eps: f64) -> Result<StrategyHandle, StrategyError> {
    check_eps(eps)?;
    if !(w > 1.0) {
        return Err(StrategyError::WNotAboveOne(w));
    }
    check_p(sol, asym_pure_p(w, eps))?;
    let c = 1.0 + eps;
    let params = StrategyParams {
        epsilon: eps,
        c,
        alpha: shift_inverse(c)?,
        w,
        n: sol.s_max.max((w - 1.0) * sol.s_max),
        mu: c,
        nu: w - 1.0,
        ..Default::default()
    };
    Ok(standard(StrategyKind::AsymPure, params, sol))
}

pub fn asym_responder_p(w: f64, eps: f64) -> f64 {
    (1.0 - eps) * w
}

pub fn asym_responder_max(
    sol: &StochasticSolution,
    w: f64,
    eps: f64,
) -> Result<StrategyHandle, StrategyError> {
    check_eps(eps)?;
    if !(w > 0.0 && w <= 1.0) {
        return Err(StrategyError::WOutOfRange(w));
    }
    if eps >= 1.0 {
        return Err(StrategyError::EpsilonTooLarge { eps, w });
    }
    check_p(sol, asym_responder_p(w, eps))?;
    let c = 1.0 / (1.0 - eps);
    let params = StrategyParams {
        epsilon: eps,
        c,
        alpha: shift_inverse(c)?,
        w,
        n: (1.0 + eps * w) * sol.s_max,
        ..Default::default()
    };
    let mut h = standard(StrategyKind::AsymResponder, params, sol);
    h.observability = Observability::Responder;
    Ok(h)
}

pub fn asym_mixed_p(w: f64, eps: f64) -> f64 {
    if w > 1.0 {
        (2.0 * w - 1.0) / (2.0 * w + eps)
    } else {
        (w - eps) / 2.0
    }
}

/// Mixed asymmetric strategy; the high-W (W > 1) and low-W (W ≤ 1)
/// constructions differ.
pub fn asym_mixed_max(sol: &StochasticSolution, w: f64, eps: f64) -> Result<StrategyHandle, StrategyError> {
    check_eps(eps)?;
    if !(w > 0.0 && w.is_finite()) {
        return Err(StrategyError::WOutOfRange(w));
    }
    if w <= 1.0 && eps >= w {
        return Err(StrategyError::EpsilonTooLarge { eps, w });
    }
    check_p(sol, asym_mixed_p(w, eps))?;
    let c = 1.0 + eps;
    let alpha = shift_inverse(c)?;
    let (kind, params) = if w > 1.0 {
        let p = StrategyParams {
            epsilon: eps,
            c,
            alpha,
            w,
            n: 2.0 * w * sol.s_max,
            mu: c,
            nu: 2.0 * w - 1.0,
            ..Default::default()
        };
        (StrategyKind::AsymMixedHighW, p)
    } else {
        let p = StrategyParams {
            epsilon: eps,
            c,
            alpha,
            w,
            n: 2.0 * sol.s_max,
            mu: 2.0 - w + eps,
            nu: w - eps,
            uniform_weight: (w - eps) / (1.0 - eps),
            ..Default::default()
        };
        (StrategyKind::AsymMixedLowW, p)
    };
    Ok(standard(kind, params, sol))
}

/// Plays the all-pay poorman game through a W-asymmetric strategy.
pub fn poorman_lift(asym: StrategyHandle, w: f64, b0: f64, c0: f64) -> Result<StrategyHandle, StrategyError> {
    match asym.kind {
        StrategyKind::AsymPure
        | StrategyKind::AsymResponder
        | StrategyKind::AsymMixedHighW
        | StrategyKind::AsymMixedLowW => {}
        _ => return Err(StrategyError::NotAsymmetric),
    }
    if (asym.params.w - w).abs() > 1e-15 {
        return Err(StrategyError::Parse(format!(
            "lift W = {w} differs from the inner strategy's W = {}",
            asym.params.w
        )));
    }
    if !(b0 > 0.0 && c0 > 0.0) || w >= b0 / c0 {
        return Err(StrategyError::RatioTooSmall { w, ratio: b0 / c0 });
    }
    let mut params = asym.params;
    params.b0 = b0 / c0 - w;
    let observability = asym.observability;
    let profile = asym.profile.clone();
    Ok(StrategyHandle {
        kind: StrategyKind::PoormanLift { inner: Box::new(asym) },
        params,
        observability,
        profile,
    })
}

/// Min plays a Max construction built on the negated arena.
pub fn dual_min_strategy(inner: StrategyHandle) -> StrategyHandle {
    StrategyHandle {
        params: inner.params,
        observability: inner.observability,
        profile: inner.profile.clone(),
        kind: StrategyKind::Dual { inner: Box::new(inner) },
    }
}

pub fn heuristic(rule: Heuristic) -> StrategyHandle {
    StrategyHandle {
        kind: StrategyKind::Heuristic { rule },
        params: StrategyParams::default(),
        observability: Observability::Standard,
        profile: None,
    }
}

/// What a strategy sees at a turn. `own`/`opponent` are raw budgets; the
/// constructions read only their own budget (and Min's, to normalise).
#[derive(Debug, Clone, Copy)]
pub struct View<'a> {
    pub graph: &'a GameGraph,
    pub mechanism: Mechanism,
    pub side: Side,
    pub step: u64,
    pub vertex: usize,
    pub own: f64,
    pub opponent: f64,
}

fn greedy_move(view: &View) -> usize {
    let succ = view.graph.successors(view.vertex);
    let mut best = succ[0];
    for &u in succ {
        let better = match view.side {
            Side::Max => view.graph.weight(u) > view.graph.weight(best),
            Side::Min => view.graph.weight(u) < view.graph.weight(best),
        };
        if better {
            best = u;
        }
    }
    best
}

/// Bid distribution of a budget-based construction at strength `s`.
/// Responders and non-construction kinds bid 0 here.
pub fn budget_bid(
    kind: &StrategyKind,
    prm: &StrategyParams,
    s: f64,
    s_max: f64,
    own: f64,
    opponent: f64,
) -> BidDistribution {
    let rel = if s_max > 0.0 { s / s_max } else { 0.0 };
    let b = own;
    match kind {
        // `own` is the main budget here; the spare change is held out.
        StrategyKind::FpRichman => BidDistribution::point(prm.alpha * rel * b.max(0.0)),
        StrategyKind::FpPoorman => {
            let x = if prm.n > 0.0 {
                prm.alpha * s / prm.n * (b - prm.w * opponent)
            } else {
                0.0
            };
            BidDistribution::point(x.max(0.0))
        }
        StrategyKind::ApRichmanMixed => {
            BidDistribution::Uniform { upper: prm.alpha * b * rel }
        }
        StrategyKind::AsymPure => {
            let x = if prm.n > 0.0 { s / prm.n * prm.alpha * b } else { 0.0 };
            BidDistribution::point(x)
        }
        StrategyKind::AsymMixedHighW => {
            let w = prm.w;
            if s > 0.0 && b > 2.0 * w * w * s_max / (prm.alpha * s) {
                BidDistribution::point(rel / (2.0 * w) * prm.alpha * b)
            } else {
                BidDistribution::Uniform { upper: rel / w * prm.alpha * b }
            }
        }
        StrategyKind::AsymMixedLowW => {
            if s > 0.0 && b > 2.0 * s_max / (prm.alpha * s) {
                BidDistribution::point(rel / 2.0 * prm.alpha * b)
            } else {
                let q = prm.uniform_weight;
                BidDistribution::Mixture {
                    parts: vec![
                        (1.0 - q, BidDistribution::point(0.0)),
                        (q, BidDistribution::Uniform { upper: rel * prm.alpha * b }),
                    ],
                }
            }
        }
        StrategyKind::MinCounter | StrategyKind::AsymResponder => {
            // Responders bid only once they see the opponent's bid.
            BidDistribution::point(0.0)
        }
        _ => BidDistribution::point(0.0),
    }
}

/// Exchange rate between lifted and real bids. Any scale in
/// [C, B/(B̃+W)] keeps B/C − W ≥ B̃; Min's budget is used while it is a
/// comfortably normal float, the upper end once it is (nearly) exhausted.
pub fn lift_scale(own: f64, opponent: f64, mirror: f64, w: f64) -> f64 {
    if opponent > f64::MIN_POSITIVE.sqrt() {
        opponent
    } else {
        own / (mirror + w)
    }
}

/// Smallest positive bid. A construction whose bids fall below the normal
/// f64 range at a vertex it wants to win bids this instead: subnormal bids
/// round to 0 and hand the bidding to Min on the tie, and a budget drained
/// into the subnormal range is gone within a few steps. On any normal budget
/// paying it is a no-op.
pub const SMALLEST_BID: f64 = 5e-324;

fn floor_underflow(dist: BidDistribution, wanted: bool, own: f64) -> BidDistribution {
    if wanted && dist.sup() < f64::MIN_POSITIVE && own >= SMALLEST_BID {
        BidDistribution::point(SMALLEST_BID)
    } else {
        dist
    }
}

/// A strategy with its evolving state for one play.
#[derive(Debug, Clone)]
pub struct Agent {
    handle: StrategyHandle,
    /// Lift: the simulated asymmetric budget B̃.
    mirror: f64,
    /// First-price Richman: main budget, tracked from the bids so it does not
    /// cancel against the spare change.
    main: Option<f64>,
    fired: bool,
    inner: Option<Box<Agent>>,
}

impl Agent {
    pub fn new(handle: &StrategyHandle) -> Self {
        let inner = match &handle.kind {
            StrategyKind::PoormanLift { inner } | StrategyKind::Dual { inner } => {
                Some(Box::new(Agent::new(inner)))
            }
            _ => None,
        };
        Agent { handle: handle.clone(), mirror: handle.params.b0, main: None, fired: false, inner }
    }

    pub fn handle(&self) -> &StrategyHandle {
        &self.handle
    }

    /// The lift's simulated asymmetric budget.
    pub fn mirror(&self) -> f64 {
        self.mirror
    }

    fn profile(&self) -> &Profile {
        self.handle.profile.as_ref().expect("construction carries a profile")
    }

    fn lift_scale(&self, view: &View) -> f64 {
        lift_scale(view.own, view.opponent, self.mirror, self.handle.params.w)
    }

    fn lift_view<'a>(&self, view: &View<'a>) -> View<'a> {
        View {
            mechanism: Mechanism::Asymmetric { w: self.handle.params.w },
            own: self.mirror,
            opponent: 1.0,
            ..*view
        }
    }

    /// Bid of a standard strategy.
    pub fn act(&mut self, view: &View) -> BidAction {
        let prm = self.handle.params;
        let kind = self.handle.kind.clone();
        match kind {
            StrategyKind::PoormanLift { .. } => {
                let k = self.lift_scale(view);
                let lv = self.lift_view(view);
                let a = self.inner.as_mut().expect("lift inner").act(&lv);
                let wanted = a.distribution.sup() > 0.0;
                BidAction {
                    distribution: floor_underflow(a.distribution.scaled(k), wanted, view.own),
                    move_on_win: a.move_on_win,
                }
            }
            StrategyKind::Dual { .. } => self.inner.as_mut().expect("dual inner").act(view),
            StrategyKind::Heuristic { rule } => {
                let b = match rule {
                    Heuristic::Zero => BidDistribution::point(0.0),
                    Heuristic::Constant { bid } => BidDistribution::point(bid.min(view.own)),
                    Heuristic::Fraction { f } => BidDistribution::point(f * view.own),
                    Heuristic::Uniform => BidDistribution::Uniform { upper: view.own },
                    Heuristic::AllIn => BidDistribution::point(view.own),
                    Heuristic::AllInOnce => {
                        BidDistribution::point(if self.fired { 0.0 } else { view.own })
                    }
                };
                BidAction { distribution: b, move_on_win: greedy_move(view) }
            }
            _ => {
                let pr = self.profile();
                let v = view.vertex;
                let s = pr.strength[v];
                let s_max = pr.s_max;
                let toward = pr.toward[v];
                let own = match kind {
                    StrategyKind::FpRichman => *self
                        .main
                        .get_or_insert(view.own - prm.spare_change * (view.own + view.opponent)),
                    _ => view.own,
                };
                let dist = budget_bid(&kind, &prm, s, s_max, own, view.opponent);
                BidAction { distribution: floor_underflow(dist, s > 0.0, view.own), move_on_win: toward }
            }
        }
    }

    /// Bid of a responder, given the opponent's realised bid.
    pub fn respond(&mut self, view: &View, opponent_bid: f64) -> BidAction {
        match self.handle.kind.clone() {
            StrategyKind::PoormanLift { .. } => {
                let k = self.lift_scale(view);
                let lv = self.lift_view(view);
                let a = self.inner.as_mut().expect("lift inner").respond(&lv, opponent_bid / k);
                BidAction { distribution: a.distribution.scaled(k), move_on_win: a.move_on_win }
            }
            StrategyKind::Dual { .. } => {
                self.inner.as_mut().expect("dual inner").respond(view, opponent_bid)
            }
            StrategyKind::MinCounter => {
                let b = if opponent_bid > view.own { 0.0 } else { opponent_bid };
                BidAction {
                    distribution: BidDistribution::point(b),
                    move_on_win: self.profile().toward[view.vertex],
                }
            }
            StrategyKind::AsymResponder => {
                let prm = self.handle.params;
                let pr = self.profile();
                let s = pr.strength[view.vertex];
                let t = if prm.n > 0.0 { s / prm.n * prm.alpha * view.own } else { 0.0 };
                let x = if opponent_bid > t { 0.0 } else { opponent_bid * (1.0 + prm.epsilon * prm.w) };
                BidAction { distribution: BidDistribution::point(x), move_on_win: pr.toward[view.vertex] }
            }
            _ => self.act(view),
        }
    }

    /// Updates state after the bidding resolved.
    pub fn observe(&mut self, view: &View, own_bid: f64, opponent_bid: f64) {
        match &self.handle.kind {
            StrategyKind::PoormanLift { .. } => {
                let k = self.lift_scale(view);
                let lv = self.lift_view(view);
                let (xt, yt) = (own_bid / k, opponent_bid / k);
                self.inner.as_mut().expect("lift inner").observe(&lv, xt, yt);
                self.mirror = self.mirror - xt + self.handle.params.w * yt;
            }
            StrategyKind::Dual { .. } => {
                self.inner.as_mut().expect("dual inner").observe(view, own_bid, opponent_bid)
            }
            StrategyKind::Heuristic { rule: Heuristic::AllInOnce } => self.fired = true,
            StrategyKind::FpRichman => {
                let won = match view.side {
                    Side::Max => own_bid > opponent_bid,
                    Side::Min => own_bid >= opponent_bid,
                };
                if let Some(m) = self.main.as_mut() {
                    *m = if won { (*m - own_bid).max(0.0) } else { *m + opponent_bid };
                }
            }
            _ => {}
        }
    }
}

/// Parsed strategy spec string, e.g. "ap-richman-mixed:eps=0.5",
/// "asym-mixed:W=3,eps=0.5", "lift:asym-pure:W=2.9,eps=0.05",
/// "dual:fp-richman:eps=1", "min-counter", "fraction:f=0.1".
#[derive(Debug, Clone, PartialEq)]
pub enum StrategySpec {
    FpRichman { eps: f64 },
    FpPoorman { eps: f64 },
    ApRichmanMixed { eps: f64 },
    MinCounter,
    AsymPure { w: Option<f64>, eps: f64 },
    AsymResponder { w: Option<f64>, eps: f64 },
    AsymMixed { w: Option<f64>, eps: f64 },
    Lift(Box<StrategySpec>),
    Dual(Box<StrategySpec>),
    Heuristic(Heuristic),
}

fn kv(args: &str, key: &str) -> Result<Option<f64>, StrategyError> {
    for part in args.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| StrategyError::Parse(format!("expected key=value, got {part}")))?;
        if k.trim().eq_ignore_ascii_case(key) {
            return v
                .trim()
                .parse::<f64>()
                .map(Some)
                .map_err(|e| StrategyError::Parse(format!("{key}: {e}")));
        }
    }
    Ok(None)
}

fn need(args: &str, key: &str) -> Result<f64, StrategyError> {
    kv(args, key)?.ok_or_else(|| StrategyError::Parse(format!("missing {key}")))
}

impl StrategySpec {
    pub fn parse(spec: &str) -> Result<Self, StrategyError> {
        let spec = spec.trim();
        if let Some(rest) = spec.strip_prefix("dual:") {
            return Ok(StrategySpec::Dual(Box::new(Self::parse(rest)?)));
        }
        if let Some(rest) = spec.strip_prefix("lift:") {
            return Ok(StrategySpec::Lift(Box::new(Self::parse(rest)?)));
        }
        let (head, args) = spec.split_once(':').unwrap_or((spec, ""));
        Ok(match head {
            "fp-richman" => StrategySpec::FpRichman { eps: need(args, "eps")? },
            "fp-poorman" => StrategySpec::FpPoorman { eps: need(args, "eps")? },
            "ap-richman-mixed" => StrategySpec::ApRichmanMixed { eps: need(args, "eps")? },
            "min-counter" => StrategySpec::MinCounter,
            "asym-pure" => StrategySpec::AsymPure { w: kv(args, "w")?, eps: need(args, "eps")? },
            "asym-responder" => {
                StrategySpec::AsymResponder { w: kv(args, "w")?, eps: need(args, "eps")? }
            }
            "asym-mixed" => StrategySpec::AsymMixed { w: kv(args, "w")?, eps: need(args, "eps")? },
            "zero" => StrategySpec::Heuristic(Heuristic::Zero),
            "const" => StrategySpec::Heuristic(Heuristic::Constant { bid: need(args, "b")? }),
            "fraction" => StrategySpec::Heuristic(Heuristic::Fraction { f: need(args, "f")? }),
            "uniform" => StrategySpec::Heuristic(Heuristic::Uniform),
            "all-in" => StrategySpec::Heuristic(Heuristic::AllIn),
            "all-in-once" => StrategySpec::Heuristic(Heuristic::AllInOnce),
            other => return Err(StrategyError::Parse(format!("unknown strategy {other}"))),
        })
    }

    /// Builds the strategy for `side`. The constructions are Max
    /// strategies; on Min's side they must be wrapped in `dual:`.
    pub fn build(
        &self,
        g: &GameGraph,
        mech: &Mechanism,
        budgets: BudgetState,
        side: Side,
    ) -> Result<StrategyHandle, StrategyError> {
        let max_only = |name: &'static str| {
            if side == Side::Max {
                Ok(())
            } else {
                Err(StrategyError::WrongSide(name, Side::Max))
            }
        };
        let asym_w = |w: Option<f64>| -> Result<f64, StrategyError> {
            match (w, mech) {
                (Some(w), _) => Ok(w),
                (None, Mechanism::Asymmetric { w }) => Ok(*w),
                _ => Err(StrategyError::Parse("W is required outside asymmetric games".into())),
            }
        };
        match self {
            StrategySpec::Heuristic(rule) => Ok(heuristic(*rule)),
            StrategySpec::MinCounter => {
                if side != Side::Min {
                    return Err(StrategyError::WrongSide("min-counter", Side::Min));
                }
                ap_richman_min_counter(g)
            }
            StrategySpec::Dual(inner) => {
                if side != Side::Min {
                    return Err(StrategyError::WrongSide("dual", Side::Min));
                }
                let swapped = BudgetState::new(budgets.min_budget, budgets.max_budget);
                let h = inner.build(&g.negated(), mech, swapped, Side::Max)?;
                Ok(dual_min_strategy(h))
            }
            StrategySpec::FpRichman { eps } => {
                max_only("fp-richman")?;
                let sol = solve_mean_payoff(g, richman_p(*eps))?;
                fp_richman_strategy(&sol, *eps, budgets.ratio())
            }
            StrategySpec::FpPoorman { eps } => {
                max_only("fp-poorman")?;
                let b0 = budgets.max_budget / budgets.min_budget;
                if !(b0 - eps > 0.0) {
                    return Err(StrategyError::BudgetBelowW { budget: b0, w: b0 - eps });
                }
                let sol = solve_mean_payoff(g, fp_poorman_p(b0, *eps))?;
                fp_poorman_strategy(&sol, b0, *eps)
            }
            StrategySpec::ApRichmanMixed { eps } => {
                max_only("ap-richman-mixed")?;
                check_eps(*eps)?;
                let sol = solve_mean_payoff(g, richman_p(*eps))?;
                ap_richman_mixed(&sol, *eps)
            }
            StrategySpec::AsymPure { w, eps } => {
                max_only("asym-pure")?;
                let w = asym_w(*w)?;
                if !(w > 1.0) {
                    return Err(StrategyError::WNotAboveOne(w));
                }
                check_eps(*eps)?;
                asym_pure_max(&solve_mean_payoff(g, asym_pure_p(w, *eps))?, w, *eps)
            }
            StrategySpec::AsymResponder { w, eps } => {
                max_only("asym-responder")?;
                let w = asym_w(*w)?;
                check_eps(*eps)?;
                if !(w > 0.0 && w <= 1.0) {
                    return Err(StrategyError::WOutOfRange(w));
                }
                if *eps >= 1.0 {
                    return Err(StrategyError::EpsilonTooLarge { eps: *eps, w });
                }
                asym_responder_max(&solve_mean_payoff(g, asym_responder_p(w, *eps))?, w, *eps)
            }
            StrategySpec::AsymMixed { w, eps } => {
                max_only("asym-mixed")?;
                let w = asym_w(*w)?;
                check_eps(*eps)?;
                if !(w > 0.0) {
                    return Err(StrategyError::WOutOfRange(w));
                }
                if w <= 1.0 && *eps >= w {
                    return Err(StrategyError::EpsilonTooLarge { eps: *eps, w });
                }
                asym_mixed_max(&solve_mean_payoff(g, asym_mixed_p(w, *eps))?, w, *eps)
            }
            StrategySpec::Lift(inner) => {
                max_only("lift")?;
                let w = match inner.as_ref() {
                    StrategySpec::AsymPure { w: Some(w), .. }
                    | StrategySpec::AsymResponder { w: Some(w), .. }
                    | StrategySpec::AsymMixed { w: Some(w), .. } => *w,
                    _ => return Err(StrategyError::NotAsymmetric),
                };
                let h = inner.build(g, &Mechanism::Asymmetric { w }, budgets, Side::Max)?;
                poorman_lift(h, w, budgets.max_budget, budgets.min_budget)
            }
        }
    }
}
