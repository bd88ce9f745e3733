//! Strongly connected parity bidding games, decided through the mean-payoff
//! game that rewards the top parity index.

use crate::arena::{GameGraph, Mechanism, StepRecord, Vertex};
use crate::solver::{solve_mean_payoff, taxman_targets, SolverError};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParityError {
    #[error("vertex {0} has no parity label")]
    MissingParity(usize),
    #[error("all weights are zero")]
    AllZeroWeights,
    #[error("weight of vertex {0} is negative")]
    NegativeWeight(usize),
    #[error("p = {0} must lie in (0,1)")]
    POutOfRange(f64),
    #[error("ratio r = {0} must lie in (0,1)")]
    BadRatio(f64),
    #[error("parity games are decided for all-pay Richman and all-pay poorman only")]
    UnsupportedMechanism,
    #[error("hypothesis unmet: {0}")]
    HypothesisUnmet(String),
    #[error("certificate failed: value {value} below bound {bound}")]
    CertificateFailed { value: f64, bound: f64 },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// A strongly connected arena with a parity index on every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityGame {
    graph: GameGraph,
    d: u32,
}

impl ParityGame {
    pub fn new(graph: GameGraph) -> Result<Self, ParityError> {
        let mut d = 0;
        for v in 0..graph.len() {
            d = d.max(graph.parity(v).ok_or(ParityError::MissingParity(v))?);
        }
        Ok(ParityGame { graph, d })
    }

    pub fn graph(&self) -> &GameGraph {
        &self.graph
    }

    pub fn max_index(&self) -> u32 {
        self.d
    }

    fn parity(&self, v: usize) -> u32 {
        self.graph.parity(v).expect("labelled at construction")
    }

    /// Same arena with every index shifted by one (swaps the players' goals).
    pub fn shifted(&self) -> Self {
        let vertices = self
            .graph
            .vertices()
            .iter()
            .map(|v| Vertex { weight: v.weight, parity: v.parity.map(|p| p + 1) })
            .collect();
        let succ = (0..self.graph.len()).map(|v| self.graph.successors(v).to_vec()).collect();
        let graph = GameGraph::new(vertices, succ).expect("same shape as a valid graph");
        ParityGame { graph, d: self.d + 1 }
    }

    /// Whether some cycle has an even highest index.
    pub fn has_even_max_cycle(&self) -> bool {
        let n = self.graph.len();
        let mut evens: Vec<u32> = (0..n).map(|v| self.parity(v)).filter(|p| p % 2 == 0).collect();
        evens.sort_unstable();
        evens.dedup();
        evens.into_iter().any(|e| {
            let mut g = DiGraph::<usize, ()>::new();
            let ids: Vec<_> = (0..n).map(|v| g.add_node(v)).collect();
            for a in 0..n {
                for &b in self.graph.successors(a) {
                    if self.parity(a) <= e && self.parity(b) <= e {
                        g.add_edge(ids[a], ids[b], ());
                    }
                }
            }
            tarjan_scc(&g).into_iter().any(|comp| {
                let on_cycle = comp.len() > 1 || {
                    let v = g[comp[0]];
                    self.graph.has_edge(v, v)
                };
                on_cycle && comp.iter().any(|&i| self.parity(g[i]) == e)
            })
        })
    }
}

/// Weight 1 on vertices with the highest index, 0 elsewhere.
pub fn parity_to_mean_payoff(pg: &ParityGame) -> GameGraph {
    let w: Vec<f64> = (0..pg.graph.len())
        .map(|v| if pg.parity(v) == pg.d { 1.0 } else { 0.0 })
        .collect();
    pg.graph.with_weights(&w).expect("same shape as a valid graph")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositiveValueCertificate {
    pub p: f64,
    pub value: f64,
    pub lower_bound: f64,
}

/// Random-turn value of a nonnegative arena together with the lower bound
/// w(v₀)·pⁿ/n, v₀ a heaviest vertex and n the number of vertices: in every
/// window of n turns, n coin wins walk the token to v₀ (a return to v₀ may
/// need all n moves).
pub fn positive_value_certificate(g: &GameGraph, p: f64) -> Result<PositiveValueCertificate, ParityError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(ParityError::POutOfRange(p));
    }
    if let Some(v) = (0..g.len()).find(|&v| g.weight(v) < 0.0) {
        return Err(ParityError::NegativeWeight(v));
    }
    let top = g.weights().into_iter().fold(0.0, f64::max);
    if top <= 0.0 {
        return Err(ParityError::AllZeroWeights);
    }
    let n = g.len();
    let lower_bound = top * p.powi(n as i32) / n as f64;
    let value = solve_mean_payoff(g, p)?.value;
    if !(value > 0.0 && value >= lower_bound - 1e-9) {
        return Err(ParityError::CertificateFailed { value, bound: lower_bound });
    }
    Ok(PositiveValueCertificate { p, value, lower_bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParityVerdict {
    pub player: u8,
    pub almost_sure_win: bool,
    pub sure_win: bool,
    pub mechanism: Mechanism,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityDecision {
    pub max_index: u32,
    /// Player whose objective the top index serves (1: odd, 2: even).
    pub favoured: u8,
    pub verdicts: [ParityVerdict; 2],
    /// Positive value of the reduced game at the mixed-bidding coin bias.
    pub almost_sure: PositiveValueCertificate,
    /// Positive value at the pure-bidding coin bias, when there is one.
    pub sure: Option<PositiveValueCertificate>,
    /// Reduced value when the opponent controls every move (0 refutes sure wins).
    pub opponent_only_value: f64,
}

/// Decides both players' objectives. Player 1 wins iff the highest index
/// seen infinitely often is odd; `r` is Player 1's budget share.
pub fn decide_parity(pg: &ParityGame, mech: &Mechanism, r: f64) -> Result<ParityDecision, ParityError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(ParityError::BadRatio(r));
    }
    if !matches!(mech, Mechanism::AllPayRichman | Mechanism::AllPayPoorman) {
        return Err(ParityError::UnsupportedMechanism);
    }
    // The favoured player plays Max on the reduction, with their own budget share.
    let (inst, share, favoured) = if pg.d % 2 == 1 { (pg.clone(), r, 1u8) } else { (pg.shifted(), 1.0 - r, 2u8) };
    if !inst.has_even_max_cycle() {
        return Err(ParityError::HypothesisUnmet(format!(
            "no cycle whose highest index has the other player's parity (top index {})",
            pg.d
        )));
    }
    let reduced = parity_to_mean_payoff(&inst);
    let (p_mixed, p_pure) = match mech {
        Mechanism::AllPayRichman => (0.5, None),
        _ => {
            let t = taxman_targets(share, 1.0 - share, 1.0)?;
            (t.p_mixed, t.p_pure)
        }
    };
    let almost_sure = positive_value_certificate(&reduced, p_mixed)?;
    let sure = match p_pure {
        Some(p) if p > 0.0 && p < 1.0 => Some(positive_value_certificate(&reduced, p)?),
        _ => None,
    };
    let opponent_only_value = solve_mean_payoff(&reduced, 0.0)?.value;
    let fav = ParityVerdict {
        player: favoured,
        almost_sure_win: true,
        sure_win: sure.is_some(),
        mechanism: *mech,
        ratio: if favoured == 1 { r } else { 1.0 - r },
    };
    let other = ParityVerdict {
        player: 3 - favoured,
        almost_sure_win: false,
        sure_win: false,
        mechanism: *mech,
        ratio: 1.0 - fav.ratio,
    };
    let verdicts = if favoured == 1 { [fav, other] } else { [other, fav] };
    Ok(ParityDecision { max_index: pg.d, favoured, verdicts, almost_sure, sure, opponent_only_value })
}

/// Highest index visited in the second half of a finite trace (diagnostic).
pub fn tail_max_parity(pg: &ParityGame, steps: &[StepRecord]) -> Option<u32> {
    let n = steps.len();
    steps[n / 2..].iter().map(|s| pg.parity(s.vertex)).max()
}
