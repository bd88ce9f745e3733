//! Arenas, payment mechanics, budgets and energy bookkeeping.

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArenaError {
    #[error("graph has no vertices")]
    Empty,
    #[error("vertex ids must be dense 0..n-1 (found {0})")]
    NonDenseIds(usize),
    #[error("edge references unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("vertex {0} has no successor")]
    NoSuccessor(usize),
    #[error("vertex {0} has a non-finite weight")]
    NonFiniteWeight(usize),
    #[error("graph is not strongly connected")]
    NotStronglyConnected,
    #[error("illegal bid: {0}")]
    IllegalBid(String),
    #[error("invalid mechanism parameter: {0}")]
    InvalidMechanism(String),
    #[error("degenerate budget: {0}")]
    DegenerateBudget(String),
    #[error("empty trace")]
    EmptyTrace,
    #[error("malformed graph document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<u32>,
}

/// A validated, strongly connected weighted arena. Successor lists are
/// sorted and deduplicated.
#[derive(Debug, Clone, PartialEq)]
pub struct GameGraph {
    vertices: Vec<Vertex>,
    succ: Vec<Vec<usize>>,
}

/// Graph document as read from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawGraph {
    pub vertices: Vec<RawVertex>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawVertex {
    pub id: usize,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<u32>,
}

pub fn validate_graph(raw: &RawGraph) -> Result<GameGraph, ArenaError> {
    let n = raw.vertices.len();
    if n == 0 {
        return Err(ArenaError::Empty);
    }
    let mut slots: Vec<Option<Vertex>> = vec![None; n];
    for v in &raw.vertices {
        if v.id >= n || slots[v.id].is_some() {
            return Err(ArenaError::NonDenseIds(v.id));
        }
        slots[v.id] = Some(Vertex { weight: v.weight, parity: v.parity });
    }
    let vertices: Vec<Vertex> = slots.into_iter().map(|v| v.expect("dense ids")).collect();
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in &raw.edges {
        if a >= n {
            return Err(ArenaError::UnknownVertex(a));
        }
        if b >= n {
            return Err(ArenaError::UnknownVertex(b));
        }
        succ[a].push(b);
    }
    GameGraph::new(vertices, succ)
}

impl GameGraph {
    /// Builds and validates a graph from vertices and successor lists.
    pub fn new(vertices: Vec<Vertex>, mut succ: Vec<Vec<usize>>) -> Result<Self, ArenaError> {
        let n = vertices.len();
        if n == 0 {
            return Err(ArenaError::Empty);
        }
        if succ.len() != n {
            return Err(ArenaError::Malformed(format!(
                "{} vertices but {} successor lists",
                n,
                succ.len()
            )));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.weight.is_finite() {
                return Err(ArenaError::NonFiniteWeight(i));
            }
        }
        for (i, s) in succ.iter_mut().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(ArenaError::NoSuccessor(i));
            }
            if let Some(&bad) = s.iter().find(|&&u| u >= n) {
                return Err(ArenaError::UnknownVertex(bad));
            }
        }
        if !strongly_connected(&succ) {
            return Err(ArenaError::NotStronglyConnected);
        }
        Ok(Self { vertices, succ })
    }

    /// Convenience constructor from weights and an edge list.
    pub fn from_edges(weights: &[f64], edges: &[(usize, usize)]) -> Result<Self, ArenaError> {
        let vertices = weights.iter().map(|&w| Vertex { weight: w, parity: None }).collect();
        let mut succ = vec![Vec::new(); weights.len()];
        for &(a, b) in edges {
            if a >= weights.len() {
                return Err(ArenaError::UnknownVertex(a));
            }
            succ[a].push(b);
        }
        Self::new(vertices, succ)
    }

    /// The two-vertex complete graph with weights 1 (vertex 0) and 0 (vertex 1).
    pub fn bowtie() -> Self {
        Self::from_edges(&[1.0, 0.0], &[(0, 0), (0, 1), (1, 0), (1, 1)]).expect("bowtie is valid")
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.vertices[v].weight
    }

    pub fn weights(&self) -> Vec<f64> {
        self.vertices.iter().map(|v| v.weight).collect()
    }

    pub fn parity(&self, v: usize) -> Option<u32> {
        self.vertices[v].parity
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn successors(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.len() && self.succ[a].binary_search(&b).is_ok()
    }

    /// Same arena with every weight negated.
    pub fn negated(&self) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|v| Vertex { weight: -v.weight, parity: v.parity })
            .collect();
        Self { vertices, succ: self.succ.clone() }
    }

    /// Same arena with weights replaced (length must match).
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self, ArenaError> {
        assert_eq!(weights.len(), self.len());
        let vertices = self
            .vertices
            .iter()
            .zip(weights)
            .map(|(v, &w)| Vertex { weight: w, parity: v.parity })
            .collect();
        Self::new(vertices, self.succ.clone())
    }

    pub fn to_raw(&self) -> RawGraph {
        RawGraph {
            vertices: self
                .vertices
                .iter()
                .enumerate()
                .map(|(id, v)| RawVertex { id, weight: v.weight, parity: v.parity })
                .collect(),
            edges: self
                .succ
                .iter()
                .enumerate()
                .flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ArenaError> {
        let raw: RawGraph =
            serde_json::from_str(text).map_err(|e| ArenaError::Malformed(e.to_string()))?;
        validate_graph(&raw)
    }
}

fn strongly_connected(succ: &[Vec<usize>]) -> bool {
    let mut g = DiGraph::<(), ()>::with_capacity(succ.len(), 0);
    let nodes: Vec<_> = (0..succ.len()).map(|_| g.add_node(())).collect();
    for (a, s) in succ.iter().enumerate() {
        for &b in s {
            g.add_edge(nodes[a], nodes[b], ());
        }
    }
    tarjan_scc(&g).len() == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mechanism {
    FirstPriceRichman,
    FirstPricePoorman,
    AllPayRichman,
    AllPayPoorman,
    Taxman { tau: f64 },
    Asymmetric { w: f64 },
}

impl Mechanism {
    pub fn validate(&self) -> Result<(), ArenaError> {
        match *self {
            Mechanism::Taxman { tau } if !(0.0..=1.0).contains(&tau) => {
                Err(ArenaError::InvalidMechanism(format!("tau = {tau} outside [0,1]")))
            }
            Mechanism::Asymmetric { w } if !(w > 0.0 && w.is_finite()) => {
                Err(ArenaError::InvalidMechanism(format!("W = {w} must be positive")))
            }
            _ => Ok(()),
        }
    }

    /// Whether payments only move money between the players.
    pub fn conserves_sum(&self) -> bool {
        match *self {
            Mechanism::FirstPriceRichman | Mechanism::AllPayRichman => true,
            Mechanism::Taxman { tau } => tau == 0.0,
            _ => false,
        }
    }

    pub fn is_all_pay(&self) -> bool {
        matches!(self, Mechanism::AllPayRichman | Mechanism::AllPayPoorman | Mechanism::Asymmetric { .. })
    }

    /// Parses "fp-richman", "ap-poorman", "taxman:tau=0.5", "asym:W=2", ...
    pub fn parse(spec: &str) -> Result<Self, ArenaError> {
        let (head, args) = spec.split_once(':').unwrap_or((spec, ""));
        let arg = |key: &str| -> Result<f64, ArenaError> {
            args.split(',')
                .filter_map(|kv| kv.split_once('='))
                .find(|(k, _)| k.trim().eq_ignore_ascii_case(key))
                .ok_or_else(|| ArenaError::InvalidMechanism(format!("{spec}: missing {key}")))?
                .1
                .trim()
                .parse::<f64>()
                .map_err(|e| ArenaError::InvalidMechanism(format!("{spec}: {e}")))
        };
        let m = match head.trim() {
            "fp-richman" => Mechanism::FirstPriceRichman,
            "fp-poorman" => Mechanism::FirstPricePoorman,
            "ap-richman" => Mechanism::AllPayRichman,
            "ap-poorman" => Mechanism::AllPayPoorman,
            "taxman" => Mechanism::Taxman { tau: arg("tau")? },
            "asym" | "asymmetric" => Mechanism::Asymmetric { w: arg("w")? },
            other => return Err(ArenaError::InvalidMechanism(format!("unknown mechanism {other}"))),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetState {
    pub max_budget: f64,
    pub min_budget: f64,
}

impl BudgetState {
    pub fn new(max_budget: f64, min_budget: f64) -> Self {
        Self { max_budget, min_budget }
    }

    pub fn ratio(&self) -> f64 {
        self.max_budget / (self.max_budget + self.min_budget)
    }

    pub fn sum(&self) -> f64 {
        self.max_budget + self.min_budget
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Max,
    Min,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Max => Side::Min,
            Side::Min => Side::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub vertex: usize,
    pub bid_max: f64,
    pub bid_min: f64,
    pub winner: Side,
    pub move_to: usize,
    pub budgets_after: BudgetState,
}

/// Resolves one bidding. Max wins iff `x > y`.
pub fn resolve_bidding(
    mech: &Mechanism,
    budgets: BudgetState,
    x: f64,
    y: f64,
) -> Result<(Side, BudgetState), ArenaError> {
    let BudgetState { max_budget: b, min_budget: c } = budgets;
    let y_cap = match mech {
        Mechanism::Asymmetric { .. } => 1.0,
        _ => c,
    };
    if !(x >= 0.0 && x <= b) {
        return Err(ArenaError::IllegalBid(format!("Max bid {x} with budget {b}")));
    }
    if !(y >= 0.0 && y <= y_cap) {
        return Err(ArenaError::IllegalBid(format!("Min bid {y} with budget {y_cap}")));
    }
    let winner = if x > y { Side::Max } else { Side::Min };
    let max_wins = winner == Side::Max;
    let (nb, nc) = match *mech {
        Mechanism::FirstPriceRichman => {
            if max_wins {
                (b - x, c + x)
            } else {
                (b + y, c - y)
            }
        }
        Mechanism::FirstPricePoorman => {
            if max_wins {
                (b - x, c)
            } else {
                (b, c - y)
            }
        }
        Mechanism::AllPayRichman => (b - x + y, c + x - y),
        Mechanism::AllPayPoorman => (b - x, c - y),
        Mechanism::Taxman { tau } => {
            if max_wins {
                (b - x, c + (1.0 - tau) * x)
            } else {
                (b + (1.0 - tau) * y, c - y)
            }
        }
        Mechanism::Asymmetric { w } => (b - x + w * y, 1.0),
    };
    Ok((winner, BudgetState::new(nb.max(0.0), nc.max(0.0))))
}

/// Rescales budgets: sum 1 for money-conserving mechanisms, Min = 1 otherwise.
pub fn normalize_budgets(mech: &Mechanism, budgets: BudgetState) -> Result<BudgetState, ArenaError> {
    if mech.conserves_sum() {
        let s = budgets.sum();
        if !(s > 0.0) {
            return Err(ArenaError::DegenerateBudget("budgets sum to zero".into()));
        }
        Ok(BudgetState::new(budgets.max_budget / s, budgets.min_budget / s))
    } else {
        if !(budgets.min_budget > 0.0) {
            return Err(ArenaError::DegenerateBudget("Min budget is zero".into()));
        }
        Ok(BudgetState::new(budgets.max_budget / budgets.min_budget, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `prefix[n]` is the energy of the first `n` steps; length is steps + 1.
    pub prefix: Vec<f64>,
    pub payoff_estimate: f64,
    pub tail_min_average: f64,
}

pub fn energy_and_payoff(trace: &[StepRecord], graph: &GameGraph) -> Result<EnergyReport, ArenaError> {
    if trace.is_empty() {
        return Err(ArenaError::EmptyTrace);
    }
    let mut prefix = Vec::with_capacity(trace.len() + 1);
    let mut acc = 0.0;
    prefix.push(acc);
    for s in trace {
        acc += graph.weight(s.vertex);
        prefix.push(acc);
    }
    let n = trace.len();
    let tail = n.div_ceil(2);
    let tail_min_average = (n - tail + 1..=n)
        .map(|k| prefix[k] / k as f64)
        .fold(f64::INFINITY, f64::min);
    Ok(EnergyReport { payoff_estimate: acc / n as f64, tail_min_average, prefix })
}
