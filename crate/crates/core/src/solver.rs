//! Random-turn games: construction, mean-payoff solving by policy iteration,
//! potentials and strengths.

use crate::arena::{BudgetState, GameGraph, Mechanism};
use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("p = {0} outside the open interval (0,1)")]
    POutOfRange(f64),
    #[error("p = {0} outside [0,1]")]
    PNotProbability(f64),
    #[error("policy iteration did not converge: {0}")]
    NoConvergence(String),
    #[error("singular potential system")]
    SingularSystem,
    #[error("budgets must be positive")]
    NonPositiveBudget,
    #[error("strategy vectors do not match the graph")]
    BadStrategy,
    #[error("no value target for this mechanism: {0}")]
    NoTarget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RtNode {
    /// Coin toss: `p` to the Max copy, `1 - p` to the Min copy.
    Nature { to_max: usize, to_min: usize, p: f64 },
    /// Controlled copy of original vertex `of`.
    Max { of: usize },
    Min { of: usize },
}

/// Explicit random-turn game. Node `v` is the coin toss of vertex `v`, node
/// `n + v` its Max copy and `2n + v` its Min copy; controlled copies move to
/// the coin-toss nodes of the successors of `v`.
#[derive(Debug, Clone, Serialize)]
pub struct RandomTurnGame {
    pub p: f64,
    pub nodes: Vec<RtNode>,
    pub weights: Vec<f64>,
    pub edges: Vec<Vec<usize>>,
}

pub fn build_random_turn(g: &GameGraph, p: f64) -> Result<RandomTurnGame, SolverError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SolverError::POutOfRange(p));
    }
    let n = g.len();
    let mut nodes = Vec::with_capacity(3 * n);
    let mut weights = vec![0.0; 3 * n];
    let mut edges = vec![Vec::new(); 3 * n];
    for v in 0..n {
        nodes.push(RtNode::Nature { to_max: n + v, to_min: 2 * n + v, p });
        weights[v] = g.weight(v);
        edges[v] = vec![n + v, 2 * n + v];
    }
    for v in 0..n {
        nodes.push(RtNode::Max { of: v });
        edges[n + v] = g.successors(v).to_vec();
    }
    for v in 0..n {
        nodes.push(RtNode::Min { of: v });
        edges[2 * n + v] = g.successors(v).to_vec();
    }
    Ok(RandomTurnGame { p, nodes, weights, edges })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticSolution {
    pub p: f64,
    pub value: f64,
    pub sigma_max: Vec<usize>,
    pub sigma_min: Vec<usize>,
    pub pot: Vec<f64>,
    pub strength: Vec<f64>,
    pub s_max: f64,
    pub s_min_pos: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Potentials {
    pub value: f64,
    pub pot: Vec<f64>,
    pub strength: Vec<f64>,
    pub s_max: f64,
    pub s_min_pos: Option<f64>,
}

const MAX_ROUNDS: usize = 10_000;

/// Transition row of the chain induced by a strategy pair.
fn row(p: f64, a: usize, b: usize) -> [(usize, f64); 2] {
    if a == b {
        [(a, 1.0), (b, 0.0)]
    } else {
        [(a, p), (b, 1.0 - p)]
    }
}

fn dense_solve(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>, SolverError> {
    let x = a.clone().lu().solve(&b).ok_or(SolverError::SingularSystem)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::SingularSystem);
    }
    let resid = (&a * &x - &b).amax();
    if resid > 1e-8 * (1.0 + b.amax() + x.amax()) {
        return Err(SolverError::SingularSystem);
    }
    Ok(x)
}

/// Gain and bias of the Markov chain induced by `(sp, sm)`. Handles chains
/// with several recurrent classes: each class gets its own gain with the bias
/// pinned to zero at its smallest vertex.
fn evaluate(w: &[f64], p: f64, sp: &[usize], sm: &[usize]) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    let n = w.len();
    let rows: Vec<[(usize, f64); 2]> = (0..n).map(|v| row(p, sp[v], sm[v])).collect();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 2 * n);
    let idx: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for (v, r) in rows.iter().enumerate() {
        for &(u, q) in r {
            if q > 0.0 {
                graph.add_edge(idx[v], idx[u], ());
            }
        }
    }
    let mut class_of = vec![usize::MAX; n];
    let sccs = tarjan_scc(&graph);
    for (k, comp) in sccs.iter().enumerate() {
        for node in comp {
            class_of[node.index()] = k;
        }
    }
    let mut recurrent = vec![false; n];
    let mut gain = vec![0.0; n];
    let mut bias = vec![0.0; n];
    for (k, comp) in sccs.iter().enumerate() {
        let closed = comp.iter().all(|node| {
            rows[node.index()]
                .iter()
                .all(|&(u, q)| q == 0.0 || class_of[u] == k)
        });
        if !closed {
            continue;
        }
        let mut members: Vec<usize> = comp.iter().map(|x| x.index()).collect();
        members.sort_unstable();
        let m = members.len();
        let pos = |v: usize| members.binary_search(&v).expect("member");
        // Unknown 0 is the gain; unknown i >= 1 is the bias of members[i].
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for (i, &v) in members.iter().enumerate() {
            a[(i, 0)] = 1.0;
            if i > 0 {
                a[(i, i)] += 1.0;
            }
            for &(u, q) in &rows[v] {
                if q > 0.0 {
                    let j = pos(u);
                    if j > 0 {
                        a[(i, j)] -= q;
                    }
                }
            }
            b[i] = w[v];
        }
        let x = dense_solve(a, b)?;
        for (i, &v) in members.iter().enumerate() {
            recurrent[v] = true;
            gain[v] = x[0];
            bias[v] = if i == 0 { 0.0 } else { x[i] };
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&v| !recurrent[v]).collect();
    if !transient.is_empty() {
        let t = transient.len();
        let tpos = |v: usize| transient.binary_search(&v).ok();
        let mut a = DMatrix::<f64>::identity(t, t);
        let mut bg = DVector::<f64>::zeros(t);
        for (i, &v) in transient.iter().enumerate() {
            for &(u, q) in &rows[v] {
                if q == 0.0 {
                    continue;
                }
                match tpos(u) {
                    Some(j) => a[(i, j)] -= q,
                    None => bg[i] += q * gain[u],
                }
            }
        }
        let gt = dense_solve(a.clone(), bg)?;
        let mut bh = DVector::<f64>::zeros(t);
        for (i, &v) in transient.iter().enumerate() {
            bh[i] = w[v] - gt[i];
            for &(u, q) in &rows[v] {
                if q > 0.0 && tpos(u).is_none() {
                    bh[i] += q * bias[u];
                }
            }
        }
        let ht = dense_solve(a, bh)?;
        for (i, &v) in transient.iter().enumerate() {
            gain[v] = gt[i];
            bias[v] = ht[i];
        }
    }
    Ok((gain, bias))
}

/// One round of lexicographic (gain, then bias) improvement for one player.
/// Keeps the current choice unless a strictly better one exists.
fn improve(g: &GameGraph, choice: &mut [usize], gain: &[f64], bias: &[f64], maximize: bool) -> bool {
    let sign = if maximize { 1.0 } else { -1.0 };
    let gscale = 1.0 + gain.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let hscale = 1.0 + bias.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (gtol, htol) = (1e-11 * gscale, 1e-10 * hscale);
    let mut changed = false;
    for v in 0..g.len() {
        let cur = choice[v];
        let succ = g.successors(v);
        let mut best = cur;
        for &u in succ {
            if sign * (gain[u] - gain[best]) > gtol {
                best = u;
            }
        }
        if best != cur {
            choice[v] = best;
            changed = true;
            continue;
        }
        for &u in succ {
            if (gain[u] - gain[cur]).abs() <= gtol && sign * (bias[u] - bias[best]) > htol {
                best = u;
            }
        }
        if best != cur {
            choice[v] = best;
            changed = true;
        }
    }
    changed
}

/// Solves MP(RT(G,p)) for p in [0,1]. At p = 0 (resp. 1) Min (resp. Max)
/// controls every move.
pub fn solve_mean_payoff(g: &GameGraph, p: f64) -> Result<StochasticSolution, SolverError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SolverError::PNotProbability(p));
    }
    let w = g.weights();
    let n = g.len();
    let mut sp: Vec<usize> = (0..n).map(|v| g.successors(v)[0]).collect();
    let mut sm = sp.clone();
    let mut outer = 0;
    let (gain, bias) = loop {
        outer += 1;
        if outer > MAX_ROUNDS {
            return Err(SolverError::NoConvergence("Max policy rounds exhausted".into()));
        }
        let mut inner = 0;
        let (gain, bias) = loop {
            inner += 1;
            if inner > MAX_ROUNDS {
                return Err(SolverError::NoConvergence("Min policy rounds exhausted".into()));
            }
            let (gain, bias) = evaluate(&w, p, &sp, &sm)?;
            if p == 1.0 || !improve(g, &mut sm, &gain, &bias, false) {
                break (gain, bias);
            }
        };
        if p == 0.0 || !improve(g, &mut sp, &gain, &bias, true) {
            break (gain, bias);
        }
    };
    let scale = 1.0 + w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (lo, hi) = gain
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if hi - lo > 1e-9 * scale {
        return Err(SolverError::NoConvergence(format!("gain not constant: [{lo}, {hi}]")));
    }
    let value = gain[0];
    let pot: Vec<f64> = bias.iter().map(|h| h - bias[0]).collect();
    let (sigma_max, sigma_min) = lowest_id_strategies(g, &pot);
    let pots = match compute_potentials(g, p, &sigma_max, &sigma_min) {
        Ok(exact) if bellman_ok(g, &exact.pot, &sigma_max, &sigma_min) => exact,
        _ => {
            let (strength, s_max, s_min_pos) = strengths(p, &pot, &sigma_max, &sigma_min);
            Potentials { value, pot, strength, s_max, s_min_pos }
        }
    };
    Ok(StochasticSolution {
        p,
        value: pots.value,
        sigma_max,
        sigma_min,
        pot: pots.pot,
        strength: pots.strength,
        s_max: pots.s_max,
        s_min_pos: pots.s_min_pos,
    })
}

/// Lowest-id argmax / argmin of the potentials over successors.
fn lowest_id_strategies(g: &GameGraph, pot: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let tol = 1e-12 * (1.0 + pot.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let pick = |v: usize, maximize: bool| {
        let succ = g.successors(v);
        let target = succ
            .iter()
            .map(|&u| pot[u])
            .fold(if maximize { f64::NEG_INFINITY } else { f64::INFINITY }, |a, b| {
                if maximize {
                    a.max(b)
                } else {
                    a.min(b)
                }
            });
        *succ
            .iter()
            .find(|&&u| (pot[u] - target).abs() <= tol)
            .expect("nonempty successors")
    };
    ((0..g.len()).map(|v| pick(v, true)).collect(), (0..g.len()).map(|v| pick(v, false)).collect())
}

fn bellman_ok(g: &GameGraph, pot: &[f64], sp: &[usize], sm: &[usize]) -> bool {
    let tol = 1e-10 * (1.0 + pot.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    (0..g.len()).all(|v| {
        g.successors(v)
            .iter()
            .all(|&u| pot[u] <= pot[sp[v]] + tol && pot[u] >= pot[sm[v]] - tol)
    })
}

fn strengths(p: f64, pot: &[f64], sp: &[usize], sm: &[usize]) -> (Vec<f64>, f64, Option<f64>) {
    let mut st: Vec<f64> = (0..pot.len()).map(|v| p * (1.0 - p) * (pot[sp[v]] - pot[sm[v]])).collect();
    let raw_max = st.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = 1e-12 * (1.0 + raw_max);
    for s in st.iter_mut() {
        if *s <= floor {
            *s = 0.0;
        }
    }
    let s_max = st.iter().fold(0.0f64, |m, &x| m.max(x));
    let s_min_pos = st.iter().copied().filter(|&x| x > 0.0).fold(None, |m: Option<f64>, x| {
        Some(m.map_or(x, |m| m.min(x)))
    });
    (st, s_max, s_min_pos)
}

/// Solves the potential equation for a fixed strategy pair with Pot(0) = 0.
pub fn compute_potentials(
    g: &GameGraph,
    p: f64,
    sigma_max: &[usize],
    sigma_min: &[usize],
) -> Result<Potentials, SolverError> {
    compute_potentials_anchored(g, p, sigma_max, sigma_min, 0)
}

pub fn compute_potentials_anchored(
    g: &GameGraph,
    p: f64,
    sigma_max: &[usize],
    sigma_min: &[usize],
    anchor: usize,
) -> Result<Potentials, SolverError> {
    let n = g.len();
    if sigma_max.len() != n
        || sigma_min.len() != n
        || anchor >= n
        || (0..n).any(|v| !g.has_edge(v, sigma_max[v]) || !g.has_edge(v, sigma_min[v]))
    {
        return Err(SolverError::BadStrategy);
    }
    // Column `anchor` holds the value; every other column a potential.
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for v in 0..n {
        a[(v, anchor)] += 1.0;
        if v != anchor {
            a[(v, v)] += 1.0;
        }
        for (u, q) in row(p, sigma_max[v], sigma_min[v]) {
            if u != anchor {
                a[(v, u)] -= q;
            }
        }
        b[v] = g.weight(v);
    }
    let x = dense_solve(a, b)?;
    let value = x[anchor];
    let pot: Vec<f64> = (0..n).map(|v| if v == anchor { 0.0 } else { x[v] }).collect();
    let (strength, s_max, s_min_pos) = strengths(p, &pot, sigma_max, sigma_min);
    Ok(Potentials { value, pot, strength, s_max, s_min_pos })
}

/// Largest absolute residual of the potential equation.
pub fn potential_residual(g: &GameGraph, sol: &StochasticSolution) -> f64 {
    (0..g.len())
        .map(|v| {
            let rhs = sol.p * sol.pot[sol.sigma_max[v]]
                + (1.0 - sol.p) * sol.pot[sol.sigma_min[v]]
                + g.weight(v)
                - sol.value;
            (sol.pot[v] - rhs).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaxmanTargets {
    pub p_pure: Option<f64>,
    pub p_mixed: f64,
}

pub fn taxman_targets(x: f64, y: f64, tau: f64) -> Result<TaxmanTargets, SolverError> {
    if !(x > 0.0 && y > 0.0) {
        return Err(SolverError::NonPositiveBudget);
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(SolverError::NoTarget(format!("tau = {tau}")));
    }
    let t = 1.0 - tau;
    let nx = x + t * y;
    let ny = y + t * x;
    if x > y {
        Ok(TaxmanTargets { p_pure: Some(1.0 - ny / nx), p_mixed: 1.0 - ny / (2.0 * nx) })
    } else {
        Ok(TaxmanTargets { p_pure: None, p_mixed: nx / (2.0 * ny) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Pure,
    Mixed,
}

/// Coin bias of the random-turn game whose value the bidding game attains.
pub fn equivalent_p(mech: &Mechanism, budgets: BudgetState, mode: Mode) -> Result<f64, SolverError> {
    let (b, c) = (budgets.max_budget, budgets.min_budget);
    if !(b > 0.0 && c > 0.0) {
        return Err(SolverError::NonPositiveBudget);
    }
    let r = budgets.ratio();
    Ok(match (*mech, mode) {
        (Mechanism::FirstPriceRichman, _) => 0.5,
        (Mechanism::FirstPricePoorman, _) => r,
        (Mechanism::Taxman { tau }, _) => {
            let t = 1.0 - tau;
            (r + t * (1.0 - r)) / (1.0 + t)
        }
        (Mechanism::AllPayRichman, Mode::Pure) => 0.0,
        (Mechanism::AllPayRichman, Mode::Mixed) => 0.5,
        (Mechanism::AllPayPoorman, Mode::Pure) => taxman_targets(b, c, 1.0)?.p_pure.unwrap_or(0.0),
        (Mechanism::AllPayPoorman, Mode::Mixed) => taxman_targets(b, c, 1.0)?.p_mixed,
        (Mechanism::Asymmetric { .. }, _) => {
            return Err(SolverError::NoTarget("asymmetric games need an explicit p".into()))
        }
    })
}

pub fn value_curve(g: &GameGraph, grid: &[f64]) -> Result<Vec<(f64, f64)>, SolverError> {
    grid.iter()
        .map(|&p| {
            if !(p > 0.0 && p < 1.0) {
                return Err(SolverError::POutOfRange(p));
            }
            Ok((p, solve_mean_payoff(g, p)?.value))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bowtie_values_and_strengths() {
        let g = GameGraph::bowtie();
        for (p, st) in [(0.5, 0.25), (2.0 / 3.0, 2.0 / 9.0)] {
            let s = solve_mean_payoff(&g, p).unwrap();
            assert!((s.value - p).abs() < 1e-12);
            assert_eq!(s.sigma_max, vec![0, 0]);
            assert_eq!(s.sigma_min, vec![1, 1]);
            assert!((s.pot[0] - s.pot[1] - 1.0).abs() < 1e-12);
            for v in 0..2 {
                assert!((s.strength[v] - st).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bowtie_potentials_anchored_at_vmin() {
        let g = GameGraph::bowtie();
        let p = compute_potentials_anchored(&g, 0.5, &[0, 0], &[1, 1], 1).unwrap();
        assert_eq!(p.pot[1], 0.0);
        assert!((p.pot[0] - 1.0).abs() < 1e-12);
        assert!((p.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn structure_of_random_turn_game() {
        let g = GameGraph::from_edges(&[0.0, 1.0, 2.0], &[(0, 1), (1, 2), (2, 0)]).unwrap();
        let rt = build_random_turn(&g, 0.3).unwrap();
        assert_eq!(rt.nodes.len(), 9);
        for v in 0..3 {
            assert_eq!(rt.nodes[v], RtNode::Nature { to_max: 3 + v, to_min: 6 + v, p: 0.3 });
        }
        assert!(matches!(build_random_turn(&g, 0.0), Err(SolverError::POutOfRange(_))));
        assert!(matches!(build_random_turn(&g, 1.0), Err(SolverError::POutOfRange(_))));
    }

    #[test]
    fn forced_cycle_and_self_loop() {
        let g = GameGraph::from_edges(&[1.0, 0.0, 0.0], &[(0, 1), (1, 2), (2, 0)]).unwrap();
        for p in [0.0, 0.5, 1.0] {
            assert!((solve_mean_payoff(&g, p).unwrap().value - 1.0 / 3.0).abs() < 1e-12);
        }
        let one = GameGraph::from_edges(&[7.0], &[(0, 0)]).unwrap();
        assert_eq!(solve_mean_payoff(&one, 0.4).unwrap().value, 7.0);
    }

    #[test]
    fn constant_weights_have_no_strength() {
        let g = GameGraph::from_edges(&[2.5; 3], &[(0, 1), (1, 2), (2, 0), (0, 2), (1, 1)]).unwrap();
        let s = solve_mean_payoff(&g, 0.37).unwrap();
        assert!((s.value - 2.5).abs() < 1e-12);
        assert!(s.strength.iter().all(|&x| x == 0.0));
        assert_eq!(s.s_min_pos, None);
    }

    #[test]
    fn boundary_p_is_one_player() {
        let g = GameGraph::bowtie();
        assert!((solve_mean_payoff(&g, 0.0).unwrap().value - 0.0).abs() < 1e-12);
        assert!((solve_mean_payoff(&g, 1.0).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multichain_strategy_pairs_are_handled() {
        // Two 2-cycles joined at 0<->2; lowest-id choices keep both closed.
        let g = GameGraph::from_edges(
            &[1.0, 1.0, 1.0, 1.0],
            &[(0, 1), (1, 0), (2, 3), (3, 2), (0, 2), (2, 0)],
        )
        .unwrap();
        let (gain, _) = evaluate(&g.weights(), 0.5, &[1, 0, 3, 2], &[1, 0, 3, 2]).unwrap();
        assert!(gain.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(compute_potentials(&g, 0.5, &[1, 0, 3, 2], &[1, 0, 3, 2]).is_err());
        let g2 = g.with_weights(&[1.0, 0.0, -1.0, 0.5]).unwrap();
        let s = solve_mean_payoff(&g2, 0.5).unwrap();
        assert!(potential_residual(&g2, &s) < 1e-9);
    }

    #[test]
    fn taxman_examples() {
        let t = taxman_targets(0.75, 0.25, 1.0).unwrap();
        assert!((t.p_pure.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.p_mixed - 5.0 / 6.0).abs() < 1e-12);
        assert!((taxman_targets(0.6, 0.4, 0.0).unwrap().p_mixed - 0.5).abs() < 1e-12);
        let eq = taxman_targets(0.5, 0.5, 1.0).unwrap();
        assert_eq!(eq.p_pure, None);
        assert_eq!(eq.p_mixed, 0.5);
        assert_eq!(taxman_targets(0.0, 1.0, 0.5), Err(SolverError::NonPositiveBudget));
    }

    #[test]
    fn equivalent_p_examples() {
        let b = BudgetState::new(0.75, 0.25);
        let mixed = equivalent_p(&Mechanism::AllPayPoorman, b, Mode::Mixed).unwrap();
        assert!((mixed - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(equivalent_p(&Mechanism::AllPayRichman, b, Mode::Mixed).unwrap(), 0.5);
        let poor = BudgetState::new(0.25, 0.75);
        assert_eq!(equivalent_p(&Mechanism::AllPayPoorman, poor, Mode::Pure).unwrap(), 0.0);
        let t0 = equivalent_p(&Mechanism::Taxman { tau: 0.0 }, b, Mode::Pure).unwrap();
        assert!((t0 - 0.5).abs() < 1e-15);
        let t1 = equivalent_p(&Mechanism::Taxman { tau: 1.0 }, b, Mode::Pure).unwrap();
        assert!((t1 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn value_curve_on_bowtie() {
        let grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        for (p, v) in value_curve(&GameGraph::bowtie(), &grid).unwrap() {
            assert!((p - v).abs() < 1e-12);
        }
    }
}
