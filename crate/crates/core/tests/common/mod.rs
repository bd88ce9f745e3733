//! Helpers shared by the integration suites: graph corpora and an
//! independent value-iteration oracle.
#![allow(dead_code)]

use bidding_core::GameGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Edge mask bit for (i, j) in an n-vertex graph.
fn bit(n: usize, i: usize, j: usize) -> u32 {
    1 << (i * n + j)
}

fn strongly_connected(n: usize, mask: u32) -> bool {
    if (0..n).any(|i| (0..n).all(|j| mask & bit(n, i, j) == 0)) {
        return false;
    }
    let reach = |forward: bool| {
        let mut seen = 1u32;
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            for u in 0..n {
                let e = if forward { bit(n, v, u) } else { bit(n, u, v) };
                if mask & e != 0 && seen & (1 << u) == 0 {
                    seen |= 1 << u;
                    stack.push(u);
                }
            }
        }
        seen == (1u32 << n) - 1
    };
    reach(true) && reach(false)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in 0..n {
            if !cur.contains(&v) {
                cur.push(v);
                go(n, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(n, &mut Vec::new(), &mut out);
    out
}

fn relabel(n: usize, mask: u32, w: &[i8], perm: &[usize]) -> (u32, Vec<i8>) {
    let mut m = 0;
    let mut nw = vec![0; n];
    for i in 0..n {
        nw[perm[i]] = w[i];
        for j in 0..n {
            if mask & bit(n, i, j) != 0 {
                m |= bit(n, perm[i], perm[j]);
            }
        }
    }
    (m, nw)
}

/// Every strongly connected graph (self-loops allowed) on exactly `n`
/// vertices with weights in {−1, 0, 1}, one representative per isomorphism
/// class of weighted graphs.
pub fn canonical_corpus(n: usize) -> Vec<GameGraph> {
    assert!((1..=4).contains(&n));
    let perms = permutations(n);
    let mut out = Vec::new();
    for mask in 0..(1u32 << (n * n)) {
        if !strongly_connected(n, mask) {
            continue;
        }
        for code in 0..3usize.pow(n as u32) {
            let w: Vec<i8> = (0..n).map(|i| (code / 3usize.pow(i as u32) % 3) as i8 - 1).collect();
            let key = (mask, w.clone());
            let canonical = perms.iter().all(|p| {
                let (m, pw) = relabel(n, mask, &w, p);
                key <= (m, pw)
            });
            if canonical {
                out.push(to_graph(n, mask, &w));
            }
        }
    }
    out
}

fn to_graph(n: usize, mask: u32, w: &[i8]) -> GameGraph {
    let weights: Vec<f64> = w.iter().map(|&x| x as f64).collect();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| mask & bit(n, i, j) != 0)
        .collect();
    GameGraph::from_edges(&weights, &edges).expect("strongly connected by construction")
}

/// Random strongly connected graph on `n` vertices with weights in [−1, 1].
pub fn random_scc(n: usize, rng: &mut ChaCha8Rng) -> GameGraph {
    loop {
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|_| rng.gen_bool(0.4))
            .collect();
        if let Ok(g) = GameGraph::from_edges(&weights, &edges) {
            return g;
        }
    }
}

pub fn random_corpus(n: usize, count: usize, seed: u64) -> Vec<GameGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_scc(n, &mut rng)).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct ViResult {
    pub lower: f64,
    pub upper: f64,
    pub sweeps: usize,
}

impl ViResult {
    pub fn value(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Relative value iteration on the random-turn game with the aperiodicity
/// transform h ← (h + Th)/2. The gain lies in [min(Th − h), max(Th − h)] for
/// every h, so the bracket is a certified enclosure.
pub fn value_iteration(g: &GameGraph, p: f64, max_sweeps: usize, tol: f64) -> ViResult {
    let n = g.len();
    let mut h = vec![0.0; n];
    let mut th = vec![0.0; n];
    let mut res = ViResult { lower: f64::NEG_INFINITY, upper: f64::INFINITY, sweeps: 0 };
    for sweep in 1..=max_sweeps {
        for v in 0..n {
            let succ = g.successors(v);
            let hi = succ.iter().map(|&u| h[u]).fold(f64::NEG_INFINITY, f64::max);
            let lo = succ.iter().map(|&u| h[u]).fold(f64::INFINITY, f64::min);
            th[v] = g.weight(v) + p * hi + (1.0 - p) * lo;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in 0..n {
            let d = th[v] - h[v];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        res = ViResult { lower: lo.max(res.lower), upper: hi.min(res.upper), sweeps: sweep };
        if res.upper - res.lower < tol {
            break;
        }
        let anchor = 0.5 * (h[0] + th[0]);
        for v in 0..n {
            h[v] = 0.5 * (h[v] + th[v]) - anchor;
        }
    }
    res
}
