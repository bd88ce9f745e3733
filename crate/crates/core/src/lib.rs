//! Mean-payoff bidding games on strongly connected arenas: random-turn
//! solving, the strategy constructions that realise the random-turn value
//! under each payment scheme, a seeded simulator and per-step certificate
//! checkers for the resulting plays.

// `!(a < b)` is used on purpose so NaN fails the comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arena;
pub mod certify;
pub mod parity;
pub mod play;
pub mod shift;
pub mod solver;
pub mod strategy;

pub use arena::{
    energy_and_payoff, normalize_budgets, resolve_bidding, validate_graph, ArenaError, BudgetState,
    EnergyReport, GameGraph, Mechanism, RawGraph, RawVertex, Side, StepRecord, Vertex,
};
pub use certify::{certify_trace, CertifyError, CertifyReport, CheckKind, LedgerParams, Variant};
pub use parity::{decide_parity, parity_to_mean_payoff, ParityDecision, ParityError, ParityGame};
pub use play::{estimate_payoff, simulate, PayoffStats, PlayError, PlayTrace};
pub use solver::{
    build_random_turn, compute_potentials, equivalent_p, solve_mean_payoff, taxman_targets,
    value_curve, Mode, RandomTurnGame, SolverError, StochasticSolution,
};
pub use strategy::{StrategyError, StrategyHandle, StrategySpec};
