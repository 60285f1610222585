//! Exact evaluation of strategy profiles: expected payoffs, best-response
//! values by full game-tree traversal, and exploitability — the framework's
//! ground-truth convergence metric.

mod oracle;
mod tree;

pub use oracle::{
    mask_renormalize, FixedStrategyOracle, StrategyOracle, TabularOracle, UniformOracle,
};
pub use tree::{best_response_value, expected_payoff_tree};

use crate::games::{Game, PlayerId};

/// Best-response values against each side of a profile and their average.
/// For zero-sum games `epsilon >= 0`, with equality exactly at a Nash
/// equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploitabilityReport {
    /// Player 0's best-response value against the profile's player-1 strategy.
    pub br_value_p0: f64,
    /// Player 1's best-response value against the profile's player-0 strategy.
    pub br_value_p1: f64,
    pub epsilon: f64,
}

/// Expected payoff of the profile for `player`, exact. One-shot matrix games
/// evaluate the bilinear form directly; everything else walks the tree.
pub fn expected_payoff<G: Game>(
    game: &G,
    p0: &mut impl StrategyOracle<G>,
    p1: &mut impl StrategyOracle<G>,
    player: PlayerId,
) -> f64 {
    if let Some(matrix) = game.payoff_matrix() {
        let s0 = root_strategy(game, p0, PlayerId::P0);
        let s1 = root_strategy(game, p1, PlayerId::P1);
        let mut v = 0.0;
        for (a, row) in matrix.iter().enumerate() {
            for (b, &payoff) in row.iter().enumerate() {
                v += s0[a] * s1[b] * payoff;
            }
        }
        return if player == PlayerId::P0 { v } else { -v };
    }
    expected_payoff_tree(game, p0, p1, player)
}

/// Exploitability of a profile: the average of both players' exact
/// best-response values against it.
pub fn exploitability<G: Game>(
    game: &G,
    p0: &mut impl StrategyOracle<G>,
    p1: &mut impl StrategyOracle<G>,
) -> ExploitabilityReport {
    let (br_value_p0, _) = best_response_value(game, p1, PlayerId::P0);
    let (br_value_p1, _) = best_response_value(game, p0, PlayerId::P1);
    ExploitabilityReport {
        br_value_p0,
        br_value_p1,
        epsilon: (br_value_p0 + br_value_p1) / 2.0,
    }
}

/// Exploitability of a one-shot matrix game profile given explicit mixed
/// strategies; the algebraic fast path used by fictitious play.
pub fn exploitability_matrix(
    matrix: &[Vec<f64>],
    strat0: &[f64],
    strat1: &[f64],
) -> ExploitabilityReport {
    let br_value_p0 = matrix
        .iter()
        .map(|row| row.iter().zip(strat1).map(|(m, s)| m * s).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let cols = matrix[0].len();
    let br_value_p1 = (0..cols)
        .map(|b| strat0.iter().enumerate().map(|(a, s)| -matrix[a][b] * s).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    ExploitabilityReport {
        br_value_p0,
        br_value_p1,
        epsilon: (br_value_p0 + br_value_p1) / 2.0,
    }
}

/// Plays one full game with each side drawn from its oracle (chance nodes
/// sampled), returning the terminal payoffs. Used for Monte Carlo
/// cross-checks of the exact evaluator and for head-to-head comparisons.
pub fn rollout_profile<G: Game>(
    game: &G,
    p0: &mut impl StrategyOracle<G>,
    p1: &mut impl StrategyOracle<G>,
    rng: &mut impl rand::Rng,
) -> [f64; 2] {
    let mut state = game.initial_state();
    loop {
        match game.to_move(&state) {
            crate::games::ToMove::Terminal => {
                return game.terminal_payoff(&state).expect("terminal");
            }
            crate::games::ToMove::Chance => {
                state = crate::games::sample_chance(game, &state, rng).expect("chance");
            }
            crate::games::ToMove::Player(p) => {
                let legal = game.legal_actions(&state).expect("decision node");
                let dist = if p == PlayerId::P0 {
                    p0.strategy(game, &state, p, &legal)
                } else {
                    p1.strategy(game, &state, p, &legal)
                };
                let mut roll: f64 = rng.gen();
                let mut chosen = *legal.last().expect("non-empty");
                for (a, pr) in legal.iter().zip(&dist) {
                    roll -= pr;
                    if roll <= 0.0 {
                        chosen = *a;
                        break;
                    }
                }
                state = game.apply_action(&state, chosen).expect("legal");
            }
        }
    }
}

/// The strategy an oracle plays at `player`'s first decision point.
fn root_strategy<G: Game>(
    game: &G,
    oracle: &mut impl StrategyOracle<G>,
    player: PlayerId,
) -> Vec<f64> {
    let mut state = game.initial_state();
    loop {
        match game.to_move(&state) {
            crate::games::ToMove::Player(p) if p == player => {
                let legal = game.legal_actions(&state).expect("decision node");
                let dist = oracle.strategy(game, &state, player, &legal);
                let mut full = vec![0.0; game.action_count()];
                for (a, pr) in legal.iter().zip(dist) {
                    full[a.index()] = pr;
                }
                return full;
            }
            crate::games::ToMove::Player(_) => {
                let legal = game.legal_actions(&state).expect("decision node");
                state = game.apply_action(&state, legal[0]).expect("legal");
            }
            _ => panic!("root_strategy is only defined for one-shot matrix games"),
        }
    }
}
