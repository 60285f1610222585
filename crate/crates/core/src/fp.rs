//! Classical fictitious play on one-shot matrix games: both players
//! simultaneously best-respond to the opponent's empirical average strategy
//! each iteration.

use thiserror::Error;

use crate::eval::exploitability_matrix;
use crate::games::{ActionId, Game};

#[derive(Debug, Error)]
pub enum FpError {
    #[error("fictitious play requires a one-shot matrix game")]
    NotNormalForm,
}

/// Cumulative best-response counts per player plus the iteration counter.
#[derive(Debug, Clone)]
pub struct FpState {
    pub counts: [Vec<u64>; 2],
    pub iteration: u64,
}

impl FpState {
    pub fn new(actions: usize) -> Self {
        FpState { counts: [vec![0; actions], vec![0; actions]], iteration: 0 }
    }

    /// Empirical average strategy of `player`: counts normalized by the
    /// iteration count (uniformly zero before the first iteration).
    pub fn average(&self, player: usize) -> Vec<f64> {
        if self.iteration == 0 {
            return vec![0.0; self.counts[player].len()];
        }
        self.counts[player]
            .iter()
            .map(|&c| c as f64 / self.iteration as f64)
            .collect()
    }
}

/// Exact pure best response of the row player against a column mixture:
/// `argmax_a Σ_b M[a][b]·opp[b]`, ties toward the lowest action id.
pub fn best_response_pure(matrix: &[Vec<f64>], opponent_avg: &[f64]) -> ActionId {
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (a, row) in matrix.iter().enumerate() {
        let v: f64 = row.iter().zip(opponent_avg).map(|(m, p)| m * p).sum();
        if v > best.0 {
            best = (v, a);
        }
    }
    ActionId(best.1 as u8)
}

/// Column player's pure best response against a row mixture (the column
/// player's payoff is the matrix negated).
pub fn best_response_pure_column(matrix: &[Vec<f64>], row_avg: &[f64]) -> ActionId {
    let cols = matrix[0].len();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for b in 0..cols {
        let v: f64 = row_avg.iter().enumerate().map(|(a, p)| -matrix[a][b] * p).sum();
        if v > best.0 {
            best = (v, b);
        }
    }
    ActionId(best.1 as u8)
}

/// One trace row per iteration: the running averages and their
/// exploitability.
#[derive(Debug, Clone)]
pub struct FpTraceRow {
    pub iteration: u64,
    pub avg: [Vec<f64>; 2],
    pub exploitability: f64,
}

/// Runs fictitious play for `iterations` rounds in Brown's alternating
/// formulation: each iteration the row player best-responds to the column
/// player's running average, then the column player best-responds to the
/// just-updated row average. Deterministic: ties break toward the lowest
/// action id, starting from zero counts (the first response is the
/// tie-break action).
pub fn run_fp<G: Game>(game: &G, iterations: u64) -> Result<Vec<FpTraceRow>, FpError> {
    let matrix = game.payoff_matrix().ok_or(FpError::NotNormalForm)?;
    let mut state = FpState::new(game.action_count());
    let mut trace = Vec::with_capacity(iterations as usize);
    for _ in 0..iterations {
        let br0 = best_response_pure(&matrix, &state.average(1));
        state.counts[0][br0.index()] += 1;
        let mut avg0: Vec<f64> = state.counts[0]
            .iter()
            .map(|&c| c as f64 / (state.iteration + 1) as f64)
            .collect();
        let br1 = best_response_pure_column(&matrix, &avg0);
        state.counts[1][br1.index()] += 1;
        state.iteration += 1;

        avg0 = state.average(0);
        let avg1 = state.average(1);
        let report = exploitability_matrix(&matrix, &avg0, &avg1);
        trace.push(FpTraceRow {
            iteration: state.iteration,
            avg: [avg0, avg1],
            exploitability: report.epsilon,
        });
    }
    Ok(trace)
}
