//! Search quality against an exhaustive negamax oracle on 4x4 Othello.

use std::collections::HashMap;

use nasheq_core::games::{Game, Othello4, OthelloState, PlayerId, ToMove};
use nasheq_core::mcts::{search, SearchConfig, UniformEvaluator};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exact game value for the player to move, by memoized negamax.
fn negamax(game: &Othello4, state: &OthelloState, memo: &mut HashMap<OthelloState, f64>) -> f64 {
    if let Some(&v) = memo.get(state) {
        return v;
    }
    let v = match game.to_move(state) {
        ToMove::Terminal => unreachable!("negamax called on terminal state"),
        ToMove::Player(p) => {
            let mut best = f64::NEG_INFINITY;
            for action in game.legal_actions(state).unwrap() {
                let child = game.apply_action(state, action).unwrap();
                let child_value = match game.to_move(&child) {
                    ToMove::Terminal => game.terminal_payoff(&child).unwrap()[p.index()],
                    ToMove::Player(q) => {
                        let v = negamax(game, &child, memo);
                        if q == p {
                            v
                        } else {
                            -v
                        }
                    }
                    ToMove::Chance => unreachable!(),
                };
                best = best.max(child_value);
            }
            best
        }
        ToMove::Chance => unreachable!(),
    };
    memo.insert(*state, v);
    v
}

/// Value (for the mover at `state`) of playing `action` then optimally.
fn action_value(
    game: &Othello4,
    state: &OthelloState,
    action: nasheq_core::games::ActionId,
    memo: &mut HashMap<OthelloState, f64>,
) -> f64 {
    let mover = match game.to_move(state) {
        ToMove::Player(p) => p,
        _ => unreachable!(),
    };
    let child = game.apply_action(state, action).unwrap();
    match game.to_move(&child) {
        ToMove::Terminal => game.terminal_payoff(&child).unwrap()[mover.index()],
        ToMove::Player(q) => {
            let v = negamax(game, &child, memo);
            if q == mover {
                v
            } else {
                -v
            }
        }
        ToMove::Chance => unreachable!(),
    }
}

/// Height of the position's full subtree in plies.
fn height(game: &Othello4, state: &OthelloState, memo: &mut HashMap<OthelloState, u32>) -> u32 {
    if game.to_move(state) == ToMove::Terminal {
        return 0;
    }
    if let Some(&h) = memo.get(state) {
        return h;
    }
    let h = 1 + game
        .legal_actions(state)
        .unwrap()
        .into_iter()
        .map(|a| height(game, &game.apply_action(state, a).unwrap(), memo))
        .max()
        .unwrap();
    memo.insert(*state, h);
    h
}

fn reachable_states(game: &Othello4) -> Vec<OthelloState> {
    let mut seen = HashMap::new();
    let mut stack = vec![game.initial_state()];
    while let Some(state) = stack.pop() {
        if seen.contains_key(&state) {
            continue;
        }
        seen.insert(state, ());
        if game.to_move(&state) == ToMove::Terminal {
            continue;
        }
        for action in game.legal_actions(&state).unwrap() {
            stack.push(game.apply_action(&state, action).unwrap());
        }
    }
    seen.into_keys().collect()
}

/// A 400-simulation search must find a forced win that is two plies out.
#[test]
fn search_finds_a_forced_win_two_plies_out() {
    let game = Othello4;
    let mut height_memo = HashMap::new();
    let mut value_memo = HashMap::new();
    let mut states = reachable_states(&game);
    states.sort_by_key(|s| s.disc_counts()[0]);

    let position = states
        .iter()
        .find(|s| {
            game.to_move(s) != ToMove::Terminal
                && height(&game, s, &mut height_memo) == 2
                && negamax(&game, s, &mut value_memo) == 1.0
                && game.legal_actions(s).unwrap().len() >= 2
        })
        .copied()
        .expect("a forced win in two plies exists");

    let cfg = SearchConfig { simulations: 400, temperature: 0.0, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let policy = search(&game, &position, &mut UniformEvaluator, &cfg, &mut rng);
    let chosen = nasheq_core::games::ActionId(
        policy.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0 as u8,
    );
    let v = action_value(&game, &position, chosen, &mut value_memo);
    assert_eq!(v, 1.0, "search picked a non-winning move in a forced win");
}

/// Spot-check near-endgame play quality on a sample of shallow positions;
/// the acceptance suite runs the full enumeration.
#[test]
fn search_is_minimax_optimal_on_sampled_shallow_positions() {
    let game = Othello4;
    let mut height_memo = HashMap::new();
    let mut value_memo = HashMap::new();
    let states = reachable_states(&game);
    let shallow: Vec<OthelloState> = states
        .into_iter()
        .filter(|s| {
            game.to_move(s) != ToMove::Terminal && {
                let h = height(&game, s, &mut height_memo);
                (1..=4).contains(&h)
            }
        })
        .collect();
    assert!(!shallow.is_empty());

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let cfg = SearchConfig { simulations: 1000, temperature: 0.0, ..Default::default() };
    let sample = 120.min(shallow.len());
    let mut optimal = 0usize;
    for state in shallow.iter().take(sample) {
        let optimum = negamax(&game, state, &mut value_memo);
        let policy = search(&game, state, &mut UniformEvaluator, &cfg, &mut rng);
        let chosen = nasheq_core::games::ActionId(
            policy.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0 as u8,
        );
        if action_value(&game, state, chosen, &mut value_memo) == optimum {
            optimal += 1;
        }
    }
    let rate = optimal as f64 / sample as f64;
    assert!(rate >= 0.99, "only {optimal}/{sample} optimal ({rate})");
}
