//! One-shot matrix games, cast as two-ply sequential games where the second
//! player cannot observe the first player's choice. This lets the self-play
//! agents and the exact evaluator share one interface with the extensive
//! games, while fictitious play uses the payoff matrix directly.

use super::{ActionId, Game, GameError, InfoState, PlayerId, ToMove};

#[derive(Debug, Clone)]
pub struct NormalFormGame {
    name: &'static str,
    /// Row player's payoffs; the column player receives the negation.
    matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NormalState {
    first: Option<ActionId>,
    second: Option<ActionId>,
}

impl NormalFormGame {
    /// Matching Pennies: the row player wins +1 when both coins match.
    pub fn matching_pennies() -> Self {
        NormalFormGame {
            name: "matching_pennies",
            matrix: vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
        }
    }

    /// Rock-Paper-Scissors with win = +1, loss = -1, tie = 0.
    pub fn rps() -> Self {
        NormalFormGame {
            name: "rps",
            matrix: vec![
                vec![0.0, -1.0, 1.0],
                vec![1.0, 0.0, -1.0],
                vec![-1.0, 1.0, 0.0],
            ],
        }
    }
}

impl Game for NormalFormGame {
    type State = NormalState;

    fn name(&self) -> &'static str {
        self.name
    }

    fn initial_state(&self) -> NormalState {
        NormalState { first: None, second: None }
    }

    fn to_move(&self, state: &NormalState) -> ToMove {
        match (state.first, state.second) {
            (None, _) => ToMove::Player(PlayerId::P0),
            (Some(_), None) => ToMove::Player(PlayerId::P1),
            (Some(_), Some(_)) => ToMove::Terminal,
        }
    }

    fn action_count(&self) -> usize {
        self.matrix.len()
    }

    fn observation_len(&self) -> usize {
        1
    }

    fn legal_actions(&self, state: &NormalState) -> Result<Vec<ActionId>, GameError> {
        match self.to_move(state) {
            ToMove::Terminal => Err(GameError::TerminalState),
            _ => Ok((0..self.matrix.len() as u8).map(ActionId).collect()),
        }
    }

    fn chance_outcomes(&self, _state: &NormalState) -> Result<Vec<(ActionId, f64)>, GameError> {
        Err(GameError::NotChance)
    }

    fn apply_action(&self, state: &NormalState, action: ActionId) -> Result<NormalState, GameError> {
        if action.index() >= self.matrix.len() {
            return Err(GameError::IllegalAction { action, context: self.render(state) });
        }
        match self.to_move(state) {
            ToMove::Player(PlayerId(0)) => {
                Ok(NormalState { first: Some(action), second: None })
            }
            ToMove::Player(_) => Ok(NormalState { first: state.first, second: Some(action) }),
            _ => Err(GameError::TerminalState),
        }
    }

    fn terminal_payoff(&self, state: &NormalState) -> Result<[f64; 2], GameError> {
        match (state.first, state.second) {
            (Some(a0), Some(a1)) => {
                let row = self.matrix[a0.index()][a1.index()];
                Ok([row, -row])
            }
            _ => Err(GameError::NotTerminal),
        }
    }

    fn encode_observation(&self, _state: &NormalState, _player: PlayerId) -> InfoState {
        // Neither player observes anything before the one-shot decision.
        InfoState::new(vec![1.0])
    }

    fn payoff_matrix(&self) -> Option<Vec<Vec<f64>>> {
        Some(self.matrix.clone())
    }

    fn render(&self, state: &NormalState) -> String {
        format!("{} first={:?} second={:?}", self.name, state.first, state.second)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies_payoffs() {
        let game = NormalFormGame::matching_pennies();
        let heads_heads = game
            .apply_action(&game.apply_action(&game.initial_state(), ActionId(0)).unwrap(), ActionId(0))
            .unwrap();
        assert_eq!(game.to_move(&heads_heads), ToMove::Terminal);
        assert_eq!(game.terminal_payoff(&heads_heads).unwrap(), [1.0, -1.0]);
        assert_eq!(game.payoff_matrix().unwrap(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn rps_matrix_is_skew_symmetric() {
        let m = NormalFormGame::rps().payoff_matrix().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m[i][j], -m[j][i]);
            }
        }
        // Paper beats rock.
        assert_eq!(m[1][0], 1.0);
    }

    #[test]
    fn both_players_see_three_actions_in_rps() {
        let game = NormalFormGame::rps();
        let root = game.initial_state();
        assert_eq!(game.legal_actions(&root).unwrap().len(), 3);
        let mid = game.apply_action(&root, ActionId(2)).unwrap();
        assert_eq!(game.legal_actions(&mid).unwrap().len(), 3);
    }

    #[test]
    fn second_player_cannot_observe_first_move() {
        let game = NormalFormGame::matching_pennies();
        let root = game.initial_state();
        let after_heads = game.apply_action(&root, ActionId(0)).unwrap();
        let after_tails = game.apply_action(&root, ActionId(1)).unwrap();
        assert_eq!(
            game.encode_observation(&after_heads, PlayerId::P1),
            game.encode_observation(&after_tails, PlayerId::P1)
        );
        assert_eq!(
            game.info_key(&after_heads, PlayerId::P1),
            game.info_key(&after_tails, PlayerId::P1)
        );
    }

    #[test]
    fn zero_sum_everywhere() {
        let game = NormalFormGame::rps();
        for a0 in 0..3u8 {
            for a1 in 0..3u8 {
                let s = game
                    .apply_action(
                        &game.apply_action(&game.initial_state(), ActionId(a0)).unwrap(),
                        ActionId(a1),
                    )
                    .unwrap();
                let p = game.terminal_payoff(&s).unwrap();
                assert_eq!(p[0] + p[1], 0.0);
            }
        }
    }
}
