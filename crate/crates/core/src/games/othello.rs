//! 4x4 Othello (reversi) with standard flip rules.
//!
//! Action ids 0..16 are board cells in row-major order; action 16 is the
//! forced pass, legal only when the mover has no flipping placement. The
//! game ends when neither player has a flipping placement.

use super::{ActionId, Game, GameError, InfoState, PlayerId, ToMove};

pub const SIDE: usize = 4;
pub const CELLS: usize = SIDE * SIDE;
pub const PASS: ActionId = ActionId(CELLS as u8);

const DIRECTIONS: [(i8, i8); 8] =
    [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OthelloState {
    /// One bit per cell, indexed by player.
    discs: [u16; 2],
    to_move: u8,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Othello4;

impl OthelloState {
    fn occupied(&self) -> u16 {
        self.discs[0] | self.discs[1]
    }

    fn has(&self, player: usize, cell: usize) -> bool {
        self.discs[player] & (1 << cell) != 0
    }

    pub fn disc_counts(&self) -> [u32; 2] {
        [self.discs[0].count_ones(), self.discs[1].count_ones()]
    }
}

fn cell(r: usize, c: usize) -> usize {
    r * SIDE + c
}

/// Cells flipped by `player` placing at `(r, c)`; empty when the placement
/// is illegal.
fn flips_for(state: &OthelloState, player: usize, r: usize, c: usize) -> u16 {
    if state.occupied() & (1 << cell(r, c)) != 0 {
        return 0;
    }
    let opponent = 1 - player;
    let mut flips: u16 = 0;
    for (dr, dc) in DIRECTIONS {
        let mut line: u16 = 0;
        let (mut rr, mut cc) = (r as i8 + dr, c as i8 + dc);
        while (0..SIDE as i8).contains(&rr) && (0..SIDE as i8).contains(&cc) {
            let idx = cell(rr as usize, cc as usize);
            if state.has(opponent, idx) {
                line |= 1 << idx;
            } else if state.has(player, idx) {
                flips |= line;
                break;
            } else {
                break;
            }
            rr += dr;
            cc += dc;
        }
    }
    flips
}

fn placements(state: &OthelloState, player: usize) -> Vec<ActionId> {
    let mut out = Vec::new();
    for r in 0..SIDE {
        for c in 0..SIDE {
            if flips_for(state, player, r, c) != 0 {
                out.push(ActionId(cell(r, c) as u8));
            }
        }
    }
    out
}

impl Game for Othello4 {
    type State = OthelloState;

    fn name(&self) -> &'static str {
        "othello4"
    }

    fn initial_state(&self) -> OthelloState {
        // Standard diagonal start on the 2x2 center; player 0 moves first.
        let mut discs = [0u16; 2];
        discs[0] |= 1 << cell(1, 2);
        discs[0] |= 1 << cell(2, 1);
        discs[1] |= 1 << cell(1, 1);
        discs[1] |= 1 << cell(2, 2);
        OthelloState { discs, to_move: 0 }
    }

    fn to_move(&self, state: &OthelloState) -> ToMove {
        let mover = state.to_move as usize;
        if placements(state, mover).is_empty() && placements(state, 1 - mover).is_empty() {
            ToMove::Terminal
        } else {
            ToMove::Player(PlayerId(state.to_move))
        }
    }

    fn action_count(&self) -> usize {
        CELLS + 1
    }

    fn observation_len(&self) -> usize {
        2 * CELLS + 1
    }

    fn legal_actions(&self, state: &OthelloState) -> Result<Vec<ActionId>, GameError> {
        match self.to_move(state) {
            ToMove::Terminal => Err(GameError::TerminalState),
            _ => {
                let moves = placements(state, state.to_move as usize);
                if moves.is_empty() {
                    Ok(vec![PASS])
                } else {
                    Ok(moves)
                }
            }
        }
    }

    fn chance_outcomes(&self, _state: &OthelloState) -> Result<Vec<(ActionId, f64)>, GameError> {
        Err(GameError::NotChance)
    }

    fn apply_action(&self, state: &OthelloState, action: ActionId) -> Result<OthelloState, GameError> {
        if self.to_move(state) == ToMove::Terminal {
            return Err(GameError::TerminalState);
        }
        let mover = state.to_move as usize;
        let mut next = *state;
        next.to_move = 1 - state.to_move;
        if action == PASS {
            if placements(state, mover).is_empty() {
                return Ok(next);
            }
            return Err(GameError::IllegalAction { action, context: self.render(state) });
        }
        if action.index() >= CELLS {
            return Err(GameError::IllegalAction { action, context: self.render(state) });
        }
        let (r, c) = (action.index() / SIDE, action.index() % SIDE);
        let flips = flips_for(state, mover, r, c);
        if flips == 0 {
            return Err(GameError::IllegalAction { action, context: self.render(state) });
        }
        next.discs[mover] |= (1 << action.index()) | flips;
        next.discs[1 - mover] &= !flips;
        Ok(next)
    }

    fn terminal_payoff(&self, state: &OthelloState) -> Result<[f64; 2], GameError> {
        if self.to_move(state) != ToMove::Terminal {
            return Err(GameError::NotTerminal);
        }
        let [n0, n1] = state.disc_counts();
        let z = match n0.cmp(&n1) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => -1.0,
            std::cmp::Ordering::Equal => 0.0,
        };
        Ok([z, -z])
    }

    fn encode_observation(&self, state: &OthelloState, player: PlayerId) -> InfoState {
        // Board planes are relative to the side to move (mover's discs
        // first), so both observers of one state see identical planes; the
        // trailing flag says whether the observer is the one to move.
        let mover = state.to_move as usize;
        let mut features = Vec::with_capacity(2 * CELLS + 1);
        for plane_player in [mover, 1 - mover] {
            for idx in 0..CELLS {
                features.push(if state.has(plane_player, idx) { 1.0 } else { 0.0 });
            }
        }
        features.push(if player.index() == mover { 1.0 } else { 0.0 });
        InfoState::new(features)
    }

    fn info_key(&self, state: &OthelloState, player: PlayerId) -> super::InfoKey {
        // Perfect information: the information set is the full state.
        let obs = InfoState::new(vec![
            f32::from_bits(u32::from(state.discs[0])),
            f32::from_bits(u32::from(state.discs[1])),
            f32::from_bits(u32::from(state.to_move)),
        ]);
        super::InfoKey::from_observation(player, &obs)
    }

    fn render(&self, state: &OthelloState) -> String {
        let mut out = String::new();
        for r in 0..SIDE {
            for c in 0..SIDE {
                let idx = cell(r, c);
                out.push(if state.has(0, idx) {
                    'x'
                } else if state.has(1, idx) {
                    'o'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out.push_str(&format!("to_move: {}", state.to_move));
        out
    }
}
