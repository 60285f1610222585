//! Two-player zero-sum game abstraction and the four bundled games.

mod leduc;
mod normal_form;
mod othello;

pub use leduc::{Leduc, LeducState};
pub use normal_form::{NormalFormGame, NormalState};
pub use othello::{Othello4, OthelloState};

use rand::Rng;
use thiserror::Error;

/// One of the two players. `PlayerId(0)` moves first in sequential games.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PlayerId(pub u8);

impl PlayerId {
    pub const P0: PlayerId = PlayerId(0);
    pub const P1: PlayerId = PlayerId(1);

    pub fn opponent(self) -> PlayerId {
        PlayerId(1 - self.0)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Index into a game's action space. Chance nodes reuse the type to index
/// outcomes (card deals), which live outside the player action range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionId(pub u8);

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Who acts at a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToMove {
    Player(PlayerId),
    Chance,
    Terminal,
}

/// A player's observation of a state: fixed-length feature vector fed to
/// networks. Two states a player cannot distinguish encode identically.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoState {
    pub features: Vec<f32>,
}

impl InfoState {
    pub fn new(features: Vec<f32>) -> Self {
        InfoState { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Hashable identifier of an information set. Built from the observing
/// player and their observation, so keys from different players never
/// collide.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InfoKey(Vec<u32>);

impl InfoKey {
    pub fn from_observation(player: PlayerId, obs: &InfoState) -> Self {
        let mut bits = Vec::with_capacity(obs.features.len() + 1);
        bits.push(u32::from(player.0));
        bits.extend(obs.features.iter().map(|f| f.to_bits()));
        InfoKey(bits)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("action {action:?} is illegal at state `{context}`")]
    IllegalAction { action: ActionId, context: String },
    #[error("operation requires a non-terminal state")]
    TerminalState,
    #[error("operation requires a terminal state")]
    NotTerminal,
    #[error("operation requires a chance node")]
    NotChance,
    #[error("unknown game key `{0}`")]
    UnknownGame(String),
}

/// A finite two-player zero-sum game, possibly with chance nodes and
/// imperfect information.
///
/// States are immutable values; every operation is a pure function of its
/// arguments, so states can be shared freely across threads.
pub trait Game: Clone + Send + Sync {
    type State: Clone + PartialEq + Eq + std::hash::Hash + Send + Sync;

    fn name(&self) -> &'static str;

    fn initial_state(&self) -> Self::State;

    fn to_move(&self, state: &Self::State) -> ToMove;

    /// Size of the player action space (chance outcomes excluded).
    fn action_count(&self) -> usize;

    /// Length of [`Game::encode_observation`]'s feature vector.
    fn observation_len(&self) -> usize;

    /// Legal actions for the player to move. Errors on terminal or chance
    /// states.
    fn legal_actions(&self, state: &Self::State) -> Result<Vec<ActionId>, GameError>;

    /// Outcomes and probabilities at a chance node.
    fn chance_outcomes(&self, state: &Self::State) -> Result<Vec<(ActionId, f64)>, GameError>;

    /// Successor state; rejects illegal actions. Accepts chance outcomes at
    /// chance nodes.
    fn apply_action(&self, state: &Self::State, action: ActionId)
        -> Result<Self::State, GameError>;

    /// Zero-sum terminal returns, indexed by player.
    fn terminal_payoff(&self, state: &Self::State) -> Result<[f64; 2], GameError>;

    /// Feature encoding of `state` as observed by `player`. Only defined for
    /// non-terminal states.
    fn encode_observation(&self, state: &Self::State, player: PlayerId) -> InfoState;

    /// Identifier of the information set containing `state` from `player`'s
    /// point of view.
    fn info_key(&self, state: &Self::State, player: PlayerId) -> InfoKey {
        InfoKey::from_observation(player, &self.encode_observation(state, player))
    }

    /// Row player's payoff matrix, for one-shot matrix games only.
    fn payoff_matrix(&self) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// Human-readable dump of a state for logs.
    fn render(&self, state: &Self::State) -> String;
}

/// Draws an outcome at a chance node according to its distribution.
pub fn sample_chance<G: Game>(
    game: &G,
    state: &G::State,
    rng: &mut impl Rng,
) -> Result<G::State, GameError> {
    let outcomes = game.chance_outcomes(state)?;
    let mut roll: f64 = rng.gen();
    for (action, prob) in &outcomes {
        roll -= prob;
        if roll <= 0.0 {
            return game.apply_action(state, *action);
        }
    }
    let (last, _) = outcomes.last().expect("chance node has outcomes");
    game.apply_action(state, *last)
}

/// The four bundled games, selectable by string key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameKind {
    MatchingPennies,
    Rps,
    Othello4,
    Leduc,
}

impl GameKind {
    pub fn from_key(key: &str) -> Result<Self, GameError> {
        match key {
            "matching_pennies" => Ok(GameKind::MatchingPennies),
            "rps" => Ok(GameKind::Rps),
            "othello4" => Ok(GameKind::Othello4),
            "leduc" => Ok(GameKind::Leduc),
            other => Err(GameError::UnknownGame(other.into())),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            GameKind::MatchingPennies => "matching_pennies",
            GameKind::Rps => "rps",
            GameKind::Othello4 => "othello4",
            GameKind::Leduc => "leduc",
        }
    }

    pub const ALL: [GameKind; 4] =
        [GameKind::MatchingPennies, GameKind::Rps, GameKind::Othello4, GameKind::Leduc];
}
