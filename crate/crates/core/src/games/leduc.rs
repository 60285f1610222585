//! Modified Leduc Hold'em.
//!
//! Six-card deck (3 ranks x 2 suits), one private card each, one public card
//! revealed between the two betting rounds. Both players ante 1 chip; the
//! fixed bet size is 2 in both rounds with at most two raises per round.
//! Folding ends the hand immediately and is only offered against an
//! outstanding bet. Showdown: a private card pairing the public card wins,
//! otherwise the higher rank wins and equal ranks split.
//!
//! Player actions are `fold = 0`, `call = 1` (a check when nothing is
//! owed), `raise = 2`. Chance actions are card ids `0..6`.

use super::{ActionId, Game, GameError, InfoState, PlayerId, ToMove};

pub const FOLD: ActionId = ActionId(0);
pub const CALL: ActionId = ActionId(1);
pub const RAISE: ActionId = ActionId(2);

pub const DECK: u8 = 6;
const UNDEALT: u8 = DECK;
const ANTE: u8 = 1;
const BET: u8 = 2;
const MAX_RAISES: u8 = 2;

fn rank(card: u8) -> u8 {
    card / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Stage {
    DealHand0,
    DealHand1,
    Betting,
    DealPublic,
    Folded(u8),
    Showdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LeducState {
    stage: Stage,
    hands: [u8; 2],
    public: u8,
    round: u8,
    to_act: u8,
    raises: u8,
    /// Actions taken this round per player; doubles as the bet-history slot.
    acted: [u8; 2],
    /// Chips contributed by each player, antes included.
    pot: [u8; 2],
    /// Bet-history bits, indexed `((player*2 + round)*2 + slot)*2 + action`
    /// with `action` 0 = call, 1 = raise. Folds end the hand and are not
    /// recorded.
    history: u16,
}

impl LeducState {
    fn owed(&self, player: usize) -> bool {
        self.pot[1 - player] > self.pot[player]
    }

    pub fn pot_contributions(&self) -> [u8; 2] {
        self.pot
    }

    fn history_bit(player: usize, round: u8, slot: u8, raise: bool) -> u16 {
        let idx = (((player as u16 * 2) + u16::from(round)) * 2 + u16::from(slot)) * 2
            + u16::from(raise);
        1 << idx
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Leduc;

impl Leduc {
    fn deal_done(&self, state: &LeducState, card: u8) -> LeducState {
        let mut next = *state;
        match state.stage {
            Stage::DealHand0 => {
                next.hands[0] = card;
                next.stage = Stage::DealHand1;
            }
            Stage::DealHand1 => {
                next.hands[1] = card;
                next.stage = Stage::Betting;
            }
            Stage::DealPublic => {
                next.public = card;
                next.stage = Stage::Betting;
                next.round = 1;
                next.to_act = 0;
                next.raises = 0;
                next.acted = [0, 0];
            }
            _ => unreachable!("deal_done on non-chance stage"),
        }
        next
    }

    fn remaining_cards(&self, state: &LeducState) -> Vec<u8> {
        (0..DECK)
            .filter(|&c| c != state.hands[0] && c != state.hands[1] && c != state.public)
            .collect()
    }
}

impl Game for Leduc {
    type State = LeducState;

    fn name(&self) -> &'static str {
        "leduc"
    }

    fn initial_state(&self) -> LeducState {
        LeducState {
            stage: Stage::DealHand0,
            hands: [UNDEALT, UNDEALT],
            public: UNDEALT,
            round: 0,
            to_act: 0,
            raises: 0,
            acted: [0, 0],
            pot: [ANTE, ANTE],
            history: 0,
        }
    }

    fn to_move(&self, state: &LeducState) -> ToMove {
        match state.stage {
            Stage::DealHand0 | Stage::DealHand1 | Stage::DealPublic => ToMove::Chance,
            Stage::Betting => ToMove::Player(PlayerId(state.to_act)),
            Stage::Folded(_) | Stage::Showdown => ToMove::Terminal,
        }
    }

    fn action_count(&self) -> usize {
        3
    }

    fn observation_len(&self) -> usize {
        22
    }

    fn legal_actions(&self, state: &LeducState) -> Result<Vec<ActionId>, GameError> {
        match self.to_move(state) {
            ToMove::Terminal => Err(GameError::TerminalState),
            ToMove::Chance => Err(GameError::NotChance),
            ToMove::Player(p) => {
                let mut out = Vec::with_capacity(3);
                if state.owed(p.index()) {
                    out.push(FOLD);
                }
                out.push(CALL);
                if state.raises < MAX_RAISES {
                    out.push(RAISE);
                }
                Ok(out)
            }
        }
    }

    fn chance_outcomes(&self, state: &LeducState) -> Result<Vec<(ActionId, f64)>, GameError> {
        match state.stage {
            Stage::DealHand0 | Stage::DealHand1 | Stage::DealPublic => {
                let cards = self.remaining_cards(state);
                let p = 1.0 / cards.len() as f64;
                Ok(cards.into_iter().map(|c| (ActionId(c), p)).collect())
            }
            _ => Err(GameError::NotChance),
        }
    }

    fn apply_action(&self, state: &LeducState, action: ActionId) -> Result<LeducState, GameError> {
        match self.to_move(state) {
            ToMove::Terminal => Err(GameError::TerminalState),
            ToMove::Chance => {
                let card = action.0;
                if card >= DECK || !self.remaining_cards(state).contains(&card) {
                    return Err(GameError::IllegalAction { action, context: self.render(state) });
                }
                Ok(self.deal_done(state, card))
            }
            ToMove::Player(p) => {
                if !self.legal_actions(state)?.contains(&action) {
                    return Err(GameError::IllegalAction { action, context: self.render(state) });
                }
                let actor = p.index();
                let other = 1 - actor;
                let mut next = *state;
                match action {
                    FOLD => {
                        next.stage = Stage::Folded(actor as u8);
                        return Ok(next);
                    }
                    CALL => {
                        let was_owed = state.owed(actor);
                        let opponent_acted = state.acted[other] > 0;
                        next.pot[actor] = state.pot[other];
                        next.history |= LeducState::history_bit(
                            actor,
                            state.round,
                            state.acted[actor],
                            false,
                        );
                        next.acted[actor] += 1;
                        if was_owed || opponent_acted {
                            // Round closed: reveal the public card or show down.
                            if state.round == 0 {
                                next.stage = Stage::DealPublic;
                            } else {
                                next.stage = Stage::Showdown;
                            }
                        } else {
                            next.to_act = other as u8;
                        }
                        Ok(next)
                    }
                    RAISE => {
                        next.pot[actor] = state.pot[other] + BET;
                        next.history |= LeducState::history_bit(
                            actor,
                            state.round,
                            state.acted[actor],
                            true,
                        );
                        next.acted[actor] += 1;
                        next.raises += 1;
                        next.to_act = other as u8;
                        Ok(next)
                    }
                    _ => unreachable!("legal_actions only emits fold/call/raise"),
                }
            }
        }
    }

    fn terminal_payoff(&self, state: &LeducState) -> Result<[f64; 2], GameError> {
        match state.stage {
            Stage::Folded(folder) => {
                let f = folder as usize;
                let lost = f64::from(state.pot[f]);
                let mut payoff = [0.0; 2];
                payoff[f] = -lost;
                payoff[1 - f] = lost;
                Ok(payoff)
            }
            Stage::Showdown => {
                let pub_rank = rank(state.public);
                let ranks = [rank(state.hands[0]), rank(state.hands[1])];
                let winner = if ranks[0] == pub_rank {
                    Some(0)
                } else if ranks[1] == pub_rank {
                    Some(1)
                } else {
                    match ranks[0].cmp(&ranks[1]) {
                        std::cmp::Ordering::Greater => Some(0),
                        std::cmp::Ordering::Less => Some(1),
                        std::cmp::Ordering::Equal => None,
                    }
                };
                match winner {
                    None => Ok([0.0, 0.0]),
                    Some(w) => {
                        let won = f64::from(state.pot[1 - w]);
                        let mut payoff = [0.0; 2];
                        payoff[w] = won;
                        payoff[1 - w] = -won;
                        Ok(payoff)
                    }
                }
            }
            _ => Err(GameError::NotTerminal),
        }
    }

    fn encode_observation(&self, state: &LeducState, player: PlayerId) -> InfoState {
        let me = player.index();
        let mut features = vec![0.0f32; 22];
        // 16 bet-history bits, player axis relative to the observer
        // (own actions first), then round, slot, action in {call, raise}.
        for (rel, actual) in [(0usize, me), (1, 1 - me)] {
            for round in 0..2u8 {
                for slot in 0..2u8 {
                    for (ai, is_raise) in [(0usize, false), (1, true)] {
                        let bit = LeducState::history_bit(actual, round, slot, is_raise);
                        if state.history & bit != 0 {
                            let idx =
                                ((rel * 2 + round as usize) * 2 + slot as usize) * 2 + ai;
                            features[idx] = 1.0;
                        }
                    }
                }
            }
        }
        // 6-card k-of-n vector: own private card plus the public card once
        // revealed.
        if state.hands[me] < DECK {
            features[16 + state.hands[me] as usize] = 1.0;
        }
        if state.public < DECK {
            features[16 + state.public as usize] = 1.0;
        }
        InfoState::new(features)
    }

    fn render(&self, state: &LeducState) -> String {
        let card = |c: u8| {
            if c >= DECK {
                "?".to_string()
            } else {
                format!("{}{}", ["J", "Q", "K"][rank(c) as usize], ["a", "b"][(c % 2) as usize])
            }
        };
        format!(
            "leduc {:?} round={} hands=[{},{}] public={} pot=[{},{}] raises={} to_act={}",
            state.stage,
            state.round,
            card(state.hands[0]),
            card(state.hands[1]),
            card(state.public),
            state.pot[0],
            state.pot[1],
            state.raises,
            state.to_act,
        )
    }
}
