use std::collections::HashMap;

use crate::games::{ActionId, Game, InfoKey, PlayerId};

/// A strategy profile entry: maps a player's information sets to mixed
/// strategies. Implementations may memoize internally, hence `&mut self`.
pub trait StrategyOracle<G: Game> {
    /// Distribution over `legal`, aligned index-for-index with it.
    fn strategy(
        &mut self,
        game: &G,
        state: &G::State,
        player: PlayerId,
        legal: &[ActionId],
    ) -> Vec<f64>;
}

/// Uniform over legal actions everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformOracle;

impl<G: Game> StrategyOracle<G> for UniformOracle {
    fn strategy(
        &mut self,
        _game: &G,
        _state: &G::State,
        _player: PlayerId,
        legal: &[ActionId],
    ) -> Vec<f64> {
        vec![1.0 / legal.len() as f64; legal.len()]
    }
}

/// Plays one fixed distribution over action ids at every information set,
/// masked and renormalized to the legal actions. Handy for pure strategies
/// and fictitious-play averages.
#[derive(Debug, Clone)]
pub struct FixedStrategyOracle {
    pub dist: Vec<f64>,
}

impl FixedStrategyOracle {
    pub fn pure(action: ActionId, action_count: usize) -> Self {
        let mut dist = vec![0.0; action_count];
        dist[action.index()] = 1.0;
        FixedStrategyOracle { dist }
    }
}

impl<G: Game> StrategyOracle<G> for FixedStrategyOracle {
    fn strategy(
        &mut self,
        _game: &G,
        _state: &G::State,
        _player: PlayerId,
        legal: &[ActionId],
    ) -> Vec<f64> {
        mask_renormalize(&self.dist, legal)
    }
}

/// Explicit per-information-set table over full action-id vectors.
/// Information sets missing from the table play uniform.
#[derive(Debug, Clone, Default)]
pub struct TabularOracle {
    table: HashMap<InfoKey, Vec<f64>>,
}

impl TabularOracle {
    pub fn new() -> Self {
        TabularOracle { table: HashMap::new() }
    }

    pub fn insert(&mut self, key: InfoKey, dist: Vec<f64>) {
        self.table.insert(key, dist);
    }

    pub fn insert_pure(&mut self, key: InfoKey, action: ActionId, action_count: usize) {
        let mut dist = vec![0.0; action_count];
        dist[action.index()] = 1.0;
        self.table.insert(key, dist);
    }

    pub fn get(&self, key: &InfoKey) -> Option<&Vec<f64>> {
        self.table.get(key)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl<G: Game> StrategyOracle<G> for TabularOracle {
    fn strategy(
        &mut self,
        game: &G,
        state: &G::State,
        player: PlayerId,
        legal: &[ActionId],
    ) -> Vec<f64> {
        match self.table.get(&game.info_key(state, player)) {
            Some(dist) => mask_renormalize(dist, legal),
            None => vec![1.0 / legal.len() as f64; legal.len()],
        }
    }
}

/// Restricts a full action-id distribution to the legal actions and
/// renormalizes; falls back to uniform when no mass remains.
pub fn mask_renormalize(dist: &[f64], legal: &[ActionId]) -> Vec<f64> {
    let mut out: Vec<f64> = legal
        .iter()
        .map(|a| dist.get(a.index()).copied().unwrap_or(0.0).max(0.0))
        .collect();
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        for v in &mut out {
            *v /= sum;
        }
    } else {
        out.fill(1.0 / legal.len() as f64);
    }
    out
}
