//! Full-game traversal: explicit DAG construction (merging transpositions),
//! counterfactual reach propagation, and the belief-weighted best-response
//! walk that maximizes per information set rather than per state.

use std::collections::HashMap;

use crate::eval::oracle::{StrategyOracle, TabularOracle};
use crate::games::{ActionId, Game, InfoKey, PlayerId, ToMove};

enum NodeKind {
    Terminal([f64; 2]),
    Chance(Vec<(usize, f64)>),
    Decision { player: PlayerId, actions: Vec<ActionId>, children: Vec<usize> },
}

struct Dag<G: Game> {
    states: Vec<G::State>,
    kinds: Vec<NodeKind>,
    /// Parents-before-children order (reverse postorder of the build DFS).
    topo: Vec<usize>,
    root: usize,
}

fn build_dag<G: Game>(game: &G) -> Dag<G> {
    let mut states = Vec::new();
    let mut kinds: Vec<Option<NodeKind>> = Vec::new();
    let mut index: HashMap<G::State, usize> = HashMap::new();
    let mut postorder = Vec::new();

    fn visit<G: Game>(
        game: &G,
        state: G::State,
        states: &mut Vec<G::State>,
        kinds: &mut Vec<Option<NodeKind>>,
        index: &mut HashMap<G::State, usize>,
        postorder: &mut Vec<usize>,
    ) -> usize {
        if let Some(&id) = index.get(&state) {
            return id;
        }
        let id = states.len();
        states.push(state.clone());
        kinds.push(None);
        index.insert(state.clone(), id);

        let kind = match game.to_move(&state) {
            ToMove::Terminal => {
                NodeKind::Terminal(game.terminal_payoff(&state).expect("terminal"))
            }
            ToMove::Chance => {
                let outcomes = game.chance_outcomes(&state).expect("chance node");
                let children = outcomes
                    .into_iter()
                    .map(|(action, prob)| {
                        let child = game.apply_action(&state, action).expect("chance outcome");
                        (visit(game, child, states, kinds, index, postorder), prob)
                    })
                    .collect();
                NodeKind::Chance(children)
            }
            ToMove::Player(player) => {
                let actions = game.legal_actions(&state).expect("decision node");
                let children = actions
                    .iter()
                    .map(|&action| {
                        let child = game.apply_action(&state, action).expect("legal action");
                        visit(game, child, states, kinds, index, postorder)
                    })
                    .collect();
                NodeKind::Decision { player, actions, children }
            }
        };
        kinds[id] = Some(kind);
        postorder.push(id);
        id
    }

    let root = visit(game, game.initial_state(), &mut states, &mut kinds, &mut index, &mut postorder);
    postorder.reverse();
    Dag {
        states,
        kinds: kinds.into_iter().map(|k| k.expect("filled during visit")).collect(),
        topo: postorder,
        root,
    }
}

/// Exact expected payoff for `player` by memoized recursion over the DAG.
pub fn expected_payoff_tree<G: Game>(
    game: &G,
    p0: &mut impl StrategyOracle<G>,
    p1: &mut impl StrategyOracle<G>,
    player: PlayerId,
) -> f64 {
    let dag = build_dag(game);
    let mut memo: Vec<Option<f64>> = vec![None; dag.states.len()];
    // Process children before parents so one sweep fills the memo.
    for &n in dag.topo.iter().rev() {
        let v = match &dag.kinds[n] {
            NodeKind::Terminal(payoff) => payoff[player.index()],
            NodeKind::Chance(children) => children
                .iter()
                .map(|&(c, prob)| prob * memo[c].expect("child before parent"))
                .sum(),
            NodeKind::Decision { player: mover, actions, children } => {
                let dist = if *mover == PlayerId::P0 {
                    p0.strategy(game, &dag.states[n], *mover, actions)
                } else {
                    p1.strategy(game, &dag.states[n], *mover, actions)
                };
                dist.iter()
                    .zip(children)
                    .map(|(pr, &c)| pr * memo[c].expect("child before parent"))
                    .sum()
            }
        };
        memo[n] = Some(v);
    }
    memo[dag.root].expect("root evaluated")
}

/// Exact best response of `br_player` against `opponent`.
///
/// Counterfactual reach (chance and opponent contributions only) is pushed
/// down the DAG; each of `br_player`'s information sets then picks the
/// single action maximizing the reach-weighted sum of continuation values
/// across the states it contains, so the response never conditions on
/// anything the player cannot observe. Returns the exact value and the pure
/// maximizing strategy.
pub fn best_response_value<G: Game>(
    game: &G,
    opponent: &mut impl StrategyOracle<G>,
    br_player: PlayerId,
) -> (f64, TabularOracle) {
    let dag = build_dag(game);
    let n_nodes = dag.states.len();

    // Opponent strategies, queried once per decision node.
    let mut opp_dist: Vec<Option<Vec<f64>>> = vec![None; n_nodes];
    for n in 0..n_nodes {
        if let NodeKind::Decision { player, actions, .. } = &dag.kinds[n] {
            if *player != br_player {
                opp_dist[n] = Some(opponent.strategy(game, &dag.states[n], *player, actions));
            }
        }
    }

    // Reach excluding the best responder's own action probabilities.
    let mut reach = vec![0.0f64; n_nodes];
    reach[dag.root] = 1.0;
    let mut infosets: HashMap<InfoKey, Vec<usize>> = HashMap::new();
    for &n in &dag.topo {
        match &dag.kinds[n] {
            NodeKind::Terminal(_) => {}
            NodeKind::Chance(children) => {
                for &(c, prob) in children {
                    reach[c] += reach[n] * prob;
                }
            }
            NodeKind::Decision { player, children, .. } => {
                if *player == br_player {
                    infosets
                        .entry(game.info_key(&dag.states[n], br_player))
                        .or_default()
                        .push(n);
                    for &c in children {
                        reach[c] += reach[n];
                    }
                } else {
                    let dist = opp_dist[n].as_ref().expect("queried above");
                    for (&c, pr) in children.iter().zip(dist) {
                        reach[c] += reach[n] * pr;
                    }
                }
            }
        }
    }

    let mut ctx = BrContext {
        game,
        dag: &dag,
        opp_dist: &opp_dist,
        reach: &reach,
        infosets: &infosets,
        br_player,
        values: vec![None; n_nodes],
        decisions: HashMap::new(),
    };
    let value = ctx.value(dag.root);

    let mut oracle = TabularOracle::new();
    for (key, &choice) in &ctx.decisions {
        oracle.insert_pure(key.clone(), choice, game.action_count());
    }
    (value, oracle)
}

struct BrContext<'a, G: Game> {
    game: &'a G,
    dag: &'a Dag<G>,
    opp_dist: &'a [Option<Vec<f64>>],
    reach: &'a [f64],
    infosets: &'a HashMap<InfoKey, Vec<usize>>,
    br_player: PlayerId,
    values: Vec<Option<f64>>,
    decisions: HashMap<InfoKey, ActionId>,
}

impl<G: Game> BrContext<'_, G> {
    /// Value of a node for the best responder, with the responder playing
    /// the (lazily resolved) information-set decisions.
    fn value(&mut self, n: usize) -> f64 {
        if let Some(v) = self.values[n] {
            return v;
        }
        let dag = self.dag;
        let v = match &dag.kinds[n] {
            NodeKind::Terminal(payoff) => payoff[self.br_player.index()],
            NodeKind::Chance(children) => {
                children.iter().map(|&(c, prob)| prob * self.value(c)).sum()
            }
            NodeKind::Decision { player, actions, children } => {
                if *player == self.br_player {
                    let key = self.game.info_key(&dag.states[n], self.br_player);
                    let choice = self.decide(&key);
                    let idx = actions.iter().position(|&a| a == choice).expect(
                        "states in one information set share their action set",
                    );
                    self.value(children[idx])
                } else {
                    let dist = self.opp_dist[n].as_ref().expect("opponent node");
                    children
                        .iter()
                        .zip(dist)
                        .filter(|(_, &pr)| pr > 0.0)
                        .map(|(&c, &pr)| pr * self.value(c))
                        .sum::<f64>()
                }
            }
        };
        self.values[n] = Some(v);
        v
    }

    /// Action maximizing the reach-weighted continuation value over every
    /// state in the information set. Ties break toward the lowest action id.
    fn decide(&mut self, key: &InfoKey) -> ActionId {
        if let Some(&choice) = self.decisions.get(key) {
            return choice;
        }
        let dag = self.dag;
        let members = self.infosets.get(key).expect("known information set");
        let actions = match &dag.kinds[members[0]] {
            NodeKind::Decision { actions, .. } => actions,
            _ => unreachable!("information sets contain decision nodes"),
        };
        let mut best = (f64::NEG_INFINITY, actions[0]);
        for (idx, &action) in actions.iter().enumerate() {
            let mut total = 0.0;
            for &m in members {
                let child = match &dag.kinds[m] {
                    NodeKind::Decision { children, .. } => children[idx],
                    _ => unreachable!(),
                };
                let w = self.reach[m];
                if w > 0.0 {
                    total += w * self.value(child);
                }
            }
            if total > best.0 {
                best = (total, action);
            }
        }
        self.decisions.insert(key.clone(), best.1);
        best.1
    }
}
