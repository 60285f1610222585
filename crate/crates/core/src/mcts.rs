//! Policy-value-network-guided Monte Carlo Tree Search: PUCT selection,
//! network-prior expansion, incremental-mean backup with per-ply sign
//! alternation, and visit-count policy extraction.
//!
//! Search operates on full game states, so it is a perfect-information
//! search; chance nodes are resolved by sampling afresh on every descent.

use std::collections::HashMap;

use rand::Rng;

use crate::games::{ActionId, Game, PlayerId, ToMove};

#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub c_puct: f64,
    pub simulations: u32,
    /// Temperature applied to the returned visit-count policy: 1 keeps the
    /// normalized counts, 0 collapses to the argmax.
    pub temperature: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { c_puct: 1.5, simulations: 64, temperature: 1.0 }
    }
}

/// Produces priors over action ids and a state value in [-1, 1] from the
/// to-move player's perspective.
pub trait Evaluator<G: Game> {
    fn evaluate(&mut self, game: &G, state: &G::State) -> (Vec<f64>, f64);
}

/// Uniform priors, zero value. The network-free baseline; with enough
/// simulations the search then relies purely on terminal outcomes.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformEvaluator;

impl<G: Game> Evaluator<G> for UniformEvaluator {
    fn evaluate(&mut self, game: &G, _state: &G::State) -> (Vec<f64>, f64) {
        (vec![1.0 / game.action_count() as f64; game.action_count()], 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct SearchEdge {
    pub action: ActionId,
    pub prior: f64,
    pub visits: u32,
    pub q: f64,
}

/// One search-tree node. `visits` is maintained as the sum of edge visits.
#[derive(Debug, Clone)]
pub struct SearchNode<S> {
    pub state: S,
    pub player: PlayerId,
    pub visits: u32,
    pub edges: Vec<SearchEdge>,
    pub expanded: bool,
}

impl<S> SearchNode<S> {
    /// PUCT selection: maximizes `Q + c·P·sqrt(N(s)) / (1 + N(s,a))`, ties
    /// broken toward the lowest action id.
    pub fn select_ucb(&self, c_puct: f64) -> usize {
        debug_assert!(self.expanded && !self.edges.is_empty());
        let sqrt_n = f64::from(self.visits).sqrt();
        let mut best = (f64::NEG_INFINITY, 0);
        for (idx, edge) in self.edges.iter().enumerate() {
            let u = edge.q + c_puct * edge.prior * sqrt_n / (1.0 + f64::from(edge.visits));
            if u > best.0 {
                best = (u, idx);
            }
        }
        best.1
    }
}

pub struct SearchTree<G: Game> {
    nodes: Vec<SearchNode<G::State>>,
    /// Children per (parent, edge), disambiguated by resolved state: chance
    /// nodes make one edge lead to several children.
    children: HashMap<(usize, usize), Vec<usize>>,
}

impl<G: Game> SearchTree<G> {
    pub fn node(&self, idx: usize) -> &SearchNode<G::State> {
        &self.nodes[idx]
    }

    pub fn root(&self) -> &SearchNode<G::State> {
        &self.nodes[0]
    }
}

/// Updates every `(node, edge)` step of a root-to-leaf path with the
/// incremental mean `Q ← (N·Q + V) / (N + 1)`, then increments the visit
/// counts. `value` is from `leaf_player`'s perspective and flips sign
/// whenever the acting player changes across a ply.
fn backup<G: Game>(
    tree: &mut SearchTree<G>,
    path: &[(usize, usize)],
    value: f64,
    leaf_player: PlayerId,
) {
    for &(node_idx, edge_idx) in path.iter().rev() {
        let node = &mut tree.nodes[node_idx];
        let v = if node.player == leaf_player { value } else { -value };
        let edge = &mut node.edges[edge_idx];
        edge.q = (f64::from(edge.visits) * edge.q + v) / f64::from(edge.visits + 1);
        edge.visits += 1;
        node.visits += 1;
    }
}

/// Expands a leaf: initializes edges with network priors masked to the
/// legal actions and renormalized, `Q = 0`, `N = 0`. Returns the network
/// value from the to-move player's perspective.
fn expand_and_evaluate<G: Game>(
    game: &G,
    tree: &mut SearchTree<G>,
    node_idx: usize,
    evaluator: &mut impl Evaluator<G>,
) -> f64 {
    let state = tree.nodes[node_idx].state.clone();
    let legal = game.legal_actions(&state).expect("expanding a decision node");
    let (priors, value) = evaluator.evaluate(game, &state);
    let masked = crate::eval::mask_renormalize(&priors, &legal);
    let node = &mut tree.nodes[node_idx];
    node.edges = legal
        .iter()
        .zip(masked)
        .map(|(&action, prior)| SearchEdge { action, prior, visits: 0, q: 0.0 })
        .collect();
    node.expanded = true;
    value.clamp(-1.0, 1.0)
}

/// Runs a full search from `root_state` and returns the visit-count policy
/// over action ids, with the configured temperature applied.
pub fn search<G: Game>(
    game: &G,
    root_state: &G::State,
    evaluator: &mut impl Evaluator<G>,
    cfg: &SearchConfig,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let tree = search_tree(game, root_state, evaluator, cfg, rng);
    let root = tree.root();
    let mut counts = vec![0.0f64; game.action_count()];
    for edge in &root.edges {
        counts[edge.action.index()] = f64::from(edge.visits);
    }
    apply_temperature(&counts, cfg.temperature)
}

/// As [`search`], but hands back the whole tree for inspection.
pub fn search_tree<G: Game>(
    game: &G,
    root_state: &G::State,
    evaluator: &mut impl Evaluator<G>,
    cfg: &SearchConfig,
    rng: &mut impl Rng,
) -> SearchTree<G> {
    let root_player = match game.to_move(root_state) {
        ToMove::Player(p) => p,
        _ => panic!("search requires a decision node as root"),
    };
    let mut tree = SearchTree {
        nodes: vec![SearchNode {
            state: root_state.clone(),
            player: root_player,
            visits: 0,
            edges: Vec::new(),
            expanded: false,
        }],
        children: HashMap::new(),
    };
    expand_and_evaluate(game, &mut tree, 0, evaluator);

    for _ in 0..cfg.simulations {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut node_idx = 0usize;
        loop {
            let edge_idx = tree.nodes[node_idx].select_ucb(cfg.c_puct);
            let action = tree.nodes[node_idx].edges[edge_idx].action;
            path.push((node_idx, edge_idx));

            let mut state = game
                .apply_action(&tree.nodes[node_idx].state, action)
                .expect("edges hold legal actions");
            while game.to_move(&state) == ToMove::Chance {
                state = crate::games::sample_chance(game, &state, rng).expect("chance node");
            }

            if game.to_move(&state) == ToMove::Terminal {
                let mover = tree.nodes[node_idx].player;
                let payoff = game.terminal_payoff(&state).expect("terminal");
                backup(&mut tree, &path, payoff[mover.index()], mover);
                break;
            }

            let child_idx = match lookup_child(&tree, node_idx, edge_idx, &state) {
                Some(idx) => idx,
                None => {
                    let player = match game.to_move(&state) {
                        ToMove::Player(p) => p,
                        _ => unreachable!("chance and terminal handled above"),
                    };
                    let idx = tree.nodes.len();
                    tree.nodes.push(SearchNode {
                        state,
                        player,
                        visits: 0,
                        edges: Vec::new(),
                        expanded: false,
                    });
                    tree.children.entry((node_idx, edge_idx)).or_default().push(idx);
                    idx
                }
            };

            if !tree.nodes[child_idx].expanded {
                let value = expand_and_evaluate(game, &mut tree, child_idx, evaluator);
                let leaf_player = tree.nodes[child_idx].player;
                backup(&mut tree, &path, value, leaf_player);
                break;
            }
            node_idx = child_idx;
        }
    }
    tree
}

fn lookup_child<G: Game>(
    tree: &SearchTree<G>,
    node_idx: usize,
    edge_idx: usize,
    state: &G::State,
) -> Option<usize> {
    tree.children
        .get(&(node_idx, edge_idx))?
        .iter()
        .copied()
        .find(|&c| &tree.nodes[c].state == state)
}

/// Normalizes visit counts into a policy. `temperature` 0 returns the
/// one-hot argmax (lowest index on ties); otherwise counts are raised to
/// `1/temperature` and renormalized.
pub fn apply_temperature(counts: &[f64], temperature: f64) -> Vec<f64> {
    let mut policy = vec![0.0; counts.len()];
    if temperature == 0.0 {
        let mut best = (f64::NEG_INFINITY, 0);
        for (idx, &c) in counts.iter().enumerate() {
            if c > best.0 {
                best = (c, idx);
            }
        }
        policy[best.1] = 1.0;
        return policy;
    }
    let inv_t = 1.0 / temperature;
    let mut sum = 0.0;
    for (p, &c) in policy.iter_mut().zip(counts) {
        *p = if c > 0.0 { c.powf(inv_t) } else { 0.0 };
        sum += *p;
    }
    if sum > 0.0 {
        for p in &mut policy {
            *p /= sum;
        }
    }
    policy
}

/// Samples an action from a policy vector. `temperature` 0 picks the
/// argmax (lowest index on ties); 1 samples proportionally.
pub fn sample_action(policy: &[f64], temperature: f64, rng: &mut impl Rng) -> ActionId {
    let adjusted = apply_temperature(policy, temperature);
    let mut roll: f64 = rng.gen();
    let mut chosen = adjusted.len() - 1;
    for (idx, &p) in adjusted.iter().enumerate() {
        roll -= p;
        if roll <= 0.0 {
            chosen = idx;
            break;
        }
    }
    // Guard against an all-zero policy from an unvisited root.
    if adjusted[chosen] == 0.0 {
        if let Some(idx) = adjusted.iter().position(|&p| p > 0.0) {
            chosen = idx;
        }
    }
    ActionId(chosen as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::Othello4;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn node_with(priors: &[f64], visits: &[u32], qs: &[f64], n_s: u32) -> SearchNode<u8> {
        SearchNode {
            state: 0,
            player: PlayerId::P0,
            visits: n_s,
            edges: priors
                .iter()
                .zip(visits)
                .zip(qs)
                .enumerate()
                .map(|(i, ((&prior, &visits), &q))| SearchEdge {
                    action: ActionId(i as u8),
                    prior,
                    visits,
                    q,
                })
                .collect(),
            expanded: true,
        }
    }

    #[test]
    fn ucb_formula_direct_substitution() {
        // Q = 0, priors (0.8, 0.2), N(s) = 1, N(s,a) = 0, c = 1:
        // U = (0.8, 0.2), action 0 wins.
        let node = node_with(&[0.8, 0.2], &[0, 0], &[0.0, 0.0], 1);
        assert_eq!(node.select_ucb(1.0), 0);
    }

    #[test]
    fn ucb_prefers_unvisited_on_equal_priors() {
        let node = node_with(&[0.5, 0.5], &[5, 0], &[0.1, 0.1], 5);
        assert_eq!(node.select_ucb(1.0), 1);
    }

    #[test]
    fn zero_c_puct_is_greedy_on_q() {
        let node = node_with(&[0.9, 0.1], &[3, 3], &[0.2, 0.7], 6);
        assert_eq!(node.select_ucb(0.0), 1);
    }

    #[test]
    fn backup_incremental_mean() {
        let game = Othello4;
        let root = game.initial_state();
        let mut tree: SearchTree<Othello4> = SearchTree {
            nodes: vec![SearchNode {
                state: root,
                player: PlayerId::P0,
                visits: 1,
                edges: vec![SearchEdge { action: ActionId(1), prior: 1.0, visits: 1, q: 0.5 }],
                expanded: true,
            }],
            children: HashMap::new(),
        };
        backup(&mut tree, &[(0, 0)], 1.0, PlayerId::P0);
        let edge = &tree.nodes[0].edges[0];
        assert_eq!(edge.q, 0.75);
        assert_eq!(edge.visits, 2);
        assert_eq!(tree.nodes[0].visits, 2);
    }

    #[test]
    fn backup_fresh_edge_takes_leaf_value_and_flips_perspective() {
        let game = Othello4;
        let root = game.initial_state();
        let mut tree: SearchTree<Othello4> = SearchTree {
            nodes: vec![SearchNode {
                state: root,
                player: PlayerId::P0,
                visits: 0,
                edges: vec![SearchEdge { action: ActionId(1), prior: 1.0, visits: 0, q: 0.0 }],
                expanded: true,
            }],
            children: HashMap::new(),
        };
        // Leaf value -1 from P1's perspective is +1 for P0.
        backup(&mut tree, &[(0, 0)], -1.0, PlayerId::P1);
        let edge = &tree.nodes[0].edges[0];
        assert_eq!(edge.q, 1.0);
        assert_eq!(edge.visits, 1);
    }

    #[test]
    fn repeated_constant_backups_converge_to_the_constant() {
        let game = Othello4;
        let root = game.initial_state();
        let mut tree: SearchTree<Othello4> = SearchTree {
            nodes: vec![SearchNode {
                state: root,
                player: PlayerId::P0,
                visits: 0,
                edges: vec![SearchEdge { action: ActionId(1), prior: 1.0, visits: 0, q: 0.0 }],
                expanded: true,
            }],
            children: HashMap::new(),
        };
        for _ in 0..10 {
            backup(&mut tree, &[(0, 0)], 0.25, PlayerId::P0);
        }
        assert!((tree.nodes[0].edges[0].q - 0.25).abs() < 1e-12);
    }

    #[test]
    fn expansion_masks_and_renormalizes_priors() {
        let game = Othello4;
        let mut tree: SearchTree<Othello4> = SearchTree {
            nodes: vec![SearchNode {
                state: game.initial_state(),
                player: PlayerId::P0,
                visits: 0,
                edges: Vec::new(),
                expanded: false,
            }],
            children: HashMap::new(),
        };
        let mut evaluator = UniformEvaluator;
        let value = expand_and_evaluate(&game, &mut tree, 0, &mut evaluator);
        assert_eq!(value, 0.0);
        let node = &tree.nodes[0];
        // 4 legal placements out of 17 actions: priors renormalize to 0.25.
        assert_eq!(node.edges.len(), 4);
        for edge in &node.edges {
            assert!((edge.prior - 0.25).abs() < 1e-12);
            assert_eq!(edge.visits, 0);
            assert_eq!(edge.q, 0.0);
        }
    }

    #[test]
    fn search_visit_counts_sum_to_simulations() {
        let game = Othello4;
        let cfg = SearchConfig { simulations: 50, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = search_tree(&game, &game.initial_state(), &mut UniformEvaluator, &cfg, &mut rng);
        let root = tree.root();
        let total: u32 = root.edges.iter().map(|e| e.visits).sum();
        assert_eq!(total, 50);
        assert_eq!(root.visits, 50);
        for edge in &root.edges {
            assert!((-1.0..=1.0).contains(&edge.q));
        }
    }

    #[test]
    fn search_policy_sums_to_one_and_is_deterministic() {
        let game = Othello4;
        let cfg = SearchConfig { simulations: 64, ..Default::default() };
        let a = search(
            &game,
            &game.initial_state(),
            &mut UniformEvaluator,
            &cfg,
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        let b = search(
            &game,
            &game.initial_state(),
            &mut UniformEvaluator,
            &cfg,
            &mut ChaCha8Rng::seed_from_u64(9),
        );
        assert_eq!(a, b);
        let sum: f64 = a.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_simulation_gives_one_hot_policy() {
        let game = Othello4;
        let cfg = SearchConfig { simulations: 1, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policy = search(&game, &game.initial_state(), &mut UniformEvaluator, &cfg, &mut rng);
        assert_eq!(policy.iter().filter(|&&p| p > 0.0).count(), 1);
        assert_eq!(policy.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn count_normalization_and_zero_temperature() {
        let policy = apply_temperature(&[3.0, 1.0], 1.0);
        assert_eq!(policy, vec![0.75, 0.25]);
        let greedy = apply_temperature(&[0.4, 0.4, 0.2], 0.0);
        assert_eq!(greedy, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn sample_action_frequencies_match_policy() {
        let policy = vec![0.75, 0.25];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let mut counts = [0u32; 2];
        for _ in 0..draws {
            counts[sample_action(&policy, 1.0, &mut rng).index()] += 1;
        }
        let f0 = f64::from(counts[0]) / f64::from(draws as u32);
        assert!((f0 - 0.75).abs() < 0.01, "frequency {f0}");

        let one_hot = vec![0.0, 1.0, 0.0];
        for _ in 0..100 {
            assert_eq!(sample_action(&one_hot, 1.0, &mut rng), ActionId(1));
        }
        assert_eq!(sample_action(&[0.4, 0.4, 0.2], 0.0, &mut rng), ActionId(0));
    }
}
