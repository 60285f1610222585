//! Game-specific network topologies and the adapters that bridge game
//! observations to network inputs and network outputs back to strategies.

use std::collections::HashMap;

use nasheq_nn::{forward, LayerSpec, Mode, NetworkSpec, ParamStore, Tensor};

use crate::eval::{mask_renormalize, StrategyOracle};
use crate::games::{Game, InfoKey, InfoState, PlayerId, ToMove};
use crate::mcts::Evaluator;

/// How an observation vector maps onto the network input tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputEncoding {
    /// The observation is the input, one flat vector.
    Flat,
    /// Leading `planes * cells` features become channel planes and the final
    /// side-to-move flag is broadcast over one extra plane (conv inputs).
    PlanesWithFlag { planes: usize, side: usize },
}

/// A network spec plus its input adapter.
#[derive(Debug, Clone)]
pub struct GameNet {
    pub spec: NetworkSpec,
    pub encoding: InputEncoding,
}

impl GameNet {
    pub fn to_input(&self, obs: &InfoState) -> Tensor<f32> {
        match self.encoding {
            InputEncoding::Flat => {
                Tensor::from_vec(&self.spec.input_shape, obs.features.clone())
                    .expect("observation length matches input shape")
            }
            InputEncoding::PlanesWithFlag { planes, side } => {
                let cells = side * side;
                debug_assert_eq!(obs.features.len(), planes * cells + 1);
                let mut data = Vec::with_capacity((planes + 1) * cells);
                data.extend_from_slice(&obs.features[..planes * cells]);
                let flag = obs.features[planes * cells];
                data.extend(std::iter::repeat(flag).take(cells));
                Tensor::from_vec(&self.spec.input_shape, data)
                    .expect("plane count matches input shape")
            }
        }
    }
}

const OTHELLO_ACTIONS: usize = 17;
const LEDUC_OBS: usize = 22;

fn othello_trunk(dropout: bool) -> Vec<LayerSpec> {
    let mut trunk = vec![
        LayerSpec::Conv2d { in_channels: 3, out_channels: 8, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Conv2d { in_channels: 8, out_channels: 8, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: 128, outputs: 64 },
        LayerSpec::Relu,
    ];
    if dropout {
        trunk.push(LayerSpec::Dropout { rate: 0.3 });
    }
    trunk
}

/// Policy+value network for Othello search (MC-NFSP best response).
pub fn othello_policy_value_net() -> GameNet {
    GameNet {
        spec: NetworkSpec::new(
            vec![3, 4, 4],
            othello_trunk(true),
            vec![
                LayerSpec::Dense { inputs: 64, outputs: OTHELLO_ACTIONS },
                LayerSpec::Softmax,
            ],
            Some(vec![LayerSpec::Dense { inputs: 64, outputs: 1 }, LayerSpec::Tanh]),
        )
        .expect("static spec"),
        encoding: InputEncoding::PlanesWithFlag { planes: 2, side: 4 },
    }
}

/// Average-policy network for Othello.
pub fn othello_avg_net() -> GameNet {
    GameNet {
        spec: NetworkSpec::new(
            vec![3, 4, 4],
            othello_trunk(true),
            vec![
                LayerSpec::Dense { inputs: 64, outputs: OTHELLO_ACTIONS },
                LayerSpec::Softmax,
            ],
            None,
        )
        .expect("static spec"),
        encoding: InputEncoding::PlanesWithFlag { planes: 2, side: 4 },
    }
}

/// Q network for Othello NFSP; raw action values, no dropout.
pub fn othello_q_net() -> GameNet {
    GameNet {
        spec: NetworkSpec::new(
            vec![3, 4, 4],
            othello_trunk(false),
            vec![LayerSpec::Dense { inputs: 64, outputs: OTHELLO_ACTIONS }],
            None,
        )
        .expect("static spec"),
        encoding: InputEncoding::PlanesWithFlag { planes: 2, side: 4 },
    }
}

fn dense_trunk(inputs: usize, hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { inputs, outputs: hidden },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: hidden, outputs: hidden },
        LayerSpec::Relu,
    ]
}

pub fn leduc_q_net() -> GameNet {
    GameNet {
        spec: NetworkSpec::new(
            vec![LEDUC_OBS],
            dense_trunk(LEDUC_OBS, 64),
            vec![LayerSpec::Dense { inputs: 64, outputs: 3 }],
            None,
        )
        .expect("static spec"),
        encoding: InputEncoding::Flat,
    }
}

pub fn leduc_avg_net() -> GameNet {
    GameNet {
        spec: NetworkSpec::new(
            vec![LEDUC_OBS],
            dense_trunk(LEDUC_OBS, 64),
            vec![LayerSpec::Dense { inputs: 64, outputs: 3 }, LayerSpec::Softmax],
            None,
        )
        .expect("static spec"),
        encoding: InputEncoding::Flat,
    }
}

pub fn normal_form_q_net(actions: usize) -> GameNet {
    GameNet {
        spec: NetworkSpec::new(
            vec![1],
            dense_trunk(1, 32),
            vec![LayerSpec::Dense { inputs: 32, outputs: actions }],
            None,
        )
        .expect("static spec"),
        encoding: InputEncoding::Flat,
    }
}

pub fn normal_form_avg_net(actions: usize) -> GameNet {
    GameNet {
        spec: NetworkSpec::new(
            vec![1],
            dense_trunk(1, 32),
            vec![LayerSpec::Dense { inputs: 32, outputs: actions }, LayerSpec::Softmax],
            None,
        )
        .expect("static spec"),
        encoding: InputEncoding::Flat,
    }
}

/// Q network topology for a game key.
pub fn q_net_for(game: crate::games::GameKind) -> GameNet {
    use crate::games::GameKind::*;
    match game {
        MatchingPennies => normal_form_q_net(2),
        Rps => normal_form_q_net(3),
        Othello4 => othello_q_net(),
        Leduc => leduc_q_net(),
    }
}

/// Average-policy network topology for a game key.
pub fn avg_net_for(game: crate::games::GameKind) -> GameNet {
    use crate::games::GameKind::*;
    match game {
        MatchingPennies => normal_form_avg_net(2),
        Rps => normal_form_avg_net(3),
        Othello4 => othello_avg_net(),
        Leduc => leduc_avg_net(),
    }
}

/// Full-length policy output of a distribution-headed network on one
/// observation, dropout off.
pub fn policy_of(net: &GameNet, params: &ParamStore<f32>, obs: &InfoState) -> Vec<f64> {
    let out = forward(&net.spec, params, &net.to_input(obs), Mode::Eval)
        .expect("validated spec and input");
    out.policy.data().iter().map(|&p| f64::from(p)).collect()
}

/// Raw Q values of a network on one observation, dropout off.
pub fn q_values_of(net: &GameNet, params: &ParamStore<f32>, obs: &InfoState) -> Vec<f64> {
    policy_of(net, params, obs)
}

/// Policy and value heads on one observation, dropout off.
pub fn policy_value_of(
    net: &GameNet,
    params: &ParamStore<f32>,
    obs: &InfoState,
) -> (Vec<f64>, f64) {
    let out = forward(&net.spec, params, &net.to_input(obs), Mode::Eval)
        .expect("validated spec and input");
    (
        out.policy.data().iter().map(|&p| f64::from(p)).collect(),
        out.value.map(f64::from).unwrap_or(0.0),
    )
}

/// Strategy oracle backed by a distribution-headed network snapshot.
/// Outputs are memoized per information state for the lifetime of the
/// oracle (one evaluation pass).
pub struct NetworkOracle<'a> {
    net: &'a GameNet,
    params: &'a ParamStore<f32>,
    cache: HashMap<InfoKey, Vec<f64>>,
}

impl<'a> NetworkOracle<'a> {
    pub fn new(net: &'a GameNet, params: &'a ParamStore<f32>) -> Self {
        NetworkOracle { net, params, cache: HashMap::new() }
    }
}

impl<G: Game> StrategyOracle<G> for NetworkOracle<'_> {
    fn strategy(
        &mut self,
        game: &G,
        state: &G::State,
        player: PlayerId,
        legal: &[crate::games::ActionId],
    ) -> Vec<f64> {
        let key = game.info_key(state, player);
        let full = self.cache.entry(key).or_insert_with(|| {
            policy_of(self.net, self.params, &game.encode_observation(state, player))
        });
        mask_renormalize(full, legal)
    }
}

/// MCTS leaf evaluator backed by a policy-value network snapshot, always
/// evaluating from the to-move player's perspective.
pub struct NetworkEvaluator<'a> {
    net: &'a GameNet,
    params: &'a ParamStore<f32>,
    cache: HashMap<InfoKey, (Vec<f64>, f64)>,
}

impl<'a> NetworkEvaluator<'a> {
    pub fn new(net: &'a GameNet, params: &'a ParamStore<f32>) -> Self {
        NetworkEvaluator { net, params, cache: HashMap::new() }
    }
}

impl<G: Game> Evaluator<G> for NetworkEvaluator<'_> {
    fn evaluate(&mut self, game: &G, state: &G::State) -> (Vec<f64>, f64) {
        let player = match game.to_move(state) {
            ToMove::Player(p) => p,
            _ => panic!("evaluator requires a decision node"),
        };
        let key = game.info_key(state, player);
        let (priors, value) = self.cache.entry(key).or_insert_with(|| {
            policy_value_of(self.net, self.params, &game.encode_observation(state, player))
        });
        (priors.clone(), *value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::{Game, GameKind, Leduc, Othello4};
    use nasheq_nn::init_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn othello_input_broadcasts_the_flag_plane() {
        let net = othello_q_net();
        let game = Othello4;
        let obs = game.encode_observation(&game.initial_state(), PlayerId::P0);
        let input = net.to_input(&obs);
        assert_eq!(input.shape(), &[3, 4, 4]);
        assert!(input.data()[32..48].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn all_game_nets_validate_and_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in GameKind::ALL {
            for net in [q_net_for(kind), avg_net_for(kind)] {
                let params = init_params::<f32>(&net.spec, &mut rng);
                let obs = match kind {
                    GameKind::Othello4 => {
                        let g = Othello4;
                        g.encode_observation(&g.initial_state(), PlayerId::P0)
                    }
                    GameKind::Leduc => {
                        let g = Leduc;
                        let s = g.apply_action(&g.initial_state(), crate::games::ActionId(0)).unwrap();
                        let s = g.apply_action(&s, crate::games::ActionId(2)).unwrap();
                        g.encode_observation(&s, PlayerId::P0)
                    }
                    _ => crate::games::InfoState::new(vec![1.0]),
                };
                let out = policy_of(&net, &params, &obs);
                assert!(out.iter().all(|v| v.is_finite()));
            }
        }
        let pv = othello_policy_value_net();
        let params = init_params::<f32>(&pv.spec, &mut rng);
        let g = Othello4;
        let obs = g.encode_observation(&g.initial_state(), PlayerId::P0);
        let (policy, value) = policy_value_of(&pv, &params, &obs);
        assert!((policy.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!((-1.0..=1.0).contains(&value));
    }
}
