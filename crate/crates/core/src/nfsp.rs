//! NFSP: each player learns an approximate best response with ε-greedy
//! Q-learning (circular replay, target network) and an average policy by
//! supervised learning on its own best-response actions, acting each
//! episode from the anticipatory mixture `σ = (1-η)·Π + η·B`.

use rand::Rng;

use nasheq_nn::{
    apply_gradients, init_params, loss_and_gradients, CrossEntropyBatch, GradStore, LossBatch,
    OptimizerCfg, ParamStore, QBatch,
};

use crate::eval::{exploitability, mask_renormalize};
use crate::games::{sample_chance, ActionId, Game, InfoState, PlayerId, ToMove};
use crate::memory::{BestResponseSample, CircularBuffer, ReservoirBuffer, SampleBuffer, Transition};
use crate::metrics::{MetricRow, MetricSink};
use crate::nets::{q_values_of, GameNet, NetworkOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeMode {
    BestResponse,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct NfspConfig {
    /// Anticipatory parameter: probability of a best-response episode.
    pub eta: f64,
    /// Initial exploration rate; decays as `ε₀ / sqrt(1 + episodes)`.
    pub epsilon0: f64,
    pub gamma: f64,
    pub rl_lr: f64,
    pub sl_lr: f64,
    pub batch_size: usize,
    /// Train both networks every this many of the agent's own actions.
    pub train_every: u64,
    /// Refresh the target network every this many training steps.
    pub target_refresh: u64,
    pub rl_capacity: usize,
    pub sl_capacity: usize,
    pub optimizer: OptKind,
}

impl Default for NfspConfig {
    fn default() -> Self {
        NfspConfig {
            eta: 0.1,
            epsilon0: 0.6,
            gamma: 1.0,
            rl_lr: 0.01,
            sl_lr: 0.005,
            batch_size: 128,
            train_every: 128,
            target_refresh: 300,
            rl_capacity: 200_000,
            sl_capacity: 200_000,
            optimizer: OptKind::Adam,
        }
    }
}

impl NfspConfig {
    fn rl_optimizer(&self) -> OptimizerCfg<f32> {
        match self.optimizer {
            OptKind::Adam => OptimizerCfg::adam(self.rl_lr as f32),
            OptKind::Sgd => OptimizerCfg::sgd(self.rl_lr as f32),
        }
    }

    fn sl_optimizer(&self) -> OptimizerCfg<f32> {
        match self.optimizer {
            OptKind::Adam => OptimizerCfg::adam(self.sl_lr as f32),
            OptKind::Sgd => OptimizerCfg::sgd(self.sl_lr as f32),
        }
    }
}

pub struct NfspAgent {
    pub player: PlayerId,
    pub q_net: GameNet,
    pub avg_net: GameNet,
    pub q_params: ParamStore<f32>,
    pub q_target: ParamStore<f32>,
    pub avg_params: ParamStore<f32>,
    pub m_rl: CircularBuffer<Transition>,
    pub m_sl: ReservoirBuffer<BestResponseSample>,
    pub cfg: NfspConfig,
    mode: EpisodeMode,
    episodes: u64,
    actions_taken: u64,
    train_steps: u64,
    last_losses: (Option<f64>, Option<f64>),
}

impl NfspAgent {
    pub fn new(
        player: PlayerId,
        q_net: GameNet,
        avg_net: GameNet,
        cfg: NfspConfig,
        rng: &mut impl Rng,
    ) -> Self {
        let q_params = init_params::<f32>(&q_net.spec, rng);
        let q_target = q_params.clone();
        let avg_params = init_params::<f32>(&avg_net.spec, rng);
        NfspAgent {
            player,
            q_net,
            avg_net,
            q_params,
            q_target,
            avg_params,
            m_rl: CircularBuffer::new(cfg.rl_capacity),
            m_sl: ReservoirBuffer::new(cfg.sl_capacity),
            cfg,
            mode: EpisodeMode::Average,
            episodes: 0,
            actions_taken: 0,
            train_steps: 0,
            last_losses: (None, None),
        }
    }

    /// Draws the episode's policy source: best response with probability η.
    pub fn begin_episode(&mut self, rng: &mut impl Rng) -> EpisodeMode {
        self.mode = if rng.gen::<f64>() < self.cfg.eta {
            EpisodeMode::BestResponse
        } else {
            EpisodeMode::Average
        };
        self.mode
    }

    pub fn end_episode(&mut self) {
        self.episodes += 1;
    }

    pub fn mode(&self) -> EpisodeMode {
        self.mode
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Exploration rate after `k` completed episodes: `ε₀ / sqrt(1 + k)`.
    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon0 / (1.0 + self.episodes as f64).sqrt()
    }

    /// Chooses an action at one of this agent's decision points. Average
    /// mode samples the policy network; best-response mode is ε-greedy on
    /// the Q network and records `(s, a)` into the supervised memory.
    pub fn act(
        &mut self,
        obs: &InfoState,
        legal: &[ActionId],
        rng: &mut impl Rng,
    ) -> ActionId {
        self.actions_taken += 1;
        match self.mode {
            EpisodeMode::Average => {
                let full = crate::nets::policy_of(&self.avg_net, &self.avg_params, obs);
                let dist = mask_renormalize(&full, legal);
                sample_legal(legal, &dist, rng)
            }
            EpisodeMode::BestResponse => {
                let action = if rng.gen::<f64>() < self.epsilon() {
                    legal[rng.gen_range(0..legal.len())]
                } else {
                    greedy_action(&self.q_net, &self.q_params, obs, legal)
                };
                self.m_sl.push(
                    BestResponseSample { player: self.player, obs: obs.clone(), action },
                    rng,
                );
                action
            }
        }
    }

    pub fn record_transition(&mut self, transition: Transition) {
        self.m_rl.push(transition);
    }

    /// True whenever the action counter crosses the training cadence.
    pub fn due_for_training(&self) -> bool {
        self.actions_taken % self.cfg.train_every == 0
    }

    /// One gradient step per network; skipped (`None`) until both memories
    /// hold a full batch.
    pub fn train_step(&mut self, rng: &mut impl Rng) -> Option<(f64, f64)> {
        if self.m_rl.len() < self.cfg.batch_size || self.m_sl.len() < self.cfg.batch_size {
            return None;
        }
        let transitions = self.m_rl.sample_minibatch(self.cfg.batch_size, rng)?;
        let rl_loss = {
            let batch = self.q_batch(&transitions);
            let (loss, grads) = loss_and_gradients(&self.q_net.spec, &self.q_params, &batch, rng)
                .expect("finite q loss");
            apply_gradients(&mut self.q_params, &grads, &self.cfg.rl_optimizer())
                .expect("shapes match");
            f64::from(loss)
        };

        let samples = self.m_sl.sample_minibatch(self.cfg.batch_size, rng)?;
        let sl_loss = {
            let batch = supervised_batch(&self.avg_net, samples.iter().map(|s| (&s.obs, s.action)));
            let (loss, grads) =
                loss_and_gradients(&self.avg_net.spec, &self.avg_params, &batch, rng)
                    .expect("finite policy loss");
            apply_gradients(&mut self.avg_params, &grads, &self.cfg.sl_optimizer())
                .expect("shapes match");
            f64::from(loss)
        };

        self.train_steps += 1;
        if self.train_steps % self.cfg.target_refresh == 0 {
            self.q_target.copy_weights_from(&self.q_params);
        }
        self.last_losses = (Some(rl_loss), Some(sl_loss));
        Some((rl_loss, sl_loss))
    }

    /// `(s, a, y)` batch with the one-step TD target
    /// `y = r + γ·max_{a'} Q(s', a'; θ⁻)`, or `y = r` at terminals.
    fn q_batch(&self, transitions: &[Transition]) -> LossBatch<f32> {
        let mut inputs = Vec::with_capacity(transitions.len());
        let mut actions = Vec::with_capacity(transitions.len());
        let mut targets = Vec::with_capacity(transitions.len());
        for t in transitions {
            inputs.push(self.q_net.to_input(&t.obs));
            actions.push(t.action.index());
            let y = if t.terminal {
                t.reward
            } else {
                let q_next = q_values_of(&self.q_net, &self.q_target, &t.next_obs);
                let best = t
                    .next_legal
                    .iter()
                    .map(|a| q_next[a.index()])
                    .fold(f64::NEG_INFINITY, f64::max);
                t.reward + self.cfg.gamma * best
            };
            targets.push(y as f32);
        }
        LossBatch::MseQ(QBatch { inputs, actions, targets })
    }

    pub fn last_losses(&self) -> (Option<f64>, Option<f64>) {
        self.last_losses
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }
}

/// One-hot cross-entropy batch over `(observation, action)` pairs.
pub(crate) fn supervised_batch<'a>(
    net: &GameNet,
    samples: impl Iterator<Item = (&'a InfoState, ActionId)>,
) -> LossBatch<f32> {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let actions = net.spec.policy_len();
    for (obs, action) in samples {
        inputs.push(net.to_input(obs));
        let mut one_hot = vec![0.0f32; actions];
        one_hot[action.index()] = 1.0;
        targets.push(one_hot);
    }
    LossBatch::CrossEntropy(CrossEntropyBatch { inputs, targets })
}

/// Argmax of the Q values over the legal actions, lowest index on ties.
pub(crate) fn greedy_action(
    net: &GameNet,
    params: &ParamStore<f32>,
    obs: &InfoState,
    legal: &[ActionId],
) -> ActionId {
    let q = q_values_of(net, params, obs);
    let mut best = (f64::NEG_INFINITY, legal[0]);
    for &a in legal {
        if q[a.index()] > best.0 {
            best = (q[a.index()], a);
        }
    }
    best.1
}

/// Samples from a distribution aligned with `legal`.
pub(crate) fn sample_legal(
    legal: &[ActionId],
    dist: &[f64],
    rng: &mut impl Rng,
) -> ActionId {
    let mut roll: f64 = rng.gen();
    for (&a, &p) in legal.iter().zip(dist) {
        roll -= p;
        if roll <= 0.0 {
            return a;
        }
    }
    *legal.last().expect("non-empty legal set")
}

/// Plays one self-play episode between two NFSP agents, routing transitions
/// and training triggers. Returns the terminal payoffs.
pub fn play_nfsp_episode<G: Game>(
    game: &G,
    agents: &mut [NfspAgent; 2],
    rng: &mut impl Rng,
) -> [f64; 2] {
    struct Pending {
        obs: InfoState,
        action: ActionId,
    }
    let mut pending: [Option<Pending>; 2] = [None, None];
    for agent in agents.iter_mut() {
        agent.begin_episode(rng);
    }
    let mut state = game.initial_state();
    loop {
        match game.to_move(&state) {
            ToMove::Terminal => {
                let payoff = game.terminal_payoff(&state).expect("terminal");
                for (i, slot) in pending.iter_mut().enumerate() {
                    if let Some(p) = slot.take() {
                        agents[i].record_transition(Transition {
                            obs: p.obs,
                            action: p.action,
                            reward: payoff[i],
                            next_obs: InfoState::new(Vec::new()),
                            next_legal: Vec::new(),
                            terminal: true,
                        });
                    }
                }
                for agent in agents.iter_mut() {
                    agent.end_episode();
                }
                return payoff;
            }
            ToMove::Chance => {
                state = sample_chance(game, &state, rng).expect("chance node");
            }
            ToMove::Player(p) => {
                let i = p.index();
                let obs = game.encode_observation(&state, p);
                let legal = game.legal_actions(&state).expect("decision node");
                if let Some(prev) = pending[i].take() {
                    agents[i].record_transition(Transition {
                        obs: prev.obs,
                        action: prev.action,
                        reward: 0.0,
                        next_obs: obs.clone(),
                        next_legal: legal.clone(),
                        terminal: false,
                    });
                }
                let action = agents[i].act(&obs, &legal, rng);
                pending[i] = Some(Pending { obs, action });
                state = game.apply_action(&state, action).expect("legal action");
                if agents[i].due_for_training() {
                    agents[i].train_step(rng);
                }
            }
        }
    }
}

/// Exploitability of the two agents' average-policy profile.
pub fn nfsp_profile_exploitability<G: Game>(game: &G, agents: &[NfspAgent; 2]) -> f64 {
    let mut o0 = NetworkOracle::new(&agents[0].avg_net, &agents[0].avg_params);
    let mut o1 = NetworkOracle::new(&agents[1].avg_net, &agents[1].avg_params);
    exploitability(game, &mut o0, &mut o1).epsilon
}

/// Full NFSP training run with periodic exact evaluation. Stops at
/// `max_episodes` or when `time_budget_s` elapses, whichever comes first.
#[allow(clippy::too_many_arguments)]
pub fn run_nfsp<G: Game>(
    game: &G,
    q_net: GameNet,
    avg_net: GameNet,
    cfg: NfspConfig,
    max_episodes: u64,
    eval_every: u64,
    time_budget_s: Option<f64>,
    seed: u64,
    sink: &mut impl MetricSink,
) -> [NfspAgent; 2] {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut agents = [
        NfspAgent::new(PlayerId::P0, q_net.clone(), avg_net.clone(), cfg.clone(), &mut rng),
        NfspAgent::new(PlayerId::P1, q_net, avg_net, cfg, &mut rng),
    ];
    let start = std::time::Instant::now();
    let mut episode = 0u64;
    while episode < max_episodes {
        if let Some(budget) = time_budget_s {
            if start.elapsed().as_secs_f64() >= budget {
                break;
            }
        }
        play_nfsp_episode(game, &mut agents, &mut rng);
        episode += 1;
        if episode % eval_every == 0 || episode == max_episodes {
            let epsilon = nfsp_profile_exploitability(game, &agents);
            let (rl_loss, sl_loss) = agents[0].last_losses();
            sink.record(&MetricRow {
                episode,
                t_actions: agents[0].actions_taken + agents[1].actions_taken,
                exploitability: epsilon,
                rl_loss,
                sl_loss,
                wall_clock_s: start.elapsed().as_secs_f64(),
                seed,
                workers: 1,
            });
        }
    }
    agents
}
