//! MC-NFSP: self-play where the best response comes from MCTS over a shared
//! policy-value network, the average strategy from a shared supervised
//! policy network. Search policies and episode outcomes feed a circular RL
//! memory as `(s, π, z)`; best-response search policies additionally feed a
//! reservoir SL memory as `(s, π)`.

use rand::Rng;

use nasheq_nn::{
    apply_gradients, init_params, loss_and_gradients, CrossEntropyBatch, LossBatch, OptimizerCfg,
    ParamStore, PolicyValueBatch,
};

use crate::eval::{exploitability, mask_renormalize};
use crate::games::{sample_chance, Game, InfoState, PlayerId, ToMove};
use crate::mcts::{sample_action, search, SearchConfig};
use crate::memory::{CircularBuffer, PolicyOutcome, PolicySample, ReservoirBuffer, SampleBuffer};
use crate::metrics::{MetricRow, MetricSink};
use crate::nets::{GameNet, NetworkEvaluator, NetworkOracle};

#[derive(Debug, Clone)]
pub struct McNfspConfig {
    /// Anticipatory parameter: probability a move (or episode, see
    /// `per_move_mixture`) comes from the search best response.
    pub eta: f64,
    /// Train both networks every this many episodes.
    pub update_every: u64,
    pub search: SearchConfig,
    pub rl_capacity: usize,
    pub sl_capacity: usize,
    pub rl_lr: f64,
    pub sl_lr: f64,
    pub batch_size: usize,
    pub batches_per_update: usize,
    /// Move-selection temperature is 1 for this many opening plies, then 0.
    pub exploration_plies: u32,
    /// Draw the policy source per move (true) or once per episode (false).
    pub per_move_mixture: bool,
}

impl Default for McNfspConfig {
    fn default() -> Self {
        McNfspConfig {
            eta: 0.1,
            update_every: 100,
            search: SearchConfig::default(),
            rl_capacity: 40_000,
            sl_capacity: 4_000,
            rl_lr: 0.01,
            sl_lr: 0.005,
            batch_size: 128,
            batches_per_update: 8,
            exploration_plies: 6,
            per_move_mixture: true,
        }
    }
}

/// One decision point of a finished episode.
#[derive(Debug, Clone)]
pub struct EpisodeStep {
    pub player: PlayerId,
    pub obs: InfoState,
    /// Distribution over action ids: the search policy for best-response
    /// moves, the masked average-network policy otherwise.
    pub policy: Vec<f64>,
    pub from_best_response: bool,
}

/// A finished episode: its steps and the outcome sign per player.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub steps: Vec<EpisodeStep>,
    /// `z` per player in {-1, 0, +1}; `z[0] = -z[1]`.
    pub outcome: [f64; 2],
}

/// The two shared networks plus both replay memories.
pub struct McNfsp {
    pub b_net: GameNet,
    pub b_params: ParamStore<f32>,
    pub avg_net: GameNet,
    pub avg_params: ParamStore<f32>,
    pub m_rl: CircularBuffer<PolicyOutcome>,
    pub m_sl: ReservoirBuffer<PolicySample>,
    pub cfg: McNfspConfig,
    episodes: u64,
    last_losses: (Option<f64>, Option<f64>),
}

impl McNfsp {
    pub fn new(b_net: GameNet, avg_net: GameNet, cfg: McNfspConfig, rng: &mut impl Rng) -> Self {
        let b_params = init_params::<f32>(&b_net.spec, rng);
        let avg_params = init_params::<f32>(&avg_net.spec, rng);
        McNfsp {
            b_net,
            b_params,
            avg_net,
            avg_params,
            m_rl: CircularBuffer::new(cfg.rl_capacity),
            m_sl: ReservoirBuffer::new(cfg.sl_capacity),
            cfg,
            episodes: 0,
            last_losses: (None, None),
        }
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn last_losses(&self) -> (Option<f64>, Option<f64>) {
        self.last_losses
    }
}

/// Plays one self-play episode: both seats share the networks; each move is
/// drawn from MCTS (best response) with probability η, else from the
/// average network.
pub fn play_episode<G: Game>(game: &G, learner: &McNfsp, rng: &mut impl Rng) -> EpisodeRecord {
    let cfg = &learner.cfg;
    let mut steps = Vec::new();
    let mut state = game.initial_state();
    let episode_source_is_br = rng.gen::<f64>() < cfg.eta;
    let mut ply = 0u32;
    loop {
        match game.to_move(&state) {
            ToMove::Terminal => {
                let payoff = game.terminal_payoff(&state).expect("terminal");
                let outcome = [payoff[0].signum(), payoff[1].signum()];
                return EpisodeRecord { steps, outcome };
            }
            ToMove::Chance => {
                state = sample_chance(game, &state, rng).expect("chance node");
            }
            ToMove::Player(player) => {
                let obs = game.encode_observation(&state, player);
                let legal = game.legal_actions(&state).expect("decision node");
                let from_best_response = if cfg.per_move_mixture {
                    rng.gen::<f64>() < cfg.eta
                } else {
                    episode_source_is_br
                };
                let (policy, action) = if from_best_response {
                    let temperature = if ply < cfg.exploration_plies { 1.0 } else { 0.0 };
                    let search_cfg = SearchConfig { temperature, ..cfg.search };
                    let mut evaluator = NetworkEvaluator::new(&learner.b_net, &learner.b_params);
                    let policy = search(game, &state, &mut evaluator, &search_cfg, rng);
                    let action = sample_action(&policy, 1.0, rng);
                    (policy, action)
                } else {
                    let full =
                        crate::nets::policy_of(&learner.avg_net, &learner.avg_params, &obs);
                    let dist = mask_renormalize(&full, &legal);
                    let action = crate::nfsp::sample_legal(&legal, &dist, rng);
                    let mut policy = vec![0.0; game.action_count()];
                    for (a, p) in legal.iter().zip(&dist) {
                        policy[a.index()] = *p;
                    }
                    (policy, action)
                };
                steps.push(EpisodeStep { player, obs, policy, from_best_response });
                state = game.apply_action(&state, action).expect("legal action");
                ply += 1;
            }
        }
    }
}

/// Stores a finished episode: every step goes to the RL memory with the
/// acting player's outcome; best-response steps also go to the SL memory.
pub fn store_episode(
    record: &EpisodeRecord,
    m_rl: &mut CircularBuffer<PolicyOutcome>,
    m_sl: &mut ReservoirBuffer<PolicySample>,
    rng: &mut impl Rng,
) {
    for step in &record.steps {
        m_rl.push(PolicyOutcome {
            obs: step.obs.clone(),
            policy: step.policy.clone(),
            outcome: record.outcome[step.player.index()],
        });
        if step.from_best_response {
            m_sl.push(PolicySample { obs: step.obs.clone(), policy: step.policy.clone() }, rng);
        }
    }
}

/// Trains the best-response network on `(s, π, z)` minibatches with the
/// combined policy-value loss, and the average network on `(s, π)` with
/// cross-entropy. Skipped until both memories hold a batch.
pub fn train_networks(learner: &mut McNfsp, rng: &mut impl Rng) -> Option<(f64, f64)> {
    let cfg = learner.cfg.clone();
    if learner.m_rl.len() < cfg.batch_size || learner.m_sl.len() < cfg.batch_size {
        return None;
    }
    let mut l1_total = 0.0;
    let mut l2_total = 0.0;
    for _ in 0..cfg.batches_per_update {
        let rl_batch = learner.m_rl.sample_minibatch(cfg.batch_size, rng)?;
        let batch = LossBatch::PolicyValue(PolicyValueBatch {
            inputs: rl_batch.iter().map(|s| learner.b_net.to_input(&s.obs)).collect(),
            policies: rl_batch
                .iter()
                .map(|s| s.policy.iter().map(|&p| p as f32).collect())
                .collect(),
            outcomes: rl_batch.iter().map(|s| s.outcome as f32).collect(),
        });
        let (l1, grads) = loss_and_gradients(&learner.b_net.spec, &learner.b_params, &batch, rng)
            .expect("finite policy-value loss");
        apply_gradients(
            &mut learner.b_params,
            &grads,
            &OptimizerCfg::adam(cfg.rl_lr as f32),
        )
        .expect("shapes match");
        l1_total += f64::from(l1);

        let sl_batch = learner.m_sl.sample_minibatch(cfg.batch_size, rng)?;
        let batch = LossBatch::CrossEntropy(CrossEntropyBatch {
            inputs: sl_batch.iter().map(|s| learner.avg_net.to_input(&s.obs)).collect(),
            targets: sl_batch
                .iter()
                .map(|s| s.policy.iter().map(|&p| p as f32).collect())
                .collect(),
        });
        let (l2, grads) =
            loss_and_gradients(&learner.avg_net.spec, &learner.avg_params, &batch, rng)
                .expect("finite cross-entropy loss");
        apply_gradients(
            &mut learner.avg_params,
            &grads,
            &OptimizerCfg::adam(cfg.sl_lr as f32),
        )
        .expect("shapes match");
        l2_total += f64::from(l2);
    }
    let n = cfg.batches_per_update as f64;
    let losses = (l1_total / n, l2_total / n);
    learner.last_losses = (Some(losses.0), Some(losses.1));
    Some(losses)
}

/// Exploitability of the shared average-policy profile.
pub fn mcnfsp_profile_exploitability<G: Game>(game: &G, learner: &McNfsp) -> f64 {
    let mut o0 = NetworkOracle::new(&learner.avg_net, &learner.avg_params);
    let mut o1 = NetworkOracle::new(&learner.avg_net, &learner.avg_params);
    exploitability(game, &mut o0, &mut o1).epsilon
}

/// Full training run: alternating self-play episodes, periodic training,
/// periodic exact evaluation of the average-policy profile.
#[allow(clippy::too_many_arguments)]
pub fn run_mc_nfsp<G: Game>(
    game: &G,
    b_net: GameNet,
    avg_net: GameNet,
    cfg: McNfspConfig,
    max_episodes: u64,
    eval_every: u64,
    time_budget_s: Option<f64>,
    seed: u64,
    sink: &mut impl MetricSink,
) -> McNfsp {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut learner = McNfsp::new(b_net, avg_net, cfg, &mut rng);
    let start = std::time::Instant::now();
    while learner.episodes < max_episodes {
        if let Some(budget) = time_budget_s {
            if start.elapsed().as_secs_f64() >= budget {
                break;
            }
        }
        let record = play_episode(game, &learner, &mut rng);
        store_episode(&record, &mut learner.m_rl, &mut learner.m_sl, &mut rng);
        learner.episodes += 1;
        if learner.episodes % learner.cfg.update_every == 0 {
            train_networks(&mut learner, &mut rng);
        }
        if learner.episodes % eval_every == 0 || learner.episodes == max_episodes {
            let epsilon = mcnfsp_profile_exploitability(game, &learner);
            let (l1, l2) = learner.last_losses;
            sink.record(&MetricRow {
                episode: learner.episodes,
                t_actions: 0,
                exploitability: epsilon,
                rl_loss: l1,
                sl_loss: l2,
                wall_clock_s: start.elapsed().as_secs_f64(),
                seed,
                workers: 1,
            });
        }
    }
    learner
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::Othello4;
    use crate::nets::{othello_avg_net, othello_policy_value_net};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_learner(rng: &mut ChaCha8Rng, cfg: McNfspConfig) -> McNfsp {
        McNfsp::new(othello_policy_value_net(), othello_avg_net(), cfg, rng)
    }

    fn fast_cfg() -> McNfspConfig {
        McNfspConfig {
            search: SearchConfig { simulations: 8, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn eta_one_flags_every_step_best_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let learner = small_learner(&mut rng, McNfspConfig { eta: 1.0, ..fast_cfg() });
        let record = play_episode(&Othello4, &learner, &mut rng);
        assert!(!record.steps.is_empty());
        assert!(record.steps.iter().all(|s| s.from_best_response));
    }

    #[test]
    fn outcomes_are_zero_sum_signs_matching_terminal_payoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let learner = small_learner(&mut rng, McNfspConfig { eta: 0.5, ..fast_cfg() });
        for _ in 0..10 {
            let record = play_episode(&Othello4, &learner, &mut rng);
            assert_eq!(record.outcome[0], -record.outcome[1]);
            assert!(record.outcome[0].abs() <= 1.0);
            for step in &record.steps {
                let sum: f64 = step.policy.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "step policy must be a distribution");
            }
        }
    }

    #[test]
    fn storage_gates_supervised_memory_on_best_response_flag() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let learner = small_learner(&mut rng, fast_cfg());
        let mut m_rl = CircularBuffer::new(1000);
        let mut m_sl = ReservoirBuffer::new(1000);

        let mut record = play_episode(&Othello4, &learner, &mut rng);
        for step in &mut record.steps {
            step.from_best_response = false;
        }
        store_episode(&record, &mut m_rl, &mut m_sl, &mut rng);
        assert_eq!(m_rl.len(), record.steps.len());
        assert_eq!(m_sl.len(), 0);

        record.steps[0].from_best_response = true;
        store_episode(&record, &mut m_rl, &mut m_sl, &mut rng);
        assert_eq!(m_sl.len(), 1);
        assert_eq!(m_rl.len(), 2 * record.steps.len());
    }

    #[test]
    fn stored_outcomes_match_acting_player_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let learner = small_learner(&mut rng, fast_cfg());
        let record = play_episode(&Othello4, &learner, &mut rng);
        let mut m_rl = CircularBuffer::new(1000);
        let mut m_sl = ReservoirBuffer::new(1000);
        store_episode(&record, &mut m_rl, &mut m_sl, &mut rng);
        for (stored, step) in m_rl.iter().zip(&record.steps) {
            assert_eq!(stored.outcome, record.outcome[step.player.index()]);
        }
    }

    #[test]
    fn training_overfits_a_frozen_memory() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut learner = small_learner(
            &mut rng,
            McNfspConfig { batch_size: 16, batches_per_update: 2, ..fast_cfg() },
        );
        while learner.m_rl.len() < 16 || learner.m_sl.len() < 16 {
            let mut record = play_episode(&Othello4, &learner, &mut rng);
            for step in &mut record.steps {
                step.from_best_response = true;
            }
            store_episode(&record, &mut learner.m_rl, &mut learner.m_sl, &mut rng);
        }
        let mut first_window = 0.0;
        let mut last_window = 0.0;
        let rounds = 50;
        for i in 0..rounds {
            let (l1, l2) = train_networks(&mut learner, &mut rng).expect("memories ready");
            if i < 10 {
                first_window += l1 + l2;
            }
            if i >= rounds - 10 {
                last_window += l1 + l2;
            }
        }
        assert!(
            last_window < first_window,
            "losses failed to trend down: {last_window} vs {first_window}"
        );
    }

    #[test]
    fn run_is_seed_deterministic() {
        let game = Othello4;
        let cfg = McNfspConfig {
            batch_size: 8,
            batches_per_update: 1,
            update_every: 5,
            search: SearchConfig { simulations: 4, ..Default::default() },
            ..Default::default()
        };
        let mut t1 = Vec::new();
        let mut t2 = Vec::new();
        run_mc_nfsp(&game, othello_policy_value_net(), othello_avg_net(), cfg.clone(), 20, 10, None, 7, &mut t1);
        run_mc_nfsp(&game, othello_policy_value_net(), othello_avg_net(), cfg, 20, 10, None, 7, &mut t2);
        // Everything except wall-clock time must reproduce bit-exactly.
        let strip = |rows: &[crate::metrics::MetricRow]| -> Vec<(u64, f64, Option<f64>, Option<f64>)> {
            rows.iter().map(|r| (r.episode, r.exploitability, r.rl_loss, r.sl_loss)).collect()
        };
        assert_eq!(strip(&t1), strip(&t2));
    }
}
