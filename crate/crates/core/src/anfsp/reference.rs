//! Single-threaded reference for the parallel learner: the same per-episode
//! semantics written against plain owned state, with no locks, atomics, or
//! thread machinery. A one-worker [`super::run_anfsp`] must reproduce this
//! bit-exactly under the same seed, which pins down the concurrency
//! plumbing's observable behaviour.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use nasheq_nn::{
    apply_gradients, init_params, loss_and_gradients, GradStore, OptimizerCfg, ParamStore,
};

use crate::games::{sample_chance, ActionId, Game, InfoState, ToMove};
use crate::memory::{BestResponseSample, ReservoirBuffer, SampleBuffer};
use crate::nets::GameNet;
use crate::nfsp::{greedy_action, sample_legal, supervised_batch};

use super::{accumulate_transition, assign_epsilon0, worker_rng, AnfspConfig};

#[derive(Debug)]
pub struct ReferenceOutcome {
    pub q: ParamStore<f32>,
    pub q_target: ParamStore<f32>,
    pub avg: ParamStore<f32>,
    pub t_actions: u64,
    pub episodes: u64,
    pub sl_len: usize,
}

/// Runs exactly `max_episodes` episodes of the one-worker semantics.
pub fn run_reference<G: Game>(
    game: &G,
    q_net: GameNet,
    avg_net: GameNet,
    cfg: AnfspConfig,
    max_episodes: u64,
    seed: u64,
) -> ReferenceOutcome {
    use rand::SeedableRng;
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = init_params::<f32>(&q_net.spec, &mut init_rng);
    let mut q_target = q.clone();
    let mut avg = init_params::<f32>(&avg_net.spec, &mut init_rng);
    let mut m_sl: ReservoirBuffer<BestResponseSample> = ReservoirBuffer::new(cfg.sl_capacity);

    let mut rng = worker_rng(seed, 0);
    let epsilon0 = assign_epsilon0(&cfg, 0, &mut rng);
    let mut accumulator = GradStore::zeros_like(&q);
    let mut t_actions = 0u64;
    let mut episodes = 0u64;

    while episodes < max_episodes {
        // The worker freezes its target view at episode start; a refresh
        // triggered mid-episode only affects later episodes.
        let target_snapshot = q_target.clone();
        let epsilon = epsilon0 / (1.0 + episodes as f64).sqrt();
        let best_response = [rng.gen::<f64>() < cfg.eta, rng.gen::<f64>() < cfg.eta];
        let mut pending: [Option<(InfoState, ActionId)>; 2] = [None, None];

        let mut state = game.initial_state();
        loop {
            match game.to_move(&state) {
                ToMove::Terminal => {
                    let payoff = game.terminal_payoff(&state).expect("terminal");
                    for (i, slot) in pending.iter_mut().enumerate() {
                        if let Some((obs, action)) = slot.take() {
                            accumulate_transition(
                                &q_net, &q, &target_snapshot, cfg.gamma, &obs, action,
                                payoff[i], None, &mut accumulator, &mut rng,
                            );
                        }
                    }
                    break;
                }
                ToMove::Chance => {
                    state = sample_chance(game, &state, &mut rng).expect("chance node");
                }
                ToMove::Player(p) => {
                    let i = p.index();
                    let obs = game.encode_observation(&state, p);
                    let legal = game.legal_actions(&state).expect("decision node");
                    if let Some((prev_obs, prev_action)) = pending[i].take() {
                        accumulate_transition(
                            &q_net, &q, &target_snapshot, cfg.gamma, &prev_obs, prev_action,
                            0.0, Some((&obs, &legal)), &mut accumulator, &mut rng,
                        );
                    }
                    let action = if best_response[i] {
                        let action = if rng.gen::<f64>() < epsilon {
                            legal[rng.gen_range(0..legal.len())]
                        } else {
                            greedy_action(&q_net, &q, &obs, &legal)
                        };
                        m_sl.push(
                            BestResponseSample { player: p, obs: obs.clone(), action },
                            &mut rng,
                        );
                        action
                    } else {
                        let full = crate::nets::policy_of(&avg_net, &avg, &obs);
                        let dist = crate::eval::mask_renormalize(&full, &legal);
                        sample_legal(&legal, &dist, &mut rng)
                    };
                    pending[i] = Some((obs, action));
                    state = game.apply_action(&state, action).expect("legal action");
                    t_actions += 1;
                    if cfg.target_refresh_actions > 0
                        && t_actions % cfg.target_refresh_actions == 0
                    {
                        q_target = q.clone();
                    }
                }
            }
        }
        episodes += 1;
        if episodes % cfg.async_update_every == 0 {
            apply_gradients(&mut q, &accumulator, &OptimizerCfg::sgd(cfg.rl_lr as f32))
                .expect("shapes match");
            accumulator.set_zero();
            if m_sl.len() >= cfg.sl_batch {
                if let Some(samples) = m_sl.sample_minibatch(cfg.sl_batch, &mut rng) {
                    let batch =
                        supervised_batch(&avg_net, samples.iter().map(|s| (&s.obs, s.action)));
                    let (_, grads) = loss_and_gradients(&avg_net.spec, &avg, &batch, &mut rng)
                        .expect("finite supervised loss");
                    apply_gradients(&mut avg, &grads, &OptimizerCfg::sgd(cfg.sl_lr as f32))
                        .expect("shapes match");
                }
            }
        }
    }

    ReferenceOutcome {
        q,
        q_target,
        avg,
        t_actions,
        episodes,
        sl_len: m_sl.len(),
    }
}
