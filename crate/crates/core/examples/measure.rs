use nasheq_core::games::NormalFormGame;
use nasheq_core::metrics::MetricRow;
use nasheq_core::nfsp::{run_nfsp, NfspConfig};
use nasheq_core::nets::{normal_form_avg_net, normal_form_q_net};
use std::time::Instant;

fn main() {
    let game = NormalFormGame::matching_pennies();
    for (rl_cap, train_every, batch, refresh) in [
        (500usize, 2u64, 64usize, 20u64),
        (1000, 4, 128, 30),
        (2000, 8, 128, 50),
    ] {
        let cfg = NfspConfig {
            eta: 0.1, epsilon0: 0.6, batch_size: batch, train_every,
            target_refresh: refresh, rl_capacity: rl_cap, sl_capacity: 20_000,
            ..Default::default()
        };
        for seed in [1u64, 2, 3] {
            let t = Instant::now();
            let mut trace: Vec<MetricRow> = Vec::new();
            run_nfsp(&game, normal_form_q_net(2), normal_form_avg_net(2), cfg.clone(),
                     20_000, 2000, None, seed, &mut trace);
            let eps: Vec<String> = trace.iter().map(|r| format!("{:.3}", r.exploitability)).collect();
            println!("cap={rl_cap} te={train_every} b={batch} tr={refresh} seed={seed} ({:.0?}): {}",
                t.elapsed(), eps.join(" "));
        }
    }
}
