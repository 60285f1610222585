//! Central finite-difference gradient checking.
//!
//! Instantiate the stack at `f64` when calling this: the default step of
//! 1e-5 needs double precision to resolve relative errors below 1e-4.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::loss::{loss_and_gradients, LossBatch};
use crate::params::init_params;
use crate::spec::NetworkSpec;
use crate::NnError;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_rel_err: f64,
    /// Coordinate of the worst disagreement, as `(tensor name, flat index)`.
    pub worst: Option<(String, usize)>,
}

/// Compares analytic gradients against central finite differences
/// `(L(θ+h) - L(θ-h)) / 2h` on `n_coords` uniformly sampled parameter
/// coordinates. Dropout masks are drawn from a fixed stream so every loss
/// evaluation sees the same masks.
pub fn check_gradients(
    spec: &NetworkSpec,
    batch: &LossBatch<f64>,
    seed: u64,
    n_coords: usize,
    step: f64,
) -> Result<GradCheckReport, NnError> {
    let params = init_params::<f64>(spec, &mut ChaCha8Rng::seed_from_u64(seed));
    let mask_seed = seed ^ 0x5eed_d50f;
    let loss_of = |p: &crate::ParamStore<f64>| -> Result<f64, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
        Ok(loss_and_gradients(spec, p, batch, &mut rng)?.0)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
    let (_, grads) = loss_and_gradients(spec, &params, batch, &mut rng)?;

    let coords: Vec<(String, usize)> = params
        .tensors()
        .iter()
        .flat_map(|(name, t)| {
            let name = name.clone();
            (0..t.len()).map(move |i| (name.clone(), i))
        })
        .collect();
    let mut coord_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));

    let mut max_rel_err = 0.0f64;
    let mut worst = None;
    for _ in 0..n_coords {
        let (name, idx) = coords[coord_rng.gen_range(0..coords.len())].clone();
        let mut plus = params.clone();
        plus.get_mut(&name)?.data_mut()[idx] += step;
        let mut minus = params.clone();
        minus.get_mut(&name)?.data_mut()[idx] -= step;
        let fd = (loss_of(&plus)? - loss_of(&minus)?) / (2.0 * step);
        let analytic = grads.get(&name)?.data()[idx];
        let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-3);
        if rel > max_rel_err {
            max_rel_err = rel;
            worst = Some((name, idx));
        }
    }
    Ok(GradCheckReport { coords_checked: n_coords, max_rel_err, worst })
}
