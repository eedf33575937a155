//! Global-norm gradient clipping, the stepped learning-rate schedule, and
//! plain gradient descent with tied storages updated once.

use super::backward::Gradients;
use super::TrainConfig;
use crate::model::MemN2NParams;

/// Rescale every entry by max_norm/N when the global L2 norm N exceeds
/// max_norm (strictly); a norm of exactly max_norm passes through.
pub fn clip_gradients(mut grads: Gradients, max_norm: f64) -> Gradients {
    let norm = grads.global_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    grads
}

/// lr(epoch) = lr0 * factor^floor((epoch-1)/every), epoch 1-based.
pub fn lr_schedule(config: &TrainConfig, epoch: usize) -> f64 {
    debug_assert!(epoch >= 1);
    let halvings = (epoch - 1) / config.decay_every;
    config.lr0 * config.decay_factor.powi(halvings as i32)
}

/// θ ← θ − lr·g on every free storage; aliased roles move together because
/// they share the storage. Padding-token columns are re-zeroed afterwards.
pub fn sgd_step(params: &mut MemN2NParams, grads: &Gradients, lr: f64) {
    let mut storages = params.storages_mut();
    let grad_storages = grads.storages();
    assert_eq!(storages.len(), grad_storages.len());
    for ((_, theta), g) in storages.iter_mut().zip(grad_storages) {
        assert_eq!(theta.shape(), g.shape());
        for (t, gv) in theta.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *t -= lr * gv;
        }
    }
    params.zero_null_columns();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig, Tying};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_params(seed: u64) -> MemN2NParams {
        let config = ModelConfig {
            d: 2,
            hops: 2,
            tying: Tying::Layerwise,
            memory_capacity: 3,
            answer_size: 3,
            vocab_size: 4,
            linear_attention: false,
        };
        init_params(&config, &mut ChaCha8Rng::seed_from_u64(seed), None).unwrap()
    }

    fn constant_grads(params: &MemN2NParams, value: f64) -> Gradients {
        let mut g = Gradients::zeros_like(params);
        for m in g.storages_mut() {
            for x in m.as_mut_slice() {
                *x = value;
            }
        }
        g
    }

    #[test]
    fn below_threshold_is_untouched() {
        let params = small_params(1);
        let g = constant_grads(&params, 0.1);
        let norm = g.global_norm();
        assert!(norm < 40.0);
        let clipped = clip_gradients(g.clone(), 40.0);
        assert_eq!(clipped, g);
    }

    #[test]
    fn oversized_norm_is_rescaled_to_the_bound() {
        let params = small_params(1);
        let g = constant_grads(&params, 1.0);
        let n_entries: usize = g.storages().iter().map(|m| m.len()).sum();
        let norm = (n_entries as f64).sqrt();
        let max = norm / 2.0;
        let clipped = clip_gradients(g, max);
        assert!((clipped.global_norm() - max).abs() < 1e-9);
        // every entry halved
        assert!((clipped.storages()[0].as_slice()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_boundary_passes_through() {
        let params = small_params(1);
        let mut g = Gradients::zeros_like(&params);
        g.storages_mut()[0].as_mut_slice()[0] = 40.0;
        assert_eq!(g.global_norm(), 40.0);
        let clipped = clip_gradients(g.clone(), 40.0);
        assert_eq!(clipped, g);
    }

    #[test]
    fn schedule_reproduces_the_reference_values() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_schedule(&cfg, 1), 0.005);
        assert_eq!(lr_schedule(&cfg, 25), 0.005);
        assert_eq!(lr_schedule(&cfg, 26), 0.0025);
        assert_eq!(lr_schedule(&cfg, 100), 0.000625);
    }

    #[test]
    fn zero_lr_changes_nothing() {
        let mut params = small_params(2);
        let before = params.clone();
        let g = constant_grads(&params, 3.0);
        sgd_step(&mut params, &g, 0.0);
        assert_eq!(params, before);
    }

    #[test]
    fn single_step_matches_hand_arithmetic() {
        let mut params = small_params(3);
        let theta = params.storages()[0].1[(1, 1)];
        let g = constant_grads(&params, 2.0);
        sgd_step(&mut params, &g, 0.25);
        assert!((params.storages()[0].1[(1, 1)] - (theta - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn two_half_steps_equal_one_full_step_on_fixed_gradient() {
        let mut a = small_params(4);
        let mut b = a.clone();
        let g = constant_grads(&a, 1.5);
        sgd_step(&mut a, &g, 0.1);
        sgd_step(&mut b, &g, 0.05);
        sgd_step(&mut b, &g, 0.05);
        for ((_, ma), (_, mb)) in a.storages().iter().zip(b.storages()) {
            for (x, y) in ma.as_slice().iter().zip(mb.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn null_columns_stay_zero_after_steps() {
        let mut params = small_params(5);
        let g = constant_grads(&params, 1.0);
        sgd_step(&mut params, &g, 0.5);
        assert_eq!(params.b().column(0), vec![0.0; 2]);
        assert_eq!(params.a(1).column(0), vec![0.0; 2]);
        assert_eq!(params.c(1).column(0), vec![0.0; 2]);
    }

    #[test]
    fn tying_structure_survives_many_steps() {
        let config = ModelConfig {
            d: 2,
            hops: 3,
            tying: Tying::Adjacent,
            memory_capacity: 3,
            answer_size: 3,
            vocab_size: 4,
            linear_attention: false,
        };
        let mut params = init_params(&config, &mut ChaCha8Rng::seed_from_u64(6), None).unwrap();
        let g = constant_grads(&params, 0.3);
        for _ in 0..10 {
            sgd_step(&mut params, &g, 0.01);
        }
        params.c_mut(1)[(0, 1)] = 77.0;
        assert_eq!(params.a(2)[(0, 1)], 77.0);
        assert_eq!(params.w_entry(2, 1), params.c(3)[(1, 2)]);
    }
}
