//! The online-evaluation noise stage: stochastic effects a live RAN stack
//! adds on top of the offline lookup-table model.
//!
//! Three effects, each configurable: log-normal fading on realized
//! throughput, Gaussian measurement noise on the observed normalized
//! pathloss, and a capacity haircut on epochs where every slice is
//! demand-saturated. Rewards are always computed from realized quantities,
//! never from the perturbed observation.

use serde::{Deserialize, Serialize};

use crate::config::Violation;
use crate::env::SliceEnv;
use crate::rng::RandomSource;

/// Magnitudes of the online environment's stochastic effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of the log-normal throughput perturbation, in dB.
    pub fading_std_db: f64,
    /// Standard deviation of the additive noise on observed normalized
    /// pathloss.
    pub measurement_noise_std: f64,
    /// Fractional capacity loss applied when all three slices are
    /// demand-saturated.
    pub contention_loss_frac: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            fading_std_db: 2.0,
            measurement_noise_std: 0.02,
            contention_loss_frac: 0.05,
        }
    }
}

impl NoiseConfig {
    /// All effects disabled; the wrapped environment is bit-identical to the
    /// base one.
    pub fn zero() -> Self {
        Self {
            fading_std_db: 0.0,
            measurement_noise_std: 0.0,
            contention_loss_frac: 0.0,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        for (key, x) in [
            ("fading_std_db", self.fading_std_db),
            ("measurement_noise_std", self.measurement_noise_std),
            ("contention_loss_frac", self.contention_loss_frac),
        ] {
            if !(x >= 0.0) {
                v.push(Violation {
                    key: key.to_string(),
                    message: format!("must be nonnegative, got {x}"),
                });
            }
        }
        if self.contention_loss_frac > 1.0 {
            v.push(Violation {
                key: "contention_loss_frac".to_string(),
                message: format!("must not exceed 1, got {}", self.contention_loss_frac),
            });
        }
        v
    }
}

/// Wraps an environment with the given noise magnitudes; the step/reset
/// contract is unchanged. The noise stream is derived from the episode seed,
/// so wrapped trajectories stay reproducible.
pub fn wrap_env(mut env: SliceEnv, noise: NoiseConfig) -> SliceEnv {
    env.set_noise_config(noise);
    env.with_noise_enabled()
}

/// Draws one fading perturbation in dB.
pub fn draw_fading_db(rng: &mut RandomSource, std_db: f64) -> f64 {
    rng.gaussian(0.0, std_db)
}

/// Converts a dB perturbation into the multiplicative throughput factor.
pub fn fading_multiplier(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_table, ThroughputModel};
    use crate::config::ScenarioConfig;
    use approx::assert_abs_diff_eq;

    fn offline_env() -> SliceEnv {
        let scenario = ScenarioConfig::default();
        let prbs: Vec<u32> = (0..=106).collect();
        let table = generate_table(&scenario.network, 1.0, &prbs).unwrap();
        SliceEnv::new(scenario, ThroughputModel::Table(table))
    }

    #[test]
    fn zero_noise_wrapper_is_transparent() {
        let mut base = offline_env();
        let mut wrapped = wrap_env(offline_env(), NoiseConfig::zero());
        let mut obs_a = base.reset(21);
        let mut obs_b = wrapped.reset(21);
        assert_eq!(obs_a, obs_b);
        for i in 0..256 {
            let idx = (i * 131) % 3003;
            let a = base.step(idx).unwrap();
            let b = wrapped.step(idx).unwrap();
            assert_eq!(a.reward.to_bits(), b.reward.to_bits());
            assert_eq!(a.record.latencies_ms, b.record.latencies_ms);
            assert_eq!(a.record.embb_mbps, b.record.embb_mbps);
            obs_a = a.obs;
            obs_b = b.obs;
            assert_eq!(obs_a, obs_b);
        }
    }

    #[test]
    fn fading_draws_have_configured_std() {
        let mut rng = RandomSource::new(33);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| draw_fading_db(&mut rng, 2.0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert_abs_diff_eq!(std, 2.0, epsilon = 0.05);
        assert_abs_diff_eq!(mean, 0.0, epsilon = 0.05);
    }

    #[test]
    fn fading_multiplier_round_trip() {
        assert_eq!(fading_multiplier(0.0), 1.0);
        assert_abs_diff_eq!(10.0 * fading_multiplier(3.0).log10(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn observed_pathloss_stays_in_unit_interval_under_heavy_noise() {
        let noise = NoiseConfig {
            measurement_noise_std: 5.0,
            ..NoiseConfig::zero()
        };
        let mut env = wrap_env(offline_env(), noise);
        let mut obs = env.reset(4);
        for i in 0..256 {
            for (j, x) in obs.as_slice().iter().enumerate() {
                assert!((0.0..=1.0).contains(x), "entry {j} = {x}");
            }
            obs = env.step(i % 3003).unwrap().obs;
        }
    }

    #[test]
    fn noisy_env_differs_from_base_but_is_reproducible() {
        let mut base = offline_env();
        let mut noisy_a = wrap_env(offline_env(), NoiseConfig::default());
        let mut noisy_b = wrap_env(offline_env(), NoiseConfig::default());
        base.reset(8);
        noisy_a.reset(8);
        noisy_b.reset(8);
        let mut diverged = false;
        for i in 0..64 {
            let idx = (i * 61) % 3003;
            let x = base.step(idx).unwrap();
            let y = noisy_a.step(idx).unwrap();
            let z = noisy_b.step(idx).unwrap();
            assert_eq!(y.reward.to_bits(), z.reward.to_bits());
            assert_eq!(y.obs, z.obs);
            if x.reward.to_bits() != y.reward.to_bits() {
                diverged = true;
            }
        }
        assert!(diverged, "default noise should perturb rewards");
    }

    #[test]
    fn negative_magnitudes_rejected() {
        let bad = NoiseConfig {
            fading_std_db: -1.0,
            ..NoiseConfig::default()
        };
        let v = bad.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "fading_std_db");
    }
}
