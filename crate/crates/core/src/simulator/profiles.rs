//! Synthetic load/generation profile deviations: slow sinusoids plus
//! seeded band-limited noise, expressed as fractional deviations of a
//! load's rated demand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amp_frac: f64,
    pub period_s: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileEntry {
    /// Load unit this profile modulates. Photovoltaic generation enters as
    /// a load with negative rating.
    pub load: String,
    #[serde(default)]
    pub sinusoids: Vec<Sinusoid>,
    #[serde(default)]
    pub noise_frac: f64,
    #[serde(default = "default_cutoff")]
    pub noise_cutoff_hz: f64,
}

fn default_cutoff() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSet {
    pub entries: Vec<ProfileEntry>,
}

/// Stateful per-entry sampler; one call per simulation step, in order.
pub struct ProfileSampler {
    entries: Vec<EntryState>,
}

struct EntryState {
    spec: ProfileEntry,
    rng: ChaCha8Rng,
    filter: f64,
    alpha: f64,
}

impl ProfileSampler {
    pub fn new(set: Option<&ProfileSet>, seed: u64, dt: f64) -> Self {
        let entries = set
            .map(|s| {
                s.entries
                    .iter()
                    .enumerate()
                    .map(|(i, spec)| {
                        let alpha = (-2.0 * std::f64::consts::PI * spec.noise_cutoff_hz * dt).exp();
                        EntryState {
                            spec: spec.clone(),
                            rng: ChaCha8Rng::seed_from_u64(
                                seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(i as u64 + 1)),
                            ),
                            filter: 0.0,
                            alpha,
                        }
                    })
                    .collect()
            })
            .unwrap_or_default();
        ProfileSampler { entries }
    }

    pub fn load_ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.spec.load.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fractional deviations of each profiled load at global time `t`.
    /// Advances the noise filters by one step.
    pub fn sample(&mut self, t: f64) -> Vec<f64> {
        self.entries
            .iter_mut()
            .map(|e| {
                let mut v = 0.0;
                for s in &e.spec.sinusoids {
                    v += s.amp_frac
                        * (2.0 * std::f64::consts::PI * t / s.period_s + s.phase_rad).sin();
                }
                if e.spec.noise_frac != 0.0 {
                    let w: f64 = e.rng.gen_range(-1.0..1.0);
                    e.filter = e.alpha * e.filter + (1.0 - e.alpha) * w;
                    v += e.spec.noise_frac * e.filter;
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let set = ProfileSet {
            entries: vec![ProfileEntry {
                load: "ld".into(),
                sinusoids: vec![Sinusoid {
                    amp_frac: 0.02,
                    period_s: 60.0,
                    phase_rad: 0.0,
                }],
                noise_frac: 0.01,
                noise_cutoff_hz: 0.5,
            }],
        };
        let mut a = ProfileSampler::new(Some(&set), 42, 1e-3);
        let mut b = ProfileSampler::new(Some(&set), 42, 1e-3);
        for k in 0..100 {
            let t = k as f64 * 1e-3;
            assert_eq!(a.sample(t), b.sample(t));
        }
        let mut c = ProfileSampler::new(Some(&set), 43, 1e-3);
        let va: Vec<f64> = (0..50).map(|k| a.sample(k as f64 * 1e-3)[0]).collect();
        let vc: Vec<f64> = (0..50).map(|k| c.sample(k as f64 * 1e-3)[0]).collect();
        assert_ne!(va, vc);
    }
}
