//! Reproducible multichannel Wiener increments.
//!
//! Each Gaussian draw is addressed by `(base seed, replica, level, step,
//! channel)`: the base seed keys a ChaCha8 generator, the replica selects its
//! stream, and the remaining coordinates select a 64-byte block within the
//! stream. Two uniforms from that block give one normal via Box-Muller, so a
//! draw never depends on how many other draws were made before it.
//!
//! Level 0 holds i.i.d. `N(0, dt)` increments. Level `ℓ+1` is the Brownian
//! bridge refinement of level `ℓ`: each coarse increment is split into two
//! halves that sum back to it exactly.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SllgError};

/// Identity of the increment generator, recorded in run manifests.
pub const GENERATOR_ID: &str = "chacha8-stream/block-per-draw/box-muller/bridge-v1";

const WORDS_PER_DRAW: u128 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedDescriptor {
    pub base_seed: u64,
    pub replica: u64,
    pub level: u32,
}

/// Counter-based normal generator for one `(base seed, replica)` stream.
#[derive(Clone)]
pub struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn new(base_seed: u64, replica: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(replica);
        Self { rng }
    }

    /// Standard normal draw at `(level, step, channel)`.
    pub fn draw(&mut self, level: u32, step: u64, channel: u32) -> f64 {
        assert!(level < 256 && step < (1 << 40) && channel < (1 << 16));
        let counter = ((level as u128) << 56) | ((step as u128) << 16) | channel as u128;
        self.rng.set_word_pos(counter * WORDS_PER_DRAW);
        let u1 = 1.0 - unit_interval(self.rng.next_u64());
        let u2 = unit_interval(self.rng.next_u64());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

// 53-bit uniform in [0, 1).
fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    channels: usize,
    dt: f64,
    steps: usize,
    // Step-major: increments[step * channels + channel].
    increments: Vec<f64>,
    seed: SeedDescriptor,
}

impl WienerPath {
    pub fn generate(base_seed: u64, replica: u64, channels: usize, dt: f64, steps: usize) -> Self {
        let mut stream = NormalStream::new(base_seed, replica);
        let scale = dt.sqrt();
        let mut increments = Vec::with_capacity(steps * channels);
        for m in 0..steps {
            for j in 0..channels {
                increments.push(scale * stream.draw(0, m as u64, j as u32));
            }
        }
        Self {
            channels,
            dt,
            steps,
            increments,
            seed: SeedDescriptor {
                base_seed,
                replica,
                level: 0,
            },
        }
    }

    /// A path with explicitly given increments (step-major).
    pub fn from_increments(channels: usize, dt: f64, increments: Vec<f64>) -> Result<Self> {
        if channels == 0 && !increments.is_empty() {
            return Err(SllgError::PathMismatch(
                "increments given for a path without channels".into(),
            ));
        }
        if channels > 0 && !increments.len().is_multiple_of(channels) {
            return Err(SllgError::PathMismatch(
                "increment count is not a multiple of the channel count".into(),
            ));
        }
        let steps = if channels == 0 {
            0
        } else {
            increments.len() / channels
        };
        Ok(Self {
            channels,
            dt,
            steps,
            increments,
            seed: SeedDescriptor {
                base_seed: 0,
                replica: 0,
                level: 0,
            },
        })
    }

    /// Noise-free path with the given number of steps.
    pub fn zero(channels: usize, dt: f64, steps: usize) -> Self {
        Self {
            channels,
            dt,
            steps,
            increments: vec![0.0; channels * steps],
            seed: SeedDescriptor {
                base_seed: 0,
                replica: 0,
                level: 0,
            },
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> SeedDescriptor {
        self.seed
    }

    /// Per-channel increments of step `m`.
    pub fn increment(&self, m: usize) -> &[f64] {
        &self.increments[m * self.channels..(m + 1) * self.channels]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W_j(T)` for every channel.
    pub fn totals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        for m in 0..self.steps {
            for (o, w) in out.iter_mut().zip(self.increment(m)) {
                *o += w;
            }
        }
        out
    }

    /// Brownian bridge refinement to `dt / 2`. The two fine increments of
    /// each coarse step sum to the coarse increment.
    pub fn refine(&self) -> WienerPath {
        let level = self.seed.level + 1;
        let mut stream = NormalStream::new(self.seed.base_seed, self.seed.replica);
        let spread = 0.5 * self.dt.sqrt();
        let mut increments = Vec::with_capacity(2 * self.increments.len());
        for m in 0..self.steps {
            let coarse = self.increment(m);
            let mut second = Vec::with_capacity(self.channels);
            for (j, dw) in coarse.iter().enumerate() {
                let z = stream.draw(level, m as u64, j as u32);
                increments.push(0.5 * dw + spread * z);
                second.push(0.5 * dw - spread * z);
            }
            increments.extend(second);
        }
        WienerPath {
            channels: self.channels,
            dt: 0.5 * self.dt,
            steps: 2 * self.steps,
            increments,
            seed: SeedDescriptor { level, ..self.seed },
        }
    }

    pub fn refined(&self, times: usize) -> WienerPath {
        (0..times).fold(self.clone(), |p, _| p.refine())
    }

    /// Pairwise sums: the path at `2·dt`.
    pub fn coarsen(&self) -> Result<WienerPath> {
        if !self.steps.is_multiple_of(2) {
            return Err(SllgError::PathMismatch(
                "cannot coarsen a path with an odd number of steps".into(),
            ));
        }
        let mut increments = Vec::with_capacity(self.increments.len() / 2);
        for m in (0..self.steps).step_by(2) {
            for (a, b) in self.increment(m).iter().zip(self.increment(m + 1)) {
                increments.push(a + b);
            }
        }
        Ok(WienerPath {
            channels: self.channels,
            dt: 2.0 * self.dt,
            steps: self.steps / 2,
            increments,
            seed: SeedDescriptor {
                level: self.seed.level.saturating_sub(1),
                ..self.seed
            },
        })
    }
}
