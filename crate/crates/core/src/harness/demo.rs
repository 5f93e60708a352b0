//! Least-squares gradient descent on fixed-point gradients, run once through
//! the scheme under attack and once by summing the gradients directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{AttackKind, AttackSpec};
use crate::alphabet::{Alphabet, GradientVec, IndexRange, Symbol};
use crate::assignment::SystemConfig;
use crate::derive_seed;
use crate::error::Result;
use crate::protocol::run_scheme;

/// Symmetric fixed point: `clamp(round(x 2^f), -(2^(k-1) - 1), 2^(k-1) - 1)`,
/// stored in two's complement modulo `2^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantizer {
    pub alphabet: Alphabet,
    pub frac_bits: u32,
}

impl Quantizer {
    fn limit(&self) -> i64 {
        (1i64 << (self.alphabet.size_log2() - 1)) - 1
    }

    pub fn quantize(&self, x: f64) -> Symbol {
        let scaled = (x * (1u64 << self.frac_bits) as f64).round();
        let q = scaled.clamp(-(self.limit() as f64), self.limit() as f64) as i64;
        self.alphabet.reduce_signed(q)
    }

    pub fn dequantize(&self, s: Symbol) -> f64 {
        let k = self.alphabet.size_log2();
        let v = s.value() as i64;
        let signed = if v >= 1i64 << (k - 1) {
            v - (1i64 << k)
        } else {
            v
        };
        signed as f64 / (1u64 << self.frac_bits) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoTrainingConfig {
    pub d: usize,
    pub p: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub k: u32,
    pub frac_bits: u32,
    pub s: usize,
    pub u: usize,
    pub m: usize,
    pub attack: AttackKind,
    pub seed: u64,
}

impl Default for DemoTrainingConfig {
    fn default() -> Self {
        Self {
            d: 8,
            p: 16,
            iterations: 20,
            learning_rate: 0.1,
            k: 32,
            frac_bits: 16,
            s: 2,
            u: 1,
            m: 1,
            attack: AttackKind::Symmetrization,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// Parameters before each step, plus the final ones.
    pub thetas: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    pub local_computations: Vec<usize>,
}

impl Trajectory {
    pub fn bit_identical(&self, other: &Trajectory) -> bool {
        self.thetas.len() == other.thetas.len()
            && self.thetas.iter().zip(&other.thetas).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

struct Problem {
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl Problem {
    fn new(cfg: &DemoTrainingConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 30, 0));
        let target: Vec<f64> = (0..cfg.d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..cfg.p)
            .map(|_| (0..cfg.d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let ys = xs
            .iter()
            .map(|x| dot(x, &target) + rng.gen_range(-0.01..0.01))
            .collect();
        Self { xs, ys }
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        self.xs
            .iter()
            .zip(&self.ys)
            .map(|(x, y)| (dot(x, theta) - y).powi(2))
            .sum::<f64>()
            / (2 * self.xs.len()) as f64
    }

    fn gradients(&self, theta: &[f64], q: &Quantizer) -> Vec<GradientVec> {
        self.xs
            .iter()
            .zip(&self.ys)
            .map(|(x, y)| {
                let r = dot(x, theta) - y;
                let vals: Vec<u64> = x
                    .iter()
                    .map(|xi| q.quantize(r * xi).value() as u64)
                    .collect();
                q.alphabet
                    .vector(&vals)
                    .expect("quantized symbols are in range")
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn descend(
    cfg: &DemoTrainingConfig,
    mut aggregate: impl FnMut(usize, &[GradientVec]) -> Result<(GradientVec, usize)>,
) -> Result<Trajectory> {
    let q = Quantizer {
        alphabet: Alphabet::new(cfg.k)?,
        frac_bits: cfg.frac_bits,
    };
    let problem = Problem::new(cfg);
    let mut theta = vec![0.0; cfg.d];
    let mut traj = Trajectory {
        thetas: Vec::new(),
        losses: Vec::new(),
        local_computations: Vec::new(),
    };
    for step in 0..cfg.iterations {
        traj.thetas.push(theta.clone());
        traj.losses.push(problem.loss(&theta));
        let grads = problem.gradients(&theta, &q);
        let (sum, c) = aggregate(step, &grads)?;
        traj.local_computations.push(c);
        for (t, g) in theta.iter_mut().zip(sum.symbols()) {
            *t -= cfg.learning_rate * q.dequantize(*g) / cfg.p as f64;
        }
    }
    traj.losses.push(problem.loss(&theta));
    traj.thetas.push(theta);
    Ok(traj)
}

/// Gradients aggregated by the coded scheme under `cfg.attack`.
pub fn run_demo_gd(cfg: &DemoTrainingConfig) -> Result<Trajectory> {
    let sys = SystemConfig::new(cfg.s, cfg.u, cfg.m, cfg.p, cfg.d, cfg.k, cfg.seed)?;
    descend(cfg, |step, grads| {
        let attack = AttackSpec::new(&sys, cfg.attack, derive_seed(cfg.seed, 31, step as u64));
        let out = run_scheme(&sys, &attack, grads)?;
        Ok((out.estimate, out.metrics.local_computations))
    })
}

/// Attack-free baseline: the exact sum of the quantized gradients.
pub fn run_direct_gd(cfg: &DemoTrainingConfig) -> Result<Trajectory> {
    let a = Alphabet::new(cfg.k)?;
    descend(cfg, |_, grads| {
        Ok((a.sum_range(grads, IndexRange::new(1, grads.len())?)?, 0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantizer_round_trips_and_clamps() {
        let q = Quantizer {
            alphabet: Alphabet::new(8).unwrap(),
            frac_bits: 4,
        };
        assert_eq!(q.dequantize(q.quantize(1.25)), 1.25);
        assert_eq!(q.dequantize(q.quantize(-0.5)), -0.5);
        assert_eq!(q.dequantize(q.quantize(100.0)), 127.0 / 16.0);
        assert_eq!(q.dequantize(q.quantize(-100.0)), -127.0 / 16.0);
    }
}
