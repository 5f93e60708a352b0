//! System parameters and the fractional-repetition data assignment.
//!
//! Workers are split into `m` groups of `s + u` consecutive workers, and
//! group `l` holds the `l`-th contiguous block of `p / m` samples.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, IndexRange};
use crate::error::{config, Error, Result};

/// 1-based worker index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkerId(pub usize);

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_workers: usize,
    pub n_malicious: usize,
    pub honest_per_group: usize,
    pub n_groups: usize,
    pub n_samples: usize,
    pub dim: usize,
    pub alphabet: Alphabet,
    pub rng_seed: u64,
}

impl SystemConfig {
    /// Builds a validated configuration with `n = m (s + u)`.
    pub fn new(
        s: usize,
        u: usize,
        m: usize,
        p: usize,
        d: usize,
        k: u32,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            n_workers: m
                .checked_mul(s + u)
                .ok_or_else(|| Error::Config("n overflows".into()))?,
            n_malicious: s,
            honest_per_group: u,
            n_groups: m,
            n_samples: p,
            dim: d,
            alphabet: Alphabet::new(k)?,
            rng_seed: seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (s, u, m, p) = (
            self.n_malicious,
            self.honest_per_group,
            self.n_groups,
            self.n_samples,
        );
        if u < 1 {
            return config("u must be at least 1");
        }
        if m < 1 {
            return config("m must be at least 1");
        }
        if self.dim < 1 {
            return config("d must be at least 1");
        }
        if p < 1 || p % m != 0 {
            return config(format!("m = {m} must divide p = {p}"));
        }
        if self.n_workers != m * (s + u) {
            return config(format!(
                "n = {} but m(s+u) = {}",
                self.n_workers,
                m * (s + u)
            ));
        }
        Alphabet::new(self.alphabet.size_log2())?;
        Ok(())
    }

    pub fn group_size(&self) -> usize {
        self.n_malicious + self.honest_per_group
    }

    pub fn samples_per_group(&self) -> usize {
        self.n_samples / self.n_groups
    }

    pub fn workers(&self) -> impl Iterator<Item = WorkerId> {
        (1..=self.n_workers).map(WorkerId)
    }

    /// Group of worker `j`, computed as `ceil(j m / n)`.
    pub fn group_of(&self, w: WorkerId) -> Result<usize> {
        if w.0 == 0 || w.0 > self.n_workers {
            return Err(Error::Range(format!(
                "worker {} of {}",
                w.0, self.n_workers
            )));
        }
        Ok((w.0 * self.n_groups).div_ceil(self.n_workers))
    }

    pub fn group_of_sample(&self, i: usize) -> Result<usize> {
        if i == 0 || i > self.n_samples {
            return Err(Error::Range(format!("sample {i} of {}", self.n_samples)));
        }
        Ok((i * self.n_groups).div_ceil(self.n_samples))
    }

    pub fn samples_of_group(&self, g: usize) -> Result<IndexRange> {
        self.check_group(g)?;
        let per = self.samples_per_group();
        IndexRange::new((g - 1) * per + 1, g * per)
    }

    pub fn workers_of_group(&self, g: usize) -> Result<Vec<WorkerId>> {
        self.check_group(g)?;
        let size = self.group_size();
        Ok(((g - 1) * size + 1..=g * size).map(WorkerId).collect())
    }

    fn check_group(&self, g: usize) -> Result<()> {
        if g == 0 || g > self.n_groups {
            return Err(Error::Range(format!("group {g} of {}", self.n_groups)));
        }
        Ok(())
    }
}

/// Binary `p x n` matrix; entry `(i, j)` is set when worker `j` holds sample `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<bool>,
}

impl AssignmentMatrix {
    pub fn n_samples(&self) -> usize {
        self.rows
    }

    pub fn n_workers(&self) -> usize {
        self.cols
    }

    pub fn get(&self, sample: usize, worker: WorkerId) -> bool {
        self.entries[(sample - 1) * self.cols + worker.0 - 1]
    }

    pub fn row_weight(&self, sample: usize) -> usize {
        (1..=self.cols)
            .filter(|&j| self.get(sample, WorkerId(j)))
            .count()
    }

    pub fn column_weight(&self, worker: WorkerId) -> usize {
        (1..=self.rows).filter(|&i| self.get(i, worker)).count()
    }

    pub fn samples_of(&self, worker: WorkerId) -> Vec<usize> {
        (1..=self.rows).filter(|&i| self.get(i, worker)).collect()
    }
}

pub fn build_fractional_repetition(cfg: &SystemConfig) -> Result<AssignmentMatrix> {
    cfg.validate()?;
    let (rows, cols) = (cfg.n_samples, cfg.n_workers);
    let mut entries = vec![false; rows * cols];
    for j in 1..=cols {
        let range = cfg.samples_of_group(cfg.group_of(WorkerId(j))?)?;
        for i in range.iter() {
            entries[(i - 1) * cols + j - 1] = true;
        }
    }
    Ok(AssignmentMatrix {
        rows,
        cols,
        entries,
    })
}

/// Average number of workers per sample, `||B||_0 / p`.
pub fn replication_factor(b: &AssignmentMatrix) -> Ratio<u64> {
    let ones = b.entries.iter().filter(|&&e| e).count() as u64;
    Ratio::new(ones, b.rows as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_workers_two_groups() {
        let cfg = SystemConfig::new(1, 3, 2, 8, 2, 8, 0).unwrap();
        assert_eq!(cfg.n_workers, 8);
        let groups: Vec<_> = cfg.workers().map(|w| cfg.group_of(w).unwrap()).collect();
        assert_eq!(groups, vec![1, 1, 1, 1, 2, 2, 2, 2]);
        assert_eq!(
            cfg.samples_of_group(1).unwrap(),
            IndexRange::new(1, 4).unwrap()
        );
        assert_eq!(
            cfg.samples_of_group(2).unwrap(),
            IndexRange::new(5, 8).unwrap()
        );
        let b = build_fractional_repetition(&cfg).unwrap();
        assert!(b.get(1, WorkerId(4)) && !b.get(1, WorkerId(5)) && b.get(8, WorkerId(5)));
        assert_eq!(replication_factor(&b), Ratio::new(4, 1));
    }

    #[test]
    fn single_group_is_all_ones() {
        let cfg = SystemConfig::new(2, 1, 1, 5, 1, 4, 0).unwrap();
        let b = build_fractional_repetition(&cfg).unwrap();
        assert!((1..=5).all(|i| b.row_weight(i) == 3));
        assert_eq!(replication_factor(&b), Ratio::new(3, 1));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            SystemConfig::new(1, 1, 3, 8, 1, 8, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SystemConfig::new(1, 0, 1, 8, 1, 8, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SystemConfig::new(1, 1, 1, 8, 0, 8, 0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            SystemConfig::new(1, 1, 1, 8, 1, 33, 0),
            Err(Error::Config(_))
        ));
        let mut cfg = SystemConfig::new(1, 1, 1, 8, 1, 8, 0).unwrap();
        cfg.n_workers = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn out_of_range_worker() {
        let cfg = SystemConfig::new(1, 1, 1, 2, 1, 8, 0).unwrap();
        assert!(cfg.group_of(WorkerId(0)).is_err());
        assert!(cfg.group_of(WorkerId(3)).is_err());
        assert!(cfg.samples_of_group(2).is_err());
    }
}
