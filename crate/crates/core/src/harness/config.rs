use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::{AttackKind, AttackParams, AttackSpec};
use crate::assignment::{SystemConfig, WorkerId};
use crate::error::{Error, Result};

/// One `run` invocation. Worker indices are 0-based, as in the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Optional consistency check against `m (s + u)`.
    pub n: Option<usize>,
    pub s: usize,
    pub u: usize,
    pub m: usize,
    pub p: usize,
    pub d: usize,
    pub alphabet_log2: u32,
    pub attack: AttackKind,
    /// Defaults to the first `s` workers.
    pub malicious: Option<Vec<usize>>,
    pub stragglers: Vec<usize>,
    pub seed: u64,
    pub repetitions: u64,
    pub params: AttackParams,
    pub out: Option<PathBuf>,
    pub transcript: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: None,
            s: 2,
            u: 1,
            m: 1,
            p: 8,
            d: 4,
            alphabet_log2: 16,
            attack: AttackKind::Symmetrization,
            malicious: None,
            stragglers: Vec::new(),
            seed: 0,
            repetitions: 1,
            params: AttackParams::default(),
            out: None,
            transcript: None,
        }
    }
}

fn workers(ids: &[usize], n: usize) -> Result<BTreeSet<WorkerId>> {
    ids.iter()
        .map(|&j| {
            if j < n {
                Ok(WorkerId(j + 1))
            } else {
                Err(Error::Config(format!("worker {j} out of range")))
            }
        })
        .collect()
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn system(&self, seed: u64) -> Result<SystemConfig> {
        let cfg = SystemConfig::new(
            self.s,
            self.u,
            self.m,
            self.p,
            self.d,
            self.alphabet_log2,
            seed,
        )?;
        if let Some(n) = self.n {
            if n != cfg.n_workers {
                return Err(Error::Config(format!(
                    "n = {n} but m(s+u) = {}",
                    cfg.n_workers
                )));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn attack_spec(&self, cfg: &SystemConfig, seed: u64) -> Result<AttackSpec> {
        let mut spec = AttackSpec::new(cfg, self.attack, seed);
        if let Some(m) = &self.malicious {
            spec.malicious = workers(m, cfg.n_workers)?;
        }
        spec.stragglers = workers(&self.stragglers, cfg.n_workers)?;
        spec.params = self.params.clone();
        spec.validate(cfg)?;
        Ok(spec)
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.seed..self.seed + self.repetitions
    }
}
