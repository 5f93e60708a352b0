use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adversary::AttackSpec;
use crate::alphabet::GradientVec;
use crate::assignment::SystemConfig;
use crate::bounds::{kappa_upper_doubled, r_max};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::protocol::{run_scheme, SchemeOutcome};

/// Uniform partial gradients for every sample, seeded by `cfg.rng_seed`.
pub fn generate_gradients(cfg: &SystemConfig) -> Vec<GradientVec> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, 0, 0));
    (0..cfg.n_samples)
        .map(|_| cfg.alphabet.random_vec(cfg.dim, &mut rng))
        .collect()
}

/// One CSV row; field order is the column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunRecord {
    pub n: usize,
    pub s: usize,
    pub u: usize,
    pub m: usize,
    pub p: usize,
    pub d: usize,
    pub k: u32,
    pub attack: String,
    pub seed: u64,
    pub c: usize,
    pub r: u64,
    pub kappa_bits: u64,
    pub downlink_bits: u64,
    pub matches: usize,
    pub total_bits: u64,
    pub correct: u8,
}

#[derive(Debug)]
pub struct RunResult {
    pub record: RunRecord,
    pub outcome: SchemeOutcome,
    pub truth: Vec<GradientVec>,
    pub violations: Vec<String>,
}

impl RunResult {
    pub fn correct(&self) -> bool {
        self.record.correct == 1
    }
}

/// Correctness, honest immunity and the c / r / kappa bounds, with `u`
/// reduced by the number of stragglers.
pub fn check_bounds(
    cfg: &SystemConfig,
    attack: &AttackSpec,
    outcome: &SchemeOutcome,
    truth_sum: &GradientVec,
) -> Vec<String> {
    let mut v = Vec::new();
    if &outcome.estimate != truth_sum {
        v.push("decoded gradient differs from the true sum".to_string());
    }
    let lost = outcome.honest_eliminated();
    if !lost.is_empty() {
        v.push(format!("honest workers eliminated: {lost:?}"));
    }
    let (s, p, m, k) = (
        cfg.n_malicious,
        cfg.n_samples,
        cfg.n_groups,
        cfg.alphabet.size_log2(),
    );
    let ue = cfg.honest_per_group - attack.stragglers.len();
    let c = outcome.metrics.local_computations;
    let cm = s / ue;
    if c > cm {
        v.push(format!("c = {c} exceeds {cm}"));
        return v;
    }
    match (
        r_max(p, m, s, ue, c),
        kappa_upper_doubled(p, m, s, ue, c, k),
    ) {
        (Ok(r), Ok(kk)) => {
            if outcome.metrics.rounds > r {
                v.push(format!("r = {} exceeds {r}", outcome.metrics.rounds));
            }
            if 2 * outcome.metrics.kappa_bits as i128 > kk {
                v.push(format!(
                    "kappa = {} exceeds {}",
                    outcome.metrics.kappa_bits,
                    kk as f64 / 2.0
                ));
            }
        }
        (Err(e), _) | (_, Err(e)) => v.push(e.to_string()),
    }
    v
}

pub fn execute(cfg: &SystemConfig, attack: &AttackSpec) -> Result<RunResult> {
    let truth = generate_gradients(cfg);
    let outcome = run_scheme(cfg, attack, &truth)?;
    let truth_sum = cfg
        .alphabet
        .sum_range(&truth, crate::IndexRange::new(1, cfg.n_samples)?)?;
    let violations = check_bounds(cfg, attack, &outcome, &truth_sum);
    let mt = &outcome.metrics;
    let record = RunRecord {
        n: cfg.n_workers,
        s: cfg.n_malicious,
        u: cfg.honest_per_group,
        m: cfg.n_groups,
        p: cfg.n_samples,
        d: cfg.dim,
        k: cfg.alphabet.size_log2(),
        attack: attack.kind.name().to_string(),
        seed: attack.seed,
        c: mt.local_computations,
        r: mt.rounds,
        kappa_bits: mt.kappa_bits,
        downlink_bits: mt.downlink_bits,
        matches: mt.matches,
        total_bits: mt.total_bits,
        correct: (outcome.estimate == truth_sum) as u8,
    };
    Ok(RunResult {
        record,
        outcome,
        truth,
        violations,
    })
}

pub fn write_csv<W: Write>(records: &[RunRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    out.flush().map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AttackKind;

    #[test]
    fn csv_header_order() {
        let cfg = SystemConfig::new(1, 1, 1, 2, 1, 4, 0).unwrap();
        let r = execute(&cfg, &AttackSpec::honest(0)).unwrap();
        let mut buf = Vec::new();
        write_csv(&[r.record], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "n,s,u,m,p,d,k,attack,seed,c,r,kappa_bits,downlink_bits,matches,total_bits,correct"
        );
    }

    #[test]
    fn honest_run_is_free_after_round_zero() {
        let cfg = SystemConfig::new(2, 1, 2, 8, 3, 8, 4).unwrap();
        let r = execute(&cfg, &AttackSpec::new(&cfg, AttackKind::None, 4)).unwrap();
        assert!(r.correct() && r.violations.is_empty());
        assert_eq!(r.record.kappa_bits, 0);
        assert_eq!(r.record.total_bits, 6 * 3 * 8);
    }
}
