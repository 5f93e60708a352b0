//! Data series for the trade-off figures.

use std::fs::File;
use std::path::Path;

use serde::Serialize;

use crate::adversary::{AttackKind, AttackSpec};
use crate::assignment::SystemConfig;
use crate::bounds::{c_min, kappa_lower, kappa_upper, ratio_limit};
use crate::error::{Error, Result};
use crate::harness::run::generate_gradients;
use crate::protocol::{draco_baseline, run_scheme};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig2Row {
    pub rho_bar: f64,
    pub c_min: usize,
}

/// Fewest forced local computations against the normalized replication
/// `rho_bar = (s + u) / s`, i.e. `floor(1 / (rho_bar - 1))`, on `(1, 3]`.
pub fn fig2() -> Vec<Fig2Row> {
    (1..=400usize)
        .map(|i| Fig2Row {
            rho_bar: 1.0 + i as f64 / 200.0,
            c_min: 200 / i,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub s: usize,
    pub u: usize,
    pub m: usize,
    pub p: usize,
    pub kappa_lower: f64,
    pub kappa_upper: f64,
    pub ratio: f64,
    pub limit: Option<f64>,
}

fn bound_row(s: usize, u: usize, m: usize, p: usize, k: u32) -> Result<BoundRow> {
    let c = c_min(s, u, 0)?;
    let lo = kappa_lower(p, m, s, u, 0)?;
    let up = kappa_upper(p, m, s, u, c, k)?;
    Ok(BoundRow {
        s,
        u,
        m,
        p,
        kappa_lower: lo,
        kappa_upper: up,
        ratio: up / lo,
        limit: ratio_limit(s, u, k).ok(),
    })
}

fn p_grid(lo_exp: u32, hi_exp: u32, m: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for e in lo_exp..=hi_exp {
        for mant in [1usize, 2, 5] {
            let p = mant * 10usize.pow(e) * m;
            if e < hi_exp || mant == 1 {
                out.push(p);
            }
        }
    }
    out
}

/// Lower and upper bound against `p` for `n = 10`, one group, `s` from 5 to 9.
pub fn fig3() -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for s in 5..=9 {
        for p in p_grid(1, 6, 1) {
            rows.push(bound_row(s, 10 - s, 1, p, 16)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4Row {
    pub u: usize,
    pub n: usize,
    pub c: usize,
    pub kappa_upper: f64,
    pub total_bits: f64,
    pub ratio_to_majority: f64,
}

/// Total communication against `u` for `s = 10`, `p = 1e4`, `d = 1e6`, `k = 16`.
/// The last row (`u = s + 1`) is plain majority decoding.
pub fn fig4() -> Result<Vec<Fig4Row>> {
    let (s, p, d, k) = (10usize, 10_000usize, 1_000_000f64, 16u32);
    let majority = (2 * s + 1) as f64 * d * k as f64;
    (1..=s + 1)
        .map(|u| {
            let c = c_min(s, u, 0)?;
            let ku = kappa_upper(p, 1, s, u, c, k)?;
            let total = (s + u) as f64 * d * k as f64 + ku;
            Ok(Fig4Row {
                u,
                n: s + u,
                c,
                kappa_upper: ku,
                total_bits: total,
                ratio_to_majority: total / majority,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig4Simulation {
    pub d_simulated: usize,
    pub scheme_bits_scaled: f64,
    pub majority_bits_scaled: f64,
    pub ratio: f64,
    pub local_computations: usize,
    pub kappa_bits: u64,
}

/// Simulates the `u = 1` point at a smaller dimension against the worst-case
/// adversary and rescales the dimension-proportional traffic to `d = 1e6`.
pub fn fig4_simulated(d_sim: usize, seed: u64) -> Result<Fig4Simulation> {
    let (s, p, k) = (10usize, 10_000usize, 16u32);
    let scale = 1_000_000f64 / d_sim as f64;
    let cfg = SystemConfig::new(s, 1, 1, p, d_sim, k, seed)?;
    let truth = generate_gradients(&cfg);
    let out = run_scheme(
        &cfg,
        &AttackSpec::new(&cfg, AttackKind::AlignAndStall, seed),
        &truth,
    )?;
    let maj_cfg = SystemConfig::new(s, s + 1, 1, p, d_sim, k, seed)?;
    let maj = draco_baseline(
        &maj_cfg,
        &AttackSpec::new(&maj_cfg, AttackKind::RandomCorruption, seed),
        &truth,
    )?;
    let scheme = out.metrics.initial_bits as f64 * scale + out.metrics.kappa_bits as f64;
    let majority = maj.total_bits as f64 * scale;
    Ok(Fig4Simulation {
        d_simulated: d_sim,
        scheme_bits_scaled: scheme,
        majority_bits_scaled: majority,
        ratio: scheme / majority,
        local_computations: out.metrics.local_computations,
        kappa_bits: out.metrics.kappa_bits,
    })
}

/// Upper over lower bound against `p` for `m = 10`, `u = 1`, `k = 16`.
pub fn fig5() -> Result<Vec<BoundRow>> {
    let mut rows = Vec::new();
    for s in [1, 3, 5, 9] {
        for p in p_grid(2, 12, 10) {
            rows.push(bound_row(s, 1, 10, p, 16)?);
        }
    }
    Ok(rows)
}

pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig2_drops_to_zero_past_two() {
        let rows = fig2();
        let at = |rho: f64| {
            rows.iter()
                .find(|r| (r.rho_bar - rho).abs() < 1e-9)
                .unwrap()
                .c_min
        };
        assert_eq!(at(1.1), 10);
        assert_eq!(at(1.5), 2);
        assert_eq!(at(2.0), 1);
        assert_eq!(at(2.005), 0);
    }

    #[test]
    fn fig4_endpoints() {
        let rows = fig4().unwrap();
        assert_eq!(
            rows.iter().map(|r| r.c).collect::<Vec<_>>(),
            vec![10, 5, 3, 2, 2, 1, 1, 1, 1, 1, 0]
        );
        assert_eq!(rows[10].ratio_to_majority, 1.0);
        assert!((rows[0].ratio_to_majority - 11.0 / 21.0).abs() < 1e-4);
    }
}
