//! Closed-form limits on local computations, rounds and voting-phase bits.
//!
//! `P = p / m` is the number of samples per group and `L = ceil(log2 P)`.
//! With `s'` stragglers every formula uses `u - s'` in place of `u`.

use serde::Serialize;

use crate::error::{config, Error, Result};

/// `ceil(log2 x)` for `x >= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    assert!(x >= 1, "ceil_log2 of zero");
    if x == 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// `log2 C(n, r)`, summed term by term to stay finite for huge `n`.
pub fn log2_binomial(n: u64, r: u64) -> f64 {
    if r > n {
        return f64::NEG_INFINITY;
    }
    let r = r.min(n - r);
    (0..r)
        .map(|i| ((n - i) as f64 / (i + 1) as f64).log2())
        .sum()
}

fn effective_u(u: usize, stragglers: usize) -> Result<usize> {
    if u < 1 {
        return config("u must be at least 1");
    }
    if stragglers >= u {
        return config(format!(
            "{stragglers} stragglers leave no responsive honest worker (u = {u})"
        ));
    }
    Ok(u - stragglers)
}

pub fn samples_per_group(p: usize, m: usize) -> Result<usize> {
    if m == 0 || p == 0 || !p.is_multiple_of(m) {
        return config(format!("m = {m} must divide p = {p}"));
    }
    Ok(p / m)
}

/// Fewest local computations a symmetrizing adversary can force: `floor(s / (u - s'))`.
pub fn c_min(s: usize, u: usize, stragglers: usize) -> Result<usize> {
    Ok(s / effective_u(u, stragglers)?)
}

/// Most local computations the scheme ever performs; equal to [`c_min`].
pub fn c_max(s: usize, u: usize, stragglers: usize) -> Result<usize> {
    c_min(s, u, stragglers)
}

/// `log2 C(p/m, c_min)` bits any scheme must spend against symmetrization.
pub fn kappa_lower(p: usize, m: usize, s: usize, u: usize, stragglers: usize) -> Result<f64> {
    let big_p = samples_per_group(p, m)? as u64;
    let q = c_min(s, u, stragglers)? as u64;
    if q > big_p {
        return Err(Error::Config(format!("c_min = {q} exceeds p/m = {big_p}")));
    }
    Ok(log2_binomial(big_p, q))
}

/// Twice the voting-phase bit bound, kept integral so comparisons are exact.
pub fn kappa_upper_doubled(
    p: usize,
    m: usize,
    s: usize,
    u: usize,
    c: usize,
    k: u32,
) -> Result<i128> {
    let l = ceil_log2(samples_per_group(p, m)? as u64) as i128;
    if u < 1 {
        return config("u must be at least 1");
    }
    if u > s {
        return Ok(0);
    }
    let (s, u, k) = (s as i128, u as i128, k as i128);
    let cb = (c as i128).max(1);
    let matches = s - cb * (u - 1);
    if matches < 0 {
        return config(format!("c = {c} is infeasible for s = {s}, u = {u}"));
    }
    Ok(matches * (2 * (1 + k) * l + s + (cb + 2) * u - 3) - cb * (s - u + 1))
}

pub fn kappa_upper(p: usize, m: usize, s: usize, u: usize, c: usize, k: u32) -> Result<f64> {
    Ok(kappa_upper_doubled(p, m, s, u, c, k)? as f64 / 2.0)
}

/// Round bound `(s - max(1,c)(u-1)) (2L + 1)`, clamped at zero.
pub fn r_max(p: usize, m: usize, s: usize, u: usize, c: usize) -> Result<u64> {
    let l = ceil_log2(samples_per_group(p, m)? as u64) as i128;
    let matches = (s as i128 - (c.max(1) as i128) * (u as i128 - 1)).max(0);
    Ok((matches * (2 * l + 1)) as u64)
}

/// Leading term of the upper bound as `P` grows: `(s - max(1,c)(u - s' - 1)) (1 + k) L`.
pub fn kappa_asymptotic(
    p: usize,
    m: usize,
    s: usize,
    u: usize,
    stragglers: usize,
    c: usize,
    k: u32,
) -> Result<f64> {
    let u = effective_u(u, stragglers)?;
    let l = ceil_log2(samples_per_group(p, m)? as u64) as f64;
    let matches = (s as f64 - c.max(1) as f64 * (u as f64 - 1.0)).max(0.0);
    Ok(matches * (1.0 + k as f64) * l)
}

/// Limit of upper over lower bound as `p -> infinity`: `(1 + k)(1 + (s mod u) / (s div u))`.
pub fn ratio_limit(s: usize, u: usize, k: u32) -> Result<f64> {
    if u < 1 || s / u == 0 {
        return config(format!(
            "limit undefined unless s >= u >= 1 (s = {s}, u = {u})"
        ));
    }
    Ok((1.0 + k as f64) * (1.0 + (s % u) as f64 / (s / u) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSet {
    pub c_min: usize,
    pub c_max: usize,
    pub kappa_lower: f64,
    pub kappa_upper: f64,
    pub r_max: u64,
    pub kappa_asymptotic: f64,
    pub ratio_limit: Option<f64>,
}

impl BoundSet {
    /// All bounds at the worst-case `c = c_max`, with `u` reduced by the straggler count.
    pub fn evaluate(
        p: usize,
        m: usize,
        s: usize,
        u: usize,
        stragglers: usize,
        k: u32,
    ) -> Result<Self> {
        let ue = effective_u(u, stragglers)?;
        let c = c_max(s, u, stragglers)?;
        Ok(Self {
            c_min: c,
            c_max: c,
            kappa_lower: kappa_lower(p, m, s, u, stragglers)?,
            kappa_upper: kappa_upper(p, m, s, ue, c, k)?,
            r_max: r_max(p, m, s, ue, c)?,
            kappa_asymptotic: kappa_asymptotic(p, m, s, u, stragglers, c, k)?,
            ratio_limit: ratio_limit(s, ue, k).ok(),
        })
    }
}
