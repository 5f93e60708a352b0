//! Closed forms checked against independent reference computations.

use bgc_core::bounds::{kappa_lower, kappa_upper, kappa_upper_doubled, log2_binomial, r_max};
use bgc_core::{Alphabet, IndexRange};
use proptest::prelude::*;

/// Per-match accounting: bisection bits plus the voters polled in each final round.
fn upper_by_matches(big_p: u64, s: i64, u: i64, c: i64, k: i64) -> i64 {
    if u > s {
        return 0;
    }
    let l = if big_p <= 1 {
        0
    } else {
        64 - (big_p - 1).leading_zeros() as i64
    };
    let cb = c.max(1);
    let voting: i64 = if c >= 1 {
        (1..=s - c * u).map(|j| s + u - 2 - (j - 1)).sum::<i64>()
            + (1..=c).map(|j| u + c * u - 2 - u * (j - 1)).sum::<i64>()
    } else {
        (1..=s - u + 1).map(|j| s + u - 2 - (j - 1)).sum()
    };
    (s - cb * (u - 1)) * (k + 1) * l + voting
}

fn binomial_u128(n: u128, r: u128) -> u128 {
    (0..r).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn upper_bound_frozen_values() {
    let cases = [
        ((8, 2, 1, 2, 16), 103.0),
        ((16, 3, 1, 3, 8), 111.0),
        ((16, 3, 2, 0, 8), 77.0),
        ((16, 3, 2, 1, 8), 77.0),
        ((1024, 5, 2, 2, 2), 101.0),
        ((10_000, 10, 1, 10, 16), 2425.0),
        ((7, 4, 3, 1, 8), 63.0),
        ((5, 5, 1, 0, 4), 85.0),
    ];
    for ((p, s, u, c, k), want) in cases {
        assert_eq!(
            kappa_upper(p, 1, s, u, c, k).unwrap(),
            want,
            "p={p} s={s} u={u} c={c} k={k}"
        );
    }
}

#[test]
fn lower_bound_frozen_values() {
    let cases = [
        (8usize, 2usize, 4.807354922057604),
        (16, 3, 9.129283016944967),
        (1000, 4, 35.26950835146881),
        (100_000, 9, 131.01711186517088),
    ];
    for (p, s, want) in cases {
        assert!(
            (kappa_lower(p, 1, s, 1, 0).unwrap() - want).abs() < 1e-9,
            "p={p} s={s}"
        );
    }
}

#[test]
fn closed_form_matches_per_match_sum() {
    for big_p in [1u64, 2, 3, 5, 8, 16, 100, 1024] {
        for s in 0..=12i64 {
            for u in 1..=s + 1 {
                let cmax = s / u;
                for c in 0..=cmax {
                    let k = 8;
                    let got = kappa_upper_doubled(
                        big_p as usize,
                        1,
                        s as usize,
                        u as usize,
                        c as usize,
                        k,
                    )
                    .unwrap();
                    assert_eq!(
                        got,
                        2 * upper_by_matches(big_p, s, u, c, k as i64) as i128,
                        "P={big_p} s={s} u={u} c={c}"
                    );
                }
            }
        }
    }
}

#[test]
fn rounds_count_two_per_level_plus_vote() {
    assert_eq!(r_max(16, 2, 3, 1, 0).unwrap(), 3 * 7);
    assert_eq!(r_max(16, 1, 4, 2, 2).unwrap(), 2 * 9);
    assert_eq!(r_max(16, 1, 1, 3, 0).unwrap(), 0);
}

proptest! {
    #[test]
    fn log2_binomial_matches_exact(n in 1u128..60, r in 0u128..12) {
        prop_assume!(r <= n);
        let exact = (binomial_u128(n, r) as f64).log2();
        prop_assert!((log2_binomial(n as u64, r as u64) - exact).abs() < 1e-9);
    }

    #[test]
    fn modular_sum_matches_wide_fold(k in 1u32..=32, vals in prop::collection::vec(any::<u32>(), 1..20), lo in 0usize..20, len in 1usize..20) {
        let a = Alphabet::new(k).unwrap();
        let mask = (1u128 << k) - 1;
        let vecs: Vec<_> = vals.iter().map(|&v| a.vector(&[(v as u128 & mask) as u64]).unwrap()).collect();
        let lo = lo % vals.len() + 1;
        let hi = (lo + len - 1).min(vals.len());
        let want = vals[lo - 1..hi].iter().fold(0u128, |acc, &v| acc + (v as u128 & mask)) & mask;
        let got = a.sum_range(&vecs, IndexRange::new(lo, hi).unwrap()).unwrap();
        prop_assert_eq!(got.values(), vec![want as u32]);
    }

    #[test]
    fn range_sums_split(k in 1u32..=16, vals in prop::collection::vec(any::<u16>(), 2..30), cut in 0usize..30) {
        let a = Alphabet::new(k).unwrap();
        let vecs: Vec<_> = vals.iter().map(|&v| a.vector(&[v as u64 & ((1 << k) - 1)]).unwrap()).collect();
        let n = vecs.len();
        let mid = cut % (n - 1) + 1;
        let whole = a.sum_range(&vecs, IndexRange::new(1, n).unwrap()).unwrap();
        let left = a.sum_range(&vecs, IndexRange::new(1, mid).unwrap()).unwrap();
        let right = a.sum_range(&vecs, IndexRange::new(mid + 1, n).unwrap()).unwrap();
        prop_assert_eq!(a.add(&left, &right).unwrap(), whole);
    }

    #[test]
    fn addition_is_a_group(k in 1u32..=32, x in any::<u32>(), y in any::<u32>(), z in any::<u32>()) {
        let a = Alphabet::new(k).unwrap();
        let m = if k == 32 { u32::MAX as u64 } else { (1u64 << k) - 1 };
        let (x, y, z) = (a.reduce(x as u64 & m), a.reduce(y as u64 & m), a.reduce(z as u64 & m));
        prop_assert_eq!(a.add_sym(a.add_sym(x, y), z), a.add_sym(x, a.add_sym(y, z)));
        prop_assert_eq!(a.add_sym(x, y), a.add_sym(y, x));
        prop_assert_eq!(a.add_sym(a.sub_sym(x, y), y), x);
    }
}
