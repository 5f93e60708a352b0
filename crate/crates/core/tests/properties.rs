use std::collections::BTreeSet;

use bgc_core::adversary::{build_population, plan_symmetrization, AttackKind, AttackSpec};
use bgc_core::assignment::{build_fractional_repetition, replication_factor};
use bgc_core::bounds::{kappa_upper_doubled, r_max};
use bgc_core::harness::{execute, generate_gradients};
use bgc_core::protocol::{run_scheme, run_with_population, MatchEnd};
use bgc_core::workers::{
    AdaptiveStrategy, ClaimTable, EncodingRequest, GroupData, ResponseContext, WorkerBehavior,
    WorkerPool, WorkerResponse,
};
use bgc_core::{SystemConfig, WorkerId};
use num_rational::Ratio;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config() -> impl Strategy<Value = (usize, usize, usize, usize, usize, u32)> {
    (
        0usize..=5,
        1usize..=3,
        1usize..=3,
        1usize..=12,
        1usize..=3,
        prop::sample::select(vec![2u32, 4, 8, 16]),
    )
        .prop_filter("n <= 15", |(s, u, m, _, _, _)| m * (s + u) <= 15)
}

fn kinds() -> impl Strategy<Value = AttackKind> {
    prop::sample::select(AttackKind::ALL.to_vec())
}

fn placement(cfg: &SystemConfig, seed: u64) -> BTreeSet<WorkerId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, cfg.n_workers, cfg.n_malicious)
        .into_iter()
        .map(|j| WorkerId(j + 1))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn assignment_is_fractional_repetition((s, u, m, big_p, d, k) in small_config()) {
        let cfg = SystemConfig::new(s, u, m, big_p * m, d, k, 0).unwrap();
        let b = build_fractional_repetition(&cfg).unwrap();
        prop_assert_eq!(replication_factor(&b), Ratio::from_integer((s + u) as u64));
        for i in 1..=cfg.n_samples {
            prop_assert_eq!(b.row_weight(i), s + u);
        }
        for w in cfg.workers() {
            let g = cfg.group_of(w).unwrap();
            prop_assert_eq!(b.samples_of(w), cfg.samples_of_group(g).unwrap().iter().collect::<Vec<_>>());
            prop_assert!(cfg.workers_of_group(g).unwrap().contains(&w));
        }
    }

    #[test]
    fn claim_tables_are_self_consistent(big_p in 2usize..20, d in 1usize..4, k in 1u32..=16, seed in any::<u64>()) {
        let cfg = SystemConfig::new(1, 1, 1, big_p, d, k, seed).unwrap();
        let truth = generate_gradients(&cfg);
        let group = GroupData::new(&cfg, 1, &truth).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = ClaimTable::truthful();
        for i in 1..=big_p {
            if rng.gen_bool(0.3) {
                table.set(i, cfg.alphabet.random_vec(d, &mut rng));
            }
        }
        let z0 = table.initial_sum(&group).unwrap();
        let mid = rng.gen_range(1..big_p);
        for zeta in 1..=d {
            let l = table.range_coord_sum(&group, bgc_core::IndexRange::new(1, mid).unwrap(), zeta).unwrap();
            let r = table.range_coord_sum(&group, bgc_core::IndexRange::new(mid + 1, big_p).unwrap(), zeta).unwrap();
            prop_assert_eq!(cfg.alphabet.add_sym(l, r), z0.coord(zeta).unwrap());
        }
    }

    #[test]
    fn every_run_is_exact_immune_and_within_bounds((s, u, m, big_p, d, k) in small_config(), kind in kinds(), seed in any::<u64>()) {
        let cfg = SystemConfig::new(s, u, m, big_p * m, d, k, seed).unwrap();
        let mut attack = AttackSpec::new(&cfg, kind, seed);
        attack.malicious = placement(&cfg, seed);
        match execute(&cfg, &attack) {
            Ok(run) => prop_assert!(run.violations.is_empty(), "{:?}", run.violations),
            Err(e) => prop_assert!(kind == AttackKind::Symmetrization, "{e}"),
        }
    }

    #[test]
    fn runs_are_deterministic((s, u, m, big_p, d, k) in small_config(), kind in kinds(), seed in any::<u64>()) {
        let cfg = SystemConfig::new(s, u, m, big_p * m, d, k, seed).unwrap();
        let attack = AttackSpec::new(&cfg, kind, seed);
        let a = execute(&cfg, &attack);
        let b = execute(&cfg, &attack);
        if let (Ok(a), Ok(b)) = (a, b) {
            prop_assert_eq!(a.outcome.transcript.to_json_lines(), b.outcome.transcript.to_json_lines());
            prop_assert_eq!(a.record, b.record);
        }
    }

    #[test]
    fn bisection_stops_where_tables_disagree(big_p in 1usize..40, d in 1usize..3, seed in any::<u64>()) {
        let cfg = SystemConfig::new(1, 1, 1, big_p, d, 8, seed).unwrap();
        let truth = generate_gradients(&cfg);
        let group = GroupData::new(&cfg, 1, &truth).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = ClaimTable::truthful();
        for i in 1..=big_p {
            if rng.gen_bool(0.5) {
                table.set(i, cfg.alphabet.add(&truth[i - 1], &cfg.alphabet.random_nonzero_vec(d, &mut rng)).unwrap());
            }
        }
        prop_assume!(table.initial_sum(&group).unwrap() != *group.truth_sum());
        let mut pool = WorkerPool::honest(2);
        let liar = WorkerId(rng.gen_range(1..=2));
        pool.set(liar, WorkerBehavior::Table(table.clone()));
        let out = run_with_population(&cfg, &mut pool, &truth, seed).unwrap();
        prop_assert_eq!(&out.estimate, group.truth_sum());
        let t = &out.tournaments[0];
        prop_assert_eq!(t.matches.len(), 1);
        let mt = &t.matches[0];
        let depth = if big_p == 1 { 0 } else { usize::BITS - (big_p - 1).leading_zeros() };
        prop_assert!(mt.steps <= depth);
        let MatchEnd::Leaf { sample, claim, .. } = mt.end else { panic!("table workers never forfeit") };
        let liar_claim = table.claim(sample, &group).coord(mt.coord).unwrap();
        let true_claim = truth[sample - 1].coord(mt.coord).unwrap();
        prop_assert_ne!(liar_claim, true_claim);
        let challenger_claim = if mt.challenger == liar { liar_claim } else { true_claim };
        prop_assert_eq!(claim, challenger_claim);
        prop_assert_eq!(out.suspects(), [liar].into());
    }

    #[test]
    fn align_and_stall_meets_the_upper_bound(s in 1usize..=6, u in 1usize..=3, m in 1usize..=2, log_p in 1u32..=5, forced in 0usize..=6, seed in any::<u64>()) {
        prop_assume!(u <= s);
        let big_p = 1usize << log_p;
        let cfg = SystemConfig::new(s, u, m, big_p * m, 2, 8, seed).unwrap();
        let mut attack = AttackSpec::new(&cfg, AttackKind::AlignAndStall, seed);
        attack.params.forced_local_comps = forced;
        let run = execute(&cfg, &attack).unwrap();
        prop_assert!(run.violations.is_empty(), "{:?}", run.violations);
        let c = run.record.c;
        let expected_c = if u == 1 { s } else { forced.min(s / u) };
        prop_assert_eq!(c, expected_c);
        let bound = kappa_upper_doubled(cfg.n_samples, m, s, u, c, 8).unwrap();
        prop_assert_eq!(2 * run.record.kappa_bits as i128, bound);
        prop_assert_eq!(run.record.r, r_max(cfg.n_samples, m, s, u, c).unwrap());
    }

    #[test]
    fn spreading_malicious_workers_never_costs_more(s in 1usize..=4, u in 1usize..=2, log_p in 1u32..=4, kind in kinds(), seed in any::<u64>()) {
        prop_assume!(u <= s);
        let m = 2;
        let big_p = 1usize << log_p;
        let cfg = SystemConfig::new(s, u, m, big_p * m, 2, 8, seed).unwrap();
        let worst_single = (0..=s / u)
            .map(|f| {
                let mut a = AttackSpec::new(&cfg, AttackKind::AlignAndStall, seed);
                a.params.forced_local_comps = f;
                execute(&cfg, &a).unwrap().record.kappa_bits
            })
            .max()
            .unwrap();
        let mut spread = AttackSpec::new(&cfg, kind, seed);
        let size = s + u;
        spread.malicious = (1..=s).map(|j| if j % 2 == 0 { WorkerId(j / 2) } else { WorkerId(size + j.div_ceil(2)) }).collect();
        if let Ok(run) = execute(&cfg, &spread) {
            prop_assert!(run.violations.is_empty(), "{:?}", run.violations);
            prop_assert!(run.record.kappa_bits <= worst_single, "{} > {}", run.record.kappa_bits, worst_single);
        }
    }

    #[test]
    fn honest_block_case_shows_the_same_table(q in 1usize..=3, u in 1usize..=2, log_p in 2u32..=4, seed in any::<u64>()) {
        let s = q * u;
        let big_p = 1usize << log_p;
        let cfg = SystemConfig::new(s, u, 1, big_p, 2, 8, seed).unwrap();
        let truth1 = generate_gradients(&cfg);
        let mut attack = AttackSpec::new(&cfg, AttackKind::Symmetrization, seed);
        attack.params.collapse = Some(false);
        let groups1 = GroupData::all(&cfg, &truth1).unwrap();
        let plan1 = plan_symmetrization(&cfg, &attack, &groups1, &mut population_rng(seed)).unwrap();
        let h = (seed as usize % q) + 1;
        let target = plan1.targets[h - 1];
        let mut truth2 = truth1.clone();
        truth2[target - 1] = plan1.g_double_prime[&target].clone();
        let mut attack2 = attack.clone();
        attack2.params.honest_block = Some(h);
        let groups2 = GroupData::all(&cfg, &truth2).unwrap();
        let plan2 = plan_symmetrization(&cfg, &attack2, &groups2, &mut population_rng(seed)).unwrap();
        prop_assert_eq!(&plan1.g_prime, &plan2.g_prime);
        prop_assert_eq!(&plan1.g_double_prime, &plan2.g_double_prime);

        let observed = |attack: &AttackSpec, groups: &[GroupData<'_>]| {
            let mut pop = build_population(&cfg, attack, groups).unwrap();
            let mut rows: Vec<Vec<Vec<u32>>> = cfg.workers().map(|w| {
                let ctx_t = bgc_core::protocol::Transcript::new();
                let ctx = ResponseContext { worker: w, group: &groups[0], transcript: &ctx_t, current_match: None };
                (1..=big_p).map(|i| {
                    let req = EncodingRequest::PartialSum { range: bgc_core::IndexRange::new(i, i).unwrap(), coord: 1 };
                    let r2 = EncodingRequest::PartialSum { range: bgc_core::IndexRange::new(i, i).unwrap(), coord: 2 };
                    let a = bgc_core::workers::respond(pop.pool.get_mut(w), &req, &ctx).unwrap();
                    let b = bgc_core::workers::respond(pop.pool.get_mut(w), &r2, &ctx).unwrap();
                    match (a, b) {
                        (WorkerResponse::Sym(x), WorkerResponse::Sym(y)) => vec![x.value(), y.value()],
                        other => panic!("{other:?}"),
                    }
                }).collect()
            }).collect();
            rows.sort();
            rows
        };
        prop_assert_eq!(observed(&attack, &groups1), observed(&attack2, &groups2));
    }

    #[test]
    fn symmetrization_forces_one_local_computation_per_block(q in 1usize..=3, u in 1usize..=3, log_p in 2u32..=4, honest_block in any::<bool>(), seed in any::<u64>()) {
        let s = q * u;
        let cfg = SystemConfig::new(s, u, 1, 1 << log_p, 2, 8, seed).unwrap();
        let mut attack = AttackSpec::new(&cfg, AttackKind::Symmetrization, seed);
        attack.params.collapse = Some(false);
        if honest_block {
            attack.params.honest_block = Some(1);
        }
        let run = execute(&cfg, &attack).unwrap();
        prop_assert!(run.violations.is_empty());
        prop_assert_eq!(run.record.c, q);
    }
}

// Same stream the population builder draws its plan from.
fn population_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(bgc_core::derive_seed(seed, 1, 0))
}

#[test]
fn align_and_stall_examples() {
    let cfg = SystemConfig::new(3, 1, 1, 8, 2, 16, 1).unwrap();
    let run = execute(&cfg, &AttackSpec::new(&cfg, AttackKind::AlignAndStall, 1)).unwrap();
    assert_eq!((run.record.matches, run.record.c), (3, 3));
    let cfg = SystemConfig::new(3, 2, 1, 8, 2, 16, 1).unwrap();
    let run = execute(&cfg, &AttackSpec::new(&cfg, AttackKind::AlignAndStall, 1)).unwrap();
    assert_eq!((run.record.matches, run.record.c), (2, 0));
}

#[test]
fn collapse_costs_at_most_one_local_computation() {
    for seed in 0..50 {
        let cfg = SystemConfig::new(4, 1, 1, 16, 2, 8, seed).unwrap();
        let mut attack = AttackSpec::new(&cfg, AttackKind::Symmetrization, seed);
        attack.params.collapse = Some(true);
        let run = execute(&cfg, &attack).unwrap();
        assert!(run.correct() && run.record.c <= 1);
    }
}

/// Commits to everything and claims zero for every partial sum.
#[derive(Debug)]
struct YesMan;

impl AdaptiveStrategy for YesMan {
    fn respond(&mut self, ctx: &ResponseContext<'_>, req: &EncodingRequest) -> WorkerResponse {
        match req {
            EncodingRequest::InitialSum => {
                WorkerResponse::Gradient(ctx.group.alphabet.zero(ctx.group.dim))
            }
            EncodingRequest::PartialSum { .. } => WorkerResponse::Sym(ctx.group.alphabet.reduce(0)),
            EncodingRequest::Vote { .. } => WorkerResponse::Bit(true),
        }
    }
}

#[test]
fn custom_strategies_plug_in() {
    let cfg = SystemConfig::new(2, 2, 1, 8, 3, 8, 5).unwrap();
    let truth = generate_gradients(&cfg);
    let mut pool = WorkerPool::honest(cfg.n_workers);
    pool.set(WorkerId(1), WorkerBehavior::Adaptive(Box::new(YesMan)));
    pool.set(WorkerId(3), WorkerBehavior::Adaptive(Box::new(YesMan)));
    let out = run_with_population(&cfg, &mut pool, &truth, 5).unwrap();
    let want = cfg
        .alphabet
        .sum_range(&truth, bgc_core::IndexRange::new(1, 8).unwrap())
        .unwrap();
    assert_eq!(out.estimate, want);
    assert_eq!(out.suspects(), [WorkerId(1), WorkerId(3)].into());
}

#[test]
fn stragglers_are_not_suspects() {
    let cfg = SystemConfig::new(2, 3, 1, 8, 2, 8, 2).unwrap();
    let mut attack = AttackSpec::new(&cfg, AttackKind::Symmetrization, 2);
    attack.stragglers = [WorkerId(5)].into();
    let truth = generate_gradients(&cfg);
    let out = run_scheme(&cfg, &attack, &truth).unwrap();
    assert_eq!(out.silent(), [WorkerId(5)].into());
    assert!(!out.suspects().contains(&WorkerId(5)));
}
