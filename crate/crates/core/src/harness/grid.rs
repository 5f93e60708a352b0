//! Exhaustive-ish sweeps over small systems, checking every run against the
//! exactness, immunity and bound invariants.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{AttackKind, AttackSpec};
use crate::assignment::{SystemConfig, WorkerId};
use crate::bounds::log2_binomial;
use crate::derive_seed;
use crate::harness::run::{execute, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AttackVariant {
    None,
    Symmetrization { collapse: bool },
    AlignAndStall { forced: bool },
    Random,
    Adaptive,
}

impl AttackVariant {
    pub const ALL: [AttackVariant; 7] = [
        AttackVariant::None,
        AttackVariant::Symmetrization { collapse: false },
        AttackVariant::Symmetrization { collapse: true },
        AttackVariant::AlignAndStall { forced: false },
        AttackVariant::AlignAndStall { forced: true },
        AttackVariant::Random,
        AttackVariant::Adaptive,
    ];

    pub fn kind(self) -> AttackKind {
        match self {
            AttackVariant::None => AttackKind::None,
            AttackVariant::Symmetrization { .. } => AttackKind::Symmetrization,
            AttackVariant::AlignAndStall { .. } => AttackKind::AlignAndStall,
            AttackVariant::Random => AttackKind::RandomCorruption,
            AttackVariant::Adaptive => AttackKind::AdaptiveCustom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub n_max: usize,
    pub s_max: usize,
    pub u_max: usize,
    pub m_max: usize,
    pub samples_per_group: Vec<usize>,
    pub k_values: Vec<u32>,
    pub d: usize,
    pub seeds_per_case: u64,
    /// Every malicious placement is tried when `n` is at most this.
    pub exhaustive_up_to: usize,
    /// Random placements otherwise, on top of the default one.
    pub sampled_placements: usize,
    pub attacks: Vec<AttackVariant>,
    /// Also add `1..u` honest stragglers to the malicious workers' group.
    pub stragglers: bool,
    pub base_seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_max: 12,
            s_max: 5,
            u_max: 3,
            m_max: 3,
            samples_per_group: vec![1, 2, 3, 5, 8, 16],
            k_values: vec![2, 8],
            d: 2,
            seeds_per_case: 1,
            exhaustive_up_to: 6,
            sampled_placements: 3,
            attacks: AttackVariant::ALL.to_vec(),
            stragglers: false,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridCase {
    pub cfg: SystemConfig,
    pub attack: AttackSpec,
    pub variant: AttackVariant,
}

/// Lower-bound witness data for non-collapsed, truthful-honest symmetrization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub blocks: usize,
    pub targets_computed: bool,
    /// `log2 C(p/m, blocks)`.
    pub kappa_lower: f64,
    /// `2^kappa >= C(p/m, blocks)`, compared exactly.
    pub lower_met: bool,
}

impl Witness {
    pub fn holds(&self) -> bool {
        self.targets_computed && self.lower_met
    }
}

/// `2^bits >= C(n, r)` without rounding.
fn covers_binomial(bits: u64, n: u64, r: u64) -> bool {
    if bits >= 127 {
        return true;
    }
    let mut c: u128 = 1;
    for i in 0..r.min(n - r) {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > 1u128 << bits {
            return false;
        }
    }
    c <= 1u128 << bits
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub variant: AttackVariant,
    pub malicious: Vec<usize>,
    pub stragglers: Vec<usize>,
    pub record: Option<RunRecord>,
    pub error: Option<String>,
    pub violations: Vec<String>,
    pub honest_eliminated: usize,
    pub witness: Option<Witness>,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.error.is_none()
            && self.violations.is_empty()
            && self.witness.as_ref().is_none_or(Witness::holds)
    }
}

fn placements(
    cfg: &SystemConfig,
    spec: &GridSpec,
    rng: &mut ChaCha8Rng,
) -> Vec<BTreeSet<WorkerId>> {
    let (n, s) = (cfg.n_workers, cfg.n_malicious);
    if n <= spec.exhaustive_up_to {
        return subsets(n, s);
    }
    let mut out: Vec<BTreeSet<WorkerId>> = vec![(1..=s).map(WorkerId).collect()];
    for _ in 0..spec.sampled_placements {
        let set = sample(rng, n, s)
            .into_iter()
            .map(|j| WorkerId(j + 1))
            .collect();
        if !out.contains(&set) {
            out.push(set);
        }
    }
    out
}

fn subsets(n: usize, s: usize) -> Vec<BTreeSet<WorkerId>> {
    fn go(
        start: usize,
        n: usize,
        left: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<BTreeSet<WorkerId>>,
    ) {
        if left == 0 {
            out.push(cur.iter().map(|&j| WorkerId(j)).collect());
            return;
        }
        for j in start..=n + 1 - left {
            cur.push(j);
            go(j + 1, n, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, s, &mut Vec::new(), &mut out);
    out
}

fn single_group(cfg: &SystemConfig, set: &BTreeSet<WorkerId>) -> bool {
    set.iter()
        .map(|w| cfg.group_of(*w).unwrap())
        .collect::<BTreeSet<_>>()
        .len()
        <= 1
}

/// Up to `u - 1` honest workers of the malicious workers' first group.
fn straggler_sets(cfg: &SystemConfig, malicious: &BTreeSet<WorkerId>) -> Vec<BTreeSet<WorkerId>> {
    let g = malicious
        .first()
        .map(|w| cfg.group_of(*w).unwrap())
        .unwrap_or(1);
    let honest: Vec<WorkerId> = cfg
        .workers_of_group(g)
        .unwrap()
        .into_iter()
        .filter(|w| !malicious.contains(w))
        .rev()
        .collect();
    (1..cfg.honest_per_group)
        .map(|k| honest.iter().take(k).copied().collect())
        .collect()
}

pub fn enumerate(spec: &GridSpec) -> Vec<GridCase> {
    let mut cases = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.base_seed, 10, 0));
    let mut next_seed = 0u64;
    for m in 1..=spec.m_max {
        for s in 0..=spec.s_max {
            for u in 1..=spec.u_max {
                if m * (s + u) > spec.n_max {
                    continue;
                }
                for &big_p in &spec.samples_per_group {
                    for &k in &spec.k_values {
                        let cfg0 = SystemConfig::new(s, u, m, big_p * m, spec.d, k, 0)
                            .expect("grid config");
                        let places = placements(&cfg0, spec, &mut rng);
                        for variant in &spec.attacks {
                            let variant = *variant;
                            let sets: Vec<&BTreeSet<WorkerId>> = match variant {
                                AttackVariant::None => places.iter().take(1).collect(),
                                AttackVariant::Symmetrization { .. } => {
                                    if s / u > big_p {
                                        continue;
                                    }
                                    places.iter().filter(|p| single_group(&cfg0, p)).collect()
                                }
                                _ => places.iter().collect(),
                            };
                            for malicious in sets {
                                let mut straggle = vec![BTreeSet::new()];
                                if spec.stragglers {
                                    straggle = straggler_sets(&cfg0, malicious);
                                }
                                for stragglers in straggle {
                                    for _ in 0..spec.seeds_per_case {
                                        let seed = derive_seed(spec.base_seed, 11, next_seed);
                                        next_seed += 1;
                                        let cfg = SystemConfig {
                                            rng_seed: seed,
                                            ..cfg0.clone()
                                        };
                                        let mut attack =
                                            AttackSpec::new(&cfg, variant.kind(), seed);
                                        attack.malicious = malicious.clone();
                                        attack.stragglers = stragglers.clone();
                                        match variant {
                                            AttackVariant::Symmetrization { collapse } => {
                                                attack.params.collapse = Some(collapse)
                                            }
                                            AttackVariant::AlignAndStall { forced: true } => {
                                                attack.params.forced_local_comps = s / u
                                            }
                                            _ => {}
                                        }
                                        cases.push(GridCase {
                                            cfg,
                                            attack,
                                            variant,
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    cases
}

pub fn evaluate(case: &GridCase) -> CaseResult {
    let ids = |set: &BTreeSet<WorkerId>| set.iter().map(|w| w.0 - 1).collect::<Vec<_>>();
    let mut result = CaseResult {
        variant: case.variant,
        malicious: ids(&case.attack.malicious),
        stragglers: ids(&case.attack.stragglers),
        record: None,
        error: None,
        violations: Vec::new(),
        honest_eliminated: 0,
        witness: None,
    };
    let run = match execute(&case.cfg, &case.attack) {
        Ok(r) => r,
        Err(e) => {
            result.error = Some(e.to_string());
            return result;
        }
    };
    result.honest_eliminated = run.outcome.honest_eliminated().len();
    result.violations = run.violations.clone();
    if let (AttackVariant::Symmetrization { collapse: false }, Some(plan)) =
        (case.variant, &run.outcome.plan)
    {
        if plan.honest_block.is_none()
            && !plan.blocks.is_empty()
            && case.attack.stragglers.is_empty()
        {
            let computed: BTreeSet<usize> = run
                .outcome
                .transcript
                .local_indices()
                .iter()
                .copied()
                .collect();
            let big_p = case.cfg.samples_per_group() as u64;
            let q = plan.blocks.len() as u64;
            result.witness = Some(Witness {
                blocks: plan.blocks.len(),
                targets_computed: plan.targets.iter().all(|i| computed.contains(i)),
                kappa_lower: log2_binomial(big_p, q),
                lower_met: covers_binomial(run.outcome.metrics.kappa_bits, big_p, q),
            });
        }
    }
    result.record = Some(run.record);
    result
}

#[derive(Debug, Clone, Serialize)]
pub struct GridReport {
    pub results: Vec<CaseResult>,
}

impl GridReport {
    pub fn runs(&self) -> usize {
        self.results.len()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.results.iter().filter(|r| !r.passed())
    }
}

pub fn run_grid(spec: &GridSpec) -> GridReport {
    run_cases(&enumerate(spec))
}

/// Results come back in case order.
pub fn run_cases(cases: &[GridCase]) -> GridReport {
    GridReport {
        results: cases.par_iter().map(evaluate).collect(),
    }
}
