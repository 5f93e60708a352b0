//! Malicious strategies.
//!
//! * `Symmetrization`: blocks of `u` malicious workers each corrupt one
//!   distinct sample, so every class looks as plausible as the honest one.
//! * `AlignAndStall`: one shared corrupted table, with final votes chosen to
//!   eliminate as few workers per match as possible.
//! * `RandomCorruption`: independent per-claim corruption.
//! * `AdaptiveCustom`: seeded chaos that reacts to the match in progress.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::GradientVec;
use crate::assignment::{SystemConfig, WorkerId};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::workers::{
    table_response, AdaptiveStrategy, ClaimTable, EncodingRequest, GroupData, ResponseContext,
    WorkerBehavior, WorkerPool, WorkerResponse,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    Symmetrization,
    AlignAndStall,
    #[serde(rename = "random")]
    RandomCorruption,
    AdaptiveCustom,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::None,
        AttackKind::Symmetrization,
        AttackKind::AlignAndStall,
        AttackKind::RandomCorruption,
        AttackKind::AdaptiveCustom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Symmetrization => "symmetrization",
            AttackKind::AlignAndStall => "align_and_stall",
            AttackKind::RandomCorruption => "random",
            AttackKind::AdaptiveCustom => "adaptive_custom",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown attack '{s}'")))
    }
}

fn default_rate() -> f64 {
    0.5
}

fn default_silence() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackParams {
    /// Symmetrization: all malicious workers corrupt one sample identically.
    /// Drawn with a fair coin when unset.
    #[serde(default)]
    pub collapse: Option<bool>,
    /// Symmetrization: let the honest workers play block `h` (1-based)
    /// instead of the truthful row. Unset means they stay truthful.
    #[serde(default)]
    pub honest_block: Option<usize>,
    /// Symmetrization: leftover `|M| mod u` workers copy the truthful row
    /// (`true`) or a random block row (`false`). Coin flip when unset.
    #[serde(default)]
    pub remainder_mimics_honest: Option<bool>,
    #[serde(default = "default_rate")]
    pub corruption_rate: f64,
    /// Align-and-stall: number of local computations to concede at the end.
    #[serde(default)]
    pub forced_local_comps: usize,
    #[serde(default = "default_silence")]
    pub silence_rate: f64,
}

impl Default for AttackParams {
    fn default() -> Self {
        Self {
            collapse: None,
            honest_block: None,
            remainder_mimics_honest: None,
            corruption_rate: default_rate(),
            forced_local_comps: 0,
            silence_rate: default_silence(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub malicious: BTreeSet<WorkerId>,
    pub stragglers: BTreeSet<WorkerId>,
    pub seed: u64,
    pub params: AttackParams,
}

impl AttackSpec {
    /// Malicious workers `1..=s`, all in the first group.
    pub fn new(cfg: &SystemConfig, kind: AttackKind, seed: u64) -> Self {
        Self {
            kind,
            malicious: (1..=cfg.n_malicious).map(WorkerId).collect(),
            stragglers: BTreeSet::new(),
            seed,
            params: AttackParams::default(),
        }
    }

    pub fn honest(seed: u64) -> Self {
        Self {
            kind: AttackKind::None,
            malicious: BTreeSet::new(),
            stragglers: BTreeSet::new(),
            seed,
            params: AttackParams::default(),
        }
    }

    /// Workers that deviate from the protocol in this run.
    pub fn active_malicious(&self) -> BTreeSet<WorkerId> {
        if self.kind == AttackKind::None {
            BTreeSet::new()
        } else {
            self.malicious.clone()
        }
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if self.malicious.len() > cfg.n_malicious {
            return Err(Error::Config(format!(
                "{} malicious workers exceed s = {}",
                self.malicious.len(),
                cfg.n_malicious
            )));
        }
        for w in self.malicious.iter().chain(&self.stragglers) {
            cfg.group_of(*w)
                .map_err(|_| Error::Config(format!("worker {} out of range", w.0)))?;
        }
        if let Some(w) = self.malicious.intersection(&self.stragglers).next() {
            return Err(Error::Config(format!(
                "worker {} is both malicious and a straggler",
                w.0
            )));
        }
        if !self.stragglers.is_empty() && self.stragglers.len() >= cfg.honest_per_group {
            return Err(Error::Config(format!(
                "{} stragglers; at most u - 1 = {} are tolerated",
                self.stragglers.len(),
                cfg.honest_per_group - 1
            )));
        }
        if !(0.0..=1.0).contains(&self.params.corruption_rate)
            || !(0.0..=1.0).contains(&self.params.silence_rate)
        {
            return Err(Error::Config("rates must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Which row of the symmetrization table a worker reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Row {
    /// `g'` at every target sample.
    Base,
    /// `g''` at target `b` (1-based), `g'` at the other targets.
    Block(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetrizationPlan {
    pub group: usize,
    /// Target samples; block `b` disputes `targets[b - 1]`.
    pub targets: Vec<usize>,
    pub blocks: Vec<Vec<WorkerId>>,
    pub base_row: Vec<WorkerId>,
    pub remainder: Vec<WorkerId>,
    pub remainder_row: Row,
    pub g_prime: BTreeMap<usize, GradientVec>,
    pub g_double_prime: BTreeMap<usize, GradientVec>,
    pub honest_block: Option<usize>,
    /// Collapse variant: every malicious worker claims this value at this sample.
    pub collapse: Option<(usize, GradientVec)>,
}

impl SymmetrizationPlan {
    pub fn row_table(&self, row: Row) -> ClaimTable {
        let mut t = ClaimTable::truthful();
        for (b, &i) in self.targets.iter().enumerate() {
            let v = match row {
                Row::Block(h) if h == b + 1 => &self.g_double_prime[&i],
                _ => &self.g_prime[&i],
            };
            t.set(i, v.clone());
        }
        t
    }

    /// The table each malicious worker reports.
    pub fn malicious_tables(&self, honest: &BTreeSet<WorkerId>) -> BTreeMap<WorkerId, ClaimTable> {
        let mut out = BTreeMap::new();
        if let Some((i, v)) = &self.collapse {
            let mut t = ClaimTable::truthful();
            t.set(*i, v.clone());
            for w in self
                .blocks
                .iter()
                .flatten()
                .chain(&self.base_row)
                .chain(&self.remainder)
            {
                if !honest.contains(w) {
                    out.insert(*w, t.clone());
                }
            }
            return out;
        }
        for (b, block) in self.blocks.iter().enumerate() {
            for w in block.iter().filter(|w| !honest.contains(w)) {
                out.insert(*w, self.row_table(Row::Block(b + 1)));
            }
        }
        for w in self.base_row.iter().filter(|w| !honest.contains(w)) {
            out.insert(*w, self.row_table(Row::Base));
        }
        for w in &self.remainder {
            out.insert(*w, self.row_table(self.remainder_row));
        }
        out
    }
}

fn distinct_nonzero_deltas(
    group: &GroupData<'_>,
    q: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<GradientVec> {
    let bits = group.alphabet.size_log2() as u64 * group.dim as u64;
    let capacity = if bits >= 63 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    };
    let mut out: Vec<GradientVec> = Vec::with_capacity(q);
    while out.len() < q {
        let v = group.alphabet.random_nonzero_vec(group.dim, rng);
        if (out.len() as u64) >= capacity || !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn malicious_group(cfg: &SystemConfig, malicious: &BTreeSet<WorkerId>) -> Result<Option<usize>> {
    let groups: BTreeSet<usize> = malicious
        .iter()
        .map(|w| cfg.group_of(*w))
        .collect::<Result<_>>()?;
    match groups.len() {
        0 => Ok(None),
        1 => Ok(groups.into_iter().next()),
        _ => Err(Error::Attack(
            "symmetrization needs every malicious worker in one group".into(),
        )),
    }
}

pub fn plan_symmetrization(
    cfg: &SystemConfig,
    attack: &AttackSpec,
    groups: &[GroupData<'_>],
    rng: &mut ChaCha8Rng,
) -> Result<SymmetrizationPlan> {
    let malicious = attack.active_malicious();
    let g = malicious_group(cfg, &malicious)?.unwrap_or(1);
    let group = &groups[g - 1];
    let u = cfg.honest_per_group;
    let big_p = cfg.samples_per_group();
    let q = malicious.len() / u;
    if q > big_p {
        return Err(Error::Attack(format!(
            "{q} blocks need distinct samples but p/m = {big_p}"
        )));
    }
    let honest: Vec<WorkerId> = cfg
        .workers_of_group(g)?
        .into_iter()
        .filter(|w| !malicious.contains(w))
        .collect();

    let mut targets: Vec<usize> = rand::seq::index::sample(rng, big_p, q)
        .into_iter()
        .map(|i| group.samples.lo + i)
        .collect();
    targets.sort_unstable();
    let deltas = distinct_nonzero_deltas(group, q, rng);

    let honest_block = attack.params.honest_block;
    if let Some(h) = honest_block {
        if h == 0 || h > q || honest.len() != u {
            return Err(Error::Attack(format!(
                "honest block {h} needs 1 <= h <= {q} and exactly u honest workers"
            )));
        }
    }
    let a = group.alphabet;
    let mut g_prime = BTreeMap::new();
    let mut g_double_prime = BTreeMap::new();
    for (b, (&i, delta)) in targets.iter().zip(&deltas).enumerate() {
        let truth = group.truth(i);
        if honest_block == Some(b + 1) {
            g_prime.insert(i, a.sub(truth, delta)?);
            g_double_prime.insert(i, truth.clone());
        } else {
            g_prime.insert(i, truth.clone());
            g_double_prime.insert(i, a.add(truth, delta)?);
        }
    }

    let mut pool: Vec<WorkerId> = malicious.iter().copied().collect();
    pool.shuffle(rng);
    let mut take = |count: usize| pool.drain(..count).collect::<Vec<_>>();
    let mut blocks = Vec::with_capacity(q);
    for b in 1..=q {
        blocks.push(if honest_block == Some(b) {
            honest.clone()
        } else {
            take(u)
        });
    }
    let base_row = if honest_block.is_some() {
        take(u)
    } else {
        honest.clone()
    };
    let remainder = pool;

    let mimic_honest = attack
        .params
        .remainder_mimics_honest
        .unwrap_or_else(|| rng.gen_bool(0.5));
    let remainder_row = if mimic_honest || q == 0 {
        Row::Base
    } else {
        Row::Block(rng.gen_range(1..=q))
    };

    let collapse =
        if attack.params.collapse.unwrap_or_else(|| rng.gen_bool(0.5)) && !malicious.is_empty() {
            let i = if q > 0 {
                targets[rng.gen_range(0..q)]
            } else {
                rng.gen_range(group.samples.iter())
            };
            let delta = a.random_nonzero_vec(group.dim, rng);
            Some((i, a.add(group.truth(i), &delta)?))
        } else {
            None
        };

    Ok(SymmetrizationPlan {
        group: g,
        targets,
        blocks,
        base_row,
        remainder,
        remainder_row,
        g_prime,
        g_double_prime,
        honest_block,
        collapse,
    })
}

/// One corrupted table per group, shared by every malicious worker in it.
pub fn plan_align_and_stall(
    cfg: &SystemConfig,
    attack: &AttackSpec,
    groups: &[GroupData<'_>],
    rng: &mut ChaCha8Rng,
) -> Result<BTreeMap<WorkerId, AlignAndStall>> {
    let mut by_group: BTreeMap<usize, BTreeSet<WorkerId>> = BTreeMap::new();
    for w in attack.active_malicious() {
        by_group.entry(cfg.group_of(w)?).or_default().insert(w);
    }
    let mut out = BTreeMap::new();
    for (g, coalition) in by_group {
        let group = &groups[g - 1];
        let i = rng.gen_range(group.samples.iter());
        let delta = group.alphabet.random_nonzero_vec(group.dim, rng);
        let mut table = ClaimTable::truthful();
        table.set(i, group.alphabet.add(group.truth(i), &delta)?);
        let strategy = AlignAndStall {
            coalition: coalition.clone(),
            table,
            u: cfg.honest_per_group,
            forced: attack
                .params
                .forced_local_comps
                .min(cfg.n_malicious / cfg.honest_per_group),
        };
        for w in coalition {
            out.insert(w, strategy.clone());
        }
    }
    Ok(out)
}

pub fn plan_random(
    cfg: &SystemConfig,
    attack: &AttackSpec,
    groups: &[GroupData<'_>],
    rng: &mut ChaCha8Rng,
) -> Result<BTreeMap<WorkerId, ClaimTable>> {
    let mut out = BTreeMap::new();
    for w in attack.active_malicious() {
        let group = &groups[cfg.group_of(w)? - 1];
        out.insert(w, random_table(group, attack.params.corruption_rate, rng)?);
    }
    Ok(out)
}

fn random_table(group: &GroupData<'_>, rate: f64, rng: &mut ChaCha8Rng) -> Result<ClaimTable> {
    let a = group.alphabet;
    let mut t = ClaimTable::truthful();
    for i in group.samples.iter() {
        if rng.gen_bool(rate) {
            t.set(
                i,
                a.add(group.truth(i), &a.random_nonzero_vec(group.dim, rng))?,
            );
        }
    }
    Ok(t)
}

/// Table-consistent everywhere except in final votes, where the coalition
/// keeps each match down to a single elimination until only `forced * u`
/// members remain, then concedes local computations of exactly `u` each.
#[derive(Debug, Clone)]
pub struct AlignAndStall {
    pub coalition: BTreeSet<WorkerId>,
    pub table: ClaimTable,
    pub u: usize,
    pub forced: usize,
}

impl AlignAndStall {
    fn final_vote(
        &self,
        me: WorkerId,
        challenger: WorkerId,
        voter: WorkerId,
        class: &[WorkerId],
        rep_is_challenger: bool,
    ) -> Option<bool> {
        let size = class.len();
        let stalling = size > self.forced.min(size / self.u) * self.u;
        let others: Vec<WorkerId> = class
            .iter()
            .copied()
            .filter(|w| *w != challenger && *w != voter)
            .collect();
        let among_first = others
            .iter()
            .position(|w| *w == me)
            .map(|pos| pos + 1 < self.u);
        let in_class = among_first?;
        Some(match (rep_is_challenger, stalling) {
            (true, true) => false,
            (true, false) => in_class,
            (false, true) => true,
            (false, false) => !in_class,
        })
    }
}

impl AdaptiveStrategy for AlignAndStall {
    fn respond(&mut self, ctx: &ResponseContext<'_>, req: &EncodingRequest) -> WorkerResponse {
        let consistent =
            || table_response(&self.table, req, ctx.group).unwrap_or(WorkerResponse::Silent);
        let (EncodingRequest::Vote { .. }, Some(m)) = (req, ctx.current_match) else {
            return consistent();
        };
        if ctx.worker == m.challenger || ctx.worker == m.voter {
            return consistent();
        }
        let rep_is_challenger = self.coalition.contains(&m.challenger);
        let rep_is_voter = self.coalition.contains(&m.voter);
        let class = match (rep_is_challenger, rep_is_voter) {
            (true, false) => &m.challenger_class,
            (false, true) => &m.voter_class,
            _ => return consistent(),
        };
        match self.final_vote(ctx.worker, m.challenger, m.voter, class, rep_is_challenger) {
            Some(bit) => WorkerResponse::Bit(bit),
            None => consistent(),
        }
    }
}

/// Seeded random behaviour: corrupted claims, random answers, occasional
/// silence or wrongly shaped replies. Always answers the initial round.
#[derive(Debug)]
pub struct ChaosStrategy {
    rng: ChaCha8Rng,
    table: ClaimTable,
    silence_rate: f64,
}

impl ChaosStrategy {
    pub fn new(seed: u64, table: ClaimTable, silence_rate: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            table,
            silence_rate,
        }
    }
}

impl AdaptiveStrategy for ChaosStrategy {
    fn respond(&mut self, ctx: &ResponseContext<'_>, req: &EncodingRequest) -> WorkerResponse {
        let consistent =
            table_response(&self.table, req, ctx.group).unwrap_or(WorkerResponse::Silent);
        if matches!(req, EncodingRequest::InitialSum) {
            return consistent;
        }
        if self.rng.gen_bool(self.silence_rate) {
            return WorkerResponse::Silent;
        }
        if self.rng.gen_bool(0.02) {
            return WorkerResponse::Gradient(ctx.group.alphabet.zero(1));
        }
        if self.rng.gen_bool(0.5) {
            return consistent;
        }
        match req {
            EncodingRequest::PartialSum { .. } => {
                WorkerResponse::Sym(ctx.group.alphabet.random_symbol(&mut self.rng))
            }
            _ => WorkerResponse::Bit(self.rng.gen_bool(0.5)),
        }
    }
}

/// Worker behaviours for one run, plus the symmetrization plan when used.
#[derive(Debug)]
pub struct Population {
    pub pool: WorkerPool,
    pub plan: Option<SymmetrizationPlan>,
}

pub fn build_population(
    cfg: &SystemConfig,
    attack: &AttackSpec,
    groups: &[GroupData<'_>],
) -> Result<Population> {
    attack.validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(attack.seed, 1, 0));
    let mut pool = WorkerPool::honest(cfg.n_workers);
    for w in &attack.stragglers {
        pool.set(*w, WorkerBehavior::Straggler);
    }
    let mut plan = None;
    match attack.kind {
        AttackKind::None => {}
        AttackKind::Symmetrization => {
            let p = plan_symmetrization(cfg, attack, groups, &mut rng)?;
            let honest: BTreeSet<WorkerId> = cfg
                .workers()
                .filter(|w| !attack.malicious.contains(w))
                .collect();
            for (w, t) in p.malicious_tables(&honest) {
                pool.set(w, WorkerBehavior::Table(t));
            }
            plan = Some(p);
        }
        AttackKind::AlignAndStall => {
            for (w, s) in plan_align_and_stall(cfg, attack, groups, &mut rng)? {
                pool.set(w, WorkerBehavior::Adaptive(Box::new(s)));
            }
        }
        AttackKind::RandomCorruption => {
            for (w, t) in plan_random(cfg, attack, groups, &mut rng)? {
                pool.set(w, WorkerBehavior::Table(t));
            }
        }
        AttackKind::AdaptiveCustom => {
            for w in attack.active_malicious() {
                let group = &groups[cfg.group_of(w)? - 1];
                let table = random_table(group, attack.params.corruption_rate, &mut rng)?;
                let seed = derive_seed(attack.seed, 2, w.0 as u64);
                pool.set(
                    w,
                    WorkerBehavior::Adaptive(Box::new(ChaosStrategy::new(
                        seed,
                        table,
                        attack.params.silence_rate,
                    ))),
                );
            }
        }
    }
    Ok(Population { pool, plan })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(cfg: &SystemConfig, seed: u64) -> Vec<GradientVec> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..cfg.n_samples)
            .map(|_| cfg.alphabet.random_vec(cfg.dim, &mut rng))
            .collect()
    }

    #[test]
    fn attack_names_round_trip() {
        for k in AttackKind::ALL {
            assert_eq!(k.name().parse::<AttackKind>().unwrap(), k);
        }
        assert!("bogus".parse::<AttackKind>().is_err());
    }

    #[test]
    fn symmetrization_blocks_dispute_distinct_samples() {
        let cfg = SystemConfig::new(4, 2, 1, 8, 2, 8, 0).unwrap();
        let t = truth(&cfg, 1);
        let groups = GroupData::all(&cfg, &t).unwrap();
        let mut attack = AttackSpec::new(&cfg, AttackKind::Symmetrization, 3);
        attack.params.collapse = Some(false);
        let plan =
            plan_symmetrization(&cfg, &attack, &groups, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(plan.blocks.len(), 2);
        assert_eq!(plan.targets.len(), 2);
        assert_ne!(plan.targets[0], plan.targets[1]);
        assert!(plan.remainder.is_empty());
        let honest: BTreeSet<_> = [WorkerId(5), WorkerId(6)].into();
        let tables = plan.malicious_tables(&honest);
        assert_eq!(tables.len(), 4);
        for (b, block) in plan.blocks.iter().enumerate() {
            for w in block {
                assert_eq!(tables[w].corrupted(&groups[0]), vec![plan.targets[b]]);
            }
        }
    }

    #[test]
    fn symmetrization_needs_one_group() {
        let cfg = SystemConfig::new(2, 1, 2, 4, 1, 8, 0).unwrap();
        let t = truth(&cfg, 1);
        let groups = GroupData::all(&cfg, &t).unwrap();
        let mut attack = AttackSpec::new(&cfg, AttackKind::Symmetrization, 0);
        attack.malicious = [WorkerId(1), WorkerId(4)].into();
        let err = plan_symmetrization(&cfg, &attack, &groups, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::Attack(_))));
    }

    #[test]
    fn too_many_stragglers_rejected() {
        let cfg = SystemConfig::new(1, 2, 1, 4, 1, 8, 0).unwrap();
        let mut attack = AttackSpec::new(&cfg, AttackKind::None, 0);
        attack.stragglers = [WorkerId(2), WorkerId(3)].into();
        assert!(attack.validate(&cfg).is_err());
        attack.stragglers = [WorkerId(1)].into();
        assert!(attack.validate(&cfg).is_err());
    }
}
