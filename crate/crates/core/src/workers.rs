//! Worker behaviours and their replies to the main node's encoding requests.
//!
//! A worker's claims are a [`ClaimTable`]: overrides over the true partial
//! gradients of its group. A table-consistent worker answers every request
//! from its table, so its answers never contradict each other.

use std::collections::BTreeMap;
use std::fmt;

use crate::alphabet::{Alphabet, GradientVec, IndexRange, Symbol};
use crate::assignment::{SystemConfig, WorkerId};
use crate::error::{Error, Result};
use crate::protocol::transcript::Transcript;

/// True partial gradients of one group plus their precomputed sum.
#[derive(Debug, Clone)]
pub struct GroupData<'a> {
    pub index: usize,
    pub alphabet: Alphabet,
    pub samples: IndexRange,
    pub dim: usize,
    truth: &'a [GradientVec],
    truth_sum: GradientVec,
}

impl<'a> GroupData<'a> {
    pub fn new(cfg: &SystemConfig, group: usize, truth: &'a [GradientVec]) -> Result<Self> {
        if truth.len() != cfg.n_samples {
            return Err(Error::Config(format!(
                "{} gradients for {} samples",
                truth.len(),
                cfg.n_samples
            )));
        }
        if let Some(g) = truth.iter().find(|g| g.dim() != cfg.dim) {
            return Err(Error::Dimension {
                expected: cfg.dim,
                got: g.dim(),
            });
        }
        let samples = cfg.samples_of_group(group)?;
        let truth_sum = cfg.alphabet.sum_range(truth, samples)?;
        Ok(Self {
            index: group,
            alphabet: cfg.alphabet,
            samples,
            dim: cfg.dim,
            truth,
            truth_sum,
        })
    }

    pub fn all(cfg: &SystemConfig, truth: &'a [GradientVec]) -> Result<Vec<Self>> {
        (1..=cfg.n_groups)
            .map(|g| Self::new(cfg, g, truth))
            .collect()
    }

    /// True gradient of sample `i`; `i` must lie in this group.
    pub fn truth(&self, i: usize) -> &'a GradientVec {
        &self.truth[i - 1]
    }

    pub fn truth_sum(&self) -> &GradientVec {
        &self.truth_sum
    }

    pub fn check_request(&self, req: &EncodingRequest) -> Result<()> {
        match req {
            EncodingRequest::InitialSum => Ok(()),
            EncodingRequest::PartialSum { range, coord }
            | EncodingRequest::Vote { range, coord, .. } => {
                if !self.samples.contains_range(range) {
                    return Err(Error::Protocol(format!(
                        "range [{}, {}] outside group {} samples",
                        range.lo, range.hi, self.index
                    )));
                }
                if *coord == 0 || *coord > self.dim {
                    return Err(Error::Protocol(format!(
                        "coordinate {coord} outside [1, {}]",
                        self.dim
                    )));
                }
                Ok(())
            }
        }
    }
}

/// A worker's claimed gradients: the truth except at the overridden samples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClaimTable {
    overrides: BTreeMap<usize, GradientVec>,
}

impl ClaimTable {
    pub fn truthful() -> Self {
        Self::default()
    }

    pub fn set(&mut self, sample: usize, value: GradientVec) {
        self.overrides.insert(sample, value);
    }

    pub fn overrides(&self) -> &BTreeMap<usize, GradientVec> {
        &self.overrides
    }

    pub fn claim<'b>(&'b self, sample: usize, group: &'b GroupData<'_>) -> &'b GradientVec {
        self.overrides
            .get(&sample)
            .unwrap_or_else(|| group.truth(sample))
    }

    /// Samples whose claim differs from the truth.
    pub fn corrupted(&self, group: &GroupData<'_>) -> Vec<usize> {
        self.overrides
            .iter()
            .filter(|(i, v)| *v != group.truth(**i))
            .map(|(i, _)| *i)
            .collect()
    }

    pub fn initial_sum(&self, group: &GroupData<'_>) -> Result<GradientVec> {
        let a = group.alphabet;
        let mut acc = group.truth_sum().clone();
        for (i, v) in &self.overrides {
            let delta = a.sub(v, group.truth(*i))?;
            a.add_assign(&mut acc, &delta)?;
        }
        Ok(acc)
    }

    pub fn range_coord_sum(
        &self,
        group: &GroupData<'_>,
        range: IndexRange,
        coord: usize,
    ) -> Result<Symbol> {
        let a = group.alphabet;
        let mut acc = a.reduce(0);
        for i in range.iter() {
            acc = a.add_sym(acc, self.claim(i, group).coord(coord)?);
        }
        Ok(acc)
    }
}

/// Requests issued by the main node. Ranges and coordinates are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodingRequest {
    InitialSum,
    PartialSum {
        range: IndexRange,
        coord: usize,
    },
    Vote {
        proposed: Symbol,
        range: IndexRange,
        coord: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkerResponse {
    Gradient(GradientVec),
    Sym(Symbol),
    Bit(bool),
    Silent,
}

impl WorkerResponse {
    pub fn uplink_bits(&self, alphabet: Alphabet) -> u64 {
        let k = alphabet.bits_per_symbol() as u64;
        match self {
            WorkerResponse::Gradient(g) => g.dim() as u64 * k,
            WorkerResponse::Sym(_) => k,
            WorkerResponse::Bit(_) => 1,
            WorkerResponse::Silent => 0,
        }
    }

    /// Whether the reply has the shape the request asks for.
    pub fn answers(&self, req: &EncodingRequest, dim: usize) -> bool {
        match (req, self) {
            (EncodingRequest::InitialSum, WorkerResponse::Gradient(g)) => g.dim() == dim,
            (EncodingRequest::PartialSum { .. }, WorkerResponse::Sym(_)) => true,
            (EncodingRequest::Vote { .. }, WorkerResponse::Bit(_)) => true,
            _ => false,
        }
    }
}

/// The match a request belongs to, as visible to every worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchView {
    pub challenger: WorkerId,
    pub voter: WorkerId,
    pub challenger_class: Vec<WorkerId>,
    pub voter_class: Vec<WorkerId>,
    pub coord: usize,
}

pub struct ResponseContext<'a> {
    pub worker: WorkerId,
    pub group: &'a GroupData<'a>,
    pub transcript: &'a Transcript,
    pub current_match: Option<&'a MatchView>,
}

/// A malicious strategy that may react to the public transcript.
pub trait AdaptiveStrategy: Send + fmt::Debug {
    fn respond(&mut self, ctx: &ResponseContext<'_>, req: &EncodingRequest) -> WorkerResponse;
}

#[derive(Debug)]
pub enum WorkerBehavior {
    Honest,
    Straggler,
    Table(ClaimTable),
    Adaptive(Box<dyn AdaptiveStrategy>),
}

impl WorkerBehavior {
    pub fn is_honest(&self) -> bool {
        matches!(self, WorkerBehavior::Honest | WorkerBehavior::Straggler)
    }
}

pub fn table_response(
    table: &ClaimTable,
    req: &EncodingRequest,
    group: &GroupData<'_>,
) -> Result<WorkerResponse> {
    group.check_request(req)?;
    Ok(match req {
        EncodingRequest::InitialSum => WorkerResponse::Gradient(table.initial_sum(group)?),
        EncodingRequest::PartialSum { range, coord } => {
            WorkerResponse::Sym(table.range_coord_sum(group, *range, *coord)?)
        }
        EncodingRequest::Vote {
            proposed,
            range,
            coord,
        } => WorkerResponse::Bit(table.range_coord_sum(group, *range, *coord)? == *proposed),
    })
}

pub fn respond(
    behavior: &mut WorkerBehavior,
    req: &EncodingRequest,
    ctx: &ResponseContext<'_>,
) -> Result<WorkerResponse> {
    ctx.group.check_request(req)?;
    match behavior {
        WorkerBehavior::Honest => table_response(&ClaimTable::truthful(), req, ctx.group),
        WorkerBehavior::Straggler => Ok(WorkerResponse::Silent),
        WorkerBehavior::Table(t) => table_response(t, req, ctx.group),
        WorkerBehavior::Adaptive(a) => Ok(a.respond(ctx, req)),
    }
}

/// One behaviour per worker, indexed by [`WorkerId`].
#[derive(Debug)]
pub struct WorkerPool {
    behaviors: Vec<WorkerBehavior>,
}

impl WorkerPool {
    pub fn honest(n: usize) -> Self {
        Self {
            behaviors: (0..n).map(|_| WorkerBehavior::Honest).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.behaviors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.behaviors.is_empty()
    }

    pub fn set(&mut self, w: WorkerId, behavior: WorkerBehavior) {
        self.behaviors[w.0 - 1] = behavior;
    }

    pub fn get(&self, w: WorkerId) -> &WorkerBehavior {
        &self.behaviors[w.0 - 1]
    }

    pub fn get_mut(&mut self, w: WorkerId) -> &mut WorkerBehavior {
        &mut self.behaviors[w.0 - 1]
    }

    pub fn is_honest(&self, w: WorkerId) -> bool {
        self.get(w).is_honest()
    }
}

/// Queries every worker for its group sum; stragglers answer [`WorkerResponse::Silent`].
pub fn initial_responses(
    cfg: &SystemConfig,
    pool: &mut WorkerPool,
    groups: &[GroupData<'_>],
    transcript: &Transcript,
) -> Result<Vec<(WorkerId, WorkerResponse)>> {
    cfg.workers()
        .map(|w| {
            let group = &groups[cfg.group_of(w)? - 1];
            let ctx = ResponseContext {
                worker: w,
                group,
                transcript,
                current_match: None,
            };
            Ok((
                w,
                respond(pool.get_mut(w), &EncodingRequest::InitialSum, &ctx)?,
            ))
        })
        .collect()
}
