//! End-to-end run: initial round, one tournament per group, decoding.
//!
//! Groups are resolved in order. Workers proven malicious in earlier groups
//! tighten the thresholds of later ones: with `sigma` such workers, a group
//! holds at most `s - sigma` malicious and at least `u + sigma` honest workers.

use std::collections::BTreeSet;

use num_rational::Ratio;
use serde::Serialize;

use crate::adversary::{build_population, AttackSpec, Population, SymmetrizationPlan};
use crate::alphabet::GradientVec;
use crate::assignment::{build_fractional_repetition, replication_factor, SystemConfig, WorkerId};
use crate::error::{Error, Result};
use crate::protocol::tournament::{form_groups, Tournament};
use crate::protocol::transcript::{Entry, Transcript, TranscriptRecord};
use crate::workers::{
    initial_responses, respond, EncodingRequest, GroupData, MatchView, ResponseContext, WorkerPool,
    WorkerResponse,
};

pub(crate) struct MainNode<'a> {
    pub(crate) cfg: &'a SystemConfig,
    pub(crate) groups: Vec<GroupData<'a>>,
    pub(crate) pool: &'a mut WorkerPool,
    pub(crate) transcript: Transcript,
    pub(crate) round: u64,
    pub(crate) seed: u64,
}

impl MainNode<'_> {
    /// Sends one request in the current round and logs the exchange.
    pub(crate) fn ask(
        &mut self,
        group: usize,
        worker: WorkerId,
        request: EncodingRequest,
        view: Option<&MatchView>,
        downlink_bits: u64,
    ) -> Result<WorkerResponse> {
        let ctx = ResponseContext {
            worker,
            group: &self.groups[group - 1],
            transcript: &self.transcript,
            current_match: view,
        };
        let response = respond(self.pool.get_mut(worker), &request, &ctx)?;
        let alphabet = self.cfg.alphabet;
        let uplink_bits = match &response {
            WorkerResponse::Silent => 0,
            r if r.answers(&request, self.cfg.dim) => r.uplink_bits(alphabet),
            _ => slot_bits(&request, self.cfg.dim, alphabet.bits_per_symbol()),
        };
        self.transcript.push(TranscriptRecord {
            round: self.round,
            group,
            worker: Some(worker),
            entry: Entry::Message {
                request,
                response: response.clone(),
            },
            uplink_bits,
            downlink_bits,
        });
        Ok(response)
    }
}

/// Bits the main node reads for a reply to `req`; oversized replies are truncated.
fn slot_bits(req: &EncodingRequest, dim: usize, k: u32) -> u64 {
    match req {
        EncodingRequest::InitialSum => dim as u64 * k as u64,
        EncodingRequest::PartialSum { .. } => k as u64,
        EncodingRequest::Vote { .. } => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    /// Communication rounds after the initial one.
    pub rounds: u64,
    pub local_computations: usize,
    #[serde(serialize_with = "ratio_as_f64")]
    pub replication: Ratio<u64>,
    /// Uplink bits after the initial round.
    pub kappa_bits: u64,
    pub downlink_bits: u64,
    pub matches: usize,
    pub initial_bits: u64,
    pub total_bits: u64,
}

fn ratio_as_f64<S: serde::Serializer>(
    r: &Ratio<u64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(*r.numer() as f64 / *r.denom() as f64)
}

#[derive(Debug)]
pub struct SchemeOutcome {
    pub estimate: GradientVec,
    pub metrics: Metrics,
    pub transcript: Transcript,
    pub tournaments: Vec<Tournament>,
    pub plan: Option<SymmetrizationPlan>,
    pub honest: BTreeSet<WorkerId>,
}

impl SchemeOutcome {
    pub fn suspects(&self) -> BTreeSet<WorkerId> {
        self.tournaments
            .iter()
            .flat_map(|t| t.suspects.iter().copied())
            .collect()
    }

    pub fn silent(&self) -> BTreeSet<WorkerId> {
        self.tournaments
            .iter()
            .flat_map(|t| t.silent.iter().copied())
            .collect()
    }

    pub fn honest_eliminated(&self) -> BTreeSet<WorkerId> {
        self.suspects()
            .intersection(&self.honest)
            .copied()
            .collect()
    }
}

/// Sum of the surviving class replies over all groups.
pub fn decode(cfg: &SystemConfig, tournaments: &[Tournament]) -> Result<GradientVec> {
    let mut acc = cfg.alphabet.zero(cfg.dim);
    for t in tournaments {
        cfg.alphabet.add_assign(&mut acc, &t.winner()?.response)?;
    }
    Ok(acc)
}

pub fn run_scheme(
    cfg: &SystemConfig,
    attack: &AttackSpec,
    truth: &[GradientVec],
) -> Result<SchemeOutcome> {
    cfg.validate()?;
    let groups = GroupData::all(cfg, truth)?;
    let Population { mut pool, plan } = build_population(cfg, attack, &groups)?;
    let mut out = run_with_population(cfg, &mut pool, truth, attack.seed)?;
    out.plan = plan;
    Ok(out)
}

/// Runs the scheme against arbitrary worker behaviours.
pub fn run_with_population(
    cfg: &SystemConfig,
    pool: &mut WorkerPool,
    truth: &[GradientVec],
    seed: u64,
) -> Result<SchemeOutcome> {
    cfg.validate()?;
    if pool.len() != cfg.n_workers {
        return Err(Error::Config(format!(
            "{} behaviours for {} workers",
            pool.len(),
            cfg.n_workers
        )));
    }
    let honest: BTreeSet<WorkerId> = cfg.workers().filter(|w| pool.is_honest(*w)).collect();
    let groups = GroupData::all(cfg, truth)?;
    let mut node = MainNode {
        cfg,
        groups,
        pool,
        transcript: Transcript::new(),
        round: 0,
        seed,
    };

    let first = initial_responses(cfg, node.pool, &node.groups, &node.transcript)?;
    for (w, r) in &first {
        node.transcript.push(TranscriptRecord {
            round: 0,
            group: cfg.group_of(*w)?,
            worker: Some(*w),
            entry: Entry::Message {
                request: EncodingRequest::InitialSum,
                response: r.clone(),
            },
            uplink_bits: match r {
                WorkerResponse::Silent => 0,
                _ => slot_bits(
                    &EncodingRequest::InitialSum,
                    cfg.dim,
                    cfg.alphabet.bits_per_symbol(),
                ),
            },
            downlink_bits: 0,
        });
    }

    let mut tournaments = Vec::with_capacity(cfg.n_groups);
    let mut proven = 0usize;
    for g in 1..=cfg.n_groups {
        let members = cfg.workers_of_group(g)?;
        let replies: Vec<_> = first
            .iter()
            .filter(|(w, _)| members.contains(w))
            .cloned()
            .collect();
        let t = form_groups(
            g,
            &replies,
            cfg.honest_per_group + proven,
            cfg.n_malicious.saturating_sub(proven),
            cfg.dim,
        );
        let t = node.run_tournament(t)?;
        proven += t.suspects.len();
        tournaments.push(t);
    }

    let estimate = decode(cfg, &tournaments)?;
    let transcript = node.transcript;
    let kappa_bits = transcript.kappa_bits();
    let initial_bits = transcript.initial_bits();
    let metrics = Metrics {
        rounds: node.round,
        local_computations: transcript.local_indices().len(),
        replication: replication_factor(&build_fractional_repetition(cfg)?),
        kappa_bits,
        downlink_bits: transcript.downlink_bits(),
        matches: tournaments.iter().map(|t| t.matches.len()).sum(),
        initial_bits,
        total_bits: initial_bits + kappa_bits,
    };
    Ok(SchemeOutcome {
        estimate,
        metrics,
        transcript,
        tournaments,
        plan: None,
        honest,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DracoOutcome {
    pub estimate: GradientVec,
    pub total_bits: u64,
}

/// Majority decoding with groups of `2s + 1` workers; needs `u = s + 1`.
pub fn draco_baseline(
    cfg: &SystemConfig,
    attack: &AttackSpec,
    truth: &[GradientVec],
) -> Result<DracoOutcome> {
    cfg.validate()?;
    if cfg.honest_per_group != cfg.n_malicious + 1 {
        return Err(Error::Config(format!(
            "majority decoding needs u = s + 1, got s = {}, u = {}",
            cfg.n_malicious, cfg.honest_per_group
        )));
    }
    let groups = GroupData::all(cfg, truth)?;
    let Population { mut pool, .. } = build_population(cfg, attack, &groups)?;
    let replies = initial_responses(cfg, &mut pool, &groups, &Transcript::new())?;
    let mut estimate = cfg.alphabet.zero(cfg.dim);
    let mut total_bits = 0u64;
    for g in 1..=cfg.n_groups {
        let members = cfg.workers_of_group(g)?;
        let group_replies: Vec<_> = replies
            .iter()
            .filter(|(w, _)| members.contains(w))
            .cloned()
            .collect();
        total_bits += group_replies
            .iter()
            .filter(|(_, r)| !matches!(r, WorkerResponse::Silent))
            .count() as u64
            * cfg.dim as u64
            * cfg.alphabet.bits_per_symbol() as u64;
        let t = form_groups(g, &group_replies, 1, cfg.n_malicious, cfg.dim);
        if !t.accepted_early {
            return Err(Error::Protocol(format!("group {g} has no majority")));
        }
        cfg.alphabet
            .add_assign(&mut estimate, &t.winner()?.response)?;
    }
    Ok(DracoOutcome {
        estimate,
        total_bits,
    })
}
