//! Equivalence classes of initial replies and the match loop that reduces
//! them to one.

use std::collections::BTreeSet;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{GradientVec, IndexRange, Symbol};
use crate::assignment::WorkerId;
use crate::bounds::ceil_log2;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::protocol::matching::{MatchEnd, MatchState};
use crate::protocol::scheme::MainNode;
use crate::protocol::transcript::{Entry, TranscriptRecord};
use crate::workers::{EncodingRequest, MatchView, WorkerResponse};

/// Workers that sent the same initial reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerClass {
    pub members: BTreeSet<WorkerId>,
    pub response: GradientVec,
}

impl WorkerClass {
    pub fn min_id(&self) -> WorkerId {
        *self.members.first().expect("classes are never empty")
    }
}

/// `support`: every honest class in the group has at least this many
/// responsive members. `accept_above`: no malicious class can be larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    pub support: usize,
    pub accept_above: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRecord {
    pub challenger: WorkerId,
    pub voter: WorkerId,
    pub coord: usize,
    pub steps: u32,
    pub end: MatchEnd,
    pub committers: Vec<WorkerId>,
    pub rejectors: Vec<WorkerId>,
    pub local_computation: Option<usize>,
    pub eliminated: Vec<WorkerId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tournament {
    pub group: usize,
    pub thresholds: Thresholds,
    pub classes: Vec<WorkerClass>,
    /// Workers proven to deviate from the protocol.
    pub suspects: BTreeSet<WorkerId>,
    /// Workers that never answered the initial round.
    pub silent: BTreeSet<WorkerId>,
    pub accepted_early: bool,
    pub matches: Vec<MatchRecord>,
}

impl Tournament {
    pub fn winner(&self) -> Result<&WorkerClass> {
        match self.classes.as_slice() {
            [c] => Ok(c),
            other => Err(Error::Protocol(format!(
                "group {} ended with {} classes",
                self.group,
                other.len()
            ))),
        }
    }

    pub fn local_computations(&self) -> usize {
        self.matches
            .iter()
            .filter(|m| m.local_computation.is_some())
            .count()
    }

    fn eliminate(&mut self, workers: &[WorkerId]) {
        for c in &mut self.classes {
            for w in workers {
                c.members.remove(w);
            }
        }
        self.suspects.extend(workers.iter().copied());
        self.dissolve_small();
    }

    fn dissolve_small(&mut self) {
        let support = self.thresholds.support;
        let (keep, drop): (Vec<_>, Vec<_>) = self
            .classes
            .drain(..)
            .partition(|c| c.members.len() >= support);
        self.suspects
            .extend(drop.into_iter().flat_map(|c| c.members));
        self.classes = keep;
        self.classes.sort_by_key(|c| c.min_id());
    }
}

/// Groups initial replies into classes. `honest_floor` is a lower bound on
/// honest workers in the group before accounting for silent ones.
pub fn form_groups(
    group: usize,
    responses: &[(WorkerId, WorkerResponse)],
    honest_floor: usize,
    accept_above: usize,
    dim: usize,
) -> Tournament {
    let mut silent = BTreeSet::new();
    let mut suspects = BTreeSet::new();
    let mut classes: Vec<WorkerClass> = Vec::new();
    for (w, r) in responses {
        match r {
            WorkerResponse::Silent => {
                silent.insert(*w);
            }
            WorkerResponse::Gradient(g) if g.dim() == dim => {
                match classes.iter_mut().find(|c| &c.response == g) {
                    Some(c) => {
                        c.members.insert(*w);
                    }
                    None => classes.push(WorkerClass {
                        members: [*w].into(),
                        response: g.clone(),
                    }),
                }
            }
            _ => {
                suspects.insert(*w);
            }
        }
    }
    let support = honest_floor.saturating_sub(silent.len()).max(1);
    let mut t = Tournament {
        group,
        thresholds: Thresholds {
            support,
            accept_above,
        },
        classes,
        suspects,
        silent,
        accepted_early: false,
        matches: Vec::new(),
    };
    if let Some(pos) = t
        .classes
        .iter()
        .position(|c| c.members.len() > accept_above)
    {
        let winner = t.classes.swap_remove(pos);
        t.suspects
            .extend(t.classes.drain(..).flat_map(|c| c.members));
        t.classes.push(winner);
        t.accepted_early = true;
    } else {
        t.dissolve_small();
    }
    t
}

/// Committers and rejectors in the final round, plus workers that forfeited.
struct Tally {
    committers: Vec<WorkerId>,
    rejectors: Vec<WorkerId>,
    forfeited: Vec<WorkerId>,
}

impl MainNode<'_> {
    pub(crate) fn run_tournament(&mut self, mut t: Tournament) -> Result<Tournament> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 3, t.group as u64));
        while t.classes.len() > 1 {
            let (c1, c2) = (&t.classes[0], &t.classes[1]);
            let w1 = *c1.members.iter().choose(&mut rng).expect("nonempty");
            let w2 = *c2.members.iter().choose(&mut rng).expect("nonempty");
            let coord = c1
                .response
                .first_difference(&c2.response)
                .expect("classes differ");
            let view = MatchView {
                challenger: w1,
                voter: w2,
                challenger_class: c1.members.iter().copied().collect(),
                voter_class: c2.members.iter().copied().collect(),
                coord,
            };
            let samples = self.groups[t.group - 1].samples;
            let state = MatchState::new(
                samples,
                coord,
                c1.response.coord(coord)?,
                c2.response.coord(coord)?,
            );
            let (end, steps) = self.bisect(t.group, &view, state)?;
            let mut record = MatchRecord {
                challenger: w1,
                voter: w2,
                coord,
                steps,
                end: end.clone(),
                committers: Vec::new(),
                rejectors: Vec::new(),
                local_computation: None,
                eliminated: Vec::new(),
            };
            match end {
                MatchEnd::Forfeit { worker } => record.eliminated.push(worker),
                MatchEnd::Leaf {
                    sample,
                    claim,
                    voter_bound,
                } => {
                    let tally = self.final_vote(t.group, &view, sample, claim)?;
                    record.eliminated =
                        self.resolve(&t, &view, &tally, sample, claim, voter_bound, &mut record)?;
                    record.eliminated.extend(tally.forfeited.iter().copied());
                    record.committers = tally.committers;
                    record.rejectors = tally.rejectors;
                }
            }
            t.eliminate(&record.eliminated);
            t.matches.push(record);
        }
        t.winner()?;
        Ok(t)
    }

    fn final_vote(
        &mut self,
        group: usize,
        view: &MatchView,
        sample: usize,
        claim: Symbol,
    ) -> Result<Tally> {
        if self.groups[group - 1].samples.len() == 1 {
            // The initial replies already are the single-sample claims.
            return Ok(Tally {
                committers: view.challenger_class.clone(),
                rejectors: view.voter_class.clone(),
                forfeited: Vec::new(),
            });
        }
        self.round += 1;
        let big_p = self.cfg.samples_per_group() as u64;
        let downlink = self.cfg.alphabet.bits_per_symbol() as u64
            + ceil_log2(big_p) as u64
            + ceil_log2(self.cfg.dim as u64) as u64;
        let mut tally = Tally {
            committers: vec![view.challenger],
            rejectors: vec![view.voter],
            forfeited: Vec::new(),
        };
        let voters: BTreeSet<WorkerId> = view
            .challenger_class
            .iter()
            .chain(&view.voter_class)
            .copied()
            .filter(|w| *w != view.challenger && *w != view.voter)
            .collect();
        let range = IndexRange {
            lo: sample,
            hi: sample,
        };
        for w in voters {
            let req = EncodingRequest::Vote {
                proposed: claim,
                range,
                coord: view.coord,
            };
            match self.ask(group, w, req, Some(view), downlink)? {
                WorkerResponse::Bit(true) => tally.committers.push(w),
                WorkerResponse::Bit(false) => tally.rejectors.push(w),
                _ => tally.forfeited.push(w),
            }
        }
        Ok(tally)
    }

    #[allow(clippy::too_many_arguments)]
    fn resolve(
        &mut self,
        t: &Tournament,
        view: &MatchView,
        tally: &Tally,
        sample: usize,
        claim: Symbol,
        voter_bound: Option<Symbol>,
        record: &mut MatchRecord,
    ) -> Result<Vec<WorkerId>> {
        let support = t.thresholds.support;
        if tally.committers.len() < support {
            return Ok(tally.committers.clone());
        }
        if tally.rejectors.len() < support {
            return Ok(tally.rejectors.clone());
        }
        let value = self.groups[t.group - 1].truth(sample).clone();
        let truth = value.coord(view.coord)?;
        self.transcript.push(TranscriptRecord {
            round: self.round,
            group: t.group,
            worker: None,
            entry: Entry::LocalComputation {
                sample,
                coord: view.coord,
                value,
            },
            uplink_bits: 0,
            downlink_bits: 0,
        });
        record.local_computation = Some(sample);
        if truth == claim {
            return Ok(tally.rejectors.clone());
        }
        let mut out = tally.committers.clone();
        if voter_bound.is_some_and(|v| v != truth) {
            out.push(view.voter);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;

    fn replies(values: &[u64]) -> Vec<(WorkerId, WorkerResponse)> {
        let a = Alphabet::new(8).unwrap();
        values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                (
                    WorkerId(j + 1),
                    WorkerResponse::Gradient(a.vector(&[v]).unwrap()),
                )
            })
            .collect()
    }

    #[test]
    fn large_class_accepted_at_once() {
        let t = form_groups(1, &replies(&[5, 5, 5, 7]), 3, 1, 1);
        assert!(t.accepted_early);
        assert_eq!(t.classes.len(), 1);
        assert_eq!(t.suspects, [WorkerId(4)].into());
    }

    #[test]
    fn three_classes_under_symmetrization() {
        let t = form_groups(1, &replies(&[1, 2, 3]), 1, 2, 1);
        assert!(!t.accepted_early);
        assert_eq!(t.classes.len(), 3);
        assert!(t.suspects.is_empty());
    }

    #[test]
    fn small_classes_dissolve() {
        let t = form_groups(1, &replies(&[1, 1, 2, 3, 3]), 2, 3, 1);
        assert_eq!(t.classes.len(), 2);
        assert_eq!(t.suspects, [WorkerId(3)].into());
    }

    #[test]
    fn silence_lowers_support_and_malformed_is_suspect() {
        let mut r = replies(&[1, 1, 2, 2]);
        r.push((WorkerId(5), WorkerResponse::Silent));
        r.push((WorkerId(6), WorkerResponse::Bit(true)));
        let t = form_groups(1, &r, 3, 3, 1);
        assert_eq!(t.thresholds.support, 2);
        assert_eq!(t.silent, [WorkerId(5)].into());
        assert_eq!(t.suspects, [WorkerId(6)].into());
        assert_eq!(t.classes.len(), 2);
    }
}
