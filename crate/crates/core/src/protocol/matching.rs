//! Bisection search for a sample on which two workers disagree.
//!
//! The challenger proposes the left-half sum on one coordinate and the voter
//! commits or rejects. Both bound claims are tracked by subtraction, so the
//! leaf claim is known without another message.

use crate::alphabet::{Alphabet, IndexRange, Symbol};
use crate::assignment::WorkerId;
use crate::bounds::ceil_log2;
use crate::error::{Error, Result};
use crate::protocol::scheme::MainNode;
use crate::workers::{EncodingRequest, MatchView, WorkerResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchState {
    pub range: IndexRange,
    pub coord: usize,
    pub challenger_bound: Symbol,
    /// Unknown once the voter has rejected a proposal.
    pub voter_bound: Option<Symbol>,
    pub steps: u32,
}

impl MatchState {
    pub fn new(
        range: IndexRange,
        coord: usize,
        challenger_bound: Symbol,
        voter_bound: Symbol,
    ) -> Self {
        Self {
            range,
            coord,
            challenger_bound,
            voter_bound: Some(voter_bound),
            steps: 0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.range.len() == 1
    }

    /// Left half `[lo, floor((lo + hi) / 2)]`.
    pub fn left(&self) -> IndexRange {
        IndexRange {
            lo: self.range.lo,
            hi: (self.range.lo + self.range.hi) / 2,
        }
    }

    pub fn step(&mut self, alphabet: Alphabet, proposal: Symbol, commit: bool) {
        let left = self.left();
        if commit {
            self.range = IndexRange {
                lo: left.hi + 1,
                hi: self.range.hi,
            };
            self.challenger_bound = alphabet.sub_sym(self.challenger_bound, proposal);
            self.voter_bound = self.voter_bound.map(|v| alphabet.sub_sym(v, proposal));
        } else {
            self.range = left;
            self.challenger_bound = proposal;
            self.voter_bound = None;
        }
        self.steps += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchEnd {
    Leaf {
        sample: usize,
        claim: Symbol,
        voter_bound: Option<Symbol>,
    },
    /// A participant went silent or replied out of shape.
    Forfeit { worker: WorkerId },
}

impl MainNode<'_> {
    pub(crate) fn bisect(
        &mut self,
        group: usize,
        view: &MatchView,
        mut state: MatchState,
    ) -> Result<(MatchEnd, u32)> {
        let alphabet = self.cfg.alphabet;
        let k = alphabet.bits_per_symbol() as u64;
        let coord_bits = ceil_log2(self.cfg.dim as u64) as u64;
        while !state.is_leaf() {
            let left = state.left();
            let first = if state.steps == 0 { coord_bits } else { 0 };
            self.round += 1;
            let req = EncodingRequest::PartialSum {
                range: left,
                coord: state.coord,
            };
            let WorkerResponse::Sym(proposal) =
                self.ask(group, view.challenger, req, Some(view), 1 + first)?
            else {
                return Ok((
                    MatchEnd::Forfeit {
                        worker: view.challenger,
                    },
                    state.steps,
                ));
            };
            self.round += 1;
            let req = EncodingRequest::Vote {
                proposed: proposal,
                range: left,
                coord: state.coord,
            };
            let WorkerResponse::Bit(commit) =
                self.ask(group, view.voter, req, Some(view), k + first)?
            else {
                return Ok((MatchEnd::Forfeit { worker: view.voter }, state.steps));
            };
            state.step(alphabet, proposal, commit);
            if state.voter_bound == Some(state.challenger_bound) {
                return Err(Error::Protocol(
                    "bound claims coincide during bisection".into(),
                ));
            }
        }
        let end = MatchEnd::Leaf {
            sample: state.range.lo,
            claim: state.challenger_bound,
            voter_bound: state.voter_bound,
        };
        Ok((end, state.steps))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Truth g_i = i on one coordinate; the challenger adds 100 to g_5.
    #[test]
    fn finds_corrupted_sample_in_eight() {
        let a = Alphabet::new(16).unwrap();
        let truth: Vec<u64> = (1..=8).collect();
        let claim = |i: u64| if i == 5 { i + 100 } else { i };
        let sum = |lo: usize, hi: usize, f: &dyn Fn(u64) -> u64| {
            a.reduce((lo..=hi).map(|i| f(i as u64)).sum())
        };
        let range = IndexRange::new(1, 8).unwrap();
        let mut st = MatchState::new(range, 1, sum(1, 8, &claim), sum(1, 8, &|i| i));
        while !st.is_leaf() {
            let left = st.left();
            let proposal = sum(left.lo, left.hi, &claim);
            let commit = proposal == sum(left.lo, left.hi, &|i| truth[i as usize - 1]);
            st.step(a, proposal, commit);
        }
        assert_eq!(st.range.lo, 5);
        assert_eq!(st.steps, 3);
        assert_eq!(st.challenger_bound, a.reduce(105));
        assert_eq!(st.voter_bound, None);
    }

    #[test]
    fn commit_keeps_voter_bound_known() {
        let a = Alphabet::new(8).unwrap();
        let mut st = MatchState::new(IndexRange::new(1, 2).unwrap(), 1, a.reduce(10), a.reduce(7));
        st.step(a, a.reduce(3), true);
        assert_eq!(st.range, IndexRange::new(2, 2).unwrap());
        assert_eq!(st.challenger_bound, a.reduce(7));
        assert_eq!(st.voter_bound, Some(a.reduce(4)));
    }

    #[test]
    fn odd_ranges_split_left_heavy() {
        let a = Alphabet::new(8).unwrap();
        let st = MatchState::new(IndexRange::new(3, 7).unwrap(), 1, a.reduce(0), a.reduce(1));
        assert_eq!(st.left(), IndexRange::new(3, 5).unwrap());
    }
}
