//! The main node's side: initial round, class tournament, bisection matches
//! and decoding.

pub mod matching;
pub mod scheme;
pub mod tournament;
pub mod transcript;

pub use matching::{MatchEnd, MatchState};
pub use scheme::{
    decode, draco_baseline, run_scheme, run_with_population, DracoOutcome, Metrics, SchemeOutcome,
};
pub use tournament::{form_groups, MatchRecord, Thresholds, Tournament, WorkerClass};
pub use transcript::{Entry, Transcript, TranscriptRecord};
