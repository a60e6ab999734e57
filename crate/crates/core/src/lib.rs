//! Distributed multi-user secret sharing over prime fields.
//!
//! Each of `K` users reads a fixed subset of `N` storage nodes. A scheme
//! lets user `k` decode its own message from its access set while learning
//! nothing about the other messages. This crate decides which rate tuples
//! are achievable, builds linear schemes for the achievable ones, checks
//! them two independent ways, and encodes and decodes payloads.
//!
//! ```
//! use dmuss::{fixtures, synthesize, verification, SynthesisOptions};
//!
//! let s = synthesize(&fixtures::example_access(), &fixtures::example_rates(), &SynthesisOptions::default())?;
//! assert!(verification::certify_ranks(&s).pass);
//! # Ok::<(), dmuss::SynthesisError>(())
//! ```

pub mod codec;
pub mod fixtures;
pub mod formats;
pub mod galois;
pub mod matching;
pub mod synthesis;
pub mod topology;
pub mod verification;

pub use codec::{place, retrieve, CodecError, KeySource, Payload, ShareSet};
pub use galois::{Element, Field, FieldMatrix, GaloisError};
pub use matching::{find_match_plan, MatchPlan, MatchingError};
pub use synthesis::{synthesize, DmussScheme, SynthesisError, SynthesisOptions};
pub use topology::{
    check_perfect_capacity, check_weak_capacity, AccessStructure, CheckMethod, Rate, RateTuple, Verdict, Violation,
};
pub use verification::{certify_ranks, entropy_oracle, VerificationReport, VerifyError};
