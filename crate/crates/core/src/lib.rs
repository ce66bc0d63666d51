//! Time-invariant autoregressive chain-of-thought generation and learning.
//!
//! The crate covers next-token generators over finite alphabets, the
//! chain-of-thought and end-to-end consistency learners built on them,
//! exact linear-threshold learning, a compiler from threshold circuits to a
//! single iterated threshold, Turing-machine transition generators with an
//! attention-based tape reader, and brute-force VC / growth estimators for
//! explicit lookup families.

pub mod attention;
pub mod circomp;
pub mod error;
pub mod experiment;
pub mod lbfamilies;
pub mod learning;
pub mod linthresh;
pub mod rational;
pub mod seqcore;
pub mod simplex;
pub mod turing;

pub use error::{Error, Result};
pub use seqcore::{Alphabet, Generator, NextToken, Token, TokenSeq};
