//! Greedy sparse approximation over sequences of time-frequency
//! subdictionaries, an order-statistics model of residual decay, and a
//! proof-of-concept audio codec with a seed-shared random shift sequence.

pub mod codec;
pub mod dictionary;
pub mod experiments;
pub mod orderstats;
pub mod pursuit;
pub mod rng;
pub mod signal;
pub mod subseq;
