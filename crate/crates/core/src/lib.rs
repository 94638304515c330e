//! Deterministic discrete-time simulator for air-ground multi-robot
//! exploration over fully opportunistic, one-hop gossip communication.
//!
//! * [`world`]: the ground-truth semantic grid with goals and hidden hazards
//! * [`gossip`]: content-addressed message stores and pairwise sync sessions
//! * [`network`]: disc connectivity, association gating and contention budgets
//! * [`agents`]: ground robot planning and motion, aerial explore/relay behavior
//! * [`engine`]: the tick loop and its metrics
//! * [`cli`]: batch experiment commands

// `!(x > 0.0)` is how validation rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod cli;
pub mod engine;
pub mod gossip;
pub mod network;
pub mod world;

use sha2::{Digest, Sha256};

/// First 8 bytes of SHA-256, big-endian. Stable across platforms and releases.
pub fn digest64(bytes: &[u8]) -> u64 {
    let hash = Sha256::digest(bytes);
    u64::from_be_bytes(hash[..8].try_into().expect("sha256 output has 32 bytes"))
}
