//! Fixtures shared by the benchmarks.

use piggyback_core::{CodeParams, Grouping, PiggybackCode, Stripe, Strategy};
use rand::{rngs::StdRng, RngCore, SeedableRng};

pub fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut buf = vec![0u8; len];
    StdRng::seed_from_u64(seed).fill_bytes(&mut buf);
    buf
}

/// A code with the default grouping for `(k, r)` and one encoded stripe.
pub fn encoded(k: usize, r: usize, strategy: Strategy, block_size: usize) -> (PiggybackCode, Vec<u8>, Stripe) {
    let params = CodeParams::new(k, r).expect("valid parameters");
    let grouping = piggyback_core::planner::default_grouping(k, r).unwrap_or_else(|| Grouping::equal(k, 1).unwrap());
    let code = PiggybackCode::new(params, &grouping, strategy, block_size).expect("valid code");
    let message = random_bytes(code.stripe_data_len(), 7);
    let stripe = code.encode_stripe(&message).expect("encodes");
    (code, message, stripe)
}
