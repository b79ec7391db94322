//! Counter-based streams: every task draws from its own ChaCha stream keyed by
//! `(master seed, domain, index)`, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const DOMAIN_CIRCUIT: u64 = 1;
pub const DOMAIN_SSEP: u64 = 2;
pub const DOMAIN_BOOTSTRAP: u64 = 3;
pub const DOMAIN_GATE_TEST: u64 = 4;
pub const DOMAIN_MAGNON: u64 = 5;

pub fn stream(master: u64, domain: u64, index: u64) -> StreamRng {
    let key = master ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
