//! Named random substreams derived from one master seed.
//!
//! Each substream is a ChaCha20 generator keyed by the master seed (expanded
//! with `seed_from_u64`) and selected by the cipher's 64-bit stream id, so
//! streams never overlap and do not depend on how many draws another
//! stream has made.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub const NOISE_STREAM: u64 = 1;
pub const DITHER_STREAM: u64 = 2;

pub fn substream(master: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}
