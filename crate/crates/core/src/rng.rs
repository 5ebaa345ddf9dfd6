//! Deterministic random substreams.
//!
//! Every random draw in a run comes from a ChaCha stream keyed by the root
//! seed and a small coordinate tuple, so results never depend on scheduling
//! or worker count, and two protocol variants can share the draws they have
//! in common.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Purpose tags that separate independent draws for the same coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Tag {
    Position = 1,
    PilotChoice = 2,
    Channel = 3,
    UplinkNoise = 4,
    Admission = 5,
    Backoff = 6,
    Table = 7,
    Replication = 8,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for the substream at `(tag, a, b)` under `root`.
pub fn derive_seed(root: u64, tag: Tag, a: u64, b: u64) -> u64 {
    let mut h = splitmix(root ^ 0x5851_F42D_4C95_7F2D);
    h = splitmix(h ^ tag as u64);
    h = splitmix(h ^ a);
    splitmix(h ^ b.rotate_left(32))
}

pub fn substream(root: u64, tag: Tag, a: u64, b: u64) -> Stream {
    Stream::seed_from_u64(derive_seed(root, tag, a, b))
}
