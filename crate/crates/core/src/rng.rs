//! Counter-based substreams for reproducible parallel Monte Carlo.
//!
//! Every consumer derives an independent stream from (master seed, domain,
//! index). Streams never depend on worker scheduling, so estimates are
//! bit-identical across worker counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains keep substreams of different subsystems disjoint even when
/// they share a master seed and an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    PathSampling,
    PairSampling,
    QuadratureNode,
    Conditioning,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::PathSampling => 0x706174,
            StreamDomain::PairSampling => 0x706169,
            StreamDomain::QuadratureNode => 0x717561,
            StreamDomain::Conditioning => 0x636f6e,
        }
    }
}

/// splitmix64 finalizer; decorrelates nearby master seeds and domain tags.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The RNG for substream `index` of `domain` under `master`.
pub fn substream(master: u64, domain: StreamDomain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(master ^ mix(domain.tag())));
    rng.set_stream(index);
    rng
}
