use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent streams so that different consumers of one seed never share draws.
#[derive(Clone, Copy)]
pub(crate) enum Stream {
    Generate = 1,
    Sphere = 2,
    Gaussian = 3,
    Restarts = 4,
    Limit = 5,
    Resample = 6,
    Bootstrap = 7,
}

pub(crate) fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}

/// Seed of replicate `index`, derived as `seed ^ index`.
pub(crate) fn replicate_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64)
}
