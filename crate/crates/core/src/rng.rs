use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent, seed-determined random streams.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub(crate) enum Stream {
    Init = 1,
    Shuffle = 2,
    Noise = 3,
    Contaminate = 4,
    Synthetic = 5,
    Split = 6,
    Probe = 7,
    Mixture = 8,
}

pub(crate) fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
