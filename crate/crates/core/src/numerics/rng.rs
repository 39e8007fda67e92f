use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

/// Independent, reproducible random stream.
///
/// A ChaCha8 keystream keyed by `seed` with the stream id in the nonce, so
/// `(seed, stream_id)` fixes the output regardless of which thread draws it.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

/// Opens stream `stream_id` of the generator keyed by `seed`.
pub fn rng_stream(seed: u64, stream_id: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    RngStream(rng)
}

impl RngStream {
    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal variate (ziggurat).
    pub fn normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Unit-rate exponential variate (ziggurat).
    pub fn exponential(&mut self) -> f64 {
        self.0.sample(Exp1)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }

    pub fn bit(&mut self) -> bool {
        self.0.random::<bool>()
    }

    /// 64 uniformly random bits.
    pub fn bits64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
