use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A reproducible random stream identified by a 64-bit seed and a stream name.
///
/// The value is only a descriptor: [`SeededRng::rng`] always starts the
/// stream from its beginning, so two calls with the same `(seed, stream)`
/// produce identical sequences on every platform. Named sub-streams let each
/// weight family be regenerated independently of the others.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeededRng {
    seed: u64,
    stream: String,
}

impl SeededRng {
    pub fn new(seed: u64, stream: impl Into<String>) -> Self {
        Self { seed, stream: stream.into() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> &str {
        &self.stream
    }

    /// Child stream `"<parent>/<name>"` under the same seed.
    pub fn substream(&self, name: &str) -> Self {
        let stream = if self.stream.is_empty() { name.to_owned() } else { format!("{}/{}", self.stream, name) };
        Self { seed: self.seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id(&self.stream));
        rng
    }
}

// FNV-1a; stable across platforms and releases, unlike std's hasher.
fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}
