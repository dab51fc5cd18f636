//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream selected
//! by `(master_seed, StreamId)`. The stream id is packed injectively into the
//! 64-bit ChaCha nonce, so two ids never share a keystream and a stream's
//! content does not depend on which thread consumes it or when.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamKind {
    Weights = 1,
    Noise = 2,
    Initial = 3,
    Perturbation = 4,
    Auxiliary = 5,
}

const POPULATION_BITS: u32 = 16;
const INDEX_BITS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub kind: StreamKind,
    pub population: u16,
    /// Entity index (neuron, weight row, …); must fit in 40 bits.
    pub index: u64,
}

impl StreamId {
    pub fn new(kind: StreamKind, population: u16, index: u64) -> Self {
        assert!(index < (1u64 << INDEX_BITS), "stream index {index} exceeds 40 bits");
        StreamId {
            kind,
            population,
            index,
        }
    }

    fn nonce(&self) -> u64 {
        ((self.kind as u64) << (POPULATION_BITS + INDEX_BITS))
            | ((self.population as u64) << INDEX_BITS)
            | self.index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeededStream {
    pub master_seed: u64,
    pub id: StreamId,
}

impl SeededStream {
    pub fn new(master_seed: u64, id: StreamId) -> Self {
        SeededStream { master_seed, id }
    }

    pub fn of(master_seed: u64, kind: StreamKind, population: u16, index: u64) -> Self {
        SeededStream::new(master_seed, StreamId::new(kind, population, index))
    }

    /// Same seed and kind, different entity.
    pub fn with_entity(&self, population: u16, index: u64) -> Self {
        SeededStream::new(self.master_seed, StreamId::new(self.id.kind, population, index))
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.id.nonce());
        rng
    }

    pub fn gaussians(&self, n: usize) -> Vec<f64> {
        seeded_gaussian(self, n)
    }
}

/// `n` standard normal deviates from `stream`.
pub fn seeded_gaussian(stream: &SeededStream, n: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_deterministic() {
        let s = SeededStream::of(7, StreamKind::Auxiliary, 0, 3);
        assert!(seeded_gaussian(&s, 0).is_empty());
        assert_eq!(seeded_gaussian(&s, 1000), seeded_gaussian(&s, 1000));
        // A prefix of a longer draw is the shorter draw.
        assert_eq!(seeded_gaussian(&s, 10)[..], seeded_gaussian(&s, 20)[..10]);
    }

    #[test]
    fn moments_of_a_million() {
        let n = 1_000_000;
        let x = seeded_gaussian(&SeededStream::of(42, StreamKind::Auxiliary, 0, 0), n);
        let mean = x.iter().sum::<f64>() / n as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-2, "var {var}");
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let n = 100_000;
        let ids = [
            StreamId::new(StreamKind::Weights, 0, 0),
            StreamId::new(StreamKind::Weights, 0, 1),
            StreamId::new(StreamKind::Weights, 1, 0),
            StreamId::new(StreamKind::Noise, 0, 0),
            StreamId::new(StreamKind::Initial, 0, 0),
        ];
        let draws: Vec<Vec<f64>> = ids
            .iter()
            .map(|id| seeded_gaussian(&SeededStream::new(11, *id), n))
            .collect();
        let bound = 4.0 / (n as f64).sqrt();
        for a in 0..draws.len() {
            for b in (a + 1)..draws.len() {
                let rho = correlation(&draws[a], &draws[b]);
                assert!(rho.abs() < bound, "{:?} vs {:?}: {rho}", ids[a], ids[b]);
            }
        }
    }

    #[test]
    fn nonce_is_injective_on_fields() {
        let a = StreamId::new(StreamKind::Noise, 1, 0).nonce();
        let b = StreamId::new(StreamKind::Noise, 0, 1 << 39).nonce();
        let c = StreamId::new(StreamKind::Initial, 1, 0).nonce();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    fn correlation(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx).powi(2);
            syy += (b - my).powi(2);
        }
        sxy / (sxx * syy).sqrt()
    }
}
