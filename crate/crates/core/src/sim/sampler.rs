//! Draws timing values from substrate parameters. Every duration is
//! uniformly distributed in `[mean - dev, mean + dev]` milliseconds;
//! the engine works internally in integer nanoseconds.

use rand_chacha::ChaCha12Rng;

use rand::Rng;

use crate::speclang::TimingParams;

pub const NS_PER_MS: f64 = 1_000_000.0;

/// Durations never collapse to nothing: a floor of one microsecond keeps
/// cause and effect separated on the calendar even for degenerate
/// parameters.
pub const MIN_DURATION_NS: u64 = 1_000;

/// One uniform draw in `[mean - dev, mean + dev]` milliseconds.
pub fn sample_ms(rng: &mut ChaCha12Rng, p: TimingParams) -> f64 {
    if p.dev_ms == 0.0 {
        return p.mean_ms;
    }
    let lo = p.mean_ms - p.dev_ms;
    rng.random::<f64>().mul_add(2.0 * p.dev_ms, lo)
}

fn ms_to_ns(ms: f64) -> u64 {
    (ms * NS_PER_MS).round().max(0.0) as u64
}

/// Samples a state-transition duration: the drawn milliseconds (for
/// observation bookkeeping) plus the calendar value in nanoseconds.
pub fn duration(rng: &mut ChaCha12Rng, p: TimingParams) -> (f64, u64) {
    let ms = sample_ms(rng, p);
    (ms, ms_to_ns(ms).max(MIN_DURATION_NS))
}

/// Samples a message transfer latency; unlike a transition this may be
/// exactly zero.
pub fn latency(rng: &mut ChaCha12Rng, p: TimingParams) -> u64 {
    ms_to_ns(sample_ms(rng, p))
}

/// Streaming aggregate of duration draws for one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obs {
    pub n: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Obs {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.mean += (x - self.mean) / self.n as f64;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(&mut self, other: &Obs) {
        if other.n == 0 {
            return;
        }
        let total = self.n + other.n;
        self.mean = self.mean.mul_add(self.n as f64 / total as f64, other.mean * (other.n as f64 / total as f64));
        self.n = total;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }
}

impl Default for Obs {
    fn default() -> Self {
        Obs { n: 0, mean: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }
}
