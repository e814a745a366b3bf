//! Counter-based random streams.
//!
//! Every random quantity attached to summand index `i` is drawn from a stream
//! keyed by `(seed, tag, i)`. The value at index `i` therefore never depends on
//! how many indices were generated before it, which worker produced it, or in
//! what order chunks were evaluated.

use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::SQRT_2;

/// Identifies an independent family of draws within one experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    /// Draws that generate the observed summands.
    Data = 0x5EED_DA7A,
    /// Uniforms `U*_i` shared between the parameter and envelope draws in the
    /// quantile coupling.
    Coupling = 0xC0_0B1E,
    /// Fresh draws for surrogate (envelope) series.
    Surrogate = 0x5A55_0B7E,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-index generator: a SplitMix64 sequence whose starting state is a hash
/// of `(seed, tag, index)`.
#[derive(Debug, Clone)]
pub struct IndexRng {
    state: u64,
}

impl IndexRng {
    pub fn new(seed: u64, tag: StreamTag, index: u64) -> Self {
        let k = mix64(seed ^ GOLDEN);
        let k = mix64(k ^ (tag as u64).wrapping_mul(GOLDEN));
        let state = mix64(k ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03));
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform on the open interval (0, 1); never returns 0 so `ln` is finite.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Exponential with the given mean, as `-mean * ln(U)`.
    #[inline]
    pub fn exponential(&mut self, mean: f64) -> f64 {
        -mean * self.uniform().ln()
    }

    /// Standard normal by inversion of one uniform.
    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        normal_quantile(self.uniform())
    }

    /// Equiprobable sign.
    #[inline]
    pub fn sign(&mut self) -> f64 {
        if self.next_u64() >> 63 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail `P(Z > x)`.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile.
#[inline]
pub fn normal_quantile(u: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * u)
}
