//! Counter-based deterministic random streams.
//!
//! Every consumer derives an independent stream from (seed, try index, tree
//! index), so rounding tries can run in any order, or in parallel, and still
//! reproduce the sequential results bit for bit.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct StreamRng {
    state: u64,
}

impl StreamRng {
    /// Stream keyed by (seed, try, tree).
    pub fn for_try(seed: u64, try_index: u64, tree_index: u64) -> StreamRng {
        let key = mix(seed ^ GOLDEN.wrapping_mul(try_index.wrapping_add(1)))
            ^ mix(tree_index.wrapping_add(0x5851_f42d_4c95_7f2d));
        StreamRng { state: mix(key) }
    }

    pub fn new(seed: u64) -> StreamRng {
        StreamRng::for_try(seed, 0, 0)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
