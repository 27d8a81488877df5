//! Deterministic PRNG primitives used everywhere randomness is needed.
//!
//! The reproducibility contract of this crate is defined in terms of two
//! published algorithms: SplitMix64 derives seed material (and independent
//! per-worker streams, e.g. one per forest tree), xoshiro256** generates the
//! actual draws. Both are implemented here verbatim so that results are
//! bit-stable across platforms and independent of any external crate's
//! versioning.

/// SplitMix64 (Steele, Lea, Flood 2014). Used only for seeding/stream
/// derivation, never for bulk draws.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// xoshiro256** (Blackman, Vigna 2018).
#[derive(Debug, Clone)]
pub struct Xoshiro256 {
    s: [u64; 4],
}

impl Xoshiro256 {
    /// Seeds the four state words from a SplitMix64 run over `seed`, per the
    /// xoshiro authors' recommendation.
    pub fn seed_from(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self::from_state([sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()])
    }

    /// Stream `index` under master `seed`: stream i consumes SplitMix64
    /// outputs 4i..4i+4 as its initial state, so streams never overlap and
    /// parallel consumers reproduce the sequential result exactly.
    pub fn stream(seed: u64, index: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        for _ in 0..4 * index {
            sm.next_u64();
        }
        Self::from_state([sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()])
    }

    fn from_state(mut s: [u64; 4]) -> Self {
        // The all-zero state is a fixed point; nudge it (cannot occur from
        // SplitMix64 seeding in practice, but keep the type total).
        if s == [0; 4] {
            s = [0x9E37_79B9_7F4A_7C15, 1, 2, 3];
        }
        Self { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform integer in `[0, n)`, unbiased via rejection sampling.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below(0)");
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Uniform f64 in `[0, 1)` with 53 random mantissa bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw (Box–Muller, one value per call; the paired
    /// value is discarded to keep the consumption pattern simple).
    pub fn next_gaussian(&mut self) -> f64 {
        loop {
            let u = self.next_f64();
            if u > 0.0 {
                let v = self.next_f64();
                return (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
            }
        }
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Draws `k` distinct indices from `0..n` (partial Fisher–Yates); order
    /// is random.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_is_deterministic_and_nonconstant() {
        let mut a = SplitMix64::new(12345);
        let mut b = SplitMix64::new(12345);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
        assert!(xs.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn streams_are_disjoint_prefixes_of_the_seed_sequence() {
        let mut sm = SplitMix64::new(99);
        let words: Vec<u64> = (0..12).map(|_| sm.next_u64()).collect();
        let s2 = Xoshiro256::stream(99, 2);
        let direct = Xoshiro256::from_state([words[8], words[9], words[10], words[11]]);
        let mut a = s2.clone();
        let mut b = direct.clone();
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn next_below_is_in_range_and_hits_all_residues() {
        let mut rng = Xoshiro256::seed_from(7);
        let mut seen = [false; 5];
        for _ in 0..500 {
            let v = rng.next_below(5) as usize;
            assert!(v < 5);
            seen[v] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn next_f64_in_unit_interval_with_sane_mean() {
        let mut rng = Xoshiro256::seed_from(11);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = rng.next_f64();
            assert!((0.0..1.0).contains(&v));
            sum += v;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn shuffle_is_a_permutation_and_seed_stable() {
        let mut rng = Xoshiro256::seed_from(3);
        let mut v: Vec<u32> = (0..20).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());

        let mut rng2 = Xoshiro256::seed_from(3);
        let mut v2: Vec<u32> = (0..20).collect();
        rng2.shuffle(&mut v2);
        assert_eq!(v, v2);
    }

    #[test]
    fn sample_indices_distinct() {
        let mut rng = Xoshiro256::seed_from(5);
        for _ in 0..50 {
            let idx = rng.sample_indices(10, 3);
            assert_eq!(idx.len(), 3);
            let mut s = idx.clone();
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 3);
            assert!(idx.iter().all(|&i| i < 10));
        }
    }

    #[test]
    fn gaussian_moments_roughly_standard() {
        let mut rng = Xoshiro256::seed_from(17);
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
