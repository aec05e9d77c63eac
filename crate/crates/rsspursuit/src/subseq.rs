//! Signal-independent sequences of subdictionary time shifts.
//!
//! A decomposition that changes its subdictionary at every iteration needs
//! both encoder and decoder to regenerate the exact same sequence of
//! per-scale shifts from a compact description. The shift at iteration `i`
//! for scale `k` is a pure function of `(spec, i, k)`; nothing depends on
//! call order, so shifts can be queried concurrently or re-derived at
//! decode time.

use crate::dictionary::{DictConfig, SubdictSpec};
use crate::rng::Xoshiro256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    /// All shifts zero: the fixed coarse subdictionary.
    Fixed,
    /// Per-(block, scale) uniform draws over [-s/4, s/4).
    Random,
    /// Shift increases by 1 each block (wrapping over s/2 values).
    Step,
    /// Shift increases by s/4 - 1 each block.
    Jump,
}

impl SequenceKind {
    pub fn code(self) -> u8 {
        match self {
            SequenceKind::Fixed => 0,
            SequenceKind::Random => 1,
            SequenceKind::Step => 2,
            SequenceKind::Jump => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SequenceKind::Fixed),
            1 => Some(SequenceKind::Random),
            2 => Some(SequenceKind::Step),
            3 => Some(SequenceKind::Jump),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    pub seed: u64,
    /// Refresh period: iterations sharing one subdictionary. Must be >= 1.
    pub refresh_period: u32,
    /// Frame-grid subsampling factor. Must be >= 1.
    pub subsample: u32,
}

impl SequenceSpec {
    pub fn new(kind: SequenceKind, seed: u64) -> Self {
        SequenceSpec {
            kind,
            seed,
            refresh_period: 1,
            subsample: 1,
        }
    }

    pub fn with_refresh(mut self, j: u32) -> Self {
        assert!(j >= 1);
        self.refresh_period = j;
        self
    }

    pub fn with_subsample(mut self, d: u32) -> Self {
        assert!(d >= 1);
        self.subsample = d;
        self
    }

    pub fn fixed() -> Self {
        SequenceSpec::new(SequenceKind::Fixed, 0)
    }
}

/// Maps a raw value in [0, s/2) into [-s/4, s/4), keeping 0 at 0:
/// values below s/4 are unchanged, the rest wrap to the negative half.
#[inline]
fn remap(raw: i64, half: i64) -> i64 {
    debug_assert!((0..half).contains(&raw));
    // Round the split point up so that e.g. half = 1 keeps 0 at 0 instead
    // of wrapping it below -half/2.
    if raw < (half + 1) / 2 {
        raw
    } else {
        raw - half
    }
}

/// The shift tau of scale `k` at iteration `i`. Stateless.
pub fn shift_at(spec: &SequenceSpec, iteration: usize, scale_index: usize, scale: usize) -> i64 {
    let half = (scale / 2) as i64; // number of distinct shift values
    if half == 0 {
        return 0;
    }
    let block = (iteration / spec.refresh_period as usize) as i64;
    match spec.kind {
        SequenceKind::Fixed => 0,
        SequenceKind::Step => remap(block.rem_euclid(half), half),
        SequenceKind::Jump => {
            let stride = (half / 2 - 1).rem_euclid(half);
            remap((block * stride).rem_euclid(half), half)
        }
        SequenceKind::Random => {
            let mut rng =
                Xoshiro256::substream(spec.seed, block as u64, scale_index as u64, 0x5317F7);
            remap(rng.next_below(half as u64) as i64, half)
        }
    }
}

/// Which decimation coset of the frame grid scale `k` keeps at iteration
/// `i`, in [0, d). With d > 1 the kept frames alone cover only 1/d of the
/// time axis per iteration; rotating the coset along the sequence makes
/// the union of subdictionaries cover the whole grid. Stateless, constant
/// within each refresh block, and always 0 for FIXED (the coarse grid) and
/// for d = 1.
pub fn frame_offset_at(spec: &SequenceSpec, iteration: usize, scale_index: usize) -> u32 {
    let d = spec.subsample;
    if d == 1 || spec.kind == SequenceKind::Fixed {
        return 0;
    }
    let block = (iteration / spec.refresh_period as usize) as u64;
    match spec.kind {
        SequenceKind::Fixed => 0,
        SequenceKind::Step | SequenceKind::Jump => (block % d as u64) as u32,
        SequenceKind::Random => {
            let mut rng = Xoshiro256::substream(spec.seed, block, scale_index as u64, 0x0FF5E7);
            rng.next_below(d as u64) as u32
        }
    }
}

/// The full subdictionary description for iteration `i`: per-scale shifts
/// and frame cosets plus the spec's subsampling factor. Constant within
/// each refresh block.
pub fn subdict_at(spec: &SequenceSpec, config: &DictConfig, iteration: usize) -> SubdictSpec {
    let shifts = config
        .scales()
        .iter()
        .enumerate()
        .map(|(k, &s)| shift_at(spec, iteration, k, s))
        .collect();
    let offsets = (0..config.scales().len())
        .map(|k| frame_offset_at(spec, iteration, k))
        .collect();
    SubdictSpec::with_frame_offsets(config.clone(), shifts, spec.subsample, offsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{DictFamily, WindowKind};

    fn spec(kind: SequenceKind) -> SequenceSpec {
        SequenceSpec::new(kind, 42)
    }

    #[test]
    fn fixed_is_all_zero() {
        for i in 0..100 {
            for (k, s) in [(0, 32), (1, 128), (2, 512)] {
                assert_eq!(shift_at(&spec(SequenceKind::Fixed), i, k, s), 0);
            }
        }
    }

    #[test]
    fn step_first_values() {
        // tau^0 = 0, tau^1 = 1 regardless of scale.
        for s in [8, 32, 128] {
            assert_eq!(shift_at(&spec(SequenceKind::Step), 0, 0, s), 0);
            assert_eq!(shift_at(&spec(SequenceKind::Step), 1, 0, s), 1);
        }
    }

    #[test]
    fn step_wraps_into_negative_half() {
        // s = 8: raw sequence 0,1,2,3,0,... with half = 4, quarter = 2.
        let sq = spec(SequenceKind::Step);
        let taus: Vec<i64> = (0..8).map(|i| shift_at(&sq, i, 0, 8)).collect();
        assert_eq!(taus, vec![0, 1, -2, -1, 0, 1, -2, -1]);
    }

    #[test]
    fn jump_matches_recurrence() {
        // tau^i = mod(tau^{i-1} + s/4 - 1, s/2), tau^0 = 0, then remapped.
        for s in [16i64, 64, 128, 512] {
            let sq = spec(SequenceKind::Jump);
            let half = s / 2;
            let mut raw = 0i64;
            for i in 0..200 {
                let got = shift_at(&sq, i as usize, 0, s as usize);
                assert_eq!(got, remap(raw, half), "s={} i={}", s, i);
                raw = (raw + s / 4 - 1).rem_euclid(half);
            }
        }
    }

    #[test]
    fn jump_example_s128() {
        // mod(0 + 32 - 1, 64) = 31, which stays in the positive half.
        assert_eq!(shift_at(&spec(SequenceKind::Jump), 1, 0, 128), 31);
    }

    #[test]
    fn random_in_range_and_deterministic() {
        let sq = spec(SequenceKind::Random);
        for (k, s) in [(0usize, 32i64), (1, 128), (2, 512)] {
            for i in 0..10_000 {
                let tau = shift_at(&sq, i, k, s as usize);
                assert!(tau >= -s / 4 && tau < s / 4, "tau={} s={}", tau, s);
                assert_eq!(tau, shift_at(&sq, i, k, s as usize));
            }
        }
    }

    #[test]
    fn random_differs_across_seeds_and_scales() {
        let a = SequenceSpec::new(SequenceKind::Random, 1);
        let b = SequenceSpec::new(SequenceKind::Random, 2);
        let differs = (0..50).any(|i| shift_at(&a, i, 0, 512) != shift_at(&b, i, 0, 512));
        assert!(differs);
        let scales_differ = (0..50).any(|i| shift_at(&a, i, 0, 512) != shift_at(&a, i, 1, 512));
        assert!(scales_differ);
    }

    #[test]
    fn refresh_blocks_are_constant() {
        let sq = SequenceSpec::new(SequenceKind::Random, 9).with_refresh(5);
        for i in 0..100 {
            if i % 5 != 4 {
                assert_eq!(shift_at(&sq, i, 0, 128), shift_at(&sq, i + 1, 0, 128));
            }
        }
        // And with J=1 consecutive shifts differ at least once.
        let sq1 = SequenceSpec::new(SequenceKind::Random, 9);
        assert!((0..50).any(|i| shift_at(&sq1, i, 0, 512) != shift_at(&sq1, i + 1, 0, 512)));
    }

    #[test]
    fn coupon_collector_coverage() {
        // With J=1 random draws, after ~ (s/2) H(s/2) iterations every shift
        // value of a scale should usually have appeared.
        let s = 32usize;
        let half = s / 2;
        let h: f64 = (1..=half).map(|j| 1.0 / j as f64).sum();
        let budget = (half as f64 * h).ceil() as usize;
        let mut successes = 0;
        let trials = 200;
        for seed in 0..trials {
            let sq = SequenceSpec::new(SequenceKind::Random, seed);
            let mut seen = vec![false; half];
            for i in 0..budget {
                let tau = shift_at(&sq, i, 0, s);
                seen[(tau + (s as i64 / 4)) as usize] = true;
            }
            if seen.iter().all(|&b| b) {
                successes += 1;
            }
        }
        // Coupon collector: P(all seen) > 0.5 at n H(n) draws.
        assert!(
            successes as f64 / trials as f64 > 0.5,
            "coverage {}/{}",
            successes,
            trials
        );
    }

    #[test]
    fn subdict_at_collects_per_scale_shifts() {
        let config = DictConfig::new(
            vec![32, 128, 512],
            2048,
            WindowKind::Hann,
            DictFamily::Gabor,
        )
        .unwrap();
        let sq = SequenceSpec::new(SequenceKind::Random, 3).with_subsample(2);
        let sub = subdict_at(&sq, &config, 17);
        assert_eq!(sub.shifts().len(), 3);
        assert_eq!(sub.subsample(), 2);
        for (k, &s) in config.scales().iter().enumerate() {
            assert_eq!(sub.shifts()[k], shift_at(&sq, 17, k, s));
        }
    }
}
