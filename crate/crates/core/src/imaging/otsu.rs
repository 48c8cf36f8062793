use std::cmp::Ordering;

use super::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OtsuThreshold {
    /// Gray levels strictly above this are foreground.
    pub threshold: u8,
    /// Set when the image has a single gray level; `threshold` is that level.
    pub degenerate: bool,
}

/// Between-class variance of a split, up to the constant factor 1/N²:
/// `(S0·N − S·n0)² / (n0·n1)`, kept as an exact numerator/denominator pair.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

/// 256-bit product of a u128 and a u64, as (high, low) halves.
fn wide_mul(a: u128, b: u64) -> (u128, u128) {
    let b = b as u128;
    let lo = (a & u64::MAX as u128) * b;
    let hi = (a >> 64) * b;
    let (low, carry) = lo.overflowing_add(hi << 64);
    ((hi >> 64) + carry as u128, low)
}

impl Score {
    /// Exact comparison of num1/den1 against num2/den2 by cross-multiplying.
    fn cmp(&self, other: &Score) -> Ordering {
        // den = n0·n1 < 2^64 for any image that fits in memory
        let lhs = wide_mul(self.num, other.den as u64);
        let rhs = wide_mul(other.num, self.den as u64);
        lhs.cmp(&rhs)
    }
}

/// Otsu's threshold over the 256-bin histogram: the level maximizing the
/// between-class variance, with pixels `<= threshold` as background. The
/// lowest maximizing level wins a tie. Variances are compared exactly.
pub fn otsu_threshold(img: &GrayImage) -> OtsuThreshold {
    let hist = img.histogram();
    let total: u64 = hist.iter().sum();
    let sum: u64 = hist.iter().enumerate().map(|(i, &c)| i as u64 * c).sum();

    let occupied: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    if occupied.len() <= 1 {
        return OtsuThreshold {
            threshold: occupied.first().copied().unwrap_or(0) as u8,
            degenerate: true,
        };
    }

    let mut best: Option<(u8, Score)> = None;
    let (mut n0, mut s0) = (0u64, 0u64);
    for (level, &count) in hist.iter().enumerate().take(255) {
        n0 += count;
        s0 += level as u64 * count;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (s0 as i128 * total as i128 - sum as i128 * n0 as i128).unsigned_abs();
        let score = Score {
            // diff <= 255·N², so this holds for images below 2^28 pixels
            num: diff.checked_mul(diff).expect("image too large for exact Otsu"),
            den: n0 as u128 * n1 as u128,
        };
        if best.is_none_or(|(_, b)| score.cmp(&b) == Ordering::Greater) {
            best = Some((level as u8, score));
        }
    }
    OtsuThreshold {
        threshold: best.map(|(t, _)| t).expect("two occupied levels give one valid split"),
        degenerate: false,
    }
}
