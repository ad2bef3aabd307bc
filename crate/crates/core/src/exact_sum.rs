//! Order-independent floating point summation.
//!
//! [`ExactSum`] accumulates `f64` values into a wide fixed-point register
//! without rounding, so the final result depends only on the multiset of
//! inputs. Energies built on it are bit-identical under any permutation of
//! the particles and under any split of the work across threads.

const LIMB_BITS: u32 = 32;
const LIMB_MASK: i64 = (1 << LIMB_BITS) - 1;
// Bit 0 of limb 0 carries weight 2^-1074 (smallest subnormal).
const MIN_EXP: i32 = -1074;
const LIMBS: usize = 72;
// Each add touches a limb with magnitude < 2^32; renormalize well before i64 overflow.
const ADDS_BEFORE_CARRY: u32 = 1 << 29;

#[derive(Clone, Debug)]
pub struct ExactSum {
    limbs: [i64; LIMBS],
    pending: u32,
    pos_inf: bool,
    neg_inf: bool,
    nan: bool,
}

impl Default for ExactSum {
    fn default() -> Self {
        Self::new()
    }
}

impl ExactSum {
    pub fn new() -> Self {
        Self {
            limbs: [0; LIMBS],
            pending: 0,
            pos_inf: false,
            neg_inf: false,
            nan: false,
        }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        if !x.is_finite() {
            if x.is_nan() {
                self.nan = true;
            } else if x > 0.0 {
                self.pos_inf = true;
            } else {
                self.neg_inf = true;
            }
            return;
        }
        if x == 0.0 {
            return;
        }
        let bits = x.to_bits();
        let negative = (bits >> 63) != 0;
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        let (mantissa, exp) = if biased == 0 {
            (frac, MIN_EXP)
        } else {
            (frac | (1u64 << 52), biased - 1075)
        };
        let pos = (exp - MIN_EXP) as u32;
        let limb = (pos / LIMB_BITS) as usize;
        let shifted = (mantissa as u128) << (pos % LIMB_BITS);
        let chunks = [
            (shifted & LIMB_MASK as u128) as i64,
            ((shifted >> 32) & LIMB_MASK as u128) as i64,
            ((shifted >> 64) & LIMB_MASK as u128) as i64,
        ];
        for (k, c) in chunks.iter().enumerate() {
            if negative {
                self.limbs[limb + k] -= c;
            } else {
                self.limbs[limb + k] += c;
            }
        }
        self.pending += 1;
        if self.pending >= ADDS_BEFORE_CARRY {
            self.carry();
        }
    }

    /// Merges another accumulator into this one.
    pub fn merge(&mut self, other: &ExactSum) {
        let mut other = other.clone();
        other.carry();
        self.carry();
        for (a, b) in self.limbs.iter_mut().zip(other.limbs.iter()) {
            *a += *b;
        }
        self.pending = 1;
        self.pos_inf |= other.pos_inf;
        self.neg_inf |= other.neg_inf;
        self.nan |= other.nan;
    }

    fn carry(&mut self) {
        for i in 0..LIMBS - 1 {
            let c = self.limbs[i] >> LIMB_BITS;
            self.limbs[i] -= c << LIMB_BITS;
            self.limbs[i + 1] += c;
        }
        self.pending = 0;
    }

    /// The correctly rounded value of the exact sum.
    pub fn value(&self) -> f64 {
        if self.nan || (self.pos_inf && self.neg_inf) {
            return f64::NAN;
        }
        if self.pos_inf {
            return f64::INFINITY;
        }
        if self.neg_inf {
            return f64::NEG_INFINITY;
        }
        let mut acc = self.clone();
        acc.carry();
        let negative = acc.limbs[LIMBS - 1] < 0;
        if negative {
            for l in acc.limbs.iter_mut() {
                *l = -*l;
            }
            acc.carry();
        }
        let Some(top) = acc.limbs.iter().rposition(|&l| l != 0) else {
            return 0.0;
        };
        let lo = top.saturating_sub(2);
        let mut mant: u128 = 0;
        for i in (lo..=top).rev() {
            mant = (mant << LIMB_BITS) | acc.limbs[i] as u128;
        }
        // Sticky bit so the u128 -> f64 conversion rounds as if it saw every limb.
        if acc.limbs[..lo].iter().any(|&l| l != 0) {
            mant |= 1;
        }
        let scale = MIN_EXP + (lo as i32) * LIMB_BITS as i32;
        let magnitude = scale_pow2(mant as f64, scale);
        if negative {
            -magnitude
        } else {
            magnitude
        }
    }
}

impl Extend<f64> for ExactSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        s.extend(iter);
        s
    }
}

/// Exactly summed value of an iterator.
pub fn exact_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<ExactSum>().value()
}

fn scale_pow2(x: f64, mut k: i32) -> f64 {
    let mut y = x;
    while k > 1000 {
        y *= f64::from_bits(((1000 + 1023) as u64) << 52);
        k -= 1000;
    }
    while k < -1000 {
        y *= f64::from_bits(((-1000 + 1023) as u64) << 52);
        k += 1000;
    }
    y * f64::from_bits(((k + 1023) as u64) << 52)
}
