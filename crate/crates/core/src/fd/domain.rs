//! Integer domains: a bounding interval, plus an exact member bitset when the
//! initial span is small enough.

const BITS: i64 = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    lo: i64,
    hi: i64,
    base: i64,
    bits: Option<u128>,
}

impl Domain {
    /// `[lo, hi]`; empty when `hi < lo`.
    pub fn interval(lo: i64, hi: i64) -> Domain {
        let bits = if hi >= lo && (hi as i128 - lo as i128) < BITS as i128 {
            let n = (hi - lo + 1) as u32;
            Some(if n == 128 {
                u128::MAX
            } else {
                (1u128 << n) - 1
            })
        } else {
            None
        };
        Domain {
            lo,
            hi,
            base: lo,
            bits,
        }
    }

    pub fn singleton(v: i64) -> Domain {
        Domain::interval(v, v)
    }

    pub fn from_values(values: &[i64]) -> Domain {
        let (Some(&lo), Some(&hi)) = (values.iter().min(), values.iter().max()) else {
            return Domain::interval(1, 0);
        };
        let mut d = Domain::interval(lo, hi);
        d.retain(|v| values.contains(&v));
        d
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn min(&self) -> i64 {
        self.lo
    }

    pub fn max(&self) -> i64 {
        self.hi
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }

    pub fn has_bitset(&self) -> bool {
        self.bits.is_some()
    }

    pub fn value(&self) -> Option<i64> {
        self.is_singleton().then_some(self.lo)
    }

    pub fn size(&self) -> u64 {
        if self.is_empty() {
            return 0;
        }
        match self.bits {
            Some(b) => b.count_ones() as u64,
            None => (self.hi as i128 - self.lo as i128 + 1).min(u64::MAX as i128) as u64,
        }
    }

    pub fn contains(&self, v: i64) -> bool {
        if v < self.lo || v > self.hi {
            return false;
        }
        match self.bits {
            Some(b) => b >> (v - self.base) & 1 == 1,
            None => true,
        }
    }

    /// Whether some member lies in `[lo, hi]`.
    pub fn meets(&self, lo: i64, hi: i64) -> bool {
        let (lo, hi) = (lo.max(self.lo), hi.min(self.hi));
        if lo > hi {
            return false;
        }
        match self.bits {
            None => true,
            Some(_) => (lo..=hi).any(|v| self.contains(v)),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = i64> + '_ {
        let (lo, hi) = if self.is_empty() {
            (1, 0)
        } else {
            (self.lo, self.hi)
        };
        (lo..=hi).filter(move |&v| self.contains(v))
    }

    fn tighten(&mut self) {
        if let Some(b) = self.bits {
            if b == 0 {
                self.lo = 1;
                self.hi = 0;
            } else {
                self.lo = self.base + b.trailing_zeros() as i64;
                self.hi = self.base + (127 - b.leading_zeros()) as i64;
            }
        }
    }

    /// Intersect with `[lo, hi]`; returns whether anything changed.
    pub fn restrict(&mut self, lo: i64, hi: i64) -> bool {
        if lo <= self.lo && hi >= self.hi {
            return false;
        }
        match self.bits.as_mut() {
            Some(b) => {
                for v in self.lo..=self.hi {
                    if v < lo || v > hi {
                        *b &= !(1u128 << (v - self.base));
                    }
                }
                self.tighten();
            }
            None => {
                self.lo = self.lo.max(lo);
                self.hi = self.hi.min(hi);
            }
        }
        true
    }

    pub fn assign(&mut self, v: i64) -> bool {
        let changed = !(self.is_singleton() && self.lo == v);
        if self.contains(v) {
            self.restrict(v, v);
        } else {
            self.lo = 1;
            self.hi = 0;
            if let Some(b) = self.bits.as_mut() {
                *b = 0;
            }
        }
        changed
    }

    /// Keep only members satisfying `keep`. Interval-only domains can just
    /// shrink their bounds.
    pub fn retain(&mut self, keep: impl Fn(i64) -> bool) -> bool {
        if self.is_empty() {
            return false;
        }
        match self.bits.as_mut() {
            Some(b) => {
                let before = *b;
                for v in self.lo..=self.hi {
                    if *b >> (v - self.base) & 1 == 1 && !keep(v) {
                        *b &= !(1u128 << (v - self.base));
                    }
                }
                let changed = *b != before;
                self.tighten();
                changed
            }
            None => {
                let (lo0, hi0) = (self.lo, self.hi);
                while self.lo <= self.hi && !keep(self.lo) {
                    self.lo += 1;
                }
                while self.hi >= self.lo && !keep(self.hi) {
                    self.hi -= 1;
                }
                (self.lo, self.hi) != (lo0, hi0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bitset_operations() {
        let mut d = Domain::interval(0, 9);
        assert_eq!(d.size(), 10);
        assert!(d.retain(|v| v % 3 == 0));
        assert_eq!(d.values().collect::<Vec<_>>(), vec![0, 3, 6, 9]);
        assert!(d.restrict(1, 8));
        assert_eq!((d.min(), d.max()), (3, 6));
        assert!(!d.contains(4));
        assert!(d.meets(4, 6));
        assert!(!d.meets(4, 5));
        d.assign(5);
        assert!(d.is_empty());
    }

    #[test]
    fn wide_domains_are_intervals() {
        let mut d = Domain::interval(0, 59_049);
        assert!(!d.has_bitset());
        d.restrict(10, 20);
        assert_eq!(d.size(), 11);
        d.retain(|v| v != 10 && v != 20);
        assert_eq!((d.min(), d.max()), (11, 19));
    }

    #[test]
    fn full_width_bitset() {
        let d = Domain::interval(0, 127);
        assert_eq!(d.size(), 128);
        assert!(d.has_bitset());
        assert_eq!(d.max(), 127);
    }
}
