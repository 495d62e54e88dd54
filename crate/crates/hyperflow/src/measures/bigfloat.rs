//! Rational intervals enclosing irrational values, and binary logarithms to a given precision.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::probcore::Rational;

pub const DEFAULT_PRECISION: u32 = 128;
pub const MIN_PRECISION: u32 = 64;

/// A value known to lie in [lo, hi].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BigFloat {
    pub lo: Rational,
    pub hi: Rational,
    pub precision: u32,
}

impl BigFloat {
    pub fn exact(r: Rational, precision: u32) -> BigFloat {
        BigFloat { lo: r.clone(), hi: r, precision }
    }

    pub fn mid(&self) -> Rational {
        (&self.lo + &self.hi) / Rational::from_integer(2.into())
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn to_f64(&self) -> f64 {
        self.mid().to_f64().unwrap_or(f64::NAN)
    }

    pub fn contains(&self, r: &Rational) -> bool {
        self.lo <= *r && *r <= self.hi
    }

    /// `None` when the intervals overlap.
    pub fn compare(&self, other: &BigFloat) -> Option<Ordering> {
        if self.hi < other.lo {
            Some(Ordering::Less)
        } else if self.lo > other.hi {
            Some(Ordering::Greater)
        } else if self.lo == self.hi && other.lo == other.hi {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// Midpoint in decimal, truncated to `digits` places.
    pub fn to_decimal(&self, digits: usize) -> String {
        decimal(&self.mid(), digits)
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = ((self.precision as f64) * std::f64::consts::LOG10_2).floor() as usize;
        f.write_str(&self.to_decimal(digits.clamp(1, 60)))
    }
}

pub fn decimal(r: &Rational, digits: usize) -> String {
    let neg = r.is_negative();
    let a = r.abs();
    let scale = num_traits::pow(BigInt::from(10), digits);
    let scaled = (a * Rational::from_integer(scale.clone())).round().to_integer();
    let (whole, frac) = scaled.div_rem(&scale);
    let mut s = format!("{}{}", if neg && !scaled.is_zero() { "-" } else { "" }, whole);
    if digits > 0 {
        s.push('.');
        s.push_str(&format!("{:0>width$}", frac, width = digits));
    }
    s
}

fn atanh_fixed(x: &BigInt, w: u32) -> BigInt {
    // Σ x^(2k+1)/(2k+1) with every product truncated to w fractional bits.
    let x2 = (x * x) >> w;
    let mut power = x.clone();
    let mut sum = BigInt::zero();
    let mut k = 1u64;
    while !power.is_zero() {
        sum += &power / BigInt::from(k);
        power = (&power * &x2) >> w;
        k += 2;
    }
    sum
}

/// Enclosure of lg n for n ≥ 1, with half-width 2^-(precision+32).
pub fn lg_interval(n: &BigInt, precision: u32) -> (Rational, Rational) {
    assert!(n.is_positive(), "lg of a non-positive number");
    if n.is_one() {
        return (Rational::zero(), Rational::zero());
    }
    let k = n.bits() - 1;
    let pow = BigInt::one() << k;
    if *n == pow {
        let r = Rational::from_integer(k.into());
        return (r.clone(), r);
    }
    let w = precision + 64;
    let x = ((n - &pow) << w) / (n + &pow);
    let third = (BigInt::one() << w) / BigInt::from(3);
    let num = atanh_fixed(&x, w);
    let den = atanh_fixed(&third, w);
    let frac = (num << w) / den;
    let approx = Rational::new((BigInt::from(k) << w) + frac, BigInt::one() << w);
    // Truncation error is a few hundred units in the last of w bits; 2^32 of them is ample.
    let err = Rational::new(BigInt::one(), BigInt::one() << (precision + 32));
    (&approx - &err, approx + err)
}

/// Σ c_n · lg n as an exact symbolic sum.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LogSum {
    pub terms: BTreeMap<BigInt, Rational>,
}

impl LogSum {
    pub fn add(&mut self, n: &BigInt, c: &Rational) {
        if n.is_one() || c.is_zero() {
            return;
        }
        let e = self.terms.entry(n.clone()).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(n);
        }
    }

    pub fn sub(&self, other: &LogSum) -> LogSum {
        let mut out = self.clone();
        for (n, c) in &other.terms {
            out.add(n, &-c);
        }
        out
    }

    pub fn eval(&self, precision: u32) -> BigFloat {
        let (mut lo, mut hi) = (Rational::zero(), Rational::zero());
        for (n, c) in &self.terms {
            let (a, b) = lg_interval(n, precision);
            if c.is_positive() {
                lo += c * a;
                hi += c * b;
            } else {
                lo += c * b;
                hi += c * a;
            }
        }
        BigFloat { lo, hi, precision }
    }

    /// Exact zero test via a pairwise-coprime basis of the arguments.
    pub fn is_zero(&self) -> bool {
        let basis = coprime_basis(self.terms.keys().cloned().collect());
        let mut coeffs: Vec<Rational> = vec![Rational::zero(); basis.len()];
        let mut rational_part = Rational::zero();
        for (n, c) in &self.terms {
            let mut m = n.clone();
            for (i, q) in basis.iter().enumerate() {
                let mut e = 0i64;
                while (&m % q).is_zero() {
                    m /= q;
                    e += 1;
                }
                coeffs[i] += c * Rational::from_integer(e.into());
            }
            debug_assert!(m.is_one());
        }
        for (q, c) in basis.iter().zip(coeffs) {
            if c.is_zero() {
                continue;
            }
            if q.trailing_zeros() == Some(q.bits() - 1) {
                rational_part += c * Rational::from_integer((q.bits() - 1).into());
            } else {
                return false;
            }
        }
        rational_part.is_zero()
    }
}

/// Pairwise coprime integers > 1 that generate every input multiplicatively.
pub fn coprime_basis(mut nums: Vec<BigInt>) -> Vec<BigInt> {
    nums.retain(|n| *n > BigInt::one());
    loop {
        nums.sort();
        nums.dedup();
        let mut split = None;
        'search: for i in 0..nums.len() {
            for j in i + 1..nums.len() {
                let g = nums[i].gcd(&nums[j]);
                if !g.is_one() {
                    split = Some((i, j, g));
                    break 'search;
                }
            }
        }
        let Some((i, j, g)) = split else { return nums };
        let (a, b) = (&nums[i] / &g, &nums[j] / &g);
        let mut next: Vec<BigInt> = nums
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i && *k != j)
            .map(|(_, x)| x.clone())
            .collect();
        next.extend([a, b, g].into_iter().filter(|x| *x > BigInt::one()));
        nums = next;
    }
}
