//! Fixed-point decimal arithmetic with certified error enclosures.
//!
//! Every quantity that cannot be represented exactly is carried as an
//! [`Enclosure`] — a fixed-point `value` plus a rigorous bound `err` on
//! `|true − value|`. The representation is a big-integer mantissa at a shared
//! decimal scale, so addition is *exact*; only multiplication and division
//! round, and each rounded operation adds an explicit allowance of one unit in
//! digit `scale − 10` to `err` (deliberately generous: the true rounding error
//! is one unit in digit `scale`). Exact addition also makes every parallel
//! reduction order-independent, which is what makes the crate's results
//! bit-identical regardless of worker count.
//!
//! ζ(k) for integer k ≥ 2 is evaluated by Euler–Maclaurin summation with exact
//! Bernoulli rationals; the remainder is bounded by the first omitted term
//! (valid because x^{-k} is completely monotone), with a 4× safety factor.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use once_cell::sync::Lazy;

/// Default working precision in significant decimal digits. Overridable via
/// the `KFREE_PRECISION` environment variable; floor of 15 so enclosures stay
/// meaningful.
pub fn default_digits() -> u32 {
    static DIGITS: Lazy<u32> = Lazy::new(|| {
        std::env::var("KFREE_PRECISION")
            .ok()
            .and_then(|s| s.trim().parse::<u32>().ok())
            .map(|d| d.clamp(15, 10_000))
            .unwrap_or(50)
    });
    *DIGITS
}

/// Working digits needed to resolve an absolute tolerance `tol`, with guard.
pub fn digits_for_tol(tol: f64) -> u32 {
    let need = if tol > 0.0 && tol < 1.0 {
        (-tol.log10()).ceil() as u32 + 12
    } else {
        12
    };
    need.max(default_digits())
}

fn pow10(scale: u32) -> BigInt {
    BigInt::from(10u32).pow(scale)
}

/// Fixed-point decimal: `mant / 10^scale`. All operands of an arithmetic
/// operation must share the same scale (asserted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dec {
    mant: BigInt,
    scale: u32,
}

impl Dec {
    pub fn zero(scale: u32) -> Self {
        Dec {
            mant: BigInt::zero(),
            scale,
        }
    }

    pub fn one(scale: u32) -> Self {
        Dec {
            mant: pow10(scale),
            scale,
        }
    }

    /// One unit in the last place at this scale: 10^(-scale).
    pub fn ulp(scale: u32) -> Self {
        Dec {
            mant: BigInt::one(),
            scale,
        }
    }

    /// The per-operation rounding allowance: one unit in digit `scale − 10`.
    pub fn rounding_allowance(scale: u32) -> Self {
        let digit = scale.saturating_sub(10);
        Dec {
            mant: pow10(scale - digit),
            scale,
        }
    }

    pub fn from_int(v: impl Into<BigInt>, scale: u32) -> Self {
        Dec {
            mant: v.into() * pow10(scale),
            scale,
        }
    }

    /// Nearest representable value to `num/den` (ties away from zero).
    pub fn from_ratio(num: impl Into<BigInt>, den: impl Into<BigInt>, scale: u32) -> Self {
        let den: BigInt = den.into();
        assert!(!den.is_zero(), "from_ratio: zero denominator");
        Dec {
            mant: div_round_nearest(&(num.into() * pow10(scale)), &den),
            scale,
        }
    }

    /// Exact conversion from f64 (every finite f64 is a ratio with power-of-two
    /// denominator), then rounded to scale.
    pub fn from_f64(x: f64, scale: u32) -> Self {
        assert!(x.is_finite(), "from_f64: non-finite input");
        // decompose x = mant * 2^exp exactly
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let exp_bits = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if exp_bits == 0 {
            (frac, -1074i64)
        } else {
            (frac | (1u64 << 52), exp_bits - 1075)
        };
        let m = BigInt::from(sign) * BigInt::from(mant);
        if exp >= 0 {
            Dec::from_int(m << (exp as usize), scale)
        } else {
            Dec::from_ratio(m, BigInt::one() << ((-exp) as usize), scale)
        }
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    pub fn abs(&self) -> Self {
        Dec {
            mant: self.mant.abs(),
            scale: self.scale,
        }
    }

    pub fn neg(&self) -> Self {
        Dec {
            mant: -&self.mant,
            scale: self.scale,
        }
    }

    pub fn add(&self, other: &Dec) -> Dec {
        assert_eq!(self.scale, other.scale, "Dec::add: scale mismatch");
        Dec {
            mant: &self.mant + &other.mant,
            scale: self.scale,
        }
    }

    pub fn sub(&self, other: &Dec) -> Dec {
        assert_eq!(self.scale, other.scale, "Dec::sub: scale mismatch");
        Dec {
            mant: &self.mant - &other.mant,
            scale: self.scale,
        }
    }

    /// Product rounded to nearest at the common scale.
    pub fn mul(&self, other: &Dec) -> Dec {
        assert_eq!(self.scale, other.scale, "Dec::mul: scale mismatch");
        Dec {
            mant: div_round_nearest(&(&self.mant * &other.mant), &pow10(self.scale)),
            scale: self.scale,
        }
    }

    /// Product rounded away from zero — an upper bound in magnitude, used for
    /// error-bound arithmetic.
    pub fn mul_up(&self, other: &Dec) -> Dec {
        assert_eq!(self.scale, other.scale, "Dec::mul_up: scale mismatch");
        Dec {
            mant: div_round_up_mag(&(&self.mant * &other.mant), &pow10(self.scale)),
            scale: self.scale,
        }
    }

    /// Exact product with an integer.
    pub fn mul_int(&self, k: impl Into<BigInt>) -> Dec {
        Dec {
            mant: &self.mant * k.into(),
            scale: self.scale,
        }
    }

    /// `self * num / den`, rounded to nearest.
    pub fn mul_ratio(&self, num: impl Into<BigInt>, den: impl Into<BigInt>) -> Dec {
        let den: BigInt = den.into();
        assert!(!den.is_zero(), "mul_ratio: zero denominator");
        Dec {
            mant: div_round_nearest(&(&self.mant * num.into()), &den),
            scale: self.scale,
        }
    }

    /// `self * num / den`, rounded away from zero (for error bounds).
    pub fn mul_ratio_up(&self, num: impl Into<BigInt>, den: impl Into<BigInt>) -> Dec {
        let den: BigInt = den.into();
        Dec {
            mant: div_round_up_mag(&(&self.mant * num.into()), &den),
            scale: self.scale,
        }
    }

    /// Quotient rounded to nearest.
    pub fn div(&self, other: &Dec) -> Dec {
        assert_eq!(self.scale, other.scale, "Dec::div: scale mismatch");
        assert!(!other.is_zero(), "Dec::div: division by zero");
        Dec {
            mant: div_round_nearest(&(&self.mant * pow10(self.scale)), &other.mant),
            scale: self.scale,
        }
    }

    /// Quotient rounded away from zero.
    pub fn div_up(&self, other: &Dec) -> Dec {
        assert_eq!(self.scale, other.scale);
        assert!(!other.is_zero(), "Dec::div_up: division by zero");
        Dec {
            mant: div_round_up_mag(&(&self.mant * pow10(self.scale)), &other.mant),
            scale: self.scale,
        }
    }

    /// Change scale; exact when widening, round-to-nearest when narrowing.
    pub fn rescale(&self, new_scale: u32) -> Dec {
        match new_scale.cmp(&self.scale) {
            Ordering::Equal => self.clone(),
            Ordering::Greater => Dec {
                mant: &self.mant * pow10(new_scale - self.scale),
                scale: new_scale,
            },
            Ordering::Less => Dec {
                mant: div_round_nearest(&self.mant, &pow10(self.scale - new_scale)),
                scale: new_scale,
            },
        }
    }

    pub fn cmp_abs(&self, other: &Dec) -> Ordering {
        assert_eq!(self.scale, other.scale);
        self.mant.abs().cmp(&other.mant.abs())
    }

    pub fn to_f64(&self) -> f64 {
        // BigInt::to_f64 is correctly rounded; dividing two f64s loses at most
        // another ulp, fine for reporting.
        let m = self.mant.to_f64().unwrap_or(f64::NAN);
        m / 10f64.powi(self.scale as i32)
    }

    /// Full-precision decimal string, e.g. `-0.00123…` with exactly `scale`
    /// fractional digits. Deterministic; used for serialization.
    pub fn to_decimal_string(&self) -> String {
        let neg = self.mant.is_negative();
        let abs = self.mant.abs();
        let (int_part, frac_part) = abs.div_rem(&pow10(self.scale));
        let frac_str = format!("{:0>width$}", frac_part.to_string(), width = self.scale as usize);
        let sign = if neg { "-" } else { "" };
        if self.scale == 0 {
            format!("{}{}", sign, int_part)
        } else {
            format!("{}{}.{}", sign, int_part, frac_str)
        }
    }
}

impl PartialOrd for Dec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dec {
    fn cmp(&self, other: &Self) -> Ordering {
        assert_eq!(self.scale, other.scale, "Dec::cmp: scale mismatch");
        self.mant.cmp(&other.mant)
    }
}

impl std::fmt::Display for Dec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

/// n/d rounded to nearest, ties away from zero.
fn div_round_nearest(n: &BigInt, d: &BigInt) -> BigInt {
    let (q, r) = n.div_rem(d);
    if (&r * BigInt::from(2)).magnitude() >= d.magnitude() {
        if (n.is_negative()) != (d.is_negative()) {
            q - 1
        } else {
            q + 1
        }
    } else {
        q
    }
}

/// n/d rounded away from zero.
fn div_round_up_mag(n: &BigInt, d: &BigInt) -> BigInt {
    let (q, r) = n.div_rem(d);
    if r.is_zero() {
        q
    } else if (n.is_negative()) != (d.is_negative()) {
        q - 1
    } else {
        q + 1
    }
}

/// A certified enclosure: the true quantity lies in `[value − err, value + err]`.
#[derive(Debug, Clone)]
pub struct Enclosure {
    pub value: Dec,
    pub err: Dec,
}

impl Enclosure {
    pub fn exact(value: Dec) -> Self {
        let scale = value.scale();
        Enclosure {
            value,
            err: Dec::zero(scale),
        }
    }

    pub fn exact_zero(scale: u32) -> Self {
        Enclosure::exact(Dec::zero(scale))
    }

    pub fn exact_one(scale: u32) -> Self {
        Enclosure::exact(Dec::one(scale))
    }

    /// Enclosure of the exact rational `num/den` (≤ 1 ulp representation error,
    /// claimed as exactly 1 ulp).
    pub fn from_ratio(num: impl Into<BigInt>, den: impl Into<BigInt>, scale: u32) -> Self {
        Enclosure {
            value: Dec::from_ratio(num, den, scale),
            err: Dec::ulp(scale),
        }
    }

    pub fn scale(&self) -> u32 {
        self.value.scale()
    }

    pub fn add(&self, other: &Enclosure) -> Enclosure {
        Enclosure {
            value: self.value.add(&other.value),
            err: self.err.add(&other.err),
        }
    }

    pub fn sub(&self, other: &Enclosure) -> Enclosure {
        Enclosure {
            value: self.value.sub(&other.value),
            err: self.err.add(&other.err),
        }
    }

    pub fn neg(&self) -> Enclosure {
        Enclosure {
            value: self.value.neg(),
            err: self.err.clone(),
        }
    }

    pub fn mul(&self, other: &Enclosure) -> Enclosure {
        let scale = self.scale();
        let value = self.value.mul(&other.value);
        let err = self
            .value
            .abs()
            .mul_up(&other.err)
            .add(&other.value.abs().mul_up(&self.err))
            .add(&self.err.mul_up(&other.err))
            .add(&Dec::rounding_allowance(scale));
        Enclosure { value, err }
    }

    /// Exact scaling by an integer.
    pub fn mul_int(&self, k: impl Into<BigInt>) -> Enclosure {
        let k: BigInt = k.into();
        Enclosure {
            value: self.value.mul_int(k.clone()),
            err: self.err.mul_int(k.abs()),
        }
    }

    /// Scaling by the exact rational num/den (one rounding each on value/err).
    pub fn mul_ratio(&self, num: impl Into<BigInt>, den: impl Into<BigInt>) -> Enclosure {
        let num: BigInt = num.into();
        let den: BigInt = den.into();
        let scale = self.scale();
        Enclosure {
            value: self.value.mul_ratio(num.clone(), den.clone()),
            err: self
                .err
                .mul_ratio_up(num.abs(), den.abs())
                .add(&Dec::ulp(scale)),
        }
    }

    /// Quotient enclosure. Requires the denominator to be bounded away from
    /// zero: |other.value| > 2·other.err.
    pub fn div(&self, other: &Enclosure) -> Enclosure {
        let scale = self.scale();
        let bv = other.value.abs();
        assert!(
            bv > other.err.mul_int(2),
            "Enclosure::div: denominator not bounded away from zero"
        );
        let value = self.value.div(&other.value);
        // |a/b − â/b̂| ≤ (ea + |â/b̂|·eb) / (|b̂| − eb)
        let denom_low = bv.sub(&other.err);
        let err = self
            .err
            .add(&value.abs().mul_up(&other.err))
            .div_up(&denom_low)
            .add(&Dec::rounding_allowance(scale));
        Enclosure { value, err }
    }

    pub fn powi(&self, n: u32) -> Enclosure {
        let mut acc = Enclosure::exact_one(self.scale());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Widen the error bound by an absolute amount (for truncation tails).
    pub fn widen(&self, extra: &Dec) -> Enclosure {
        assert!(!extra.is_negative(), "widen: negative error");
        Enclosure {
            value: self.value.clone(),
            err: self.err.add(extra),
        }
    }

    pub fn rescale(&self, new_scale: u32) -> Enclosure {
        let value = self.value.rescale(new_scale);
        let mut err = self.err.rescale(new_scale);
        if new_scale < self.scale() {
            err = err.add(&Dec::ulp(new_scale).mul_int(2));
        }
        Enclosure { value, err }
    }

    /// Largest possible magnitude of the true value.
    pub fn abs_upper(&self) -> Dec {
        self.value.abs().add(&self.err)
    }

    pub fn err_f64(&self) -> f64 {
        self.err.to_f64()
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

/// Enclosure of x^{1/k} for integer x ≥ 0: the mantissa is the exact integer
/// k-th root of x·10^{k·scale}, an under-approximation by less than one ulp.
pub fn kth_root_enclosure(x: impl Into<BigInt>, k: u32, scale: u32) -> Enclosure {
    let x: BigInt = x.into();
    assert!(k >= 1 && !x.is_negative(), "kth_root_enclosure needs k >= 1, x >= 0");
    let mant = (x * pow10(k * scale)).nth_root(k);
    Enclosure {
        value: Dec { mant, scale },
        err: Dec::ulp(scale),
    }
}

// ---------------------------------------------------------------------------
// Bernoulli numbers and ζ(k)
// ---------------------------------------------------------------------------

static BERNOULLI: Lazy<Mutex<Vec<BigRational>>> = Lazy::new(|| {
    Mutex::new(vec![
        BigRational::one(),
        BigRational::new(BigInt::from(-1), BigInt::from(2)),
    ])
});

/// Exact Bernoulli number B_n (B_1 = −1/2 convention).
pub fn bernoulli(n: usize) -> BigRational {
    let mut cache = BERNOULLI.lock().unwrap();
    while cache.len() <= n {
        let m = cache.len();
        // B_m = −1/(m+1) · Σ_{j<m} C(m+1, j) B_j
        let mut acc = BigRational::zero();
        let mut binom = BigInt::one(); // C(m+1, 0)
        for (j, b) in cache.iter().enumerate() {
            acc += BigRational::from(binom.clone()) * b;
            // C(m+1, j+1) = C(m+1, j) * (m+1−j) / (j+1)
            binom = binom * BigInt::from(m + 1 - j) / BigInt::from(j + 1);
        }
        let bm = -acc / BigRational::from(BigInt::from(m + 1));
        cache.push(bm);
    }
    cache[n].clone()
}

static ZETA_CACHE: Lazy<Mutex<HashMap<(u32, u32), Enclosure>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// ζ(k) for integer k ≥ 2 as a certified enclosure at the given scale.
pub fn zeta(k: u32, scale: u32) -> Enclosure {
    assert!(k >= 2, "zeta: k must be >= 2, got {}", k);
    if let Some(hit) = ZETA_CACHE.lock().unwrap().get(&(k, scale)) {
        return hit.clone();
    }
    let result = zeta_euler_maclaurin(k, scale);
    ZETA_CACHE
        .lock()
        .unwrap()
        .insert((k, scale), result.clone());
    result
}

/// ζ(k) by Euler–Maclaurin at cutoff N:
///   ζ(k) = Σ_{n<N} n^{-k} + N^{1−k}/(k−1) + N^{-k}/2
///          + Σ_{i=1..M} B_{2i}/(2i)! · k(k+1)…(k+2i−2) · N^{1−k−2i}
/// with |remainder| ≤ |first omitted term| since x^{-k} is completely monotone.
fn zeta_euler_maclaurin(k: u32, scale: u32) -> Enclosure {
    let target = Dec::ulp(scale).mul_int(BigInt::from(10));
    let mut n_cut: u64 = 64;
    loop {
        let mut sum = Enclosure::exact_zero(scale);
        for n in 1..n_cut {
            let nk = BigInt::from(n).pow(k);
            sum = sum.add(&Enclosure::from_ratio(BigInt::one(), nk, scale));
        }
        let nk1 = BigInt::from(n_cut).pow(k - 1);
        sum = sum.add(&Enclosure::from_ratio(
            BigInt::one(),
            &nk1 * BigInt::from(k - 1),
            scale,
        ));
        let nk = BigInt::from(n_cut).pow(k);
        sum = sum.add(&Enclosure::from_ratio(BigInt::one(), &nk * 2, scale));

        // correction terms; num/den kept exact per term
        let mut rising = BigInt::from(k); // k(k+1)…(k+2i−2), starts at i=1: just k
        let mut fact = BigInt::from(2u32); // (2i)! at i=1
        let mut n_pow = &nk * BigInt::from(n_cut); // N^{k+2i−1} at i=1
        let n_sq = BigInt::from(n_cut).pow(2);
        let mut converged = false;
        for i in 1..=200u32 {
            let b = bernoulli(2 * i as usize);
            let num = b.numer() * &rising;
            let den = b.denom() * &fact * &n_pow;
            let term = Enclosure::from_ratio(num.clone(), den.clone(), scale);
            let mag = term.value.abs();
            // term grows past the optimum => N too small, restart with larger N
            sum = sum.add(&term);
            // next omitted term magnitude bounds the remainder
            let next_rising = &rising * BigInt::from(k + 2 * i - 1) * BigInt::from(k + 2 * i);
            let next_fact = &fact * BigInt::from(2 * i + 1) * BigInt::from(2 * i + 2);
            let next_pow = &n_pow * &n_sq;
            let b_next = bernoulli(2 * (i + 1) as usize);
            let next_mag = Dec::from_ratio(
                b_next.numer().abs() * &next_rising,
                b_next.denom() * &next_fact * &next_pow,
                scale,
            )
            .abs();
            if next_mag <= target && next_mag <= mag {
                // certified: |remainder| ≤ 4·|first omitted|, plus its own ulp
                sum = sum.widen(&next_mag.mul_int(4).add(&Dec::ulp(scale).mul_int(4)));
                converged = true;
                break;
            }
            if next_mag > mag && i > 4 {
                break; // diverging tail: N insufficient for this scale
            }
            rising = next_rising;
            fact = next_fact;
            n_pow = next_pow;
        }
        if converged {
            return sum;
        }
        n_cut *= 2;
        assert!(n_cut <= 1 << 24, "zeta: failed to converge (scale {})", scale);
    }
}

/// 1/ζ(k) as a certified enclosure.
pub fn zeta_inv(k: u32, scale: u32) -> Enclosure {
    Enclosure::exact_one(scale).div(&zeta(k, scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    // 55-digit references computed independently (Euler product with
    // prime-zeta tail acceleration, cross-checked against 6/π² resp. 1/ζ(3)).
    const ZETA2_INV: &str = "0.6079271018540266286632767792583658334261526480334792931";
    const ZETA3_INV: &str = "0.8319073725807074686831262788215307344170563977337280793";
    const ZETA4_INV: &str = "0.9239384029215901670237504940406824727645021668274436446";

    fn assert_close_str(enc: &Enclosure, reference: &str, tol: f64) {
        let want: f64 = reference.parse().unwrap();
        let got = enc.to_f64();
        assert!(
            (got - want).abs() <= tol,
            "value {} vs reference {} (tol {})",
            got,
            want,
            tol
        );
    }

    #[test]
    fn dec_basic_arithmetic() {
        let a = Dec::from_ratio(1, 3, 20);
        let b = Dec::from_ratio(2, 3, 20);
        let sum = a.add(&b);
        // 0.333…3 + 0.666…7 = 1.000…0 at 20 digits
        assert_eq!(sum, Dec::one(20));
        let p = a.mul(&b);
        let expect = Dec::from_ratio(2, 9, 20);
        let diff = p.sub(&expect).abs();
        assert!(diff <= Dec::ulp(20).mul_int(2));
    }

    #[test]
    fn kth_root_enclosure_references() {
        // √2 to 40 digits
        let r = kth_root_enclosure(2, 2, 40);
        assert_eq!(
            r.value.to_decimal_string(),
            "1.4142135623730950488016887242096980785696"
        );
        assert_eq!(r.err, Dec::ulp(40));
        // exact powers come out exact
        let s = kth_root_enclosure(100_000_000u64, 2, 30);
        assert_eq!(s.value, Dec::from_int(10_000, 30));
        // (H^ℓ)^{1/2k} with H = 64, ℓ = 2, k = 2 is 64^{1/2} = 8
        let t = kth_root_enclosure(BigInt::from(64).pow(2), 4, 25);
        assert_eq!(t.value, Dec::from_int(8, 25));
    }

    #[test]
    fn dec_rounding_is_nearest() {
        // 0.25 at scale 1 → 0.3 (ties away from zero)
        assert_eq!(Dec::from_ratio(1, 4, 1).to_decimal_string(), "0.3");
        assert_eq!(Dec::from_ratio(-1, 4, 1).to_decimal_string(), "-0.3");
        assert_eq!(Dec::from_ratio(1, 8, 2).to_decimal_string(), "0.13");
    }

    #[test]
    fn dec_strings_round_trip_f64() {
        let x = Dec::from_f64(0.5, 30);
        assert_eq!(x, Dec::from_ratio(1, 2, 30));
        let y = Dec::from_f64(-1.25, 10);
        assert_eq!(y.to_decimal_string(), "-1.2500000000");
    }

    #[test]
    fn enclosure_mul_err_is_valid() {
        // (1/3 ± ulp) * (1/7 ± ulp): true value 1/21 must lie inside
        let a = Enclosure::from_ratio(1, 3, 25);
        let b = Enclosure::from_ratio(1, 7, 25);
        let p = a.mul(&b);
        let truth = Dec::from_ratio(1, 21, 40).rescale(25);
        let lo = p.value.sub(&p.err);
        let hi = p.value.add(&p.err);
        assert!(truth >= lo && truth <= hi);
    }

    #[test]
    fn bernoulli_small_values() {
        assert_eq!(bernoulli(0), BigRational::one());
        assert_eq!(
            bernoulli(2),
            BigRational::new(BigInt::from(1), BigInt::from(6))
        );
        assert_eq!(
            bernoulli(4),
            BigRational::new(BigInt::from(-1), BigInt::from(30))
        );
        assert!(bernoulli(3).is_zero());
        assert_eq!(
            bernoulli(12),
            BigRational::new(BigInt::from(-691), BigInt::from(2730))
        );
    }

    #[test]
    fn zeta_matches_references() {
        for (k, reference) in [(2, ZETA2_INV), (3, ZETA3_INV), (4, ZETA4_INV)] {
            let zi = zeta_inv(k, 60);
            assert_close_str(&zi, reference, 1e-15);
            assert!(zi.err_f64() < 1e-45, "k={} err {}", k, zi.err_f64());
        }
    }

    #[test]
    fn zeta_enclosure_contains_reference_at_full_precision() {
        // compare the 55-digit reference against the enclosure interval digit-exactly
        let zi = zeta_inv(2, 60);
        let want = {
            // parse the reference into a Dec at scale 60
            let s = ZETA2_INV.strip_prefix("0.").unwrap();
            let mant: BigInt = s.parse::<BigInt>().unwrap() * pow10(60 - s.len() as u32);
            Dec { mant, scale: 60 }
        };
        // reference itself is good to ~1e-55; widen by that much
        let slack = Dec::ulp(60).mul_int(BigInt::from(10u64).pow(6));
        let lo = zi.value.sub(&zi.err).sub(&slack);
        let hi = zi.value.add(&zi.err).add(&slack);
        assert!(want >= lo && want <= hi, "reference outside enclosure");
    }

    #[test]
    fn zeta_scales_cache_consistently() {
        let a = zeta(2, 40);
        let b = zeta(2, 70);
        // compare in the finer scale; agreement must be within the coarser error
        let fine = a.value.rescale(70);
        let diff = fine.sub(&b.value).abs();
        let budget = a.err.rescale(70).add(&b.err).add(&Dec::ulp(40).rescale(70));
        assert!(diff <= budget, "diff {} > budget {}", diff, budget);
    }
}
