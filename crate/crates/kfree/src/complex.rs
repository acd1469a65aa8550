//! Certified complex fixed-point arithmetic for unit-circle work: π by the
//! Machin formula, sin/cos of rational multiples of π by Taylor series with
//! alternating-series remainders, and a complex enclosure type whose `err`
//! field bounds the distance from the stored value to the true point in the
//! complex plane (overestimated through the ℓ¹ norm, which is always ≥ the
//! modulus).

use std::collections::HashMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use once_cell::sync::Lazy;

use crate::precision::{Dec, Enclosure};
use crate::Rat;

/// π as a certified enclosure (Machin: π = 16·atan(1/5) − 4·atan(1/239)).
pub fn pi(scale: u32) -> Enclosure {
    static CACHE: Lazy<Mutex<HashMap<u32, Enclosure>>> = Lazy::new(|| Mutex::new(HashMap::new()));
    if let Some(hit) = CACHE.lock().unwrap().get(&scale) {
        return hit.clone();
    }
    let value = atan_inv(5, scale)
        .mul_int(16)
        .sub(&atan_inv(239, scale).mul_int(4));
    CACHE.lock().unwrap().insert(scale, value.clone());
    value
}

/// atan(1/x) = Σ (−1)^i / ((2i+1)·x^{2i+1}); alternating with decreasing
/// terms, so the remainder is bounded by the first omitted term.
fn atan_inv(x: u64, scale: u32) -> Enclosure {
    let mut sum = Enclosure::exact_zero(scale);
    let x2 = BigInt::from(x * x);
    let mut pow = BigInt::from(x); // x^{2i+1}
    let mut i: u64 = 0;
    loop {
        let sign = if i % 2 == 0 { 1 } else { -1 };
        sum = sum.add(&Enclosure::from_ratio(
            BigInt::from(sign),
            BigInt::from(2 * i + 1) * &pow,
            scale,
        ));
        pow *= &x2;
        i += 1;
        let next = Dec::from_ratio(1, BigInt::from(2 * i + 1) * &pow, scale);
        if next <= Dec::ulp(scale).mul_int(4) {
            return sum.widen(&next.add(&Dec::ulp(scale).mul_int(4)));
        }
    }
}

/// sin(π·t) for an exact rational t, fully reduced by symmetry so the Taylor
/// series only ever sees arguments in [0, π/2].
pub fn sin_pi(t: Rat, scale: u32) -> Enclosure {
    let two = Rat::from_integer(2);
    let mut t = t - two * (t / two).floor(); // t ∈ [0, 2)
    let mut sign = 1i64;
    if t >= Rat::from_integer(1) {
        sign = -1;
        t -= Rat::from_integer(1);
    }
    if t > Rat::new(1, 2) {
        t = Rat::from_integer(1) - t;
    }
    if t == Rat::from_integer(0) {
        return Enclosure::exact_zero(scale);
    }
    let x = pi(scale).mul_ratio(*t.numer(), *t.denom());
    sin_taylor(&x).mul_int(sign)
}

/// cos(π·t) = sin(π·(t + 1/2)).
pub fn cos_pi(t: Rat, scale: u32) -> Enclosure {
    sin_pi(t + Rat::new(1, 2), scale)
}

/// sin on an enclosure with |x| ≤ π/2: Taylor up to an alternating remainder,
/// the argument's own error absorbed via |sin'| ≤ 1.
fn sin_taylor(x: &Enclosure) -> Enclosure {
    let scale = x.scale();
    let xv = Enclosure::exact(x.value.clone());
    let x2 = xv.mul(&xv);
    let mut term = xv.clone();
    let mut sum = xv;
    let mut n: u64 = 1;
    // Cut off at the rounding-allowance level: each iteration re-injects one
    // allowance of error, so |term| can never certify below it and a tighter
    // threshold would spin for thousands of iterations without gaining
    // accuracy.
    let cutoff = Dec::rounding_allowance(scale);
    loop {
        term = term.mul(&x2).mul_ratio(-1i64, (2 * n * (2 * n + 1)) as i64);
        if term.abs_upper() <= cutoff {
            return sum.widen(&term.abs_upper().add(&x.err)).widen(&cutoff);
        }
        sum = sum.add(&term);
        n += 1;
    }
}

/// Complex enclosure: the true point lies within distance `err` (ℓ¹-certified)
/// of `re + i·im`.
#[derive(Debug, Clone)]
pub struct CEnclosure {
    pub re: Dec,
    pub im: Dec,
    pub err: Dec,
}

impl CEnclosure {
    pub fn zero(scale: u32) -> Self {
        CEnclosure { re: Dec::zero(scale), im: Dec::zero(scale), err: Dec::zero(scale) }
    }

    pub fn exact_int(v: i64, scale: u32) -> Self {
        CEnclosure {
            re: Dec::from_int(v, scale),
            im: Dec::zero(scale),
            err: Dec::zero(scale),
        }
    }

    pub fn from_re_im(re: &Enclosure, im: &Enclosure) -> Self {
        CEnclosure {
            re: re.value.clone(),
            im: im.value.clone(),
            err: re.err.add(&im.err),
        }
    }

    /// e(t) = e^{2πi·t} for exact rational t; quarter-turn phases are exact.
    pub fn unit(t: Rat, scale: u32) -> Self {
        let t = t - t.floor();
        let exact = |re: i64, im: i64| CEnclosure {
            re: Dec::from_int(re, scale),
            im: Dec::from_int(im, scale),
            err: Dec::zero(scale),
        };
        if t == Rat::from_integer(0) {
            return exact(1, 0);
        }
        if t == Rat::new(1, 4) {
            return exact(0, 1);
        }
        if t == Rat::new(1, 2) {
            return exact(-1, 0);
        }
        if t == Rat::new(3, 4) {
            return exact(0, -1);
        }
        let arg = Rat::from_integer(2) * t;
        CEnclosure::from_re_im(&cos_pi(arg, scale), &sin_pi(arg, scale))
    }

    pub fn scale(&self) -> u32 {
        self.re.scale()
    }

    fn l1_upper(&self) -> Dec {
        self.re.abs().add(&self.im.abs()).add(&self.err)
    }

    pub fn add(&self, o: &CEnclosure) -> CEnclosure {
        CEnclosure {
            re: self.re.add(&o.re),
            im: self.im.add(&o.im),
            err: self.err.add(&o.err),
        }
    }

    pub fn sub(&self, o: &CEnclosure) -> CEnclosure {
        CEnclosure {
            re: self.re.sub(&o.re),
            im: self.im.sub(&o.im),
            err: self.err.add(&o.err),
        }
    }

    pub fn neg(&self) -> CEnclosure {
        CEnclosure { re: self.re.neg(), im: self.im.neg(), err: self.err.clone() }
    }

    pub fn conj(&self) -> CEnclosure {
        CEnclosure { re: self.re.clone(), im: self.im.neg(), err: self.err.clone() }
    }

    pub fn mul(&self, o: &CEnclosure) -> CEnclosure {
        let scale = self.scale();
        let re = self.re.mul(&o.re).sub(&self.im.mul(&o.im));
        let im = self.re.mul(&o.im).add(&self.im.mul(&o.re));
        let err = self
            .l1_upper()
            .mul_up(&o.err)
            .add(&o.l1_upper().mul_up(&self.err))
            .add(&Dec::rounding_allowance(scale).mul_int(4));
        CEnclosure { re, im, err }
    }

    pub fn mul_int(&self, k: i64) -> CEnclosure {
        CEnclosure {
            re: self.re.mul_int(k),
            im: self.im.mul_int(k),
            err: self.err.mul_int(k.abs()),
        }
    }

    pub fn mul_ratio(&self, num: i64, den: i64) -> CEnclosure {
        let scale = self.scale();
        CEnclosure {
            re: self.re.mul_ratio(num, den),
            im: self.im.mul_ratio(num, den),
            err: self.err.mul_ratio_up(num.abs(), den.abs()).add(&Dec::ulp(scale).mul_int(2)),
        }
    }

    /// Scale by a real enclosure.
    pub fn mul_real(&self, r: &Enclosure) -> CEnclosure {
        let scale = self.scale();
        CEnclosure {
            re: self.re.mul(&r.value),
            im: self.im.mul(&r.value),
            err: self
                .l1_upper()
                .mul_up(&r.err)
                .add(&r.value.abs().add(&r.err).mul_up(&self.err))
                .add(&Dec::rounding_allowance(scale).mul_int(2)),
        }
    }

    /// |v|² as a real enclosure.
    pub fn abs_sq(&self) -> Enclosure {
        let scale = self.scale();
        let value = self.re.mul(&self.re).add(&self.im.mul(&self.im));
        // |(v+δ)|² − |v|² bounded by 2·|v|·|δ| + |δ|²
        let err = self
            .l1_upper()
            .mul_int(2)
            .mul_up(&self.err)
            .add(&self.err.mul_up(&self.err))
            .add(&Dec::rounding_allowance(scale).mul_int(2));
        Enclosure { value, err }
    }

    pub fn abs_f64(&self) -> f64 {
        self.re.to_f64().hypot(self.im.to_f64())
    }

    /// Projection onto the real axis: valid enclosure because
    /// |Re v − Re w| ≤ |v − w|.
    pub fn re_enclosure(&self) -> Enclosure {
        Enclosure { value: self.re.clone(), err: self.err.clone() }
    }

    pub fn to_f64s(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI_50: &str = "3.14159265358979323846264338327950288419716939937510";

    #[test]
    fn pi_matches_reference() {
        let p = pi(60);
        let want: f64 = PI_50.parse().unwrap();
        assert!((p.to_f64() - want).abs() < 1e-14);
        assert!(p.err_f64() < 1e-45);
    }

    #[test]
    fn sin_cos_special_values() {
        let s = sin_pi(Rat::new(1, 2), 40);
        assert!((s.to_f64() - 1.0).abs() < 1e-20);
        assert!(sin_pi(Rat::from_integer(1), 40).value.is_zero());
        assert!(sin_pi(Rat::from_integer(0), 40).value.is_zero());
        let c = cos_pi(Rat::new(1, 3), 40);
        assert!((c.to_f64() - 0.5).abs() < 1e-20);
        let s6 = sin_pi(Rat::new(1, 6), 40);
        assert!((s6.to_f64() - 0.5).abs() < 1e-20);
        // negative and out-of-range arguments reduce correctly
        let s_neg = sin_pi(Rat::new(-1, 2), 40);
        assert!((s_neg.to_f64() + 1.0).abs() < 1e-20);
        let s_big = sin_pi(Rat::new(9, 2), 40); // sin(4.5π) = 1
        assert!((s_big.to_f64() - 1.0).abs() < 1e-20);
    }

    #[test]
    fn sin_matches_f64_on_grid() {
        for num in 0..40i64 {
            let t = Rat::new(num, 40);
            let got = sin_pi(t, 40).to_f64();
            let want = (std::f64::consts::PI * num as f64 / 40.0).sin();
            assert!((got - want).abs() < 1e-14, "t={num}/40: {got} vs {want}");
        }
    }

    #[test]
    fn unit_roots_multiply_to_one() {
        // e(1/3)³ = 1
        let w = CEnclosure::unit(Rat::new(1, 3), 45);
        let w3 = w.mul(&w).mul(&w);
        // the certified ball around the computed point must contain 1 + 0i
        assert!(w3.re.sub(&Dec::one(45)).abs() <= w3.err);
        assert!(w3.im.abs() <= w3.err);
        assert!(w3.err.to_f64() < 1e-30);
    }

    #[test]
    fn abs_sq_of_unit_is_one() {
        for (n, d) in [(1i64, 7i64), (3, 8), (5, 12)] {
            let u = CEnclosure::unit(Rat::new(n, d), 45);
            let sq = u.abs_sq();
            assert!(sq.value.sub(&Dec::one(45)).abs() <= sq.err, "({n},{d})");
            assert!(sq.err_f64() < 1e-30);
        }
    }

    #[test]
    fn mul_enclosure_contains_truth() {
        // (1+i)(1−i) = 2 exactly; verify the enclosure brackets it
        let a = CEnclosure::from_re_im(
            &Enclosure::from_ratio(1, 1, 40),
            &Enclosure::from_ratio(1, 1, 40),
        );
        let p = a.mul(&a.conj());
        assert!((p.re.to_f64() - 2.0).abs() <= p.err.to_f64() + 1e-30);
        assert!(p.im.to_f64().abs() <= p.err.to_f64() + 1e-30);
    }
}
