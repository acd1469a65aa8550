//! Singular-series side: local residue counts u_p, the Euler products A_q and
//! A_q(**h**) with certified truncation error, the averaged sums B_j(H;q) and
//! the binomially compensated combination C_ℓ(H;q).
//!
//! The expensive object is A_q(**h**) = (φ(q)/q)·∏_{p∤q}(1 − u_p(**h**)/p^k).
//! Only primes with p^k ≤ spread(**h**) can have u_p different from the number
//! of distinct entries, so the product splits into a short exact prefix and a
//! generic tail ∏(1 − d/p^k) that depends on the tuple only through the
//! distinct count d. The tail is accelerated through the identity
//! ∏_{p>Y}(1 − d/p^k) = [∏_{p>Y}(1 − p^{-k})]^d · G with the certified bound
//! |G − 1| ≤ 2d²·Y^{1−2k}/(2k−1)  (valid for d·Y^{-k} ≤ 1/2),
//! which turns a hopeless cutoff (Y ≈ tol^{-1/(k-1)}) into Y ≈ tol^{-1/(2k-1)}.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use rayon::prelude::*;

use crate::arith::{binomial_u128, checked_pow_u64, is_prime_u64, kth_root_floor, phi_u64,
                   prime_factors_u64, primes_upto};
use crate::error::{Error, Result};
use crate::precision::{digits_for_tol, zeta_inv, Dec, Enclosure};
use crate::shift::ShiftTuple;
use crate::Rat;

/// Alias under which this module's certified values (`value` ± `err`) are exported.
pub type EulerProductValue = Enclosure;

/// Default work budget for the tuple sums, in tuple·prime operations.
pub const DEFAULT_WORK_BUDGET: u128 = 1_000_000_000;

/// Number of distinct residues of the entries of **h** modulo p^k.
pub fn u_p(h: &ShiftTuple, p: u64) -> Result<u64> {
    if !is_prime_u64(p) {
        return Err(Error::domain(format!("u_p requires a prime, got {p}")));
    }
    match checked_pow_u64(p, h.k()) {
        Some(pk) => {
            let mut residues: Vec<u64> = h
                .values()
                .iter()
                .map(|&v| (v.rem_euclid(pk as i64)) as u64)
                .collect();
            residues.sort_unstable();
            residues.dedup();
            Ok(residues.len() as u64)
        }
        // p^k exceeds u64 range, so certainly p^k > spread: distinct values
        // cannot collide mod p^k
        None => Ok(h.distinct_count() as u64),
    }
}

/// 1/ζ(k) = ∏_p (1 − p^{-k}) within `tol`.
pub fn zeta_inverse(k: u32, tol: f64) -> Result<Enclosure> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    if k < 2 {
        return Err(Error::domain(format!("exponent k must be >= 2, got {k}")));
    }
    let zi = zeta_inv(k, digits_for_tol(tol));
    check_tol(zi, tol)
}

/// ∏_{p ∤ q}(1 − p^{-k}) — the coprime Euler product without the φ(q)/q factor.
pub fn coprime_euler_product(q: u64, k: u32, tol: f64) -> Result<Enclosure> {
    if q == 0 {
        return Err(Error::domain("q must be >= 1"));
    }
    let mut value = zeta_inverse(k, tol / 2.0)?;
    for p in prime_factors_u64(q) {
        // divide the factor (1 − p^{-k}) back out: × p^k/(p^k − 1)
        let pk = checked_pow_u64(p, k)
            .ok_or_else(|| Error::domain(format!("p^k overflow for p={p}, k={k}")))?;
        value = value.mul_ratio(pk, pk - 1);
    }
    check_tol(value, tol)
}

/// A_q = (φ(q)/q)·∏_{p ∤ q}(1 − p^{-k}), the density of k-free values coprime
/// to q among residues coprime to q.
pub fn density_aq(q: u64, k: u32, tol: f64) -> Result<Enclosure> {
    let base = coprime_euler_product(q, k, tol / 2.0)?;
    check_tol(base.mul_ratio(phi_u64(q), q), tol)
}

/// A_q(**h**) = (φ(q)/q)·∏_{p ∤ q}(1 − u_p(**h**)/p^k) within `tol`.
/// Returns exact zero when some local factor vanishes (u_p = p^k).
pub fn singular_aqh(h: &ShiftTuple, tol: f64) -> Result<Enclosure> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let scale = digits_for_tol(tol);
    let ev = AqhEvaluator::build(h.q(), h.k(), scale, h.len() as u64, h.spread(), tol / 4.0)?;
    check_tol(ev.eval(h.values()), tol)
}

/// Σ over all m^j tuples **h** ∈ [0,m)^j of A_q(**h**), with certified error.
pub fn bj_sum(m: u64, j: u32, q: u64, k: u32, tol: f64) -> Result<Enclosure> {
    bj_sum_budgeted(m, j, q, k, tol, DEFAULT_WORK_BUDGET)
}

/// As [`bj_sum`] with an explicit work budget (tuple·prime operations).
///
/// The m^j tuples are collapsed to canonical classes: sorted tuples with
/// minimum 0, weighted by (m − max)·j!/∏(multiplicity!). This preserves the
/// sum exactly — A_q(**h**) is invariant under permutation and translation —
/// and cuts the cost from m^j to roughly m^{j−1}/(j−1)!.
pub fn bj_sum_budgeted(m: u64, j: u32, q: u64, k: u32, tol: f64, budget: u128) -> Result<Enclosure> {
    if m == 0 || j == 0 {
        return Err(Error::domain("bj_sum requires m >= 1 and j >= 1"));
    }
    if j > 8 {
        return Err(Error::domain(format!("tuple length {j} not supported (max 8)")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let n_classes = binomial_u128((m - 1 + j as u64 - 1) as u32, j - 1);
    let spread_max = m - 1;
    let small_count = primes_upto(kth_root_floor(spread_max.max(1), k))
        .len()
        .max(1) as u128;
    let est_ops = n_classes * (j as u128) * (small_count + 1);
    if est_ops > budget {
        return Err(Error::Budget { required: est_ops, budget });
    }

    // weight-amplified error: m^j terms; resolve tol against that amplification
    let amplification = (j as f64) * (m as f64).log10();
    let scale = digits_for_tol(tol) + amplification.ceil() as u32 + 8;
    let total_weight = (m as f64).powi(j as i32);
    let ev = AqhEvaluator::build(q, k, scale, j as u64, spread_max, tol / (4.0 * total_weight))?;

    let classes = canonical_classes(m, j);
    let zero = Enclosure::exact_zero(scale);
    let sum = classes
        .par_chunks(1024)
        .map(|chunk| {
            let mut acc = Enclosure::exact_zero(scale);
            for class in chunk {
                let e = &class.0[..j as usize];
                let weight = (m - e[j as usize - 1] as u64) * class.1;
                acc = acc.add(&ev.eval(e).mul_int(weight));
            }
            acc
        })
        .reduce(|| zero.clone(), |a, b| a.add(&b));
    check_tol(sum, tol)
}

/// B_j(H; q) = ∫_{H−1}^{H} (sum over [0,⌈u⌉)^j tuples) du, H ≥ 1 rational.
/// Piecewise-linear in H: equals bj_sum(H) at integers and interpolates the
/// two neighbouring integer values in between. B_0 := 1 exactly.
pub fn b_j(h: Rat, j: u32, q: u64, k: u32, tol: f64) -> Result<Enclosure> {
    if h < Rat::from_integer(1) {
        return Err(Error::domain(format!("B_j requires H >= 1, got {h}")));
    }
    let scale = digits_for_tol(tol) + 8;
    if j == 0 {
        return Ok(Enclosure::exact_one(scale));
    }
    let floor = h.floor().to_integer();
    if h.is_integer() {
        return bj_sum(floor as u64, j, q, k, tol);
    }
    let frac = h - Rat::from_integer(floor); // λ ∈ (0,1), exact rational
    let lo = bj_sum(floor as u64, j, q, k, tol / 2.0)?;
    let hi = bj_sum(floor as u64 + 1, j, q, k, tol / 2.0)?;
    let scale = lo.scale().max(hi.scale());
    let one_minus = Rat::from_integer(1) - frac;
    let part_lo = lo.rescale(scale).mul_ratio(*one_minus.numer(), *one_minus.denom());
    let part_hi = hi.rescale(scale).mul_ratio(*frac.numer(), *frac.denom());
    check_tol(part_lo.add(&part_hi), tol)
}

/// C_ℓ(H; q) = Σ_{j=0}^{ℓ} C(ℓ,j)·(−A_q·H)^{ℓ−j}·B_j(H;q).
///
/// The alternating sum cancels almost completely — the result is of order
/// H^{ℓ/2k} against terms of order H^ℓ — so everything is evaluated at a scale
/// deep enough that the cancellation is exact arithmetic, not luck.
pub fn c_ell_binomial(h: Rat, ell: u32, q: u64, k: u32, tol: f64) -> Result<Enclosure> {
    c_ell_binomial_budgeted(h, ell, q, k, tol, DEFAULT_WORK_BUDGET)
}

pub fn c_ell_binomial_budgeted(
    h: Rat,
    ell: u32,
    q: u64,
    k: u32,
    tol: f64,
    budget: u128,
) -> Result<Enclosure> {
    if ell == 0 {
        return Err(Error::domain("C_ell requires ell >= 1"));
    }
    if h < Rat::from_integer(1) {
        return Err(Error::domain(format!("C_ell requires H >= 1, got {h}")));
    }
    let h_f = (*h.numer() as f64) / (*h.denom() as f64);
    let terms = ell as f64 + 1.0;
    let amplification = (ell as f64) * (1.0 + h_f).log10();
    let scale = digits_for_tol(tol) + amplification.ceil() as u32 + 10;

    // the density error reaches the sum through (A_q·H)^{ℓ−j}, amplified by at
    // most ℓ·2^ℓ·(1+H)^ℓ across all powers and binomial weights combined
    let aq_amp = (ell as f64) * (1u64 << ell) as f64 * (1.0 + h_f).powi(ell as i32);
    let aq = density_aq(q, k, tol / (4.0 * terms * aq_amp))?.rescale(scale);
    let minus_aqh = aq.mul_ratio(-*h.numer(), *h.denom());

    let mut sum = Enclosure::exact_zero(scale);
    for j in 0..=ell {
        let coeff_u = binomial_u128(ell, j);
        // charge each B_j only its own amplification C(ℓ,j)·(A_q·H)^{ℓ−j}, not
        // the worst case uniformly — B_ℓ enters unamplified and its tuple sum
        // is by far the most expensive to tighten
        let amp = coeff_u as f64 * (1.0 + h_f).powi((ell - j) as i32);
        let b = b_j(h, j, q, k, tol / (4.0 * terms * amp))?.rescale(scale);
        let term = minus_aqh.powi(ell - j).mul(&b).mul_int(BigInt::from(coeff_u));
        sum = sum.add(&term);
    }
    let _ = budget; // b_j applies the tuple budget internally
    check_tol(sum, tol)
}

/// Table of inner sums Σ_{**h** ∈ [0,m)^j} A_q(**h**) keyed by (m, j),
/// serializable as a JSON map `"m:j" → {value, err}` with decimal strings.
#[derive(Debug, Clone)]
pub struct SeriesTable {
    pub q: u64,
    pub k: u32,
    pub tol: f64,
    entries: BTreeMap<(u64, u32), Enclosure>,
}

impl SeriesTable {
    pub fn build(q: u64, k: u32, tol: f64, ms: &[u64], js: &[u32]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for &m in ms {
            for &j in js {
                entries.insert((m, j), bj_sum(m, j, q, k, tol)?);
            }
        }
        Ok(SeriesTable { q, k, tol, entries })
    }

    pub fn get(&self, m: u64, j: u32) -> Option<&Enclosure> {
        self.entries.get(&(m, j))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for ((m, j), enc) in &self.entries {
            map.insert(
                format!("{m}:{j}"),
                serde_json::json!({
                    "value": enc.value.to_decimal_string(),
                    "err": enc.err.to_decimal_string(),
                }),
            );
        }
        serde_json::json!({
            "q": self.q,
            "k": self.k,
            "tol": self.tol,
            "entries": serde_json::Value::Object(map),
        })
    }
}

/// Evaluator for A_q(**h**) over many tuples sharing (q, k, spread ceiling).
///
/// `bases[d−1]` holds (φ(q)/q)·∏_{p ∤ q, p^k > small_bound}(1 − d/p^k) with a
/// certified tail; per tuple only the finitely many small primes are touched.
pub(crate) struct AqhEvaluator {
    q: u64,
    k: u32,
    scale: u32,
    small: Vec<(u64, u64)>, // (p, p^k) for p ∤ q with p^k ≤ small_bound
    bases: Vec<Enclosure>,  // distinct-count d = 1.. → tail product incl. φ(q)/q
}

impl AqhEvaluator {
    /// `tail_rel`: permitted relative error of each tail product.
    pub(crate) fn build(
        q: u64,
        k: u32,
        scale: u32,
        max_dc: u64,
        spread_max: u64,
        tail_rel: f64,
    ) -> Result<Self> {
        if q == 0 || max_dc == 0 || k < 2 {
            return Err(Error::domain("evaluator needs q >= 1, k >= 2, max_dc >= 1"));
        }
        let small_bound = spread_max.max(max_dc);
        let q_primes = prime_factors_u64(q);

        // cutoff for the accelerated tail: 2·d²·Y^{1−2k}/(2k−1) ≤ tail_rel
        let exp = (2 * k - 1) as f64;
        let y_f = (2.0 * (max_dc as f64).powi(2) / (exp * tail_rel.max(1e-300))).powf(1.0 / exp);
        let mut y = (y_f * 1.1).ceil() as u64 + 1;
        y = y
            .max(16)
            .max(kth_root_floor(small_bound, k) + 1)
            .max(q_primes.iter().copied().max().unwrap_or(0) + 1);
        if y > 100_000_000 {
            return Err(Error::Precision {
                requested: tail_rel,
                achieved: 2.0 * (max_dc as f64).powi(2) / (exp * 1e8f64.powf(exp)),
            });
        }

        let primes = primes_upto(y);
        let small: Vec<(u64, u64)> = primes
            .iter()
            .filter(|&&p| q % p != 0)
            .filter_map(|&p| checked_pow_u64(p, k).map(|pk| (p, pk)))
            .filter(|&(_, pk)| pk <= small_bound)
            .collect();

        // T = ∏_{p > Y}(1 − p^{-k}) = ζ(k)^{-1} / ∏_{p ≤ Y}(1 − p^{-k})
        let mut head = Enclosure::exact_one(scale);
        for &p in &primes {
            let pk = checked_pow_u64(p, k)
                .ok_or_else(|| Error::domain(format!("p^k overflow for p={p}")))?;
            head = head.mul_ratio(pk - 1, pk);
        }
        let tail_t = zeta_inv(k, scale).div(&head);

        let phi = phi_u64(q);
        let mut bases = Vec::with_capacity(max_dc as usize);
        for d in 1..=max_dc {
            // exact factors for Y ≥ p, p ∤ q, p^k > small_bound
            let mut prod = Enclosure::exact_one(scale);
            for &p in &primes {
                if q % p == 0 {
                    continue;
                }
                let pk = checked_pow_u64(p, k).unwrap();
                if pk <= small_bound {
                    continue;
                }
                prod = prod.mul_ratio(pk as i64 - d as i64, pk);
            }
            let mut base = prod.mul(&tail_t.powi(d as u32)).mul_ratio(phi, q);
            // accelerated-tail correction: |G − 1| ≤ 2d²Y^{1−2k}/(2k−1)
            debug_assert!((d as f64) * (y as f64).powi(-(k as i32)) <= 0.5);
            let g_bound = 2.0 * (d as f64).powi(2) / (exp * (y as f64).powf(exp));
            base = base.widen(&base.abs_upper().mul_up(&Dec::from_f64(g_bound * 1.01, scale).abs()));
            bases.push(base);
        }

        Ok(AqhEvaluator { q, k, scale, small, bases })
    }

    /// A_q(**h**) for the entry slice of a tuple (context q, k fixed).
    pub(crate) fn eval(&self, values: &[i64]) -> Enclosure {
        debug_assert!(!values.is_empty() && values.len() <= self.bases.len());
        let mut sorted: [i64; 8] = [0; 8];
        let j = values.len();
        sorted[..j].copy_from_slice(values);
        sorted[..j].sort_unstable();
        let mut dc = 1;
        for i in 1..j {
            if sorted[i] != sorted[i - 1] {
                dc += 1;
            }
        }

        let mut result = self.bases[dc - 1].clone();
        let mut residues: [u64; 8] = [0; 8];
        for &(_, pk) in &self.small {
            for i in 0..j {
                residues[i] = sorted[i].rem_euclid(pk as i64) as u64;
            }
            residues[..j].sort_unstable();
            let mut u = 1u64;
            for i in 1..j {
                if residues[i] != residues[i - 1] {
                    u += 1;
                }
            }
            if u == pk {
                return Enclosure::exact_zero(self.scale);
            }
            // small primes are excluded from the base product, so their local
            // factor always enters here, even when u equals the distinct count
            result = result.mul_ratio(pk - u, pk);
        }
        let _ = (self.q, self.k);
        result
    }
}

/// Canonical representatives: sorted tuples e with e₁ = 0 ≤ … ≤ e_j ≤ m−1,
/// paired with the permutation multiplicity j!/∏(run length!). The caller
/// supplies the translation weight (m − e_j).
fn canonical_classes(m: u64, j: u32) -> Vec<([i64; 8], u64)> {
    let j = j as usize;
    let mut out = Vec::new();
    let mut e = [0i64; 8];
    loop {
        out.push((e, perm_multiplicity(&e[..j])));
        // odometer over the nondecreasing coordinates e[1..j]
        let mut i = j;
        loop {
            if i <= 1 {
                return out;
            }
            i -= 1;
            if e[i] < m as i64 - 1 {
                e[i] += 1;
                for t in i + 1..j {
                    e[t] = e[i];
                }
                break;
            }
        }
    }
}

fn perm_multiplicity(e: &[i64]) -> u64 {
    const FACT: [u64; 9] = [1, 1, 2, 6, 24, 120, 720, 5040, 40320];
    let mut mult = FACT[e.len()];
    let mut run = 1usize;
    for i in 1..e.len() {
        if e[i] == e[i - 1] {
            run += 1;
        } else {
            mult /= FACT[run];
            run = 1;
        }
    }
    mult / FACT[run]
}

fn check_tol(enc: Enclosure, tol: f64) -> Result<Enclosure> {
    let achieved = enc.err_f64();
    if achieved > tol {
        return Err(Error::Precision { requested: tol, achieved });
    }
    Ok(enc)
}
