//! Exact tuple counting over shifted windows: the number of n in a range
//! whose translates n + h_i·q are all k-free, the divisor-condition counts
//! N_d it decomposes into under Möbius inversion, the two-sided cutoff split
//! of that inversion, and the coprime divisor-tuple counter that controls
//! the error term. Everything here is exact integer arithmetic; the only
//! certified-real object is the main term attached to a report.

use num_integer::Integer;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::arith::{checked_pow_u64, kth_root_floor, mobius_table, prime_factors_u64, primes_upto};
use crate::precision::{Dec, Enclosure};
use crate::shift::ShiftTuple;
use crate::sieve::{sieve_range, SieveConfig};
use crate::singular::{singular_aqh, u_p};
use crate::{Error, Result};

/// Work ceiling for the divisor-tuple counter, in divisor-test operations.
pub const TUPLE_WORK_BUDGET: u128 = 2_000_000_000;

/// Largest Möbius cutoff accepted by `moebius_split` (the d ≤ y sum walks
/// every d up to the cutoff).
pub const MAX_MOBIUS_CUTOFF: u64 = 1_000_000;

/// Largest range length for which `moebius_split` keeps a per-n radical.
const MAX_RADICAL_WINDOW: u64 = 1 << 24;

/// CRT moduli beyond this are refused; at 2^96 the interleaved residue
/// arithmetic still fits u128/i128 comfortably.
const CRT_MODULUS_CAP: u128 = 1 << 96;

const BLOCK: u64 = 1 << 14;

/// Shift offsets h_i·q as plain integers, overflow-checked.
fn scaled_shifts(h: &ShiftTuple) -> Result<Vec<i64>> {
    let q = h.q() as i128;
    h.values()
        .iter()
        .map(|&v| {
            i64::try_from(v as i128 * q)
                .map_err(|_| Error::domain(format!("scaled shift {v}·{q} overflows")))
        })
        .collect()
}

/// Sieve window [lo, hi) covering n + s for all X₁ < n ≤ X₂ and all offsets;
/// rejects ranges where a shifted argument would fall below 1.
fn shifted_window_bounds(x1: u64, x2: u64, shifts: &[i64]) -> Result<(u64, u64)> {
    let min_s = *shifts.iter().min().unwrap() as i128;
    let max_s = *shifts.iter().max().unwrap() as i128;
    let lo = x1 as i128 + 1 + min_s;
    if lo < 1 {
        return Err(Error::domain(format!(
            "shifted argument {} + ({min_s}) = {lo} < 1",
            x1 + 1
        )));
    }
    let hi = u64::try_from(x2 as i128 + max_s + 1)
        .map_err(|_| Error::domain("shifted range exceeds the u64 domain"))?;
    Ok((lo as u64, hi))
}

fn chunk_blocks(lo: u64, hi: u64, step: u64) -> Vec<(u64, u64)> {
    let mut blocks = Vec::new();
    let mut a = lo;
    while a < hi {
        let b = hi.min(a + step);
        blocks.push((a, b));
        a = b;
    }
    blocks
}

/// #{X₁ < n ≤ X₂ : gcd(n,q) = 1 and n + h_i·q is k-free for every i}, by
/// sieving one window that covers all shifted positions. q = 1 runs on a
/// word-level AND of shifted bitmaps; otherwise the range is partitioned
/// into blocks and reduced with exact integer sums.
pub fn s_q_direct(x1: u64, x2: u64, h: &ShiftTuple) -> Result<u64> {
    if x1 > x2 {
        return Err(Error::domain(format!("invalid range ({x1}, {x2}]")));
    }
    if x1 == x2 {
        return Ok(0);
    }
    let shifts = scaled_shifts(h)?;
    let (lo, hi) = shifted_window_bounds(x1, x2, &shifts)?;
    let win = sieve_range(&SieveConfig::new(h.k(), lo, hi)?)?;
    let q = h.q();
    if q == 1 {
        let min_s = *shifts.iter().min().unwrap();
        let rebased: Vec<u64> = shifts.iter().map(|&s| (s - min_s) as u64).collect();
        let n_lo = (x1 as i128 + 1 + min_s as i128) as u64;
        let n_hi = (x2 as i128 + min_s as i128 + 1) as u64;
        return Ok(win.count_shifted_intersection(n_lo, n_hi, &rebased));
    }
    let total = chunk_blocks(x1 + 1, x2 + 1, BLOCK)
        .par_iter()
        .map(|&(a, b)| {
            let mut c = 0u64;
            for n in a..b {
                if n.gcd(&q) == 1
                    && shifts.iter().all(|&s| win.get((n as i128 + s as i128) as u64))
                {
                    c += 1;
                }
            }
            c
        })
        .sum();
    Ok(total)
}

fn inv_mod(a: u128, m: u128) -> u128 {
    // extended Euclid; caller guarantees gcd(a, m) = 1 and m ≤ 2^96
    let (mut t, mut new_t) = (0i128, 1i128);
    let (mut r, mut new_r) = (m as i128, (a % m) as i128);
    while new_r != 0 {
        let quot = r / new_r;
        (t, new_t) = (new_t, t - quot * new_t);
        (r, new_r) = (new_r, r - quot * new_r);
    }
    debug_assert_eq!(r, 1, "inv_mod requires coprime arguments");
    t.rem_euclid(m as i128) as u128
}

/// Recursive CRT walk: each level fixes one residue mod p^k, the leaf steps
/// the combined class through the range counting n coprime to q.
fn crt_count(
    sets: &[(u64, Vec<u64>)],
    idx: usize,
    m: u128,
    r: u128,
    x1: u64,
    x2: u64,
    q: u64,
) -> Result<u64> {
    if idx == sets.len() {
        let start = x1 as u128 + 1;
        let mut n = start + (r + m - start % m) % m;
        let mut c = 0u64;
        while n <= x2 as u128 {
            if (n as u64).gcd(&q) == 1 {
                c += 1;
            }
            n += m;
        }
        return Ok(c);
    }
    let (pk, ref residues) = sets[idx];
    let pk = pk as u128;
    let m2 = m
        .checked_mul(pk)
        .filter(|&v| v <= CRT_MODULUS_CAP)
        .ok_or(Error::Budget {
            required: u128::MAX,
            budget: CRT_MODULUS_CAP,
        })?;
    let inv = inv_mod(m % pk, pk);
    let mut total = 0u64;
    for &rp in residues {
        let delta = (rp as u128 + pk - r % pk) % pk;
        let r2 = r + m * (delta * inv % pk);
        total += crt_count(sets, idx + 1, m2, r2, x1, x2, q)?;
    }
    Ok(total)
}

fn squarefree_coprime_parts(d: u64, q: u64) -> Result<Vec<u64>> {
    if d == 0 {
        return Err(Error::domain("divisor d must be positive"));
    }
    if d.gcd(&q) != 1 {
        return Err(Error::domain(format!("d = {d} must be coprime to q = {q}")));
    }
    let ps = prime_factors_u64(d);
    if ps.iter().product::<u64>() != d {
        return Err(Error::domain(format!("d = {d} must be squarefree")));
    }
    Ok(ps)
}

/// #{X₁ < n ≤ X₂ : gcd(n,q) = 1 and p^k | n + h_i·q for some i, for every
/// prime p | d}. Requires d squarefree and coprime to q. The condition
/// holds exactly when d divides ξ(n), so Möbius inversion over d recovers
/// `s_q_direct`. Counted by CRT: the admissible classes mod d^k are the
/// products of the per-prime residue sets, U_d = ∏ u_p of them in total.
pub fn n_d(x1: u64, x2: u64, h: &ShiftTuple, d: u64) -> Result<u64> {
    if x1 > x2 {
        return Err(Error::domain(format!("invalid range ({x1}, {x2}]")));
    }
    let ps = squarefree_coprime_parts(d, h.q())?;
    if x1 == x2 {
        return Ok(0);
    }
    let shifts = scaled_shifts(h)?;
    shifted_window_bounds(x1, x2, &shifts)?;
    let mut sets = Vec::with_capacity(ps.len());
    for p in ps {
        match checked_pow_u64(p, h.k()) {
            // p^k beyond u64 divides no shifted value in range
            None => return Ok(0),
            Some(pk) => {
                let mut rs: Vec<u64> = shifts
                    .iter()
                    .map(|&s| (-(s as i128)).rem_euclid(pk as i128) as u64)
                    .collect();
                rs.sort_unstable();
                rs.dedup();
                sets.push((pk, rs));
            }
        }
    }
    crt_count(&sets, 0, 1, 0, x1, x2, h.q())
}

/// U_d = ∏_{p | d} u_p(**h**): the number of residue classes mod d^k that
/// `n_d` steps through. Same domain restrictions as `n_d`.
pub fn u_d(h: &ShiftTuple, d: u64) -> Result<u64> {
    let ps = squarefree_coprime_parts(d, h.q())?;
    let mut total = 1u64;
    for p in ps {
        total = total.checked_mul(u_p(h, p)?).ok_or(Error::Budget {
            required: u128::MAX,
            budget: u64::MAX as u128,
        })?;
    }
    Ok(total)
}

/// Split the Möbius inversion S = Σ_{(d,q)=1} μ(d)·N_d at the cutoff y:
/// S1 walks d ≤ y through `n_d`; S2 evaluates the d > y part exactly per n
/// from the prime radical of ξ(n), so S1 + S2 = `s_q_direct` holds as an
/// integer identity for every cutoff.
pub fn moebius_split(x1: u64, x2: u64, h: &ShiftTuple, y: f64) -> Result<(i64, i64)> {
    if !(y.is_finite() && y >= 1.0) {
        return Err(Error::domain(format!("cutoff y must be a finite real ≥ 1, got {y}")));
    }
    if x1 > x2 {
        return Err(Error::domain(format!("invalid range ({x1}, {x2}]")));
    }
    if x1 == x2 {
        return Ok((0, 0));
    }
    let shifts = scaled_shifts(h)?;
    shifted_window_bounds(x1, x2, &shifts)?;
    let range = x2 - x1;
    if range > MAX_RADICAL_WINDOW {
        return Err(Error::Capacity {
            needed: range,
            budget: MAX_RADICAL_WINDOW,
            unit: "radical entries",
        });
    }
    let ycap = y.floor() as u64;
    if ycap > MAX_MOBIUS_CUTOFF {
        return Err(Error::Budget {
            required: ycap as u128,
            budget: MAX_MOBIUS_CUTOFF as u128,
        });
    }
    let q = h.q();

    let mob = mobius_table(ycap as usize);
    let mut s1 = 0i64;
    for d in 1..=ycap {
        let mu = mob[d as usize];
        if mu == 0 || d.gcd(&q) != 1 {
            continue;
        }
        s1 += mu as i64 * n_d(x1, x2, h, d)? as i64;
    }

    // radical of ξ(n) per n: strike p across every shifted copy of the range
    let max_s = *shifts.iter().max().unwrap();
    let maxv = (x2 as i128 + max_s as i128) as u64;
    let root = kth_root_floor(maxv, h.k());
    let primes = primes_upto(root);
    let mut rad = vec![1u64; range as usize];
    let mut offs = shifts.clone();
    offs.sort_unstable();
    offs.dedup();
    for &p in &primes {
        let pk = checked_pow_u64(p, h.k()).unwrap() as i128;
        for &s in &offs {
            let lo_v = x1 as i128 + 1 + s as i128;
            let hi_v = x2 as i128 + s as i128;
            let mut v = lo_v + (pk - lo_v.rem_euclid(pk)) % pk;
            while v <= hi_v {
                let idx = (v - s as i128 - x1 as i128 - 1) as usize;
                if rad[idx] % p != 0 {
                    rad[idx] = rad[idx].checked_mul(p).ok_or(Error::Budget {
                        required: u128::MAX,
                        budget: u64::MAX as u128,
                    })?;
                }
                v += pk;
            }
        }
    }

    // d > y ⟺ d ≥ ycap + 1 over integer divisors
    let thr = (ycap + 1) as u128;
    let mut s2 = 0i64;
    let mut ps: Vec<u64> = Vec::new();
    for (i, &r) in rad.iter().enumerate() {
        let n = x1 + 1 + i as u64;
        if r == 1 || n.gcd(&q) != 1 {
            continue;
        }
        ps.clear();
        let mut val = r;
        for &p in &primes {
            if val % p == 0 {
                ps.push(p);
                val /= p;
                if val == 1 {
                    break;
                }
            }
        }
        debug_assert_eq!(val, 1, "radical must factor over the sieve primes");
        for mask in 1u32..1 << ps.len() {
            let mut prod = 1u128;
            for (bit, &p) in ps.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    prod *= p as u128;
                }
            }
            if prod >= thr {
                s2 += if mask.count_ones() % 2 == 1 { -1 } else { 1 };
            }
        }
    }
    Ok((s1, s2))
}

fn kth_power_divisors_into(v: u64, k: u32, out: &mut Vec<u64>) {
    out.push(1);
    let mut d = 2u64;
    loop {
        match checked_pow_u64(d, k) {
            Some(dk) if dk <= v => {
                if v % dk == 0 {
                    out.push(d);
                }
            }
            _ => break,
        }
        d += 1;
    }
}

fn admissible_products(lists: &[Vec<u64>], idx: usize, acc: u128, thr: u128) -> u64 {
    if idx == lists.len() {
        return (acc >= thr) as u64;
    }
    let mut total = 0;
    for &d in &lists[idx] {
        if d == 1 {
            total += admissible_products(lists, idx + 1, acc, thr);
            continue;
        }
        let rem = (acc % d as u128) as u64;
        if d.gcd(&rem) == 1 {
            total += admissible_products(lists, idx + 1, acc.saturating_mul(d as u128), thr);
        }
    }
    total
}

/// #{(n, d_1, …, d_j) : n ≤ x, d_i^k | n + h_i, d_i pairwise coprime,
/// ∏ d_i > y}, by enumerating the k-th-power divisors of each shifted value.
/// Shift values are used as plain offsets; the tuple's modulus plays no role
/// here. Entries must be distinct and nonnegative.
pub fn t_count(x: u64, h: &ShiftTuple, y: f64) -> Result<u64> {
    if h.distinct_count() != h.len() {
        return Err(Error::domain("shift entries must be distinct"));
    }
    if !(y.is_finite() && y >= 1.0) {
        return Err(Error::domain(format!("cutoff y must be a finite real ≥ 1, got {y}")));
    }
    if h.min() < 0 {
        return Err(Error::domain("shifts must be ≥ 0 so every n + h_i stays positive"));
    }
    if x == 0 {
        return Ok(0);
    }
    let k = h.k();
    let maxv = x
        .checked_add(h.max() as u64)
        .ok_or_else(|| Error::domain("x + max shift exceeds the u64 domain"))?;
    let root = kth_root_floor(maxv, k);
    let work = x as u128 * h.len() as u128 * (root as u128 + 1);
    if work > TUPLE_WORK_BUDGET {
        return Err(Error::Budget {
            required: work,
            budget: TUPLE_WORK_BUDGET,
        });
    }
    let thr = (y.floor() as u128).saturating_add(1);
    let shifts: Vec<u64> = h.values().iter().map(|&v| v as u64).collect();
    let total = chunk_blocks(1, x + 1, BLOCK)
        .par_iter()
        .map(|&(a, b)| {
            let mut lists: Vec<Vec<u64>> = vec![Vec::new(); shifts.len()];
            let mut c = 0u64;
            for n in a..b {
                for (i, &s) in shifts.iter().enumerate() {
                    lists[i].clear();
                    kth_power_divisors_into(n + s, k, &mut lists[i]);
                }
                c += admissible_products(&lists, 0, 1, thr);
            }
            c
        })
        .sum();
    Ok(total)
}

/// Exact count next to its predicted main term A_q(**h**)·(X₂−X₁), the
/// residual between them, and the residual normalized by X^{2/(k+1)} with
/// X = max_i(X₂ + h_i·q).
#[derive(Debug, Clone)]
pub struct TupleCountReport {
    pub x1: u64,
    pub x2: u64,
    pub q: u64,
    pub k: u32,
    pub shifts: Vec<i64>,
    pub exact: u64,
    pub main: Enclosure,
    pub residual: Enclosure,
    pub normalized: f64,
    /// Normalization scale X = max_i(X₂ + h_i·q).
    pub x_norm: u64,
    pub tol: f64,
}

impl TupleCountReport {
    pub fn to_json(&self) -> Value {
        json!({
            "x1": self.x1,
            "x2": self.x2,
            "q": self.q,
            "k": self.k,
            "shifts": self.shifts,
            "exact": self.exact,
            "main": self.main.value.to_decimal_string(),
            "main_err": self.main.err.to_decimal_string(),
            "main_f64": self.main.to_f64(),
            "residual_f64": self.residual.to_f64(),
            "normalized": self.normalized,
            "x_norm": self.x_norm,
            "tol": self.tol,
        })
    }
}

/// Assemble the exact count, the main term at certified precision (the
/// singular series is requested tightly enough that the scaled error stays
/// within `tol`), and the normalized residual driving the acceptance grids.
pub fn residual_report(x1: u64, x2: u64, h: &ShiftTuple, tol: f64) -> Result<TupleCountReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let exact = s_q_direct(x1, x2, h)?;
    let range = x2 - x1;
    let aq = singular_aqh(h, tol / range.max(1) as f64)?;
    let main = aq.mul_int(range);
    let residual = Enclosure::exact(Dec::from_int(exact, main.scale())).sub(&main);
    let x_norm = (x2 as i128 + h.max() as i128 * h.q() as i128).max(0) as u64;
    let normalized = if range == 0 || x_norm == 0 {
        0.0
    } else {
        residual.to_f64() / (x_norm as f64).powf(2.0 / (h.k() as f64 + 1.0))
    };
    Ok(TupleCountReport {
        x1,
        x2,
        q: h.q(),
        k: h.k(),
        shifts: h.values().to_vec(),
        exact,
        main,
        residual,
        normalized,
        x_norm,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::phi_u64;
    use crate::sieve::{count_kfree, is_kfree, xi_value};
    use crate::singular::zeta_inverse;
    use proptest::prelude::*;

    fn tuple(values: &[i64], k: u32, q: u64) -> ShiftTuple {
        ShiftTuple::new(values.to_vec(), k, q).unwrap()
    }

    /// Reference count straight from the definition.
    fn brute_count(x1: u64, x2: u64, h: &ShiftTuple) -> u64 {
        let mut c = 0;
        for n in x1 + 1..=x2 {
            if n.gcd(&h.q()) != 1 {
                continue;
            }
            let ok = h.values().iter().all(|&v| {
                let shifted = n as i128 + v as i128 * h.q() as i128;
                is_kfree(shifted as u64, h.k()).unwrap()
            });
            if ok {
                c += 1;
            }
        }
        c
    }

    #[test]
    fn direct_count_matches_kfree_prefix() {
        let h = tuple(&[0], 2, 1);
        assert_eq!(s_q_direct(0, 10, &h).unwrap(), 7);
        assert_eq!(s_q_direct(0, 10, &h).unwrap(), count_kfree(2, 10).unwrap());
        assert_eq!(s_q_direct(5, 5, &h).unwrap(), 0);
        assert_eq!(s_q_direct(0, 10_000, &h).unwrap(), count_kfree(2, 10_000).unwrap());
    }

    #[test]
    fn direct_count_q2_window_brute() {
        // n ≤ 20 odd with n and n + 2 squarefree
        let h = tuple(&[0, 1], 2, 2);
        assert_eq!(s_q_direct(0, 20, &h).unwrap(), brute_count(0, 20, &h));
        assert_eq!(s_q_direct(0, 20, &h).unwrap(), 8);
    }

    #[test]
    fn direct_count_frozen_squarefree_million() {
        assert_eq!(s_q_direct(0, 1_000_000, &tuple(&[0, 1, 2], 2, 1)).unwrap(), 125_476);
        assert_eq!(s_q_direct(0, 1_000_000, &tuple(&[0, 3, 17], 2, 13)).unwrap(), 117_908);
        assert_eq!(s_q_direct(0, 1_000_000, &tuple(&[0, 5], 2, 3)).unwrap(), 276_550);
    }

    #[test]
    fn direct_count_frozen_cubefree() {
        assert_eq!(s_q_direct(0, 1_000_000, &tuple(&[0, 3, 17], 3, 13)).unwrap(), 494_113);
        assert_eq!(s_q_direct(0, 100_000, &tuple(&[0, 1, 2], 3, 1)).unwrap(), 53_457);
    }

    #[test]
    fn direct_count_rejects_negative_shifted_arguments() {
        let h = tuple(&[-1, 0], 2, 1);
        assert!(matches!(s_q_direct(0, 10, &h), Err(Error::Domain(_))));
        // same tuple is fine once the range starts late enough
        assert_eq!(s_q_direct(5, 10, &h).unwrap(), brute_count(5, 10, &h));
    }

    /// d | ξ(n) straight from the definition: every p | d has p^k dividing
    /// some shifted value.
    fn nd_brute(x1: u64, x2: u64, h: &ShiftTuple, d: u64) -> u64 {
        let ps = prime_factors_u64(d);
        let mut c = 0;
        for n in x1 + 1..=x2 {
            if n.gcd(&h.q()) != 1 {
                continue;
            }
            let ok = ps.iter().all(|&p| {
                let pk = checked_pow_u64(p, h.k()).unwrap() as i128;
                h.values()
                    .iter()
                    .any(|&v| (n as i128 + v as i128 * h.q() as i128).rem_euclid(pk) == 0)
            });
            if ok {
                c += 1;
            }
        }
        c
    }

    #[test]
    fn nd_direct_examples() {
        // 4 | n among n ≤ 20
        assert_eq!(n_d(0, 20, &tuple(&[0], 2, 1), 2).unwrap(), 5);
        // empty divisibility condition: d = 1 counts the coprime classes
        assert_eq!(n_d(0, 20, &tuple(&[0], 2, 3), 1).unwrap(), 14);
        for d in [1u64, 2, 6, 10, 15, 30] {
            let h = tuple(&[0, 1], 2, 1);
            assert_eq!(n_d(0, 300, &h, d).unwrap(), nd_brute(0, 300, &h, d), "d = {d}");
        }
        for d in [1u64, 2, 5, 7, 35] {
            let h = tuple(&[0, 2, 5], 2, 3);
            assert_eq!(n_d(0, 400, &h, d).unwrap(), nd_brute(0, 400, &h, d), "d = {d}");
        }
        // p^k out of u64 range divides nothing
        assert_eq!(n_d(0, 1000, &tuple(&[0], 40, 1), 3).unwrap(), 0);
    }

    #[test]
    fn nd_rejects_bad_divisors() {
        let h = tuple(&[0, 1], 2, 3);
        assert!(matches!(n_d(0, 100, &h, 4), Err(Error::Domain(_))));
        assert!(matches!(n_d(0, 100, &h, 6), Err(Error::Domain(_))));
        assert!(matches!(n_d(0, 100, &h, 0), Err(Error::Domain(_))));
        assert!(matches!(u_d(&h, 12), Err(Error::Domain(_))));
        assert!(matches!(u_d(&h, 15), Err(Error::Domain(_))));
    }

    #[test]
    fn ud_examples() {
        // h = (0,1): residues {0,1} mod 4 and mod 9
        assert_eq!(u_d(&tuple(&[0, 1], 2, 1), 6).unwrap(), 4);
        assert_eq!(u_d(&tuple(&[0, 1], 2, 1), 1).unwrap(), 1);
        let h = tuple(&[0, 3, 17], 2, 13);
        let want = u_p(&h, 2).unwrap() * u_p(&h, 5).unwrap();
        assert_eq!(u_d(&h, 10).unwrap(), want);
    }

    #[test]
    fn nd_density_shape() {
        // |N_d − (φ(q)/q)(U_d/d^k)(X₂−X₁)| ≤ c·τ(q)·U_d with modest fitted c
        let tau = |q: u64| (1..=q).filter(|d| q % d == 0).count() as f64;
        let mut fitted: f64 = 0.0;
        let configs: [(u64, Vec<i64>, Vec<u64>); 3] = [
            (1, vec![0, 1, 4], vec![2, 3, 5, 6, 7, 30]),
            (5, vec![0, 3], vec![2, 3, 6, 77]),
            (6, vec![0, 2], vec![5, 7, 35]),
        ];
        for (q, shifts, ds) in configs {
            let h = tuple(&shifts, 2, q);
            for d in ds {
                let nd = n_d(0, 50_000, &h, d).unwrap() as f64;
                let ud = u_d(&h, d).unwrap() as f64;
                let dk = (d as f64).powi(2);
                let main = phi_u64(q) as f64 / q as f64 * ud / dk * 50_000.0;
                let c = (nd - main).abs() / (tau(q) * ud);
                fitted = fitted.max(c);
            }
        }
        println!("density-shape fitted constant: {fitted:.3}");
        assert!(fitted <= 100.0, "density shape constant {fitted} out of range");
    }

    #[test]
    fn moebius_split_identity_examples() {
        let h = tuple(&[0, 1], 2, 1);
        let s = s_q_direct(0, 1000, &h).unwrap() as i64;
        for y in [1.0, 10.0, 31.62, 999.9, 1e6] {
            let (s1, s2) = moebius_split(0, 1000, &h, y).unwrap();
            assert_eq!(s1 + s2, s, "cutoff y = {y}");
        }
        // only d = 1 sits below the cutoff
        let (s1, _) = moebius_split(0, 1000, &h, 1.0).unwrap();
        assert_eq!(s1, n_d(0, 1000, &h, 1).unwrap() as i64);
        // cutoff above every ξ(n) leaves nothing uphill
        let (_, s2) = moebius_split(0, 1000, &h, 1e6).unwrap();
        assert_eq!(s2, 0);
    }

    #[test]
    fn moebius_split_identity_q3_cubefree() {
        let h = tuple(&[0, 5], 3, 3);
        let s = s_q_direct(0, 2000, &h).unwrap() as i64;
        for y in [1.0, 2.5, 8.0, 64.0, 2.0e5] {
            let (s1, s2) = moebius_split(0, 2000, &h, y).unwrap();
            assert_eq!(s1 + s2, s, "cutoff y = {y}");
        }
    }

    #[test]
    fn moebius_split_guards() {
        let h = tuple(&[0, 1], 2, 1);
        assert!(matches!(moebius_split(0, 100, &h, 0.5), Err(Error::Domain(_))));
        assert!(matches!(moebius_split(0, 100, &h, f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(moebius_split(0, 100, &h, 1e9), Err(Error::Budget { .. })));
        assert_eq!(moebius_split(7, 7, &h, 3.0).unwrap(), (0, 0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn split_agrees_with_direct_count(
            x1 in 0u64..100,
            len in 0u64..400,
            q in 1u64..7,
            k in 2u32..4,
            raw in proptest::collection::vec(0i64..7, 1..4),
            y in 1.0f64..60.0,
        ) {
            let x2 = x1 + len;
            let h = ShiftTuple::new(raw, k, q).unwrap();
            let s = s_q_direct(x1, x2, &h).unwrap();
            prop_assert_eq!(s, brute_count(x1, x2, &h));
            let (s1, s2) = moebius_split(x1, x2, &h, y).unwrap();
            prop_assert_eq!(s1 + s2, s as i64);
        }
    }

    #[test]
    fn xi_equivalence() {
        let h = tuple(&[0, 1], 2, 1);
        let via_xi = (1..=10_000u64)
            .filter(|&n| xi_value(n, &h).unwrap() == 1)
            .count() as u64;
        assert_eq!(s_q_direct(0, 10_000, &h).unwrap(), via_xi);

        let h = tuple(&[0, 2, 5], 2, 3);
        let via_xi = (1..=2000u64)
            .filter(|&n| n.gcd(&3) == 1 && xi_value(n, &h).unwrap() == 1)
            .count() as u64;
        assert_eq!(s_q_direct(0, 2000, &h).unwrap(), via_xi);
    }

    /// Reference tuple counter straight from the definition.
    fn tcount_brute(x: u64, shifts: &[i64], y: f64, k: u32) -> u64 {
        let mut total = 0;
        for n in 1..=x {
            let lists: Vec<Vec<u64>> = shifts
                .iter()
                .map(|&s| {
                    let v = (n as i128 + s as i128) as u64;
                    let mut l = Vec::new();
                    kth_power_divisors_into(v, k, &mut l);
                    l
                })
                .collect();
            let mut stack = vec![(0usize, 1u128)];
            while let Some((idx, acc)) = stack.pop() {
                if idx == lists.len() {
                    if acc as f64 > y {
                        total += 1;
                    }
                    continue;
                }
                for &d in &lists[idx] {
                    let ok = d == 1 || d.gcd(&((acc % d as u128) as u64)) == 1;
                    if ok {
                        stack.push((idx + 1, acc * d as u128));
                    }
                }
            }
        }
        total
    }

    #[test]
    fn tcount_matches_brute_force() {
        let h = tuple(&[0, 1], 2, 1);
        assert_eq!(t_count(100, &h, 1.0).unwrap(), tcount_brute(100, &[0, 1], 1.0, 2));
        let h = tuple(&[0, 1, 2], 2, 1);
        assert_eq!(t_count(60, &h, 2.0).unwrap(), tcount_brute(60, &[0, 1, 2], 2.0, 2));
        let h = tuple(&[0, 1], 3, 1);
        assert_eq!(t_count(200, &h, 1.5).unwrap(), tcount_brute(200, &[0, 1], 1.5, 3));
    }

    #[test]
    fn tcount_trivial_monotone_and_guards() {
        let h = tuple(&[0, 1], 2, 1);
        // (d₁d₂)² ≤ n(n+1) ≤ 50·51 forces d₁d₂ ≤ 50
        assert_eq!(t_count(50, &h, 50.0).unwrap(), 0);
        let mut prev = u64::MAX;
        for y in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let t = t_count(300, &h, y).unwrap();
            assert!(t <= prev, "t_count must be nonincreasing in y");
            prev = t;
        }
        assert!(matches!(t_count(10, &tuple(&[1, 1], 2, 1), 1.0), Err(Error::Domain(_))));
        assert!(matches!(t_count(10, &tuple(&[-2, 0], 2, 1), 1.0), Err(Error::Domain(_))));
        assert!(matches!(t_count(10, &h, 0.0), Err(Error::Domain(_))));
        assert!(matches!(t_count(u64::MAX / 4, &h, 1.0), Err(Error::Budget { .. })));
    }

    #[test]
    fn tcount_envelope_fitted_constant() {
        // T ≤ c·x^ε(X·y^{1−k} + X^{2/(k+1)}) with X = x + max h, ε = 0.05
        const EPS: f64 = 0.05;
        let mut fitted: f64 = 0.0;
        let mut check = |x: u64, shifts: &[i64], k: u32, y: f64| {
            let h = tuple(shifts, k, 1);
            let t = t_count(x, &h, y).unwrap() as f64;
            let big_x = (x + h.max() as u64) as f64;
            let bound = (x as f64).powf(EPS)
                * (big_x * y.powf(1.0 - k as f64) + big_x.powf(2.0 / (k as f64 + 1.0)));
            fitted = fitted.max(t / bound);
        };
        for &x in &[100u64, 1000, 10_000] {
            for shifts in [&[0i64, 1][..], &[0, 1, 2], &[0, 2, 5]] {
                let xf = x as f64;
                for y in [1.0, xf.sqrt(), xf.powf(2.0 / 3.0)] {
                    check(x, shifts, 2, y);
                }
            }
        }
        check(100_000, &[0, 1, 2], 2, (100_000f64).sqrt());
        check(10_000, &[0, 1], 3, 10.0);
        println!("divisor-tuple envelope fitted constant: {fitted:.3}");
        assert!(fitted <= 100.0, "envelope constant {fitted} out of range");
    }

    #[test]
    fn residual_report_prefix_reduction() {
        // single zero shift at q = 1 reduces to the k-free counting residual
        let rep = residual_report(0, 10_000, &tuple(&[0], 2, 1), 1e-9).unwrap();
        assert_eq!(rep.exact, 6083);
        assert_eq!(rep.exact, count_kfree(2, 10_000).unwrap());
        let zinv = zeta_inverse(2, 1e-15).unwrap().to_f64();
        let expect = 6083.0 - zinv * 10_000.0;
        assert!((rep.residual.to_f64() - expect).abs() < 1e-6);
        assert_eq!(rep.x_norm, 10_000);

        let empty = residual_report(0, 0, &tuple(&[0], 2, 1), 1e-9).unwrap();
        assert_eq!(empty.exact, 0);
        assert_eq!(empty.normalized, 0.0);
        assert!(empty.main.to_f64().abs() < 1e-30);
    }

    #[test]
    fn residual_report_normalized_stays_small() {
        let rep = residual_report(0, 100_000, &tuple(&[0, 1], 2, 3), 1e-9).unwrap();
        assert!(rep.normalized.abs() <= 5.0, "normalized residual {}", rep.normalized);
        assert_eq!(rep.x_norm, 100_003);
        // residual + main reassembles the exact count bit-for-bit
        let back = rep.residual.add(&rep.main);
        assert_eq!(back.value, Dec::from_int(rep.exact, back.scale()));
        let js = rep.to_json();
        assert_eq!(js["exact"], rep.exact);
        assert_eq!(js["q"], 3);
        assert!(js["normalized"].is_number());
    }
}
