//! Moments of k-free counting discrepancies, computed cancellation-free:
//! the sieves produce exact integer power sums Σ N(n,H)^j (short intervals)
//! and Σ*_a count(X,q,a)^j (reduced progressions), and the single irrational
//! compensator — ζ(k)^{-1}H or A_q·X/φ(q) — enters once, through the
//! binomial expansion of the ℓ-th centered power. The same power sums feed
//! the exact combinatorial identities that tie both moment families to
//! shifted tuple counts.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::Zero;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::arith::{binomial_u128, phi_u64};
use crate::precision::{digits_for_tol, zeta_inv, Enclosure};
use crate::shift::ShiftTuple;
use crate::sieve::{sieve_range, SieveConfig};
use crate::singular::{b_j, density_aq, AqhEvaluator};
use crate::{Error, Rat, Result};

/// Largest exponent a power-sum table will carry.
pub const MAX_ELL: u32 = 8;

/// Default table depth when the caller does not pin one.
pub const DEFAULT_ELL_MAX: u32 = 6;

/// Work ceiling for the identity checks, in word/element operations.
const IDENTITY_WORK_BUDGET: u128 = 5_000_000_000;

/// Ceiling on the number of shift tuples walked by the progression checks.
const TUPLE_GRID_BUDGET: u128 = 200_000;

/// Exact power sums Σ v^j for j = 0..=ell_max; entry 0 counts the summands.
/// Entries are unbounded integers, so the table is exact at any scale.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerSums {
    sums: Vec<BigUint>,
}

impl PowerSums {
    pub fn new(ell_max: u32) -> Result<Self> {
        if ell_max > MAX_ELL {
            return Err(Error::domain(format!("power-sum depth {ell_max} exceeds {MAX_ELL}")));
        }
        Ok(PowerSums {
            sums: vec![BigUint::zero(); ell_max as usize + 1],
        })
    }

    pub fn ell_max(&self) -> u32 {
        self.sums.len() as u32 - 1
    }

    pub fn sum(&self, j: u32) -> &BigUint {
        &self.sums[j as usize]
    }

    pub fn sums(&self) -> &[BigUint] {
        &self.sums
    }

    fn merge(mut self, other: PowerSums) -> PowerSums {
        assert_eq!(self.sums.len(), other.sums.len());
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            *a += b;
        }
        self
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.sums
                .iter()
                .map(|s| Value::String(s.to_str_radix(10)))
                .collect(),
        )
    }
}

/// Streaming accumulator: u128 lanes for small values, flushed to the big
/// integers often enough that no overflow is possible; large values go to
/// the big integers directly.
struct Acc {
    lanes: Vec<u128>,
    pending: u32,
    fast_max: u64,
    out: PowerSums,
}

const FLUSH_EVERY: u32 = 4096;

impl Acc {
    fn new(ell_max: u32) -> Result<Self> {
        let out = PowerSums::new(ell_max)?;
        // fast path keeps v^ell ≤ 2^112 and ≤ 4096 pending adds per lane
        let fast_max = match 112u32.checked_div(ell_max) {
            None => u64::MAX,
            Some(shift) => 1u64 << shift.min(63),
        };
        Ok(Acc {
            lanes: vec![0u128; ell_max as usize + 1],
            pending: 0,
            fast_max,
            out,
        })
    }

    fn push(&mut self, v: u64) {
        if v <= self.fast_max {
            let mut pw = 1u128;
            for lane in self.lanes.iter_mut() {
                *lane += pw;
                pw *= v as u128;
            }
            self.pending += 1;
            if self.pending == FLUSH_EVERY {
                self.flush();
            }
        } else {
            let big = BigUint::from(v);
            for (j, s) in self.out.sums.iter_mut().enumerate() {
                *s += big.pow(j as u32);
            }
        }
    }

    fn flush(&mut self) {
        for (lane, s) in self.lanes.iter_mut().zip(self.out.sums.iter_mut()) {
            if *lane != 0 {
                *s += BigUint::from(*lane);
                *lane = 0;
            }
        }
        self.pending = 0;
    }

    fn finish(mut self) -> PowerSums {
        self.flush();
        self.out
    }
}

/// Power sums of the sliding window count N(n,H) = #{k-free in [n, n+H)}
/// for 0 < n ≤ x. One sieve pass; each block re-anchors its own window
/// count and slides bit by bit; reduction is exact.
pub fn window_counts(x: u64, h: u64, k: u32, ell_max: u32) -> Result<PowerSums> {
    if x == 0 || h == 0 {
        return Err(Error::domain(format!("window counts need x ≥ 1 and H ≥ 1, got x={x}, H={h}")));
    }
    if ell_max > MAX_ELL {
        return Err(Error::domain(format!("power-sum depth {ell_max} exceeds {MAX_ELL}")));
    }
    let win = sieve_range(&SieveConfig::new(k, 1, x + h)?)?;
    let blocks: Vec<(u64, u64)> = {
        let mut v = Vec::new();
        let mut a = 1u64;
        let step = 1u64 << 16;
        while a <= x {
            let b = (a + step - 1).min(x);
            v.push((a, b));
            a = b + 1;
        }
        v
    };
    let total = blocks
        .par_iter()
        .map(|&(a, b)| {
            let mut acc = Acc::new(ell_max).expect("depth validated");
            let mut n_count = win.count_range(a, a + h);
            for n in a..=b {
                acc.push(n_count);
                if n < b {
                    // slide [n, n+H) → [n+1, n+1+H)
                    n_count -= win.get(n) as u64;
                    n_count += win.get(n + h) as u64;
                }
            }
            acc.finish()
        })
        .reduce(
            || PowerSums::new(ell_max).expect("depth validated"),
            PowerSums::merge,
        );
    Ok(total)
}

/// Short-interval or progression flavor of a moment report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    ShortInterval,
    Progression,
}

/// A centered ℓ-th moment together with the exact power sums it was
/// assembled from; reassembling at any precision reproduces the value
/// within the stated error.
#[derive(Debug, Clone)]
pub struct MomentReport {
    pub kind: MomentKind,
    /// Range length x (short intervals) or X (progressions).
    pub x: u64,
    /// Window length H (short intervals) or modulus q (progressions).
    pub param: u64,
    pub ell: u32,
    pub k: u32,
    pub powersums: PowerSums,
    pub moment: Enclosure,
    /// moment / (x·H^{ℓ/2k}) resp. moment / (φ(q)·(X/q)^{ℓ/2k}).
    pub normalized: f64,
    pub tol: f64,
}

impl MomentReport {
    pub fn to_json(&self) -> Value {
        json!({
            "kind": match self.kind {
                MomentKind::ShortInterval => "short",
                MomentKind::Progression => "ap",
            },
            "x": self.x,
            "param": self.param,
            "ell": self.ell,
            "k": self.k,
            "powersums": self.powersums.to_json(),
            "moment": self.moment.value.to_decimal_string(),
            "moment_err": self.moment.err.to_decimal_string(),
            "moment_f64": self.moment.to_f64(),
            "normalized": self.normalized,
            "tol": self.tol,
        })
    }
}

fn check_moment_args(ps: &PowerSums, ell: u32, tol: f64) -> Result<()> {
    if ell == 0 {
        return Err(Error::domain("moment order ell must be ≥ 1"));
    }
    if ell > ps.ell_max() {
        return Err(Error::domain(format!(
            "moment order {ell} exceeds stored power-sum depth {}",
            ps.ell_max()
        )));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Σ_j C(ℓ,j)·(−compensator)^{ℓ−j}·S_j with exact S_j; all arithmetic at a
/// working scale wide enough that the certified error lands under `tol`.
fn binomial_combine(
    ps: &PowerSums,
    ell: u32,
    compensator: &Enclosure,
) -> Enclosure {
    let scale = compensator.scale();
    let mut total = Enclosure::exact_zero(scale);
    for j in 0..=ell {
        let mut coeff = BigInt::from(binomial_u128(ell, j));
        if (ell - j) % 2 == 1 {
            coeff = -coeff;
        }
        let term = compensator
            .powi(ell - j)
            .mul_int(coeff * BigInt::from(ps.sum(j).clone()));
        total = total.add(&term);
    }
    total
}

fn ensure_tol(moment: Enclosure, tol: f64) -> Result<Enclosure> {
    let achieved = moment.err_f64();
    if achieved > tol {
        return Err(Error::Precision {
            requested: tol,
            achieved,
        });
    }
    Ok(moment)
}

/// Assemble 𝔐(x,H,ℓ) from stored power sums: compensator ζ(k)^{-1}·H.
pub fn assemble_short(
    ps: &PowerSums,
    x: u64,
    h: u64,
    ell: u32,
    k: u32,
    tol: f64,
) -> Result<MomentReport> {
    check_moment_args(ps, ell, tol)?;
    let mag = ((x.max(1) as f64).log10() + ell as f64 * ((h + 1) as f64).log10()).ceil() as u32;
    let scale = digits_for_tol(tol) + mag + 10;
    let compensator = zeta_inv(k, scale).mul_int(h);
    let moment = ensure_tol(binomial_combine(ps, ell, &compensator), tol)?;
    let normalized =
        moment.to_f64() / (x as f64 * (h as f64).powf(ell as f64 / (2.0 * k as f64)));
    Ok(MomentReport {
        kind: MomentKind::ShortInterval,
        x,
        param: h,
        ell,
        k,
        powersums: ps.clone(),
        moment,
        normalized,
        tol,
    })
}

/// 𝔐(x,H,ℓ): power sums by sliding sieve window, then one assembly.
pub fn short_moment(x: u64, h: u64, ell: u32, k: u32, tol: f64) -> Result<MomentReport> {
    let ps = window_counts(x, h, k, ell)?;
    assemble_short(&ps, x, h, ell, k, tol)
}

/// Exact per-class k-free counts #{n ≤ X : n ≡ a (q), n k-free} over the
/// reduced classes a.
#[derive(Debug, Clone)]
pub struct ClassCounts {
    pub x: u64,
    pub q: u64,
    pub k: u32,
    counts: Vec<(u64, u64)>,
}

impl ClassCounts {
    /// (a, count) pairs, reduced residues ascending.
    pub fn counts(&self) -> &[(u64, u64)] {
        &self.counts
    }

    pub fn count_for(&self, a: u64) -> Option<u64> {
        self.counts
            .binary_search_by_key(&a, |&(r, _)| r)
            .ok()
            .map(|i| self.counts[i].1)
    }

    /// Total over the reduced classes: k-free n ≤ X coprime to q.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| c).sum()
    }

    /// Σ*_a count^j for j = 0..=ell_max; entry 0 is φ(q).
    pub fn power_sums(&self, ell_max: u32) -> Result<PowerSums> {
        let mut acc = Acc::new(ell_max)?;
        for &(_, c) in &self.counts {
            acc.push(c);
        }
        Ok(acc.finish())
    }
}

/// One sieve pass binning k-free n ≤ X into residue classes mod q, keeping
/// the reduced ones.
pub fn ap_counts(x: u64, q: u64, k: u32) -> Result<ClassCounts> {
    if x == 0 || q == 0 {
        return Err(Error::domain(format!("class counts need X ≥ 1 and q ≥ 1, got X={x}, q={q}")));
    }
    let win = sieve_range(&SieveConfig::new(k, 1, x + 1)?)?;
    let mut per_class = vec![0u64; q as usize];
    for n in 1..=x {
        if win.get(n) {
            per_class[(n % q) as usize] += 1;
        }
    }
    let counts: Vec<(u64, u64)> = (0..q)
        .filter(|&a| a.gcd(&q) == 1)
        .map(|a| (a, per_class[a as usize]))
        .collect();
    Ok(ClassCounts { x, q, k, counts })
}

/// Assemble 𝓜(X,q,ℓ) from stored class power sums: compensator A_q·X/φ(q).
pub fn assemble_progression(
    ps: &PowerSums,
    x: u64,
    q: u64,
    ell: u32,
    k: u32,
    tol: f64,
) -> Result<MomentReport> {
    check_moment_args(ps, ell, tol)?;
    let mag = (ell as f64 * ((x + 2) as f64).log10()).ceil() as u32;
    let scale = digits_for_tol(tol) + mag + 10;
    let phi = phi_u64(q);
    // A_q tight enough that scaling by (X/φ)^ℓ cannot surface above tol
    let aq = density_aq(q, k, 10f64.powi(-((scale as i32) - 2)))?
        .rescale(scale)
        .mul_int(x)
        .mul_ratio(1, phi as i64);
    let moment = ensure_tol(binomial_combine(ps, ell, &aq), tol)?;
    let normalized = moment.to_f64()
        / (phi as f64 * (x as f64 / q as f64).powf(ell as f64 / (2.0 * k as f64)));
    Ok(MomentReport {
        kind: MomentKind::Progression,
        x,
        param: q,
        ell,
        k,
        powersums: ps.clone(),
        moment,
        normalized,
        tol,
    })
}

/// 𝓜(X,q,ℓ) over the reduced classes mod q.
pub fn ap_moment(x: u64, q: u64, ell: u32, k: u32, tol: f64) -> Result<MomentReport> {
    let ps = ap_counts(x, q, k)?.power_sums(ell)?;
    assemble_progression(&ps, x, q, ell, k, tol)
}

/// Side-by-side exact integers from two independent counting routes.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub ok: bool,
    /// Power-sum route, j = 1..=ell.
    pub lhs: Vec<BigUint>,
    /// Tuple-count route, j = 1..=ell.
    pub rhs: Vec<BigUint>,
    pub x: u64,
    pub param: u64,
    pub ell: u32,
    pub k: u32,
}

impl IdentityReport {
    pub fn to_json(&self) -> Value {
        json!({
            "ok": self.ok,
            "lhs": self.lhs.iter().map(|v| v.to_str_radix(10)).collect::<Vec<_>>(),
            "rhs": self.rhs.iter().map(|v| v.to_str_radix(10)).collect::<Vec<_>>(),
            "x": self.x,
            "param": self.param,
            "ell": self.ell,
            "k": self.k,
        })
    }
}

/// j!/∏ multiplicities! for a nondecreasing index tuple: the number of
/// ordered rearrangements it stands for.
fn multiset_perms(idx: &[u64]) -> u128 {
    let fact = |n: u128| (1..=n).product::<u128>();
    let mut total = fact(idx.len() as u128);
    let mut run = 1u128;
    for i in 1..idx.len() {
        if idx[i] == idx[i - 1] {
            run += 1;
            total /= run;
        } else {
            run = 1;
        }
    }
    total
}

/// Advance a nondecreasing tuple over {0, …, limit−1}; false at the end.
fn next_sorted_tuple(idx: &mut [u64], limit: u64) -> bool {
    for pos in (0..idx.len()).rev() {
        if idx[pos] + 1 < limit {
            let v = idx[pos] + 1;
            for slot in idx[pos..].iter_mut() {
                *slot = v;
            }
            return true;
        }
    }
    false
}

/// Exact identity Σ_{0<n≤x} N(n,H)^j = Σ_{0≤h_1,…,h_j<H} #{n : all n+h_i
/// k-free}, for every j ≤ ell. The right side collapses ordered tuples to
/// sorted ones with multinomial weights and counts by word-level AND.
pub fn binomial_identity_check(x: u64, h: u64, ell: u32, k: u32) -> Result<IdentityReport> {
    if ell == 0 || ell > MAX_ELL {
        return Err(Error::domain(format!("ell must be in 1..={MAX_ELL}, got {ell}")));
    }
    if x == 0 || h == 0 {
        return Err(Error::domain("identity check needs x ≥ 1 and H ≥ 1"));
    }
    let mut work = 0u128;
    for j in 1..=ell {
        // clamped estimate: beyond the clamp the budget rejects regardless
        let multisets = binomial_u128(h.min(4096) as u32 + j - 1, j);
        work = work.saturating_add(
            multisets
                .saturating_mul(x as u128 / 64 + 1)
                .saturating_mul(j as u128),
        );
    }
    if work > IDENTITY_WORK_BUDGET {
        return Err(Error::Budget {
            required: work,
            budget: IDENTITY_WORK_BUDGET,
        });
    }
    let ps = window_counts(x, h, k, ell)?;
    let win = sieve_range(&SieveConfig::new(k, 1, x + h)?)?;
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut ok = true;
    let mut shifts: Vec<u64> = Vec::new();
    for j in 1..=ell {
        let mut total = BigUint::zero();
        let mut partial = 0u128;
        let mut idx = vec![0u64; j as usize];
        loop {
            shifts.clear();
            shifts.extend_from_slice(&idx);
            shifts.dedup();
            let c = win.count_shifted_intersection(1, x + 1, &shifts) as u128;
            partial += multiset_perms(&idx) * c;
            if partial > u128::MAX / 2 {
                total += BigUint::from(partial);
                partial = 0;
            }
            if !next_sorted_tuple(&mut idx, h) {
                break;
            }
        }
        total += BigUint::from(partial);
        ok &= *ps.sum(j) == total;
        lhs.push(ps.sum(j).clone());
        rhs.push(total);
    }
    Ok(IdentityReport {
        ok,
        lhs,
        rhs,
        x,
        param: h,
        ell,
        k,
    })
}

/// ∩_i (−h_i·q, X − h_i·q] as an integer interval (X₁, X₂]; `None` when the
/// shifted copies of (0, X] fail to overlap.
pub fn interval_i(x: u64, h: &ShiftTuple) -> Option<(i64, i64)> {
    let q = h.q() as i128;
    let x1 = -(h.min() as i128) * q;
    let x2 = x as i128 - h.max() as i128 * q;
    if x1 < x2 {
        Some((x1 as i64, x2 as i64))
    } else {
        None
    }
}

/// Odometer over the full grid f ∈ [−F, F]^len; false at the end.
fn next_grid_tuple(f: &mut [i64], bound: i64) -> bool {
    for pos in (0..f.len()).rev() {
        if f[pos] < bound {
            f[pos] += 1;
            for slot in f[pos + 1..].iter_mut() {
                *slot = -bound;
            }
            return true;
        }
    }
    false
}

/// Exact identity Σ*_a count(X,q,a)^i = 𝒮_i(X;q) for every i ≤ j, where
/// 𝒮_i re-counts the i-fold products over tuples n ≡ a (q) through the
/// change of variables n_t = n + f_t·q and the overlap window I(X,q;(f,0)).
pub fn sj_identity_check(x: u64, q: u64, j: u32, k: u32) -> Result<IdentityReport> {
    if j == 0 || j > MAX_ELL {
        return Err(Error::domain(format!("j must be in 1..={MAX_ELL}, got {j}")));
    }
    if x == 0 || q == 0 {
        return Err(Error::domain("identity check needs X ≥ 1 and q ≥ 1"));
    }
    let f_bound = (x / q) as i64;
    let grid = 2 * f_bound as u128 + 1;
    let mut work = 0u128;
    let mut tuples = 1u128;
    for _ in 1..j {
        tuples = tuples.saturating_mul(grid);
        work += tuples;
    }
    if tuples > TUPLE_GRID_BUDGET || work.saturating_mul(x as u128) > IDENTITY_WORK_BUDGET {
        return Err(Error::Budget {
            required: work.saturating_mul(x as u128),
            budget: IDENTITY_WORK_BUDGET,
        });
    }
    let counts = ap_counts(x, q, k)?;
    let ps = counts.power_sums(j)?;
    let win = sieve_range(&SieveConfig::new(k, 1, x + 1)?)?;
    let coprime: Vec<bool> = (0..q).map(|r| r.gcd(&q) == 1).collect();

    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    let mut ok = true;
    for i in 1..=j {
        // collect the f-grid for i−1 free coordinates, then count in parallel
        let mut grid_tuples: Vec<Vec<i64>> = Vec::new();
        let mut f = vec![-f_bound; i as usize - 1];
        loop {
            grid_tuples.push(f.clone());
            if f.is_empty() || !next_grid_tuple(&mut f, f_bound) {
                break;
            }
        }
        let total: u64 = grid_tuples
            .par_iter()
            .map(|f| {
                let min_c = f.iter().copied().min().unwrap_or(0).min(0);
                let max_c = f.iter().copied().max().unwrap_or(0).max(0);
                let x1 = -min_c as i128 * q as i128;
                let x2 = x as i128 - max_c as i128 * q as i128;
                let mut c = 0u64;
                let mut n = x1 + 1;
                while n <= x2 {
                    let nu = n as u64;
                    if coprime[(nu % q) as usize]
                        && win.get(nu)
                        && f.iter().all(|&ft| win.get((n + ft as i128 * q as i128) as u64))
                    {
                        c += 1;
                    }
                    n += 1;
                }
                c
            })
            .sum();
        ok &= *ps.sum(i) == BigUint::from(total);
        lhs.push(ps.sum(i).clone());
        rhs.push(BigUint::from(total));
    }
    Ok(IdentityReport {
        ok,
        lhs,
        rhs,
        x,
        param: q,
        ell: j,
        k,
    })
}

/// Two independent certified evaluations of the same tuple-averaged series.
#[derive(Debug, Clone)]
pub struct SeriesAverageReport {
    /// Σ_f A_q((f,0))·|I(X,q;(f,0))| over the finite support.
    pub lhs: Enclosure,
    /// q·B_j(X/q; q).
    pub rhs: Enclosure,
    pub abs_delta: f64,
    pub rel_delta: f64,
    pub tuples: u64,
    pub x: u64,
    pub q: u64,
    pub j: u32,
    pub k: u32,
    pub tol: f64,
}

impl SeriesAverageReport {
    pub fn to_json(&self) -> Value {
        json!({
            "lhs": self.lhs.value.to_decimal_string(),
            "lhs_err": self.lhs.err.to_decimal_string(),
            "rhs": self.rhs.value.to_decimal_string(),
            "rhs_err": self.rhs.err.to_decimal_string(),
            "abs_delta": self.abs_delta,
            "rel_delta": self.rel_delta,
            "tuples": self.tuples,
            "x": self.x,
            "q": self.q,
            "j": self.j,
            "k": self.k,
            "tol": self.tol,
        })
    }
}

/// Check the interval-averaged singular series against the windowed series:
/// Σ_{f ∈ ℤ^{j−1}} A_q((f,0))·|I(X,q;(f,0))| = q·B_j(X/q; q). The left
/// side sums the finitely many tuples with a nonempty overlap; the right
/// side is an independent evaluation. Both carry certified errors.
pub fn series_average_check(x: u64, q: u64, j: u32, k: u32, tol: f64) -> Result<SeriesAverageReport> {
    if j == 0 || j > MAX_ELL {
        return Err(Error::domain(format!("j must be in 1..={MAX_ELL}, got {j}")));
    }
    if q == 0 || x < q {
        return Err(Error::domain(format!("needs X ≥ q ≥ 1, got X={x}, q={q}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let f_bound = (x / q) as i64;
    let mut tuples = 1u128;
    for _ in 1..j {
        tuples = tuples.saturating_mul(2 * f_bound as u128 + 1);
    }
    if tuples > TUPLE_GRID_BUDGET {
        return Err(Error::Budget {
            required: tuples,
            budget: TUPLE_GRID_BUDGET,
        });
    }
    let mag = ((tuples as f64 * x as f64).log10()).ceil() as u32 + 4;
    let scale = digits_for_tol(tol) + mag + 8;
    let tail_rel = tol / (tuples as f64 * x as f64 * 8.0);
    let ev = AqhEvaluator::build(q, k, scale, j as u64, 2 * f_bound.max(1) as u64, tail_rel)?;

    let mut grid_tuples: Vec<Vec<i64>> = Vec::new();
    let mut f = vec![-f_bound; j as usize - 1];
    loop {
        grid_tuples.push(f.clone());
        if f.is_empty() || !next_grid_tuple(&mut f, f_bound) {
            break;
        }
    }
    let lhs = grid_tuples
        .par_iter()
        .map(|f| {
            let mut values = f.clone();
            values.push(0);
            let min_c = *values.iter().min().unwrap();
            let max_c = *values.iter().max().unwrap();
            let len = x as i128 - (max_c - min_c) as i128 * q as i128;
            if len <= 0 {
                return Enclosure::exact_zero(scale);
            }
            ev.eval(&values).mul_int(len as i64)
        })
        .reduce(|| Enclosure::exact_zero(scale), |a, b| a.add(&b));

    let rhs = b_j(Rat::new(x as i64, q as i64), j, q, k, tol / 4.0)?
        .rescale(scale)
        .mul_int(q);
    let abs_delta = (lhs.to_f64() - rhs.to_f64()).abs();
    let rel_delta = abs_delta / rhs.to_f64().abs().max(f64::MIN_POSITIVE);
    Ok(SeriesAverageReport {
        lhs,
        rhs,
        abs_delta,
        rel_delta,
        tuples: grid_tuples.len() as u64,
        x,
        q,
        j,
        k,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sieve::{count_kfree, is_kfree};
    use crate::singular::{c_ell_binomial, zeta_inverse};
    use crate::tuples::s_q_direct;

    fn brute_window(x: u64, h: u64, k: u32) -> Vec<u64> {
        (1..=x)
            .map(|n| (n..n + h).filter(|&m| is_kfree(m, k).unwrap()).count() as u64)
            .collect()
    }

    #[test]
    fn window_power_sums_match_brute_force() {
        let ps = window_counts(500, 7, 2, 4).unwrap();
        let vals = brute_window(500, 7, 2);
        assert_eq!(ps.sum(0), &BigUint::from(500u32));
        for j in 0..=4u32 {
            let want: BigUint = vals.iter().map(|&v| BigUint::from(v).pow(j)).sum();
            assert_eq!(ps.sum(j), &want, "j = {j}");
        }
        // H = 1: N ∈ {0,1}, every positive power equals the k-free count
        let ps1 = window_counts(1000, 1, 2, 3).unwrap();
        let q2 = count_kfree(2, 1000).unwrap();
        for j in 1..=3 {
            assert_eq!(ps1.sum(j), &BigUint::from(q2));
        }
    }

    #[test]
    fn window_sum_is_shifted_count_sum() {
        // Σ_n N(n,H) = Σ_{s<H} #{n ≤ x : n+s k-free}
        let x = 300u64;
        let h = 5u64;
        let ps = window_counts(x, h, 2, 2).unwrap();
        let mut direct = 0u64;
        for s in 0..h as i64 {
            direct += s_q_direct(0, x, &ShiftTuple::new(vec![s], 2, 1).unwrap()).unwrap();
        }
        assert_eq!(ps.sum(1), &BigUint::from(direct));
    }

    #[test]
    fn short_moment_matches_brute_discrepancy() {
        let x = 1000u64;
        let h = 4u64;
        let zinv = zeta_inverse(2, 1e-18).unwrap().to_f64();
        let vals = brute_window(x, h, 2);
        let brute: f64 = vals.iter().map(|&v| (v as f64 - zinv * h as f64).powi(2)).sum();
        let rep = short_moment(x, h, 2, 2, 1e-12).unwrap();
        assert!((rep.moment.to_f64() - brute).abs() < 1e-9, "moment {} vs brute {brute}", rep.moment.to_f64());
        // ℓ = 1 is plain linearity
        let rep1 = short_moment(x, h, 1, 2, 1e-12).unwrap();
        let expect = vals.iter().sum::<u64>() as f64 - zinv * (x * h) as f64;
        assert!((rep1.moment.to_f64() - expect).abs() < 1e-9);
        // trivial bound
        for ell in 1..=3 {
            let r = short_moment(200, 3, ell, 2, 1e-10).unwrap();
            assert!(r.moment.to_f64().abs() <= 200.0 * 3f64.powi(ell as i32));
        }
    }

    #[test]
    fn moment_reassembly_stays_inside_err() {
        let ps = window_counts(2000, 8, 2, 3).unwrap();
        let coarse = assemble_short(&ps, 2000, 8, 3, 2, 1e-6).unwrap();
        let fine = assemble_short(&ps, 2000, 8, 3, 2, 1e-20).unwrap();
        let delta = (coarse.moment.to_f64() - fine.moment.to_f64()).abs();
        assert!(delta <= coarse.moment.err_f64() + 1e-18, "delta {delta}");
        assert!(fine.moment.err_f64() < 1e-20);
    }

    #[test]
    fn binomial_identity_examples() {
        let rep = binomial_identity_check(10_000, 10, 3, 2).unwrap();
        assert!(rep.ok, "lhs {:?} rhs {:?}", rep.lhs, rep.rhs);
        let rep = binomial_identity_check(10_000, 10, 3, 3).unwrap();
        assert!(rep.ok);
        let rep = binomial_identity_check(777, 13, 4, 2).unwrap();
        assert!(rep.ok);
    }

    #[test]
    fn ap_counts_examples() {
        let cc = ap_counts(1000, 1, 2).unwrap();
        assert_eq!(cc.counts().len(), 1);
        assert_eq!(cc.total(), count_kfree(2, 1000).unwrap());

        let cc = ap_counts(100, 4, 2).unwrap();
        let classes: Vec<u64> = cc.counts().iter().map(|&(a, _)| a).collect();
        assert_eq!(classes, vec![1, 3]);
        for &(a, c) in cc.counts() {
            let brute = (1..=100u64)
                .filter(|&n| n % 4 == a && is_kfree(n, 2).unwrap())
                .count() as u64;
            assert_eq!(c, brute, "class {a}");
        }
        let coprime_total = (1..=100u64)
            .filter(|&n| n % 2 == 1 && is_kfree(n, 2).unwrap())
            .count() as u64;
        assert_eq!(cc.total(), coprime_total);
        // j = 0 power sum counts the reduced classes
        let ps = cc.power_sums(2).unwrap();
        assert_eq!(ps.sum(0), &BigUint::from(2u32));
    }

    #[test]
    fn ap_moment_matches_brute_force() {
        let x = 10_000u64;
        let q = 101u64;
        let aq = density_aq(q, 2, 1e-18).unwrap().to_f64();
        let phi = phi_u64(q) as f64;
        let cc = ap_counts(x, q, 2).unwrap();
        let brute: f64 = cc
            .counts()
            .iter()
            .map(|&(_, c)| (c as f64 - aq * x as f64 / phi).powi(2))
            .sum();
        let rep = ap_moment(x, q, 2, 2, 1e-12).unwrap();
        assert!((rep.moment.to_f64() - brute).abs() < 1e-9, "moment {} vs brute {brute}", rep.moment.to_f64());
        let rep1 = ap_moment(x, q, 1, 2, 1e-12).unwrap();
        let expect = cc.total() as f64 - aq * x as f64;
        assert!((rep1.moment.to_f64() - expect).abs() < 1e-9);
    }

    #[test]
    fn sj_identity_examples() {
        assert!(sj_identity_check(10_000, 211, 3, 2).unwrap().ok);
        assert!(sj_identity_check(10_000, 211, 2, 3).unwrap().ok);
        assert!(sj_identity_check(500, 7, 3, 2).unwrap().ok);
        // j = 1 collapses to the reduced-class total
        let rep = sj_identity_check(2000, 13, 1, 2).unwrap();
        assert!(rep.ok);
        assert_eq!(rep.rhs[0], BigUint::from(ap_counts(2000, 13, 2).unwrap().total()));
    }

    #[test]
    fn sj_inner_count_matches_tuple_module() {
        // one f-tuple of the 𝒮_j sum is an S_q evaluation on I(X,q;(f,0))
        let (x, q) = (200u64, 7u64);
        for f in [-3i64, 0, 5] {
            let h = ShiftTuple::new(vec![f, 0], 2, q).unwrap();
            let (x1, x2) = interval_i(x, &h).unwrap();
            let direct = s_q_direct(x1 as u64, x2 as u64, &h).unwrap();
            let win = sieve_range(&SieveConfig::new(2, 1, x + 1).unwrap()).unwrap();
            let mut c = 0u64;
            for n in (x1 + 1)..=x2 {
                let nu = n as u64;
                if nu.gcd(&q) == 1
                    && win.get(nu)
                    && win.get((n + f * q as i64) as u64)
                {
                    c += 1;
                }
            }
            assert_eq!(direct, c, "f = {f}");
        }
    }

    #[test]
    fn interval_examples() {
        let h = ShiftTuple::new(vec![0, 0, 0], 2, 5).unwrap();
        assert_eq!(interval_i(100, &h), Some((0, 100)));
        // spread·q ≥ X empties the overlap
        let h = ShiftTuple::new(vec![0, 15], 2, 7).unwrap();
        assert_eq!(interval_i(100, &h), None);
        let h = ShiftTuple::new(vec![0, 3], 2, 7).unwrap();
        assert_eq!(interval_i(100, &h), Some((0, 79)));
        // negative shifts push the window up
        let h = ShiftTuple::new(vec![-2, 0], 2, 7).unwrap();
        assert_eq!(interval_i(100, &h), Some((14, 100)));
    }

    #[test]
    fn series_average_matches_windowed_series() {
        // j = 1 collapses to A_q·X on both sides
        let rep = series_average_check(1000, 13, 1, 2, 1e-10).unwrap();
        let aq = density_aq(13, 2, 1e-14).unwrap().to_f64();
        assert!((rep.lhs.to_f64() - aq * 1000.0).abs() < 1e-8);
        assert!(rep.rel_delta <= 1e-8, "rel delta {}", rep.rel_delta);

        for x in [1000u64, 1005] {
            let rep = series_average_check(x, 13, 2, 2, 1e-10).unwrap();
            assert!(
                rep.rel_delta <= 1e-8,
                "X = {x}: rel delta {} (lhs {}, rhs {})",
                rep.rel_delta,
                rep.lhs.to_f64(),
                rep.rhs.to_f64()
            );
        }
    }

    #[test]
    fn moment_tracks_series_main_term_short() {
        // |𝔐(x,H,ℓ) − C_ℓ(H)·x| ≤ c·H^ℓ·x^{2/(k+1)+0.05}
        let mut fitted: f64 = 0.0;
        for &x in &[10_000u64, 100_000] {
            for &h in &[4u64, 16, 32] {
                for ell in 1..=3u32 {
                    let m = short_moment(x, h, ell, 2, 1e-9).unwrap().moment.to_f64();
                    let c = c_ell_binomial(Rat::from_integer(h as i64), ell, 1, 2, 1e-9)
                        .unwrap()
                        .to_f64();
                    let envelope = (h as f64).powi(ell as i32) * (x as f64).powf(2.0 / 3.0 + 0.05);
                    fitted = fitted.max((m - c * x as f64).abs() / envelope);
                }
            }
        }
        println!("short-moment main-term fitted constant: {fitted:.3}");
        assert!(fitted <= 100.0, "fitted constant {fitted} out of range");
    }

    #[test]
    fn moment_tracks_series_main_term_ap() {
        // |𝓜(X,q,ℓ) − q·C_ℓ(X/q;q)| ≤ c·X^{2/(k+1)+0.05}·(X/q)^{ℓ−1}
        let mut fitted: f64 = 0.0;
        for &(x, q) in &[(10_000u64, 101u64), (10_000, 211), (50_000, 1009)] {
            for ell in 1..=3u32 {
                let m = ap_moment(x, q, ell, 2, 1e-9).unwrap().moment.to_f64();
                let c = c_ell_binomial(Rat::new(x as i64, q as i64), ell, q, 2, 1e-9)
                    .unwrap()
                    .to_f64();
                let envelope = (x as f64).powf(2.0 / 3.0 + 0.05)
                    * (x as f64 / q as f64).powi(ell as i32 - 1);
                fitted = fitted.max((m - q as f64 * c).abs() / envelope);
            }
        }
        println!("progression-moment main-term fitted constant: {fitted:.3}");
        assert!(fitted <= 100.0, "fitted constant {fitted} out of range");
    }

    #[test]
    fn guards() {
        assert!(matches!(window_counts(0, 4, 2, 3), Err(Error::Domain(_))));
        assert!(matches!(window_counts(10, 0, 2, 3), Err(Error::Domain(_))));
        assert!(matches!(window_counts(10, 4, 2, 99), Err(Error::Domain(_))));
        assert!(matches!(short_moment(10, 4, 0, 2, 1e-9), Err(Error::Domain(_))));
        let ps = window_counts(10, 4, 2, 2).unwrap();
        assert!(matches!(assemble_short(&ps, 10, 4, 3, 2, 1e-9), Err(Error::Domain(_))));
        assert!(matches!(ap_counts(0, 5, 2), Err(Error::Domain(_))));
        assert!(matches!(ap_counts(10, 0, 2), Err(Error::Domain(_))));
        assert!(matches!(sj_identity_check(1_000_000, 3, 3, 2), Err(Error::Budget { .. })));
        assert!(matches!(series_average_check(100, 300, 2, 2, 1e-8), Err(Error::Domain(_))));
        assert!(matches!(
            binomial_identity_check(u64::MAX / 2, 1 << 13, 8, 2),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn report_serialization() {
        let rep = short_moment(100, 4, 2, 2, 1e-9).unwrap();
        let js = rep.to_json();
        assert_eq!(js["kind"], "short");
        assert_eq!(js["x"], 100);
        assert!(js["powersums"].as_array().unwrap().len() == 3);
        let rep = ap_moment(100, 7, 1, 2, 1e-9).unwrap();
        assert_eq!(rep.to_json()["kind"], "ap");
        let idr = binomial_identity_check(100, 3, 2, 2).unwrap();
        assert_eq!(idr.to_json()["ok"], true);
    }
}
