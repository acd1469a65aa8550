//! Small number-theoretic utilities shared across the crate: prime generation,
//! Möbius/smallest-prime-factor tables, totients, exact integer k-th roots and a
//! deterministic 64-bit primality test.

/// Primes up to and including `limit`, by a plain sieve of Eratosthenes.
pub fn primes_upto(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            out.push(p as u64);
            let mut m = p * p;
            while m <= n {
                composite[m] = true;
                m += p;
            }
        }
    }
    out
}

/// Smallest-prime-factor table for [0, limit]; `spf[0] = spf[1] = 0`.
pub fn spf_table(limit: usize) -> Vec<u32> {
    let mut spf = vec![0u32; limit + 1];
    for i in 2..=limit {
        if spf[i] == 0 {
            let mut m = i;
            while m <= limit {
                if spf[m] == 0 {
                    spf[m] = i as u32;
                }
                m += i;
            }
        }
    }
    spf
}

/// Möbius function on [0, limit] from a smallest-prime-factor table.
pub fn mobius_table(limit: usize) -> Vec<i8> {
    let spf = spf_table(limit);
    let mut mu = vec![0i8; limit + 1];
    if limit >= 1 {
        mu[1] = 1;
    }
    for i in 2..=limit {
        let p = spf[i] as usize;
        let m = i / p;
        mu[i] = if m % p == 0 { 0 } else { -mu[m] };
    }
    mu
}

/// μ(n) for a single (word-sized) argument, by trial division.
pub fn mobius_u64(n: u64) -> i8 {
    assert!(n >= 1, "mobius: n must be positive, got {}", n);
    let mut n = n;
    let mut sign = 1i8;
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

/// Euler's totient of `q` by trial division.
pub fn phi_u64(q: u64) -> u64 {
    assert!(q >= 1, "phi: q must be positive");
    let mut q = q;
    let mut phi = q;
    let mut p = 2u64;
    while p * p <= q {
        if q % p == 0 {
            phi -= phi / p;
            while q % p == 0 {
                q /= p;
            }
        }
        p += 1;
    }
    if q > 1 {
        phi -= phi / q;
    }
    phi
}

/// Distinct prime factors of a word-sized integer, ascending.
pub fn prime_factors_u64(n: u64) -> Vec<u64> {
    let mut n = n;
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            out.push(p);
            while n % p == 0 {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Largest integer r with r^k <= n. Exact (no float round-trip at the boundary).
pub fn kth_root_floor(n: u64, k: u32) -> u64 {
    assert!(k >= 1);
    if k == 1 || n <= 1 {
        return n;
    }
    let mut r = (n as f64).powf(1.0 / k as f64) as u64;
    // float estimate can be off by one in either direction
    while checked_pow_u64(r + 1, k).is_some_and(|p| p <= n) {
        r += 1;
    }
    while r > 0 && checked_pow_u64(r, k).is_none_or(|p| p > n) {
        r -= 1;
    }
    r
}

/// r^k if it fits in u64.
pub fn checked_pow_u64(r: u64, k: u32) -> Option<u64> {
    let mut acc = 1u64;
    for _ in 0..k {
        acc = acc.checked_mul(r)?;
    }
    Some(acc)
}

/// Is `n` a perfect k-th power?
pub fn is_perfect_kth_power(n: u64, k: u32) -> bool {
    let r = kth_root_floor(n, k);
    checked_pow_u64(r, k) == Some(n)
}

/// Deterministic Miller–Rabin for u64 (fixed witness set, valid for all 64-bit n).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    // These witnesses decide primality for every n < 2^64.
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Binomial coefficient as exact u128 (small arguments only).
pub fn binomial_u128(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u128;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primes_small() {
        assert_eq!(primes_upto(30), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
        assert_eq!(primes_upto(1), Vec::<u64>::new());
        assert_eq!(primes_upto(10_000).len(), 1229);
    }

    #[test]
    fn mobius_values() {
        let mu = mobius_table(30);
        assert_eq!(mu[1], 1);
        assert_eq!(mu[2], -1);
        assert_eq!(mu[4], 0);
        assert_eq!(mu[6], 1);
        assert_eq!(mu[30], -1);
        for (n, &m) in mu.iter().enumerate().skip(1) {
            assert_eq!(m, mobius_u64(n as u64), "mu({})", n);
        }
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi_u64(1), 1);
        assert_eq!(phi_u64(13), 12);
        assert_eq!(phi_u64(12), 4);
        assert_eq!(phi_u64(1009), 1008);
    }

    #[test]
    fn kth_root_exact_boundaries() {
        assert_eq!(kth_root_floor(99, 2), 9);
        assert_eq!(kth_root_floor(100, 2), 10);
        assert_eq!(kth_root_floor(10u64.pow(12), 2), 10u64.pow(6));
        assert_eq!(kth_root_floor(u64::MAX, 2), (1u64 << 32) - 1);
        assert_eq!(kth_root_floor(8, 3), 2);
        assert_eq!(kth_root_floor(7, 3), 1);
    }

    #[test]
    fn primality_spot_checks() {
        assert!(is_prime_u64(2));
        assert!(is_prime_u64(1009));
        assert!(!is_prime_u64(1));
        assert!(!is_prime_u64(1_000_000_007u64 * 3));
        assert!(is_prime_u64(1_000_000_007));
        // strong pseudoprime to several small bases
        assert!(!is_prime_u64(3_215_031_751));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_u128(6, 3), 20);
        assert_eq!(binomial_u128(4, 0), 1);
        assert_eq!(binomial_u128(3, 5), 0);
    }
}
