//! Integer primality and factorization, sized for resultants of small maps.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Deterministic Miller-Rabin for `u64`, probabilistic (40 rounds of fixed
/// witnesses) beyond.
pub fn is_prime(n: &BigInt) -> bool {
    let n = n.abs();
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    if n.is_even() {
        return false;
    }
    // fixed small witnesses; fine at the sizes resultants reach here
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    WITNESSES.iter().all(|&a| miller_rabin_big(&n, a))
}

fn is_prime_u64(n: u64) -> bool {
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
    // deterministic witness set for u64
    let n_big = BigInt::from(n);
    [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]
        .iter()
        .all(|&a| miller_rabin_big(&n_big, a))
}

fn miller_rabin_big(n: &BigInt, a: u64) -> bool {
    let one = BigInt::one();
    let nm1 = n - &one;
    let mut d = nm1.clone();
    let mut r = 0u64;
    while d.is_even() {
        d >>= 1;
        r += 1;
    }
    let a = BigInt::from(a) % n;
    if a.is_zero() {
        return true;
    }
    let mut x = a.modpow(&d, n);
    if x.is_one() || x == nm1 {
        return true;
    }
    for _ in 1..r {
        x = x.modpow(&BigInt::from(2u8), n);
        if x == nm1 {
            return true;
        }
    }
    false
}

/// Factor `|n|` into `(prime, exponent)` pairs, primes ascending.
///
/// Trial division to 10^6, then Brent's variant of Pollard rho. A budget
/// guards against adversarially hard semiprimes; resultants of desk-scale
/// maps never get near it.
pub fn factorize(n: &BigInt) -> Result<Vec<(BigInt, u32)>> {
    let mut n = n.abs();
    if n.is_zero() {
        return Err(Error::Input("cannot factor zero".into()));
    }
    let mut factors: Vec<(BigInt, u32)> = Vec::new();
    let push = |p: BigInt, factors: &mut Vec<(BigInt, u32)>| {
        if let Some(last) = factors.last_mut() {
            if last.0 == p {
                last.1 += 1;
                return;
            }
        }
        factors.push((p, 1));
    };

    let mut d = 2u64;
    while d <= 1_000_000 && n > BigInt::one() {
        let db = BigInt::from(d);
        while (&n % &db).is_zero() {
            n /= &db;
            push(db.clone(), &mut factors);
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > BigInt::one() {
        let mut stack = vec![n];
        let mut budget = 64u32;
        while let Some(m) = stack.pop() {
            if is_prime(&m) {
                push(m, &mut factors);
                continue;
            }
            if budget == 0 {
                return Err(Error::Resource {
                    msg: format!("factorization stalled on {m}"),
                    partial: 0,
                });
            }
            budget -= 1;
            let f = pollard_brent(&m);
            let q = &m / &f;
            stack.push(f);
            stack.push(q);
        }
        factors.sort();
        // merge duplicates produced out of order
        let mut merged: Vec<(BigInt, u32)> = Vec::new();
        for (p, e) in factors {
            if let Some(last) = merged.last_mut() {
                if last.0 == p {
                    last.1 += e;
                    continue;
                }
            }
            merged.push((p, e));
        }
        return Ok(merged);
    }
    Ok(factors)
}

fn pollard_brent(n: &BigInt) -> BigInt {
    let one = BigInt::one();
    let two = BigInt::from(2u8);
    if (n % &two).is_zero() {
        return two;
    }
    let mut c = BigInt::one();
    loop {
        let mut x = BigInt::from(2u8);
        let mut y = x.clone();
        let mut d = BigInt::one();
        let step = |v: &BigInt| (v * v + &c) % n;
        while d.is_one() {
            x = step(&x);
            y = step(&step(&y));
            let diff = (&x - &y).abs();
            if diff.is_zero() {
                break;
            }
            d = diff.gcd(n);
        }
        if !d.is_one() && &d != n {
            return d;
        }
        c += &one;
    }
}

/// p-adic valuation of a nonzero integer.
pub fn valuation(n: &BigInt, p: &BigInt) -> u32 {
    debug_assert!(!n.is_zero());
    let mut n = n.abs();
    let mut v = 0;
    while (&n % p).is_zero() {
        n /= p;
        v += 1;
    }
    v
}
