use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use super::grid::exact_law;
use super::spec::WalkSpec;
use super::{pack, WalkError};

fn factorials(n: u64) -> Vec<BigUint> {
    let mut f = vec![BigUint::one()];
    for i in 1..=n {
        let next = &f[i as usize - 1] * BigUint::from(i);
        f.push(next);
    }
    f
}

/// `P(Y_n = 0)` for the simple walk on `Z^3`:
/// `6^(-2m) Σ_{i+j+k=m} (2m)! / (i! j! k!)^2` for `n = 2m`, zero for odd `n`.
pub fn z3_origin_return_exact(n: u64) -> BigRational {
    if n % 2 == 1 {
        return BigRational::zero();
    }
    let m = n / 2;
    let f = factorials(n);
    // (2m)! / (i! j! k!)^2 = C(2m, m) · (m! / (i! j! k!))^2
    let mut sum = BigUint::zero();
    for i in 0..=m {
        for j in 0..=m - i {
            let k = m - i - j;
            let t = &f[m as usize] / (&f[i as usize] * &f[j as usize] * &f[k as usize]);
            sum += &t * &t;
        }
    }
    let central = &f[n as usize] / (&f[m as usize] * &f[m as usize]);
    BigRational::new((central * sum).into(), BigInt::from(6u32).pow(n as u32))
}

/// Parts of `n` into three near-equal pieces, largest first.
pub fn balanced_parts(n: u64) -> [u64; 3] {
    let q = n / 3;
    match n % 3 {
        0 => [q, q, q],
        1 => [q + 1, q, q],
        _ => [q + 1, q + 1, q],
    }
}

/// `C_n = max_{i+j+k=n} n! / (i! j! k!)`, attained at the balanced split.
pub fn max_multinomial(n: u64) -> BigUint {
    let f = factorials(n);
    let [a, b, c] = balanced_parts(n);
    &f[n as usize] / (&f[a as usize] * &f[b as usize] * &f[c as usize])
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut r = BigUint::one();
    for i in 0..k {
        r = r * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    r
}

/// `2^(-2n) C(2n, n) C_n 3^(-n)`, an upper bound for `P(Y_2n = 0)` on `Z^3`.
pub fn z3_upper_bound(n: u64) -> BigRational {
    let num = binomial(2 * n, n) * max_multinomial(n);
    let den = BigUint::from(12u32).pow(n as u32);
    BigRational::new(num.into(), den.into())
}

/// `3√3 / (2 π^(3/2) n^(3/2))`.
pub fn stirling_asymptotic(n: u64) -> f64 {
    let pi = std::f64::consts::PI;
    3.0 * 3f64.sqrt() / (2.0 * pi.powf(1.5) * (n as f64).powf(1.5))
}

/// One `(n, x)` instance of the shifted-probability inequality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShiftedCase {
    pub n: u64,
    pub x: [i64; 3],
    pub lhs: String,
    pub rhs: String,
    pub holds: bool,
}

fn rhs_at(n: u64) -> BigRational {
    let s: BigRational = (n..n + 4).map(z3_origin_return_exact).sum();
    s * BigRational::from_integer(BigInt::from(216))
}

/// `P(Y_n = x) <= 6^3 (P(Y_n = 0) + ... + P(Y_(n+3) = 0))` on `Z^3`.
/// Vacuously true when the parities of `n` and `|x|_1` differ.
pub fn shifted_bound_check(n: u64, x: [i64; 3]) -> Result<bool, WalkError> {
    if n == 0 {
        return Err(WalkError::Invalid("n must be at least 1".into()));
    }
    let l1: u64 = x.iter().map(|c| c.unsigned_abs()).sum();
    if l1 % 2 != n % 2 || l1 > n {
        return Ok(true);
    }
    let law = exact_law(&WalkSpec::simple(3), n, l1);
    let c = law.map.get(&pack(&x)).cloned().unwrap_or_default();
    let lhs = BigRational::new(c.into(), law.denom.into());
    Ok(lhs <= rhs_at(n))
}

/// Every `x` with `|x|_1 <= max_l1` against every `1 <= n <= max_n`, one DP
/// pass per `n`.
pub fn shifted_bound_sweep(max_n: u64, max_l1: u64) -> Vec<ShiftedCase> {
    let w = WalkSpec::simple(3);
    let pts = crate::lattice::l1_ball(3, max_l1);
    let mut out = Vec::new();
    for n in 1..=max_n {
        let law = exact_law(&w, n, max_l1);
        let rhs = rhs_at(n);
        for p in &pts {
            let x = [p.coords()[0], p.coords()[1], p.coords()[2]];
            let c = law.map.get(&pack(&x)).cloned().unwrap_or_default();
            let lhs = BigRational::new(c.into(), law.denom.clone().into());
            out.push(ShiftedCase {
                n,
                x,
                holds: lhs <= rhs,
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
            });
        }
    }
    out
}
