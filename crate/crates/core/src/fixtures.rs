//! Seeded random inputs for property suites and benches.

use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::primes::primes_in;
use crate::pyramid::PrePath;
use crate::rational::{self, Rational};
use crate::torus::{reduce, Modulus, TorusPoint};

/// Uniform rational in `[0, 1)` with denominator `den`.
pub fn unit<R: Rng>(rng: &mut R, den: i64) -> Rational {
    rational::rat(rng.gen_range(0..den), den)
}

/// Uniform rational in `(-1, 1)` with denominator `den`.
pub fn signed_unit<R: Rng>(rng: &mut R, den: i64) -> Rational {
    rational::rat(rng.gen_range(-(den - 1)..den), den)
}

/// `1`, or a product of one to three distinct primes up to 50.
pub fn random_modulus<R: Rng>(rng: &mut R) -> Modulus {
    let n = rng.gen_range(0..=3);
    if n == 0 {
        return Modulus::one();
    }
    let pool = primes_in(2, 50);
    let picked: Vec<u64> = pool.choose_multiple(rng, n).copied().collect();
    Modulus::from_primes(&picked).expect("distinct primes")
}

pub fn random_point<R: Rng>(rng: &mut R, q: &Modulus) -> TorusPoint {
    let x = unit(rng, 1000) * q.as_rational();
    reduce(&x, q)
}

/// `count` distinct primes up to `max` that do not divide `q`.
pub fn random_primes<R: Rng>(rng: &mut R, q: &Modulus, count: usize, max: u64) -> Vec<u64> {
    let pool: Vec<u64> = primes_in(2, max)
        .into_iter()
        .filter(|&p| !q.divisible_by(p))
        .collect();
    assert!(pool.len() >= count, "not enough primes below {max}");
    pool.choose_multiple(rng, count).copied().collect()
}

/// A valid input for the two-point merge: `||p1 a1 - p2 a2||_Q < eps1 + eps2`.
#[derive(Clone, Debug)]
pub struct MergeCase {
    pub a1: TorusPoint,
    pub a2: TorusPoint,
    pub p1: u64,
    pub p2: u64,
    pub eps1: Rational,
    pub eps2: Rational,
}

pub fn random_merge_case<R: Rng>(rng: &mut R) -> MergeCase {
    let q = random_modulus(rng);
    let qr = q.as_rational();
    let primes = random_primes(rng, &q, 2, 97);
    let (p1, p2) = (primes[0], primes[1]);
    let eps1 = (unit(rng, 997) + rational::rat(1, 1000)) * &qr / rational::int(4);
    let eps2 = (unit(rng, 991) + rational::rat(1, 1000)) * &qr / rational::int(4);
    let a1 = random_point(rng, &q);
    // p2 a2 = p1 a1 + w with |w| < eps1 + eps2
    let w = signed_unit(rng, 1009) * (&eps1 + &eps2);
    let t = rng.gen_range(0..p2);
    let a2v = (a1.value() * rational::int(p1) + w + rational::int(t) * &qr) / rational::int(p2);
    MergeCase {
        a2: reduce(&a2v, &q),
        a1,
        p1,
        p2,
        eps1,
        eps2,
    }
}

/// A uniform-tolerance pre-path of length `k` with random links.
pub fn random_prepath<R: Rng>(rng: &mut R, k: usize) -> PrePath {
    let q = random_modulus(rng);
    let eps = (unit(rng, 499) + rational::rat(1, 500)) / rational::int(2);
    random_prepath_on(rng, &q, k, 97, &eps)
}

pub fn random_prepath_on<R: Rng>(
    rng: &mut R,
    q: &Modulus,
    k: usize,
    max_prime: u64,
    eps: &Rational,
) -> PrePath {
    let qr = q.as_rational();
    let primes = random_primes(rng, q, 2 * k, max_prime);
    let (p, qs) = primes.split_at(k);
    let mut tops = vec![random_point(rng, q)];
    let mut mids = Vec::with_capacity(k);
    for j in 0..k {
        let u = signed_unit(rng, 1013) * eps;
        let m = reduce(&(tops[j].value() * rational::int(p[j]) + u), q);
        let v = signed_unit(rng, 1019) * eps;
        let t = rng.gen_range(0..qs[j]);
        let next = (m.value() + v + rational::int(t) * &qr) / rational::int(qs[j]);
        tops.push(reduce(&next, q));
        mids.push(m);
    }
    PrePath::uniform(q.clone(), tops, mids, p.to_vec(), qs.to_vec(), eps.clone())
        .expect("generated links satisfy the tolerances")
}

/// Random `(x, q1, q2, eps)` with coprime moduli, `2 eps < 1`, and `x`
/// within `eps` of both `q1 Z` and `q2 Z`.
pub fn random_crt_case<R: Rng>(rng: &mut R) -> (Rational, Modulus, Modulus, Rational) {
    let pool = primes_in(2, 60);
    let n = rng.gen_range(1..=4);
    let picked: Vec<u64> = pool.choose_multiple(rng, n + 1).copied().collect();
    let split = rng.gen_range(1..=n);
    let q1 = Modulus::from_primes(&picked[..split]).expect("distinct");
    let q2 = Modulus::from_primes(&picked[split..]).expect("distinct");
    let eps = (unit(rng, 997) + rational::rat(1, 1000)) / rational::int(2);
    // x = a q1 + e1 = b q2 + e2 forces e1 = e2 once both are below 1/2;
    // sample both offsets independently so the premise sometimes fails.
    let m = rng.gen_range(-50i64..50);
    let e1 = signed_unit(rng, 1021) * &eps;
    let x = Rational::from_integer(BigInt::from(m) * q1.value()) + e1;
    (x, q1, q2, eps)
}
