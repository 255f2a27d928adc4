//! Exact arithmetic on `R/QZ`.
//!
//! Points are stored by their canonical representative in `[0, Q)`. Signed
//! representatives in `(-Q/2, Q/2]` are produced on demand where an
//! operation needs a "real" distance.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primes::is_prime;
use crate::rational::{self, Rational};

/// A positive integer modulus, optionally carrying its squarefree
/// factorization into distinct primes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ModulusRepr", into = "ModulusRepr")]
pub struct Modulus {
    value: BigInt,
    factors: Option<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct ModulusRepr {
    value: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factors: Option<Vec<u64>>,
}

impl From<Modulus> for ModulusRepr {
    fn from(m: Modulus) -> Self {
        ModulusRepr {
            value: m.value.to_string(),
            factors: m.factors,
        }
    }
}

impl TryFrom<ModulusRepr> for Modulus {
    type Error = Error;

    fn try_from(r: ModulusRepr) -> Result<Self> {
        let value: BigInt = r
            .value
            .parse()
            .map_err(|_| Error::Parse(format!("bad modulus {:?}", r.value)))?;
        match r.factors {
            Some(f) => {
                let m = Modulus::from_primes(&f)?;
                if m.value != value {
                    return Err(Error::InvalidFactors {
                        modulus: value,
                        reason: "factor product differs from value".into(),
                    });
                }
                Ok(m)
            }
            None => Modulus::new(value),
        }
    }
}

impl PartialEq for Modulus {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl Eq for Modulus {}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl Modulus {
    pub fn new<T: Into<BigInt>>(q: T) -> Result<Self> {
        let value = q.into();
        if value < BigInt::one() {
            return Err(Error::InvalidModulus(value));
        }
        Ok(Modulus {
            value,
            factors: None,
        })
    }

    pub fn one() -> Self {
        Modulus {
            value: BigInt::one(),
            factors: Some(Vec::new()),
        }
    }

    /// Product of distinct primes; the factor list is kept sorted.
    pub fn from_primes(primes: &[u64]) -> Result<Self> {
        let mut f = primes.to_vec();
        f.sort_unstable();
        for w in f.windows(2) {
            if w[0] == w[1] {
                return Err(Error::InvalidFactors {
                    modulus: rational::product(&f),
                    reason: format!("repeated prime {}", w[0]),
                });
            }
        }
        if let Some(&bad) = f.iter().find(|&&p| !is_prime(p)) {
            return Err(Error::NotPrime(bad));
        }
        Ok(Modulus {
            value: rational::product(&f),
            factors: Some(f),
        })
    }

    pub fn value(&self) -> &BigInt {
        &self.value
    }

    pub fn as_rational(&self) -> Rational {
        Rational::from_integer(self.value.clone())
    }

    pub fn factors(&self) -> Option<&[u64]> {
        self.factors.as_deref()
    }

    pub fn is_one(&self) -> bool {
        self.value.is_one()
    }

    pub fn divisible_by(&self, p: u64) -> bool {
        (&self.value % BigInt::from(p)).is_zero()
    }

    /// Greatest common divisor, keeping the factorization when both sides
    /// have one.
    pub fn gcd(&self, other: &Modulus) -> Modulus {
        match (&self.factors, &other.factors) {
            (Some(a), Some(b)) => {
                let common: Vec<u64> = a.iter().copied().filter(|p| b.contains(p)).collect();
                Modulus::from_primes(&common).expect("subset of a valid factor list")
            }
            _ => Modulus {
                value: self.value.gcd(&other.value),
                factors: None,
            },
        }
    }

    pub(crate) fn check_prime(&self, p: u64) -> Result<()> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if self.divisible_by(p) {
            return Err(Error::PrimeDividesModulus {
                p,
                modulus: self.value.clone(),
            });
        }
        Ok(())
    }
}

/// A point of `R/QZ` held by its canonical representative in `[0, Q)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TorusPoint {
    value: Rational,
    modulus: Modulus,
}

impl fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", rational::to_string(&self.value), self.modulus)
    }
}

impl TorusPoint {
    pub fn value(&self) -> &Rational {
        &self.value
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn zero(modulus: &Modulus) -> Self {
        TorusPoint {
            value: Rational::zero(),
            modulus: modulus.clone(),
        }
    }

    /// Representative in `(-Q/2, Q/2]`.
    pub fn signed(&self) -> Rational {
        signed_rep(&self.value, self.modulus.value())
    }

    pub fn norm(&self) -> Rational {
        torus_norm(self)
    }

    pub fn scale(&self, n: &BigInt) -> TorusPoint {
        reduce(&(&self.value * Rational::from_integer(n.clone())), &self.modulus)
    }

    pub fn scale_u64(&self, n: u64) -> TorusPoint {
        self.scale(&BigInt::from(n))
    }

    pub fn sub(&self, other: &TorusPoint) -> Result<TorusPoint> {
        self.same_modulus(other)?;
        Ok(reduce(&(&self.value - &other.value), &self.modulus))
    }

    pub fn add(&self, other: &TorusPoint) -> Result<TorusPoint> {
        self.same_modulus(other)?;
        Ok(reduce(&(&self.value + &other.value), &self.modulus))
    }

    /// `||self - other||_Q`.
    pub fn distance(&self, other: &TorusPoint) -> Result<Rational> {
        Ok(self.sub(other)?.norm())
    }

    /// Reinterprets the canonical representative modulo a divisor of `Q`.
    pub fn remod(&self, modulus: &Modulus) -> TorusPoint {
        reduce(&self.value, modulus)
    }

    fn same_modulus(&self, other: &TorusPoint) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(Error::ModulusMismatch(
                self.modulus.value.clone(),
                other.modulus.value.clone(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn signed_rep(x: &Rational, q: &BigInt) -> Rational {
    let r = rational::rem_euclid(x, q);
    let qr = Rational::from_integer(q.clone());
    if &r * Rational::from_integer(BigInt::from(2)) > qr {
        r - qr
    } else {
        r
    }
}

/// `||x||_Q` for a raw rational.
pub fn norm_mod(x: &Rational, q: &BigInt) -> Rational {
    signed_rep(x, q).abs()
}

pub fn reduce(x: &Rational, q: &Modulus) -> TorusPoint {
    TorusPoint {
        value: rational::rem_euclid(x, q.value()),
        modulus: q.clone(),
    }
}

pub fn torus_norm(x: &TorusPoint) -> Rational {
    let q = x.modulus.as_rational();
    let other = &q - &x.value;
    if other < x.value {
        other
    } else {
        x.value.clone()
    }
}

/// All `p` solutions of `p * beta = alpha (mod Q)`, ascending.
pub fn lift_roots(alpha: &TorusPoint, p: u64) -> Result<Vec<TorusPoint>> {
    alpha.modulus.check_prime(p)?;
    let pr = rational::int(p);
    let base = &alpha.value / &pr;
    let step = alpha.modulus.as_rational() / &pr;
    Ok((0..p)
        .map(|k| TorusPoint {
            value: &base + &step * rational::int(k),
            modulus: alpha.modulus.clone(),
        })
        .collect())
}

/// The lift pair chosen by [`closest_lift_pair`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftPair {
    /// A root of `p1 * beta = alpha2`.
    pub first: TorusPoint,
    /// A root of `p2 * beta = alpha1`.
    pub second: TorusPoint,
    /// `first - second` taken in `(-Q/2, Q/2]`.
    pub offset: Rational,
    /// `|offset|`, never more than `Q / (2 p1 p2)`.
    pub gap: Rational,
}

impl LiftPair {
    /// Real representative of `second` nearest to `first`.
    pub fn second_near_first(&self) -> Rational {
        self.first.value() - &self.offset
    }
}

/// Picks `beta1` among the lifts of `alpha2` by `p1` and `beta2` among the
/// lifts of `alpha1` by `p2` minimizing `||beta1 - beta2||_Q`. Ties go to the
/// lexicographically smallest canonical pair.
pub fn closest_lift_pair(
    alpha1: &TorusPoint,
    alpha2: &TorusPoint,
    p1: u64,
    p2: u64,
) -> Result<LiftPair> {
    alpha1.same_modulus(alpha2)?;
    if p1 == p2 {
        return Err(Error::EqualPrimes(p1));
    }
    let modulus = &alpha1.modulus;
    modulus.check_prime(p1)?;
    modulus.check_prime(p2)?;

    let q = modulus.as_rational();
    let base1 = &alpha2.value / rational::int(p1);
    let step1 = &q / rational::int(p1);
    let base2 = &alpha1.value / rational::int(p2);
    let step2 = &q / rational::int(p2);
    // b1 - b2 = (base1 - base2) + Q m / (p1 p2) with m = i p2 - j p1, and
    // every residue m mod p1 p2 comes from exactly one (i, j).
    let (p1_big, p2_big) = (BigInt::from(p1), BigInt::from(p2));
    let n = &p1_big * &p2_big;
    let inv2 = p2_big.extended_gcd(&p1_big).x.mod_floor(&p1_big);
    let inv1 = p1_big.extended_gcd(&p2_big).x.mod_floor(&p2_big);
    let target = rational::floor(&((&base2 - &base1) * Rational::from_integer(n.clone()) / &q));

    let mut best: Option<(Rational, Rational, Rational, Rational)> = None;
    for dm in 0..2u32 {
        let m = (&target + BigInt::from(dm)).mod_floor(&n);
        let i = (&m * &inv2).mod_floor(&p1_big);
        let j = (-&m * &inv1).mod_floor(&p2_big);
        let b1 = &base1 + &step1 * Rational::from_integer(i);
        let b2 = &base2 + &step2 * Rational::from_integer(j);
        let offset = signed_rep(&(&b1 - &b2), modulus.value());
        let gap = offset.abs();
        let better = match &best {
            None => true,
            Some((g, x1, x2, _)) => (&gap, &b1, &b2) < (g, x1, x2),
        };
        if better {
            best = Some((gap, b1, b2, offset));
        }
    }
    let (gap, b1, b2, offset) = best.expect("two candidates");
    Ok(LiftPair {
        first: TorusPoint {
            value: b1,
            modulus: modulus.clone(),
        },
        second: TorusPoint {
            value: b2,
            modulus: modulus.clone(),
        },
        offset,
        gap,
    })
}

/// `a - (w2 / (w1 + w2)) (a - b)` reduced mod `Q`.
pub fn convex_combine(
    a: &Rational,
    b: &Rational,
    w1: &Rational,
    w2: &Rational,
    modulus: &Modulus,
) -> Result<TorusPoint> {
    let total = w1 + w2;
    if !total.is_positive() {
        return Err(Error::DegenerateWeights);
    }
    let x = a - (w2 / total) * (a - b);
    Ok(reduce(&x, modulus))
}

/// Outcome of a coprime-moduli closeness combination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrtCheck {
    pub norm_first: Rational,
    pub norm_second: Rational,
    pub norm_combined: Rational,
    /// Both single-modulus norms are within `eps`.
    pub premises: bool,
    /// The product-modulus norm is within `eps`.
    pub combined: bool,
}

impl CrtCheck {
    /// The inference "premises imply combined" held on this input.
    pub fn holds(&self) -> bool {
        !self.premises || self.combined
    }
}

fn crt_check(
    x: &Rational,
    q1: &Modulus,
    q2: &Modulus,
    eps: &Rational,
    strict: bool,
) -> Result<CrtCheck> {
    if eps * rational::int(2) >= Rational::one() {
        return Err(Error::ToleranceTooLarge(rational::to_string(eps)));
    }
    if !q1.value().gcd(q2.value()).is_one() {
        return Err(Error::ModuliNotCoprime(q1.value().clone(), q2.value().clone()));
    }
    let within = |n: &Rational| if strict { n < eps } else { n <= eps };
    let n1 = norm_mod(x, q1.value());
    let n2 = norm_mod(x, q2.value());
    let nc = norm_mod(x, &(q1.value() * q2.value()));
    Ok(CrtCheck {
        premises: within(&n1) && within(&n2),
        combined: within(&nc),
        norm_first: n1,
        norm_second: n2,
        norm_combined: nc,
    })
}

/// Checks `||x||_{q1} < eps and ||x||_{q2} < eps  =>  ||x||_{q1 q2} < eps`
/// for coprime `q1, q2` and `2 eps < 1`.
pub fn combine_moduli(x: &Rational, q1: &Modulus, q2: &Modulus, eps: &Rational) -> Result<CrtCheck> {
    crt_check(x, q1, q2, eps, true)
}

/// Same inference with non-strict closeness (`<= eps`), as used for edge
/// witnesses.
pub fn combine_moduli_within(
    x: &Rational,
    q1: &Modulus,
    q2: &Modulus,
    eps: &Rational,
) -> Result<CrtCheck> {
    crt_check(x, q1, q2, eps, false)
}

/// Serde adapter storing a torus point as `{ "value": "n/d", "modulus": .. }`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TorusPointRepr {
    #[serde(with = "rational::serde_str")]
    pub value: Rational,
    pub modulus: Modulus,
}

impl From<&TorusPoint> for TorusPointRepr {
    fn from(p: &TorusPoint) -> Self {
        TorusPointRepr {
            value: p.value.clone(),
            modulus: p.modulus.clone(),
        }
    }
}

impl From<TorusPointRepr> for TorusPoint {
    fn from(r: TorusPointRepr) -> Self {
        reduce(&r.value, &r.modulus)
    }
}

impl Serialize for TorusPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TorusPointRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TorusPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TorusPointRepr::deserialize(d).map(TorusPoint::from)
    }
}
