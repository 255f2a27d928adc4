use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Path;
use crate::primes::dyadic;
use crate::rational::{self, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CloseProducts {
    pub r: usize,
    pub p0: u64,
    pub primes: Vec<u64>,
    /// Ordered `2r`-tuples with `|prod first - prod second| <= threshold`.
    pub count: u64,
    /// `A (2 P0)^r / N`.
    #[serde(with = "rational::serde_str")]
    pub threshold: Rational,
    /// `A (r!)^2 (2 P0)^r ((2 P0)^r / N + 1)`.
    #[serde(with = "rational::serde_str")]
    pub bound: Rational,
}

impl CloseProducts {
    pub fn within(&self, c_cal: &Rational) -> bool {
        rational::int(self.count) <= c_cal * &self.bound
    }
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * i)
}

/// Exhaustive count of `2r`-tuples of primes in `[P0, 2 P0]` whose two
/// `r`-fold products are within `A (2 P0)^r / N`, next to the closed-form
/// bound. Refuses when `m^{2r}` exceeds `budget` for `m` primes in range.
pub fn count_close_products(r: usize, p0: u64, n: &Rational, a: &Rational, budget: u64) -> Result<CloseProducts> {
    if r == 0 || p0 < 3 {
        return Err(Error::InvalidParams(format!("need r >= 1 and P0 >= 3, got r = {r}, P0 = {p0}")));
    }
    if !n.is_positive() || a.is_negative() {
        return Err(Error::InvalidParams("N must be positive and A non-negative".into()));
    }
    let primes = dyadic(p0);
    let m = primes.len();
    let needed = num_traits::pow(BigInt::from(m), 2 * r);
    if needed > BigInt::from(budget) {
        return Err(Error::ResourceGuard {
            needed: needed.to_string(),
            budget,
        });
    }
    let scale = num_traits::pow(BigInt::from(2 * p0), r);
    let scale_r = Rational::from_integer(scale.clone());
    let threshold = a * &scale_r / n;
    let bound = a * Rational::from_integer(factorial(r).pow(2u32)) * &scale_r * (&scale_r / n + Rational::one());

    let mut products: Vec<BigInt> = vec![BigInt::one()];
    for _ in 0..r {
        products = products
            .iter()
            .flat_map(|x| primes.iter().map(move |&p| x * p))
            .collect();
    }
    products.sort();
    // integer differences: |x - y| <= threshold iff |x - y| <= floor(threshold)
    let reach = rational::floor(&threshold);
    let mut count = 0u64;
    for x in &products {
        let lo = products.partition_point(|y| y < &(x - &reach));
        let hi = products.partition_point(|y| y <= &(x + &reach));
        count += (hi - lo) as u64;
    }
    Ok(CloseProducts {
        r,
        p0,
        primes,
        count,
        threshold,
        bound,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EndpointStats {
    pub end: usize,
    pub paths: usize,
    pub within_budget: bool,
    /// Pairs sharing at least one prime.
    pub sharing_pairs: usize,
    /// Pairs whose prime multisets differ.
    pub distinct_pairs: usize,
    /// Smallest `|prod q_i p'_i / (p_i q'_i) - 1|` among `distinct_pairs`.
    #[serde(with = "opt_rational")]
    pub min_ratio_gap: Option<Rational>,
    /// Distinct pairs whose ratio gap is below `(2P)^{-2k}`.
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Census {
    pub k: usize,
    pub start: Option<usize>,
    /// The parameters place `k` inside the range where the `(2k)!` count
    /// is proven; outside it the count is reported but not asserted.
    pub gate_applicable: bool,
    /// `(2k)!`.
    pub budget: String,
    /// `(2P)^{-2k}`.
    #[serde(with = "rational::serde_str")]
    pub min_gap: Rational,
    pub endpoints: Vec<EndpointStats>,
    pub pairs_checked: usize,
    pub violations: usize,
}

impl Census {
    pub fn pass(&self) -> bool {
        self.violations == 0 && (!self.gate_applicable || self.endpoints.iter().all(|e| e.within_budget))
    }
}

fn multiset(path: &Path) -> (Vec<u64>, Vec<u64>) {
    let mut p = path.p_primes().to_vec();
    let mut q = path.q_primes().to_vec();
    p.sort_unstable();
    q.sort_unstable();
    (p, q)
}

/// `prod q_i p'_i / prod p_i q'_i` for paths `a = (p, q)` and `b = (p', q')`.
pub(crate) fn product_ratio(a: &Path, b: &Path) -> Rational {
    let num = rational::product(a.q_primes()) * rational::product(b.p_primes());
    let den = rational::product(a.p_primes()) * rational::product(b.q_primes());
    Rational::new(num, den)
}

/// Per-endpoint path counts and the exact product-ratio separation for
/// paths that share their initial point and length. `two_p` is the upper
/// end `2P` of the prime window.
pub fn collision_census(paths: &[Path], two_p: u64, gate_applicable: bool) -> Result<Census> {
    let k = paths.first().map_or(0, Path::k);
    let start = paths.first().map(Path::start);
    for p in paths {
        if p.k() != k {
            return Err(Error::MixedLength(k, p.k()));
        }
        if Some(p.start()) != start {
            return Err(Error::MixedInitialPoint);
        }
    }
    let budget = factorial(2 * k);
    let min_gap = Rational::new(BigInt::one(), num_traits::pow(BigInt::from(two_p), 2 * k));
    let mut groups: BTreeMap<usize, Vec<&Path>> = BTreeMap::new();
    for p in paths {
        groups.entry(p.end()).or_default().push(p);
    }
    let mut endpoints = Vec::with_capacity(groups.len());
    let (mut pairs_checked, mut violations) = (0, 0);
    for (end, group) in groups {
        let sets: Vec<_> = group.iter().map(|p| multiset(p)).collect();
        let mut stats = EndpointStats {
            end,
            paths: group.len(),
            within_budget: BigInt::from(group.len()) <= budget,
            sharing_pairs: 0,
            distinct_pairs: 0,
            min_ratio_gap: None,
            violations: 0,
        };
        for a in 0..group.len() {
            for b in a + 1..group.len() {
                pairs_checked += 1;
                if group[a].primes().any(|x| group[b].primes().any(|y| x == y)) {
                    stats.sharing_pairs += 1;
                }
                if sets[a] == sets[b] {
                    continue;
                }
                stats.distinct_pairs += 1;
                let gap = (product_ratio(group[a], group[b]) - Rational::one()).abs();
                if gap < min_gap {
                    stats.violations += 1;
                }
                if stats.min_ratio_gap.as_ref().is_none_or(|g| &gap < g) {
                    stats.min_ratio_gap = Some(gap);
                }
            }
        }
        violations += stats.violations;
        endpoints.push(stats);
    }
    Ok(Census {
        k,
        start,
        gate_applicable,
        budget: budget.to_string(),
        min_gap,
        endpoints,
        pairs_checked,
        violations,
    })
}

mod opt_rational {
    use crate::rational::{self, Rational};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(x: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(r) => s.serialize_some(&rational::to_string(r)),
            None => s.serialize_none(),
        }
    }
}
