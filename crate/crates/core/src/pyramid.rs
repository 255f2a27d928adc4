//! Pre-paths and the pyramids built on top of them.
//!
//! A pre-path of length `k` is a chain of frequencies `a_1, .., a_{k+1}`
//! linked through intermediate anchors `m_2, .., m_{k+1}` and distinct
//! primes `p_j, q_j` with `||q_j a_{j+1} - m_{j+1}|| < eps_j` and
//! `||p_j a_j - m_{j+1}|| < eps'_j`. Repeatedly merging neighbours yields a
//! triangle whose apex (the top element) is approximately mapped onto every
//! anchor by a product of the primes.

use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::torus::{closest_lift_pair, convex_combine, Modulus, TorusPoint};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrePath {
    modulus: Modulus,
    top_anchors: Vec<TorusPoint>,
    mid_anchors: Vec<TorusPoint>,
    p_primes: Vec<u64>,
    q_primes: Vec<u64>,
    eps: Vec<Rational>,
    eps_prime: Vec<Rational>,
}

impl PrePath {
    /// `mid_anchors[j]` links `top_anchors[j]` (through `p_primes[j]`) with
    /// `top_anchors[j + 1]` (through `q_primes[j]`).
    pub fn new(
        modulus: Modulus,
        top_anchors: Vec<TorusPoint>,
        mid_anchors: Vec<TorusPoint>,
        p_primes: Vec<u64>,
        q_primes: Vec<u64>,
        eps: Vec<Rational>,
        eps_prime: Vec<Rational>,
    ) -> Result<Self> {
        let k = p_primes.len();
        if k == 0 {
            return Err(Error::InvalidPrePath("length must be at least 1".into()));
        }
        if top_anchors.len() != k + 1
            || mid_anchors.len() != k
            || q_primes.len() != k
            || eps.len() != k
            || eps_prime.len() != k
        {
            return Err(Error::InvalidPrePath(format!(
                "inconsistent lengths for k = {k}: {} top, {} mid, {} q, {} eps, {} eps'",
                top_anchors.len(),
                mid_anchors.len(),
                q_primes.len(),
                eps.len(),
                eps_prime.len()
            )));
        }
        let mut seen = Vec::with_capacity(2 * k);
        for &p in p_primes.iter().chain(&q_primes) {
            if seen.contains(&p) {
                return Err(Error::PrimeCollision(p));
            }
            modulus.check_prime(p)?;
            seen.push(p);
        }
        if let Some(bad) = eps.iter().chain(&eps_prime).find(|e| !e.is_positive()) {
            return Err(Error::InvalidPrePath(format!(
                "tolerance {} is not positive",
                rational::to_string(bad)
            )));
        }
        let top_anchors: Vec<_> = top_anchors.iter().map(|a| a.remod(&modulus)).collect();
        let mid_anchors: Vec<_> = mid_anchors.iter().map(|a| a.remod(&modulus)).collect();
        check_links(&top_anchors, &mid_anchors, &p_primes, &q_primes, &eps, &eps_prime)
            .map_err(|(j, msg)| Error::InvalidPrePath(format!("link {}: {msg}", j + 1)))?;
        Ok(PrePath {
            modulus,
            top_anchors,
            mid_anchors,
            p_primes,
            q_primes,
            eps,
            eps_prime,
        })
    }

    /// Pre-path with `eps_j = eps'_j = eps` for every link.
    pub fn uniform(
        modulus: Modulus,
        top_anchors: Vec<TorusPoint>,
        mid_anchors: Vec<TorusPoint>,
        p_primes: Vec<u64>,
        q_primes: Vec<u64>,
        eps: Rational,
    ) -> Result<Self> {
        let k = p_primes.len();
        PrePath::new(
            modulus,
            top_anchors,
            mid_anchors,
            p_primes,
            q_primes,
            vec![eps.clone(); k],
            vec![eps; k],
        )
    }

    pub fn k(&self) -> usize {
        self.p_primes.len()
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn top_anchors(&self) -> &[TorusPoint] {
        &self.top_anchors
    }

    pub fn mid_anchors(&self) -> &[TorusPoint] {
        &self.mid_anchors
    }

    pub fn p_primes(&self) -> &[u64] {
        &self.p_primes
    }

    pub fn q_primes(&self) -> &[u64] {
        &self.q_primes
    }

    pub fn eps(&self) -> &[Rational] {
        &self.eps
    }

    pub fn eps_prime(&self) -> &[Rational] {
        &self.eps_prime
    }

    /// The common tolerance when all `eps_j` and `eps'_j` agree.
    pub fn uniform_eps(&self) -> Option<&Rational> {
        let first = &self.eps[0];
        self.eps
            .iter()
            .chain(&self.eps_prime)
            .all(|e| e == first)
            .then_some(first)
    }

    /// The first `len` links as a pre-path of their own.
    pub fn prefix(&self, len: usize) -> Result<PrePath> {
        if len == 0 || len > self.k() {
            return Err(Error::IndexOutOfRange {
                index: len,
                max: self.k(),
            });
        }
        Ok(PrePath {
            modulus: self.modulus.clone(),
            top_anchors: self.top_anchors[..=len].to_vec(),
            mid_anchors: self.mid_anchors[..len].to_vec(),
            p_primes: self.p_primes[..len].to_vec(),
            q_primes: self.q_primes[..len].to_vec(),
            eps: self.eps[..len].to_vec(),
            eps_prime: self.eps_prime[..len].to_vec(),
        })
    }

    /// The same chain walked backwards: anchors reversed, the prime lists
    /// become `(q_k..q_1)` and `(p_k..p_1)`, and the two tolerance roles swap.
    pub fn inverted(&self) -> PrePath {
        let rev = |v: &[u64]| v.iter().rev().copied().collect::<Vec<_>>();
        PrePath {
            modulus: self.modulus.clone(),
            top_anchors: self.top_anchors.iter().rev().cloned().collect(),
            mid_anchors: self.mid_anchors.iter().rev().cloned().collect(),
            p_primes: rev(&self.q_primes),
            q_primes: rev(&self.p_primes),
            eps: self.eps_prime.iter().rev().cloned().collect(),
            eps_prime: self.eps.iter().rev().cloned().collect(),
        }
    }
}

fn check_links(
    top: &[TorusPoint],
    mid: &[TorusPoint],
    p: &[u64],
    q: &[u64],
    eps: &[Rational],
    eps_prime: &[Rational],
) -> std::result::Result<(), (usize, String)> {
    for j in 0..p.len() {
        let q_side = top[j + 1]
            .scale_u64(q[j])
            .distance(&mid[j])
            .map_err(|e| (j, e.to_string()))?;
        if q_side >= eps[j] {
            return Err((
                j,
                format!(
                    "||q a_next - m|| = {} is not below {}",
                    rational::to_string(&q_side),
                    rational::to_string(&eps[j])
                ),
            ));
        }
        let p_side = top[j]
            .scale_u64(p[j])
            .distance(&mid[j])
            .map_err(|e| (j, e.to_string()))?;
        if p_side >= eps_prime[j] {
            return Err((
                j,
                format!(
                    "||p a - m|| = {} is not below {}",
                    rational::to_string(&p_side),
                    rational::to_string(&eps_prime[j])
                ),
            ));
        }
    }
    Ok(())
}

/// Given `||p1 a1 - p2 a2||_Q < eps1 + eps2`, returns `alpha` with
/// `||p2 alpha - a1|| < eps1 / p1` and `||p1 alpha - a2|| < eps2 / p2`.
pub fn merge_two(
    a1: &TorusPoint,
    a2: &TorusPoint,
    p1: u64,
    p2: u64,
    eps1: &Rational,
    eps2: &Rational,
) -> Result<TorusPoint> {
    if p1 == p2 {
        return Err(Error::EqualPrimes(p1));
    }
    let distance = a1.scale_u64(p1).distance(&a2.scale_u64(p2))?;
    let bound = eps1 + eps2;
    if distance >= bound {
        return Err(Error::HypothesisViolated {
            distance: rational::to_string(&distance),
            bound: rational::to_string(&bound),
        });
    }
    let pair = closest_lift_pair(a1, a2, p1, p2)?;
    convex_combine(
        pair.first.value(),
        &pair.second_near_first(),
        eps1,
        eps2,
        a1.modulus(),
    )
}

/// One row of links handed to [`layer_step`]: `top` has one more entry than
/// the other slices.
#[derive(Clone, Copy, Debug)]
pub struct LayerSlice<'a> {
    pub top: &'a [TorusPoint],
    pub mid: &'a [TorusPoint],
    pub p_primes: &'a [u64],
    pub q_primes: &'a [u64],
    /// Bounds on `||q_j top_{j+1} - mid_j||`.
    pub eps: &'a [Rational],
    /// Bounds on `||p_j top_j - mid_j||`.
    pub eps_prime: &'a [Rational],
}

impl<'a> LayerSlice<'a> {
    pub fn of(pp: &'a PrePath) -> Self {
        LayerSlice {
            top: &pp.top_anchors,
            mid: &pp.mid_anchors,
            p_primes: &pp.p_primes,
            q_primes: &pp.q_primes,
            eps: &pp.eps,
            eps_prime: &pp.eps_prime,
        }
    }

    fn len(&self) -> usize {
        self.p_primes.len()
    }
}

/// Merges every neighbouring pair of `top`. Entry `j` of the result satisfies
/// `||p_j out_j - top_{j+1}|| < eps_j / q_j` and
/// `||q_j out_j - top_j|| < eps'_j / p_j`.
pub fn layer_step(slice: LayerSlice<'_>) -> Result<Vec<TorusPoint>> {
    let n = slice.len();
    if slice.top.len() != n + 1
        || slice.mid.len() != n
        || slice.q_primes.len() != n
        || slice.eps.len() != n
        || slice.eps_prime.len() != n
    {
        return Err(Error::InvalidPrePath("layer slice lengths disagree".into()));
    }
    check_links(
        slice.top,
        slice.mid,
        slice.p_primes,
        slice.q_primes,
        slice.eps,
        slice.eps_prime,
    )
    .map_err(|(j, msg)| Error::LayerStep {
        index: j + 1,
        source: Box::new(Error::InvalidPrePath(msg)),
    })?;
    (0..n)
        .map(|j| {
            merge_two(
                &slice.top[j],
                &slice.top[j + 1],
                slice.p_primes[j],
                slice.q_primes[j],
                &slice.eps_prime[j],
                &slice.eps[j],
            )
            .map_err(|e| Error::LayerStep {
                index: j + 1,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Which primes and tolerances produced one layer of the triangle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerRecord {
    pub p_primes: Vec<u64>,
    pub q_primes: Vec<u64>,
    #[serde(with = "rational::serde_str_vec")]
    pub eps: Vec<Rational>,
    #[serde(with = "rational::serde_str_vec")]
    pub eps_prime: Vec<Rational>,
}

/// The triangle of frequencies over a pre-path. `layers[0]` holds the top
/// anchors and `layers[k]` the single top element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pyramid {
    modulus: Modulus,
    layers: Vec<Vec<TorusPoint>>,
    records: Vec<LayerRecord>,
}

impl Pyramid {
    pub fn k(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn layers(&self) -> &[Vec<TorusPoint>] {
        &self.layers
    }

    /// `records[j]` describes the step that built `layers[j + 1]`.
    pub fn records(&self) -> &[LayerRecord] {
        &self.records
    }

    /// `alpha_1^{(j)}` for `j = 1..=k+1`, as a 0-based vector.
    pub fn anchor_column(&self) -> Vec<&TorusPoint> {
        self.layers.iter().map(|l| &l[0]).collect()
    }

    /// Last entry of every layer: the anchor column of the inverted pre-path.
    pub fn right_column(&self) -> Vec<&TorusPoint> {
        self.layers.iter().map(|l| l.last().expect("nonempty layer")).collect()
    }

    /// Entry `j` (1-based) of the anchor column.
    pub fn anchor(&self, j: usize) -> &TorusPoint {
        &self.layers[j - 1][0]
    }

    pub fn top(&self) -> &TorusPoint {
        &self.layers[self.k()][0]
    }
}

/// Iterates [`layer_step`] `k` times. Layer `L + 1` is merged from layer `L`
/// using `p_1..p_{k+1-L}` and `q_L..q_k`, with layer `L - 1` (shifted by one)
/// playing the role of the intermediate anchors.
pub fn build_pyramid(pp: &PrePath) -> Result<Pyramid> {
    let k = pp.k();
    let mut layers = vec![pp.top_anchors.clone()];
    let mut records = Vec::with_capacity(k);
    let mut mid = pp.mid_anchors.clone();
    let mut eps = pp.eps.clone();
    let mut eps_prime = pp.eps_prime.clone();

    for level in 1..=k {
        let n = k + 1 - level;
        let p = &pp.p_primes[..n];
        let q = &pp.q_primes[level - 1..];
        let top = &layers[level - 1];
        let next = layer_step(LayerSlice {
            top,
            mid: &mid,
            p_primes: p,
            q_primes: q,
            eps: &eps,
            eps_prime: &eps_prime,
        })?;
        records.push(LayerRecord {
            p_primes: p.to_vec(),
            q_primes: q.to_vec(),
            eps: eps.clone(),
            eps_prime: eps_prime.clone(),
        });
        let next_eps_prime: Vec<Rational> = (0..n - 1)
            .map(|i| &eps[i] / rational::int(q[i]))
            .collect();
        let next_eps: Vec<Rational> = (0..n - 1)
            .map(|i| &eps_prime[i + 1] / rational::int(p[i + 1]))
            .collect();
        mid = top[1..n].to_vec();
        eps = next_eps;
        eps_prime = next_eps_prime;
        layers.push(next);
    }
    Ok(Pyramid {
        modulus: pp.modulus.clone(),
        layers,
        records,
    })
}

/// Closed-form bound on `||q_j alpha_1^{(j+1)} - alpha_1^{(j)}||` for a
/// uniform-tolerance pre-path:
/// `eps / (p_1 .. p_{floor((j-1)/2)+1} * q_{j-1} .. q_{j-ceil((j-1)/2)})`.
pub fn predicted_gap(j: usize, eps: &Rational, p_primes: &[u64], q_primes: &[u64]) -> Result<Rational> {
    let k = p_primes.len().min(q_primes.len());
    if j == 0 || j > k {
        return Err(Error::IndexOutOfRange { index: j, max: k });
    }
    let p_count = (j - 1) / 2 + 1;
    let q_count = j / 2; // ceil((j-1)/2)
    let mut denom = BigInt::one();
    for &p in &p_primes[..p_count] {
        denom *= p;
    }
    for i in 1..=q_count {
        denom *= q_primes[j - i - 1];
    }
    Ok(eps / Rational::from_integer(denom))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundRow {
    pub j: usize,
    #[serde(with = "rational::serde_str")]
    pub actual: Rational,
    #[serde(with = "rational::serde_str")]
    pub predicted: Rational,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Compares every actual anchor-column gap against [`predicted_gap`].
pub fn verify_pyramid(pp: &PrePath, py: &Pyramid) -> Result<BoundReport> {
    let eps = pp
        .uniform_eps()
        .ok_or_else(|| Error::InvalidPrePath("bound check needs uniform tolerances".into()))?;
    if py.k() != pp.k() || py.layers[0] != pp.top_anchors {
        return Err(Error::PathPyramidMismatch(
            "pyramid was not built from this pre-path".into(),
        ));
    }
    let rows = (1..=pp.k())
        .map(|j| {
            let actual = py
                .anchor(j + 1)
                .scale_u64(pp.q_primes[j - 1])
                .distance(py.anchor(j))?;
            let predicted = predicted_gap(j, eps, &pp.p_primes, &pp.q_primes)?;
            Ok(BoundRow {
                j,
                pass: actual < predicted,
                actual,
                predicted,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport { rows })
}

/// JSON dump of a pyramid: the triangle as `"num/den"` strings, the prime
/// bookkeeping per layer, and optionally the bound table.
#[derive(Clone, Debug, Serialize)]
pub struct PyramidDump<'a> {
    pub modulus: &'a Modulus,
    pub layers: Vec<Vec<String>>,
    pub records: &'a [LayerRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<&'a BoundReport>,
}

impl Pyramid {
    pub fn dump<'a>(&'a self, report: Option<&'a BoundReport>) -> PyramidDump<'a> {
        PyramidDump {
            modulus: &self.modulus,
            layers: self
                .layers
                .iter()
                .map(|l| l.iter().map(|t| rational::to_string(t.value())).collect())
                .collect(),
            records: &self.records,
            report,
        }
    }
}

/// Planted pre-path: anchors `a_i = (p_1..p_{i-1} q_i..q_k) alpha` with
/// intermediate anchors `p_j a_j`, so every link is exact.
pub fn planted_prepath(
    alpha: &TorusPoint,
    p_primes: &[u64],
    q_primes: &[u64],
    eps: &Rational,
) -> Result<PrePath> {
    let k = p_primes.len();
    let tops: Vec<TorusPoint> = (0..=k)
        .map(|i| {
            let mult = rational::product(&p_primes[..i]) * rational::product(&q_primes[i..]);
            alpha.scale(&mult)
        })
        .collect();
    let mids: Vec<TorusPoint> = (0..k).map(|j| tops[j].scale_u64(p_primes[j])).collect();
    PrePath::uniform(
        alpha.modulus().clone(),
        tops,
        mids,
        p_primes.to_vec(),
        q_primes.to_vec(),
        eps.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::torus::reduce;

    fn one() -> Modulus {
        Modulus::one()
    }

    fn pt(n: i64, d: i64) -> TorusPoint {
        reduce(&rat(n, d), &one())
    }

    #[test]
    fn merge_exact_incidence() {
        let a = merge_two(&pt(3, 10), &pt(1, 5), 2, 3, &rat(1, 7), &rat(1, 9)).unwrap();
        assert_eq!(a.value(), &rat(1, 10));
        assert_eq!(a.scale_u64(3).distance(&pt(3, 10)).unwrap(), rat(0, 1));
        assert_eq!(a.scale_u64(2).distance(&pt(1, 5)).unwrap(), rat(0, 1));
    }

    #[test]
    fn merge_derived_example() {
        let eps = rat(1, 50);
        let a = merge_two(&pt(3, 10), &pt(21, 100), 2, 3, &eps, &eps).unwrap();
        assert_eq!(a.value(), &rat(41, 400));
        // direct substitution
        let r2 = a.scale_u64(2).distance(&pt(21, 100)).unwrap();
        let r3 = a.scale_u64(3).distance(&pt(3, 10)).unwrap();
        assert_eq!(r2, rat(1, 200));
        assert_eq!(r3, rat(3, 400));
        assert!(r2 < &eps / rat(3, 1));
        assert!(r3 < &eps / rat(2, 1));
    }

    #[test]
    fn merge_rejects_violated_premise() {
        let e = merge_two(&pt(0, 1), &pt(1, 2), 2, 3, &rat(1, 10), &rat(1, 10));
        assert!(matches!(e, Err(Error::HypothesisViolated { .. })));
    }

    fn derived_k1() -> PrePath {
        // a_1 = 3/10, a_2 = 21/100, p = 2, q = 3, m_2 = p a_1 = 3/5
        PrePath::uniform(
            one(),
            vec![pt(3, 10), pt(21, 100)],
            vec![pt(3, 5)],
            vec![2],
            vec![3],
            rat(1, 25),
        )
        .unwrap()
    }

    #[test]
    fn single_step_pyramid() {
        let pp = derived_k1();
        let out = layer_step(LayerSlice::of(&pp)).unwrap();
        // weights eps' = eps so the merge is the midpoint 41/400 again
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].value(), &rat(41, 400));
        let py = build_pyramid(&pp).unwrap();
        assert_eq!(py.layers().iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1]);
        assert_eq!(py.top().value(), &rat(41, 400));
        let report = verify_pyramid(&pp, &py).unwrap();
        assert!(report.all_pass());
        assert_eq!(report.rows[0].actual, rat(3, 400));
        assert_eq!(report.rows[0].predicted, rat(1, 50));
    }

    #[test]
    fn zero_eps_prime_witness() {
        // mid anchors equal p_j a_j exactly: p-side residual 0
        let q = Modulus::from_primes(&[7]).unwrap();
        let a1 = reduce(&rat(5, 3), &q);
        let a2 = reduce(&rat(17, 11), &q);
        let m = a1.scale_u64(2);
        let q_side = a2.scale_u64(3).distance(&m).unwrap();
        let eps = &q_side + rat(1, 1000);
        let pp = PrePath::uniform(q, vec![a1, a2], vec![m], vec![2], vec![3], eps.clone()).unwrap();
        let out = layer_step(LayerSlice::of(&pp)).unwrap();
        assert!(out[0].scale_u64(2).distance(&pp.top_anchors()[1]).unwrap() < &eps / rat(3, 1));
        assert!(out[0].scale_u64(3).distance(&pp.top_anchors()[0]).unwrap() < &eps / rat(2, 1));
    }

    #[test]
    fn layer_step_reports_failing_index() {
        let bad = LayerSlice {
            top: &[pt(0, 1), pt(0, 1), pt(1, 2)],
            mid: &[pt(0, 1), pt(0, 1)],
            p_primes: &[2, 5],
            q_primes: &[3, 7],
            eps: &[rat(1, 10), rat(1, 10)],
            eps_prime: &[rat(1, 10), rat(1, 10)],
        };
        match layer_step(bad) {
            Err(Error::LayerStep { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected layer error, got {other:?}"),
        }
    }

    #[test]
    fn predicted_gap_closed_form() {
        let eps = rat(1, 1);
        let p = [2, 3, 11, 13];
        let q = [5, 7, 17, 19];
        assert_eq!(predicted_gap(1, &eps, &p, &q).unwrap(), rat(1, 2));
        assert_eq!(predicted_gap(2, &eps, &p, &q).unwrap(), rat(1, 10));
        assert_eq!(predicted_gap(3, &eps, &p, &q).unwrap(), rat(1, 42));
        // j = 4: p_1 p_2 and q_3 q_2
        assert_eq!(predicted_gap(4, &eps, &p, &q).unwrap(), rat(1, 2 * 3 * 17 * 7));
        assert!(predicted_gap(0, &eps, &p, &q).is_err());
        assert!(predicted_gap(5, &eps, &p, &q).is_err());
    }

    #[test]
    fn planted_k2_recovers_alpha() {
        let q = Modulus::from_primes(&[5, 7]).unwrap();
        let alpha = reduce(&rat(123, 457), &q);
        let (p, qs) = ([11, 13], [17, 19]);
        let pp = planted_prepath(&alpha, &p, &qs, &rat(1, 10)).unwrap();
        let py = build_pyramid(&pp).unwrap();
        assert!(verify_pyramid(&pp, &py).unwrap().all_pass());
        assert_eq!(py.top(), &alpha);
        for (i, a) in pp.top_anchors().iter().enumerate() {
            let mult = rational::product(&p[..i]) * rational::product(&qs[i..]);
            assert_eq!(&py.top().scale(&mult), a);
        }
    }

    #[test]
    fn bookkept_tolerances_match_closed_form() {
        let q = Modulus::one();
        let alpha = reduce(&rat(3, 1009), &q);
        let (p, qs) = ([2u64, 3, 5, 7, 11], [13u64, 17, 19, 23, 29]);
        let eps = rat(1, 7);
        let pp = planted_prepath(&alpha, &p, &qs, &eps).unwrap();
        let py = build_pyramid(&pp).unwrap();
        // the step building layer j+1 bounds gap j by eps'_1 / p_1
        for j in 1..=pp.k() {
            let rec = &py.records()[j - 1];
            let tracked = &rec.eps_prime[0] / rational::int(p[0]);
            assert_eq!(tracked, predicted_gap(j, &eps, &p, &qs).unwrap(), "j = {j}");
        }
    }

    #[test]
    fn inversion_swaps_roles() {
        let pp = derived_k1();
        let inv = pp.inverted();
        assert_eq!(inv.p_primes(), &[3]);
        assert_eq!(inv.q_primes(), &[2]);
        assert_eq!(inv.inverted(), pp);
        let a = build_pyramid(&pp).unwrap();
        let b = build_pyramid(&inv).unwrap();
        assert_eq!(a.top(), b.top());
    }

    #[test]
    fn dump_is_json() {
        let pp = derived_k1();
        let py = build_pyramid(&pp).unwrap();
        let report = verify_pyramid(&pp, &py).unwrap();
        let v = serde_json::to_value(py.dump(Some(&report))).unwrap();
        assert_eq!(v["layers"][1][0], "41/400");
        assert_eq!(v["report"]["rows"][0]["pass"], true);
    }
}
