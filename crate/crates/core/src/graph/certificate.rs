//! Exact certificates for the physical drift along a path and for how well
//! the pyramid top element reproduces every anchor.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Path;
use crate::pyramid::{build_pyramid, predicted_gap, Pyramid};
use crate::rational::{self, Rational};
use crate::torus::reduce;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DriftCertificate {
    pub m: usize,
    /// `prod_{i <= m} q_i / p_i`.
    #[serde(with = "rational::serde_str")]
    pub ratio: Rational,
    /// `|x_1 ratio - x_{m+1}|`.
    #[serde(with = "rational::serde_str")]
    pub drift: Rational,
    #[serde(with = "rational::serde_str")]
    pub bound: Rational,
    pub pass: bool,
}

/// Drift of `x_1` under the first `m` prime ratios against the telescoped
/// sum `sum_t s_t prod_{t < i <= m} q_i / p_i` of the step slacks.
pub fn ratio_drift_certificate(path: &Path, m: usize) -> Result<DriftCertificate> {
    let xs: Vec<Rational> = path.sites().iter().map(|s| s.x.clone()).collect();
    drift_certificate(&xs, path.p_primes(), path.q_primes(), m)
}

/// [`ratio_drift_certificate`] on raw positions and prime lists, with no
/// distinctness requirement on the primes.
pub fn drift_certificate(xs: &[Rational], p: &[u64], q: &[u64], m: usize) -> Result<DriftCertificate> {
    let k = p.len().min(q.len()).min(xs.len().saturating_sub(1));
    if m == 0 || m > k {
        return Err(Error::IndexOutOfRange { index: m, max: k });
    }
    let step = |i: usize| rational::int(q[i - 1]) / rational::int(p[i - 1]);
    let ratio = (1..=m).fold(Rational::one(), |acc, i| acc * step(i));
    let drift = rational::abs(&(&xs[0] * &ratio - &xs[m]));
    let mut bound = Rational::zero();
    let mut tail = Rational::one();
    for t in (1..=m).rev() {
        bound += rational::abs(&(&xs[t - 1] * step(t) - &xs[t])) * &tail;
        tail *= step(t);
    }
    Ok(DriftCertificate {
        m,
        pass: drift <= bound,
        ratio,
        drift,
        bound,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnchorCertificate {
    pub j: usize,
    pub m: usize,
    #[serde(with = "rational::serde_str")]
    pub actual: Rational,
    #[serde(with = "rational::serde_str")]
    pub bound: Rational,
    pub pass: bool,
}

/// `sum_{t=m}^{j-1} gap(t) prod_{i=m}^{t-1} q_i` with `gap` the closed-form
/// layer bound for the prime lists `p`, `q`.
fn telescoped_gap(eps: &Rational, p: &[u64], q: &[u64], m: usize, j: usize) -> Result<Rational> {
    let mut bound = Rational::zero();
    let mut mult = BigInt::one();
    for t in m..j {
        bound += predicted_gap(t, eps, p, q)? * Rational::from_integer(mult.clone());
        mult *= q[t - 1];
    }
    Ok(bound)
}

fn uniform_eps(path: &Path, py: &Pyramid) -> Result<Rational> {
    let mismatch = |what: &str| Error::PathPyramidMismatch(what.into());
    if py.k() != path.k() {
        return Err(mismatch("lengths differ"));
    }
    if py.modulus() != path.modulus() {
        return Err(mismatch("moduli differ"));
    }
    let first = &py.records()[0];
    if first.p_primes != path.p_primes() || first.q_primes != path.q_primes() {
        return Err(mismatch("prime lists differ"));
    }
    let anchors_match = py.layers()[0]
        .iter()
        .zip(path.sites())
        .all(|(a, s)| a == &reduce(&s.alpha, path.modulus()));
    if !anchors_match {
        return Err(mismatch("anchors differ"));
    }
    let eps = &first.eps[0];
    if first.eps.iter().chain(&first.eps_prime).any(|e| e != eps) {
        return Err(Error::InvalidPrePath("certificates need uniform tolerances".into()));
    }
    Ok(eps.clone())
}

/// `||(q_m .. q_{j-1}) alpha_1^{(j)} - alpha_1^{(m)}||` against the
/// telescoped layer bounds, for `1 <= m < j <= k + 1`.
pub fn anchor_bound_certificate(path: &Path, py: &Pyramid, j: usize, m: usize) -> Result<AnchorCertificate> {
    let eps = uniform_eps(path, py)?;
    let k = path.k();
    if j > k + 1 || j < 2 {
        return Err(Error::IndexOutOfRange { index: j, max: k + 1 });
    }
    if m == 0 || m >= j {
        return Err(Error::IndexOutOfRange { index: m, max: j - 1 });
    }
    let q = path.q_primes();
    let mult = rational::product(&q[m - 1..j - 1]);
    let actual = py.anchor(j).scale(&mult).distance(py.anchor(m))?;
    let bound = telescoped_gap(&eps, path.p_primes(), q, m, j)?;
    Ok(AnchorCertificate {
        j,
        m,
        pass: actual <= bound,
        actual,
        bound,
    })
}

/// `||(p_1 .. p_{j-1} q_j .. q_k) top - alpha_j||` for `1 <= j <= k + 1`.
///
/// The bound is `(p_1 .. p_{j-1}) B_fwd + B_inv`: `B_fwd` telescopes the
/// anchor column from `j` up to the top, and `B_inv` telescopes the inverted
/// sub-pyramid on the first `j - 1` links, whose apex is `alpha_1^{(j)}`.
/// Reported with `m = 0`.
pub fn top_certificate(path: &Path, py: &Pyramid, j: usize) -> Result<AnchorCertificate> {
    let eps = uniform_eps(path, py)?;
    let k = path.k();
    if j == 0 || j > k + 1 {
        return Err(Error::IndexOutOfRange { index: j, max: k + 1 });
    }
    let (p, q) = (path.p_primes(), path.q_primes());
    let p_head = rational::product(&p[..j - 1]);
    let mult = &p_head * rational::product(&q[j - 1..]);
    let actual = py.top().scale(&mult).distance(&py.layers()[0][j - 1])?;

    let forward = telescoped_gap(&eps, p, q, j, k + 1)?;
    let n = j - 1;
    let inverse = if n == 0 {
        Rational::zero()
    } else {
        let p_inv: Vec<u64> = q[..n].iter().rev().copied().collect();
        let q_inv: Vec<u64> = p[..n].iter().rev().copied().collect();
        telescoped_gap(&eps, &p_inv, &q_inv, 1, n + 1)?
    };
    let bound = Rational::from_integer(p_head) * forward + inverse;
    Ok(AnchorCertificate {
        j,
        m: 0,
        pass: actual <= bound,
        actual,
        bound,
    })
}

/// One certificate outcome, in the CSV layout
/// `path_id,kind,j,m,actual,bound,pass`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertificateRow {
    pub path_id: usize,
    pub kind: &'static str,
    pub j: usize,
    pub m: usize,
    #[serde(with = "rational::serde_str")]
    pub actual: Rational,
    #[serde(with = "rational::serde_str")]
    pub bound: Rational,
    pub pass: bool,
}

impl CertificateRow {
    pub const CSV_HEADER: &'static str = "path_id,kind,j,m,actual,bound,pass";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.path_id,
            self.kind,
            self.j,
            self.m,
            rational::to_string(&self.actual),
            rational::to_string(&self.bound),
            self.pass
        )
    }
}

/// Every drift, anchor and top certificate of `path` under tolerance `eps`.
pub fn certify_path(path_id: usize, path: &Path, eps: &Rational) -> Result<Vec<CertificateRow>> {
    let pp = path.prepath(eps)?;
    let py = build_pyramid(&pp)?;
    let k = path.k();
    let mut rows = Vec::new();
    for m in 1..=k {
        let c = ratio_drift_certificate(path, m)?;
        rows.push(CertificateRow {
            path_id,
            kind: "drift",
            j: m + 1,
            m: 1,
            actual: c.drift,
            bound: c.bound,
            pass: c.pass,
        });
    }
    for j in 2..=k + 1 {
        for m in 1..j {
            let c = anchor_bound_certificate(path, &py, j, m)?;
            rows.push(row(path_id, "anchor", c));
        }
    }
    for j in 1..=k + 1 {
        let c = top_certificate(path, &py, j)?;
        rows.push(row(path_id, "top", c));
    }
    Ok(rows)
}

fn row(path_id: usize, kind: &'static str, c: AnchorCertificate) -> CertificateRow {
    CertificateRow {
        path_id,
        kind,
        j: c.j,
        m: c.m,
        actual: c.actual,
        bound: c.bound,
        pass: c.pass,
    }
}
