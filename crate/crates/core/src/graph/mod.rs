//! Configurations of sites `(x, alpha)`, prime-labeled edges between them,
//! and walks along those edges.
//!
//! An edge `(i, j, p, q)` records that `x_i / p` and `x_j / q` are close and
//! that `p alpha_i - q alpha_j` is small modulo every witness prime `p'`.

mod certificate;
mod counting;
mod path;
mod search;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::torus::norm_mod;

pub use certificate::{
    anchor_bound_certificate, certify_path, drift_certificate, ratio_drift_certificate, top_certificate, AnchorCertificate,
    CertificateRow, DriftCertificate,
};
pub use counting::{collision_census, count_close_products, Census, CloseProducts, EndpointStats};
pub use path::{concat_paths, invert_path, Orientation, Path};
pub use search::{enumerate_split_paths, peel_core, peel_regular, Enumeration};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    #[serde(with = "rational::serde_str")]
    pub x: Rational,
    #[serde(with = "rational::serde_str")]
    pub alpha: Rational,
}

impl Site {
    pub fn new(x: Rational, alpha: Rational) -> Self {
        Site { x, alpha }
    }
}

/// Sites together with their separation and the split of `[P, 2P]` into the
/// disjoint prime sets used for `p` and `q` labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub sites: Vec<Site>,
    #[serde(with = "rational::serde_str")]
    pub separation: Rational,
    pub p_set: Vec<u64>,
    pub q_set: Vec<u64>,
}

impl Configuration {
    pub fn new(sites: Vec<Site>, separation: Rational, p_set: Vec<u64>, q_set: Vec<u64>) -> Result<Self> {
        let cfg = Configuration {
            sites,
            separation,
            p_set,
            q_set,
        };
        if let Some(p) = cfg.p_set.iter().find(|p| cfg.q_set.contains(p)) {
            return Err(Error::PrimeCollision(*p));
        }
        if let Some((a, b)) = cfg.separation_violation() {
            return Err(Error::InvalidParams(format!(
                "sites {a} and {b} are closer than the separation {}",
                rational::to_string(&cfg.separation)
            )));
        }
        Ok(cfg)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// First pair of site indices closer than the separation, if any.
    pub fn separation_violation(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.sites.len()).collect();
        order.sort_by(|&a, &b| self.sites[a].x.cmp(&self.sites[b].x));
        order
            .windows(2)
            .find(|w| &self.sites[w[1]].x - &self.sites[w[0]].x < self.separation)
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }

    pub fn in_p_set(&self, p: u64) -> bool {
        self.p_set.contains(&p)
    }

    pub fn in_q_set(&self, q: u64) -> bool {
        self.q_set.contains(&q)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub p: u64,
    pub q: u64,
    /// Ascending witness primes.
    pub witness: Vec<u64>,
    /// `|x_i / p - x_j / q|`.
    #[serde(with = "rational::serde_str")]
    pub slack: Rational,
}

impl Edge {
    /// Builds the edge and its slack from the configuration. The witness list
    /// is stored as given (sorted and deduplicated); use [`witness_primes`]
    /// to compute it.
    pub fn new(cfg: &Configuration, i: usize, j: usize, p: u64, q: u64, mut witness: Vec<u64>) -> Result<Self> {
        let n = cfg.len();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, max: n });
            }
        }
        if p == q {
            return Err(Error::EqualPrimes(p));
        }
        witness.sort_unstable();
        witness.dedup();
        Ok(Edge {
            slack: physical_slack(&cfg.sites[i].x, &cfg.sites[j].x, p, q),
            i,
            j,
            p,
            q,
            witness,
        })
    }

    /// The same relation read from `j` to `i`.
    pub fn reversed(&self) -> Edge {
        Edge {
            i: self.j,
            j: self.i,
            p: self.q,
            q: self.p,
            witness: self.witness.clone(),
            slack: self.slack.clone(),
        }
    }

    pub fn has_witness(&self, w: u64) -> bool {
        self.witness.binary_search(&w).is_ok()
    }

    pub fn is_split(&self, cfg: &Configuration) -> bool {
        cfg.in_p_set(self.p) && cfg.in_q_set(self.q)
    }
}

/// `|x_i / p - x_j / q|`.
pub fn physical_slack(x_i: &Rational, x_j: &Rational, p: u64, q: u64) -> Rational {
    (x_i / rational::int(p) - x_j / rational::int(q)).abs()
}

/// `p alpha_i - q alpha_j` as a real number.
pub fn edge_phase(alpha_i: &Rational, alpha_j: &Rational, p: u64, q: u64) -> Rational {
    alpha_i * rational::int(p) - alpha_j * rational::int(q)
}

/// Candidate primes `w` with `||p alpha_i - q alpha_j||_w <= eps`.
pub fn witness_primes(
    alpha_i: &Rational,
    alpha_j: &Rational,
    p: u64,
    q: u64,
    candidates: &[u64],
    eps: &Rational,
) -> Vec<u64> {
    let phase = edge_phase(alpha_i, alpha_j, p, q);
    candidates
        .iter()
        .copied()
        .filter(|&w| &norm_mod(&phase, &w.into()) <= eps)
        .collect()
}

/// Edges whose witness list contains `w`.
pub fn edges_with_witness(edges: &[Edge], w: u64) -> Vec<&Edge> {
    edges.iter().filter(|e| e.has_witness(w)).collect()
}

/// JSON form of a configuration and its edges.
#[derive(Clone, Debug, Serialize)]
pub struct GraphDump<'a> {
    pub sites: &'a [Site],
    #[serde(with = "rational::serde_str")]
    pub separation: Rational,
    pub p_set: &'a [u64],
    pub q_set: &'a [u64],
    pub edges: &'a [Edge],
}

pub fn dump_graph<'a>(cfg: &'a Configuration, edges: &'a [Edge]) -> GraphDump<'a> {
    GraphDump {
        sites: &cfg.sites,
        separation: cfg.separation.clone(),
        p_set: &cfg.p_set,
        q_set: &cfg.q_set,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    pub(crate) fn line_config() -> Configuration {
        let sites = vec![
            Site::new(int(1000), rat(0, 1)),
            Site::new(int(1182), rat(0, 1)),
            Site::new(int(1400), rat(0, 1)),
        ];
        Configuration::new(sites, int(10), vec![11, 13], vec![17, 19]).unwrap()
    }

    #[test]
    fn separation_and_partition_are_enforced() {
        let sites = vec![Site::new(int(0), int(0)), Site::new(int(5), int(0))];
        assert!(Configuration::new(sites.clone(), int(10), vec![3], vec![5]).is_err());
        assert!(Configuration::new(sites.clone(), int(5), vec![3], vec![5]).is_ok());
        assert!(matches!(
            Configuration::new(sites, int(1), vec![3, 5], vec![5]),
            Err(Error::PrimeCollision(5))
        ));
    }

    #[test]
    fn edge_reverse_keeps_slack_and_witness() {
        let cfg = line_config();
        let e = Edge::new(&cfg, 0, 1, 11, 13, vec![7, 5]).unwrap();
        assert_eq!(e.slack, rat(2, 143));
        assert_eq!(e.witness, vec![5, 7]);
        let r = e.reversed();
        assert_eq!((r.i, r.j, r.p, r.q), (1, 0, 13, 11));
        assert_eq!(r.slack, physical_slack(&cfg.sites[1].x, &cfg.sites[0].x, 13, 11));
        assert_eq!(r.reversed(), e);
    }

    #[test]
    fn witnesses_by_direct_norm() {
        // 2 * (1/4) - 3 * (1/6) = 0: every candidate qualifies.
        assert_eq!(witness_primes(&rat(1, 4), &rat(1, 6), 2, 3, &[5, 7], &rat(0, 1)), vec![5, 7]);
        // phase 5 + 1/10: distance 1/10 mod 5, 2 + 1/10 mod 3 (norm 9/10), 5 + 1/10 mod 7 (norm 19/10)
        let w = witness_primes(&rat(51, 20), &int(0), 2, 3, &[3, 5, 7], &rat(1, 5));
        assert_eq!(w, vec![5]);
    }
}
