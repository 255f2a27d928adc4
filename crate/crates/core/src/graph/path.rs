use num_traits::Signed;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{edge_phase, Configuration, Edge, Site};
use crate::pyramid::PrePath;
use crate::rational::{self, Rational};
use crate::torus::{combine_moduli_within, norm_mod, reduce, signed_rep, Modulus};

/// Where the `p` and `q` labels of a path come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `p` labels from the first prime set, `q` labels from the second.
    Split,
    /// The inverse of a split path.
    Reversed,
    Mixed,
}

impl Orientation {
    fn inverse(self) -> Self {
        match self {
            Orientation::Split => Orientation::Reversed,
            Orientation::Reversed => Orientation::Split,
            Orientation::Mixed => Orientation::Mixed,
        }
    }

    fn of(cfg: &Configuration, p: &[u64], q: &[u64]) -> Self {
        if p.iter().all(|&x| cfg.in_p_set(x)) && q.iter().all(|&x| cfg.in_q_set(x)) {
            Orientation::Split
        } else if p.iter().all(|&x| cfg.in_q_set(x)) && q.iter().all(|&x| cfg.in_p_set(x)) {
            Orientation::Reversed
        } else {
            Orientation::Mixed
        }
    }
}

/// A walk `s_1 -> .. -> s_{k+1}` where step `t` carries primes `(p_t, q_t)`
/// with `x_t q_t / p_t ~ x_{t+1}` and `p_t alpha_t ~ q_t alpha_{t+1}` modulo
/// every prime in `witness`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Path {
    nodes: Vec<usize>,
    sites: Vec<Site>,
    p_primes: Vec<u64>,
    q_primes: Vec<u64>,
    witness: Vec<u64>,
    modulus: Modulus,
    orientation: Orientation,
}

impl Path {
    /// Raw constructor. `witness` is sorted and deduplicated; the modulus is
    /// its product.
    pub fn new(
        nodes: Vec<usize>,
        sites: Vec<Site>,
        p_primes: Vec<u64>,
        q_primes: Vec<u64>,
        mut witness: Vec<u64>,
        orientation: Orientation,
    ) -> Result<Self> {
        let k = p_primes.len();
        if k == 0 {
            return Err(Error::InvalidPath("length must be at least 1".into()));
        }
        if q_primes.len() != k || nodes.len() != k + 1 || sites.len() != k + 1 {
            return Err(Error::InvalidPath(format!(
                "length {k} needs {} sites and {k} q primes",
                k + 1
            )));
        }
        check_distinct(p_primes.iter().chain(&q_primes))?;
        witness.sort_unstable();
        witness.dedup();
        let modulus = Modulus::from_primes(&witness)?;
        for &p in p_primes.iter().chain(&q_primes) {
            modulus.check_prime(p)?;
        }
        Ok(Path {
            nodes,
            sites,
            p_primes,
            q_primes,
            witness,
            modulus,
            orientation,
        })
    }

    /// The walk along `edges` (each used forward). The witness set is the
    /// intersection of the edge witnesses.
    pub fn from_edges(cfg: &Configuration, edges: &[&Edge]) -> Result<Self> {
        let first = edges
            .first()
            .ok_or_else(|| Error::InvalidPath("no edges".into()))?;
        let mut nodes = vec![first.i];
        let mut witness = first.witness.clone();
        for e in edges {
            if *nodes.last().expect("nonempty") != e.i {
                return Err(Error::EndpointMismatch);
            }
            nodes.push(e.j);
            witness.retain(|w| e.has_witness(*w));
        }
        if let Some(&bad) = nodes.iter().find(|&&n| n >= cfg.len()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                max: cfg.len(),
            });
        }
        let p: Vec<u64> = edges.iter().map(|e| e.p).collect();
        let q: Vec<u64> = edges.iter().map(|e| e.q).collect();
        let orientation = Orientation::of(cfg, &p, &q);
        let sites = nodes.iter().map(|&n| cfg.sites[n].clone()).collect();
        Path::new(nodes, sites, p, q, witness, orientation)
    }

    pub fn k(&self) -> usize {
        self.p_primes.len()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn start(&self) -> usize {
        self.nodes[0]
    }

    pub fn end(&self) -> usize {
        self.nodes[self.k()]
    }

    pub fn p_primes(&self) -> &[u64] {
        &self.p_primes
    }

    pub fn q_primes(&self) -> &[u64] {
        &self.q_primes
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.p_primes.iter().chain(&self.q_primes).copied()
    }

    pub fn witness(&self) -> &[u64] {
        &self.witness
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn is_split(&self) -> bool {
        self.orientation == Orientation::Split
    }

    /// `|x_t q_t / p_t - x_{t+1}|` for step `t` (1-based).
    pub fn step_slack(&self, t: usize) -> Rational {
        let x = &self.sites[t - 1].x;
        let next = &self.sites[t].x;
        (x * rational::int(self.q_primes[t - 1]) / rational::int(self.p_primes[t - 1]) - next).abs()
    }

    /// Checks every step against the path modulus by folding the per-witness
    /// closeness `||p_t alpha_t - q_t alpha_{t+1}||_w <= eps` through the
    /// coprime-moduli combination. Returns the largest step norm modulo the
    /// full path modulus.
    pub fn validate_modulus(&self, eps: &Rational) -> Result<Rational> {
        let mut worst = Rational::from_integer(0.into());
        for t in 0..self.k() {
            let phase = self.phase(t);
            let fail = |m: &dyn std::fmt::Display| {
                Error::InvalidPath(format!(
                    "step {} is not within {} modulo {m}",
                    t + 1,
                    rational::to_string(eps)
                ))
            };
            if let Some((&w0, rest)) = self.witness.split_first() {
                if &norm_mod(&phase, &w0.into()) > eps {
                    return Err(fail(&w0));
                }
                let mut done = vec![w0];
                for &w in rest {
                    let acc = Modulus::from_primes(&done)?;
                    let check = combine_moduli_within(&phase, &acc, &Modulus::from_primes(&[w])?, eps)?;
                    if !check.premises || !check.combined {
                        return Err(fail(&w));
                    }
                    done.push(w);
                }
            }
            let n = norm_mod(&phase, self.modulus.value());
            if n > worst {
                worst = n;
            }
        }
        Ok(worst)
    }

    fn phase(&self, t: usize) -> Rational {
        edge_phase(
            &self.sites[t].alpha,
            &self.sites[t + 1].alpha,
            self.p_primes[t],
            self.q_primes[t],
        )
    }

    /// The pre-path modulo the path modulus with uniform tolerance `eps`.
    /// Top anchors are the site frequencies and each intermediate anchor is
    /// the midpoint of `p_t alpha_t` and `q_t alpha_{t+1}`, so both links are
    /// at most half the step norm.
    pub fn prepath(&self, eps: &Rational) -> Result<PrePath> {
        self.validate_modulus(eps)?;
        let q = &self.modulus;
        let tops = self.sites.iter().map(|s| reduce(&s.alpha, q)).collect();
        let two = rational::int(2);
        let mids = (0..self.k())
            .map(|t| {
                let from = &self.sites[t].alpha * rational::int(self.p_primes[t]);
                let d = signed_rep(&-self.phase(t), q.value());
                reduce(&(from + d / &two), q)
            })
            .collect();
        PrePath::uniform(
            q.clone(),
            tops,
            mids,
            self.p_primes.clone(),
            self.q_primes.clone(),
            eps.clone(),
        )
    }
}

fn cat<T: Copy>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().chain(b).copied().collect()
}

fn check_distinct<'a, I: IntoIterator<Item = &'a u64>>(primes: I) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for &p in primes {
        if !seen.insert(p) {
            return Err(Error::PrimeCollision(p));
        }
    }
    Ok(())
}

/// The walk backwards with primes `(q_k..q_1)` and `(p_k..p_1)`.
pub fn invert_path(path: &Path) -> Path {
    let rev = |v: &[u64]| v.iter().rev().copied().collect::<Vec<_>>();
    Path {
        nodes: path.nodes.iter().rev().copied().collect(),
        sites: path.sites.iter().rev().cloned().collect(),
        p_primes: rev(&path.q_primes),
        q_primes: rev(&path.p_primes),
        witness: path.witness.clone(),
        modulus: path.modulus.clone(),
        orientation: path.orientation.inverse(),
    }
}

/// `first` followed by `second`. The witness set is the intersection of both.
pub fn concat_paths(first: &Path, second: &Path) -> Result<Path> {
    if first.end() != second.start() || first.sites[first.k()] != second.sites[0] {
        return Err(Error::EndpointMismatch);
    }
    let all: Vec<u64> = first.primes().chain(second.primes()).collect();
    check_distinct(&all)?;
    let witness: Vec<u64> = first
        .witness
        .iter()
        .copied()
        .filter(|w| second.witness.binary_search(w).is_ok())
        .collect();
    let orientation = if first.orientation == second.orientation {
        first.orientation
    } else {
        Orientation::Mixed
    };
    Path::new(
        cat(&first.nodes, &second.nodes[1..]),
        first.sites.iter().chain(&second.sites[1..]).cloned().collect(),
        cat(&first.p_primes, &second.p_primes),
        cat(&first.q_primes, &second.q_primes),
        witness,
        orientation,
    )
}
