//! Seeded synthetic configurations with a planted global frequency.
//!
//! Sites sit at integer positions in `[X/(10K), 2X/K]`, pairwise at least
//! `R = H/K` apart, with frequencies `alpha_x = a_x W / q* + T*/x + noise`
//! where `W` is the product of the witness primes. Edges are found by
//! looking for the site nearest to `x q / p` and are kept only if they pass
//! both thresholds exactly.

use std::collections::{HashSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{physical_slack, witness_primes, Configuration, Edge, Site};
use crate::primes::dyadic;
use crate::rational::{self, Rational};

pub const SCHEMA: u32 = 1;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    #[serde(rename = "X")]
    pub x: u64,
    #[serde(rename = "H")]
    pub h: u64,
    #[serde(rename = "K")]
    pub k: u64,
    #[serde(rename = "P")]
    pub p: u64,
    #[serde(rename = "P_prime")]
    pub p_prime: u64,
    #[serde(with = "rational::serde_str")]
    pub eps_edge: Rational,
    #[serde(with = "rational::serde_str")]
    pub s_edge: Rational,
    pub site_count: usize,
    /// Fraction of the witness window tried per edge.
    #[serde(with = "rational::serde_str")]
    pub witness_density: Rational,
    /// Stop after this many edges; `None` keeps every verified candidate.
    #[serde(default)]
    pub edge_target: Option<usize>,
    /// Frequency noise as a fraction of `eps_edge`.
    #[serde(with = "rational::serde_str", default = "zero")]
    pub noise_level: Rational,
    pub d_min: usize,
    pub k_max: usize,
    /// The constant `B` of the path-count range.
    #[serde(with = "rational::serde_str")]
    pub b_ratio: Rational,
    #[serde(with = "rational::serde_str")]
    pub c_cal: Rational,
    pub seed: u64,
}

fn zero() -> Rational {
    Rational::zero()
}

/// Which asymptotic hypotheses hold at the chosen scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateFlags {
    /// `log(X / (H B log X)) / (2 log 2P)`.
    pub path_count_k_max: f64,
    /// `1 <= k_max <= path_count_k_max`.
    pub path_count: bool,
    /// `floor(path_count_k_max)`.
    pub k0: i64,
    /// `k_max <= log(X / H)`.
    pub drift_length: bool,
    /// `H >= exp(C sqrt(log X log log X))` with `C = 1`.
    pub h_range: bool,
}

impl Params {
    /// The archimedean benchmark scale.
    pub fn benchmark() -> Self {
        Params {
            x: 100_000_000,
            h: 10_000,
            k: 100,
            p: 20,
            p_prime: 5,
            eps_edge: rational::rat(1, 5),
            s_edge: rational::int(5),
            site_count: 2000,
            witness_density: Rational::one(),
            edge_target: None,
            noise_level: Rational::zero(),
            d_min: 1,
            k_max: 8,
            b_ratio: Rational::one(),
            c_cal: Rational::one(),
            seed: 0,
        }
    }

    pub fn separation(&self) -> Rational {
        Rational::new(self.h.into(), self.k.into())
    }

    pub fn site_interval(&self) -> (BigInt, BigInt) {
        let lo = Rational::new(self.x.into(), (10 * self.k).into()).ceil().to_integer();
        let hi = Rational::new((2 * self.x).into(), self.k.into()).floor().to_integer();
        (lo, hi)
    }

    pub fn split_primes(&self) -> (Vec<u64>, Vec<u64>) {
        let all = dyadic(self.p);
        let first = all.iter().step_by(2).copied().collect();
        let second = all.iter().skip(1).step_by(2).copied().collect();
        (first, second)
    }

    pub fn witness_candidates(&self) -> Vec<u64> {
        dyadic(self.p_prime)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if [self.x, self.h, self.k, self.p, self.p_prime].contains(&0) {
            return bad("X, H, K, P and P' must be positive".into());
        }
        if self.p * self.p_prime != self.k {
            return bad(format!("P * P' = {} differs from K = {}", self.p * self.p_prime, self.k));
        }
        if !self.eps_edge.is_positive() || &self.eps_edge * rational::int(2) >= Rational::one() {
            return bad(format!("eps_edge = {} must lie in (0, 1/2)", rational::to_string(&self.eps_edge)));
        }
        if self.s_edge.is_negative() || self.noise_level.is_negative() {
            return bad("s_edge and noise_level must be non-negative".into());
        }
        if !self.witness_density.is_positive() || self.witness_density > Rational::one() {
            return bad("witness_density must lie in (0, 1]".into());
        }
        if 2 * self.p_prime >= self.p {
            return bad(format!(
                "witness window [{}, {}] overlaps the prime window [{}, {}]",
                self.p_prime,
                2 * self.p_prime,
                self.p,
                2 * self.p
            ));
        }
        if self.witness_candidates().is_empty() {
            return bad("no witness primes in [P', 2P']".into());
        }
        let (first, second) = self.split_primes();
        if first.is_empty() || second.is_empty() {
            return bad("[P, 2P] must contain at least two primes".into());
        }
        let (lo, hi) = self.site_interval();
        let needed = BigInt::from(self.site_count.saturating_sub(1)) * self.gap();
        if hi < lo || &hi - &lo < needed {
            return bad(format!(
                "[{lo}, {hi}] cannot hold {} sites {} apart",
                self.site_count,
                rational::to_string(&self.separation())
            ));
        }
        Ok(())
    }

    fn gap(&self) -> BigInt {
        self.separation().ceil().to_integer()
    }

    pub fn gates(&self) -> GateFlags {
        let (x, h, p) = (self.x as f64, self.h as f64, self.p as f64);
        let b = rational::to_f64(&self.b_ratio);
        let k_max = (x / (h * b * x.ln())).ln() / (2.0 * (2.0 * p).ln());
        let k = self.k_max as f64;
        GateFlags {
            path_count_k_max: k_max,
            path_count: self.k_max >= 1 && k <= k_max,
            k0: k_max.floor() as i64,
            drift_length: k <= (x / h).ln(),
            h_range: h.ln() >= (x.ln() * x.ln().ln()).sqrt(),
        }
    }

    /// Whether a path length `k` lies inside the `(2k)!` range.
    pub fn path_count_gate(&self, k: usize) -> bool {
        k >= 1 && (k as f64) <= self.gates().path_count_k_max
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Archimedean,
    Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub mode: Mode,
    #[serde(with = "rational::serde_str")]
    pub t_star: Rational,
    /// Ignored in archimedean mode.
    pub q_star: u64,
}

impl TruthSpec {
    pub fn archimedean(t_star: Rational) -> Self {
        TruthSpec {
            mode: Mode::Archimedean,
            t_star,
            q_star: 1,
        }
    }

    pub fn rational(t_star: Rational, q_star: u64) -> Self {
        TruthSpec {
            mode: Mode::Rational,
            t_star,
            q_star,
        }
    }
}

/// A spanning-forest edge along which the residues were propagated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestEdge {
    pub i: usize,
    pub j: usize,
    pub p: u64,
    pub q: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub mode: Mode,
    #[serde(with = "rational::serde_str")]
    pub t_star: Rational,
    pub q_star: u64,
    /// `a_x mod q*` per site.
    pub a_map: Vec<u64>,
    /// `W`, the product of the witness primes scaling the rational part.
    #[serde(with = "rational::serde_bigint_str")]
    pub phase_scale: BigInt,
    /// Largest absolute frequency noise.
    #[serde(with = "rational::serde_str")]
    pub noise_bound: Rational,
    pub forest: Vec<ForestEdge>,
}

impl GroundTruth {
    /// `a_x W / q* + T*/x`.
    pub fn planted_alpha(&self, site: usize, x: &Rational) -> Rational {
        Rational::new(BigInt::from(self.a_map[site]) * &self.phase_scale, self.q_star.into()) + &self.t_star / x
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub schema: u32,
    pub version: String,
    pub seed: u64,
    pub params: Params,
    pub cfg: Configuration,
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<GroundTruth>,
}

impl Instance {
    pub fn blind(&self) -> Instance {
        Instance {
            truth: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Instance> {
        let inst: Instance = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if inst.schema != SCHEMA {
            return Err(Error::Parse(format!("unsupported schema {}", inst.schema)));
        }
        Ok(inst)
    }
}

fn sample_sites(params: &Params, rng: &mut ChaCha8Rng) -> Result<Vec<BigInt>> {
    let (lo, hi) = params.site_interval();
    let gap = params.gap();
    let n = params.site_count;
    let slack = &hi - &lo - BigInt::from(n.saturating_sub(1)) * &gap;
    if slack.is_negative() {
        return Err(Error::InfeasibleParams("site interval too short".into()));
    }
    let span: u64 = slack
        .try_into()
        .map_err(|_| Error::InfeasibleParams("site interval too long".into()))?;
    let mut offsets: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=span)).collect();
    offsets.sort_unstable();
    Ok(offsets
        .into_iter()
        .enumerate()
        .map(|(i, u)| &lo + BigInt::from(u) + BigInt::from(i) * &gap)
        .collect())
}

/// Index of the site nearest to `x q / p` among ascending integer positions;
/// ties go to the smaller position.
fn nearest(xs: &[u128], x: u128, p: u64, q: u64) -> usize {
    let (p, q) = (p as u128, q as u128);
    let idx = xs.partition_point(|&y| y * p < x * q);
    match (idx.checked_sub(1), xs.get(idx)) {
        (Some(a), Some(&b)) => {
            if x * q - xs[a] * p <= b * p - x * q {
                a
            } else {
                idx
            }
        }
        (Some(a), None) => a,
        (None, _) => 0,
    }
}

fn inverse_mod(a: u64, m: u64) -> u64 {
    let e = BigInt::from(a).extended_gcd(&BigInt::from(m));
    e.x.mod_floor(&BigInt::from(m)).try_into().expect("below m")
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, v: usize) -> usize {
        let mut r = v;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = v;
        while self.0[c] != r {
            let next = self.0[c];
            self.0[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

fn random_unit(q: u64, rng: &mut ChaCha8Rng) -> u64 {
    if q == 1 {
        return 0;
    }
    loop {
        let a = rng.gen_range(1..q);
        if a.gcd(&q) == 1 {
            return a;
        }
    }
}

/// Residues with `p a_i = q a_j (mod q*)` along a spanning forest of the
/// candidate edges, each tree rooted at its smallest site with a random unit.
fn propagate_residues(
    n: usize,
    candidates: &[ForestEdge],
    q_star: u64,
    rng: &mut ChaCha8Rng,
) -> (Vec<u64>, Vec<ForestEdge>) {
    let mut dsu = Dsu((0..n).collect());
    let mut forest = Vec::new();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in candidates {
        if dsu.union(c.i, c.j) {
            adjacency[c.i].push(forest.len());
            adjacency[c.j].push(forest.len());
            forest.push(c.clone());
        }
    }
    let mut a: Vec<Option<u64>> = vec![None; n];
    for root in 0..n {
        if a[root].is_some() {
            continue;
        }
        a[root] = Some(random_unit(q_star, rng));
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            let av = a[v].expect("visited");
            for &f in &adjacency[v] {
                let e = &forest[f];
                let (other, value) = if e.i == v {
                    // a_j = p q^{-1} a_i
                    (e.j, e.p % q_star * inverse_mod(e.q % q_star, q_star) % q_star * av % q_star)
                } else {
                    (e.i, e.q % q_star * inverse_mod(e.p % q_star, q_star) % q_star * av % q_star)
                };
                if a[other].is_none() {
                    a[other] = Some(value);
                    queue.push_back(other);
                }
            }
        }
    }
    (a.into_iter().map(|v| v.expect("all assigned")).collect(), forest)
}

/// Deterministic instance for `params` (including its seed) and `spec`.
pub fn gen_instance(params: &Params, spec: &TruthSpec) -> Result<Instance> {
    params.validate()?;
    let q_star = match spec.mode {
        Mode::Archimedean => 1,
        Mode::Rational => spec.q_star,
    };
    if q_star == 0 {
        return Err(Error::InvalidParams("q_star must be positive".into()));
    }
    let (p_set, q_set) = params.split_primes();
    let witnesses = params.witness_candidates();
    if let Some(&p) = p_set.iter().chain(&q_set).chain(&witnesses).find(|&&p| q_star % p == 0) {
        return Err(Error::InvalidParams(format!("q_star = {q_star} shares the prime {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.site_count;
    let positions = sample_sites(params, &mut rng)?;
    let ints: Vec<u128> = positions
        .iter()
        .map(|x| x.try_into().map_err(|_| Error::InfeasibleParams("site positions exceed 128 bits".into())))
        .collect::<Result<_>>()?;
    let xs: Vec<Rational> = positions.into_iter().map(Rational::from_integer).collect();

    // physical candidates in a seeded order
    let mut triples: Vec<(usize, u64, u64)> = Vec::with_capacity(n * p_set.len() * q_set.len());
    for i in 0..n {
        for &p in &p_set {
            for &q in &q_set {
                triples.push((i, p, q));
            }
        }
    }
    triples.shuffle(&mut rng);
    let candidates: Vec<ForestEdge> = triples
        .into_iter()
        .filter_map(|(i, p, q)| {
            let j = nearest(&ints, ints[i], p, q);
            // |x_i / p - x_j / q| <= s  <=>  |x_i q - x_j p| s_den <= s_num p q
            let gap = (ints[i] * q as u128).abs_diff(ints[j] * p as u128);
            let within = BigInt::from(gap) * params.s_edge.denom() <= params.s_edge.numer() * BigInt::from(p * q);
            (j != i && within).then_some(ForestEdge { i, j, p, q })
        })
        .collect();

    let phase_scale = rational::product(&witnesses);
    let (a_map, forest) = match spec.mode {
        Mode::Archimedean => (vec![0; n], Vec::new()),
        Mode::Rational => propagate_residues(n, &candidates, q_star, &mut rng),
    };
    let noise_bound = &params.noise_level * &params.eps_edge;
    let mut truth = GroundTruth {
        mode: spec.mode,
        t_star: spec.t_star.clone(),
        q_star,
        a_map,
        phase_scale,
        noise_bound: noise_bound.clone(),
        forest: Vec::new(),
    };
    let sites: Vec<Site> = xs
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let noise = if noise_bound.is_zero() {
                Rational::zero()
            } else {
                crate::fixtures::signed_unit(&mut rng, 1000) * &noise_bound
            };
            Site::new(x.clone(), truth.planted_alpha(i, x) + noise)
        })
        .collect();
    let cfg = Configuration::new(sites, params.separation(), p_set, q_set)?;

    let m = witnesses.len();
    let tried = (&params.witness_density * rational::int(m as u64)).ceil().to_integer();
    let tried: usize = tried.try_into().unwrap_or(m).clamp(1, m);
    let mut edges = Vec::new();
    for c in &candidates {
        if params.edge_target.is_some_and(|t| edges.len() >= t) {
            break;
        }
        let mut sample: Vec<u64> = witnesses.choose_multiple(&mut rng, tried).copied().collect();
        sample.sort_unstable();
        let (ai, aj) = (&cfg.sites[c.i].alpha, &cfg.sites[c.j].alpha);
        let verified = witness_primes(ai, aj, c.p, c.q, &sample, &params.eps_edge);
        if !verified.is_empty() {
            edges.push(Edge::new(&cfg, c.i, c.j, c.p, c.q, verified)?);
        }
    }
    if let Some(t) = params.edge_target {
        if edges.len() < t {
            return Err(Error::InfeasibleParams(format!(
                "only {} verified edges exist, {t} requested",
                edges.len()
            )));
        }
    }
    edges.sort_by_key(|a| (a.i, a.j, a.p, a.q));
    let emitted: HashSet<_> = edges.iter().map(|e| (e.i, e.j, e.p, e.q)).collect();
    truth.forest = forest
        .into_iter()
        .filter(|f| emitted.contains(&(f.i, f.j, f.p, f.q)))
        .collect();
    Ok(Instance {
        schema: SCHEMA,
        version: VERSION.to_string(),
        seed: params.seed,
        params: params.clone(),
        cfg,
        edges,
        truth: Some(truth),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditCheck {
    pub name: &'static str,
    pub pass: bool,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    name: &'static str,
    failures: usize,
    first: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            failures: 0,
            first: None,
        }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(what());
            }
        }
    }

    fn done(self) -> AuditCheck {
        AuditCheck {
            name: self.name,
            pass: self.failures == 0,
            failures: self.failures,
            first_failure: self.first,
        }
    }
}

/// Re-verifies every invariant of an instance with exact arithmetic.
pub fn audit_instance(inst: &Instance) -> AuditReport {
    let params = &inst.params;
    let cfg = &inst.cfg;
    let mut checks = Vec::new();

    let mut t = Tally::new("params");
    if let Err(e) = params.validate() {
        // an empty instance carries no sites to place
        t.expect(cfg.is_empty() && inst.edges.is_empty(), || e.to_string());
    }
    checks.push(t.done());

    let mut t = Tally::new("separation");
    if let Some((a, b)) = cfg.separation_violation() {
        t.expect(false, || format!("sites {a} and {b}"));
    }
    t.expect(cfg.separation == params.separation() || cfg.is_empty(), || {
        "separation differs from H/K".into()
    });
    checks.push(t.done());

    let mut t = Tally::new("site_interval");
    let (lo, hi) = params.site_interval();
    let (lo, hi) = (Rational::from_integer(lo), Rational::from_integer(hi));
    for (i, s) in cfg.sites.iter().enumerate() {
        t.expect(s.x >= lo && s.x <= hi, || format!("site {i}"));
    }
    checks.push(t.done());

    let mut t = Tally::new("partition");
    let window = dyadic(params.p);
    for &p in cfg.p_set.iter().chain(&cfg.q_set) {
        t.expect(window.contains(&p), || format!("{p} outside [P, 2P]"));
    }
    for &p in &cfg.p_set {
        t.expect(!cfg.q_set.contains(&p), || format!("{p} in both sets"));
    }
    checks.push(t.done());

    let mut slack = Tally::new("edge_slack");
    let mut witness = Tally::new("edge_witness");
    let mut shape = Tally::new("edge_shape");
    let candidates = params.witness_candidates();
    for (idx, e) in inst.edges.iter().enumerate() {
        let in_range = e.i < cfg.len() && e.j < cfg.len();
        shape.expect(in_range && e.i != e.j && e.is_split(cfg), || format!("edge {idx}"));
        if !in_range {
            continue;
        }
        let (a, b) = (&cfg.sites[e.i], &cfg.sites[e.j]);
        let s = physical_slack(&a.x, &b.x, e.p, e.q);
        slack.expect(s == e.slack && s <= params.s_edge, || {
            format!("edge {idx}: slack {}", rational::to_string(&s))
        });
        let ok = witness_primes(&a.alpha, &b.alpha, e.p, e.q, &e.witness, &params.eps_edge);
        witness.expect(
            !e.witness.is_empty() && ok == e.witness && e.witness.iter().all(|w| candidates.contains(w)),
            || format!("edge {idx}: witnesses {:?}, verified {:?}", e.witness, ok),
        );
    }
    checks.extend([slack.done(), witness.done(), shape.done()]);

    if let Some(truth) = &inst.truth {
        let mut t = Tally::new("coprimality");
        for &p in window.iter().chain(&candidates) {
            t.expect(truth.q_star % p != 0, || format!("{p} divides q_star"));
        }
        checks.push(t.done());

        let mut t = Tally::new("planted_frequencies");
        t.expect(truth.a_map.len() == cfg.len(), || "a_map length".into());
        if truth.a_map.len() == cfg.len() {
            for (i, s) in cfg.sites.iter().enumerate() {
                let d = (&s.alpha - truth.planted_alpha(i, &s.x)).abs();
                t.expect(d <= truth.noise_bound, || format!("site {i}"));
            }
        }
        checks.push(t.done());

        let mut t = Tally::new("forest_congruence");
        for f in &truth.forest {
            let ok = f.i < truth.a_map.len()
                && f.j < truth.a_map.len()
                && (BigInt::from(f.p) * truth.a_map[f.i] - BigInt::from(f.q) * truth.a_map[f.j])
                    .mod_floor(&BigInt::from(truth.q_star))
                    .is_zero();
            t.expect(ok, || format!("forest edge {}-{}", f.i, f.j));
        }
        checks.push(t.done());
    }
    AuditReport { checks }
}
