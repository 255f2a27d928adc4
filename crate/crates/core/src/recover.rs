//! Recovery of a global frequency `(T, q)` from an instance.
//!
//! From a hub site, pairs of prime-disjoint split paths to a common target
//! close into a loop `l1 + l2^{-1}` whose pyramid top `alpha_y` satisfies
//! `||D alpha_y|| ~ 0` with `D = prod p_i q'_i - prod q_i p'_i`. Splitting
//! `D alpha_y` into a multiple of `Q_y` and a small residual yields a local
//! phase `T_y` and a rational part with denominator `d_y | D`. Local
//! estimates are then pooled around the anchor target with the most shared
//! witness primes.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    concat_paths, edges_with_witness, enumerate_split_paths, invert_path, peel_regular, top_certificate, Path,
};
use crate::pyramid::build_pyramid;
use crate::rational::{self, Rational};
use crate::synth::{GroundTruth, Instance};
use crate::torus::{norm_mod, Modulus};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoverConfig {
    pub k: usize,
    pub min_common_witness: usize,
    pub d_min: usize,
    /// Cap on enumerated paths from the hub.
    pub path_limit: usize,
    /// Acceptance window for `|T - T_y|`; `None` uses `x_0 H^{delta - 1}`.
    #[serde(with = "opt_rational")]
    pub tol_t: Option<Rational>,
    /// Exponent `delta` of the default window, as a rational.
    #[serde(with = "rational::serde_str")]
    pub delta: Rational,
    /// Largest admissible rounding residual; `None` uses `eps_edge`.
    #[serde(with = "opt_rational")]
    pub residual_tol: Option<Rational>,
    /// Smallest accepted fraction of usable estimates.
    #[serde(with = "rational::serde_str")]
    pub consensus: Rational,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            k: 1,
            min_common_witness: 1,
            d_min: 1,
            path_limit: 200_000,
            tol_t: None,
            delta: rational::rat(1, 2),
            residual_tol: None,
            consensus: rational::rat(1, 2),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HubChoice {
    pub site: usize,
    /// Number of witness primes whose regular subset contains the hub.
    pub survivals: usize,
    pub witness_primes: usize,
}

/// Site surviving peeling for the most witness primes; ties go to the
/// smallest position.
pub fn select_hub(inst: &Instance, d_min: usize) -> Result<HubChoice> {
    let cfg = &inst.cfg;
    let mut counts = vec![0usize; cfg.len()];
    let mut used = 0;
    for w in inst.params.witness_candidates() {
        let edges = edges_with_witness(&inst.edges, w);
        if edges.is_empty() {
            continue;
        }
        used += 1;
        for v in peel_regular(cfg, &edges, d_min) {
            counts[v] += 1;
        }
    }
    if used == 0 || cfg.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let site = (0..cfg.len())
        .max_by(|&a, &b| {
            counts[a]
                .cmp(&counts[b])
                .then_with(|| cfg.sites[b].x.cmp(&cfg.sites[a].x))
        })
        .expect("nonempty");
    Ok(HubChoice {
        site,
        survivals: counts[site],
        witness_primes: used,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PathPair {
    pub first: Path,
    pub second: Path,
    /// Common witness primes of both paths.
    pub witness: Vec<u64>,
    pub modulus: Modulus,
}

impl PathPair {
    pub fn target(&self) -> usize {
        self.first.end()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PairSearch {
    pub paths: usize,
    pub truncated: bool,
    pub pairs: Vec<PathPair>,
}

/// Pairs of split paths of length `k` from `hub` to a common target other
/// than the hub, sharing no prime and at least `min_common_witness` witness
/// primes.
pub fn find_disjoint_path_pairs(
    inst: &Instance,
    hub: usize,
    k: usize,
    min_common_witness: usize,
    limit: usize,
) -> Result<PairSearch> {
    let found = enumerate_split_paths(&inst.cfg, &inst.edges, hub, k, limit)?;
    let mut groups: BTreeMap<usize, Vec<&Path>> = BTreeMap::new();
    for p in &found.paths {
        if p.end() != hub {
            groups.entry(p.end()).or_default().push(p);
        }
    }
    let mut pairs = Vec::new();
    for group in groups.values() {
        for a in 0..group.len() {
            for b in a + 1..group.len() {
                let (l1, l2) = (group[a], group[b]);
                if l1.primes().any(|x| l2.primes().any(|y| x == y)) {
                    continue;
                }
                let witness: Vec<u64> = l1
                    .witness()
                    .iter()
                    .copied()
                    .filter(|w| l2.witness().binary_search(w).is_ok())
                    .collect();
                if witness.len() < min_common_witness.max(1) {
                    continue;
                }
                pairs.push(PathPair {
                    modulus: Modulus::from_primes(&witness)?,
                    first: l1.clone(),
                    second: l2.clone(),
                    witness,
                });
            }
        }
    }
    Ok(PairSearch {
        paths: found.paths.len(),
        truncated: found.truncated,
        pairs,
    })
}

/// The pair with the most common witness primes per target, first found on
/// ties.
pub fn best_pair_per_target(pairs: &[PathPair]) -> Vec<&PathPair> {
    let mut best: BTreeMap<usize, &PathPair> = BTreeMap::new();
    for p in pairs {
        let slot = best.entry(p.target()).or_insert(p);
        if p.witness.len() > slot.witness.len() {
            *slot = p;
        }
    }
    best.into_values().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// `||alpha_0 - (a_y/d_y) Q_y - T_y/x_0||` above the tolerance.
    HubResidual,
    /// `||beta - (b_y/d_y) Q_y - T_y/y||` above the tolerance.
    TargetResidual,
    /// `|T_y|` above the cap while the parameter gates hold.
    PhaseCap,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalEstimate {
    pub hub: usize,
    pub target: usize,
    #[serde(with = "rational::serde_str")]
    pub hub_x: Rational,
    #[serde(with = "rational::serde_str")]
    pub target_x: Rational,
    pub q_y: Modulus,
    pub loop_p: Vec<u64>,
    pub loop_q: Vec<u64>,
    /// `prod p_i q'_i - prod q_i p'_i`.
    #[serde(with = "rational::serde_bigint_str")]
    pub d_loop: BigInt,
    #[serde(with = "rational::serde_str")]
    pub alpha_y: Rational,
    #[serde(with = "rational::serde_bigint_str")]
    pub n: BigInt,
    /// `D alpha_y - n Q_y`.
    #[serde(with = "rational::serde_str")]
    pub e: Rational,
    /// Sum of the two top certificates at the loop ends.
    #[serde(with = "rational::serde_str")]
    pub e_bound: Rational,
    #[serde(with = "rational::serde_str")]
    pub t_y: Rational,
    #[serde(with = "rational::serde_bigint_str")]
    pub u_y: BigInt,
    #[serde(with = "rational::serde_bigint_str")]
    pub d_y: BigInt,
    #[serde(with = "rational::serde_bigint_str")]
    pub a_y: BigInt,
    #[serde(with = "rational::serde_bigint_str")]
    pub b_y: BigInt,
    #[serde(with = "rational::serde_str")]
    pub residual_a: Rational,
    #[serde(with = "rational::serde_str")]
    pub residual_b: Rational,
    pub dropped: Option<DropReason>,
}

impl LocalEstimate {
    pub fn usable(&self) -> bool {
        self.dropped.is_none()
    }

    /// `(a_y / d_y) Q_y`.
    pub fn rational_part(&self) -> Rational {
        Rational::new(&self.a_y * self.q_y.value(), self.d_y.clone())
    }

    pub const CSV_HEADER: &'static str = "target,x,T_y,d_y,a_y,b_y,residual_a,residual_b,dropped";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.target,
            rational::to_string(&self.target_x),
            rational::to_string(&self.t_y),
            self.d_y,
            self.a_y,
            self.b_y,
            rational::to_string(&self.residual_a),
            rational::to_string(&self.residual_b),
            self.dropped.map_or("", |d| match d {
                DropReason::HubResidual => "hub_residual",
                DropReason::TargetResidual => "target_residual",
                DropReason::PhaseCap => "phase_cap",
            })
        )
    }
}

/// Options for [`local_estimate`].
#[derive(Clone, Debug)]
pub struct EstimateOptions {
    pub eps: Rational,
    pub residual_tol: Rational,
    /// Enforced `|T_y|` cap, if any.
    pub t_cap: Option<Rational>,
}

/// `round(d (value - phase) / Q) mod d` and the residual it leaves.
fn fit_residue(value: &Rational, phase: &Rational, d: &BigInt, q: &Modulus) -> (BigInt, Rational) {
    let qr = q.as_rational();
    let dr = Rational::from_integer(d.clone());
    let shifted = value - phase;
    let r = rational::round_half_down(&(&dr * &shifted / &qr)).mod_floor(d);
    let residual = norm_mod(&(shifted - Rational::from_integer(r.clone()) * &qr / dr), q.value());
    (r, residual)
}

/// Local estimate from the loop `first + second^{-1}`.
pub fn local_estimate(pair: &PathPair, opts: &EstimateOptions) -> Result<LocalEstimate> {
    let cycle = concat_paths(&pair.first, &invert_path(&pair.second))?;
    if cycle.modulus() != &pair.modulus {
        return Err(Error::InvariantViolation("loop modulus differs from the pair modulus".into()));
    }
    let pp = cycle.prepath(&opts.eps)?;
    let py = build_pyramid(&pp)?;
    let q = pair.modulus.clone();
    let qr = q.as_rational();
    let len = cycle.k();

    let pi_last = rational::product(cycle.p_primes());
    let pi_first = rational::product(cycle.q_primes());
    let d_loop = &pi_last - &pi_first;
    if d_loop.is_zero() {
        return Err(Error::InvariantViolation("D = 0 for a prime-disjoint pair".into()));
    }
    let dr = Rational::from_integer(d_loop.clone());
    let alpha_y = py.top().value().clone();
    let n = rational::round_half_down(&(&dr * &alpha_y / &qr));
    let e = &dr * &alpha_y - Rational::from_integer(n.clone()) * &qr;
    let e_bound = top_certificate(&cycle, &py, 1)?.bound + top_certificate(&cycle, &py, len + 1)?.bound;
    let (u_y, d_y) = rational::frac_parts(&Rational::new(n.clone(), d_loop.clone()));

    let hub = &pair.first.sites()[0];
    let target = &pair.first.sites()[pair.first.k()];
    let t_y = &e / &dr * &hub.x * Rational::from_integer(pi_first);
    let (a_y, residual_a) = fit_residue(&hub.alpha, &(&t_y / &hub.x), &d_y, &q);
    let (b_y, residual_b) = fit_residue(&target.alpha, &(&t_y / &target.x), &d_y, &q);

    let dropped = if residual_a > opts.residual_tol {
        Some(DropReason::HubResidual)
    } else if residual_b > opts.residual_tol {
        Some(DropReason::TargetResidual)
    } else if opts.t_cap.as_ref().is_some_and(|cap| &t_y.abs() > cap) {
        Some(DropReason::PhaseCap)
    } else {
        None
    };
    Ok(LocalEstimate {
        hub: pair.first.start(),
        target: pair.target(),
        hub_x: hub.x.clone(),
        target_x: target.x.clone(),
        q_y: q,
        loop_p: cycle.p_primes().to_vec(),
        loop_q: cycle.q_primes().to_vec(),
        d_loop,
        alpha_y,
        n,
        e,
        e_bound,
        t_y,
        u_y,
        d_y,
        a_y,
        b_y,
        residual_a,
        residual_b,
        dropped,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalFrequency {
    #[serde(with = "rational::serde_str")]
    pub t: Rational,
    pub q: u64,
    /// Every denominator tied for the most frequent.
    pub q_candidates: Vec<u64>,
    pub anchor: usize,
    #[serde(with = "rational::serde_str")]
    pub tol_t: Rational,
    pub accepted: Vec<usize>,
    /// `b_y` per accepted target.
    pub residues: Vec<String>,
    /// `gcd(Q_{y_0}, Q_y)` per accepted target.
    pub gcd_moduli: Vec<Modulus>,
    /// Spread `max T_y - min T_y` over the accepted targets.
    #[serde(with = "rational::serde_str")]
    pub cluster_width: Rational,
    pub usable: usize,
}

fn consistent(anchor: &LocalEstimate, other: &LocalEstimate, tol_t: &Rational) -> Option<Modulus> {
    if (&anchor.t_y - &other.t_y).abs() > *tol_t {
        return None;
    }
    let g = anchor.q_y.gcd(&other.q_y);
    let diff = other.rational_part() - anchor.rational_part();
    (diff / g.as_rational()).is_integer().then_some(g)
}

fn gcd_size(g: &Modulus) -> usize {
    g.factors().map_or(0, <[u64]>::len)
}

/// Pools the usable estimates around the anchor whose acceptance cluster has
/// the largest total number of shared witness primes.
pub fn aggregate_global(estimates: &[LocalEstimate], tol_t: &Rational, consensus: &Rational) -> Result<GlobalFrequency> {
    let usable: Vec<&LocalEstimate> = estimates.iter().filter(|e| e.usable()).collect();
    if usable.is_empty() {
        return Err(Error::NoEstimates);
    }
    let mut best: Option<(usize, usize)> = None;
    for (i, anchor) in usable.iter().enumerate() {
        let mass: usize = usable
            .iter()
            .filter_map(|o| consistent(anchor, o, tol_t))
            .map(|g| gcd_size(&g))
            .sum();
        let better = match best {
            None => true,
            Some((m, j)) => mass > m || (mass == m && anchor.target_x < usable[j].target_x),
        };
        if better {
            best = Some((mass, i));
        }
    }
    let anchor = usable[best.expect("nonempty").1];
    let members: Vec<(&LocalEstimate, Modulus)> = usable
        .iter()
        .filter_map(|o| consistent(anchor, o, tol_t).map(|g| (*o, g)))
        .collect();
    let required = consensus * rational::int(usable.len() as u64);
    if rational::int(members.len() as u64) < required {
        return Err(Error::NoConsensus {
            accepted: members.len(),
            total: usable.len(),
            required: rational::to_string(&required),
        });
    }
    let mut freq: BTreeMap<BigInt, usize> = BTreeMap::new();
    for (e, _) in &members {
        *freq.entry(e.d_y.clone()).or_default() += 1;
    }
    let top = *freq.values().max().expect("nonempty");
    let q_candidates: Vec<u64> = freq
        .iter()
        .filter(|(_, &c)| c == top)
        .map(|(d, _)| d.to_u64().unwrap_or(u64::MAX))
        .collect();
    let t_values = members.iter().map(|(e, _)| &e.t_y);
    let hi = t_values.clone().max().expect("nonempty");
    let lo = t_values.min().expect("nonempty");
    Ok(GlobalFrequency {
        t: anchor.t_y.clone(),
        q: q_candidates[0],
        q_candidates,
        anchor: anchor.target,
        tol_t: tol_t.clone(),
        accepted: members.iter().map(|(e, _)| e.target).collect(),
        residues: members.iter().map(|(e, _)| e.b_y.to_string()).collect(),
        gcd_moduli: members.iter().map(|(_, g)| g.clone()).collect(),
        cluster_width: hi - lo,
        usable: usable.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Score {
    Scored {
        #[serde(with = "rational::serde_str")]
        rel_t_error: Rational,
        q_match: bool,
        coverage: f64,
    },
    TruthUnavailable,
}

/// `|T - T*| / max(1, |T*|)`, `q == q*` and accepted targets over `targets`.
pub fn score_recovery(gf: &GlobalFrequency, truth: Option<&GroundTruth>, targets: usize) -> Score {
    let Some(truth) = truth else {
        return Score::TruthUnavailable;
    };
    let denom = truth.t_star.abs().max(Rational::from_integer(1.into()));
    Score::Scored {
        rel_t_error: (&gf.t - &truth.t_star).abs() / denom,
        q_match: gf.q == truth.q_star,
        coverage: if targets == 0 {
            0.0
        } else {
            gf.accepted.len() as f64 / targets as f64
        },
    }
}

/// `a_y / d_y` and `b_y / d_y` agree with the planted residues scaled by
/// `W / Q_y`, modulo one.
pub fn residues_consistent(est: &LocalEstimate, truth: &GroundTruth) -> bool {
    let scale = &truth.phase_scale / est.q_y.value();
    let planted = |site: usize| Rational::new(BigInt::from(truth.a_map[site]) * &scale, truth.q_star.into());
    let agree = |found: &BigInt, site: usize| {
        let diff = Rational::new(found.clone(), est.d_y.clone()) - planted(site);
        diff.is_integer()
    };
    agree(&est.a_y, est.hub) && agree(&est.b_y, est.target)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub config: RecoverConfig,
    pub hub: HubChoice,
    pub paths: usize,
    pub truncated: bool,
    pub pairs: usize,
    /// Targets reached by at least one pair.
    pub targets: usize,
    pub estimates: Vec<LocalEstimate>,
    pub global: Option<GlobalFrequency>,
    pub failure: Option<String>,
}

/// `x_0 H^{delta - 1}`, rounded to six decimals.
pub fn default_tol_t(x0: &Rational, h: u64, delta: &Rational) -> Rational {
    let scale = (h as f64).powf(rational::to_f64(delta) - 1.0);
    let micro = (rational::to_f64(x0) * scale * 1e6).round() as i64;
    rational::rat(micro.max(1), 1_000_000)
}

/// `X^2 / H^{2 - delta}`, the largest `|T_y|` allowed when the gates hold.
pub fn phase_cap(x: u64, h: u64, delta: &Rational) -> Rational {
    let v = (x as f64).powi(2) / (h as f64).powf(2.0 - rational::to_f64(delta));
    rational::int(v.ceil() as i64)
}

/// Hub, pairs, local estimates and aggregation over one instance.
pub fn recover(inst: &Instance, config: &RecoverConfig) -> Result<RecoveryReport> {
    let hub = select_hub(inst, config.d_min)?;
    let search = find_disjoint_path_pairs(inst, hub.site, config.k, config.min_common_witness, config.path_limit)?;
    let chosen = best_pair_per_target(&search.pairs);
    let gates = inst.params.gates();
    let opts = EstimateOptions {
        eps: inst.params.eps_edge.clone(),
        residual_tol: config
            .residual_tol
            .clone()
            .unwrap_or_else(|| inst.params.eps_edge.clone()),
        t_cap: (gates.path_count && gates.h_range).then(|| phase_cap(inst.params.x, inst.params.h, &config.delta)),
    };
    let estimates = chosen
        .iter()
        .map(|p| local_estimate(p, &opts))
        .collect::<Result<Vec<_>>>()?;
    let x0 = &inst.cfg.sites[hub.site].x;
    let tol_t = config
        .tol_t
        .clone()
        .unwrap_or_else(|| default_tol_t(x0, inst.params.h, &config.delta));
    let (global, failure) = match aggregate_global(&estimates, &tol_t, &config.consensus) {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(RecoveryReport {
        config: config.clone(),
        hub,
        paths: search.paths,
        truncated: search.truncated,
        pairs: search.pairs.len(),
        targets: chosen.len(),
        estimates,
        global,
        failure,
    })
}

mod opt_rational {
    use crate::rational::{self, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(r) => s.serialize_some(&rational::to_string(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| rational::parse(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}
