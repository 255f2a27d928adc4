use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::Result;
use crate::graph::{Configuration, Edge, Path};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Enumeration {
    pub paths: Vec<Path>,
    /// The search stopped at the limit.
    pub truncated: bool,
}

/// Depth-first enumeration of split paths of length `k` from `start`.
///
/// Only edges with `p` in the first prime set and `q` in the second are
/// used, always in their stored direction, and no prime repeats along a
/// path. Outgoing edges are tried in ascending edge index.
pub fn enumerate_split_paths(
    cfg: &Configuration,
    edges: &[Edge],
    start: usize,
    k: usize,
    limit: usize,
) -> Result<Enumeration> {
    let mut out = Enumeration {
        paths: Vec::new(),
        truncated: limit == 0,
    };
    if k == 0 || limit == 0 {
        return Ok(out);
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); cfg.len()];
    for (idx, e) in edges.iter().enumerate() {
        if e.is_split(cfg) && e.i < cfg.len() && e.j < cfg.len() {
            adjacency[e.i].push(idx);
        }
    }
    let mut stack: Vec<usize> = Vec::with_capacity(k);
    let mut used: BTreeSet<u64> = BTreeSet::new();
    walk(cfg, edges, &adjacency, start, k, limit, &mut stack, &mut used, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    cfg: &Configuration,
    edges: &[Edge],
    adjacency: &[Vec<usize>],
    at: usize,
    k: usize,
    limit: usize,
    stack: &mut Vec<usize>,
    used: &mut BTreeSet<u64>,
    out: &mut Enumeration,
) -> Result<()> {
    if stack.len() == k {
        if out.paths.len() == limit {
            out.truncated = true;
            return Ok(());
        }
        let chain: Vec<&Edge> = stack.iter().map(|&i| &edges[i]).collect();
        out.paths.push(Path::from_edges(cfg, &chain)?);
        return Ok(());
    }
    for &idx in &adjacency[at] {
        if out.truncated {
            break;
        }
        let e = &edges[idx];
        if used.contains(&e.p) || used.contains(&e.q) {
            continue;
        }
        used.insert(e.p);
        used.insert(e.q);
        stack.push(idx);
        walk(cfg, edges, adjacency, e.j, k, limit, stack, used, out)?;
        stack.pop();
        used.remove(&e.p);
        used.remove(&e.q);
    }
    Ok(())
}

/// Repeatedly removes vertices with at most `d_min` distinct surviving
/// neighbours. Returns the survivors in ascending order; each has more than
/// `d_min` neighbours among them. Self-loops are ignored.
pub fn peel_core<I: IntoIterator<Item = (usize, usize)>>(n: usize, pairs: I, d_min: usize) -> Vec<usize> {
    let mut neighbours: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (a, b) in pairs {
        if a != b && a < n && b < n {
            neighbours[a].insert(b);
            neighbours[b].insert(a);
        }
    }
    let mut degree: Vec<usize> = neighbours.iter().map(BTreeSet::len).collect();
    let mut alive = vec![true; n];
    let mut queue: Vec<usize> = (0..n).filter(|&v| degree[v] <= d_min).collect();
    while let Some(v) = queue.pop() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &u in &neighbours[v] {
            if alive[u] {
                degree[u] -= 1;
                if degree[u] == d_min {
                    queue.push(u);
                }
            }
        }
    }
    (0..n).filter(|&v| alive[v]).collect()
}

/// Peeling over the length-1 split paths among `edges`. Pass the edges that
/// carry one witness prime to obtain the regular subset for that prime.
pub fn peel_regular(cfg: &Configuration, edges: &[&Edge], d_min: usize) -> Vec<usize> {
    let pairs = edges.iter().filter(|e| e.is_split(cfg)).map(|e| (e.i, e.j));
    peel_core(cfg.len(), pairs, d_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Site;
    use crate::rational::int;

    fn cfg(n: usize) -> Configuration {
        let sites = (0..n).map(|i| Site::new(int(100 * (i as i64 + 1)), int(0))).collect();
        Configuration::new(sites, int(1), vec![11, 13, 17], vec![19, 23, 29]).unwrap()
    }

    fn edge(c: &Configuration, i: usize, j: usize, p: u64, q: u64) -> Edge {
        Edge::new(c, i, j, p, q, vec![5]).unwrap()
    }

    #[test]
    fn line_paths_by_hand() {
        let c = cfg(3);
        // 0 -> 1 on (11,19) or (13,23); 1 -> 2 on (11,19) or (17,29).
        let edges = vec![
            edge(&c, 0, 1, 11, 19),
            edge(&c, 0, 1, 13, 23),
            edge(&c, 1, 2, 11, 19),
            edge(&c, 1, 2, 17, 29),
            // not split: p from the second set
            edge(&c, 1, 2, 23, 13),
        ];
        let got = enumerate_split_paths(&c, &edges, 0, 2, 100).unwrap();
        assert!(!got.truncated);
        let primes: Vec<(Vec<u64>, Vec<u64>)> = got
            .paths
            .iter()
            .map(|p| (p.p_primes().to_vec(), p.q_primes().to_vec()))
            .collect();
        assert_eq!(
            primes,
            vec![
                (vec![11, 17], vec![19, 29]),
                (vec![13, 11], vec![23, 19]),
                (vec![13, 17], vec![23, 29]),
            ]
        );
        assert!(got.paths.iter().all(|p| p.is_split() && p.end() == 2));
    }

    #[test]
    fn exhaustion_and_limits() {
        let c = cfg(3);
        let edges = vec![edge(&c, 0, 1, 11, 19), edge(&c, 1, 2, 13, 23)];
        assert!(enumerate_split_paths(&c, &edges, 0, 3, 10).unwrap().paths.is_empty());
        let zero = enumerate_split_paths(&c, &edges, 0, 2, 0).unwrap();
        assert!(zero.paths.is_empty() && zero.truncated);
        let one = enumerate_split_paths(&c, &edges, 0, 1, 1).unwrap();
        assert_eq!((one.paths.len(), one.truncated), (1, false));
    }

    #[test]
    fn truncation_flag() {
        let c = cfg(2);
        let edges = vec![edge(&c, 0, 1, 11, 19), edge(&c, 0, 1, 13, 23)];
        let got = enumerate_split_paths(&c, &edges, 0, 1, 1).unwrap();
        assert_eq!((got.paths.len(), got.truncated), (1, true));
    }

    #[test]
    fn peeling_examples() {
        assert_eq!(peel_core(3, [(0, 1), (1, 2), (2, 0)], 1), vec![0, 1, 2]);
        assert_eq!(peel_core(3, [(0, 1), (1, 2)], 1), Vec::<usize>::new());
        // K4 without the edge 0-1
        let k4_minus = [(0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        assert_eq!(peel_core(4, k4_minus, 1), vec![0, 1, 2, 3]);
        assert_eq!(peel_core(4, k4_minus, 2), Vec::<usize>::new());
        // parallel edges count one neighbour
        assert_eq!(peel_core(2, [(0, 1), (1, 0), (0, 1)], 0), vec![0, 1]);
        assert_eq!(peel_core(2, [(0, 1), (1, 0)], 1), Vec::<usize>::new());
    }

    #[test]
    fn regular_subset_uses_split_edges() {
        let c = cfg(3);
        let edges = [edge(&c, 0, 1, 11, 19), edge(&c, 1, 2, 13, 23), edge(&c, 2, 0, 19, 11)];
        let refs: Vec<&Edge> = edges.iter().collect();
        assert_eq!(peel_regular(&c, &refs, 0), vec![0, 1, 2]);
        assert_eq!(peel_regular(&c, &refs, 1), Vec::<usize>::new());
    }
}
