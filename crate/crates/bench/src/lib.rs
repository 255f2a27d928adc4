//! Shared inputs for the criterion benches.

use phaselab::rational::int;
use phaselab::synth::Params;

/// A scale dense enough for disjoint path pairs at `k = 2`.
pub fn dense_params(seed: u64) -> Params {
    Params {
        x: 200_000_000,
        h: 100_000,
        k: 500,
        p: 100,
        p_prime: 5,
        s_edge: int(2),
        site_count: 300,
        seed,
        ..Params::benchmark()
    }
}
