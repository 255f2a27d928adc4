use phaselab::graph::physical_slack;
use phaselab::rational::{int, rat, Rational};
use phaselab::synth::{audit_instance, gen_instance, Instance, Mode, Params, TruthSpec};
use phaselab::torus::norm_mod;
use proptest::prelude::*;

fn params(seed: u64, sites: usize, noise: Rational) -> Params {
    Params {
        x: 20_000_000,
        h: 20_000,
        k: 100,
        p: 20,
        p_prime: 5,
        s_edge: int(5),
        site_count: sites,
        noise_level: noise,
        seed,
        ..Params::benchmark()
    }
}

fn spec(rational_mode: bool, t: i64, q: u64) -> TruthSpec {
    if rational_mode {
        TruthSpec::rational(int(t), q)
    } else {
        TruthSpec::archimedean(int(t))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_instances_pass_their_audit(
        seed in any::<u64>(),
        sites in 10usize..300,
        noise in 0i64..=4,
        rational_mode in any::<bool>(),
        t in 0i64..200_000,
        q in prop::sample::select(vec![1u64, 3, 6, 11, 13]),
    ) {
        let p = params(seed, sites, rat(noise, 10));
        let inst = gen_instance(&p, &spec(rational_mode, t, q)).unwrap();
        let report = audit_instance(&inst);
        prop_assert!(report.pass(), "{:?}", report);
        prop_assert!(audit_instance(&inst.blind()).pass());

        // the edge thresholds, recomputed here
        let w_all: Vec<u64> = p.witness_candidates();
        for e in &inst.edges {
            let (a, b) = (&inst.cfg.sites[e.i], &inst.cfg.sites[e.j]);
            prop_assert!(physical_slack(&a.x, &b.x, e.p, e.q) <= p.s_edge);
            let phase = &a.alpha * int(e.p) - &b.alpha * int(e.q);
            for w in &e.witness {
                prop_assert!(w_all.contains(w));
                prop_assert!(norm_mod(&phase, &(*w).into()) <= p.eps_edge);
            }
        }

        let truth = inst.truth.as_ref().unwrap();
        for (i, s) in inst.cfg.sites.iter().enumerate() {
            let diff = &s.alpha - truth.planted_alpha(i, &s.x);
            prop_assert!(norm_mod(&diff, &truth.phase_scale) <= truth.noise_bound);
        }
        if truth.mode == Mode::Rational {
            for f in &truth.forest {
                let lhs = (f.p as u128 * truth.a_map[f.i] as u128) % q as u128;
                let rhs = (f.q as u128 * truth.a_map[f.j] as u128) % q as u128;
                prop_assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn serialization_is_deterministic_and_roundtrips(seed in any::<u64>(), sites in 1usize..80) {
        let p = params(seed, sites, int(0));
        let a = gen_instance(&p, &spec(true, 1000, 6)).unwrap();
        let b = gen_instance(&p, &spec(true, 1000, 6)).unwrap();
        let text = a.to_json();
        prop_assert_eq!(&text, &b.to_json());
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.to_json(), text);
    }
}
