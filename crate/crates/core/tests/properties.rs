use proptest::prelude::*;

use lndp::analysis::{bhattacharyya, tv_distance, tv_from_bhatt, DiscretePmf};
use lndp::blur::{compressed_blurry, winf_distance};
use lndp::estimators::{conc_deg, est_edges, est_er_p};
use lndp::graph::{
    degree_pmf, generate_bounded, generate_clique_plus_isolated, generate_er, generate_regular,
    generate_starpartite, node_distance, rewire_node, DegreePmf, Graph,
};
use lndp::harness::{parse_spec, spec_to_string, ExperimentSpec, GraphSpec, PrivacySpec, SpecFormat, Task, DebugSpec};
use lndp::mechanisms::{gaussian_sigma, leaky_rr_pmf, NoiseMode, PrivacyParams};

#[derive(Debug, Clone)]
enum Family {
    Er(usize, f64),
    Regular(usize, usize),
    Star(usize, usize),
    Clique(usize, usize),
    Bounded(usize, usize, f64),
}

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![
        (1usize..60, 0.0f64..=1.0).prop_map(|(n, p)| Family::Er(n, p)),
        (1usize..40)
            .prop_flat_map(|n| (Just(n), 0..n))
            .prop_filter("n·d even", |(n, d)| n * d % 2 == 0)
            // The restart sampler is only practical when d or n−1−d is small.
            .prop_filter("sparse side", |(n, d)| (*d).min(n - 1 - d) <= 4)
            .prop_map(|(n, d)| Family::Regular(n, d)),
        (2usize..8)
            .prop_flat_map(|t| (Just(t), 1usize..8))
            .prop_map(|(t, m)| Family::Star(t * m, t)),
        (1usize..50)
            .prop_flat_map(|n| (Just(n), 0..=n))
            .prop_map(|(n, k)| Family::Clique(n, k)),
        (2usize..60)
            .prop_flat_map(|n| (Just(n), 0..n.min(8), 0.0f64..=1.0))
            .prop_map(|(n, d, x)| Family::Bounded(n, d, x)),
    ]
}

fn generate(f: &Family, seed: u64) -> Graph {
    match *f {
        Family::Er(n, p) => generate_er(n, p, seed),
        Family::Regular(n, d) => generate_regular(n, d, seed),
        Family::Star(n, t) => generate_starpartite(n, t, seed),
        Family::Clique(n, k) => generate_clique_plus_isolated(n, k, seed),
        Family::Bounded(n, d, x) => generate_bounded(n, d, x, seed),
    }
    .expect("fuzzed parameters are valid")
}

fn pmf_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("positive mass", |w| {
        let t: f64 = w.iter().sum();
        (t > 1e-6).then(|| w.iter().map(|x| x / t).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn generators_produce_valid_graphs(f in family(), seed in any::<u64>()) {
        let g = generate(&f, seed);
        prop_assert!(g.validate().is_ok());
        prop_assert_eq!(&g, &generate(&f, seed));
        match f {
            Family::Regular(_, d) => prop_assert!(g.degrees().iter().all(|&x| x == d)),
            Family::Bounded(_, d, _) => prop_assert!(g.max_degree() <= d),
            Family::Star(n, t) => prop_assert_eq!(g.edge_count(), t * (n - t) + t * (t - 1) / 2),
            Family::Clique(_, k) => prop_assert_eq!(g.edge_count(), k * k.saturating_sub(1) / 2),
            Family::Er(..) => {}
        }
    }

    #[test]
    fn degree_pmf_has_unit_mass(f in family(), seed in any::<u64>()) {
        let g = generate(&f, seed);
        if g.n() > 0 {
            let total: f64 = degree_pmf(&g).probs().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn leaky_rr_sums_to_one(eps in 1e-3f64..20.0, delta in 0.0f64..=1.0, b in any::<bool>()) {
        let p = leaky_rr_pmf(b, eps, delta).unwrap();
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn tv_bounded_by_bhattacharyya(
        (p, q) in (1usize..8).prop_flat_map(|k| (pmf_strategy(k), pmf_strategy(k)))
    ) {
        let p = DiscretePmf::from_probs(&p).unwrap();
        let q = DiscretePmf::from_probs(&q).unwrap();
        prop_assert!(tv_distance(&p, &q) <= tv_from_bhatt(bhattacharyya(&p, &q)) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn rewiring_moves_distance_at_most_one(
        n in 1usize..=10,
        p in 0.0f64..=1.0,
        seed in any::<u64>(),
        i in any::<prop::sample::Index>(),
        mask in any::<u16>(),
    ) {
        let g = generate_er(n, p, seed).unwrap();
        let i = i.index(n);
        let nbrs: Vec<usize> = (0..n).filter(|&j| j != i && mask & (1 << j) != 0).collect();
        let h = rewire_node(&g, i, &nbrs).unwrap();
        prop_assert!(h.validate().is_ok());
        prop_assert!(node_distance(&g, &h).unwrap() <= 1);
    }

    #[test]
    fn gaussian_sigma_monotone(
        d2 in 0.1f64..10.0,
        e1 in 0.01f64..5.0, e2 in 0.01f64..5.0,
        d1 in 1e-9f64..0.99, dd in 1e-9f64..0.99,
    ) {
        let (elo, ehi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let (dlo, dhi) = if d1 <= dd { (d1, dd) } else { (dd, d1) };
        let at = |e, d| gaussian_sigma(d2, PrivacyParams::new(e, d).unwrap()).unwrap();
        prop_assert!(at(ehi, dlo) <= at(elo, dlo));
        prop_assert!(at(elo, dhi) <= at(elo, dlo));
    }

    #[test]
    fn blur_preserves_mean_and_moves_mass_at_most_s(
        probs in (1usize..80).prop_flat_map(pmf_strategy),
        s in 1usize..12,
    ) {
        let d = DegreePmf::new(probs).unwrap();
        let b = compressed_blurry(&d, s).unwrap();
        prop_assert!((b.mean() - d.mean()).abs() <= 1e-9 * (1.0 + d.mean()));
        prop_assert!(winf_distance(d.probs(), &b.uncompressed()) <= s as f64 + 1e-9);
    }

    #[test]
    fn blur_is_linear(
        (p, q) in (1usize..60).prop_flat_map(|k| (pmf_strategy(k), pmf_strategy(k))),
        alpha in 0.0f64..=1.0,
        s in 1usize..10,
    ) {
        let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        let bp = compressed_blurry(&DegreePmf::new(p).unwrap(), s).unwrap();
        let bq = compressed_blurry(&DegreePmf::new(q).unwrap(), s).unwrap();
        let bm = compressed_blurry(&DegreePmf::new(mix).unwrap(), s).unwrap();
        for ((m, a), b) in bm.probs().iter().zip(bp.probs()).zip(bq.probs()) {
            prop_assert!((m - (alpha * a + (1.0 - alpha) * b)).abs() <= 1e-12);
        }
    }

    #[test]
    fn bhattacharyya_tensorizes(
        (p1, q1) in (1usize..5).prop_flat_map(|k| (pmf_strategy(k), pmf_strategy(k))),
        (p2, q2) in (1usize..5).prop_flat_map(|k| (pmf_strategy(k), pmf_strategy(k))),
    ) {
        let [p1, q1, p2, q2] = [p1, q1, p2, q2].map(|v| DiscretePmf::from_probs(&v).unwrap());
        let joint = bhattacharyya(&p1.product(&p2), &q1.product(&q2));
        let sum = bhattacharyya(&p1, &q1).value() + bhattacharyya(&p2, &q2).value();
        if sum.is_finite() {
            prop_assert!((joint.value() - sum).abs() <= 1e-9 * (1.0 + sum));
        } else {
            prop_assert!(joint.is_infinite() || joint.value() > 30.0);
        }
    }

    #[test]
    fn noiseless_edges_exact_on_bounded_graphs(
        (n, d) in (2usize..200).prop_flat_map(|n| (Just(n), 1..n.min(10))),
        density in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let g = generate_bounded(n, d, density, seed).unwrap();
        let params = PrivacyParams::new(1.0, 1e-6).unwrap();
        let m = est_edges(&g, d, params, seed, NoiseMode::Noiseless).unwrap();
        prop_assert!((m - g.edge_count() as f64).abs() <= 1e-9 * (1.0 + m));
    }

    #[test]
    fn estimators_are_deterministic(n in 2usize..300, p in 0.0f64..=1.0, seed in any::<u64>()) {
        let g = generate_er(n, p, seed).unwrap();
        let params = PrivacyParams::new(1.0, 1e-6).unwrap();
        let a = est_er_p(&g, params, seed, NoiseMode::Private).unwrap();
        let b = est_er_p(&g, params, seed, NoiseMode::Private).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let a = est_edges(&g, 5, params, seed, NoiseMode::Private).unwrap();
        let b = est_edges(&g, 5, params, seed, NoiseMode::Private).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn conc_deg_reconstruction_identity(
        n in 4usize..400, frac in 0.05f64..=1.0, seed in any::<u64>(),
    ) {
        let k = ((n as f64 * frac) as usize).max(2);
        let g = generate_clique_plus_isolated(n, k, seed).unwrap();
        let s = (n as f64).sqrt().ceil() as usize;
        let params = PrivacyParams::new(1.0, 1e-6).unwrap();
        let r = conc_deg(&g, params, s, seed, NoiseMode::Noiseless).unwrap();
        let window = r.x_hat..=r.x_hat + 4.0 * s as f64;
        let degs = g.degrees();
        if degs.iter().all(|&d| d == 0 || window.contains(&(d as f64))) {
            let above = degs.iter().filter(|&&d| d as f64 >= r.x_hat).count() as f64;
            let avg = degs.iter().sum::<usize>() as f64 / n as f64;
            let lhs = above / n as f64 * r.x_hat + r.v_hat;
            prop_assert!((lhs - avg).abs() <= 1e-9 * (1.0 + avg), "{} vs {}", lhs, avg);
        }
    }
}

fn spec_strategy() -> impl Strategy<Value = ExperimentSpec> {
    let graph = prop_oneof![
        (1usize..1000).prop_map(|n| GraphSpec::Empty { n }),
        (1usize..1000, 0.0f64..=1.0).prop_map(|(n, p)| GraphSpec::Er { n, p }),
        (1usize..1000, 0usize..10).prop_map(|(n, d)| GraphSpec::Regular { n, d }),
        (1usize..1000, 1usize..10).prop_map(|(n, t)| GraphSpec::Starpartite { n, t }),
        (1usize..1000, proptest::option::of(0usize..500)).prop_map(|(n, k)| GraphSpec::Clique { n, k }),
        (1usize..1000, 0usize..10, 0.0f64..=1.0)
            .prop_map(|(n, max_degree, density)| GraphSpec::Bounded { n, max_degree, density }),
    ];
    (
        graph,
        0usize..100,
        any::<u64>(),
        1e-3f64..10.0,
        1e-9f64..0.5,
        proptest::option::of(1usize..50),
        any::<bool>(),
        proptest::option::of(prop::collection::vec(1usize..10_000, 1..4)),
    )
        .prop_map(|(graph, trials, master_seed, eps, delta, s, noiseless, sweep)| {
            let task = match graph {
                GraphSpec::Er { .. } => Task::Er,
                GraphSpec::Clique { .. } => Task::Clique,
                GraphSpec::Regular { .. } | GraphSpec::Starpartite { .. } => Task::Distinguish,
                _ if s.is_some() => Task::Pmf,
                _ => Task::Verify,
            };
            ExperimentSpec {
                task,
                trials,
                master_seed,
                s,
                degree_bound: None,
                output_path: (trials % 3 == 0).then(|| format!("out_{trials}.csv")),
                graph,
                privacy: PrivacySpec { eps, delta },
                sweep: sweep.map(|n| lndp::harness::Sweep { n }),
                debug: DebugSpec { noiseless, noise_scale: 1.0 },
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn spec_round_trip(spec in spec_strategy()) {
        for format in [SpecFormat::Toml, SpecFormat::Json] {
            let text = spec_to_string(&spec, format).unwrap();
            prop_assert_eq!(&parse_spec(&text).unwrap(), &spec);
        }
    }
}
