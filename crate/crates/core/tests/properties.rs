use std::collections::BTreeSet;
use std::sync::Arc;

use bsum_core::diagnostics::{
    c_constant, check_nesterov_inequality, envelope_report, sample_pairs, sigma_for, RateCertificate, RateConstant,
    Tagged, Theorem,
};
use bsum_core::engine::{run_bsum, RunConfig};
use bsum_core::models::{build_instance, ModelSpec};
use bsum_core::problem::ConstraintSet;
use bsum_core::scheduler::{gauss_southwell_pick, mbi_pick, virtual_updates, Rule, Schedule};
use bsum_core::surrogate::{surrogate_value, Surrogate};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn set_strategy(n: usize) -> impl Strategy<Value = ConstraintSet<f64>> {
    prop_oneof![
        Just(ConstraintSet::Free),
        Just(ConstraintSet::NonNegative),
        (prop::collection::vec(-3.0..0.0f64, n), prop::collection::vec(0.0..3.0f64, n))
            .prop_map(|(lo, hi)| ConstraintSet::Box { lo, hi }),
        (prop::collection::vec(-2.0..2.0f64, n), 0.1..3.0f64)
            .prop_map(|(center, radius)| ConstraintSet::Ball { center, radius }),
    ]
}

fn set_and_points() -> impl Strategy<Value = (ConstraintSet<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..6).prop_flat_map(|n| {
        (set_strategy(n), prop::collection::vec(-10.0..10.0f64, n), prop::collection::vec(-10.0..10.0f64, n))
    })
}

fn base_cert() -> impl Strategy<Value = RateCertificate<f64>> {
    (0.01..10.0f64, 0.1..10.0f64, 0.1..10.0f64, 0.1..10.0f64, 0.1..10.0f64, 1usize..8, 1usize..4, 0.1..1.0f64).prop_map(
        |(gamma, l, g, m, r, k, t, q)| RateCertificate {
            gamma: Tagged::declared(gamma),
            l_max: Tagged::declared(l),
            g_max: Tagged::declared(g),
            m: Tagged::declared(m),
            m_max: Tagged::declared(m),
            r: Tagged::exact(r),
            q_grad: Tagged::exact(l * r),
            l_h: Tagged::declared(1.0),
            q: Some(q),
            period: t,
            blocks: k,
            f_star: 0.0,
            f_first: 5.0,
            sum_lipschitz: Some(Tagged::declared(l)),
            composite: None,
            svm: None,
        },
    )
}

const GENERIC: [Theorem; 6] =
    [Theorem::Sigma1, Theorem::Sigma2, Theorem::Sigma3, Theorem::Sigma4, Theorem::Sigma5, Theorem::Sigma6];

proptest! {
    #![proptest_config(config())]

    #[test]
    fn projection_idempotent_and_nonexpansive((set, u, v) in set_and_points()) {
        let pu = set.project(&u);
        let pv = set.project(&v);
        prop_assert!(set.contains(&pu, 1e-9));
        prop_assert!(dist(&set.project(&pu), &pu) <= 1e-12);
        prop_assert!(dist(&pu, &pv) <= dist(&u, &v) + 1e-12);
    }

    #[test]
    fn gauss_southwell_scale_invariant(norms in prop::collection::vec(0.0..5.0f64, 1..8), q in 0.05..1.0f64, scale in 1e-3..1e3f64) {
        let k = gauss_southwell_pick(&norms, q);
        let max = norms.iter().copied().fold(0.0, f64::max);
        prop_assert!(norms[k] >= q * max);
        let scaled: Vec<f64> = norms.iter().map(|n| n * scale).collect();
        prop_assert_eq!(gauss_southwell_pick(&scaled, q), k);
    }

    #[test]
    fn mbi_pick_is_minimizer(values in prop::collection::vec(-5.0..5.0f64, 1..8)) {
        let k = mbi_pick(&values);
        prop_assert!(values.iter().all(|&v| values[k] <= v));
        prop_assert!(values[..k].iter().all(|&v| v > values[k]));
    }

    #[test]
    fn essentially_cyclic_coverage(blocks in 1usize..6, extra in prop::collection::vec(prop::collection::vec(0usize..6, 0..4), 0..3), shift in 0usize..5) {
        // A cover for every block, scattered over the period, plus arbitrary extra sets.
        let t = 1 + extra.len();
        let mut map: Vec<Vec<usize>> = vec![Vec::new(); t];
        for k in 0..blocks {
            map[(k + shift) % t].push(k);
        }
        for (i, e) in extra.iter().enumerate() {
            map[i + 1].extend(e.iter().filter(|&&k| k < blocks));
        }
        for s in &mut map {
            s.sort_unstable();
            s.dedup();
        }
        let rule = Rule::EssentiallyCyclic { period_map: map.clone() };
        let mut sch = Schedule::new(rule, blocks).unwrap();
        let picks: Vec<Vec<usize>> = (0..3 * t).map(|r| sch.select_blocks::<f64>(r, None).unwrap()).collect();
        for w in picks.windows(t) {
            let seen: BTreeSet<usize> = w.iter().flatten().copied().collect();
            prop_assert_eq!(seen.len(), blocks);
        }
        if blocks > 1 {
            let broken: Vec<Vec<usize>> = map.iter().map(|s| s.iter().copied().filter(|&k| k != 0).collect()).collect();
            let rejected = Schedule::new(Rule::EssentiallyCyclic { period_map: broken }, blocks).is_err();
            prop_assert!(rejected);
        }
    }

    #[test]
    fn sigma_positive_and_ordered(cert in base_cert(), factor in 1.01..4.0f64) {
        for th in GENERIC {
            let base = sigma_for(th, &cert).unwrap();
            prop_assert!(base.sigma > 0.0 && base.sigma.is_finite());
            prop_assert!(base.c >= 2.0);
            let mut bigger_r = cert.clone();
            bigger_r.r.value *= factor;
            prop_assert!(sigma_for(th, &bigger_r).unwrap().sigma < base.sigma);
        }
        let s1 = sigma_for(Theorem::Sigma1, &cert).unwrap().sigma;
        let mut more_k = cert.clone();
        more_k.blocks += 1;
        prop_assert!(sigma_for(Theorem::Sigma1, &more_k).unwrap().sigma < s1);
        let mut more_g = cert.clone();
        more_g.g_max.value *= factor;
        prop_assert!(sigma_for(Theorem::Sigma1, &more_g).unwrap().sigma < s1);
        let mut more_gamma = cert.clone();
        more_gamma.gamma.value *= factor;
        prop_assert!(sigma_for(Theorem::Sigma1, &more_gamma).unwrap().sigma > s1);
        let mut more_m = cert.clone();
        more_m.m.value *= factor;
        prop_assert!(sigma_for(Theorem::Sigma5, &more_m).unwrap().sigma < sigma_for(Theorem::Sigma5, &cert).unwrap().sigma);
    }

    #[test]
    fn envelope_conservative_under_larger_constants(cert in base_cert(), factor in 1.0..4.0f64, deltas in prop::collection::vec(0.0..3.0f64, 5..40)) {
        let points: Vec<(usize, f64)> = deltas.iter().enumerate().map(|(r, &d)| (r, d)).collect();
        let mut looser = cert.clone();
        looser.r.value *= factor;
        looser.g_max.value *= factor;
        looser.l_max.value *= factor;
        looser.m.value *= factor;
        looser.q_grad.value *= factor;
        looser.sum_lipschitz = cert.sum_lipschitz.map(|t| Tagged::declared(t.value * factor));
        for th in GENERIC {
            let tight = envelope_report(&points, &sigma_for(th, &cert).unwrap(), false);
            let loose = envelope_report(&points, &sigma_for(th, &looser).unwrap(), false);
            if tight.pass {
                prop_assert!(loose.pass, "{th} stopped passing");
            }
        }
    }

    #[test]
    fn envelope_bound_decreasing(sigma in 1e-4..10.0f64, f_first in 0.0..100.0f64, offset in 0usize..4) {
        let rc = RateConstant { sigma, c: c_constant(sigma, f_first, 0.0), offset };
        let vals: Vec<f64> = (offset + 1..offset + 30).map(|r| rc.envelope(r).unwrap()).collect();
        prop_assert!(vals.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(rc.envelope(offset).is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn mbi_engine_choice_matches_brute_force(seed in 0u64..1000, group in 1usize..4) {
        let spec = ModelSpec::Lasso { rows: 8, cols: 4 * group, density: 0.6, lambda_ratio: 0.1, block_size: group };
        let inst = build_instance::<f64>(&spec, seed).unwrap();
        let p = &inst.problem;
        let s = Surrogate::prox_linear(p);
        let trace = run_bsum(&RunConfig::new(Arc::clone(p), s.clone(), Rule::MaxBlockImprovement, 6, vec![0.0; p.dim()])).unwrap();
        for rec in trace.records.iter().filter(|r| !r.blocks.is_empty()) {
            let x = &trace.iterates[rec.r];
            let vu = virtual_updates(p, &s, x).unwrap();
            let part = p.partition();
            let brute: Vec<f64> = (0..p.num_blocks())
                .map(|k| p.objective(&part.with_block(x, k, part.block(&vu.candidate, k))))
                .collect();
            let best = brute.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(rec.blocks.len(), 1);
            prop_assert!((brute[rec.blocks[0]] - best).abs() <= 1e-12);
        }
    }

    #[test]
    fn monotone_descent_every_rule(seed in 0u64..1000, rule_ix in 0usize..6, exact in any::<bool>()) {
        let spec = ModelSpec::Lasso { rows: 10, cols: 6, density: 0.5, lambda_ratio: 0.1, block_size: 1 };
        let inst = build_instance::<f64>(&spec, seed).unwrap();
        let p = &inst.problem;
        let rule = match rule_ix {
            0 => Rule::GaussSeidel,
            1 => Rule::EssentiallyCyclic { period_map: vec![vec![0, 2, 4], vec![1, 3, 5]] },
            2 => Rule::GaussSouthwell { q: 0.5 },
            3 => Rule::MaxBlockImprovement,
            4 => Rule::RandomPermutation { seed },
            _ => Rule::FixedOrder { order: vec![5, 4, 3, 2, 1, 0] },
        };
        let s = if exact { Surrogate::exact(p) } else { Surrogate::prox_linear(p) };
        let trace = run_bsum(&RunConfig::new(Arc::clone(p), s, rule, 40, vec![0.0; p.dim()])).unwrap();
        for w in trace.records.windows(2) {
            prop_assert!(w[1].f <= w[0].f + 1e-12, "f rose {} -> {}", w[0].f, w[1].f);
        }
    }

    #[test]
    fn irls_bound_majorizes(seed in 0u64..1000, eta in 0.01..1.0f64) {
        let inst = build_instance::<f64>(&ModelSpec::FermatWeber { terms: 5, dim: 3, eta }, seed).unwrap();
        let p = &inst.problem;
        let s = inst.custom_surrogate.clone().unwrap();
        let pairs = sample_pairs(p, 100, 3.0, seed);
        for (x, v) in &pairs {
            let g = p.smooth_value(v);
            prop_assert!(surrogate_value(&s, p, 0, v, x) >= g - 1e-10);
            prop_assert!((surrogate_value(&s, p, 0, x, x) - p.smooth_value(x)).abs() <= 1e-10);
        }
    }

    #[test]
    fn declared_lipschitz_holds_on_pairs(seed in 0u64..1000, family in 0usize..5) {
        let spec = match family {
            0 => ModelSpec::Lasso { rows: 10, cols: 6, density: 0.5, lambda_ratio: 0.1, block_size: 2 },
            1 => ModelSpec::GroupLasso { rows: 8, groups: 3, group_size: 3, rank: 2, nu_ratio: 0.1 },
            2 => ModelSpec::Logistic { rows: 20, cols: 5, nu_ratio: 0.1, block_size: 1 },
            3 => ModelSpec::L2Svm { rows: 15, cols: 4, lambda: 0.1, block_size: 1 },
            _ => ModelSpec::TwoBlockQuadratic { n1: 5, n2: 3 },
        };
        let inst = build_instance::<f64>(&spec, seed).unwrap();
        let p = &inst.problem;
        let m = p.smooth().lipschitz();
        for (x, v) in sample_pairs(p, 100, 2.0, seed) {
            let lhs = dist(&p.gradient(&x), &p.gradient(&v));
            prop_assert!(lhs <= m * dist(&x, &v) + 1e-9, "{}: {lhs} > {m} * {}", spec.family(), dist(&x, &v));
        }
        let rep = check_nesterov_inequality(p, &sample_pairs(p, 50, 2.0, seed + 1), None);
        prop_assert!(rep.max_violation <= 1e-9);
    }
}
