use std::collections::BTreeSet;

use dendrite::addressing::{canonicalize, Corner, VertexId, Word};
use dendrite::graph::{lattice, BallRegion, LevelGraph};
use dendrite::harmonics::{discrete_approximation, energy_closed, eval_closed, HarmonicSpec};
use dendrite::measure::{cell_measure, harmonic_weights, WeightVector};
use dendrite::rational::{int, ratio, Rational};
use dendrite::solver::{
    dirichlet_energy, effective_resistance, equilibrium_potential, solve_dirichlet, Constraints, VertexFunction,
};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn small_rational() -> impl Strategy<Value = Rational> {
    (-30i64..=30, 1i64..=7).prop_map(|(p, q)| ratio(p, q))
}

fn s0_strategy() -> impl Strategy<Value = Rational> {
    prop_oneof![Just(ratio(1, 2)), Just(ratio(1, 3)), Just(ratio(2, 5)), Just(ratio(3, 4))]
}

fn word(max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0u8..4, 0..=max_len).prop_map(|d| Word::from_digits(&d))
}

fn corner() -> impl Strategy<Value = Corner> {
    prop_oneof![Just(Corner::Q1), Just(Corner::Q2), Just(Corner::Q3)]
}

/// A vertex of `V_level`, given as a raw pair that may need canonicalizing.
fn vertex(level: usize) -> impl Strategy<Value = VertexId> {
    (prop::collection::vec(0u8..4, level), corner())
        .prop_map(|(d, c)| canonicalize(&Word::from_digits(&d), c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonical_forms_are_fixed_points(w in word(9), c in corner()) {
        let v = canonicalize(&w, c);
        prop_assert_eq!(canonicalize(v.word(), v.corner()), v.clone());
        let (p, q) = (v.coords(), dendrite::addressing::apply_map(&w, c.coords()));
        prop_assert!((p.0 - q.0).hypot(p.1 - q.1) < 1e-9);
    }

    #[test]
    fn resistance_metric_axioms(a in vertex(4), b in vertex(4), c in vertex(4)) {
        let g = LevelGraph::new(4, ratio(1, 2)).unwrap();
        let d = |x: &VertexId, y: &VertexId| g.resistance_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &b).is_zero(), a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        let m = g.vertex(g.median(g.index_of(&a).unwrap(), g.index_of(&b).unwrap(), g.index_of(&c).unwrap()));
        prop_assert_eq!(d(&a, &c), d(&a, &m) + d(&m, &c));
        if a != c {
            let r: Rational = effective_resistance(&g, std::slice::from_ref(&a), std::slice::from_ref(&c)).unwrap();
            prop_assert_eq!(r, d(&a, &c));
        }
    }

    #[test]
    fn balls_grow_with_the_radius(x in vertex(3), p in 1i64..20, q in 1i64..20) {
        let g = LevelGraph::new(5, ratio(1, 2)).unwrap();
        let (r1, r2) = if p <= q { (ratio(p, 16), ratio(q, 16)) } else { (ratio(q, 16), ratio(p, 16)) };
        let interior = |r: &Rational| -> BTreeSet<u32> {
            let b = BallRegion::new(&g, &x, r).unwrap();
            b.interior().map(|k| b.network().global(k)).collect()
        };
        prop_assert!(interior(&r1).is_subset(&interior(&r2)));
    }

    #[test]
    fn maximum_principle(
        s0 in s0_strategy(),
        level in 1u32..=4,
        pins in prop::collection::vec((vertex(4), small_rational()), 1..5),
    ) {
        let g = LevelGraph::new(level, s0).unwrap();
        let mut c = Constraints::new();
        for (x, v) in pins {
            if g.contains(&x) && !c.pinned.iter().any(|(y, _)| *y == x) {
                c = c.pin(x, v);
            }
        }
        prop_assume!(!c.pinned.is_empty());
        let lo = c.pinned.iter().map(|(_, v)| v).min().unwrap().clone();
        let hi = c.pinned.iter().map(|(_, v)| v).max().unwrap().clone();
        let f = solve_dirichlet::<Rational>(&g, &c).unwrap();
        let (fmin, fmax) = f.min_max();
        prop_assert!(fmin >= lo && fmax <= hi);
    }

    #[test]
    fn minimizer_is_strictly_optimal(
        a in small_rational(), b in small_rational(), c in small_rational(),
        pick in 0usize..1000, bump in prop_oneof![Just(ratio(1, 3)), Just(ratio(-2, 5))],
    ) {
        let g = LevelGraph::new(3, ratio(1, 3)).unwrap();
        let k = Constraints::new().pin(VertexId::q1(), a).pin(VertexId::q2(), b).pin(VertexId::q3(), c);
        let f = solve_dirichlet::<Rational>(&g, &k).unwrap();
        let e = dirichlet_energy(&g, &f);
        let pinned: Vec<u32> = [VertexId::q1(), VertexId::q2(), VertexId::q3()]
            .iter()
            .map(|x| g.index_of(x).unwrap())
            .collect();
        let free: Vec<u32> = (0..g.vertex_count() as u32).filter(|v| !pinned.contains(v)).collect();
        let v = free[pick % free.len()];
        let net = f.network().clone();
        let mut values = f.values().to_vec();
        let kloc = net.local(v).unwrap() as usize;
        values[kloc] += bump;
        let perturbed = VertexFunction::new(net, values);
        prop_assert!(dirichlet_energy(&g, &perturbed) > e);
    }

    #[test]
    fn restriction_to_coarse_lattice_is_level_independent(
        n in 1u32..=2,
        vals in prop::collection::vec(small_rational(), 3..6),
        picks in prop::collection::vec(0usize..100, 3..6),
    ) {
        let coarse = lattice(n);
        let mut c = Constraints::new();
        for (v, p) in vals.into_iter().zip(picks) {
            let x = coarse[p % coarse.len()].clone();
            if !c.pinned.iter().any(|(y, _)| *y == x) {
                c = c.pin(x, v);
            }
        }
        let restrict = |level: u32| -> Vec<Rational> {
            let g = LevelGraph::new(level, ratio(2, 5)).unwrap();
            let f = solve_dirichlet::<Rational>(&g, &c).unwrap();
            coarse.iter().map(|x| f.value(&g, x).unwrap()).collect()
        };
        let base = restrict(n);
        prop_assert_eq!(&restrict(n + 1), &base);
        prop_assert_eq!(&restrict(n + 2), &base);
    }

    #[test]
    fn grounding_more_lowers_resistance(x in vertex(3), a in vertex(3), b in vertex(3)) {
        prop_assume!(x != a && x != b);
        let g = LevelGraph::new(3, ratio(1, 2)).unwrap();
        let (_, small) = equilibrium_potential::<Rational>(&g, &x, std::slice::from_ref(&a)).unwrap();
        let mut both = vec![a.clone()];
        if b != a {
            both.push(b.clone());
        }
        let (_, big) = equilibrium_potential::<Rational>(&g, &x, &both).unwrap();
        prop_assert!(big <= small);
    }

    #[test]
    fn reflection_symmetry_of_closed_forms(
        w in word(6), c in corner(), s0 in s0_strategy(),
        a2 in small_rational(), a1 in small_rational(), a3 in small_rational(),
    ) {
        let v = canonicalize(&w, c);
        for spec in [
            HarmonicSpec::u_minus(a2.clone(), a1.clone(), a3.clone(), s0.clone()).unwrap(),
            HarmonicSpec::u_down(s0.clone()).unwrap(),
        ] {
            let mirrored = spec.reflect().unwrap();
            prop_assert_eq!(eval_closed(&spec, &v).unwrap(), eval_closed(&mirrored, &v.reflect()).unwrap());
        }
    }

    #[test]
    fn u_minus_energy_matches_the_discrete_solve(
        s0 in s0_strategy(), level in 0u32..=4,
        a2 in small_rational(), a1 in small_rational(), a3 in small_rational(),
    ) {
        let spec = HarmonicSpec::u_minus(a2, a1, a3, s0.clone()).unwrap();
        let g = LevelGraph::new(level, s0).unwrap();
        let (_, e) = discrete_approximation::<Rational>(&spec, &g).unwrap();
        prop_assert_eq!(e, energy_closed(&spec));
    }

    #[test]
    fn cell_measures_are_additive(w0 in 1i64..12, w in word(6)) {
        let weights = WeightVector::symmetric(ratio(w0, 26), ratio(13 - w0, 26)).unwrap();
        let children: Rational = (0..4).map(|i| cell_measure(&weights, &w.with(&[i]))).sum();
        prop_assert_eq!(children, cell_measure(&weights, &w));
    }

    #[test]
    fn quadrature_weights_are_a_probability_vector(w0 in 1i64..12, s0 in s0_strategy()) {
        let weights = WeightVector::symmetric(ratio(w0, 26), ratio(13 - w0, 26)).unwrap();
        let p = harmonic_weights(&weights, &s0);
        prop_assert!(p.iter().all(|x| *x > Rational::zero()));
        prop_assert_eq!(p.iter().cloned().sum::<Rational>(), Rational::one());
    }
}

#[test]
fn level_measures_sum_to_one() {
    let w = WeightVector::symmetric(ratio(1, 6), ratio(1, 3)).unwrap();
    for level in 0..=5 {
        let total: Rational = Word::all_of_length(level).map(|c| cell_measure(&w, &c)).sum();
        assert_eq!(total, int(1));
    }
}
