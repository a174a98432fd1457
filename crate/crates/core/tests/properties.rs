use proptest::prelude::*;
use qgc_core::codebook::elementwise_sumset;
use qgc_core::rate_regions::{AuxiliaryChoice, MacProblem};
use qgc_core::simulate::{run_mac, verify_coset_counts, CodeDesign, CosetSource, MacConfig};
use qgc_core::typicality::{is_typical, sample_typical};
use qgc_core::{
    GroupMatrix, GroupSpec, GroupVector, JointPmf, Pmf, QgcCodebook, QgcSpec, TypicalSet, TypicalityParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn group() -> impl Strategy<Value = GroupSpec> {
    prop_oneof![
        Just(GroupSpec::new(2, 1).unwrap()),
        Just(GroupSpec::z4()),
        Just(GroupSpec::new(2, 3).unwrap()),
        Just(GroupSpec::new(3, 2).unwrap()),
        Just(GroupSpec::new(5, 1).unwrap()),
    ]
}

fn pmf(g: GroupSpec) -> impl Strategy<Value = Pmf> {
    prop::collection::vec(0u32..10, g.order() as usize).prop_filter_map("nonzero mass", move |w| {
        let total: u32 = w.iter().sum();
        (total > 0).then(|| Pmf::new(g, w.iter().map(|&x| x as f64 / total as f64).collect()).unwrap())
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

proptest! {
    #[test]
    fn ring_identities((g, a, b, c) in group().prop_flat_map(|g| {
        let q = g.order();
        (Just(g), 0..q, 0..q, 0..q)
    })) {
        prop_assert_eq!(g.sub_raw(g.add_raw(a, b), b), a);
        prop_assert_eq!(g.add_raw(a, g.neg_raw(a)), 0);
        prop_assert_eq!(g.mul_raw(g.add_raw(a, b), c), g.add_raw(g.mul_raw(a, c), g.mul_raw(b, c)));
        for s in 0..=g.r() {
            let m = g.p_pow(s).unwrap();
            prop_assert_eq!(g.quotient_raw(g.add_raw(a, b), s), (g.quotient_raw(a, s) + g.quotient_raw(b, s)) % m);
        }
        if a != 0 {
            let v = g.valuation(a);
            prop_assert_eq!(a % g.p_pow(v).unwrap(), 0);
            prop_assert!(v == g.r() - 1 || a % g.p_pow(v + 1).unwrap() != 0);
        }
    }

    #[test]
    fn matrix_map_is_a_homomorphism((g, k, n, seed, c) in group().prop_flat_map(|g| (Just(g), 1usize..4, 1usize..5, any::<u64>(), 0..g.order()))) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = GroupMatrix::random(g, k, n, &mut rng);
        let u = GroupVector::random(g, k, &mut rng);
        let v = GroupVector::random(g, k, &mut rng);
        let lhs = u.add(&v).unwrap().vec_mat_mul(&m).unwrap();
        let rhs = u.vec_mat_mul(&m).unwrap().add(&v.vec_mat_mul(&m).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(u.scale(c).vec_mat_mul(&m).unwrap(), u.vec_mat_mul(&m).unwrap().scale(c));
    }

    #[test]
    fn entropy_chain_rules((g, p) in group().prop_flat_map(|g| (Just(g), pmf(g)))) {
        for s in 0..=g.r() {
            let split = p.quotient_pushforward(s).unwrap().entropy() + p.cond_entropy_given_quotient(s).unwrap();
            prop_assert!(close(split, p.entropy()));
        }
        prop_assert!(p.entropy() <= g.log2_order() + 1e-12);
    }

    #[test]
    fn joint_chain_rule(w in prop::collection::vec(0u32..6, 12)) {
        let total: u32 = w.iter().sum();
        prop_assume!(total > 0);
        let j = JointPmf::new(vec![3, 4], w.iter().map(|&x| x as f64 / total as f64).collect()).unwrap();
        let hx = j.entropy_of_axes(&[0]).unwrap();
        let hy_x = j.joint_cond_entropy(1, &[0], None).unwrap();
        prop_assert!(close(j.entropy(), hx + hy_x));
        let i = j.mutual_information(&[0], &[1], &[]).unwrap();
        prop_assert!(i >= -1e-12);
        prop_assert!(close(i, hx - j.joint_cond_entropy(0, &[1], None).unwrap()));
    }

    #[test]
    fn convolution_commutes_and_associates((_g, a, b, c) in group().prop_flat_map(|g| (Just(g), pmf(g), pmf(g), pmf(g)))) {
        let ab = a.convolve(&b, 1).unwrap();
        let ba = b.convolve(&a, 1).unwrap();
        for (x, y) in ab.probs().iter().zip(ba.probs()) {
            prop_assert!(close(*x, *y));
        }
        let left = ab.convolve(&c, 1).unwrap();
        let right = a.convolve(&b.convolve(&c, 1).unwrap(), 1).unwrap();
        for (x, y) in left.probs().iter().zip(right.probs()) {
            prop_assert!(close(*x, *y));
        }
        prop_assert!(ab.entropy() + 1e-9 >= a.entropy().max(b.entropy()));
    }

    #[test]
    fn typical_set_size_bounds((g, p, k, eps) in group().prop_flat_map(|g| (Just(g), pmf(g), 1usize..7, 0.2f64..3.0))) {
        prop_assume!(g.order() <= 5);
        let params = TypicalityParams::new(eps).unwrap();
        let lazy = TypicalSet::new(&p, k, params);
        let set = TypicalSet::enumerate(&p, k, params, 1 << 20).unwrap();
        prop_assert_eq!(set.count().unwrap() as f64, lazy.size());
        // Every robust-typical word has probability at least 2^{-k(1+ε)H}.
        prop_assert!(lazy.size() <= 2f64.powf(k as f64 * (1.0 + eps) * p.entropy()) * (1.0 + 1e-9));
        for w in set.words().unwrap() {
            prop_assert!(is_typical(w, &p, params));
        }
    }

    #[test]
    fn sampled_words_are_typical((p, k, seed) in (pmf(GroupSpec::z4()), 4usize..16, any::<u64>())) {
        let params = TypicalityParams::new(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match sample_typical(&p, k, params, &mut rng) {
            Ok(x) => prop_assert!(is_typical(&x, &p, params)),
            Err(qgc_core::Error::EmptyTypicalSet { .. }) => prop_assert_eq!(TypicalSet::new(&p, k, params).size(), 0.0),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn coset_counts_within_band((p, s, k) in (pmf(GroupSpec::z4()), 0u32..3, 2usize..9)) {
        let params = TypicalityParams::new(1.0).unwrap();
        let rows = verify_coset_counts(&CosetSource::Marginal(p.clone()), &[k], s, params).unwrap();
        let r = &rows[0];
        if r.set_size > 0 {
            prop_assert!(r.count >= 1);
            prop_assert!(r.count <= r.set_size);
            prop_assert!(r.deviation <= r.band + 1e-12, "deviation {} band {}", r.deviation, r.band);
        }
        if s == 2 && r.set_size > 0 {
            prop_assert_eq!(r.count, 1);
        }
    }

    #[test]
    fn sumset_is_the_layer_convolved_code((k, n, a, seed, s1, s2) in (1usize..3, 1usize..5, 0u64..4, any::<u64>(), 1u64..16, 1u64..16)) {
        let g = GroupSpec::z4();
        let support = |mask: u64| (0..4).filter(|b| mask & (1 << b) != 0).collect::<Vec<u64>>();
        let p1 = Pmf::uniform_on(g, &support(s1)).unwrap();
        let p2 = Pmf::uniform_on(g, &support(s2)).unwrap();
        let params = TypicalityParams::new(3.0).unwrap();
        let c1 = QgcCodebook::build(QgcSpec::single(g, n, k, p1, params).unwrap(), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let c2 = c1.with_layers(vec![p2], GroupVector::random(g, n, &mut rng)).unwrap();
        let direct = elementwise_sumset(g, &c1.materialize().unwrap(), &c2.materialize().unwrap(), a);
        let via = c1.sumset(&c2, a).unwrap().materialize().unwrap().to_set();
        prop_assert_eq!(&direct, &via);
        let b = c1.check_sumset_bounds(&c2, a).unwrap();
        prop_assert!(b.lower_ok && b.upper_ok);
        prop_assert_eq!(b.size_sum as usize, direct.len());
    }
}

#[test]
fn codebook_build_is_deterministic() {
    let g = GroupSpec::z4();
    let params = TypicalityParams::new(1.0).unwrap();
    let spec = QgcSpec::single(g, 6, 4, Pmf::bernoulli(g, 0.25).unwrap(), params).unwrap();
    let a = QgcCodebook::build(spec.clone(), 17).unwrap();
    let b = QgcCodebook::build(spec.clone(), 17).unwrap();
    let c = QgcCodebook::build(spec, 18).unwrap();
    assert_eq!(a.to_document(), b.to_document());
    assert_ne!(a.to_document(), c.to_document());
}

#[test]
fn mac_runs_are_deterministic_across_pools() {
    let g = GroupSpec::z4();
    let params = TypicalityParams::new(3.0).unwrap();
    let design = CodeDesign::from_total(5, 3, AuxiliaryChoice::bernoulli(g, 0.2).unwrap(), params).unwrap();
    let cfg = MacConfig {
        problem: MacProblem::table1(0.6).unwrap(),
        design,
        trials: 300,
        seed: 4,
    };
    let run_in = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&run_mac(&cfg).unwrap()).unwrap())
    };
    assert_eq!(run_in(1), run_in(4));
}
