use mforge::lie::{
    adjoint, coadjoint, exponential, pair, random_complex_element, random_lie_element, random_unitary,
    AlgebraDescriptor, Basis, ComplexLieElement,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn algebras() -> impl Strategy<Value = AlgebraDescriptor> {
    prop_oneof![
        (1usize..=4).prop_map(AlgebraDescriptor::unitary),
        (2usize..=4).prop_map(AlgebraDescriptor::special_unitary),
        (2usize..=3, 1usize..=3).prop_map(|(a, b)| AlgebraDescriptor::special_unitary(a).direct_sum(&AlgebraDescriptor::unitary(b))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pairing_is_invariant_under_unitaries(desc in algebras(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = Basis::new(&desc);
        let alpha = random_lie_element(&basis, &mut rng, 1.0).flat();
        let xi = random_lie_element(&basis, &mut rng, 1.0);
        let k = random_unitary(&basis, &mut rng);
        let lhs = pair(&coadjoint(&k, &alpha).unwrap(), &adjoint(&k, &xi.to_complex()).unwrap().to_compact().unwrap()).unwrap();
        prop_assert!((lhs - pair(&alpha, &xi).unwrap()).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn bracket_preserves_anti_hermitian(desc in algebras(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = Basis::new(&desc);
        let x = random_lie_element(&basis, &mut rng, 1.0);
        let y = random_lie_element(&basis, &mut rng, 1.0);
        // construction through LieElement::new rejects anything that is not anti-Hermitian
        prop_assert!(x.bracket(&y).is_ok());
    }

    #[test]
    fn exponential_is_one_parameter(desc in algebras(), seed in any::<u64>(), s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = Basis::new(&desc);
        let xi = random_complex_element(&basis, &mut rng, 0.7);
        let joint = exponential(&xi.scale(s + t));
        let split = exponential(&xi.scale(s)).compose(&exponential(&xi.scale(t))).unwrap();
        for (a, b) in joint.blocks().iter().zip(split.blocks()) {
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn split_recombines_and_is_idempotent(desc in algebras(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = Basis::new(&desc);
        let x = random_complex_element(&basis, &mut rng, 1.0);
        let (re, im) = x.split();
        let back = ComplexLieElement::from_parts(&re, &im).unwrap();
        prop_assert!(back.sub(&x).unwrap().norm() <= 1e-14 * (1.0 + x.norm()));
        let (re2, im2) = re.to_complex().split();
        prop_assert!(re2.sub(&re).unwrap().norm() == 0.0 && im2.norm() == 0.0);
    }

    #[test]
    fn adjoint_is_a_homomorphism(desc in algebras(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = Basis::new(&desc);
        let g = exponential(&random_complex_element(&basis, &mut rng, 0.4));
        let h = exponential(&random_complex_element(&basis, &mut rng, 0.4));
        let x = random_complex_element(&basis, &mut rng, 1.0);
        let lhs = adjoint(&g.compose(&h).unwrap(), &x).unwrap();
        let rhs = adjoint(&g, &adjoint(&h, &x).unwrap()).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-10 * (1.0 + lhs.norm()));
    }
}
