use num_complex::Complex64;
use tasknet::circuits::{basis_offset, generate_gbs, statevector_oracle};
use tasknet::network::{close_amplitude, from_circuit};
use tasknet::pathtree::greedy_path_by_components;
use tasknet::{build_tree, AmplitudeClosure, BasisState, GbsConfig};

fn amplitude(width: usize, cutoff: usize, seed: u64, basis: &[usize]) -> Complex64 {
    let c = generate_gbs(&GbsConfig::new(1, width, 1, 0.5, cutoff, seed)).unwrap();
    let basis = BasisState::new(basis.to_vec());
    let net = close_amplitude(
        &from_circuit::<Complex64>(&c).unwrap(),
        &AmplitudeClosure::for_circuit(&c, &basis),
    )
    .unwrap();
    let tree = build_tree(&net, &greedy_path_by_components(&net).unwrap()).unwrap();
    let got = tree.evaluate(&net).unwrap().scalar_value().unwrap();
    let want = statevector_oracle(&c).unwrap()[basis_offset(cutoff, &basis.values)];
    assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0));
    got
}

#[test]
fn truncation_error_shrinks_with_cutoff() {
    for (seed, basis) in [(1u64, [0, 0, 0]), (4, [1, 1, 0]), (9, [0, 1, 1])] {
        let errors: Vec<f64> = (2..=6)
            .map(|d| (amplitude(3, d, seed, &basis) - amplitude(3, 2 * d, seed, &basis)).norm())
            .collect();
        for w in errors.windows(2) {
            assert!(w[1] <= w[0], "seed {seed}: {errors:?}");
        }
        assert!(errors[4] < 1e-3, "seed {seed}: {errors:?}");
    }
}
