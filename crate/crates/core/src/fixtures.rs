//! Small bundled networks used by tests, the CLI, and the acceptance suite.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuits::{random_qudit_circuit, BasisState, Circuit, Gate};
use crate::network::{close_amplitude, from_circuit, AmplitudeClosure, TensorNetwork};
use crate::pathtree::{greedy_path, ContractionPath, NodeRef};
use crate::scalar::Scalar;
use crate::tensor::{Index, Tensor};

/// Two wires: a single-qudit gate on each, then a controlled phase.
pub fn example_circuit(d: usize) -> Circuit {
    let mut c = Circuit::new(2, d);
    let s = if d == 2 { "H" } else { "F" };
    c.push(Gate::named(s, vec![0], &[], d).unwrap()).unwrap();
    c.push(Gate::named(s, vec![1], &[], d).unwrap()).unwrap();
    c.push(Gate::named("CZ", vec![0, 1], &[], d).unwrap())
        .unwrap();
    c
}

/// The two-wire example with readable labels. Wire 0 runs `a -> b -> c`,
/// wire 1 runs `d -> e -> f`; kets fix `a` and `d` to 0 and bras fix the
/// outputs `c`, `f` to `basis`.
pub fn example_network<T: Scalar>(d: usize, basis: [usize; 2]) -> TensorNetwork<T> {
    let c = example_circuit(d);
    let s = &c.gates[0].matrix;
    let b = &c.gates[2].matrix;
    let cast = |v: &[Complex64]| v.iter().map(|z| T::from_c64(*z)).collect::<Vec<T>>();
    let ix = |l: &str| Index::new(l, d);
    let node = |labels: &[&str], data: Vec<T>| {
        Tensor::new(labels.iter().map(|l| ix(l)).collect(), data).unwrap()
    };
    let one_hot = |l: &str, v: usize| Tensor::<T>::one_hot(l, d, v).unwrap();
    TensorNetwork::new(vec![
        ("bra_c".into(), one_hot("c", basis[0])),
        ("bra_f".into(), one_hot("f", basis[1])),
        ("B".into(), node(&["c", "f", "b", "e"], cast(b))),
        ("S_ba".into(), node(&["b", "a"], cast(s))),
        ("S_ed".into(), node(&["e", "d"], cast(s))),
        ("ket_a".into(), one_hot("a", 0)),
        ("ket_d".into(), one_hot("d", 0)),
    ])
    .unwrap()
}

/// The reference path for [`example_network`]; only `S_ba` needs a transpose.
pub fn example_path() -> ContractionPath {
    ContractionPath::parse(&[
        ("bra_c", "B"),
        ("S_ed", "ket_d"),
        ("ket_a", "S_ba"),
        ("bra_f", "#0"),
        ("#3", "#1"),
        ("#2", "#4"),
    ])
    .unwrap()
}

/// A closed amplitude network whose expensive part is independent of one
/// label, so slicing that label leaves most of the work shared.
///
/// Returns the network, a path that contracts the shared part first, and the
/// label to slice.
pub fn shared_work_case<T: Scalar>(
    wires: usize,
    depth: usize,
    d: usize,
    seed: u64,
) -> (TensorNetwork<T>, ContractionPath, String) {
    let mut c = random_qudit_circuit(wires, depth, d, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..2 {
        let u = crate::circuits::random_unitary(d, &mut rng);
        c.push(Gate::new("U1", vec![0], Vec::new(), d, u).unwrap())
            .unwrap();
    }
    let basis = BasisState::new((0..wires).map(|_| rng.random_range(0..d)).collect());
    let net = close_amplitude(
        &from_circuit::<T>(&c).unwrap(),
        &AmplitudeClosure::for_circuit(&c, &basis),
    )
    .unwrap();

    let last = format!("g{}", c.gates.len() - 1);
    let prev = format!("g{}", c.gates.len() - 2);
    let tail_label = net.node(&last).unwrap().indices()[1].label.clone();
    let bra = net
        .nodes()
        .iter()
        .find(|n| {
            n.id.starts_with("bra.")
                && n.tensor.indices()[0].label == net.node(&last).unwrap().indices()[0].label
        })
        .unwrap()
        .id
        .clone();

    let mut body = net.clone();
    for id in [&last, &prev, &bra] {
        body.remove_node(id).unwrap();
    }
    // the body is closed except for the wire-0 label feeding `prev`
    let mut steps = if body.len() > 1 {
        greedy_path(&body).unwrap().steps
    } else {
        Vec::new()
    };
    let body_root = steps.len().checked_sub(1).map(NodeRef::Step);
    let k = steps.len();
    steps.push((NodeRef::Leaf(last), NodeRef::Leaf(bra)));
    steps.push((NodeRef::Leaf(prev), NodeRef::Step(k)));
    let root = body_root.unwrap_or_else(|| NodeRef::Leaf(body.nodes()[0].id.clone()));
    steps.push((root, NodeRef::Step(k + 1)));
    (net, ContractionPath::new(steps), tail_label)
}

/// Eight independent matrix-product traces of side `n`, multiplied together.
/// Every branch is a separate chain, so the task graph has eight-way
/// parallelism and roughly `8 * 8 n^3` FLOP.
pub fn parallel_traces<T: Scalar>(
    branches: usize,
    n: usize,
    seed: u64,
) -> (TensorNetwork<T>, ContractionPath) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let mut steps = Vec::new();
    let scale = 1.0 / n as f64;
    for i in 0..branches {
        let (p, q, r) = (format!("p{i}"), format!("q{i}"), format!("r{i}"));
        for (name, a, b) in [("A", &p, &q), ("B", &q, &r), ("C", &r, &p)] {
            let t = Tensor::from_fn(
                vec![Index::new(a.clone(), n), Index::new(b.clone(), n)],
                |_| {
                    T::from_c64(Complex64::new(
                        rng.random_range(-1.0..1.0) * scale.sqrt(),
                        rng.random_range(-1.0..1.0) * scale.sqrt(),
                    ))
                },
            )
            .unwrap();
            nodes.push((format!("{name}{i}"), t));
        }
        let k = steps.len();
        steps.push((
            NodeRef::Leaf(format!("A{i}")),
            NodeRef::Leaf(format!("B{i}")),
        ));
        steps.push((NodeRef::Step(k), NodeRef::Leaf(format!("C{i}"))));
    }
    // multiply the branch scalars pairwise as a balanced tree
    let mut level: Vec<NodeRef> = (0..branches).map(|i| NodeRef::Step(2 * i + 1)).collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            if let [a, b] = pair {
                steps.push((a.clone(), b.clone()));
                next.push(NodeRef::Step(steps.len() - 1));
            } else {
                next.push(pair[0].clone());
            }
        }
        level = next;
    }
    (
        TensorNetwork::new(nodes).unwrap(),
        ContractionPath::new(steps),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{basis_offset, statevector_oracle};
    use crate::pathtree::{build_tree, cost_report, SliceSet};

    #[test]
    fn example_network_matches_circuit_oracle() {
        for d in [2, 3] {
            let c = example_circuit(d);
            let psi = statevector_oracle(&c).unwrap();
            for x in 0..d {
                for y in 0..d {
                    let net = example_network::<Complex64>(d, [x, y]);
                    let tree = build_tree(&net, &example_path()).unwrap();
                    let v = tree.evaluate(&net).unwrap().scalar_value().unwrap();
                    assert!((v - psi[basis_offset(d, &[x, y])]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shared_work_case_is_mostly_shared() {
        let (net, path, label) = shared_work_case::<Complex64>(4, 4, 4, 7);
        let tree = build_tree(&net, &path).unwrap();
        let v = tree.evaluate(&net).unwrap().scalar_value().unwrap();
        let greedy = build_tree(&net, &greedy_path(&net).unwrap()).unwrap();
        let w = greedy.evaluate(&net).unwrap().scalar_value().unwrap();
        assert!((v - w).norm() < 1e-12);
        let set = SliceSet::new(&tree, &[label]).unwrap();
        let r = cost_report(&tree, &set, true).unwrap();
        assert!(
            r.shared_fraction_f64() >= 0.4,
            "{}",
            r.shared_fraction_f64()
        );
        let saving = 1.0 - r.flop_with_sharing() as f64 / r.flop_without_sharing() as f64;
        assert!(saving >= 0.4, "{saving}");
    }

    #[test]
    fn parallel_traces_builds() {
        let (net, path) = parallel_traces::<Complex64>(8, 4, 1);
        let tree = build_tree(&net, &path).unwrap();
        assert_eq!(tree.flop(), 8 * (8 * 64 + 8 * 16) + 7 * 8);
        let v = tree.evaluate(&net).unwrap().scalar_value().unwrap();
        let mut want = Complex64::new(1.0, 0.0);
        for i in 0..8 {
            let m = |name: &str| net.node(&format!("{name}{i}")).unwrap().data().to_vec();
            let (a, b, c) = (m("A"), m("B"), m("C"));
            let mut tr = Complex64::new(0.0, 0.0);
            for p in 0..4 {
                for q in 0..4 {
                    for r in 0..4 {
                        tr += a[p * 4 + q] * b[q * 4 + r] * c[r * 4 + p];
                    }
                }
            }
            want *= tr;
        }
        assert!((v - want).norm() < 1e-12 * (1.0 + want.norm()));
    }
}
