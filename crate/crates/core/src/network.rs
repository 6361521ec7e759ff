//! Tensor networks: tensors joined by shared index labels.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuits::{BasisState, Circuit};
use crate::scalar::Scalar;
use crate::tensor::{advance, Index, Tensor, TensorError};

/// Largest joint state space [`full_sum`] will enumerate.
pub const MAX_FULL_SUM_STATES: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("duplicate node id '{0}'")]
    DuplicateNode(String),
    #[error("unknown node id '{0}'")]
    UnknownNode(String),
    #[error("label '{label}' is carried by more than two nodes: {nodes:?}")]
    LabelOverused { label: String, nodes: Vec<String> },
    #[error("label '{label}' has dimension {first} on one node and {second} on another")]
    DimensionConflict {
        label: String,
        first: usize,
        second: usize,
    },
    #[error("network has open labels {0:?}")]
    NotClosed(Vec<String>),
    #[error("closure does not match open labels: missing {missing:?}, extra {extra:?}")]
    ClosureMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("gate on wire {wire} but circuit has {wires} wires")]
    BadWire { wire: usize, wires: usize },
    #[error("gate '{gate}' has dimension {gate_dim}, wires have dimension {wire_dim}")]
    GateDimension {
        gate: String,
        gate_dim: usize,
        wire_dim: usize,
    },
    #[error("joint state space of {0} assignments is too large for an exhaustive sum")]
    TooLarge(u128),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub id: String,
    pub tensor: Tensor<T>,
}

/// Tensors bonded by shared labels. Every label is carried by one node (an
/// open label) or two nodes (a contracted bond), with matching dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorNetwork<T> {
    nodes: Vec<Node<T>>,
    bonds: BTreeMap<String, Vec<String>>,
}

impl<T: Scalar> TensorNetwork<T> {
    pub fn new(nodes: Vec<(String, Tensor<T>)>) -> Result<Self, NetworkError> {
        let mut net = TensorNetwork {
            nodes: Vec::with_capacity(nodes.len()),
            bonds: BTreeMap::new(),
        };
        for (id, tensor) in nodes {
            net.add_node(id, tensor)?;
        }
        Ok(net)
    }

    pub fn add_node(
        &mut self,
        id: impl Into<String>,
        tensor: Tensor<T>,
    ) -> Result<(), NetworkError> {
        let id = id.into();
        if self.nodes.iter().any(|n| n.id == id) {
            return Err(NetworkError::DuplicateNode(id));
        }
        for idx in tensor.indices() {
            if let Some(carriers) = self.bonds.get(&idx.label) {
                if carriers.len() >= 2 {
                    let mut nodes = carriers.clone();
                    nodes.push(id);
                    return Err(NetworkError::LabelOverused {
                        label: idx.label.clone(),
                        nodes,
                    });
                }
                let first = self.label_dim(&idx.label).expect("carrier exists");
                if first != idx.dim {
                    return Err(NetworkError::DimensionConflict {
                        label: idx.label.clone(),
                        first,
                        second: idx.dim,
                    });
                }
            }
        }
        for idx in tensor.indices() {
            self.bonds
                .entry(idx.label.clone())
                .or_default()
                .push(id.clone());
        }
        self.nodes.push(Node { id, tensor });
        Ok(())
    }

    pub fn remove_node(&mut self, id: &str) -> Result<Tensor<T>, NetworkError> {
        let pos = self
            .nodes
            .iter()
            .position(|n| n.id == id)
            .ok_or_else(|| NetworkError::UnknownNode(id.to_string()))?;
        let node = self.nodes.remove(pos);
        self.bonds = Self::bonds_of(&self.nodes);
        Ok(node.tensor)
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&Tensor<T>> {
        self.nodes.iter().find(|n| n.id == id).map(|n| &n.tensor)
    }

    /// Label to carrying node ids, in insertion order.
    pub fn bonds(&self) -> &BTreeMap<String, Vec<String>> {
        &self.bonds
    }

    fn bonds_of(nodes: &[Node<T>]) -> BTreeMap<String, Vec<String>> {
        let mut bonds: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for n in nodes {
            for idx in n.tensor.indices() {
                bonds
                    .entry(idx.label.clone())
                    .or_default()
                    .push(n.id.clone());
            }
        }
        bonds
    }

    /// Bond map recomputed from the node index lists.
    pub fn rebuild_bonds(&self) -> BTreeMap<String, Vec<String>> {
        Self::bonds_of(&self.nodes)
    }

    pub fn label_dim(&self, label: &str) -> Option<usize> {
        let carrier = self.bonds.get(label)?.first()?;
        let t = self.node(carrier)?;
        t.indices().iter().find(|i| i.label == label).map(|i| i.dim)
    }

    /// Labels carried by exactly one node.
    pub fn open_labels(&self) -> Vec<Index> {
        self.bonds
            .iter()
            .filter(|(_, c)| c.len() == 1)
            .map(|(l, _)| Index::new(l.clone(), self.label_dim(l).unwrap()))
            .collect()
    }

    /// Labels carried by two nodes.
    pub fn contracted_labels(&self) -> Vec<Index> {
        self.bonds
            .iter()
            .filter(|(_, c)| c.len() == 2)
            .map(|(l, _)| Index::new(l.clone(), self.label_dim(l).unwrap()))
            .collect()
    }

    pub fn is_closed(&self) -> bool {
        self.bonds.values().all(|c| c.len() == 2)
    }

    /// Number of joint assignments of every label in the network.
    pub fn state_space(&self) -> u128 {
        self.bonds
            .keys()
            .map(|l| self.label_dim(l).unwrap() as u128)
            .product()
    }

    pub fn total_bytes(&self) -> u64 {
        self.nodes.iter().map(|n| n.tensor.bytes()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> TensorNetwork<U> {
        TensorNetwork {
            nodes: self
                .nodes
                .iter()
                .map(|n| Node {
                    id: n.id.clone(),
                    tensor: n.tensor.cast(),
                })
                .collect(),
            bonds: self.bonds.clone(),
        }
    }
}

/// Label of wire `wire` after its `k`-th gate (`k = 0` is the input).
pub fn wire_label(wire: usize, k: usize) -> String {
    format!("{wire}.{k}")
}

/// Open output label of every wire of `c`, in wire order.
pub fn output_labels(c: &Circuit) -> Vec<String> {
    let mut depth = vec![0usize; c.wires];
    for g in &c.gates {
        for &w in &g.wires {
            depth[w] += 1;
        }
    }
    depth
        .iter()
        .enumerate()
        .map(|(w, &k)| wire_label(w, k))
        .collect()
}

/// Maps a circuit to a network: a `|0>` node `in{w}` per wire and a node
/// `g{i}` per gate whose legs are `(outputs.., inputs..)`. Each wire threads
/// labels `w.0, w.1, ..` through the gates acting on it. The output labels
/// stay open.
pub fn from_circuit<T: Scalar>(c: &Circuit) -> Result<TensorNetwork<T>, NetworkError> {
    let d = c.dim;
    let mut net = TensorNetwork::new(Vec::new())?;
    for w in 0..c.wires {
        net.add_node(format!("in{w}"), Tensor::one_hot(wire_label(w, 0), d, 0)?)?;
    }
    let mut depth = vec![0usize; c.wires];
    for (i, g) in c.gates.iter().enumerate() {
        if g.dim != d {
            return Err(NetworkError::GateDimension {
                gate: g.name.clone(),
                gate_dim: g.dim,
                wire_dim: d,
            });
        }
        if let Some(&w) = g.wires.iter().find(|&&w| w >= c.wires) {
            return Err(NetworkError::BadWire {
                wire: w,
                wires: c.wires,
            });
        }
        let mut indices = Vec::with_capacity(2 * g.arity());
        for &w in &g.wires {
            indices.push(Index::new(wire_label(w, depth[w] + 1), d));
        }
        for &w in &g.wires {
            indices.push(Index::new(wire_label(w, depth[w]), d));
        }
        for &w in &g.wires {
            depth[w] += 1;
        }
        let data = g.matrix.iter().map(|&z| T::from_c64(z)).collect();
        net.add_node(format!("g{i}"), Tensor::new(indices, data)?)?;
    }
    Ok(net)
}

/// One output basis value per open label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmplitudeClosure {
    pub entries: Vec<(String, usize)>,
}

impl AmplitudeClosure {
    pub fn new(entries: Vec<(String, usize)>) -> Self {
        AmplitudeClosure { entries }
    }

    /// Closure of a circuit's output wires onto `basis`.
    pub fn for_circuit(c: &Circuit, basis: &BasisState) -> Self {
        AmplitudeClosure {
            entries: output_labels(c)
                .into_iter()
                .zip(basis.values.iter().copied())
                .collect(),
        }
    }
}

/// Attaches a one-hot node `bra.{label}` to every open label.
pub fn close_amplitude<T: Scalar>(
    net: &TensorNetwork<T>,
    closure: &AmplitudeClosure,
) -> Result<TensorNetwork<T>, NetworkError> {
    let open: BTreeSet<String> = net.open_labels().into_iter().map(|i| i.label).collect();
    let given: BTreeSet<String> = closure.entries.iter().map(|(l, _)| l.clone()).collect();
    if open != given || given.len() != closure.entries.len() {
        let mut extra: Vec<String> = given.difference(&open).cloned().collect();
        if given.len() != closure.entries.len() {
            let mut seen = HashSet::new();
            for (l, _) in &closure.entries {
                if !seen.insert(l) {
                    extra.push(l.clone());
                }
            }
        }
        return Err(NetworkError::ClosureMismatch {
            missing: open.difference(&given).cloned().collect(),
            extra,
        });
    }
    let mut out = net.clone();
    for (label, value) in &closure.entries {
        let dim = net.label_dim(label).unwrap();
        out.add_node(
            format!("bra.{label}"),
            Tensor::one_hot(label.clone(), dim, *value)?,
        )?;
    }
    Ok(out)
}

/// Naive sum over every joint label assignment of the product of all node
/// entries, accumulated in double precision.
pub fn full_sum<T: Scalar>(net: &TensorNetwork<T>) -> Result<Complex64, NetworkError> {
    let open: Vec<String> = net.open_labels().into_iter().map(|i| i.label).collect();
    if !open.is_empty() {
        return Err(NetworkError::NotClosed(open));
    }
    let states = net.state_space();
    if states > MAX_FULL_SUM_STATES {
        return Err(NetworkError::TooLarge(states));
    }
    let labels: Vec<&String> = net.bonds().keys().collect();
    let shape: Vec<usize> = labels.iter().map(|l| net.label_dim(l).unwrap()).collect();
    // per node: (position of each leg in `labels`, leg stride)
    let legs: Vec<Vec<(usize, usize)>> = net
        .nodes()
        .iter()
        .map(|n| {
            let idx = n.tensor.indices();
            let mut stride = 1;
            let mut out = vec![(0, 0); idx.len()];
            for (axis, i) in idx.iter().enumerate().rev() {
                let pos = labels.iter().position(|l| **l == i.label).unwrap();
                out[axis] = (pos, stride);
                stride *= i.dim;
            }
            out
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    let mut assign = vec![0usize; labels.len()];
    loop {
        let mut term = Complex64::new(1.0, 0.0);
        for (n, leg) in net.nodes().iter().zip(&legs) {
            let off: usize = leg.iter().map(|&(p, s)| assign[p] * s).sum();
            term *= n.tensor.data()[off].to_c64();
            if term == Complex64::new(0.0, 0.0) {
                break;
            }
        }
        total += term;
        if !advance(&mut assign, &shape) {
            break;
        }
    }
    Ok(total)
}

/// Random connected, closed network: a random spanning tree over `nodes`
/// nodes plus `extra_edges` additional bonds, each bond of a random dimension
/// in `2..=max_dim`, and complex entries with real and imaginary parts uniform in `[-1, 1)`.
/// Node ranks are capped at `max_rank` where possible.
pub fn random_network<T: Scalar>(
    nodes: usize,
    extra_edges: usize,
    max_dim: usize,
    max_rank: usize,
    seed: u64,
) -> TensorNetwork<T> {
    assert!(nodes >= 2 && max_dim >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut legs: Vec<Vec<Index>> = vec![Vec::new(); nodes];
    let mut edge = 0usize;
    let mut bond = |a: usize, b: usize, legs: &mut Vec<Vec<Index>>, rng: &mut ChaCha8Rng| {
        let idx = Index::new(format!("e{edge}"), rng.random_range(2..=max_dim));
        edge += 1;
        legs[a].push(idx.clone());
        legs[b].push(idx);
    };
    for v in 1..nodes {
        // attach to a random earlier node, preferring ones below the rank cap
        let mut u = rng.random_range(0..v);
        for _ in 0..8 {
            if legs[u].len() < max_rank {
                break;
            }
            u = rng.random_range(0..v);
        }
        bond(u, v, &mut legs, &mut rng);
    }
    for _ in 0..extra_edges {
        let a = rng.random_range(0..nodes);
        let b = rng.random_range(0..nodes);
        if a == b || legs[a].len() >= max_rank || legs[b].len() >= max_rank {
            continue;
        }
        bond(a, b, &mut legs, &mut rng);
    }
    let mut net = TensorNetwork::new(Vec::new()).unwrap();
    for (i, mut idx) in legs.into_iter().enumerate() {
        for j in (1..idx.len()).rev() {
            idx.swap(j, rng.random_range(0..=j));
        }
        let t = Tensor::from_fn(idx, |_| {
            T::from_c64(Complex64::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ))
        })
        .unwrap();
        net.add_node(format!("n{i}"), t).unwrap();
    }
    net
}
