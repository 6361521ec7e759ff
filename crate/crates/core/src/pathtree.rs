//! Contraction paths, binary contraction trees, slicing, and the FLOP model.
//!
//! A [`ContractionTree`] is an arena: leaves come first in network node
//! order, followed by one internal vertex per path step. Slicing rebuilds the
//! same shape with the sliced labels fixed and removed from every index set.
//! A vertex is *tainted* when a sliced label occurs anywhere in its subtree;
//! untainted vertices are identical across all slices and form the shared
//! work.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use thiserror::Error;

use crate::network::TensorNetwork;
use crate::scalar::Scalar;
use crate::tensor::{contract_pair, volume, ContractionPlan, Index, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("path step {step} references unknown node '{node}'")]
    UnknownRef { step: usize, node: String },
    #[error("path step {step} reuses already contracted node '{node}'")]
    Consumed { step: usize, node: String },
    #[error("path step {0} contracts a node with itself")]
    SelfContraction(usize),
    #[error("path leaves {0:?} uncontracted")]
    Disconnected(Vec<String>),
    #[error("network is empty")]
    EmptyNetwork,
    #[error("label '{0}' is not a contracted label of the network")]
    NotContracted(String),
    #[error("label '{0}' listed twice in slice set")]
    DuplicateSlice(String),
    #[error("assignment has {got} values for {expected} sliced labels")]
    AssignmentLength { expected: usize, got: usize },
    #[error("tree is already sliced")]
    AlreadySliced,
    #[error("no contracted labels available to slice")]
    NoCandidates,
}

/// A path operand: an original network node or the result of an earlier step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Leaf(String),
    Step(usize),
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Leaf(id) => f.write_str(id),
            NodeRef::Step(k) => write!(f, "#{k}"),
        }
    }
}

impl FromStr for NodeRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix('#') {
            Some(k) => k
                .parse()
                .map(NodeRef::Step)
                .map_err(|_| format!("bad step reference '{s}'")),
            None if s.is_empty() => Err("empty node reference".into()),
            None => Ok(NodeRef::Leaf(s.to_string())),
        }
    }
}

/// Ordered pairwise contractions; step `k` produces `NodeRef::Step(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContractionPath {
    pub steps: Vec<(NodeRef, NodeRef)>,
}

impl ContractionPath {
    pub fn new(steps: Vec<(NodeRef, NodeRef)>) -> Self {
        ContractionPath { steps }
    }

    /// Convenience constructor from textual references.
    pub fn parse(steps: &[(&str, &str)]) -> Result<Self, String> {
        steps
            .iter()
            .map(|(a, b)| Ok((a.parse()?, b.parse()?)))
            .collect::<Result<Vec<_>, String>>()
            .map(ContractionPath::new)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexKind {
    Leaf {
        node: String,
    },
    Internal {
        step: usize,
        left: usize,
        right: usize,
        plan: ContractionPlan,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vertex {
    pub kind: VertexKind,
    /// Result indices, in storage order.
    pub indices: Vec<Index>,
    /// Matmul FLOP of producing this vertex (0 for leaves).
    pub flop: u64,
    /// Element count of the result.
    pub size: u64,
    /// Sliced labels occurring in this subtree with their fixed values, by label.
    pub fixed: Vec<(String, usize)>,
}

impl Vertex {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, VertexKind::Leaf { .. })
    }

    pub fn is_tainted(&self) -> bool {
        !self.fixed.is_empty()
    }

    pub fn step(&self) -> Option<usize> {
        match self.kind {
            VertexKind::Internal { step, .. } => Some(step),
            VertexKind::Leaf { .. } => None,
        }
    }
}

/// Sliced labels and the values they are fixed to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceAssignment {
    pub slices: SliceSet,
    pub values: Vec<usize>,
}

impl SliceAssignment {
    pub fn pairs(&self) -> Vec<(String, usize)> {
        self.slices
            .labels()
            .iter()
            .zip(&self.values)
            .map(|(i, &v)| (i.label.clone(), v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionTree {
    vertices: Vec<Vertex>,
    root: usize,
    path: ContractionPath,
    leaves: Vec<(String, Vec<Index>)>,
    slicing: Option<SliceAssignment>,
}

impl ContractionTree {
    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_vertex(&self) -> &Vertex {
        &self.vertices[self.root]
    }

    pub fn path(&self) -> &ContractionPath {
        &self.path
    }

    /// Original (unsliced) leaf index lists.
    pub fn leaves(&self) -> &[(String, Vec<Index>)] {
        &self.leaves
    }

    pub fn slicing(&self) -> Option<&SliceAssignment> {
        self.slicing.as_ref()
    }

    pub fn internal(&self) -> impl Iterator<Item = &Vertex> {
        self.vertices.iter().filter(|v| !v.is_leaf())
    }

    /// Sum of per-vertex matmul FLOP.
    pub fn flop(&self) -> u64 {
        self.internal().map(|v| v.flop).sum()
    }

    /// FLOP of vertices untouched by slicing.
    pub fn untainted_flop(&self) -> u64 {
        self.internal()
            .filter(|v| !v.is_tainted())
            .map(|v| v.flop)
            .sum()
    }

    /// Largest intermediate rank (0 when nothing is contracted).
    pub fn max_rank(&self) -> usize {
        self.internal().map(|v| v.indices.len()).max().unwrap_or(0)
    }

    /// Largest intermediate element count.
    pub fn max_size(&self) -> u64 {
        self.internal().map(|v| v.size).max().unwrap_or(0)
    }

    /// Labels carried by two leaves.
    pub fn contracted_labels(&self) -> Vec<Index> {
        let mut count: HashMap<&str, (usize, usize)> = HashMap::new();
        for (_, idx) in &self.leaves {
            for i in idx {
                count.entry(&i.label).or_insert((0, i.dim)).0 += 1;
            }
        }
        let mut out: Vec<Index> = count
            .into_iter()
            .filter(|(_, (n, _))| *n == 2)
            .map(|(l, (_, d))| Index::new(l, d))
            .collect();
        out.sort();
        out
    }

    /// Evaluates the tree on the network's tensors, slicing leaves as needed.
    pub fn evaluate<T: Scalar>(&self, net: &TensorNetwork<T>) -> Result<Tensor<T>, PathError> {
        let mut values: Vec<Option<Tensor<T>>> = vec![None; self.vertices.len()];
        for (v, vertex) in self.vertices.iter().enumerate() {
            let t = match &vertex.kind {
                VertexKind::Leaf { node } => {
                    let t = net.node(node).ok_or_else(|| PathError::UnknownRef {
                        step: 0,
                        node: node.clone(),
                    })?;
                    t.slice_many(&vertex.fixed)?
                }
                VertexKind::Internal { left, right, .. } => {
                    let l = values[*left].take().expect("child evaluated once");
                    let r = values[*right].take().expect("child evaluated once");
                    contract_pair(&l, &r)?
                }
            };
            values[v] = Some(t);
        }
        Ok(values[self.root].take().expect("root evaluated"))
    }
}

/// Builds the contraction tree of `path` over the nodes of `net`.
pub fn build_tree<T: Scalar>(
    net: &TensorNetwork<T>,
    path: &ContractionPath,
) -> Result<ContractionTree, PathError> {
    let leaves: Vec<(String, Vec<Index>)> = net
        .nodes()
        .iter()
        .map(|n| (n.id.clone(), n.tensor.indices().to_vec()))
        .collect();
    assemble(leaves, path.clone(), None)
}

fn assemble(
    leaves: Vec<(String, Vec<Index>)>,
    path: ContractionPath,
    slicing: Option<SliceAssignment>,
) -> Result<ContractionTree, PathError> {
    if leaves.is_empty() {
        return Err(PathError::EmptyNetwork);
    }
    let fixed_values: Vec<(String, usize)> = slicing
        .as_ref()
        .map(SliceAssignment::pairs)
        .unwrap_or_default();
    let value_of = |label: &str| {
        fixed_values
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| *v)
    };

    let mut vertices = Vec::with_capacity(2 * leaves.len());
    let mut leaf_pos = HashMap::new();
    for (i, (id, idx)) in leaves.iter().enumerate() {
        let mut fixed: Vec<(String, usize)> = idx
            .iter()
            .filter_map(|i| value_of(&i.label).map(|v| (i.label.clone(), v)))
            .collect();
        fixed.sort();
        let indices: Vec<Index> = idx
            .iter()
            .filter(|i| value_of(&i.label).is_none())
            .cloned()
            .collect();
        leaf_pos.insert(id.as_str(), i);
        vertices.push(Vertex {
            kind: VertexKind::Leaf { node: id.clone() },
            size: volume(&indices) as u64,
            indices,
            flop: 0,
            fixed,
        });
    }

    let mut consumed = vec![false; leaves.len() + path.len()];
    let mut step_vertex = Vec::with_capacity(path.len());
    for (step, (l, r)) in path.steps.iter().enumerate() {
        let mut resolve = |nref: &NodeRef| -> Result<usize, PathError> {
            let v = match nref {
                NodeRef::Leaf(id) => *leaf_pos.get(id.as_str()).ok_or(PathError::UnknownRef {
                    step,
                    node: id.clone(),
                })?,
                NodeRef::Step(k) if *k < step => step_vertex[*k],
                NodeRef::Step(_) => {
                    return Err(PathError::UnknownRef {
                        step,
                        node: nref.to_string(),
                    })
                }
            };
            if consumed[v] {
                return Err(PathError::Consumed {
                    step,
                    node: nref.to_string(),
                });
            }
            consumed[v] = true;
            Ok(v)
        };
        if l == r {
            return Err(PathError::SelfContraction(step));
        }
        let left = resolve(l)?;
        let right = resolve(r)?;
        let plan = ContractionPlan::new(&vertices[left].indices, &vertices[right].indices)?;
        let mut fixed: Vec<(String, usize)> = vertices[left]
            .fixed
            .iter()
            .chain(&vertices[right].fixed)
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        fixed.sort();
        let indices = plan.result.clone();
        step_vertex.push(vertices.len());
        vertices.push(Vertex {
            size: volume(&indices) as u64,
            indices,
            flop: plan.flop(),
            fixed,
            kind: VertexKind::Internal {
                step,
                left,
                right,
                plan,
            },
        });
    }

    let remaining: Vec<usize> = (0..vertices.len()).filter(|&v| !consumed[v]).collect();
    if remaining.len() != 1 {
        let names = remaining
            .iter()
            .map(|&v| match &vertices[v].kind {
                VertexKind::Leaf { node } => node.clone(),
                VertexKind::Internal { step, .. } => NodeRef::Step(*step).to_string(),
            })
            .collect();
        return Err(PathError::Disconnected(names));
    }
    Ok(ContractionTree {
        root: remaining[0],
        vertices,
        path,
        leaves,
        slicing,
    })
}

/// Contracted labels fixed to each of their values, one slice per assignment.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SliceSet {
    labels: Vec<Index>,
}

impl SliceSet {
    pub fn empty() -> Self {
        SliceSet::default()
    }

    /// Validates that every label is contracted in `tree`'s network.
    pub fn new<S: AsRef<str>>(tree: &ContractionTree, labels: &[S]) -> Result<Self, PathError> {
        let contracted = tree.contracted_labels();
        let mut out: Vec<Index> = Vec::with_capacity(labels.len());
        for l in labels {
            let l = l.as_ref();
            if out.iter().any(|i| i.label == l) {
                return Err(PathError::DuplicateSlice(l.to_string()));
            }
            let idx = contracted
                .iter()
                .find(|i| i.label == l)
                .ok_or_else(|| PathError::NotContracted(l.to_string()))?;
            out.push(idx.clone());
        }
        Ok(SliceSet { labels: out })
    }

    pub fn labels(&self) -> &[Index] {
        &self.labels
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    /// Number of slices, the product of the sliced dimensions.
    pub fn count(&self) -> u64 {
        self.labels.iter().map(|i| i.dim as u64).product()
    }

    /// Every assignment in lexicographic order, first label most significant.
    pub fn assignments(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        let n = self.count();
        (0..n).map(move |mut k| {
            let mut values = vec![0; self.labels.len()];
            for (slot, idx) in values.iter_mut().zip(&self.labels).rev() {
                *slot = (k % idx.dim as u64) as usize;
                k /= idx.dim as u64;
            }
            values
        })
    }
}

/// The tree of one slice: same shape, sliced labels fixed to `values`.
pub fn slice_tree(
    tree: &ContractionTree,
    slices: &SliceSet,
    values: &[usize],
) -> Result<ContractionTree, PathError> {
    if tree.slicing.is_some() {
        return Err(PathError::AlreadySliced);
    }
    if values.len() != slices.len() {
        return Err(PathError::AssignmentLength {
            expected: slices.len(),
            got: values.len(),
        });
    }
    for (idx, &v) in slices.labels().iter().zip(values) {
        if v >= idx.dim {
            return Err(TensorError::ValueOutOfRange {
                label: idx.label.clone(),
                value: v,
                dim: idx.dim,
            }
            .into());
        }
    }
    if slices.is_empty() {
        return Ok(tree.clone());
    }
    assemble(
        tree.leaves.clone(),
        tree.path.clone(),
        Some(SliceAssignment {
            slices: slices.clone(),
            values: values.to_vec(),
        }),
    )
}

/// All slice trees in canonical assignment order.
pub fn slice_all(
    tree: &ContractionTree,
    slices: &SliceSet,
) -> Result<Vec<ContractionTree>, PathError> {
    slices
        .assignments()
        .map(|a| slice_tree(tree, slices, &a))
        .collect()
}

/// Cost of one amplitude under a slicing, with or without shared-work reuse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostReport {
    /// FLOP of contracting one slice.
    pub flop_per_slice: u64,
    /// Number of slices.
    pub slices: u64,
    /// FLOP of one slice that is identical in every slice.
    pub shared_flop: u64,
    pub sharing: bool,
}

impl CostReport {
    /// Fraction of a slice's FLOP shared by all slices.
    pub fn shared_fraction(&self) -> Ratio<u64> {
        if self.flop_per_slice == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(self.shared_flop, self.flop_per_slice)
        }
    }

    pub fn shared_fraction_f64(&self) -> f64 {
        let r = self.shared_fraction();
        *r.numer() as f64 / *r.denom() as f64
    }

    /// Every slice contracted independently: `N_sl * FLOP_sl`.
    pub fn flop_without_sharing(&self) -> u128 {
        self.slices as u128 * self.flop_per_slice as u128
    }

    /// Shared work done once: `f FLOP_sl + N_sl (1 - f) FLOP_sl`.
    pub fn flop_with_sharing(&self) -> u128 {
        self.shared_flop as u128
            + self.slices as u128 * (self.flop_per_slice - self.shared_flop) as u128
    }

    pub fn flop_amp(&self) -> u128 {
        if self.sharing {
            self.flop_with_sharing()
        } else {
            self.flop_without_sharing()
        }
    }

    pub fn est_seconds(&self, rate: f64) -> f64 {
        estimate_seconds(self.flop_amp(), rate)
    }
}

/// Runtime of `flop` operations at `rate` FLOP/s.
pub fn estimate_seconds(flop: u128, rate: f64) -> f64 {
    flop as f64 / rate
}

/// Cost model of `tree` sliced by `slices`.
pub fn cost_report(
    tree: &ContractionTree,
    slices: &SliceSet,
    sharing: bool,
) -> Result<CostReport, PathError> {
    let zeros = vec![0; slices.len()];
    let sliced = slice_tree(tree, slices, &zeros)?;
    let shared_flop = if slices.is_empty() {
        0
    } else {
        sliced.untainted_flop()
    };
    Ok(CostReport {
        flop_per_slice: sliced.flop(),
        slices: slices.count(),
        shared_flop,
        sharing,
    })
}

/// Greedy path: repeatedly contracts the connected pair with the smallest
/// result, ties broken by the pair's node names. Fails on disconnected networks.
pub fn greedy_path<T: Scalar>(net: &TensorNetwork<T>) -> Result<ContractionPath, PathError> {
    if net.is_empty() {
        return Err(PathError::EmptyNetwork);
    }
    let mut active: Vec<(NodeRef, String, Vec<Index>)> = net
        .nodes()
        .iter()
        .map(|n| {
            (
                NodeRef::Leaf(n.id.clone()),
                n.id.clone(),
                n.tensor.indices().to_vec(),
            )
        })
        .collect();
    let mut steps = Vec::with_capacity(active.len().saturating_sub(1));
    while active.len() > 1 {
        let mut best: Option<(u128, &str, &str, usize, usize)> = None;
        for i in 0..active.len() {
            for j in (i + 1)..active.len() {
                let (a, b) = (&active[i].2, &active[j].2);
                if !a.iter().any(|x| b.iter().any(|y| y.label == x.label)) {
                    continue;
                }
                let size: u128 = a
                    .iter()
                    .chain(b)
                    .filter(|x| {
                        !(a.iter().any(|y| y.label == x.label)
                            && b.iter().any(|y| y.label == x.label))
                    })
                    .map(|x| x.dim as u128)
                    .product();
                let (li, ri) = if active[i].1 <= active[j].1 {
                    (i, j)
                } else {
                    (j, i)
                };
                let key = (size, active[li].1.as_str(), active[ri].1.as_str());
                if best.is_none_or(|b| key < (b.0, b.1, b.2)) {
                    best = Some((key.0, key.1, key.2, li, ri));
                }
            }
        }
        let (_, _, _, li, ri) = best.ok_or_else(|| {
            PathError::Disconnected(active.iter().map(|a| a.0.to_string()).collect())
        })?;
        let plan = ContractionPlan::new(&active[li].2, &active[ri].2)?;
        let step = steps.len();
        steps.push((active[li].0.clone(), active[ri].0.clone()));
        let (hi, lo) = if li > ri { (li, ri) } else { (ri, li) };
        active.remove(hi);
        active.remove(lo);
        let r = NodeRef::Step(step);
        let name = r.to_string();
        active.push((r, name, plan.result));
    }
    Ok(ContractionPath::new(steps))
}

/// Greedy path that also accepts disconnected networks: each connected
/// component is contracted with [`greedy_path`], then the component results
/// are multiplied together in order of their first node.
pub fn greedy_path_by_components<T: Scalar>(
    net: &TensorNetwork<T>,
) -> Result<ContractionPath, PathError> {
    if net.is_empty() {
        return Err(PathError::EmptyNetwork);
    }
    let nodes = net.nodes();
    let mut comp: Vec<usize> = (0..nodes.len()).collect();
    fn find(comp: &mut [usize], mut i: usize) -> usize {
        while comp[i] != i {
            comp[i] = comp[comp[i]];
            i = comp[i];
        }
        i
    }
    let pos: HashMap<&str, usize> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    for holders in net.bonds().values() {
        if let [a, b] = holders.as_slice() {
            let (ra, rb) = (
                find(&mut comp, pos[a.as_str()]),
                find(&mut comp, pos[b.as_str()]),
            );
            comp[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..nodes.len() {
        let r = find(&mut comp, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, g)) => g.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    let mut steps = Vec::with_capacity(nodes.len() - 1);
    let mut results = Vec::with_capacity(groups.len());
    for (_, members) in &groups {
        let sub = TensorNetwork::new(
            members
                .iter()
                .map(|&i| (nodes[i].id.clone(), nodes[i].tensor.clone()))
                .collect(),
        )
        .expect("subset of a valid network");
        let offset = steps.len();
        let shift = |r: NodeRef| match r {
            NodeRef::Step(k) => NodeRef::Step(k + offset),
            leaf => leaf,
        };
        let path = greedy_path(&sub)?;
        let n = path.len();
        steps.extend(path.steps.into_iter().map(|(a, b)| (shift(a), shift(b))));
        results.push(if n == 0 {
            NodeRef::Leaf(nodes[members[0]].id.clone())
        } else {
            NodeRef::Step(offset + n - 1)
        });
    }
    let mut acc = results[0].clone();
    for r in results.into_iter().skip(1) {
        steps.push((acc, r));
        acc = NodeRef::Step(steps.len() - 1);
    }
    Ok(ContractionPath::new(steps))
}

/// Picks up to `k` labels to slice, one at a time. Each pick minimises the
/// resulting maximum intermediate rank, then maximises the shared fraction,
/// then takes the lexicographically smallest label. Stops as soon as the
/// maximum rank is at most `max_rank`.
pub fn greedy_shared_slices(
    tree: &ContractionTree,
    max_rank: usize,
    k: usize,
) -> Result<SliceSet, PathError> {
    let candidates = tree.contracted_labels();
    if k > 0 && candidates.is_empty() {
        return Err(PathError::NoCandidates);
    }
    let mut chosen: Vec<String> = Vec::new();
    while chosen.len() < k {
        let current = SliceSet::new(tree, &chosen)?;
        if slice_tree(tree, &current, &vec![0; current.len()])?.max_rank() <= max_rank {
            break;
        }
        let mut best: Option<(usize, u64, u64, String)> = None;
        for c in candidates.iter().filter(|c| !chosen.contains(&c.label)) {
            let mut trial = chosen.clone();
            trial.push(c.label.clone());
            let set = SliceSet::new(tree, &trial)?;
            let sliced = slice_tree(tree, &set, &vec![0; set.len()])?;
            let (rank, shared, total) = (sliced.max_rank(), sliced.untainted_flop(), sliced.flop());
            let better = match &best {
                None => true,
                Some((br, bs, bt, bl)) => {
                    // shared/total > bs/bt, compared by cross-multiplication
                    let lhs = shared as u128 * (*bt).max(1) as u128;
                    let rhs = *bs as u128 * total.max(1) as u128;
                    rank < *br || (rank == *br && (lhs > rhs || (lhs == rhs && c.label < *bl)))
                }
            };
            if better {
                best = Some((rank, shared, total, c.label.clone()));
            }
        }
        match best {
            Some((_, _, _, label)) => chosen.push(label),
            None => break,
        }
    }
    SliceSet::new(tree, &chosen)
}
