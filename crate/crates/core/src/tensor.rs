//! Dense tensors with string-labelled indices.
//!
//! Pairwise contraction follows the transpose-transpose-GEMM route: both
//! operands are permuted into matrix layout (free x shared for the left
//! operand, shared x free for the right one) and multiplied once. The same
//! [`ContractionPlan`] drives both [`contract_pair`] and the task graph
//! compiler, so a compiled graph performs bit-identical arithmetic to a
//! direct tree walk.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

/// Real FLOP charged for one complex multiply-add.
pub const FLOP_PER_MULTIPLY_ADD: u64 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("data length {got} does not match shape volume {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("index '{0}' has dimension zero")]
    ZeroDimension(String),
    #[error("duplicate index label '{0}'")]
    DuplicateLabel(String),
    #[error("unknown index label '{0}'")]
    UnknownLabel(String),
    #[error("new order has {got} labels, tensor has rank {rank}")]
    RankMismatch { rank: usize, got: usize },
    #[error("index '{label}' has dimension {left} on one operand and {right} on the other")]
    DimensionMismatch {
        label: String,
        left: usize,
        right: usize,
    },
    #[error("index lists differ: {0}")]
    IndexMismatch(String),
    #[error("value {value} out of range for index '{label}' of dimension {dim}")]
    ValueOutOfRange {
        label: String,
        value: usize,
        dim: usize,
    },
}

/// A labelled tensor leg.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Index {
    pub label: String,
    pub dim: usize,
}

impl Index {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Index {
            label: label.into(),
            dim,
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.label, self.dim)
    }
}

/// Number of elements of a tensor with the given indices (1 for a scalar).
pub fn volume(indices: &[Index]) -> usize {
    indices.iter().map(|i| i.dim).product()
}

/// Row-major strides for the given indices.
fn strides(indices: &[Index]) -> Vec<usize> {
    let mut out = vec![1; indices.len()];
    for axis in (0..indices.len().saturating_sub(1)).rev() {
        out[axis] = out[axis + 1] * indices[axis + 1].dim;
    }
    out
}

/// Dense tensor, row-major over its index order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    indices: Vec<Index>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(indices: Vec<Index>, data: Vec<T>) -> Result<Self, TensorError> {
        validate_indices(&indices)?;
        let expected = volume(&indices);
        if data.len() != expected {
            return Err(TensorError::DataLength {
                expected,
                got: data.len(),
            });
        }
        Ok(Tensor { indices, data })
    }

    pub fn zeros(indices: Vec<Index>) -> Result<Self, TensorError> {
        let n = volume(&indices);
        Self::new(indices, vec![T::zero(); n])
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            indices: Vec::new(),
            data: vec![value],
        }
    }

    /// Rank-1 tensor that is 1 at `value` and 0 elsewhere.
    pub fn one_hot(
        label: impl Into<String>,
        dim: usize,
        value: usize,
    ) -> Result<Self, TensorError> {
        let label = label.into();
        if value >= dim {
            return Err(TensorError::ValueOutOfRange { label, value, dim });
        }
        let mut data = vec![T::zero(); dim];
        data[value] = T::one();
        Self::new(vec![Index::new(label, dim)], data)
    }

    /// Builds a tensor by evaluating `f` at every multi-index in row-major order.
    pub fn from_fn(
        indices: Vec<Index>,
        mut f: impl FnMut(&[usize]) -> T,
    ) -> Result<Self, TensorError> {
        validate_indices(&indices)?;
        let shape: Vec<usize> = indices.iter().map(|i| i.dim).collect();
        let mut data = Vec::with_capacity(volume(&indices));
        let mut pos = vec![0usize; shape.len()];
        loop {
            data.push(f(&pos));
            if !advance(&mut pos, &shape) {
                break;
            }
        }
        Ok(Tensor { indices, data })
    }

    pub fn indices(&self) -> &[Index] {
        &self.indices
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.indices.iter().map(|i| i.label.as_str()).collect()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i.dim).collect()
    }

    pub fn bytes(&self) -> u64 {
        self.data.len() as u64 * T::bytes()
    }

    pub fn axis(&self, label: &str) -> Option<usize> {
        self.indices.iter().position(|i| i.label == label)
    }

    /// Value at a multi-index given in the tensor's own index order.
    pub fn get(&self, pos: &[usize]) -> T {
        let st = strides(&self.indices);
        self.data[pos.iter().zip(&st).map(|(p, s)| p * s).sum::<usize>()]
    }

    /// The single value of a rank-0 tensor.
    pub fn scalar_value(&self) -> Option<T> {
        if self.indices.is_empty() {
            Some(self.data[0])
        } else {
            None
        }
    }

    /// Converts every element to another precision.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            indices: self.indices.clone(),
            data: self.data.iter().map(|v| U::from_c64(v.to_c64())).collect(),
        }
    }

    /// Reorders the indices to `new_order`, moving data accordingly.
    pub fn transpose<S: AsRef<str>>(&self, new_order: &[S]) -> Result<Self, TensorError> {
        if new_order.len() != self.rank() {
            return Err(TensorError::RankMismatch {
                rank: self.rank(),
                got: new_order.len(),
            });
        }
        let mut perm = Vec::with_capacity(new_order.len());
        let mut seen = HashSet::new();
        for label in new_order {
            let label = label.as_ref();
            if !seen.insert(label) {
                return Err(TensorError::DuplicateLabel(label.to_string()));
            }
            let axis = self
                .axis(label)
                .ok_or_else(|| TensorError::UnknownLabel(label.to_string()))?;
            perm.push(axis);
        }
        Ok(self.permute_axes(&perm))
    }

    /// Transpose by axis permutation: output axis `j` is input axis `perm[j]`.
    pub(crate) fn permute_axes(&self, perm: &[usize]) -> Self {
        let indices: Vec<Index> = perm.iter().map(|&a| self.indices[a].clone()).collect();
        if perm.iter().enumerate().all(|(j, &a)| j == a) {
            return self.clone();
        }
        let in_strides = strides(&self.indices);
        let src_strides: Vec<usize> = perm.iter().map(|&a| in_strides[a]).collect();
        let shape: Vec<usize> = indices.iter().map(|i| i.dim).collect();
        let data = permute_data(&self.data, &shape, &src_strides);
        Tensor { indices, data }
    }

    /// Fixes `label` to `value`, dropping that index.
    pub fn slice(&self, label: &str, value: usize) -> Result<Self, TensorError> {
        let axis = self
            .axis(label)
            .ok_or_else(|| TensorError::UnknownLabel(label.to_string()))?;
        let dim = self.indices[axis].dim;
        if value >= dim {
            return Err(TensorError::ValueOutOfRange {
                label: label.to_string(),
                value,
                dim,
            });
        }
        let outer: usize = self.indices[..axis].iter().map(|i| i.dim).product();
        let inner: usize = self.indices[axis + 1..].iter().map(|i| i.dim).product();
        let mut data = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let start = (o * dim + value) * inner;
            data.extend_from_slice(&self.data[start..start + inner]);
        }
        let mut indices = self.indices.clone();
        indices.remove(axis);
        Ok(Tensor { indices, data })
    }

    /// Fixes several labels at once; labels absent from the tensor are ignored.
    pub fn slice_many(&self, fixed: &[(String, usize)]) -> Result<Self, TensorError> {
        let mut out = self.clone();
        for (label, value) in fixed {
            if out.axis(label).is_some() {
                out = out.slice(label, *value)?;
            }
        }
        Ok(out)
    }

    /// Elementwise sum of two tensors with identical index lists.
    pub fn add(&self, other: &Self) -> Result<Self, TensorError> {
        if self.indices != other.indices {
            return Err(TensorError::IndexMismatch(format!(
                "{:?} vs {:?}",
                self.labels(),
                other.labels()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Tensor {
            indices: self.indices.clone(),
            data,
        })
    }

    pub fn contract(&self, other: &Self) -> Result<Self, TensorError> {
        contract_pair(self, other)
    }
}

fn validate_indices(indices: &[Index]) -> Result<(), TensorError> {
    let mut seen = HashSet::new();
    for idx in indices {
        if idx.dim == 0 {
            return Err(TensorError::ZeroDimension(idx.label.clone()));
        }
        if !seen.insert(idx.label.as_str()) {
            return Err(TensorError::DuplicateLabel(idx.label.clone()));
        }
    }
    Ok(())
}

/// Row-major odometer step; returns false after the last position.
pub(crate) fn advance(pos: &mut [usize], shape: &[usize]) -> bool {
    for axis in (0..pos.len()).rev() {
        pos[axis] += 1;
        if pos[axis] < shape[axis] {
            return true;
        }
        pos[axis] = 0;
    }
    false
}

/// Gathers `src` into output order. The innermost output axis is copied in a
/// tight strided loop; outer axes advance an odometer with incremental offsets.
fn permute_data<T: Copy>(src: &[T], shape: &[usize], src_strides: &[usize]) -> Vec<T> {
    let total: usize = shape.iter().product();
    let mut out = Vec::with_capacity(total);
    let rank = shape.len();
    let inner_dim = shape[rank - 1];
    let inner_stride = src_strides[rank - 1];
    let outer_shape = &shape[..rank - 1];
    let mut pos = vec![0usize; rank - 1];
    let mut offset = 0usize;
    loop {
        let mut s = offset;
        for _ in 0..inner_dim {
            out.push(src[s]);
            s += inner_stride;
        }
        let mut axis = rank - 1;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            pos[axis] += 1;
            offset += src_strides[axis];
            if pos[axis] < outer_shape[axis] {
                break;
            }
            offset -= src_strides[axis] * outer_shape[axis];
            pos[axis] = 0;
        }
    }
}

/// Matrix layout chosen for one pairwise contraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionPlan {
    /// Contracted indices, in the order used by both operands.
    pub shared: Vec<Index>,
    /// Left operand layout: free indices then shared ones.
    pub left_order: Vec<Index>,
    /// Right operand layout: shared indices then free ones.
    pub right_order: Vec<Index>,
    pub left_transpose: bool,
    pub right_transpose: bool,
    /// Left free indices (left order) followed by right free indices (right order).
    pub result: Vec<Index>,
    pub m: usize,
    pub k: usize,
    pub n: usize,
}

impl ContractionPlan {
    /// Plans `left . right`. The shared-index order is taken from whichever
    /// operand already holds the shared indices contiguously in the needed
    /// position (left suffix first, then right prefix), falling back to the
    /// left operand's order. This keeps transposes to a minimum.
    pub fn new(left: &[Index], right: &[Index]) -> Result<Self, TensorError> {
        let mut shared_labels = HashSet::new();
        for l in left {
            if let Some(r) = right.iter().find(|r| r.label == l.label) {
                if r.dim != l.dim {
                    return Err(TensorError::DimensionMismatch {
                        label: l.label.clone(),
                        left: l.dim,
                        right: r.dim,
                    });
                }
                shared_labels.insert(l.label.as_str());
            }
        }
        let ns = shared_labels.len();
        let is_shared = |i: &Index| shared_labels.contains(i.label.as_str());

        let left_suffix = &left[left.len() - ns..];
        let right_prefix = &right[..ns];
        let shared: Vec<Index> = if left_suffix.iter().all(is_shared) {
            left_suffix.to_vec()
        } else if right_prefix.iter().all(is_shared) {
            right_prefix.to_vec()
        } else {
            left.iter().filter(|i| is_shared(i)).cloned().collect()
        };

        let left_free: Vec<Index> = left.iter().filter(|i| !is_shared(i)).cloned().collect();
        let right_free: Vec<Index> = right.iter().filter(|i| !is_shared(i)).cloned().collect();

        let mut left_order = left_free.clone();
        left_order.extend(shared.iter().cloned());
        let mut right_order = shared.clone();
        right_order.extend(right_free.iter().cloned());

        let m = volume(&left_free);
        let k = volume(&shared);
        let n = volume(&right_free);
        let mut result = left_free;
        result.extend(right_free);

        Ok(ContractionPlan {
            left_transpose: left_order.as_slice() != left,
            right_transpose: right_order.as_slice() != right,
            shared,
            left_order,
            right_order,
            result,
            m,
            k,
            n,
        })
    }

    /// Real FLOP of the matrix multiply.
    pub fn flop(&self) -> u64 {
        FLOP_PER_MULTIPLY_ADD * (self.m as u64) * (self.k as u64) * (self.n as u64)
    }

    pub fn result_len(&self) -> usize {
        self.m * self.n
    }
}

/// FLOP of contracting tensors with index lists `a` and `b`: eight real FLOP
/// per complex multiply-add, times the product of all distinct dimensions.
pub fn flop_cost(a: &[Index], b: &[Index]) -> u64 {
    let mut seen = HashSet::new();
    let mut prod = 1u64;
    for idx in a.iter().chain(b) {
        if seen.insert(idx.label.as_str()) {
            prod *= idx.dim as u64;
        }
    }
    FLOP_PER_MULTIPLY_ADD * prod
}

/// `C[m x n] = A[m x k] . B[k x n]`, all row-major.
pub fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut c = vec![T::zero(); m * n];
    if n == 1 {
        for (i, out) in c.iter_mut().enumerate() {
            let row = &a[i * k..(i + 1) * k];
            let mut acc = T::zero();
            for (&x, &y) in row.iter().zip(b) {
                acc += x * y;
            }
            *out = acc;
        }
        return c;
    }
    for i in 0..m {
        let row = &a[i * k..(i + 1) * k];
        let out = &mut c[i * n..(i + 1) * n];
        for (p, &x) in row.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for (o, &y) in out.iter_mut().zip(brow) {
                *o += x * y;
            }
        }
    }
    c
}

/// Brings `t` into the layout `order` (a permutation of its indices).
pub(crate) fn into_layout<T: Scalar>(t: &Tensor<T>, order: &[Index]) -> Tensor<T> {
    let perm: Vec<usize> = order
        .iter()
        .map(|i| t.axis(&i.label).expect("layout label present"))
        .collect();
    t.permute_axes(&perm)
}

/// Multiplies two operands already laid out according to `plan`.
pub(crate) fn multiply_planned<T: Scalar>(
    plan: &ContractionPlan,
    left: &[T],
    right: &[T],
) -> Tensor<T> {
    let data = matmul(left, right, plan.m, plan.k, plan.n);
    Tensor {
        indices: plan.result.clone(),
        data,
    }
}

/// Contracts every label shared by `a` and `b`.
///
/// The result carries `a`'s free indices (in `a`'s order) followed by `b`'s
/// free indices. No shared labels gives the outer product; no free labels
/// gives a scalar.
pub fn contract_pair<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
    let plan = ContractionPlan::new(&a.indices, &b.indices)?;
    let left = if plan.left_transpose {
        into_layout(a, &plan.left_order)
    } else {
        a.clone()
    };
    let right = if plan.right_transpose {
        into_layout(b, &plan.right_order)
    } else {
        b.clone()
    };
    Ok(multiply_planned(&plan, &left.data, &right.data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::{Complex32, Complex64};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_tensor(rng: &mut ChaCha8Rng, indices: Vec<Index>) -> Tensor<Complex64> {
        Tensor::from_fn(indices, |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
        .unwrap()
    }

    #[test]
    fn matrix_transpose() {
        let t = Tensor::new(
            vec![Index::new("a", 2), Index::new("b", 2)],
            vec![c(1.), c(2.), c(3.), c(4.)],
        )
        .unwrap();
        let tt = t.transpose(&["b", "a"]).unwrap();
        assert_eq!(tt.labels(), vec!["b", "a"]);
        assert_eq!(tt.data(), &[c(1.), c(3.), c(2.), c(4.)]);
    }

    #[test]
    fn identity_transpose_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_tensor(&mut rng, vec![Index::new("x", 3), Index::new("y", 2)]);
        assert_eq!(t.transpose(&["x", "y"]).unwrap(), t);
    }

    #[test]
    fn rank3_transpose_matches_index_remap() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_tensor(
            &mut rng,
            vec![Index::new("a", 2), Index::new("b", 3), Index::new("c", 4)],
        );
        let r = t.transpose(&["c", "a", "b"]).unwrap();
        for i in 0..4 {
            for j in 0..2 {
                for k in 0..3 {
                    assert_eq!(r.get(&[i, j, k]), t.get(&[j, k, i]));
                }
            }
        }
    }

    #[test]
    fn transpose_errors() {
        let t = Tensor::<Complex64>::zeros(vec![Index::new("a", 2), Index::new("b", 2)]).unwrap();
        assert_eq!(
            t.transpose(&["a", "z"]),
            Err(TensorError::UnknownLabel("z".into()))
        );
        assert_eq!(
            t.transpose(&["a", "a"]),
            Err(TensorError::DuplicateLabel("a".into()))
        );
        assert!(matches!(
            t.transpose(&["a"]),
            Err(TensorError::RankMismatch { .. })
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Tensor::new(vec![Index::new("a", 2)], vec![c(1.)]),
            Err(TensorError::DataLength {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            Tensor::<Complex64>::zeros(vec![Index::new("a", 0)]),
            Err(TensorError::ZeroDimension(_))
        ));
        assert!(matches!(
            Tensor::<Complex64>::zeros(vec![Index::new("a", 2), Index::new("a", 2)]),
            Err(TensorError::DuplicateLabel(_))
        ));
        assert_eq!(Tensor::scalar(c(3.)).len(), 1);
    }

    #[test]
    fn hadamard_like_gate_on_ket() {
        let s = Tensor::new(
            vec![Index::new("b", 2), Index::new("a", 2)],
            vec![c(1.), c(0.), c(1.), c(1.)],
        )
        .unwrap();
        let ket = Tensor::new(vec![Index::new("a", 2)], vec![c(1.), c(0.)]).unwrap();
        let r = contract_pair(&s, &ket).unwrap();
        assert_eq!(r.labels(), vec!["b"]);
        assert_eq!(r.data(), &[c(1.), c(1.)]);
    }

    #[test]
    fn identity_matrix_relabels_vector() {
        let id = Tensor::from_fn(vec![Index::new("a", 3), Index::new("b", 3)], |p| {
            if p[0] == p[1] {
                c(1.)
            } else {
                c(0.)
            }
        })
        .unwrap();
        let v = Tensor::new(vec![Index::new("b", 3)], vec![c(2.), c(-1.), c(5.)]).unwrap();
        let r = contract_pair(&id, &v).unwrap();
        assert_eq!(r.labels(), vec!["a"]);
        assert_eq!(r.data(), v.data());
    }

    #[test]
    fn vector_dot_product_is_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&mut rng, vec![Index::new("b", 5)]);
        let y = random_tensor(&mut rng, vec![Index::new("b", 5)]);
        let r = contract_pair(&x, &y).unwrap();
        let dot: Complex64 = x.data().iter().zip(y.data()).map(|(p, q)| p * q).sum();
        assert!((r.scalar_value().unwrap() - dot).norm() < 1e-12);
        let plan = ContractionPlan::new(x.indices(), y.indices()).unwrap();
        assert_eq!(plan.flop(), 8 * 5);
    }

    #[test]
    fn outer_product_when_nothing_shared() {
        let x = Tensor::new(vec![Index::new("a", 2)], vec![c(1.), c(2.)]).unwrap();
        let y = Tensor::new(vec![Index::new("b", 2)], vec![c(3.), c(4.)]).unwrap();
        let r = contract_pair(&x, &y).unwrap();
        assert_eq!(r.labels(), vec!["a", "b"]);
        assert_eq!(r.data(), &[c(3.), c(4.), c(6.), c(8.)]);
    }

    #[test]
    fn mismatched_shared_dimension() {
        let x = Tensor::<Complex64>::zeros(vec![Index::new("a", 2)]).unwrap();
        let y = Tensor::<Complex64>::zeros(vec![Index::new("a", 3)]).unwrap();
        assert!(matches!(
            contract_pair(&x, &y),
            Err(TensorError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn flop_cost_examples() {
        let ix = |l: &str| Index::new(l, 2);
        assert_eq!(
            flop_cost(&[ix("c")], &[ix("c"), ix("f"), ix("b"), ix("e")]),
            128
        );
        assert_eq!(flop_cost(&[], &[]), 8);
    }

    #[test]
    fn plan_transposes_only_misaligned_operands() {
        let ix = |l: &str| Index::new(l, 2);
        let plan = ContractionPlan::new(&[ix("a")], &[ix("b"), ix("a")]).unwrap();
        assert!(!plan.left_transpose);
        assert!(plan.right_transpose);
        let plan = ContractionPlan::new(&[ix("b"), ix("e")], &[ix("e")]).unwrap();
        assert!(!plan.left_transpose && !plan.right_transpose);
        let plan = ContractionPlan::new(&[ix("e"), ix("b")], &[ix("b"), ix("e")]).unwrap();
        assert!(!plan.left_transpose && plan.right_transpose);
    }

    #[test]
    fn slice_fixes_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_tensor(
            &mut rng,
            vec![Index::new("a", 2), Index::new("b", 3), Index::new("c", 2)],
        );
        let s = t.slice("b", 2).unwrap();
        assert_eq!(s.labels(), vec!["a", "c"]);
        for i in 0..2 {
            for k in 0..2 {
                assert_eq!(s.get(&[i, k]), t.get(&[i, 2, k]));
            }
        }
        assert!(matches!(
            t.slice("b", 3),
            Err(TensorError::ValueOutOfRange { .. })
        ));
    }

    /// Naive nested-loop contraction over the union of labels.
    fn brute_force(a: &Tensor<Complex64>, b: &Tensor<Complex64>) -> (Tensor<Complex64>, u64) {
        let shared: Vec<Index> = a
            .indices()
            .iter()
            .filter(|i| b.axis(&i.label).is_some())
            .cloned()
            .collect();
        let mut free: Vec<Index> = a
            .indices()
            .iter()
            .filter(|i| b.axis(&i.label).is_none())
            .cloned()
            .collect();
        free.extend(
            b.indices()
                .iter()
                .filter(|i| a.axis(&i.label).is_none())
                .cloned(),
        );
        let mut count = 0u64;
        let out = Tensor::from_fn(free.clone(), |fpos| {
            let mut acc = Complex64::new(0.0, 0.0);
            let sshape: Vec<usize> = shared.iter().map(|i| i.dim).collect();
            let mut spos = vec![0; shared.len()];
            loop {
                let lookup = |label: &str| -> usize {
                    if let Some(p) = free.iter().position(|i| i.label == label) {
                        fpos[p]
                    } else {
                        spos[shared.iter().position(|i| i.label == label).unwrap()]
                    }
                };
                let apos: Vec<usize> = a.indices().iter().map(|i| lookup(&i.label)).collect();
                let bpos: Vec<usize> = b.indices().iter().map(|i| lookup(&i.label)).collect();
                acc += a.get(&apos) * b.get(&bpos);
                count += 1;
                if !advance(&mut spos, &sshape) {
                    break;
                }
            }
            acc
        })
        .unwrap();
        (out, count)
    }

    fn pair_strategy() -> impl Strategy<Value = (Vec<Index>, Vec<Index>, u64)> {
        // up to 6 labels total, dims 1..=4, each label on a, b, or both
        (
            1usize..=6,
            prop::collection::vec((1usize..=4, 0u8..3), 6),
            any::<u64>(),
        )
            .prop_map(|(n, spec, seed)| {
                let mut a = Vec::new();
                let mut b = Vec::new();
                for (i, &(dim, side)) in spec.iter().take(n).enumerate() {
                    let idx = Index::new(format!("l{i}"), dim);
                    match side {
                        0 => a.push(idx),
                        1 => b.push(idx),
                        _ => {
                            a.push(idx.clone());
                            b.push(idx);
                        }
                    }
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut shuffle = |v: &mut Vec<Index>| {
                    for i in (1..v.len()).rev() {
                        v.swap(i, rng.random_range(0..=i));
                    }
                };
                shuffle(&mut a);
                shuffle(&mut b);
                (a, b, seed)
            })
    }

    proptest! {
        #[test]
        fn contraction_matches_brute_force((ia, ib, seed) in pair_strategy()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let a = random_tensor(&mut rng, ia);
            let b = random_tensor(&mut rng, ib);
            let got = contract_pair(&a, &b).unwrap();
            let (want, count) = brute_force(&a, &b);
            prop_assert_eq!(got.labels(), want.labels());
            for (x, y) in got.data().iter().zip(want.data()) {
                prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
            }
            prop_assert_eq!(flop_cost(a.indices(), b.indices()), 8 * count);
            let plan = ContractionPlan::new(a.indices(), b.indices()).unwrap();
            prop_assert_eq!(plan.flop(), 8 * count);
        }

        #[test]
        fn transpose_composes(seed in any::<u64>(), rank in 1usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx: Vec<Index> = (0..rank).map(|i| Index::new(format!("x{i}"), rng.random_range(1..=3))).collect();
            let t = random_tensor(&mut rng, idx);
            let mut p: Vec<usize> = (0..rank).collect();
            let mut q: Vec<usize> = (0..rank).collect();
            for i in (1..rank).rev() {
                p.swap(i, rng.random_range(0..=i));
                q.swap(i, rng.random_range(0..=i));
            }
            let tp = t.permute_axes(&p);
            let tpq = tp.permute_axes(&q);
            let composed: Vec<usize> = q.iter().map(|&j| p[j]).collect();
            prop_assert_eq!(tpq, t.permute_axes(&composed));
        }

        #[test]
        fn full_contraction_is_symmetric(seed in any::<u64>(), rank in 0usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx: Vec<Index> = (0..rank).map(|i| Index::new(format!("s{i}"), rng.random_range(1..=4))).collect();
            let a = random_tensor(&mut rng, idx.clone());
            let mut shuffled = idx;
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            let b = random_tensor(&mut rng, shuffled);
            let ab = contract_pair(&a, &b).unwrap().scalar_value().unwrap();
            let ba = contract_pair(&b, &a).unwrap().scalar_value().unwrap();
            prop_assert!((ab - ba).norm() <= 1e-12 * (1.0 + ab.norm()));

            let a32: Tensor<Complex32> = a.cast();
            let b32: Tensor<Complex32> = b.cast();
            let ab32 = contract_pair(&a32, &b32).unwrap().scalar_value().unwrap();
            let ba32 = contract_pair(&b32, &a32).unwrap().scalar_value().unwrap();
            prop_assert!((ab32 - ba32).norm() <= 1e-6 * (1.0 + ab32.norm()));
        }

        #[test]
        fn free_values_independent_of_operand_layout(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_tensor(&mut rng, vec![Index::new("i", 2), Index::new("k", 3), Index::new("j", 2)]);
            let b = random_tensor(&mut rng, vec![Index::new("j", 2), Index::new("l", 3), Index::new("k", 3)]);
            let base = contract_pair(&a, &b).unwrap();
            let a2 = a.transpose(&["k", "j", "i"]).unwrap();
            let b2 = b.transpose(&["l", "k", "j"]).unwrap();
            let other = contract_pair(&a2, &b2).unwrap().transpose(&["i", "l"]).unwrap();
            for (x, y) in base.data().iter().zip(other.data()) {
                prop_assert!((x - y).norm() <= 1e-12);
            }
        }
    }
}
