//! Thread-pool execution of a [`TaskGraph`].
//!
//! Workers pull ready tasks from a shared queue. Deletes are preferred, then
//! the lowest task index; a schedule seed replaces that rule with random
//! picks to perturb the order in tests. Results do not depend on the order:
//! every task is internally sequential and the reduce sums in a fixed order.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::network::TensorNetwork;
use crate::scalar::Scalar;
use crate::taskgraph::{Operand, Task, TaskError, TaskGraph, TaskKind};
use crate::tensor::{into_layout, matmul, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("leaf tensor '{0}' is not bound")]
    MissingLeaf(String),
    #[error("memory limit of {limit} bytes exceeded by task '{task}' ({needed} bytes live)")]
    MemoryLimit {
        task: String,
        needed: u64,
        limit: u64,
    },
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error(transparent)]
    Graph(#[from] TaskError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecConfig {
    pub workers: usize,
    /// Free intermediates after their last consumer.
    pub deletion: bool,
    pub memory_limit: Option<u64>,
    /// Randomises the pick among ready tasks.
    pub schedule_seed: Option<u64>,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            deletion: true,
            memory_limit: None,
            schedule_seed: None,
        }
    }
}

impl ExecConfig {
    pub fn with_workers(workers: usize) -> Self {
        ExecConfig {
            workers,
            ..ExecConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExecReport<T> {
    pub result: Tensor<T>,
    /// Tasks run, deletes included.
    pub executed_tasks: usize,
    /// Matmul FLOP executed.
    pub flop: u64,
    /// Largest live footprint, inputs included.
    pub peak_bytes: u64,
    pub input_bytes: u64,
    pub wall: Duration,
    /// Summed task time and task count per kind.
    pub timings: BTreeMap<TaskKind, (Duration, usize)>,
}

/// Live-memory replay of one schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryProfile {
    pub input_bytes: u64,
    /// Largest total size of live task outputs.
    pub peak_intermediate_bytes: u64,
}

impl MemoryProfile {
    pub fn peak_bytes(&self) -> u64 {
        self.input_bytes + self.peak_intermediate_bytes
    }
}

/// Replays allocations and deletes of `schedule` without computing anything.
/// Outputs are allocated when a task starts and freed by its delete task.
pub fn simulate_peak_memory<T: Scalar>(
    g: &TaskGraph,
    schedule: &[usize],
    inputs: &TensorNetwork<T>,
) -> Result<MemoryProfile, ExecError> {
    g.check_schedule(schedule)?;
    let input = leaf_bytes(g, inputs)?;
    let mut live = 0u64;
    let mut peak = 0u64;
    for &i in schedule {
        let t = &g.tasks()[i];
        match t.frees {
            Some(target) => live -= g.tasks()[target].elements() * T::bytes(),
            None => {
                live += t.elements() * T::bytes();
                peak = peak.max(live);
            }
        }
    }
    Ok(MemoryProfile {
        input_bytes: input,
        peak_intermediate_bytes: peak,
    })
}

fn leaf_bytes<T: Scalar>(g: &TaskGraph, inputs: &TensorNetwork<T>) -> Result<u64, ExecError> {
    g.leaf_ids()
        .into_iter()
        .map(|id| {
            inputs
                .node(id)
                .map(Tensor::bytes)
                .ok_or_else(|| ExecError::MissingLeaf(id.to_string()))
        })
        .sum()
}

enum Ready {
    Ordered(BinaryHeap<Reverse<(u8, usize)>>),
    Random(Vec<usize>, ChaCha8Rng),
}

impl Ready {
    fn push(&mut self, g: &TaskGraph, i: usize) {
        match self {
            Ready::Ordered(h) => h.push(Reverse((g.priority(i), i))),
            Ready::Random(v, _) => v.push(i),
        }
    }

    fn pop(&mut self) -> Option<usize> {
        match self {
            Ready::Ordered(h) => h.pop().map(|Reverse((_, i))| i),
            Ready::Random(v, rng) if !v.is_empty() => {
                let k = rng.random_range(0..v.len());
                Some(v.swap_remove(k))
            }
            Ready::Random(..) => None,
        }
    }
}

struct State<T> {
    ready: Ready,
    pending: Vec<usize>,
    outputs: Vec<Option<Arc<Tensor<T>>>>,
    live: u64,
    peak: u64,
    completed: usize,
    flop: u64,
    timings: BTreeMap<TaskKind, (Duration, usize)>,
    error: Option<ExecError>,
}

impl<T> State<T> {
    fn finish(
        &mut self,
        g: &TaskGraph,
        dependents: &[Vec<usize>],
        i: usize,
        kind: TaskKind,
        took: Duration,
    ) {
        self.completed += 1;
        let e = self.timings.entry(kind).or_default();
        e.0 += took;
        e.1 += 1;
        for &j in &dependents[i] {
            self.pending[j] -= 1;
            if self.pending[j] == 0 {
                self.ready.push(g, j);
            }
        }
    }
}

/// Executes `g` on the tensors of `inputs`, blocking until done.
///
/// When `cfg.deletion` is set, deletes are inserted if the graph has none;
/// otherwise any deletes in the graph are dropped.
pub fn run<T: Scalar>(
    g: &TaskGraph,
    inputs: &TensorNetwork<T>,
    cfg: &ExecConfig,
) -> Result<ExecReport<T>, ExecError> {
    if cfg.workers == 0 {
        return Err(ExecError::NoWorkers);
    }
    let start = Instant::now();
    let graph = if cfg.deletion {
        g.insert_deletions()
    } else {
        g.without_deletions()
    };
    let g = &graph;
    g.topological_order()?;
    let input = leaf_bytes(g, inputs)?;
    let dependents = g.dependents();

    let mut ready = match cfg.schedule_seed {
        Some(seed) => Ready::Random(Vec::new(), ChaCha8Rng::seed_from_u64(seed)),
        None => Ready::Ordered(BinaryHeap::new()),
    };
    let pending: Vec<usize> = g.tasks().iter().map(|t| t.deps.len()).collect();
    for (i, &p) in pending.iter().enumerate() {
        if p == 0 {
            ready.push(g, i);
        }
    }
    let state = Mutex::new(State {
        ready,
        pending,
        outputs: vec![None; g.len()],
        live: input,
        peak: input,
        completed: 0,
        flop: 0,
        timings: BTreeMap::new(),
        error: None,
    });
    let wake = Condvar::new();
    let total = g.len();

    let resolve = |st: &State<T>, op: &Operand| -> Result<Arc<Tensor<T>>, ExecError> {
        match op {
            Operand::Task(i) => Ok(st.outputs[*i].clone().expect("dependency finished")),
            Operand::Leaf { id, fixed } => {
                let t = inputs
                    .node(id)
                    .ok_or_else(|| ExecError::MissingLeaf(id.clone()))?;
                Ok(Arc::new(if fixed.is_empty() {
                    t.clone()
                } else {
                    t.slice_many(fixed)?
                }))
            }
        }
    };

    let worker = || {
        let mut st = state.lock().unwrap();
        loop {
            let i = loop {
                if st.error.is_some() || st.completed == total {
                    return;
                }
                if let Some(i) = st.ready.pop() {
                    break i;
                }
                st = wake.wait(st).unwrap();
            };
            let task = &g.tasks()[i];
            if let Some(target) = task.frees {
                if let Some(t) = st.outputs[target].take() {
                    st.live -= t.bytes();
                }
                st.finish(g, &dependents, i, TaskKind::Delete, Duration::ZERO);
                wake.notify_all();
                continue;
            }
            let bytes = task.elements() * T::bytes();
            if let Some(limit) = cfg.memory_limit {
                if st.live + bytes > limit {
                    st.error = Some(ExecError::MemoryLimit {
                        task: task.name.clone(),
                        needed: st.live + bytes,
                        limit,
                    });
                    wake.notify_all();
                    return;
                }
            }
            st.live += bytes;
            st.peak = st.peak.max(st.live);
            let operands: Result<Vec<Arc<Tensor<T>>>, ExecError> =
                task.operands.iter().map(|op| resolve(&st, op)).collect();
            drop(st);

            let began = Instant::now();
            let out = operands.and_then(|ops| compute(task.kind, task, &ops));
            let took = began.elapsed();

            st = state.lock().unwrap();
            match out {
                Ok(t) => {
                    st.outputs[i] = Some(Arc::new(t));
                    if task.kind == TaskKind::Matmul {
                        st.flop += task.flop;
                    }
                    st.finish(g, &dependents, i, task.kind, took);
                }
                Err(e) => st.error = Some(e),
            }
            wake.notify_all();
        }
    };

    std::thread::scope(|s| {
        for _ in 1..cfg.workers.min(total.max(1)) {
            s.spawn(worker);
        }
        worker();
    });

    let mut st = state.into_inner().unwrap();
    if let Some(e) = st.error.take() {
        return Err(e);
    }
    let result = match g.output() {
        Operand::Task(i) => Arc::unwrap_or_clone(st.outputs[*i].take().expect("output kept")),
        leaf => Arc::unwrap_or_clone(resolve(&st, leaf)?),
    };
    Ok(ExecReport {
        result,
        executed_tasks: st.completed,
        flop: st.flop,
        peak_bytes: st.peak,
        input_bytes: input,
        wall: start.elapsed(),
        timings: st.timings,
    })
}

fn compute<T: Scalar>(
    kind: TaskKind,
    task: &Task,
    ops: &[Arc<Tensor<T>>],
) -> Result<Tensor<T>, ExecError> {
    Ok(match kind {
        TaskKind::Transpose => into_layout(&ops[0], &task.indices),
        TaskKind::Matmul => {
            let (m, k, n) = task.gemm.expect("matmul has a shape");
            Tensor::new(
                task.indices.clone(),
                matmul(ops[0].data(), ops[1].data(), m, k, n),
            )?
        }
        TaskKind::Reduce => {
            let mut acc = (*ops[0]).clone();
            for t in &ops[1..] {
                acc = acc.add(t)?;
            }
            acc
        }
        TaskKind::Delete => unreachable!("deletes are handled by the scheduler"),
    })
}

/// Sequential evaluation of `g` in its canonical order, without deletes.
pub fn run_sequential<T: Scalar>(
    g: &TaskGraph,
    inputs: &TensorNetwork<T>,
) -> Result<Tensor<T>, ExecError> {
    let cfg = ExecConfig {
        workers: 1,
        deletion: false,
        memory_limit: None,
        schedule_seed: None,
    };
    run(g, inputs, &cfg).map(|r| r.result)
}
