//! Compilation of contraction trees into a task dependency graph.
//!
//! Every internal tree vertex becomes up to two transposes plus one matmul.
//! Tasks are keyed by a canonical name built from the path step, the sorted
//! result labels and, for vertices touched by slicing, the slice assignment.
//! Compiling several slices into one graph with deduplication therefore
//! creates each untouched task once.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::pathtree::{ContractionTree, Vertex, VertexKind};
use crate::tensor::{volume, Index};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("no trees to compile")]
    Empty,
    #[error("slice assignment {0:?} given twice")]
    DuplicateAssignment(Vec<usize>),
    #[error("trees do not share one origin tree and slice set")]
    ShapeMismatch,
    #[error("task name '{0}' used for two different computations")]
    NameCollision(String),
    #[error("task graph has a cycle")]
    Cycle,
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    Transpose,
    Matmul,
    Reduce,
    Delete,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Transpose => "transpose",
            TaskKind::Matmul => "matmul",
            TaskKind::Reduce => "reduce",
            TaskKind::Delete => "delete",
        })
    }
}

/// Input of a task: another task's output or a (possibly sliced) leaf tensor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Task(usize),
    Leaf {
        id: String,
        fixed: Vec<(String, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub name: String,
    pub kind: TaskKind,
    pub operands: Vec<Operand>,
    /// Tasks that must finish first.
    pub deps: Vec<usize>,
    pub flop: u64,
    /// Output indices in storage order; empty for deletes.
    pub indices: Vec<Index>,
    /// `(m, k, n)` of a matmul.
    pub gemm: Option<(usize, usize, usize)>,
    /// Task whose output a delete frees.
    pub frees: Option<usize>,
    /// How many slice contractions asked for this task.
    pub uses: usize,
}

impl Task {
    /// Elements of the output tensor.
    pub fn elements(&self) -> u64 {
        match self.kind {
            TaskKind::Delete => 0,
            _ => volume(&self.indices) as u64,
        }
    }

    pub fn is_shared(&self) -> bool {
        self.uses > 1
    }
}

/// Whether identically named tasks from different slices are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dedup {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DedupStats {
    /// Transpose and matmul tasks asked for across all slices.
    pub requested: usize,
    /// Transpose and matmul tasks actually in the graph.
    pub created: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskGraph {
    tasks: Vec<Task>,
    by_name: HashMap<String, usize>,
    output: Operand,
    stats: DedupStats,
}

impl TaskGraph {
    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, name: &str) -> Option<&Task> {
        self.by_name.get(name).map(|&i| &self.tasks[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    pub fn output(&self) -> &Operand {
        &self.output
    }

    pub fn output_task(&self) -> Option<usize> {
        match self.output {
            Operand::Task(i) => Some(i),
            Operand::Leaf { .. } => None,
        }
    }

    pub fn stats(&self) -> DedupStats {
        self.stats
    }

    pub fn count(&self, kind: TaskKind) -> usize {
        self.tasks.iter().filter(|t| t.kind == kind).count()
    }

    /// Sum of matmul FLOP.
    pub fn matmul_flop(&self) -> u64 {
        self.tasks
            .iter()
            .filter(|t| t.kind == TaskKind::Matmul)
            .map(|t| t.flop)
            .sum()
    }

    pub fn has_deletions(&self) -> bool {
        self.tasks.iter().any(|t| t.kind == TaskKind::Delete)
    }

    /// Ids of the leaf tensors the graph reads.
    pub fn leaf_ids(&self) -> BTreeSet<&str> {
        let mut ids = BTreeSet::new();
        for t in &self.tasks {
            for op in &t.operands {
                if let Operand::Leaf { id, .. } = op {
                    ids.insert(id.as_str());
                }
            }
        }
        if let Operand::Leaf { id, .. } = &self.output {
            ids.insert(id.as_str());
        }
        ids
    }

    /// For each task, the tasks depending on it.
    pub fn dependents(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.tasks.len()];
        for (i, t) in self.tasks.iter().enumerate() {
            for &d in &t.deps {
                out[d].push(i);
            }
        }
        out
    }

    /// Canonical topological order: among ready tasks, deletes first, then
    /// the lowest task index.
    pub fn topological_order(&self) -> Result<Vec<usize>, TaskError> {
        let dependents = self.dependents();
        let mut pending: Vec<usize> = self.tasks.iter().map(|t| t.deps.len()).collect();
        let mut ready: BinaryHeap<Reverse<(u8, usize)>> = BinaryHeap::new();
        for (i, &p) in pending.iter().enumerate() {
            if p == 0 {
                ready.push(Reverse((self.priority(i), i)));
            }
        }
        let mut order = Vec::with_capacity(self.tasks.len());
        while let Some(Reverse((_, i))) = ready.pop() {
            order.push(i);
            for &j in &dependents[i] {
                pending[j] -= 1;
                if pending[j] == 0 {
                    ready.push(Reverse((self.priority(j), j)));
                }
            }
        }
        if order.len() != self.tasks.len() {
            return Err(TaskError::Cycle);
        }
        Ok(order)
    }

    /// Scheduling rank: deletes (0) before compute tasks (1).
    pub fn priority(&self, i: usize) -> u8 {
        u8::from(self.tasks[i].kind != TaskKind::Delete)
    }

    /// Checks that `schedule` runs every task exactly once, after its dependencies.
    pub fn check_schedule(&self, schedule: &[usize]) -> Result<(), TaskError> {
        if schedule.len() != self.tasks.len() {
            return Err(TaskError::InvalidSchedule(format!(
                "{} entries for {} tasks",
                schedule.len(),
                self.tasks.len()
            )));
        }
        let mut done = vec![false; self.tasks.len()];
        for &i in schedule {
            let t = self
                .tasks
                .get(i)
                .ok_or_else(|| TaskError::InvalidSchedule(format!("unknown task {i}")))?;
            if done[i] {
                return Err(TaskError::InvalidSchedule(format!(
                    "'{}' scheduled twice",
                    t.name
                )));
            }
            if let Some(&d) = t.deps.iter().find(|&&d| !done[d]) {
                return Err(TaskError::InvalidSchedule(format!(
                    "'{}' runs before its dependency '{}'",
                    t.name, self.tasks[d].name
                )));
            }
            done[i] = true;
        }
        Ok(())
    }

    /// Adds a delete after the last consumer of every intermediate output.
    /// Leaf tensors and the graph output are kept. Graphs that already
    /// contain deletes are returned unchanged.
    pub fn insert_deletions(&self) -> TaskGraph {
        let mut g = self.clone();
        if self.has_deletions() {
            return g;
        }
        let dependents = self.dependents();
        let output = self.output_task();
        for (i, t) in self.tasks.iter().enumerate() {
            if Some(i) == output || dependents[i].is_empty() {
                continue;
            }
            let name = format!("del:{}", t.name);
            g.by_name.insert(name.clone(), g.tasks.len());
            g.tasks.push(Task {
                name,
                kind: TaskKind::Delete,
                operands: Vec::new(),
                deps: dependents[i].clone(),
                flop: 0,
                indices: Vec::new(),
                gemm: None,
                frees: Some(i),
                uses: t.uses,
            });
        }
        g
    }

    /// The same graph with delete tasks removed.
    pub fn without_deletions(&self) -> TaskGraph {
        let mut g = self.clone();
        // deletes are only ever appended, so truncation keeps indices valid
        let keep = self
            .tasks
            .iter()
            .position(|t| t.kind == TaskKind::Delete)
            .unwrap_or(self.tasks.len());
        debug_assert!(self.tasks[keep..]
            .iter()
            .all(|t| t.kind == TaskKind::Delete));
        g.tasks.truncate(keep);
        g.by_name.retain(|_, &mut i| i < keep);
        g
    }

    /// Display name of an operand: the task name or the leaf id with its fixed values.
    pub fn operand_name(&self, op: &Operand) -> String {
        match op {
            Operand::Task(i) => self.tasks[*i].name.clone(),
            Operand::Leaf { id, fixed } => leaf_key(id, fixed),
        }
    }

    /// One line per task: `name kind flop deps...`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for t in &self.tasks {
            let _ = write!(s, "{} {} {}", t.name, t.kind, t.flop);
            for &d in &t.deps {
                let _ = write!(s, " {}", self.tasks[d].name);
            }
            s.push('\n');
        }
        s
    }

    /// Graphviz rendering with one node per task; shared tasks are filled.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph tasks {\n  rankdir=BT;\n");
        for t in &self.tasks {
            let shape = match t.kind {
                TaskKind::Transpose => "diamond",
                TaskKind::Matmul => "box",
                TaskKind::Reduce => "doubleoctagon",
                TaskKind::Delete => "point",
            };
            let fill = if t.is_shared() {
                ", style=filled, fillcolor=lightblue"
            } else {
                ""
            };
            let _ = writeln!(
                s,
                "  \"{}\" [shape={shape}, kind={}, flop={}, shared={}{fill}];",
                t.name,
                t.kind,
                t.flop,
                t.is_shared()
            );
        }
        for t in &self.tasks {
            for &d in &t.deps {
                let style = if t.kind == TaskKind::Delete {
                    " [style=dashed]"
                } else {
                    ""
                };
                let _ = writeln!(s, "  \"{}\" -> \"{}\"{style};", self.tasks[d].name, t.name);
            }
        }
        s.push_str("}\n");
        s
    }
}

fn fixed_suffix(fixed: &[(String, usize)]) -> String {
    fixed.iter().map(|(l, v)| format!(":{l}={v}")).collect()
}

fn leaf_key(id: &str, fixed: &[(String, usize)]) -> String {
    format!("{id}{}", fixed_suffix(fixed))
}

struct Builder {
    g: TaskGraph,
    dedup: Dedup,
}

impl Builder {
    fn new(dedup: Dedup, output: Operand) -> Self {
        Builder {
            g: TaskGraph {
                tasks: Vec::new(),
                by_name: HashMap::new(),
                output,
                stats: DedupStats::default(),
            },
            dedup,
        }
    }

    fn push(&mut self, task: Task) -> Result<usize, TaskError> {
        self.g.stats.requested += 1;
        if let Some(&i) = self.g.by_name.get(&task.name) {
            let old = &self.g.tasks[i];
            if self.dedup == Dedup::Off
                || old.kind != task.kind
                || old.operands != task.operands
                || old.indices != task.indices
            {
                return Err(TaskError::NameCollision(task.name));
            }
            self.g.tasks[i].uses += 1;
            return Ok(i);
        }
        let i = self.g.tasks.len();
        self.g.by_name.insert(task.name.clone(), i);
        self.g.tasks.push(task);
        self.g.stats.created += 1;
        Ok(i)
    }

    /// Adds the tasks of one tree and returns its root operand.
    fn add_tree(&mut self, tree: &ContractionTree, prefix: &str) -> Result<Operand, TaskError> {
        let slice = tree.slicing().map(|s| s.pairs()).unwrap_or_default();
        let verts = tree.vertices();
        // name of each vertex's value, independent of how it is produced
        let key = |v: &Vertex| -> String {
            let tag = if v.is_tainted() {
                fixed_suffix(&slice)
            } else {
                String::new()
            };
            match &v.kind {
                VertexKind::Leaf { node } => format!("{node}{tag}"),
                VertexKind::Internal { step, .. } => {
                    let mut labels: Vec<&str> =
                        v.indices.iter().map(|i| i.label.as_str()).collect();
                    labels.sort_unstable();
                    format!("{step}:{}{tag}", labels.join(","))
                }
            }
        };
        let mut out: Vec<Operand> = Vec::with_capacity(verts.len());
        for v in verts {
            let op = match &v.kind {
                VertexKind::Leaf { node } => Operand::Leaf {
                    id: node.clone(),
                    fixed: v.fixed.clone(),
                },
                VertexKind::Internal {
                    left, right, plan, ..
                } => {
                    let mut ops = Vec::with_capacity(2);
                    for (child, transpose, order) in [
                        (*left, plan.left_transpose, &plan.left_order),
                        (*right, plan.right_transpose, &plan.right_order),
                    ] {
                        let src = out[child].clone();
                        if !transpose {
                            ops.push(src);
                            continue;
                        }
                        let perm: Vec<&str> = order.iter().map(|i| i.label.as_str()).collect();
                        let t = self.push(Task {
                            name: format!("{prefix}{}^T[{}]", key(&verts[child]), perm.join(",")),
                            kind: TaskKind::Transpose,
                            deps: task_deps(std::slice::from_ref(&src)),
                            operands: vec![src],
                            flop: 0,
                            indices: order.clone(),
                            gemm: None,
                            frees: None,
                            uses: 1,
                        })?;
                        ops.push(Operand::Task(t));
                    }
                    let m = self.push(Task {
                        name: format!("{prefix}{}", key(v)),
                        kind: TaskKind::Matmul,
                        deps: task_deps(&ops),
                        operands: ops,
                        flop: plan.flop(),
                        indices: plan.result.clone(),
                        gemm: Some((plan.m, plan.k, plan.n)),
                        frees: None,
                        uses: 1,
                    })?;
                    Operand::Task(m)
                }
            };
            out.push(op);
        }
        Ok(out[tree.root()].clone())
    }
}

fn task_deps(ops: &[Operand]) -> Vec<usize> {
    let mut deps: Vec<usize> = ops
        .iter()
        .filter_map(|o| match o {
            Operand::Task(i) => Some(*i),
            Operand::Leaf { .. } => None,
        })
        .collect();
    deps.dedup();
    deps
}

/// Task graph of one tree; the output is the root matmul.
pub fn compile_single(tree: &ContractionTree) -> TaskGraph {
    let mut b = Builder::new(Dedup::On, Operand::Task(0));
    let root = b
        .add_tree(tree, "")
        .expect("names within one tree are distinct");
    b.g.output = root;
    b.g
}

/// Union of the task graphs of several slices of one tree, summed by a final
/// reduce task in canonical assignment order.
///
/// With [`Dedup::Off`] every slice gets its own copy of every task (names are
/// prefixed with `s{i}/`), which is the baseline without shared-work reuse.
pub fn compile_multi(trees: &[ContractionTree], dedup: Dedup) -> Result<TaskGraph, TaskError> {
    let first = trees.first().ok_or(TaskError::Empty)?;
    let slices = first.slicing().map(|s| &s.slices);
    let mut seen = HashSet::new();
    for t in trees {
        if t.path() != first.path()
            || t.leaves() != first.leaves()
            || t.slicing().map(|s| &s.slices) != slices
        {
            return Err(TaskError::ShapeMismatch);
        }
        let values = t.slicing().map(|s| s.values.clone()).unwrap_or_default();
        if !seen.insert(values.clone()) {
            return Err(TaskError::DuplicateAssignment(values));
        }
    }
    if slices.is_none() {
        return Ok(compile_single(first));
    }

    let mut order: Vec<&ContractionTree> = trees.iter().collect();
    order.sort_by_key(|t| t.slicing().map(|s| s.values.clone()));
    let mut b = Builder::new(dedup, Operand::Task(0));
    let mut roots = Vec::with_capacity(order.len());
    for (i, t) in order.iter().enumerate() {
        let prefix = match dedup {
            Dedup::On => String::new(),
            Dedup::Off => format!("s{i}/"),
        };
        roots.push(b.add_tree(t, &prefix)?);
    }
    let indices = first.root_vertex().indices.clone();
    let adds = 2 * (roots.len() as u64 - 1) * volume(&indices) as u64;
    let r = b.g.tasks.len();
    b.g.by_name.insert("reduce".into(), r);
    b.g.tasks.push(Task {
        name: "reduce".into(),
        kind: TaskKind::Reduce,
        deps: task_deps(&roots),
        operands: roots,
        flop: adds,
        indices,
        gemm: None,
        frees: None,
        uses: 1,
    });
    b.g.output = Operand::Task(r);
    Ok(b.g)
}
