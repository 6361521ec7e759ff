//! Circuits of qudit gates, random circuit generators, truncated-Fock bosonic
//! gates, and a dense statevector simulator used as an independent oracle.
//!
//! Gate matrices are stored row-major as `U[out][in]`, with the multi-wire
//! index ordered like the gate's wire list (first wire most significant).
//! Reshaped to a tensor, the legs are `(out_0 .. out_k, in_0 .. in_k)`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Largest statevector the oracle will allocate.
pub const MAX_STATE_LEN: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("gate '{gate}' acts on wire {wire} but the circuit has {wires} wires")]
    WireOutOfRange {
        gate: String,
        wire: usize,
        wires: usize,
    },
    #[error("gate '{0}' acts on the same wire twice")]
    RepeatedWire(String),
    #[error("gate '{gate}' has {got} matrix entries, expected {expected}")]
    MatrixSize {
        gate: String,
        expected: usize,
        got: usize,
    },
    #[error("gate '{gate}' has dimension {gate_dim}, circuit wires have dimension {wire_dim}")]
    DimensionMismatch {
        gate: String,
        gate_dim: usize,
        wire_dim: usize,
    },
    #[error("unknown gate '{0}' without inline matrix data")]
    UnknownGate(String),
    #[error("gate '{gate}' expects {expected} parameters, got {got}")]
    ParameterCount {
        gate: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid GBS configuration: {0}")]
    InvalidGbs(String),
    #[error("state of {0} amplitudes exceeds the oracle limit")]
    StateTooLarge(u128),
    #[error("basis has {got} values for {wires} wires")]
    BasisLength { wires: usize, got: usize },
    #[error("basis value {value} out of range for dimension {dim}")]
    BasisValue { value: usize, dim: usize },
}

/// A gate acting on one or more wires of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub name: String,
    pub wires: Vec<usize>,
    pub params: Vec<f64>,
    pub dim: usize,
    /// Row-major `D^k x D^k` matrix.
    pub matrix: Vec<Complex64>,
    /// Frobenius norm of `U^dagger U - I`; nonzero for truncated bosonic gates.
    pub unitarity_defect: f64,
}

impl Gate {
    pub fn new(
        name: impl Into<String>,
        wires: Vec<usize>,
        params: Vec<f64>,
        dim: usize,
        matrix: Vec<Complex64>,
    ) -> Result<Self, CircuitError> {
        let name = name.into();
        let side = dim.pow(wires.len() as u32);
        if matrix.len() != side * side {
            return Err(CircuitError::MatrixSize {
                gate: name,
                expected: side * side,
                got: matrix.len(),
            });
        }
        for (i, w) in wires.iter().enumerate() {
            if wires[..i].contains(w) {
                return Err(CircuitError::RepeatedWire(name));
            }
        }
        let unitarity_defect = unitarity_defect(&matrix, side);
        Ok(Gate {
            name,
            wires,
            params,
            dim,
            matrix,
            unitarity_defect,
        })
    }

    pub fn arity(&self) -> usize {
        self.wires.len()
    }

    /// Whether the matrix is unitary within `1e-6`.
    pub fn is_unitary(&self) -> bool {
        self.unitarity_defect <= 1e-6
    }

    /// Builds a gate from a well-known name and its parameters.
    ///
    /// Supported names: `I`, `X` (cyclic shift), `Z` (clock), `H`/`F`
    /// (discrete Fourier transform), `CZ` (controlled phase `w^(ij)`),
    /// `S` (squeezer, `r`) and `BS` (beamsplitter, `theta phi`).
    pub fn named(
        name: &str,
        wires: Vec<usize>,
        params: &[f64],
        dim: usize,
    ) -> Result<Self, CircuitError> {
        let need = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(CircuitError::ParameterCount {
                    gate: name.to_string(),
                    expected: n,
                    got: params.len(),
                })
            }
        };
        let matrix = match name {
            "I" => {
                need(0)?;
                identity_matrix(dim.pow(wires.len() as u32))
            }
            "X" => {
                need(0)?;
                shift_matrix(dim)
            }
            "Z" => {
                need(0)?;
                clock_matrix(dim)
            }
            "H" | "F" => {
                need(0)?;
                fourier_matrix(dim)
            }
            "CZ" => {
                need(0)?;
                controlled_phase_matrix(dim)
            }
            "S" => {
                need(1)?;
                squeezer_matrix(params[0], dim).matrix
            }
            "BS" => {
                need(2)?;
                beamsplitter_matrix(params[0], params[1], dim)
            }
            other => return Err(CircuitError::UnknownGate(other.to_string())),
        };
        Gate::new(name, wires, params.to_vec(), dim, matrix)
    }
}

fn unitarity_defect(m: &[Complex64], side: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..side {
        for j in 0..side {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..side {
                acc += m[k * side + i].conj() * m[k * side + j];
            }
            if i == j {
                acc -= 1.0;
            }
            sum += acc.norm_sqr();
        }
    }
    sum.sqrt()
}

/// An ordered list of gates on `wires` qudits of dimension `dim`, all starting in `|0>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub wires: usize,
    pub dim: usize,
    pub gates: Vec<Gate>,
    pub seed: Option<u64>,
}

impl Circuit {
    pub fn new(wires: usize, dim: usize) -> Self {
        Circuit {
            wires,
            dim,
            gates: Vec::new(),
            seed: None,
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        if gate.dim != self.dim {
            return Err(CircuitError::DimensionMismatch {
                gate: gate.name,
                gate_dim: gate.dim,
                wire_dim: self.dim,
            });
        }
        if let Some(&w) = gate.wires.iter().find(|&&w| w >= self.wires) {
            return Err(CircuitError::WireOutOfRange {
                gate: gate.name,
                wire: w,
                wires: self.wires,
            });
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn count(&self, name: &str) -> usize {
        self.gates.iter().filter(|g| g.name == name).count()
    }
}

pub fn identity_matrix(side: usize) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); side * side];
    for i in 0..side {
        m[i * side + i] = Complex64::new(1.0, 0.0);
    }
    m
}

fn shift_matrix(d: usize) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        m[((i + 1) % d) * d + i] = Complex64::new(1.0, 0.0);
    }
    m
}

fn clock_matrix(d: usize) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); d * d];
    for i in 0..d {
        m[i * d + i] = Complex64::from_polar(1.0, TAU * i as f64 / d as f64);
    }
    m
}

/// Discrete Fourier transform on one qudit; the Hadamard gate for `d = 2`.
pub fn fourier_matrix(d: usize) -> Vec<Complex64> {
    let norm = 1.0 / (d as f64).sqrt();
    let mut m = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            m.push(Complex64::from_polar(
                norm,
                TAU * ((j * k) % d) as f64 / d as f64,
            ));
        }
    }
    m
}

/// Two-qudit controlled phase `|i j> -> w^(i j) |i j>`; CZ for `d = 2`.
pub fn controlled_phase_matrix(d: usize) -> Vec<Complex64> {
    let side = d * d;
    let mut m = vec![Complex64::new(0.0, 0.0); side * side];
    for i in 0..d {
        for j in 0..d {
            let r = i * d + j;
            m[r * side + r] = Complex64::from_polar(1.0, TAU * ((i * j) % d) as f64 / d as f64);
        }
    }
    m
}

fn expm(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    m.exp()
}

/// A cropped squeezer matrix with its truncation diagnostic.
#[derive(Debug, Clone)]
pub struct Squeezer {
    pub matrix: Vec<Complex64>,
    /// Frobenius norm of `S^dagger S - I` over the cropped `D x D` block.
    pub truncation_error: f64,
}

/// Single-mode squeezer `exp(r/2 (a^dagger^2 - a^2))` in the Fock basis.
///
/// The generator is exponentiated at a working cutoff of `4 D` and the
/// result cropped to `D x D`.
pub fn squeezer_matrix(r: f64, cutoff: usize) -> Squeezer {
    let work = 4 * cutoff;
    let mut g = DMatrix::<Complex64>::zeros(work, work);
    for n in 0..work {
        if n + 2 < work {
            g[(n + 2, n)] += Complex64::new(0.5 * r * (((n + 1) * (n + 2)) as f64).sqrt(), 0.0);
        }
        if n >= 2 {
            g[(n - 2, n)] -= Complex64::new(0.5 * r * ((n * (n - 1)) as f64).sqrt(), 0.0);
        }
    }
    let full = expm(&g);
    let mut matrix = Vec::with_capacity(cutoff * cutoff);
    for i in 0..cutoff {
        for j in 0..cutoff {
            matrix.push(full[(i, j)]);
        }
    }
    let truncation_error = unitarity_defect(&matrix, cutoff);
    Squeezer {
        matrix,
        truncation_error,
    }
}

/// Two-mode beamsplitter `exp(theta (e^{i phi} a^dagger b - e^{-i phi} a b^dagger))`
/// in a Fock basis truncated to `cutoff` levels per mode.
///
/// The operator conserves total photon number, so each block of fixed total
/// `n` is exponentiated in full (all `n + 1` states) before cropping. Entries
/// are therefore exact, and every block with `n < cutoff` is exactly unitary.
pub fn beamsplitter_matrix(theta: f64, phi: f64, cutoff: usize) -> Vec<Complex64> {
    let d = cutoff;
    let side = d * d;
    let mut m = vec![Complex64::new(0.0, 0.0); side * side];
    let up = Complex64::from_polar(theta, phi);
    let down = Complex64::from_polar(theta, -phi);
    for n in 0..=2 * (d - 1) {
        let size = n + 1;
        let mut g = DMatrix::<Complex64>::zeros(size, size);
        // block basis: position i is the state |i, n - i>
        for i in 0..size {
            let j = n - i;
            if i + 1 < size {
                g[(i + 1, i)] += up * (((i + 1) * j) as f64).sqrt();
            }
            if i >= 1 {
                g[(i - 1, i)] -= down * ((i * (j + 1)) as f64).sqrt();
            }
        }
        let block = expm(&g);
        for i_in in 0..size {
            let j_in = n - i_in;
            if i_in >= d || j_in >= d {
                continue;
            }
            for i_out in 0..size {
                let j_out = n - i_out;
                if i_out >= d || j_out >= d {
                    continue;
                }
                m[(i_out * d + j_out) * side + (i_in * d + j_in)] = block[(i_out, i_in)];
            }
        }
    }
    m
}

/// Random gate drawn from the Haar measure (QR of a complex Gaussian matrix).
pub fn random_unitary(side: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let mut cols: Vec<Vec<Complex64>> = (0..side)
        .map(|_| {
            (0..side)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    // modified Gram-Schmidt over columns
    for j in 0..side {
        for p in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let q = &done[p];
            let v = &mut rest[0];
            let proj: Complex64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= proj * qi;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in cols[j].iter_mut() {
            *z /= norm;
        }
    }
    let mut m = vec![Complex64::new(0.0, 0.0); side * side];
    for (j, col) in cols.iter().enumerate() {
        for (i, &z) in col.iter().enumerate() {
            m[i * side + j] = z;
        }
    }
    m
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one `u64`.
pub fn uniform_unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Unbiased draw in `[0, n)` by rejection on one `u64` per attempt.
pub fn uniform_below(rng: &mut impl RngCore, n: usize) -> usize {
    let n = n as u64;
    let zone = u64::MAX - (u64::MAX % n);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}

/// Parameters of a random `dim`-dimensional lattice GBS circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct GbsConfig {
    pub dim: usize,
    pub width: usize,
    pub modes: usize,
    pub cycles: usize,
    pub r: f64,
    pub cutoff: usize,
    pub seed: u64,
}

impl GbsConfig {
    /// Config with `modes = width^dim`.
    pub fn new(dim: usize, width: usize, cycles: usize, r: f64, cutoff: usize, seed: u64) -> Self {
        GbsConfig {
            dim,
            width,
            modes: width.pow(dim as u32),
            cycles,
            r,
            cutoff,
            seed,
        }
    }

    /// Mode offset between neighbours along each lattice direction: `width^(l-1)`.
    pub fn llens(&self) -> Vec<usize> {
        (0..self.dim).map(|l| self.width.pow(l as u32)).collect()
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        if self.dim < 1 {
            return Err(CircuitError::InvalidGbs("dim must be at least 1".into()));
        }
        if self.width < 2 {
            return Err(CircuitError::InvalidGbs("width must be at least 2".into()));
        }
        if self.cutoff < 2 {
            return Err(CircuitError::InvalidGbs("cutoff must be at least 2".into()));
        }
        if Some(self.modes) != self.width.checked_pow(self.dim as u32) {
            return Err(CircuitError::InvalidGbs(format!(
                "modes = {} but width^dim = {}^{}",
                self.modes, self.width, self.dim
            )));
        }
        Ok(())
    }

    /// Number of gates [`generate_gbs`] emits.
    pub fn gate_count(&self) -> usize {
        self.modes + self.cycles * self.llens().iter().map(|l| self.modes - l).sum::<usize>()
    }
}

/// Random lattice GBS circuit: one squeezer per mode, then per cycle and per
/// lattice direction a beamsplitter between every mode and its neighbour
/// `llens[l]` further along, with `theta` then `phi` drawn uniformly from
/// `[0, 2 pi)` by a ChaCha8 stream seeded with `cfg.seed`.
pub fn generate_gbs(cfg: &GbsConfig) -> Result<Circuit, CircuitError> {
    cfg.validate()?;
    let d = cfg.cutoff;
    let mut circuit = Circuit::new(cfg.modes, d);
    circuit.seed = Some(cfg.seed);
    let squeezer = squeezer_matrix(cfg.r, d).matrix;
    for k in 0..cfg.modes {
        circuit.push(Gate::new("S", vec![k], vec![cfg.r], d, squeezer.clone())?)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let llens = cfg.llens();
    for _ in 0..cfg.cycles {
        for &step in &llens {
            for i in 0..cfg.modes - step {
                let theta = TAU * uniform_unit(&mut rng);
                let phi = TAU * uniform_unit(&mut rng);
                let m = beamsplitter_matrix(theta, phi, d);
                circuit.push(Gate::new("BS", vec![i, i + step], vec![theta, phi], d, m)?)?;
            }
        }
    }
    Ok(circuit)
}

/// Random brickwork circuit: each layer applies a Haar-random single-qudit
/// gate to every wire, then Haar-random two-qudit gates on alternating
/// neighbouring pairs.
pub fn random_qudit_circuit(wires: usize, depth: usize, dim: usize, seed: u64) -> Circuit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut circuit = Circuit::new(wires, dim);
    circuit.seed = Some(seed);
    for layer in 0..depth {
        for w in 0..wires {
            let m = random_unitary(dim, &mut rng);
            circuit
                .push(Gate::new("U1", vec![w], vec![], dim, m).expect("valid size"))
                .expect("valid wire");
        }
        let mut w = layer % 2;
        while w + 1 < wires {
            let m = random_unitary(dim * dim, &mut rng);
            circuit
                .push(Gate::new("U2", vec![w, w + 1], vec![], dim, m).expect("valid size"))
                .expect("valid wire");
            w += 2;
        }
    }
    circuit
}

/// Dense final state `U |0..0>`, row-major over wires (wire 0 most significant).
pub fn statevector_oracle(c: &Circuit) -> Result<Vec<Complex64>, CircuitError> {
    let len = (c.dim as u128).pow(c.wires as u32);
    if len > MAX_STATE_LEN as u128 {
        return Err(CircuitError::StateTooLarge(len));
    }
    let len = len as usize;
    let d = c.dim;
    let mut state = vec![Complex64::new(0.0, 0.0); len];
    state[0] = Complex64::new(1.0, 0.0);
    let place: Vec<usize> = (0..c.wires)
        .map(|w| d.pow((c.wires - 1 - w) as u32))
        .collect();

    for gate in &c.gates {
        let k = gate.arity();
        let side = d.pow(k as u32);
        // offsets of every local sub-index within the full state
        let local: Vec<usize> = (0..side)
            .map(|sub| {
                let mut rem = sub;
                let mut off = 0;
                for j in (0..k).rev() {
                    off += (rem % d) * place[gate.wires[j]];
                    rem /= d;
                }
                off
            })
            .collect();
        let mut next = vec![Complex64::new(0.0, 0.0); len];
        let mut digits = vec![0usize; c.wires];
        for base in 0..len {
            // visit each base offset once: all gate wires at zero
            let mut rem = base;
            for w in (0..c.wires).rev() {
                digits[w] = rem % d;
                rem /= d;
            }
            if gate.wires.iter().any(|&w| digits[w] != 0) {
                continue;
            }
            for (col, &off_in) in local.iter().enumerate() {
                let amp = state[base + off_in];
                if amp == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for (row, &off_out) in local.iter().enumerate() {
                    next[base + off_out] += gate.matrix[row * side + col] * amp;
                }
            }
        }
        state = next;
    }
    Ok(state)
}

/// Position of a basis state inside the oracle's state vector.
pub fn basis_offset(dim: usize, basis: &[usize]) -> usize {
    basis.iter().fold(0, |acc, &v| acc * dim + v)
}

/// A computational (Fock) basis state, one value per wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisState {
    pub values: Vec<usize>,
}

impl BasisState {
    pub fn new(values: Vec<usize>) -> Self {
        BasisState { values }
    }

    /// Total photon number of the state.
    pub fn total(&self) -> usize {
        self.values.iter().sum()
    }
}

/// Seeded uniform basis state with each value in `[0, dim)`.
pub fn random_fock_basis(wires: usize, dim: usize, seed: u64) -> BasisState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BasisState::new((0..wires).map(|_| uniform_below(&mut rng, dim)).collect())
}
