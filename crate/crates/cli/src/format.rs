//! Plain-text network and circuit files.
//!
//! Network file:
//!
//! ```text
//! tasknet-network v1
//! name example
//! precision double
//! tensor S_ba b:2 a:2
//! data 7.0710678118654746e-1 0.0000000000000000e0 ...
//! path 2
//! step ket_a S_ba
//! step #0 bra
//! slices e
//! end
//! ```
//!
//! `data` holds interleaved real and imaginary parts in row-major order.
//! Values are printed with 9 significant digits for single precision and 17
//! for double, enough to restore every bit. `path` and `slices` are optional.
//!
//! Circuit file:
//!
//! ```text
//! tasknet-circuit v1
//! wires 2
//! dim 2
//! seed 7
//! gate H 0
//! gate BS 0 1 params 1.0e0 2.0e0
//! gate U1 1 data 1.0e0 0.0e0 ...
//! end
//! ```
//!
//! Gates with a known name are rebuilt from their parameters; any other gate
//! carries its matrix inline.

use std::fmt::Write as _;

use num_complex::Complex64;
use tasknet::circuits::{Circuit, Gate};
use tasknet::network::TensorNetwork;
use tasknet::pathtree::{ContractionPath, NodeRef};
use tasknet::{Index, Precision, Scalar, Tensor};
use thiserror::Error;

pub const NETWORK_MAGIC: &str = "tasknet-network v1";
pub const CIRCUIT_MAGIC: &str = "tasknet-circuit v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFile {
    pub name: String,
    pub precision: Precision,
    /// Values are exactly representable at `precision`.
    pub network: TensorNetwork<Complex64>,
    pub path: Option<ContractionPath>,
    pub slices: Vec<String>,
}

fn round(z: Complex64, p: Precision) -> Complex64 {
    match p {
        Precision::Single => Complex64::new(z.re as f32 as f64, z.im as f32 as f64),
        Precision::Double => z,
    }
}

fn write_float(s: &mut String, x: f64, p: Precision) {
    let _ = match p {
        Precision::Single => write!(s, " {:.8e}", x as f32),
        Precision::Double => write!(s, " {x:.16e}"),
    };
}

fn parse_float(tok: &str, p: Precision) -> Option<f64> {
    match p {
        Precision::Single => tok.parse::<f32>().ok().map(f64::from),
        Precision::Double => tok.parse::<f64>().ok(),
    }
}

fn check_token(what: &str, tok: &str) -> Result<(), String> {
    if tok.is_empty() || tok.chars().any(char::is_whitespace) {
        Err(format!(
            "{what} '{tok}' must be a non-empty token without whitespace"
        ))
    } else {
        Ok(())
    }
}

impl NetworkFile {
    /// Rounds tensor data to `precision` so the file restores it exactly.
    pub fn new<T: Scalar>(
        name: impl Into<String>,
        precision: Precision,
        network: &TensorNetwork<T>,
        path: Option<ContractionPath>,
        slices: Vec<String>,
    ) -> Self {
        let mut net = TensorNetwork::new(Vec::new()).expect("empty network");
        for n in network.nodes() {
            let data = n
                .tensor
                .data()
                .iter()
                .map(|z| round(z.to_c64(), precision))
                .collect();
            let t = Tensor::new(n.tensor.indices().to_vec(), data).expect("same shape");
            net.add_node(n.id.clone(), t).expect("valid network");
        }
        NetworkFile {
            name: name.into(),
            precision,
            network: net,
            path,
            slices,
        }
    }

    pub fn network_as<T: Scalar>(&self) -> TensorNetwork<T> {
        self.network.cast()
    }

    pub fn to_text(&self) -> Result<String, String> {
        check_token("name", &self.name)?;
        let mut s = format!(
            "{NETWORK_MAGIC}\nname {}\nprecision {}\n",
            self.name, self.precision
        );
        for n in self.network.nodes() {
            check_token("tensor id", &n.id)?;
            let _ = write!(s, "tensor {}", n.id);
            for i in n.tensor.indices() {
                check_token("label", &i.label)?;
                let _ = write!(s, " {}:{}", i.label, i.dim);
            }
            s.push_str("\ndata");
            for z in n.tensor.data() {
                write_float(&mut s, z.re, self.precision);
                write_float(&mut s, z.im, self.precision);
            }
            s.push('\n');
        }
        if let Some(path) = &self.path {
            let _ = writeln!(s, "path {}", path.len());
            for (a, b) in &path.steps {
                let _ = writeln!(s, "step {a} {b}");
            }
        }
        if !self.slices.is_empty() {
            let _ = writeln!(s, "slices {}", self.slices.join(" "));
        }
        s.push_str("end\n");
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, l)) if l == NETWORK_MAGIC => {}
            Some((n, _)) => return err(n, format!("expected '{NETWORK_MAGIC}'")),
            None => return err(0, "empty file"),
        }
        let mut name = None;
        let mut precision = None;
        let mut net = TensorNetwork::<Complex64>::new(Vec::new()).expect("empty network");
        let mut path: Option<(usize, usize, Vec<(NodeRef, NodeRef)>)> = None;
        let mut slices = Vec::new();
        let mut ended = false;
        let mut pending_tensor: Option<(usize, String, Vec<Index>)> = None;

        for (n, line) in lines.by_ref() {
            let mut toks = line.split_whitespace();
            let key = toks.next().unwrap_or_default();
            let rest: Vec<&str> = toks.collect();
            if pending_tensor.is_some() && key != "data" {
                return err(n, "expected 'data' after 'tensor'");
            }
            match key {
                "name" => match rest.as_slice() {
                    [v] => name = Some(v.to_string()),
                    _ => return err(n, "expected 'name <token>'"),
                },
                "precision" => match rest.as_slice() {
                    [v] => precision = Some(v.parse::<Precision>().or_else(|e| err(n, e))?),
                    _ => return err(n, "expected 'precision single|double'"),
                },
                "tensor" => {
                    let Some((id, labels)) = rest.split_first() else {
                        return err(n, "tensor needs an id");
                    };
                    let mut idx = Vec::with_capacity(labels.len());
                    for l in labels {
                        let Some((label, dim)) = l.rsplit_once(':') else {
                            return err(n, format!("index '{l}' is not 'label:dim'"));
                        };
                        let dim: usize = dim
                            .parse()
                            .or_else(|_| err(n, format!("bad dimension in '{l}'")))?;
                        idx.push(Index::new(label, dim));
                    }
                    pending_tensor = Some((n, id.to_string(), idx));
                }
                "data" => {
                    let Some((_, id, idx)) = pending_tensor.take() else {
                        return err(n, "'data' without 'tensor'");
                    };
                    let p = precision.ok_or(FormatError {
                        line: n,
                        message: "'precision' must precede tensors".into(),
                    })?;
                    if rest.len() % 2 != 0 {
                        return err(n, "odd number of data values");
                    }
                    let mut data = Vec::with_capacity(rest.len() / 2);
                    for pair in rest.chunks(2) {
                        let (Some(re), Some(im)) =
                            (parse_float(pair[0], p), parse_float(pair[1], p))
                        else {
                            return err(n, format!("bad number in '{} {}'", pair[0], pair[1]));
                        };
                        data.push(Complex64::new(re, im));
                    }
                    let t = Tensor::new(idx, data)
                        .or_else(|e| err(n, format!("tensor '{id}': {e}")))?;
                    net.add_node(id, t).or_else(|e| err(n, e.to_string()))?;
                }
                "path" => {
                    if path.is_some() {
                        return err(n, "duplicate 'path'");
                    }
                    let count = match rest.as_slice() {
                        [c] => c.parse().or_else(|_| err(n, "bad step count"))?,
                        _ => return err(n, "expected 'path <count>'"),
                    };
                    path = Some((n, count, Vec::with_capacity(count)));
                }
                "step" => {
                    let Some((_, _, steps)) = path.as_mut() else {
                        return err(n, "'step' before 'path'");
                    };
                    match rest.as_slice() {
                        [a, b] => {
                            let a = a.parse().or_else(|e: String| err(n, e))?;
                            let b = b.parse().or_else(|e: String| err(n, e))?;
                            steps.push((a, b));
                        }
                        _ => return err(n, "expected 'step <node> <node>'"),
                    }
                }
                "slices" => slices.extend(rest.iter().map(|s| s.to_string())),
                "end" => {
                    ended = true;
                    break;
                }
                other => return err(n, format!("unknown keyword '{other}'")),
            }
        }
        if let Some((n, ..)) = pending_tensor {
            return err(n, "tensor without data");
        }
        if !ended {
            return err(text.lines().count(), "missing 'end'");
        }
        if let Some((n, _)) = lines.next() {
            return err(n, "content after 'end'");
        }
        let path = match path {
            Some((n, count, steps)) if steps.len() != count => {
                return err(
                    n,
                    format!("path declares {count} steps but lists {}", steps.len()),
                )
            }
            Some((_, _, steps)) => Some(ContractionPath::new(steps)),
            None => None,
        };
        Ok(NetworkFile {
            name: name.ok_or(FormatError {
                line: 0,
                message: "missing 'name'".into(),
            })?,
            precision: precision.ok_or(FormatError {
                line: 0,
                message: "missing 'precision'".into(),
            })?,
            network: net,
            path,
            slices,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitFile {
    pub circuit: Circuit,
}

impl CircuitFile {
    pub fn to_text(&self) -> String {
        let c = &self.circuit;
        let mut s = format!("{CIRCUIT_MAGIC}\nwires {}\ndim {}\n", c.wires, c.dim);
        if let Some(seed) = c.seed {
            let _ = writeln!(s, "seed {seed}");
        }
        for g in &c.gates {
            let _ = write!(s, "gate {}", g.name);
            for w in &g.wires {
                let _ = write!(s, " {w}");
            }
            if !g.params.is_empty() {
                s.push_str(" params");
                for &p in &g.params {
                    write_float(&mut s, p, Precision::Double);
                }
            }
            let rebuilt = Gate::named(&g.name, g.wires.clone(), &g.params, g.dim);
            if rebuilt.map_or(true, |r| r.matrix != g.matrix) {
                s.push_str(" data");
                for z in &g.matrix {
                    write_float(&mut s, z.re, Precision::Double);
                    write_float(&mut s, z.im, Precision::Double);
                }
            }
            s.push('\n');
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, l)) if l == CIRCUIT_MAGIC => {}
            Some((n, _)) => return err(n, format!("expected '{CIRCUIT_MAGIC}'")),
            None => return err(0, "empty file"),
        }
        let mut header = |key: &str| -> Result<usize, FormatError> {
            match lines.next() {
                Some((n, l)) => match l.split_whitespace().collect::<Vec<_>>().as_slice() {
                    [k, v] if *k == key => v.parse().or_else(|_| err(n, format!("bad {key}"))),
                    _ => err(n, format!("expected '{key} <n>'")),
                },
                None => err(0, format!("missing '{key}'")),
            }
        };
        let wires = header("wires")?;
        let dim = header("dim")?;
        let mut circuit = Circuit::new(wires, dim);
        let mut ended = false;
        for (n, line) in lines.by_ref() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["seed", v] => circuit.seed = Some(v.parse().or_else(|_| err(n, "bad seed"))?),
                ["gate", name, rest @ ..] => {
                    let mut wires = Vec::new();
                    let mut params = Vec::new();
                    let mut data = Vec::new();
                    let mut section = "wires";
                    for t in rest {
                        match *t {
                            "params" | "data" => {
                                section = t;
                                continue;
                            }
                            _ => {}
                        }
                        match section {
                            "wires" => wires.push(
                                t.parse::<usize>()
                                    .or_else(|_| err(n, format!("bad wire '{t}'")))?,
                            ),
                            _ => {
                                let v: f64 =
                                    t.parse().or_else(|_| err(n, format!("bad number '{t}'")))?;
                                if section == "params" {
                                    params.push(v);
                                } else {
                                    data.push(v);
                                }
                            }
                        }
                    }
                    let gate = if data.is_empty() {
                        Gate::named(name, wires, &params, dim)
                    } else {
                        if data.len() % 2 != 0 {
                            return err(n, "odd number of data values");
                        }
                        let m = data.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
                        Gate::new(*name, wires, params, dim, m)
                    };
                    let gate = gate.or_else(|e| err(n, e.to_string()))?;
                    circuit.push(gate).or_else(|e| err(n, e.to_string()))?;
                }
                ["end"] => {
                    ended = true;
                    break;
                }
                _ => return err(n, format!("unrecognised line '{line}'")),
            }
        }
        if !ended {
            return err(text.lines().count(), "missing 'end'");
        }
        if let Some((n, _)) = lines.next() {
            return err(n, "content after 'end'");
        }
        Ok(CircuitFile { circuit })
    }
}
