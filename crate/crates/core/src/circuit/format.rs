//! Line-oriented circuit text format.
//!
//! ```text
//! # comment
//! qubits 3
//! h 0
//! cp(0.7853981633974483) 1 0
//! matrix 1 2
//! 0,0 1,0
//! 1,0 0,0
//! ```
//!
//! Gate lines are `<name>[(<params>)] <q0> [q1 [q2]]` with angles in radians.
//! A `matrix <k> <q0..qk-1>` stanza is followed by `2^k` rows of `2^k`
//! entries written as `re,im`; index bit `j` of the matrix belongs to `qj`.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::gates::{matrix_gate, named_gate, signature};
use super::Circuit;
use crate::error::{Error, Result};
use crate::gatecore::{is_unitary, GateMatrix, FUSION_HARD_CAP};

const UNITARY_TOL: f64 = 1e-10;

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Splits a line into whitespace separated tokens with 1-based columns.
/// Text after `#` is dropped.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let code = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in code.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &code[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &code[s..]));
    }
    out
}

fn parse_qubit(tok: &str, col: usize, line: usize, n: usize) -> Result<usize> {
    let q: usize = tok
        .parse()
        .map_err(|_| perr(line, col, format!("expected qubit index, found `{tok}`")))?;
    if q >= n {
        return Err(perr(
            line,
            col,
            format!("qubit index {q} out of range for {n} qubits"),
        ));
    }
    Ok(q)
}

/// One-based line number, raw text and `(column, token)` pairs.
type TokenLine<'a> = (usize, &'a str, Vec<(usize, &'a str)>);

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next line that carries at least one token.
    fn next_tokens(&mut self) -> Option<TokenLine<'a>> {
        for (i, line) in self.inner.by_ref() {
            let toks = tokens(line);
            if !toks.is_empty() {
                return Some((i + 1, line, toks));
            }
        }
        None
    }
}

pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (hline, _, header) = lines
        .next_tokens()
        .ok_or_else(|| perr(1, 1, "missing `qubits <n>` header"))?;
    if header[0].1 != "qubits" || header.len() != 2 {
        return Err(perr(hline, header[0].0, "expected `qubits <n>` header"));
    }
    let n: usize = header[1]
        .1
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| perr(hline, header[1].0, "qubit count must be a positive integer"))?;
    let mut circuit = Circuit::new(n)?;

    while let Some((lineno, raw_line, toks)) = lines.next_tokens() {
        let (col, head) = toks[0];
        if head == "matrix" {
            parse_matrix_stanza(&mut lines, lineno, &toks, &mut circuit)?;
            continue;
        }
        if head == "qubits" {
            return Err(perr(lineno, col, "duplicate `qubits` header"));
        }
        // the name token may carry `(params)`, possibly spanning tokens
        let rest_start = col - 1;
        let code = raw_line.split('#').next().unwrap_or("");
        let body = &code[rest_start..];
        let name_len = body
            .find(|ch: char| ch == '(' || ch.is_whitespace())
            .unwrap_or(body.len());
        let name = &body[..name_len];
        let mut params = Vec::new();
        let mut after = &body[name_len..];
        let mut after_col = col + name_len;
        if after.starts_with('(') {
            let close = after
                .find(')')
                .ok_or_else(|| perr(lineno, after_col, "unclosed parameter list"))?;
            let inner = &after[1..close];
            let mut offset = after_col + 1;
            for piece in inner.split(',') {
                let trimmed = piece.trim();
                let value: f64 = trimmed
                    .parse()
                    .map_err(|_| perr(lineno, offset, format!("invalid parameter `{trimmed}`")))?;
                if !value.is_finite() {
                    return Err(perr(lineno, offset, "parameter must be finite"));
                }
                params.push(value);
                offset += piece.len() + 1;
            }
            after = &after[close + 1..];
            after_col += close + 1;
        }
        let (arity, n_params) =
            signature(name).ok_or_else(|| perr(lineno, col, format!("unknown gate `{name}`")))?;
        if params.len() != n_params {
            return Err(perr(
                lineno,
                col,
                format!(
                    "`{name}` takes {n_params} parameter(s), got {}",
                    params.len()
                ),
            ));
        }
        let operand_toks: Vec<(usize, &str)> = tokens(after)
            .into_iter()
            .map(|(c, t)| (c + after_col - 1, t))
            .collect();
        if operand_toks.len() != arity {
            return Err(perr(
                lineno,
                col,
                format!(
                    "`{name}` takes {arity} qubit(s), got {}",
                    operand_toks.len()
                ),
            ));
        }
        let operands = operand_toks
            .iter()
            .map(|&(c, t)| parse_qubit(t, c, lineno, n))
            .collect::<Result<Vec<_>>>()?;
        let gate =
            named_gate(name, &params, &operands).map_err(|e| perr(lineno, col, e.to_string()))?;
        circuit.push(gate)?;
    }
    Ok(circuit)
}

fn parse_matrix_stanza(
    lines: &mut Lines<'_>,
    lineno: usize,
    toks: &[(usize, &str)],
    circuit: &mut Circuit,
) -> Result<()> {
    let n = circuit.n_qubits();
    let (kcol, ktok) = *toks
        .get(1)
        .ok_or_else(|| perr(lineno, toks[0].0, "`matrix` needs a qubit count"))?;
    let k: usize = ktok
        .parse()
        .ok()
        .filter(|&k| (1..=FUSION_HARD_CAP).contains(&k))
        .ok_or_else(|| {
            perr(
                lineno,
                kcol,
                format!("matrix size must be 1..={FUSION_HARD_CAP}"),
            )
        })?;
    if toks.len() != 2 + k {
        return Err(perr(
            lineno,
            toks[0].0,
            format!("`matrix {k}` takes {k} qubit(s), got {}", toks.len() - 2),
        ));
    }
    let operands = toks[2..]
        .iter()
        .map(|&(c, t)| parse_qubit(t, c, lineno, n))
        .collect::<Result<Vec<_>>>()?;
    let dim = 1usize << k;
    let mut entries = Vec::with_capacity(dim * dim);
    for row in 0..dim {
        let (rline, _, rtoks) = lines.next_tokens().ok_or_else(|| {
            perr(
                lineno,
                1,
                format!("matrix stanza ends after {row} of {dim} rows"),
            )
        })?;
        if rtoks.len() != dim {
            return Err(perr(
                rline,
                1,
                format!("matrix row needs {dim} entries, got {}", rtoks.len()),
            ));
        }
        for (c, t) in rtoks {
            let (re, im) = t
                .split_once(',')
                .ok_or_else(|| perr(rline, c, format!("expected `re,im`, found `{t}`")))?;
            let re: f64 = re
                .parse()
                .map_err(|_| perr(rline, c, format!("invalid real part `{re}`")))?;
            let im: f64 = im
                .parse()
                .map_err(|_| perr(rline, c, format!("invalid imaginary part `{im}`")))?;
            if !re.is_finite() || !im.is_finite() {
                return Err(perr(rline, c, "matrix entries must be finite"));
            }
            entries.push(Complex64::new(re, im));
        }
    }
    let m = GateMatrix::new(k, entries).map_err(|e| perr(lineno, 1, e.to_string()))?;
    if !is_unitary(&m, UNITARY_TOL) {
        return Err(perr(lineno, 1, "matrix is not unitary"));
    }
    let gate = matrix_gate(&operands, m).map_err(|e| perr(lineno, 1, e.to_string()))?;
    circuit.push(gate)
}

pub fn serialize_circuit(c: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qubits {}", c.n_qubits());
    for g in c.gates() {
        match g.label() {
            Some(label) => {
                let _ = writeln!(out, "{label}");
            }
            None => {
                out.push_str("matrix ");
                out.push_str(&g.k().to_string());
                for q in g.targets() {
                    let _ = write!(out, " {q}");
                }
                out.push('\n');
                let m = g.matrix();
                for r in 0..m.dim() {
                    let row: Vec<String> = m
                        .row(r)
                        .iter()
                        .map(|z| format!("{:.16e},{:.16e}", z.re, z.im))
                        .collect();
                    out.push_str(&row.join(" "));
                    out.push('\n');
                }
            }
        }
    }
    out
}
