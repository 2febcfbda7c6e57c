//! Parameterized building blocks: affine layers, tanh MLPs and an LSTM.

use rand::Rng;

use crate::error::ShapeError;

use super::params::{Bound, Params};
use super::tape::{Tape, Var};
use super::tensor::Tensor;

/// Adds `{prefix}.w` (glorot) and `{prefix}.b` (zero) for an `inputs -> outputs` affine map.
pub fn init_dense(params: &mut Params, prefix: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) {
    params.insert(format!("{prefix}.w"), Tensor::glorot(inputs, outputs, rng), true);
    params.insert(format!("{prefix}.b"), Tensor::zeros(1, outputs), true);
}

pub fn dense(tape: &mut Tape, bound: &Bound, prefix: &str, x: Var) -> Result<Var, ShapeError> {
    let y = tape.matmul(x, bound.var(&format!("{prefix}.w")))?;
    tape.add_bias(y, bound.var(&format!("{prefix}.b")))
}

/// Layers `{prefix}.0 .. {prefix}.{n-1}` mapping `sizes[0]` to `sizes[n]`.
pub fn init_mlp(params: &mut Params, prefix: &str, sizes: &[usize], rng: &mut impl Rng) {
    for (i, w) in sizes.windows(2).enumerate() {
        init_dense(params, &format!("{prefix}.{i}"), w[0], w[1], rng);
    }
}

/// Tanh hidden layers and a linear output layer.
pub fn mlp(tape: &mut Tape, bound: &Bound, prefix: &str, layers: usize, x: Var) -> Result<Var, ShapeError> {
    let mut h = x;
    for i in 0..layers {
        h = dense(tape, bound, &format!("{prefix}.{i}"), h)?;
        if i + 1 < layers {
            h = tape.tanh(h);
        }
    }
    Ok(h)
}

/// Input weights `{prefix}.wx`, recurrent weights `{prefix}.wh` and bias
/// `{prefix}.b`, gates ordered input, forget, cell, output.
pub fn init_lstm(params: &mut Params, prefix: &str, inputs: usize, hidden: usize, rng: &mut impl Rng) {
    params.insert(format!("{prefix}.wx"), Tensor::glorot(inputs, 4 * hidden, rng), true);
    params.insert(format!("{prefix}.wh"), Tensor::glorot(hidden, 4 * hidden, rng), true);
    params.insert(format!("{prefix}.b"), Tensor::zeros(1, 4 * hidden), true);
}

/// Runs a 4-gate LSTM over `inputs`, whose rows are time-major
/// (`row = t * batch + b`), and returns the cell state after each sequence's
/// last real step. Steps past `lens[b]` leave sequence `b`'s state unchanged.
pub fn lstm_final_cell(tape: &mut Tape, bound: &Bound, prefix: &str, inputs: Var, batch: usize, lens: &[usize]) -> Result<Var, ShapeError> {
    let wh = bound.var(&format!("{prefix}.wh"));
    let hidden = tape.value(wh).rows;
    let rows = tape.value(inputs).rows;
    if batch == 0 || rows % batch != 0 || lens.len() != batch {
        return Err(ShapeError { op: "lstm", detail: format!("{rows} input rows for batch {batch} with {} lengths", lens.len()) });
    }
    let steps = rows / batch;
    let projected = tape.matmul(inputs, bound.var(&format!("{prefix}.wx")))?;
    let projected = tape.add_bias(projected, bound.var(&format!("{prefix}.b")))?;
    let mut h = tape.constant(Tensor::zeros(batch, hidden));
    let mut c = tape.constant(Tensor::zeros(batch, hidden));
    for t in 0..steps {
        let x = tape.slice_rows(projected, t * batch, (t + 1) * batch)?;
        let r = tape.matmul(h, wh)?;
        let gates = tape.add(x, r)?;
        let gate = |tape: &mut Tape, k: usize| tape.slice_cols(gates, k * hidden, (k + 1) * hidden);
        let i = gate(tape, 0)?;
        let i = tape.sigmoid(i);
        let f = gate(tape, 1)?;
        let f = tape.sigmoid(f);
        let g = gate(tape, 2)?;
        let g = tape.tanh(g);
        let o = gate(tape, 3)?;
        let o = tape.sigmoid(o);
        let keep = tape.mul(f, c)?;
        let write = tape.mul(i, g)?;
        let c_next = tape.add(keep, write)?;
        let squashed = tape.tanh(c_next);
        let h_next = tape.mul(o, squashed)?;
        let live: Vec<bool> = lens.iter().map(|&n| t < n).collect();
        c = tape.select_rows(&live, c_next, c)?;
        h = tape.select_rows(&live, h_next, h)?;
    }
    Ok(c)
}
