//! LSTM cells and multi-layer single-direction runners.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

pub const INIT_SCALE: f64 = 0.08;

/// Gate weights stacked row-wise in the order input, forget, output, candidate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub w: ParamId,
    pub u: ParamId,
    pub b: ParamId,
    pub d_in: usize,
    pub hidden: usize,
}

impl LstmLayerParams {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let w = store.add(
            format!("{name}.w"),
            Tensor::uniform(&[4 * hidden, d_in], INIT_SCALE, rng),
        );
        let u = store.add(
            format!("{name}.u"),
            Tensor::uniform(&[4 * hidden, hidden], INIT_SCALE, rng),
        );
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden].fill(1.0);
        let b = store.add(format!("{name}.b"), bias);
        LstmLayerParams {
            w,
            u,
            b,
            d_in,
            hidden,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LstmStack {
    pub layers: Vec<LstmLayerParams>,
    pub direction: Direction,
}

impl LstmStack {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        d_emb: usize,
        hidden: usize,
        num_layers: usize,
        direction: Direction,
        rng: &mut R,
    ) -> Self {
        let layers = (0..num_layers)
            .map(|k| {
                let d_in = if k == 0 { d_emb } else { hidden };
                LstmLayerParams::init(store, &format!("{name}.l{k}"), d_in, hidden, rng)
            })
            .collect();
        LstmStack { layers, direction }
    }

    /// Width of the concatenated final states, `hidden · layers`.
    pub fn output_dim(&self) -> usize {
        self.layers.iter().map(|l| l.hidden).sum()
    }
}

/// One cell update; returns `(h, c)`.
pub fn lstm_step(
    tape: &mut Tape,
    store: &ParamStore,
    layer: &LstmLayerParams,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    let hd = layer.hidden;
    if tape.value(h_prev).len() != hd || tape.value(c_prev).len() != hd {
        return Err(Error::Dimension {
            op: "lstm_step state",
            left: vec![hd],
            right: vec![tape.value(h_prev).len(), tape.value(c_prev).len()],
        });
    }
    let wx = tape.affine(store, layer.w, x, Some(layer.b))?;
    let uh = tape.affine(store, layer.u, h_prev, None)?;
    let z = tape.add(wx, uh)?;
    let zi = tape.slice(z, 0, hd)?;
    let zf = tape.slice(z, hd, hd)?;
    let zo = tape.slice(z, 2 * hd, hd)?;
    let zg = tape.slice(z, 3 * hd, hd)?;
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let o = tape.sigmoid(zo);
    let g = tape.tanh(zg);
    let fc = tape.mul(f, c_prev)?;
    let ig = tape.mul(i, g)?;
    let c = tape.add(fc, ig)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Runs every layer over the sequence and concatenates each layer's final
/// hidden state. Backward stacks consume the sequence reversed.
pub fn run_stack(
    tape: &mut Tape,
    store: &ParamStore,
    stack: &LstmStack,
    sequence: &[NodeId],
) -> Result<NodeId> {
    if sequence.is_empty() {
        return Err(Error::Dimension {
            op: "run_stack",
            left: vec![stack.output_dim()],
            right: vec![0],
        });
    }
    let mut inputs: Vec<NodeId> = match stack.direction {
        Direction::Forward => sequence.to_vec(),
        Direction::Backward => sequence.iter().rev().copied().collect(),
    };
    let mut finals = Vec::with_capacity(stack.layers.len());
    for layer in &stack.layers {
        let mut h = tape.input(vec![0.0; layer.hidden]);
        let mut c = tape.input(vec![0.0; layer.hidden]);
        let mut outputs = Vec::with_capacity(inputs.len());
        for &x in &inputs {
            let (nh, nc) = lstm_step(tape, store, layer, x, h, c)?;
            h = nh;
            c = nc;
            outputs.push(h);
        }
        finals.push(h);
        inputs = outputs;
    }
    Ok(tape.concat(&finals))
}
