//! Fusion of the last hidden states (and optional POS tag) into the context
//! vector `o` consumed by the decoder.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::{ParamId, ParamStore};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;

/// Which encoder inputs a model variant uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariantConfig {
    pub use_context: bool,
    pub use_base: bool,
    /// When false, only the forward state of the left context and the
    /// backward state of the right context are used.
    pub bidirectional_context: bool,
    pub use_pos: bool,
}

impl VariantConfig {
    pub const BILSTM_BS: Self = Self::new(false, true, true, false);
    pub const BILSTM_CTX: Self = Self::new(true, false, true, false);
    pub const BILSTM_CTX_BS: Self = Self::new(true, true, true, false);
    pub const BILSTM_CTX_BS_POS: Self = Self::new(true, true, true, true);
    pub const LSTM_CTX_BS_POS: Self = Self::new(true, true, false, true);

    pub const ALL: [Self; 5] = [
        Self::BILSTM_BS,
        Self::BILSTM_CTX,
        Self::BILSTM_CTX_BS,
        Self::BILSTM_CTX_BS_POS,
        Self::LSTM_CTX_BS_POS,
    ];

    pub const fn new(
        use_context: bool,
        use_base: bool,
        bidirectional_context: bool,
        use_pos: bool,
    ) -> Self {
        VariantConfig {
            use_context,
            use_base,
            bidirectional_context,
            use_pos,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.use_context && !self.use_base {
            return Err(Error::Config(
                "variant must use context, base form, or both".into(),
            ));
        }
        Ok(())
    }

    /// Number of `h·l`-wide state slots fed to the fusion layer.
    pub fn num_slots(&self) -> usize {
        let ctx = match (self.use_context, self.bidirectional_context) {
            (false, _) => 0,
            (true, true) => 4,
            (true, false) => 2,
        };
        ctx + if self.use_base { 2 } else { 0 }
    }

    pub fn name(&self) -> String {
        let mut parts = vec![if self.bidirectional_context || !self.use_context {
            "biLSTM"
        } else {
            "LSTM"
        }];
        if self.use_context {
            parts.push("CTX");
        }
        if self.use_base {
            parts.push("BS");
        }
        if self.use_pos {
            parts.push("POS");
        }
        parts.join("+")
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                let known: Vec<String> = Self::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!("unknown variant `{name}` (known: {})", known.join(", ")))
            })
    }
}

impl fmt::Display for VariantConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// The six candidate last-hidden-state slots.
#[derive(Clone, Copy, Debug, Default)]
pub struct EncoderStates {
    pub left_fwd: Option<NodeId>,
    pub left_bwd: Option<NodeId>,
    pub right_fwd: Option<NodeId>,
    pub right_bwd: Option<NodeId>,
    pub base_fwd: Option<NodeId>,
    pub base_bwd: Option<NodeId>,
}

impl EncoderStates {
    fn slots(&self) -> [(&'static str, Option<NodeId>); 6] {
        [
            ("left_fwd", self.left_fwd),
            ("left_bwd", self.left_bwd),
            ("right_fwd", self.right_fwd),
            ("right_bwd", self.right_bwd),
            ("base_fwd", self.base_fwd),
            ("base_bwd", self.base_bwd),
        ]
    }
}

fn demanded(cfg: &VariantConfig) -> [bool; 6] {
    let ctx = cfg.use_context;
    let bi = cfg.bidirectional_context;
    [
        ctx,
        ctx && bi,
        ctx && bi,
        ctx,
        cfg.use_base,
        cfg.use_base,
    ]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncoderParams {
    pub h: ParamId,
    pub b_h: ParamId,
    pub t: ParamId,
    pub b_o: ParamId,
    pub pos_table: Option<ParamId>,
    pub state_dim: usize,
    pub fused_dim: usize,
}

/// Width of the fusion layer: `1.5 · state_dim`, rounded to nearest.
pub fn fused_dim(state_dim: usize) -> usize {
    (state_dim * 3).div_ceil(2)
}

pub(crate) fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let scale = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::uniform(&[rows, cols], scale, rng)
}

impl EncoderParams {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        cfg: &VariantConfig,
        state_dim: usize,
        num_pos: usize,
        pos_dim: usize,
        rng: &mut R,
    ) -> Self {
        let fused = fused_dim(state_dim);
        let pos_width = if cfg.use_pos { pos_dim } else { 0 };
        let cat = cfg.num_slots() * state_dim + pos_width;
        let h = store.add("enc.H", glorot(fused, cat, rng));
        let b_h = store.add("enc.b_h", Tensor::zeros(&[fused]));
        let t = store.add("enc.T", glorot(state_dim, fused, rng));
        let b_o = store.add("enc.b_o", Tensor::zeros(&[state_dim]));
        let pos_table = cfg
            .use_pos
            .then(|| store.add("enc.pos", Tensor::uniform(&[num_pos, pos_dim], 0.1, rng)));
        EncoderParams {
            h,
            b_h,
            t,
            b_o,
            pos_table,
            state_dim,
            fused_dim: fused,
        }
    }
}

/// Records `t = relu(H·[states; pos] + b_h)` and `o = T·t + b_o`; returns `(t, o)`.
pub fn encode_with_hidden(
    tape: &mut Tape,
    store: &ParamStore,
    states: &EncoderStates,
    pos: Option<usize>,
    cfg: &VariantConfig,
    p: &EncoderParams,
) -> Result<(NodeId, NodeId)> {
    let mut parts = Vec::with_capacity(7);
    for ((name, slot), want) in states.slots().into_iter().zip(demanded(cfg)) {
        match (slot, want) {
            (Some(id), true) => {
                if tape.value(id).len() != p.state_dim {
                    return Err(Error::Dimension {
                        op: "encode",
                        left: vec![p.state_dim],
                        right: vec![tape.value(id).len()],
                    });
                }
                parts.push(id)
            }
            (None, false) => {}
            (Some(_), false) => {
                return Err(Error::Config(format!(
                    "state `{name}` supplied but variant {cfg} does not use it"
                )))
            }
            (None, true) => {
                return Err(Error::Config(format!(
                    "variant {cfg} requires state `{name}`"
                )))
            }
        }
    }
    match (cfg.use_pos, pos, p.pos_table) {
        (true, Some(tag), Some(table)) => parts.push(tape.lookup(store, table, tag)?),
        (true, None, _) => {
            return Err(Error::Config(format!("variant {cfg} requires a POS tag")))
        }
        (false, Some(_), _) => {
            return Err(Error::Config(format!("variant {cfg} does not take a POS tag")))
        }
        (true, Some(_), None) => {
            return Err(Error::Config("encoder has no POS table".into()))
        }
        (false, None, _) => {}
    }
    let cat = tape.concat(&parts);
    let pre = tape.affine(store, p.h, cat, Some(p.b_h))?;
    let t = tape.relu(pre);
    let o = tape.affine(store, p.t, t, Some(p.b_o))?;
    Ok((t, o))
}

pub fn encode(
    tape: &mut Tape,
    store: &ParamStore,
    states: &EncoderStates,
    pos: Option<usize>,
    cfg: &VariantConfig,
    p: &EncoderParams,
) -> Result<NodeId> {
    encode_with_hidden(tape, store, states, pos, cfg, p).map(|(_, o)| o)
}
