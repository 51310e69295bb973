//! Character-by-character generation of the derived form.
//!
//! Each step scores the next character as
//! `R·c_j + max(B·o, S·l_{j+1}) + b_d`, where `c_j` is the previous output
//! character, `l_{j+1}` the aligned base-form character (end-of-word once the
//! base is exhausted) and `o` the encoder's context vector. The elementwise
//! max lets the model switch between copying the base character and
//! producing a context-driven one.
//!
//! In [`DecoderMode::Recurrent`], `c_j` is replaced by the state of a
//! single-layer LSTM run over the previous output characters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::glorot;
use crate::error::{Error, Result};
use crate::lstm::{lstm_step, LstmLayerParams};
use crate::param::{ParamId, ParamStore};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use crate::vocab::{BOW, EOW};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderMode {
    /// Next-character classifier over (previous char, o, aligned base char).
    Literal,
    /// Previous characters summarised by an LSTM state of width `d_c`.
    #[default]
    Recurrent,
}

impl std::str::FromStr for DecoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(DecoderMode::Literal),
            "recurrent" => Ok(DecoderMode::Recurrent),
            other => Err(Error::Config(format!("unknown decoder mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecoderParams {
    /// Shared by previous-character and base-character inputs.
    pub char_table: ParamId,
    pub r: ParamId,
    pub b: ParamId,
    pub s: ParamId,
    pub b_d: ParamId,
    pub rnn: Option<LstmLayerParams>,
    pub alphabet_size: usize,
}

impl DecoderParams {
    pub fn init<R: Rng>(
        store: &mut ParamStore,
        alphabet_size: usize,
        char_dim: usize,
        context_dim: usize,
        mode: DecoderMode,
        rng: &mut R,
    ) -> Self {
        let char_table = store.add(
            "dec.chars",
            Tensor::uniform(&[alphabet_size, char_dim], 0.1, rng),
        );
        let r = store.add("dec.R", glorot(alphabet_size, char_dim, rng));
        let b = store.add("dec.B", glorot(alphabet_size, context_dim, rng));
        let s = store.add("dec.S", glorot(alphabet_size, char_dim, rng));
        let b_d = store.add("dec.b_d", Tensor::zeros(&[alphabet_size]));
        let rnn = (mode == DecoderMode::Recurrent)
            .then(|| LstmLayerParams::init(store, "dec.rnn", char_dim, char_dim, rng));
        DecoderParams {
            char_table,
            r,
            b,
            s,
            b_d,
            rnn,
            alphabet_size,
        }
    }

    pub fn mode(&self) -> DecoderMode {
        if self.rnn.is_some() {
            DecoderMode::Recurrent
        } else {
            DecoderMode::Literal
        }
    }

    fn check(&self, index: usize) -> Result<()> {
        if index >= self.alphabet_size {
            return Err(Error::Vocabulary {
                index,
                size: self.alphabet_size,
            });
        }
        Ok(())
    }
}

/// The base character aligned with output position `j`, or end-of-word.
pub fn base_prefix_char(base: &[usize], j: usize) -> usize {
    base.get(j).copied().unwrap_or(EOW)
}

/// Per-sequence decoder state: the context projection `B·o`, computed once,
/// and the recurrent state when enabled.
#[derive(Clone, Copy, Debug)]
pub struct DecoderState {
    context: NodeId,
    rnn: Option<(NodeId, NodeId)>,
}

impl DecoderState {
    pub fn start(tape: &mut Tape, store: &ParamStore, p: &DecoderParams, o: NodeId) -> Result<Self> {
        let context = tape.affine(store, p.b, o, None)?;
        let rnn = p.rnn.map(|l| {
            (
                tape.input(vec![0.0; l.hidden]),
                tape.input(vec![0.0; l.hidden]),
            )
        });
        Ok(DecoderState { context, rnn })
    }
}

/// Logits over the alphabet for the character following `prev`.
pub fn decode_step(
    tape: &mut Tape,
    store: &ParamStore,
    p: &DecoderParams,
    state: &mut DecoderState,
    prev: usize,
    base_next: usize,
) -> Result<NodeId> {
    p.check(prev)?;
    p.check(base_next)?;
    let c = tape.lookup(store, p.char_table, prev)?;
    let c = match (&p.rnn, state.rnn) {
        (Some(layer), Some((h, cell))) => {
            let (h, cell) = lstm_step(tape, store, layer, c, h, cell)?;
            state.rnn = Some((h, cell));
            h
        }
        _ => c,
    };
    let rc = tape.affine(store, p.r, c, Some(p.b_d))?;
    let l = tape.lookup(store, p.char_table, base_next)?;
    let sl = tape.affine(store, p.s, l, None)?;
    let gate = tape.max(state.context, sl)?;
    tape.add(rc, gate)
}

/// Summed cross-entropy of `target` followed by end-of-word, feeding gold
/// previous characters (starting from begin-of-word).
pub fn teacher_forced_loss(
    tape: &mut Tape,
    store: &ParamStore,
    p: &DecoderParams,
    base: &[usize],
    target: &[usize],
    o: NodeId,
) -> Result<NodeId> {
    if target.is_empty() {
        return Err(Error::Config("target form is empty".into()));
    }
    let mut state = DecoderState::start(tape, store, p, o)?;
    let mut losses = Vec::with_capacity(target.len() + 1);
    let mut prev = BOW;
    for j in 0..=target.len() {
        let gold = target.get(j).copied().unwrap_or(EOW);
        p.check(gold)?;
        let logits = decode_step(tape, store, p, &mut state, prev, base_prefix_char(base, j))?;
        let (loss, _) = tape.softmax_xent(logits, gold)?;
        losses.push(loss);
        prev = gold;
    }
    tape.sum(&losses)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generation {
    /// Output characters, without boundary markers.
    pub symbols: Vec<usize>,
    /// True when `max_len` characters were produced without end-of-word.
    pub truncated: bool,
}

/// Highest-scoring emittable symbol. Begin-of-word only ever appears as the
/// initial input, so it is excluded.
fn argmax(xs: &[f64]) -> usize {
    let mut best = EOW;
    for (i, &x) in xs.iter().enumerate().skip(EOW) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding; ties go to the lowest character index.
pub fn generate_greedy(
    store: &ParamStore,
    p: &DecoderParams,
    base: &[usize],
    o: &[f64],
    max_len: usize,
) -> Result<Generation> {
    if max_len == 0 {
        return Err(Error::Config("max_len must be at least 1".into()));
    }
    let mut tape = Tape::new();
    let o = tape.input(o.to_vec());
    generate_on_tape(&mut tape, store, p, base, o, max_len)
}

pub(crate) fn generate_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    p: &DecoderParams,
    base: &[usize],
    o: NodeId,
    max_len: usize,
) -> Result<Generation> {
    let mut state = DecoderState::start(tape, store, p, o)?;
    let mut prev = BOW;
    let mut symbols = Vec::new();
    for j in 0..max_len {
        let logits = decode_step(tape, store, p, &mut state, prev, base_prefix_char(base, j))?;
        let next = argmax(tape.value(logits));
        if next == EOW {
            return Ok(Generation {
                symbols,
                truncated: false,
            });
        }
        symbols.push(next);
        prev = next;
    }
    Ok(Generation {
        symbols,
        truncated: true,
    })
}
