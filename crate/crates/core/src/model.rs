//! The full encoder–decoder: context and base-form LSTMs, fusion layer and
//! copy-capable character decoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingTable, Instance};
use crate::decoder::{generate_on_tape, teacher_forced_loss, DecoderMode, DecoderParams};
use crate::encoder::{encode_with_hidden, EncoderParams, EncoderStates, VariantConfig};
use crate::error::{Error, Result};
use crate::lstm::{run_stack, Direction, LstmStack};
use crate::optim::SgdMomentum;
use crate::param::ParamStore;
use crate::tape::{NodeId, Tape};
use crate::vocab::{Alphabet, TagSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: VariantConfig,
    /// LSTM hidden size `h`.
    pub hidden: usize,
    /// LSTM depth `l`.
    pub layers: usize,
    /// Character embedding size `d_c`.
    pub char_dim: usize,
    pub word_dim: usize,
    pub pos_dim: usize,
    pub decoder: DecoderMode,
    /// Generation stops after `len(base) + max_len_slack` characters.
    pub max_len_slack: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: VariantConfig::BILSTM_CTX_BS,
            hidden: 100,
            layers: 3,
            char_dim: 100,
            word_dim: 300,
            pos_dim: 16,
            decoder: DecoderMode::default(),
            max_len_slack: 10,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.variant.validate()?;
        for (name, v) in [
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("char_dim", self.char_dim),
            ("word_dim", self.word_dim),
            ("pos_dim", self.pos_dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("`{name}` must be positive")));
            }
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.hidden * self.layers
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Layout {
    ctx_fwd: Option<LstmStack>,
    ctx_bwd: Option<LstmStack>,
    base_fwd: Option<LstmStack>,
    base_bwd: Option<LstmStack>,
    encoder: EncoderParams,
    decoder: DecoderParams,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub form: String,
    pub truncated: bool,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: ModelConfig,
    alphabet: Alphabet,
    pos_tags: TagSet,
    store: ParamStore,
    layout: Layout,
}

impl Model {
    /// Parameters are drawn from a ChaCha8 stream seeded with `seed`, in a
    /// fixed order, so equal arguments give identical models.
    pub fn new(config: ModelConfig, alphabet: Alphabet, pos_tags: TagSet, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (h, l) = (config.hidden, config.layers);
        let v = config.variant;
        let (ctx_fwd, ctx_bwd) = if v.use_context {
            (
                Some(LstmStack::init(&mut store, "ctx.fwd", config.word_dim, h, l, Direction::Forward, &mut rng)),
                Some(LstmStack::init(&mut store, "ctx.bwd", config.word_dim, h, l, Direction::Backward, &mut rng)),
            )
        } else {
            (None, None)
        };
        let (base_fwd, base_bwd) = if v.use_base {
            (
                Some(LstmStack::init(&mut store, "base.fwd", config.char_dim, h, l, Direction::Forward, &mut rng)),
                Some(LstmStack::init(&mut store, "base.bwd", config.char_dim, h, l, Direction::Backward, &mut rng)),
            )
        } else {
            (None, None)
        };
        let encoder = EncoderParams::init(
            &mut store,
            &v,
            config.state_dim(),
            pos_tags.len(),
            config.pos_dim,
            &mut rng,
        );
        let decoder = DecoderParams::init(
            &mut store,
            alphabet.len(),
            config.char_dim,
            config.state_dim(),
            config.decoder,
            &mut rng,
        );
        Ok(Model {
            config,
            alphabet,
            pos_tags,
            store,
            layout: Layout {
                ctx_fwd,
                ctx_bwd,
                base_fwd,
                base_bwd,
                encoder,
                decoder,
            },
        })
    }

    /// Builds the alphabet and POS inventory from `train`.
    pub fn for_instances(config: ModelConfig, train: &[Instance], seed: u64) -> Result<Self> {
        let alphabet = Alphabet::from_words(
            train
                .iter()
                .flat_map(|i| [i.base.as_str(), i.target.as_str()]),
        );
        let tags = TagSet::from_tags(train.iter().map(|i| i.pos.as_str()));
        Self::new(config, alphabet, tags, seed)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn pos_tags(&self) -> &TagSet {
        &self.pos_tags
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn max_len(&self, base: &str) -> usize {
        base.chars().count() + self.config.max_len_slack
    }

    fn context_seq(&self, tape: &mut Tape, words: &[String], emb: &EmbeddingTable, end: bool) -> Vec<NodeId> {
        if words.is_empty() {
            return vec![tape.input(emb.sentinel(end))];
        }
        words.iter().map(|w| tape.input(emb.lookup(w))).collect()
    }

    /// Records the encoder for `inst` and returns `(t, o)`.
    pub fn encode(&self, tape: &mut Tape, inst: &Instance, emb: &EmbeddingTable) -> Result<(NodeId, NodeId)> {
        if emb.dim() != self.config.word_dim {
            return Err(Error::Config(format!(
                "word vectors have {} dimensions, model expects {}",
                emb.dim(),
                self.config.word_dim
            )));
        }
        let v = self.config.variant;
        let lay = &self.layout;
        let s = &self.store;
        let mut states = EncoderStates::default();
        if let (Some(fwd), Some(bwd)) = (&lay.ctx_fwd, &lay.ctx_bwd) {
            let left = self.context_seq(tape, &inst.left, emb, false);
            let right = self.context_seq(tape, &inst.right, emb, true);
            states.left_fwd = Some(run_stack(tape, s, fwd, &left)?);
            states.right_bwd = Some(run_stack(tape, s, bwd, &right)?);
            if v.bidirectional_context {
                states.left_bwd = Some(run_stack(tape, s, bwd, &left)?);
                states.right_fwd = Some(run_stack(tape, s, fwd, &right)?);
            }
        }
        if let (Some(fwd), Some(bwd)) = (&lay.base_fwd, &lay.base_bwd) {
            let chars = self.base_symbols(&inst.base)?;
            let seq = chars
                .iter()
                .map(|&c| tape.lookup(s, lay.decoder.char_table, c))
                .collect::<Result<Vec<_>>>()?;
            states.base_fwd = Some(run_stack(tape, s, fwd, &seq)?);
            states.base_bwd = Some(run_stack(tape, s, bwd, &seq)?);
        }
        let pos = v.use_pos.then(|| self.pos_tags.index_of(&inst.pos));
        encode_with_hidden(tape, s, &states, pos, &v, &lay.encoder)
    }

    fn base_symbols(&self, base: &str) -> Result<Vec<usize>> {
        if base.is_empty() {
            return Err(Error::Config("empty base form".into()));
        }
        Ok(self.alphabet.encode(base))
    }

    /// Teacher-forced loss node for one instance.
    pub fn loss(&self, tape: &mut Tape, inst: &Instance, emb: &EmbeddingTable) -> Result<NodeId> {
        let (_, o) = self.encode(tape, inst, emb)?;
        let base = self.base_symbols(&inst.base)?;
        let target = self.alphabet.encode(&inst.target);
        teacher_forced_loss(tape, &self.store, &self.layout.decoder, &base, &target, o)
    }

    /// Loss value without recording gradients.
    pub fn loss_value(&self, inst: &Instance, emb: &EmbeddingTable) -> Result<f64> {
        let mut tape = Tape::new();
        let l = self.loss(&mut tape, inst, emb)?;
        Ok(tape.value(l)[0])
    }

    /// Loss value and the branch pattern of its forward pass.
    pub fn loss_with_pattern(&self, inst: &Instance, emb: &EmbeddingTable) -> Result<(f64, Vec<bool>)> {
        let mut tape = Tape::new();
        let l = self.loss(&mut tape, inst, emb)?;
        Ok((tape.value(l)[0], tape.branch_pattern()))
    }

    /// Accumulates gradients of one instance's loss into the parameters.
    pub fn accumulate_gradients(&mut self, inst: &Instance, emb: &EmbeddingTable) -> Result<f64> {
        let mut tape = Tape::new();
        let l = self.loss(&mut tape, inst, emb)?;
        let value = tape.value(l)[0];
        tape.backward(l, &mut self.store)?;
        Ok(value)
    }

    /// One SGD-with-momentum update on a single instance; returns its loss.
    pub fn train_step(&mut self, inst: &Instance, emb: &EmbeddingTable, opt: &SgdMomentum) -> Result<f64> {
        let loss = self.accumulate_gradients(inst, emb)?;
        opt.step(&mut self.store)?;
        Ok(loss)
    }

    /// Greedy prediction with `inst.base` as the base form.
    pub fn predict(&self, inst: &Instance, emb: &EmbeddingTable) -> Result<Prediction> {
        let mut tape = Tape::new();
        let (_, o) = self.encode(&mut tape, inst, emb)?;
        let base = self.base_symbols(&inst.base)?;
        let g = generate_on_tape(
            &mut tape,
            &self.store,
            &self.layout.decoder,
            &base,
            o,
            self.max_len(&inst.base),
        )?;
        Ok(Prediction {
            form: self.alphabet.decode(&g.symbols)?,
            truncated: g.truncated,
        })
    }

    /// The context vector `o` for external analysis.
    pub fn context_vector(&self, inst: &Instance, emb: &EmbeddingTable) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (_, o) = self.encode(&mut tape, inst, emb)?;
        Ok(tape.value(o).to_vec())
    }

    /// Fusion activations `t`, which are non-negative by construction.
    pub fn fused_hidden(&self, inst: &Instance, emb: &EmbeddingTable) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let (t, _) = self.encode(&mut tape, inst, emb)?;
        Ok(tape.value(t).to_vec())
    }
}
