//! Model parameters and inference.
//!
//! Every variant shares one decoder: an LSTM whose input at each position
//! is the input embedding of the current token, followed by the token's
//! numeric value when the model is grounded. The next-word distribution is
//! `softmax(E_out · h)`. Conditional models first run an encoder LSTM over
//! the lexicalized knowledge base and copy its final hidden state into the
//! decoder's initial `h`; the decoder's initial cell state stays zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Ablation, ModelConfig};
use crate::corpus::{lexicalize_kb, EncodedDocument, KbTuple, Token, Vocabulary};
use crate::error::{Error, Result};
use crate::numgrad::{cross_entropy, softmax_in_place, LstmParams, Tensor1, Tensor2};

/// Trainable parameters. `embed_in` and `embed_out` hold one row of width
/// `D` per vocabulary entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Weights {
    pub embed_in: Tensor2,
    pub embed_out: Tensor2,
    pub decoder: LstmParams,
    pub encoder: Option<LstmParams>,
    /// Encoder input embeddings when they are not shared with the decoder.
    pub encoder_embed: Option<Tensor2>,
}

/// A named parameter array, as written to checkpoints.
pub struct NamedArray<'a> {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

impl Weights {
    pub fn init(config: &ModelConfig, vocab_size: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (d, s) = (config.dim, config.init_scale);
        let d_in = d + usize::from(config.grounded);
        let embed_in = Tensor2::uniform(vocab_size, d, s, &mut rng);
        let embed_out = Tensor2::uniform(vocab_size, d, s, &mut rng);
        let decoder = LstmParams::init(d_in, d, s, &mut rng);
        let encoder = config.conditional.then(|| LstmParams::init(d_in, d, s, &mut rng));
        let encoder_embed =
            (config.conditional && !config.share_embeddings).then(|| Tensor2::uniform(vocab_size, d, s, &mut rng));
        Self { embed_in, embed_out, decoder, encoder, encoder_embed }
    }

    pub fn zeros_like(&self) -> Self {
        let zero_lstm = |p: &LstmParams| LstmParams::zeros(p.input_dim, p.hidden_dim);
        let zero_mat = |m: &Tensor2| Tensor2::zeros(m.rows(), m.cols());
        Self {
            embed_in: zero_mat(&self.embed_in),
            embed_out: zero_mat(&self.embed_out),
            decoder: zero_lstm(&self.decoder),
            encoder: self.encoder.as_ref().map(zero_lstm),
            encoder_embed: self.encoder_embed.as_ref().map(zero_mat),
        }
    }

    /// Parameter arrays in declaration order.
    pub fn arrays(&self) -> Vec<NamedArray<'_>> {
        let mut out = vec![
            NamedArray { name: "embed_in", shape: self.embed_in.shape().to_vec(), data: self.embed_in.as_slice() },
            NamedArray { name: "embed_out", shape: self.embed_out.shape().to_vec(), data: self.embed_out.as_slice() },
            NamedArray {
                name: "decoder.weights",
                shape: self.decoder.weights.shape().to_vec(),
                data: self.decoder.weights.as_slice(),
            },
            NamedArray { name: "decoder.bias", shape: vec![self.decoder.bias.len()], data: &self.decoder.bias },
        ];
        if let Some(enc) = &self.encoder {
            out.push(NamedArray {
                name: "encoder.weights",
                shape: enc.weights.shape().to_vec(),
                data: enc.weights.as_slice(),
            });
            out.push(NamedArray { name: "encoder.bias", shape: vec![enc.bias.len()], data: &enc.bias });
        }
        if let Some(e) = &self.encoder_embed {
            out.push(NamedArray { name: "encoder.embed", shape: e.shape().to_vec(), data: e.as_slice() });
        }
        out
    }

    /// Mutable views of the arrays, in the same order as [`Weights::arrays`].
    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.embed_in.as_mut_slice(),
            self.embed_out.as_mut_slice(),
            self.decoder.weights.as_mut_slice(),
            &mut self.decoder.bias,
        ];
        if let Some(enc) = &mut self.encoder {
            out.push(enc.weights.as_mut_slice());
            out.push(&mut enc.bias);
        }
        if let Some(e) = &mut self.encoder_embed {
            out.push(e.as_mut_slice());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.arrays().iter().map(|a| a.data.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.arrays().iter().flat_map(|a| a.data.iter().copied()).collect()
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for array in self.arrays_mut() {
            let n = array.len();
            array.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        assert_eq!(offset, flat.len(), "flat parameter vector length");
    }

    pub fn fill_zero(&mut self) {
        for array in self.arrays_mut() {
            array.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.data.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn encoder_embedding(&self) -> &Tensor2 {
        self.encoder_embed.as_ref().unwrap_or(&self.embed_in)
    }
}

/// Decoder recurrent state.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeState {
    pub h: Tensor1,
    pub c: Tensor1,
}

impl DecodeState {
    pub fn zeros(dim: usize) -> Self {
        Self { h: Tensor1::zeros(dim), c: Tensor1::zeros(dim) }
    }
}

/// The grounding feature of a token: its pre-masking numeric value, or 0
/// when absent or ablated.
pub fn numeric_feature(token: &Token, ablation: Ablation) -> f64 {
    match token.numeric_value {
        Some(v) if !ablation.ignore_values => v,
        _ => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanguageModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub weights: Weights,
}

impl LanguageModel {
    /// Freshly initialized model.
    pub fn new(config: ModelConfig, vocab: Vocabulary) -> Result<Self> {
        config.validate()?;
        let weights = Weights::init(&config, vocab.len());
        Ok(Self { config, vocab, weights })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn input_dim(&self) -> usize {
        self.config.dim + usize::from(self.config.grounded)
    }

    /// Writes the network input for `token` into `out`.
    pub(crate) fn input_into(&self, embed: &Tensor2, token: &Token, ablation: Ablation, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(embed.row(token.vocab_id as usize));
        if self.config.grounded {
            out.push(numeric_feature(token, ablation) * self.config.value_scale);
        }
    }

    pub(crate) fn kb_tokens(&self, kb: &[KbTuple]) -> Vec<Token> {
        lexicalize_kb(kb).iter().map(|s| self.vocab.encode(s)).collect()
    }

    /// Initial decoder state: the encoder's final hidden state for
    /// conditional models, zeros otherwise or under `ignore_kb`.
    pub fn init_state(&self, kb: &[KbTuple], ablation: Ablation) -> DecodeState {
        let mut state = DecodeState::zeros(self.dim());
        let Some(encoder) = self.weights.encoder.as_ref().filter(|_| !ablation.ignore_kb) else {
            return state;
        };
        let embed = self.weights.encoder_embedding();
        let mut c = Tensor1::zeros(self.dim());
        let mut x = Vec::with_capacity(self.input_dim());
        for token in self.kb_tokens(kb) {
            self.input_into(embed, &token, ablation, &mut x);
            let cache = encoder.forward(&x, &state.h, &c);
            state.h = Tensor1(cache.h);
            c = Tensor1(cache.c);
        }
        state
    }

    /// Rejects documents whose scaled numeric features overflow.
    pub(crate) fn check_inputs(&self, doc: &EncodedDocument) -> Result<()> {
        if !self.config.grounded {
            return Ok(());
        }
        let kb = self.kb_tokens(&doc.kb);
        for token in doc.tokens.iter().chain(&kb) {
            let x = numeric_feature(token, Ablation::NONE) * self.config.value_scale;
            if !x.is_finite() {
                return Err(Error::NonFinite(format!(
                    "value {:?} in document {} scales to {x}",
                    token.surface, doc.id
                )));
            }
        }
        Ok(())
    }

    fn check_token(&self, token: &Token) -> Result<()> {
        if (token.vocab_id as usize) < self.vocab.len() {
            Ok(())
        } else {
            Err(Error::VocabMismatch(format!(
                "token id {} outside a vocabulary of {}",
                token.vocab_id,
                self.vocab.len()
            )))
        }
    }

    /// Feeds one token through the decoder, updating `state` in place.
    pub fn advance(&self, state: &mut DecodeState, token: &Token, ablation: Ablation) -> Result<()> {
        self.check_token(token)?;
        let mut x = Vec::with_capacity(self.input_dim());
        self.input_into(&self.weights.embed_in, token, ablation, &mut x);
        let cache = self.weights.decoder.forward(&x, &state.h, &state.c);
        state.h = Tensor1(cache.h);
        state.c = Tensor1(cache.c);
        Ok(())
    }

    /// Next-word distribution `softmax(E_out · h)`.
    pub fn distribution(&self, state: &DecodeState) -> Vec<f64> {
        let mut logits = self.weights.embed_out.matvec(&state.h);
        softmax_in_place(&mut logits);
        logits
    }

    /// Consumes `token` and returns the new state with the distribution over
    /// the token that follows it.
    pub fn step(&self, state: &DecodeState, token: &Token, ablation: Ablation) -> Result<(DecodeState, Vec<f64>)> {
        let mut next = state.clone();
        self.advance(&mut next, token, ablation)?;
        let dist = self.distribution(&next);
        Ok((next, dist))
    }

    /// State after the beginning-of-document marker and `context`; its
    /// distribution predicts the token following the context.
    pub fn state_after(&self, kb: &[KbTuple], context: &[Token], ablation: Ablation) -> Result<DecodeState> {
        let mut state = self.init_state(kb, ablation);
        self.advance(&mut state, &self.vocab.bos(), ablation)?;
        for token in context {
            self.advance(&mut state, token, ablation)?;
        }
        Ok(state)
    }

    /// Teacher-forced pass over `doc`. `visit(position, dist)` sees the
    /// distribution for the token at `position`; position `doc.len()` is the
    /// closing `<eos>`.
    pub fn teacher_forced<F>(&self, doc: &EncodedDocument, ablation: Ablation, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &[f64]),
    {
        let mut state = self.init_state(&doc.kb, ablation);
        let bos = self.vocab.bos();
        for position in 0..=doc.len() {
            let input = if position == 0 { &bos } else { &doc.tokens[position - 1] };
            self.advance(&mut state, input, ablation)?;
            visit(position, &self.distribution(&state));
        }
        Ok(())
    }

    /// Target id at `position` of a teacher-forced pass.
    pub fn target_at(&self, doc: &EncodedDocument, position: usize) -> usize {
        doc.tokens.get(position).map_or(self.vocab.eos_id(), |t| t.vocab_id) as usize
    }

    /// Summed cross-entropy over every position including the closing
    /// `<eos>`, and the number of positions. Empty documents give `(0, 0)`.
    pub fn sequence_nll(&self, doc: &EncodedDocument, ablation: Ablation) -> Result<(f64, usize)> {
        if doc.is_empty() {
            return Ok((0.0, 0));
        }
        let mut total = 0.0;
        let mut count = 0;
        self.teacher_forced(doc, ablation, |position, dist| {
            total += cross_entropy(dist, self.target_at(doc, position));
            count += 1;
        })?;
        Ok((total, count))
    }

    /// Per-position probabilities of the true tokens (closing `<eos>` last).
    pub fn token_probabilities(&self, doc: &EncodedDocument, ablation: Ablation) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(doc.len() + 1);
        self.teacher_forced(doc, ablation, |position, dist| out.push(dist[self.target_at(doc, position)]))?;
        Ok(out)
    }

    /// `exp(Σ nll / Σ positions)` over `docs`.
    pub fn perplexity(&self, docs: &[EncodedDocument], ablation: Ablation) -> Result<f64> {
        let (mut total, mut count) = (0.0, 0usize);
        for doc in docs {
            let (nll, n) = self.sequence_nll(doc, ablation)?;
            total += nll;
            count += n;
        }
        if count == 0 {
            return Err(Error::EmptyEvaluation("perplexity over zero tokens"));
        }
        Ok((total / count as f64).exp())
    }

    /// Log probability of the whole document (product of per-word
    /// probabilities, closing `<eos>` included).
    pub fn doc_log_probability(&self, doc: &EncodedDocument, ablation: Ablation) -> Result<f64> {
        Ok(-self.sequence_nll(doc, ablation)?.0)
    }
}
