//! Loss and gradient of one document by backpropagation through time.

use super::config::Ablation;
use super::model::{LanguageModel, Weights};
use crate::corpus::EncodedDocument;
use crate::numgrad::{cross_entropy, softmax_in_place, LstmCache, LstmParams, Tensor2};

struct Pass {
    ids: Vec<usize>,
    caches: Vec<LstmCache>,
}

impl LanguageModel {
    fn run_lstm(&self, lstm: &LstmParams, embed: &Tensor2, doc_tokens: &[&crate::corpus::Token], h0: &[f64]) -> Pass {
        let d = self.dim();
        let mut caches: Vec<LstmCache> = Vec::with_capacity(doc_tokens.len());
        let mut x = Vec::with_capacity(self.input_dim());
        let zeros = vec![0.0; d];
        for (s, token) in doc_tokens.iter().enumerate() {
            self.input_into(embed, token, Ablation::NONE, &mut x);
            let (h, c) = match s {
                0 => (h0, zeros.as_slice()),
                _ => (caches[s - 1].h.as_slice(), caches[s - 1].c.as_slice()),
            };
            let cache = lstm.forward(&x, h, c);
            caches.push(cache);
        }
        Pass { ids: doc_tokens.iter().map(|t| t.vocab_id as usize).collect(), caches }
    }

    /// Backward through a recorded LSTM pass given the per-step hidden
    /// gradients from above (`dh_out[s]`, may be empty for "none") and the
    /// gradient on the final hidden state. Returns the gradient on `h0`.
    #[allow(clippy::too_many_arguments)]
    fn backprop_lstm(
        &self,
        lstm: &LstmParams,
        pass: &Pass,
        dh_out: &[Vec<f64>],
        dh_final: &[f64],
        lstm_grads: &mut LstmParams,
        embed_grads: &mut Tensor2,
    ) -> Vec<f64> {
        let d = self.dim();
        let limit = self.config.bptt_limit;
        let mut dh_next = dh_final.to_vec();
        let mut dc_next = vec![0.0; d];
        let mut dx = vec![0.0; self.input_dim()];
        let (mut dh_prev, mut dc_prev) = (vec![0.0; d], vec![0.0; d]);
        for s in (0..pass.caches.len()).rev() {
            if let Some(extra) = dh_out.get(s) {
                for (a, b) in dh_next.iter_mut().zip(extra) {
                    *a += b;
                }
            }
            lstm.backward(&pass.caches[s], &dh_next, &dc_next, lstm_grads, &mut dx, &mut dh_prev, &mut dc_prev);
            for (g, v) in embed_grads.row_mut(pass.ids[s]).iter_mut().zip(&dx[..d]) {
                *g += v;
            }
            if s > 0 && s % limit == 0 {
                dh_prev.fill(0.0);
                dc_prev.fill(0.0);
            }
            std::mem::swap(&mut dh_next, &mut dh_prev);
            std::mem::swap(&mut dc_next, &mut dc_prev);
        }
        dh_next
    }

    /// Summed cross-entropy of `doc` (closing `<eos>` included); gradients
    /// are added into `grads`.
    pub fn loss_and_grad(&self, doc: &EncodedDocument, grads: &mut Weights) -> f64 {
        let d = self.dim();
        let w = &self.weights;

        // Encoder over the lexicalized KB.
        let kb_tokens = if w.encoder.is_some() { self.kb_tokens(&doc.kb) } else { Vec::new() };
        let kb_refs: Vec<_> = kb_tokens.iter().collect();
        let enc_pass = w.encoder.as_ref().map(|enc| self.run_lstm(enc, w.encoder_embedding(), &kb_refs, &vec![0.0; d]));
        let h0 = enc_pass.as_ref().and_then(|p| p.caches.last()).map_or_else(|| vec![0.0; d], |c| c.h.clone());

        // Decoder, teacher-forced from the BOS marker.
        let bos = self.vocab.bos();
        let inputs: Vec<_> = std::iter::once(&bos).chain(doc.tokens.iter()).collect();
        let dec_pass = self.run_lstm(&w.decoder, &w.embed_in, &inputs, &h0);

        let mut loss = 0.0;
        let mut dh_out = Vec::with_capacity(inputs.len());
        for (s, cache) in dec_pass.caches.iter().enumerate() {
            let target = self.target_at(doc, s);
            let mut dlogits = w.embed_out.matvec(&cache.h);
            softmax_in_place(&mut dlogits);
            loss += cross_entropy(&dlogits, target);
            dlogits[target] -= 1.0;
            grads.embed_out.add_outer(&dlogits, &cache.h);
            let mut dh = vec![0.0; d];
            w.embed_out.matvec_t_acc(&dlogits, &mut dh);
            dh_out.push(dh);
        }

        let zeros = vec![0.0; d];
        let dh0 = self.backprop_lstm(&w.decoder, &dec_pass, &dh_out, &zeros, &mut grads.decoder, &mut grads.embed_in);

        if let (Some(enc), Some(pass)) = (&w.encoder, &enc_pass) {
            let enc_grads = grads.encoder.as_mut().expect("gradient buffer has an encoder");
            let embed_grads = match grads.encoder_embed.as_mut() {
                Some(e) => e,
                None => &mut grads.embed_in,
            };
            self.backprop_lstm(enc, pass, &[], &dh0, enc_grads, embed_grads);
        }
        loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, Document, KbTuple};
    use crate::lm::ModelConfig;
    use crate::numgrad::gradient_check;

    fn setup(conditional: bool, grounded: bool, bptt_limit: usize, share: bool) -> (LanguageModel, EncodedDocument) {
        let train = [Document::from_text("t", "the ef is 55 % and the lv is mildly dilated .", Vec::new())];
        let vocab = build_vocabulary(&train, 20).unwrap();
        let config = ModelConfig {
            dim: 5,
            conditional,
            grounded,
            bptt_limit,
            share_embeddings: share,
            value_scale: 0.1,
            init_scale: 0.3,
            seed: 4,
            ..Default::default()
        };
        let model = LanguageModel::new(config, vocab.clone()).unwrap();
        let doc = Document::from_text(
            "d",
            "the lv is 61 mildly dilated 7.5 zebra .",
            vec![KbTuple::number("ef", 41.0), KbTuple::text("lv", "mildly"), KbTuple::missing("x")],
        )
        .encode(&vocab);
        (model, doc)
    }

    fn check(model: &LanguageModel, doc: &EncodedDocument) {
        let mut grads = model.weights.zeros_like();
        let loss = model.loss_and_grad(doc, &mut grads);
        assert!((loss - model.sequence_nll(doc, Ablation::NONE).unwrap().0).abs() < 1e-10);
        let mut probe = model.clone();
        let report = gradient_check(
            &model.weights.flatten(),
            &grads.flatten(),
            |p| {
                probe.weights.assign_flat(p);
                probe.sequence_nll(doc, Ablation::NONE).unwrap().0
            },
            1e-5,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn all_variants_match_finite_differences() {
        for (c, g) in [(false, false), (true, false), (false, true), (true, true)] {
            let (model, doc) = setup(c, g, 256, true);
            check(&model, &doc);
        }
    }

    #[test]
    fn unshared_encoder_embeddings() {
        let (model, doc) = setup(true, true, 256, false);
        assert!(model.weights.encoder_embed.is_some());
        check(&model, &doc);
    }

    #[test]
    fn truncation_blocks_gradient_across_segments() {
        let (model, doc) = setup(true, false, 3, true);
        let mut truncated = model.weights.zeros_like();
        model.loss_and_grad(&doc, &mut truncated);
        let (full_model, _) = setup(true, false, 256, true);
        let mut full = full_model.weights.zeros_like();
        full_model.loss_and_grad(&doc, &mut full);
        assert_ne!(truncated.flatten(), full.flatten());
        // the output layer sees no recurrence, so it is unaffected
        assert_eq!(truncated.embed_out, full.embed_out);
    }
}
