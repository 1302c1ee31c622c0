use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use predtext::complete::{simulate_corpus, CompletionOptions};
use predtext::corpus::{build_vocabulary, encode_all, generate_corpus, EncodedDocument, GeneratorConfig, Vocabulary};
use predtext::lm::{Ablation, LanguageModel, ModelConfig, Trainer, Variant};
use predtext::numgrad::LstmParams;

fn corpus(n: usize) -> (Vocabulary, Vec<EncodedDocument>) {
    let split = generate_corpus(&GeneratorConfig { n_documents: n, ..Default::default() }, 1).unwrap();
    let vocab = build_vocabulary(&split.train, 1000).unwrap();
    let docs = encode_all(&split.train, &vocab);
    (vocab, docs)
}

fn model(variant: Variant, vocab: &Vocabulary) -> LanguageModel {
    LanguageModel::new(ModelConfig::for_variant(variant), vocab.clone()).unwrap()
}

fn lstm_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cell = LstmParams::init(51, 50, 0.08, &mut rng);
    let x = vec![0.1; 51];
    let h = vec![0.0; 50];
    c.bench_function("lstm_step_d50", |b| b.iter(|| cell.step(black_box(&x), &h, &h).unwrap()));
}

fn model_step(c: &mut Criterion) {
    let (vocab, docs) = corpus(50);
    let m = model(Variant::ConditionalGrounded, &vocab);
    let doc = &docs[0];
    let state = m.init_state(&doc.kb, Ablation::NONE);
    c.bench_function("model_step_c+g", |b| {
        b.iter(|| m.step(&state, black_box(&doc.tokens[0]), Ablation::NONE).unwrap())
    });
}

fn completion(c: &mut Criterion) {
    let (vocab, docs) = corpus(50);
    let m = model(Variant::ConditionalGrounded, &vocab);
    let docs = &docs[..10];
    c.bench_function("simulate_10_docs", |b| {
        b.iter(|| simulate_corpus(&m, black_box(docs), Ablation::NONE, CompletionOptions::default()).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let (vocab, docs) = corpus(50);
    let docs = &docs[..20];
    let mut group = c.benchmark_group("epoch_20_docs");
    group.sample_size(10);
    for variant in [Variant::Baseline, Variant::ConditionalGrounded] {
        let mut trainer = Trainer::new(model(variant, &vocab)).unwrap();
        group.bench_function(variant.name(), |b| b.iter(|| trainer.epoch(black_box(docs)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, lstm_step, model_step, completion, training);
criterion_main!(benches);
