use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;

use predtext::complete::{simulate_corpus, theoretical_bound, vocabulary_bound, write_events_csv};
use predtext::corpus::{
    build_vocabulary, encode_all, generate_corpus, load_documents, save_documents, Document, EncodedDocument,
    Vocabulary,
};
use predtext::lm::{load_model, load_model_for, save_model, system_label, to_bytes, train, LanguageModel};
use predtext::predict::{evaluate_prediction, write_records_csv};
use predtext::qualitative::{
    likelihood_ratio, substitution_study, suggestion_list, write_grid_csv, write_ratio_tsv, SubstitutionStudy,
};
use predtext::report::{
    BoundsReport, CompleteReport, CorpusReport, PredictReport, Report, ReportSet, TrainReport, SCHEMA_VERSION,
};
use predtext::{sha256_hex, write_atomic};

use crate::{Command, QualitativeCommand, RunConfig, Split};

pub const VOCAB_FILE: &str = "vocab.json";
pub const CORPUS_REPORT: &str = "corpus.json";

pub fn dispatch(config: &RunConfig, command: Command) -> Result<()> {
    match command {
        Command::GenCorpus { out } => gen_corpus(config, &out),
        Command::Train { corpus, out, report } => {
            let report = report.unwrap_or_else(|| out.with_extension("train.json"));
            train_model(config, &corpus, &out, &report)
        }
        Command::EvalPredict { corpus, model, split, report, records } => {
            eval_predict(config, &corpus, &model, split, report.as_deref(), records.as_deref())
        }
        Command::EvalComplete { corpus, model, split, report, events } => {
            eval_complete(config, &corpus, &model, split, report.as_deref(), events.as_deref())
        }
        Command::Bounds { corpus, split, report } => bounds(config, &corpus, split, report.as_deref()),
        Command::Qualitative { study } => qualitative(config, study),
        Command::Serve { models } => crate::http::serve(config, &models),
        Command::Interactive { model, kb, script } => crate::interactive::run(config, &model, kb.as_deref(), script),
        Command::Report { inputs, out } => report(&inputs, out.as_deref()),
    }
}

/// Writes `report` to `path` atomically, or to stdout.
fn emit(report: &Report, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => report.save(p).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", String::from_utf8(report.to_json()?)?);
            Ok(())
        }
    }
}

fn emit_json<T: serde::Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    match path {
        Some(p) => write_atomic(p, &bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", String::from_utf8(bytes)?);
            Ok(())
        }
    }
}

/// Renders into memory first so a failure never leaves a partial file.
fn emit_with<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> predtext::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    write_atomic(path, &buf).with_context(|| format!("writing {}", path.display()))
}

pub fn gen_corpus(config: &RunConfig, out: &Path) -> Result<()> {
    let split = generate_corpus(&config.generator, config.seed)?;
    let vocab = build_vocabulary(&split.train, config.model.vocab_budget)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for (s, docs) in [(Split::Train, &split.train), (Split::Dev, &split.dev), (Split::Test, &split.test)] {
        save_documents(&out.join(s.file_name()), docs)?;
    }
    vocab.save(&out.join(VOCAB_FILE))?;
    let report = Report::Corpus(CorpusReport {
        schema_version: SCHEMA_VERSION,
        seed: config.seed,
        generator: config.generator.clone(),
        n_train: split.train.len(),
        n_dev: split.dev.len(),
        n_test: split.test.len(),
        vocab_size: vocab.len(),
        vocab_sha256: vocab.sha256(),
    });
    info!(
        "{} train / {} dev / {} test documents, {} vocabulary entries",
        split.train.len(),
        split.dev.len(),
        split.test.len(),
        vocab.len()
    );
    emit(&report, Some(&out.join(CORPUS_REPORT)))
}

pub struct CorpusDir {
    pub path: PathBuf,
    pub vocab: Vocabulary,
}

impl CorpusDir {
    pub fn open(path: &Path) -> Result<Self> {
        let vocab_path = path.join(VOCAB_FILE);
        let vocab = Vocabulary::load(&vocab_path).with_context(|| format!("reading {}", vocab_path.display()))?;
        Ok(Self { path: path.to_owned(), vocab })
    }

    pub fn documents(&self, split: Split) -> Result<Vec<Document>> {
        let p = self.path.join(split.file_name());
        load_documents(&p).with_context(|| format!("reading {}", p.display()))
    }

    pub fn encoded(&self, split: Split) -> Result<Vec<EncodedDocument>> {
        Ok(encode_all(&self.documents(split)?, &self.vocab))
    }

    pub fn model(&self, path: &Path) -> Result<LanguageModel> {
        load_model_for(path, &self.vocab).with_context(|| format!("loading {}", path.display()))
    }
}

pub fn train_model(config: &RunConfig, corpus: &Path, out: &Path, report_path: &Path) -> Result<()> {
    let corpus = CorpusDir::open(corpus)?;
    let train_docs = corpus.encoded(Split::Train)?;
    let dev_docs = corpus.encoded(Split::Dev)?;
    info!("training {} on {} documents", config.model.variant().label(), train_docs.len());
    let (model, log) = train(&config.model, &corpus.vocab, &train_docs, &dev_docs)?;
    save_model(&model, out).with_context(|| format!("writing {}", out.display()))?;
    let report = Report::Train(TrainReport {
        schema_version: SCHEMA_VERSION,
        variant: model.config.variant(),
        seed: model.config.seed,
        config: model.config.clone(),
        vocab_sha256: corpus.vocab.sha256(),
        checkpoint_sha256: sha256_hex(&to_bytes(&model)?),
        n_train_docs: train_docs.len(),
        n_dev_docs: dev_docs.len(),
        log,
    });
    emit(&report, Some(report_path))
}

fn warn_inert(model: &LanguageModel, config: &RunConfig) {
    for flag in config.eval.ablation.inert_flags(model.config.variant()) {
        log::warn!("{flag} has no effect on a {} model", model.config.variant().name());
    }
}

pub fn eval_predict(
    config: &RunConfig,
    corpus: &Path,
    model: &Path,
    split: Split,
    report: Option<&Path>,
    records: Option<&Path>,
) -> Result<()> {
    let corpus = CorpusDir::open(corpus)?;
    let model = corpus.model(model)?;
    warn_inert(&model, config);
    let docs = corpus.encoded(split)?;
    let eval = evaluate_prediction(&model, &docs, config.eval.ablation, config.eval.oov_policy, &config.eval.ks)?;
    if let Some(path) = records {
        emit_with(path, |buf| write_records_csv(buf, &eval.records))?;
    }
    let variant = model.config.variant();
    let r = Report::Predict(PredictReport {
        schema_version: SCHEMA_VERSION,
        system: system_label(variant, config.eval.ablation),
        variant,
        ablation: config.eval.ablation,
        seed: model.config.seed,
        oov_policy: config.eval.oov_policy,
        n_docs: docs.len(),
        metrics: eval.metrics,
    });
    emit(&r, report)
}

pub fn eval_complete(
    config: &RunConfig,
    corpus: &Path,
    model: &Path,
    split: Split,
    report: Option<&Path>,
    events: Option<&Path>,
) -> Result<()> {
    let corpus = CorpusDir::open(corpus)?;
    let model = corpus.model(model)?;
    warn_inert(&model, config);
    let docs = corpus.encoded(split)?;
    let run = simulate_corpus(&model, &docs, config.eval.ablation, config.eval.completion())?;
    if let Some(path) = events {
        emit_with(path, |buf| write_events_csv(buf, &run.events))?;
    }
    let variant = model.config.variant();
    let r = Report::Complete(CompleteReport {
        schema_version: SCHEMA_VERSION,
        system: system_label(variant, config.eval.ablation),
        variant,
        ablation: config.eval.ablation,
        seed: model.config.seed,
        options: config.eval.completion(),
        n_docs: docs.len(),
        tally: run.tally,
        metrics: run.metrics,
    });
    emit(&r, report)
}

pub fn bounds(config: &RunConfig, corpus: &Path, split: Split, report: Option<&Path>) -> Result<()> {
    let corpus = CorpusDir::open(corpus)?;
    let docs = corpus.encoded(split)?;
    if docs.is_empty() {
        bail!("split {split:?} has no documents");
    }
    let options = config.eval.completion();
    let r = Report::Bounds(BoundsReport {
        schema_version: SCHEMA_VERSION,
        seed: config.seed,
        options,
        n_docs: docs.len(),
        vocab_sha256: corpus.vocab.sha256(),
        theoretical: theoretical_bound(&docs, options),
        vocabulary: vocabulary_bound(&docs, &corpus.vocab, options),
    });
    emit(&r, report)
}

fn find_doc<'a>(docs: &'a [Document], id: &str) -> Result<&'a Document> {
    docs.iter().find(|d| d.id == id).with_context(|| format!("no document with id {id:?}"))
}

fn qualitative(config: &RunConfig, study: QualitativeCommand) -> Result<()> {
    let ablation = config.eval.ablation;
    match study {
        QualitativeCommand::Suggest { corpus, model, split, doc, position, top, watch, out } => {
            let corpus = CorpusDir::open(&corpus)?;
            let model = corpus.model(&model)?;
            let docs = corpus.documents(split)?;
            let doc = find_doc(&docs, &doc)?.encode(&corpus.vocab);
            let list = suggestion_list(&model, &doc, position, top, &watch, ablation)?;
            emit_json(&list, out.as_deref())
        }
        QualitativeCommand::Substitution { model, study, out, csv } => {
            let model = load_model(&model).with_context(|| format!("loading {}", model.display()))?;
            let bytes = fs::read(&study).with_context(|| format!("reading {}", study.display()))?;
            let study: SubstitutionStudy =
                serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", study.display()))?;
            let grid = substitution_study(&model, &study, ablation)?;
            if let Some(path) = csv {
                emit_with(&path, |buf| write_grid_csv(buf, &grid))?;
            }
            emit_json(&grid, out.as_deref())
        }
        QualitativeCommand::Ratio { corpus, model_a, model_b, split, doc, ablation_b, out, tsv } => {
            let corpus = CorpusDir::open(&corpus)?;
            let a = corpus.model(&model_a)?;
            let b = corpus.model(&model_b)?;
            let docs = corpus.documents(split)?;
            let series = likelihood_ratio(&a, &b, find_doc(&docs, &doc)?, ablation, ablation_b)?;
            if let Some(path) = tsv {
                emit_with(&path, |buf| write_ratio_tsv(buf, &series))?;
            }
            emit_json(&series, out.as_deref())
        }
    }
}

fn collect_reports(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("reading {}", input.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            found.retain(|p| p.extension().is_some_and(|e| e == "json"));
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

pub fn report(inputs: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut set = ReportSet::default();
    for path in collect_reports(inputs)? {
        match Report::load(&path) {
            Ok(r) => set.add(r),
            // Directories may hold other JSON (e.g. qualitative grids).
            Err(e) if inputs.iter().all(|i| i != &path) => log::debug!("skipping {}: {e}", path.display()),
            Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
        }
    }
    if set.predict.is_empty() && set.complete.is_empty() && set.bounds.is_empty() {
        bail!("no prediction, completion or bounds reports among the inputs");
    }
    let text = set.render_text();
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("tables.txt"), text.as_bytes())?;
        let p = predtext::report::prediction_table(&set.predict);
        write_atomic(&dir.join("prediction.csv"), p.to_csv().as_bytes())?;
        let c = predtext::report::completion_table(&set.complete, &set.bounds);
        write_atomic(&dir.join("completion.csv"), c.to_csv().as_bytes())?;
    }
    Ok(())
}
