use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use predtext::complete::{simulate_corpus, CompletionOptions};
use predtext::corpus::{encode_all, Document, KbTuple, Vocabulary};
use predtext::lm::{save_model, train, Ablation, LanguageModel, ModelConfig, Variant};
use predtext::service::ModelRegistry;
use predtext_cli::http::router;

fn vocab() -> Vocabulary {
    let words = [
        "the",
        "lv",
        "is",
        "non",
        "normal",
        "mildly",
        "moderately",
        "severely",
        "dilated",
        ".",
        "ef",
        "<num>",
        "<unk>",
        "<eos>",
    ];
    Vocabulary::from_entries(words.map(str::to_owned).to_vec()).unwrap()
}

fn small_model(variant: Variant, seed: u64) -> LanguageModel {
    let mut config = ModelConfig::for_variant(variant);
    config.dim = 6;
    config.seed = seed;
    config.value_scale = 0.02;
    LanguageModel::new(config, vocab()).unwrap()
}

fn registry() -> ModelRegistry {
    let mut r = ModelRegistry::new();
    for v in Variant::ALL {
        r.insert(v.name(), small_model(v, 3));
    }
    r
}

async fn call(registry: ModelRegistry, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json").body(body).unwrap();
    let resp = router(registry).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn predict_returns_ranked_words() {
    let body = json!({"model_id": "c+g", "context_tokens": ["the", "lv"], "kb": [{"attribute": "lv_ef", "value": 35}], "k": 3});
    let (status, v) = call(registry(), "POST", "/v1/predict", Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let s = v["suggestions"].as_array().unwrap();
    assert_eq!(s.len(), 3);
    for (i, item) in s.iter().enumerate() {
        assert_eq!(item["rank"], i + 1);
        assert!(!item["word"].as_str().unwrap().starts_with('<'));
    }
    assert!(s[0]["probability"].as_f64() >= s[1]["probability"].as_f64());
    assert_eq!(v["ablation"], json!({"ignore_kb": false, "ignore_values": false}));
    let (_, again) = call(registry(), "POST", "/v1/predict", Some(body)).await;
    assert_eq!(again, v);
}

#[tokio::test]
async fn errors_carry_status_and_diagnostics() {
    let (status, v) = call(registry(), "POST", "/v1/predict", Some(json!({"model_id": "nope"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["kind"], "not_found");

    let (status, v) = call(registry(), "POST", "/v1/predict", Some(json!({"model_id": "baseline", "k": -1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"]["message"].as_str().unwrap().contains("invalid value"), "{v}");

    let (status, v) = call(registry(), "POST", "/v1/complete", Some(json!({"model_id": "baseline"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(v["error"]["message"].as_str().unwrap().contains("prefix"), "{v}");

    let body = json!({"model_id": "baseline", "prefix": ""});
    let (status, _) = call(registry(), "POST", "/v1/complete", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn complete_matches_prefixes() {
    let body = json!({"model_id": "baseline", "context_tokens": ["the"], "prefix": "sev"});
    let (status, v) = call(registry(), "POST", "/v1/complete", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["suggestion"], "severely");
    assert!(v["probability"].as_f64().unwrap() > 0.0);

    let body = json!({"model_id": "baseline", "prefix": "q"});
    let (_, v) = call(registry(), "POST", "/v1/complete", Some(body)).await;
    assert_eq!((v["suggestion"].clone(), v["probability"].clone()), (Value::Null, Value::Null));
}

#[tokio::test]
async fn substitution_rows_renormalize() {
    let body = json!({
        "model_id": "c+g",
        "tokens": ["the", "ef", "is", "35", "severely", "."],
        "kb": [{"attribute": "lv_ef", "value": 35}],
        "numeric_slots": [{"attribute": "lv_ef", "position": 3}],
        "slot": 4,
        "candidates": ["non", "mildly", "severely"],
        "configurations": [
            {"label": "low", "values": {"lv_ef": 31.5}},
            {"label": "high", "values": {"lv_ef": 66.5}}
        ]
    });
    let (status, v) = call(registry(), "POST", "/v1/substitution", Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    for row in v["rows"].as_array().unwrap() {
        let sum: f64 = row["doc_probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    let mut ablated = body.clone();
    ablated["ablation"] = json!({"ignore_values": true});
    let (_, v) = call(registry(), "POST", "/v1/substitution", Some(ablated)).await;
    assert_eq!(v["rows"][0]["doc_probs"], v["rows"][1]["doc_probs"]);

    let mut oov = body;
    oov["candidates"] = json!(["markedly"]);
    let (status, _) = call(registry(), "POST", "/v1/substitution", Some(oov)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn models_lists_variants_from_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let (status, v) = call(ModelRegistry::load_dir(dir.path()).unwrap(), "GET", "/v1/models", None).await;
    assert_eq!((status, v), (StatusCode::OK, json!([])));

    for variant in Variant::ALL {
        save_model(&small_model(variant, 1), &dir.path().join(format!("{}.ptlm", variant.name()))).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    let (_, v) = call(ModelRegistry::load_dir(dir.path()).unwrap(), "GET", "/v1/models", None).await;
    let list = v.as_array().unwrap();
    assert_eq!(list.len(), 4);
    for entry in list {
        let variant: Variant = entry["model_id"].as_str().unwrap().parse().unwrap();
        assert_eq!(entry["conditional"], variant.conditional());
        assert_eq!(entry["grounded"], variant.grounded());
        assert_eq!(entry["variant"], variant.name());
        assert_eq!(entry["vocab_size"], 14);
    }
}

fn train_docs() -> Vec<Document> {
    [
        ("a", "the lv is non dilated .", 50.0),
        ("b", "the lv is mildly dilated .", 60.0),
        ("c", "the lv is moderately dilated .", 64.0),
        ("d", "the lv is severely dilated .", 68.0),
        ("e", "the lv is normal .", 45.0),
    ]
    .iter()
    .map(|(id, text, v)| Document::from_text(id, text, vec![KbTuple::number("lvidd", *v)]))
    .collect()
}

/// A client that replays each document through `/v1/complete`, accepting as
/// soon as the suggestion is the intended word, types exactly as many keys
/// as the offline simulator.
#[tokio::test]
async fn scripted_client_matches_the_simulator() {
    let docs = encode_all(&train_docs(), &vocab());
    let mut config = ModelConfig::for_variant(Variant::ConditionalGrounded);
    config.dim = 6;
    config.epochs = 30;
    config.minibatch = 1;
    config.value_scale = 0.02;
    let (model, _) = train(&config, &vocab(), &docs, &[]).unwrap();
    let offline = simulate_corpus(&model, &docs, Ablation::NONE, CompletionOptions::default()).unwrap();
    assert!(offline.tally.accept_events > 0 && offline.tally.distraction_chars > 0, "{:?}", offline.tally);
    let mut registry = ModelRegistry::new();
    registry.insert("m", model);

    let mut typed = 0u64;
    let mut accepted = 0u64;
    let mut distraction = 0u64;
    for doc in &docs {
        typed += doc.len() as u64 - 1;
        for (i, token) in doc.tokens.iter().enumerate() {
            let context: Vec<&str> = doc.tokens[..i].iter().map(|t| t.surface.as_str()).collect();
            let word: Vec<char> = token.surface.chars().collect();
            let mut done = false;
            for n in 1..=word.len() {
                let prefix: String = word[..n].iter().collect();
                let body = json!({"model_id": "m", "context_tokens": context, "kb": doc.kb, "prefix": prefix});
                let (_, v) = call(registry.clone(), "POST", "/v1/complete", Some(body)).await;
                let Some(s) = v["suggestion"].as_str() else { break };
                let suffix = (s.chars().count() - n) as u64;
                if s == token.surface {
                    typed += n as u64;
                    accepted += suffix;
                    done = true;
                    break;
                }
                distraction += suffix;
            }
            if !done {
                typed += word.len() as u64;
            }
        }
    }
    assert_eq!(typed, offline.tally.typed_keys);
    assert_eq!(accepted, offline.tally.accepted_chars);
    assert_eq!(distraction, offline.tally.distraction_chars);
}
