//! End-to-end client behaviour against a live in-process HTTP server:
//! caching, retries, and failure modes.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use valcon_core::client::{Client, ItemRef, ModelEndpoint, ProbeSpec, RetryPolicy, UseCase};
use valcon_core::dataset::{Choice, Country, Language, QuestionItem, Stance};

fn item() -> QuestionItem {
    QuestionItem {
        topic_id: "t0".into(),
        question_id: "q0".into(),
        canonical_text: "Should bikes be allowed downtown?".into(),
        paraphrases: vec!["Should bikes be allowed downtown?".into()],
        choices: vec![
            Choice { text: "yes".into(), stance: Stance::Supports },
            Choice { text: "no".into(), stance: Stance::Opposes },
        ],
        language: Language::Eng,
        country: Country::US,
        controversial: false,
        translated: false,
    }
}

fn spec(use_case: UseCase) -> ProbeSpec {
    ProbeSpec {
        item: ItemRef { topic_id: "t0".into(), question_id: "q0".into() },
        paraphrase_index: 0,
        use_case,
        language: Language::Eng,
        abstain_enabled: false,
        order_seed: 42,
        value_condition: None,
        context_statement: None,
        in_context_example: false,
    }
}

/// A canned chat-completion reply with first-token logprobs.
fn mc_reply_json() -> String {
    serde_json::json!({
        "choices": [{
            "message": {"role": "assistant", "content": "A"},
            "logprobs": {"content": [{
                "token": "A",
                "logprob": -0.105,
                "top_logprobs": [
                    {"token": " A", "logprob": -0.105},
                    {"token": " B", "logprob": -2.303}
                ]
            }]}
        }]
    })
    .to_string()
}

struct CannedServer {
    server: Arc<tiny_http::Server>,
    hits: Arc<AtomicUsize>,
    handle: Option<std::thread::JoinHandle<()>>,
    pub base_url: String,
}

impl CannedServer {
    /// Serve `replies` in order (status, body), repeating the last one.
    fn start(replies: Vec<(u16, String)>) -> CannedServer {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind"));
        let port = match server.server_addr() {
            tiny_http::ListenAddr::IP(addr) => addr.port(),
            _ => unreachable!("tcp listener"),
        };
        let hits = Arc::new(AtomicUsize::new(0));
        let handle = {
            let server = server.clone();
            let hits = hits.clone();
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let mut body = String::new();
                    let _ = request.as_reader().read_to_string(&mut body);
                    let i = hits.fetch_add(1, Ordering::SeqCst);
                    let (status, reply) = replies[i.min(replies.len() - 1)].clone();
                    let response = tiny_http::Response::from_string(reply)
                        .with_status_code(status)
                        .with_header(
                            "Content-Type: application/json".parse::<tiny_http::Header>().unwrap(),
                        );
                    let _ = request.respond(response);
                }
            })
        };
        CannedServer { server, hits, handle: Some(handle), base_url: format!("http://127.0.0.1:{port}/v1") }
    }

    fn endpoint(&self) -> ModelEndpoint {
        ModelEndpoint {
            base_url: self.base_url.clone(),
            model_name: "canned".into(),
            auth_token_env: None,
            max_concurrent: 2,
            request_timeout_secs: 5,
            supports_logprobs: true,
        }
    }

    fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for CannedServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn fast_retry() -> RetryPolicy {
    RetryPolicy { max_attempts: 3, base_delay_ms: 1 }
}

#[test]
fn repeated_probe_makes_exactly_one_network_request() {
    let server = CannedServer::start(vec![(200, mc_reply_json())]);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("log.jsonl")).unwrap().with_retry(fast_retry());
    let item = item();
    let endpoint = server.endpoint();

    let first = client.probe(&endpoint, &spec(UseCase::MultipleChoice), &item).unwrap();
    let second = client.probe(&endpoint, &spec(UseCase::MultipleChoice), &item).unwrap();
    assert_eq!(server.hits(), 1, "second probe must come from the cache");
    assert_eq!(
        serde_json::to_string(&first).unwrap(),
        serde_json::to_string(&second).unwrap(),
        "replayed record must be byte-identical"
    );

    let p_yes = first
        .option_probs
        .as_ref()
        .unwrap()
        .prob_of(if first.option_probs.as_ref().unwrap().labels()[0] == "yes" { "yes" } else { "no" })
        .unwrap();
    assert!((p_yes - 0.9).abs() < 1e-3);
}

#[test]
fn cache_survives_reopening_the_log() {
    let server = CannedServer::start(vec![(200, mc_reply_json())]);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let item = item();
    let endpoint = server.endpoint();

    let first = {
        let client = Client::open(&path).unwrap().with_retry(fast_retry());
        client.probe(&endpoint, &spec(UseCase::MultipleChoice), &item).unwrap()
    };
    let client = Client::open(&path).unwrap().with_retry(fast_retry());
    let second = client.probe(&endpoint, &spec(UseCase::MultipleChoice), &item).unwrap();
    assert_eq!(server.hits(), 1);
    assert_eq!(first, second);
}

#[test]
fn transient_server_errors_are_retried_with_backoff() {
    let server = CannedServer::start(vec![
        (500, "oops".into()),
        (503, "busy".into()),
        (200, mc_reply_json()),
    ]);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("log.jsonl")).unwrap().with_retry(fast_retry());
    let record = client.probe(&server.endpoint(), &spec(UseCase::MultipleChoice), &item()).unwrap();
    assert_eq!(server.hits(), 3);
    assert!(record.option_probs.is_some());
}

#[test]
fn client_errors_fail_without_retry() {
    let server = CannedServer::start(vec![(400, "bad request".into())]);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("log.jsonl")).unwrap().with_retry(fast_retry());
    let err = client.probe(&server.endpoint(), &spec(UseCase::MultipleChoice), &item()).unwrap_err();
    assert_eq!(server.hits(), 1, "4xx must not be retried");
    let text = err.to_string();
    assert!(text.contains("400"), "{text}");
}

#[test]
fn exhausted_retries_surface_a_network_error() {
    let server = CannedServer::start(vec![(500, "oops".into())]);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("log.jsonl")).unwrap().with_retry(fast_retry());
    let err = client.probe(&server.endpoint(), &spec(UseCase::MultipleChoice), &item()).unwrap_err();
    assert_eq!(server.hits(), 3);
    assert!(err.to_string().contains("after 3 attempt(s)"), "{err}");
}

#[test]
fn open_ended_probe_returns_the_generation() {
    let reply = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": "Arguments on both sides."}}]
    })
    .to_string();
    let server = CannedServer::start(vec![(200, reply)]);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("log.jsonl")).unwrap().with_retry(fast_retry());
    let record = client.probe(&server.endpoint(), &spec(UseCase::OpenEnded), &item()).unwrap();
    assert_eq!(record.generation.as_deref(), Some("Arguments on both sides."));
    assert!(record.option_probs.is_none());
    assert_eq!(record.none_mass, 0.0);
}

#[test]
fn missing_logprobs_in_reply_is_an_error() {
    let reply = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": "A"}}]
    })
    .to_string();
    let server = CannedServer::start(vec![(200, reply)]);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("log.jsonl")).unwrap().with_retry(fast_retry());
    let err = client.probe(&server.endpoint(), &spec(UseCase::MultipleChoice), &item()).unwrap_err();
    assert!(err.to_string().contains("no top-k logprobs"), "{err}");
}

#[test]
fn endpoints_without_logprob_support_are_rejected_for_mc() {
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("log.jsonl")).unwrap();
    let endpoint = ModelEndpoint {
        base_url: "http://127.0.0.1:1/v1".into(),
        model_name: "no-logprobs".into(),
        auth_token_env: None,
        max_concurrent: 1,
        request_timeout_secs: 1,
        supports_logprobs: false,
    };
    let err = client.probe(&endpoint, &spec(UseCase::MultipleChoice), &item()).unwrap_err();
    assert!(err.to_string().contains("does not support logprobs"), "{err}");
}

#[test]
fn bearer_token_env_is_required_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("log.jsonl")).unwrap();
    let endpoint = ModelEndpoint {
        base_url: "http://127.0.0.1:1/v1".into(),
        model_name: "m".into(),
        auth_token_env: Some("VALCON_TEST_TOKEN_THAT_IS_NOT_SET".into()),
        max_concurrent: 1,
        request_timeout_secs: 1,
        supports_logprobs: true,
    };
    let err = client.probe(&endpoint, &spec(UseCase::MultipleChoice), &item()).unwrap_err();
    assert!(err.to_string().contains("VALCON_TEST_TOKEN_THAT_IS_NOT_SET"), "{err}");
}

#[test]
fn probe_many_preserves_input_order_and_caches() {
    let server = CannedServer::start(vec![(200, mc_reply_json())]);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("log.jsonl")).unwrap().with_retry(fast_retry());
    let item = item();
    let specs: Vec<ProbeSpec> = (0..6)
        .map(|i| {
            let mut s = spec(UseCase::MultipleChoice);
            s.order_seed = i;
            s
        })
        .collect();
    let work: Vec<(ProbeSpec, &QuestionItem)> = specs.iter().map(|s| (s.clone(), &item)).collect();
    let results = client.probe_many(&server.endpoint(), &work);
    assert_eq!(results.len(), 6);
    for (i, result) in results.iter().enumerate() {
        let record = result.as_ref().expect("probe succeeds");
        assert_eq!(record.probe.order_seed, i as u64, "results must be in input order");
    }
    // Distinct seeds can coincide in prompt text only when the shuffle
    // lands identically; all six must at least be served.
    assert!(server.hits() >= 1 && server.hits() <= 6);
    // A second pass is fully cached.
    let before = server.hits();
    let _ = client.probe_many(&server.endpoint(), &work);
    assert_eq!(server.hits(), before);
}
