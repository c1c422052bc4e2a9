//! Generation pipeline against a scripted mock generator: parsing,
//! filtering, drop accounting, translation, and cache-replay determinism.

use valcon_core::client::Client;
use valcon_core::dataset::{Country, Language, Stance};
use valcon_core::genpipeline::{
    answers_prompt, bias_context_prompt, paraphrases_prompt, questions_prompt, run_generation,
    topic_filter_prompt, topics_prompt, with_attempt, AnswerOutcome, DropReason, FilterVerdict,
    GenError, GenerationJob, Generator, TopicSpec,
};
use valcon_core::simulator::{serve_scripted, MockServer, ScriptedReply};

fn job(server: &MockServer) -> GenerationJob {
    GenerationJob {
        country: Country::US,
        language: Language::Eng,
        controversial: true,
        n_topics: 2,
        n_questions_per_topic: 2,
        n_paraphrases: 2,
        generator: server.endpoint("mock-generator"),
        target_translation_languages: vec![],
    }
}

fn placeholder_job() -> GenerationJob {
    GenerationJob {
        country: Country::US,
        language: Language::Eng,
        controversial: true,
        n_topics: 2,
        n_questions_per_topic: 2,
        n_paraphrases: 2,
        generator: valcon_core::client::ModelEndpoint {
            base_url: "http://127.0.0.1:9/v1".into(),
            model_name: "mock-generator".into(),
            auth_token_env: None,
            max_concurrent: 1,
            request_timeout_secs: 5,
            supports_logprobs: false,
        },
        target_translation_languages: vec![],
    }
}

fn topic(name: &str, description: &str) -> TopicSpec {
    TopicSpec { name: name.to_string(), description: description.to_string() }
}

/// The full happy-path script: two topics, two questions each, one
/// question judged off-topic, one declared open-ended, paraphrases with a
/// duplicate of the canonical wording.
fn scripted_run() -> (MockServer, GenerationJob) {
    // The prompts the pipeline will send are deterministic, so the script
    // can key on them exactly.
    let j = placeholder_job();
    let t0 = topic("Taxes", "How taxation should work");
    let t1 = topic("Zoos", "Whether zoos should exist");
    let handler = move |prompt: &str| -> ScriptedReply {
        // Topics: three parsed, one a duplicate -> two usable.
        if prompt == topics_prompt(&j) {
            return ScriptedReply::Text(
                r#"Of course. [
                    {"name": "Taxes", "description": "How taxation should work"},
                    {"name": "taxes.", "description": "a duplicate"},
                    {"name": "Zoos", "description": "Whether zoos should exist"}
                ] Let me know if you need more."#
                    .into(),
            );
        }
        if prompt == questions_prompt(&t0, &j) {
            return ScriptedReply::Text(
                r#"["Should income tax rise?", "Should sales tax fall?"]"#.into(),
            );
        }
        if prompt == questions_prompt(&t1, &j) {
            return ScriptedReply::Text(
                r#"["Should zoos close?", "Is it ethical?"]"#.into(),
            );
        }
        // Filter: "Is it ethical?" is not recognizably about zoos.
        if prompt == topic_filter_prompt(&t1, "Is it ethical?") {
            return ScriptedReply::Text("False.".into());
        }
        if prompt.starts_with("Here is a question:") {
            return ScriptedReply::Text("true".into());
        }
        // Answers: "Should zoos close?" is declared open-ended.
        if prompt == answers_prompt(&t1, "Should zoos close?") {
            return ScriptedReply::Text("\"open-ended\"".into());
        }
        if prompt.starts_with("Consider this question") {
            return ScriptedReply::Text(
                r#"{"yes": "supports", "no": "opposes", "it depends": "neutral"}"#.into(),
            );
        }
        // Paraphrases: one echoes the canonical wording -> shortfall.
        if prompt == paraphrases_prompt("Should income tax rise?", 2, &j) {
            return ScriptedReply::Text(
                r#"["Should income tax rise?", "Is an income tax increase warranted?"]"#.into(),
            );
        }
        if prompt.starts_with("Rewrite this question") {
            return ScriptedReply::Text(
                r#"["Wording two?", "Wording three?"]"#.into(),
            );
        }
        ScriptedReply::Failure { status: 500, body: format!("unscripted prompt: {prompt}") }
    };
    let server = serve_scripted(handler).unwrap();
    let j = job(&server);
    (server, j)
}

#[test]
fn pipeline_assembles_a_valid_corpus_and_accounts_for_every_drop() {
    let (_server, j) = scripted_run();
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();

    let outcome = run_generation(&client, &j).unwrap();
    let corpus = &outcome.corpus;
    let report = &outcome.report;

    // Two topics, but zoos lost both questions (one filtered, one
    // open-ended); taxes kept both.
    assert_eq!(corpus.topics.len(), 2);
    assert_eq!(corpus.items.len(), 2);
    assert!(corpus.items.iter().all(|i| i.topic_id == "t0"));
    assert_eq!(corpus.items[0].question_id, "q0");
    assert_eq!(corpus.items[1].question_id, "q1");
    assert!(corpus.items.iter().all(|i| !i.translated && i.language == Language::Eng));
    assert!(corpus.items.iter().all(|i| i.controversial));
    assert_eq!(corpus.items[0].choices.len(), 3);
    assert!(corpus.items[0].choices.iter().any(|c| c.stance == Stance::Neutral));

    // The duplicated-canonical paraphrase was dropped: 1 + 1 wordings.
    assert_eq!(corpus.items[0].paraphrases.len(), 2);
    assert_eq!(corpus.items[0].paraphrases[0], "Should income tax rise?");
    // The clean question kept 1 + 2 wordings.
    assert_eq!(corpus.items[1].paraphrases.len(), 3);

    assert_eq!(report.requested_topics, 2);
    assert_eq!(report.emitted_topics, 2);
    assert_eq!(report.requested_questions, 4);
    assert_eq!(report.emitted_questions, 2);
    assert_eq!(report.count(DropReason::TopicMismatch), 1);
    assert_eq!(report.count(DropReason::OpenEndedQuestion), 1);
    assert_eq!(report.count(DropReason::ParaphraseShortfall), 1);
    assert!(report.reconciles(), "every requested unit must be accounted for");

    // The degraded item is exported for human review.
    assert_eq!(report.flagged.len(), 1);
    assert!(report.flagged[0].contains("only 1 of 2 paraphrases"));

    // Provenance names the generator and the templates used.
    assert_eq!(corpus.provenance.generator_model, "mock-generator");
    assert!(corpus.provenance.generated_at > 0);
    assert_eq!(corpus.provenance.prompt_versions["topics"], "1");
}

#[test]
fn rerunning_an_unchanged_job_is_byte_identical_and_offline() {
    let (server, j) = scripted_run();
    let dir = tempfile::tempdir().unwrap();

    let first = {
        let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
        run_generation(&client, &j).unwrap()
    };
    // The generator is gone; the cache must carry the rerun alone.
    drop(server);
    let second = {
        let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
        run_generation(&client, &j).unwrap()
    };
    let a = serde_json::to_string(&first.corpus).unwrap();
    let b = serde_json::to_string(&second.corpus).unwrap();
    assert_eq!(a, b, "cache replay must reproduce the corpus byte for byte");
    assert_eq!(first.report.events.len(), second.report.events.len());
}

#[test]
fn malformed_structured_replies_are_retried_then_fail_with_the_raw_reply() {
    let j = placeholder_job();
    let base = topics_prompt(&j);
    let second = with_attempt(&base, 2);
    let third = with_attempt(&base, 3);
    let server = serve_scripted(move |prompt| {
        if prompt == base || prompt == second {
            ScriptedReply::Text("I would rather chat about the weather.".into())
        } else if prompt == third {
            ScriptedReply::Text("still not a list, sorry".into())
        } else {
            ScriptedReply::Failure { status: 500, body: "unscripted".into() }
        }
    })
    .unwrap();
    let j = job(&server);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let mut gen = Generator::new(&client, &j).unwrap();

    let err = gen.generate_topics().unwrap_err();
    match err {
        GenError::MalformedReply { what, attempts, raw } => {
            assert_eq!(what, "topic list");
            assert_eq!(attempts, 3);
            assert_eq!(raw, "still not a list, sorry");
        }
        other => panic!("expected MalformedReply, got {other}"),
    }
}

#[test]
fn salvage_recovers_a_list_wrapped_in_prose_on_the_first_attempt() {
    let mut j = placeholder_job();
    j.n_topics = 1;
    let base = topics_prompt(&j);
    let server = serve_scripted(move |prompt| {
        if prompt == base {
            ScriptedReply::Text(
                "Happy to help! Here you go: [{\"name\": \"One\", \"description\": \"d\"}] anything else?"
                    .into(),
            )
        } else {
            ScriptedReply::Failure { status: 500, body: "unscripted".into() }
        }
    })
    .unwrap();
    let mut j = job(&server);
    j.n_topics = 1;
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let mut gen = Generator::new(&client, &j).unwrap();

    let (topics, events) = gen.generate_topics().unwrap();
    assert_eq!(topics.len(), 1);
    assert_eq!(topics[0].name, "One");
    assert!(events.is_empty());
}

#[test]
fn unparseable_filter_replies_drop_the_question_conservatively() {
    let t = topic("Taxes", "d");
    let base = topic_filter_prompt(&t, "Should taxes rise?");
    let server = serve_scripted(move |prompt| {
        if prompt.starts_with(&base) || prompt.starts_with("Here is a question:") {
            ScriptedReply::Text("It depends on many things.".into())
        } else {
            ScriptedReply::Failure { status: 500, body: "unscripted".into() }
        }
    })
    .unwrap();
    let j = job(&server);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let mut gen = Generator::new(&client, &j).unwrap();

    let verdict = gen.topic_match_filter(&t, "Should taxes rise?").unwrap();
    assert_eq!(verdict, FilterVerdict::Unparseable);
    assert!(gen.notes.iter().any(|n| n.contains("dropped conservatively")));
}

#[test]
fn one_sided_answer_sets_are_reported_not_emitted() {
    let t = topic("Taxes", "d");
    let server = serve_scripted(move |prompt| {
        if prompt.starts_with("Consider this question") {
            ScriptedReply::Text(r#"{"yes": "supports", "maybe": "neutral"}"#.into())
        } else {
            ScriptedReply::Failure { status: 500, body: "unscripted".into() }
        }
    })
    .unwrap();
    let j = job(&server);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let mut gen = Generator::new(&client, &j).unwrap();

    match gen.generate_answers(&t, "Should taxes rise?").unwrap() {
        AnswerOutcome::OneSided(choices) => assert_eq!(choices.len(), 2),
        other => panic!("expected OneSided, got {other:?}"),
    }
}

#[test]
fn stance_labels_outside_the_vocabulary_are_an_error() {
    let t = topic("Taxes", "d");
    let server = serve_scripted(move |prompt| {
        if prompt.starts_with("Consider this question") {
            ScriptedReply::Text(r#"{"yes": "agrees", "no": "opposes"}"#.into())
        } else {
            ScriptedReply::Failure { status: 500, body: "unscripted".into() }
        }
    })
    .unwrap();
    let j = job(&server);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let mut gen = Generator::new(&client, &j).unwrap();

    let err = gen.generate_answers(&t, "Should taxes rise?").unwrap_err();
    assert!(matches!(err, GenError::UnknownStance { .. }), "got {err}");
}

#[test]
fn empty_question_lists_are_an_error() {
    let t = topic("Taxes", "d");
    let server = serve_scripted(move |prompt| {
        if prompt.starts_with("Write ") {
            ScriptedReply::Text("[]".into())
        } else {
            ScriptedReply::Failure { status: 500, body: "unscripted".into() }
        }
    })
    .unwrap();
    let j = job(&server);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let mut gen = Generator::new(&client, &j).unwrap();

    let err = gen.generate_questions(&t).unwrap_err();
    assert!(matches!(err, GenError::EmptyReply { what: "question" }), "got {err}");
}

#[test]
fn translation_preserves_structure_and_flags() {
    let (server, j) = scripted_run();
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let base = run_generation(&client, &j).unwrap().corpus;
    drop(server);

    // An echoing translator: returns the array unchanged.
    let echo = serve_scripted(|prompt| {
        if let Some(json_start) = prompt.find('\n') {
            ScriptedReply::Text(prompt[json_start + 1..].to_string())
        } else {
            ScriptedReply::Failure { status: 400, body: "no payload".into() }
        }
    })
    .unwrap();
    let mut j2 = j.clone();
    j2.generator = echo.endpoint("mock-generator");
    let client2 = Client::open(dir.path().join("translate.jsonl")).unwrap();
    let mut gen = Generator::new(&client2, &j2).unwrap();

    let translated = gen.translate_corpus(&base, Language::Ger).unwrap();
    assert_eq!(translated.items.len(), base.items.len());
    for (t, b) in translated.items.iter().zip(&base.items) {
        assert_eq!(t.topic_id, b.topic_id);
        assert_eq!(t.question_id, b.question_id);
        assert_eq!(t.language, Language::Ger);
        assert!(t.translated);
        // Identity translation: texts equal, stance codes identical.
        assert_eq!(t.canonical_text, b.canonical_text);
        assert_eq!(t.paraphrases, b.paraphrases);
        assert_eq!(t.choices.len(), b.choices.len());
        for (tc, bc) in t.choices.iter().zip(&b.choices) {
            assert_eq!(tc.stance, bc.stance);
            assert_eq!(tc.text, bc.text);
        }
    }
}

#[test]
fn translation_length_mismatch_is_an_error() {
    let (server, j) = scripted_run();
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let base = run_generation(&client, &j).unwrap().corpus;
    drop(server);

    // A lossy translator: drops the last entry of every batch.
    let lossy = serve_scripted(|prompt| {
        let payload = &prompt[prompt.find('\n').unwrap() + 1..];
        let mut texts: Vec<String> = serde_json::from_str(payload).unwrap();
        texts.pop();
        ScriptedReply::Text(serde_json::to_string(&texts).unwrap())
    })
    .unwrap();
    let mut j2 = j.clone();
    j2.generator = lossy.endpoint("mock-generator");
    let client2 = Client::open(dir.path().join("translate.jsonl")).unwrap();
    let mut gen = Generator::new(&client2, &j2).unwrap();

    let err = gen.translate_corpus(&base, Language::Jpn).unwrap_err();
    assert!(matches!(err, GenError::TranslationShape { .. }), "got {err}");
}

#[test]
fn bias_context_is_one_sentence_or_an_error() {
    let question = "Should taxes rise?";
    let server = serve_scripted(move |prompt| {
        if prompt == bias_context_prompt(question, "yes") {
            ScriptedReply::Text(
                "Public services are underfunded. Also, roads have potholes.".into(),
            )
        } else if prompt == bias_context_prompt(question, "no") {
            ScriptedReply::Text("   ".into())
        } else {
            ScriptedReply::Failure { status: 500, body: "unscripted".into() }
        }
    })
    .unwrap();
    let j = job(&server);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let mut gen = Generator::new(&client, &j).unwrap();

    let context = gen.generate_bias_context(question, "yes").unwrap();
    assert_eq!(context, "Public services are underfunded.");
    assert!(gen.notes.iter().any(|n| n.contains("truncated")));

    let err = gen.generate_bias_context(question, "no").unwrap_err();
    assert!(matches!(err, GenError::EmptyContext), "got {err}");
}

#[test]
fn generator_http_failures_surface_as_network_errors() {
    let server = serve_scripted(|_prompt| ScriptedReply::Failure {
        status: 400,
        body: "generator rejected the request".into(),
    })
    .unwrap();
    let j = job(&server);
    let dir = tempfile::tempdir().unwrap();
    let client = Client::open(dir.path().join("gen.jsonl")).unwrap();
    let mut gen = Generator::new(&client, &j).unwrap();

    let err = gen.generate_topics().unwrap_err();
    let message = err.to_string();
    assert!(message.contains("400"), "HTTP failure should carry its status: {message}");
}
