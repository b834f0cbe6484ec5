//! The remote scorer against an in-process mock server.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;
use std::thread;

use subgoal_core::decode::{beam_search, BeamConfig};
use subgoal_core::grammar::{build_prefix_trie, ActionType, Catalog, Subgoal, SubgoalSequence};
use subgoal_core::lm::{LmError, LogprobRequest, LogprobResponse, RemoteModel, TokenModel, UniformModel};
use subgoal_core::tokenize::{Tokenizer, WordTokenizer};

type Handler = dyn Fn(LogprobRequest) -> (u16, String) + Send + Sync;

/// Serves `handler` on a free local port; returns the endpoint URL.
fn serve(handler: Arc<Handler>) -> String {
    let server = tiny_http::Server::http("127.0.0.1:0").expect("bind");
    let port = server.server_addr().to_ip().expect("ip listener").port();
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            let mut body = String::new();
            req.as_reader().read_to_string(&mut body).unwrap();
            let (code, text) = match serde_json::from_str::<LogprobRequest>(&body) {
                Ok(r) => handler(r),
                Err(e) => (400, e.to_string()),
            };
            let _ = req.respond(tiny_http::Response::from_string(text).with_status_code(code));
        }
    });
    format!("http://127.0.0.1:{port}/logprobs")
}

fn uniform_server(vocab: Vec<String>) -> String {
    serve(Arc::new(move |r: LogprobRequest| {
        if r.top_k > vocab.len() {
            return (422, format!("top_k {} exceeds vocabulary of {}", r.top_k, vocab.len()));
        }
        let lp = -(vocab.len() as f64).ln();
        let resp = LogprobResponse {
            logprobs: vocab.iter().map(|t| (t.clone(), lp)).collect(),
            deterministic: true,
        };
        (200, serde_json::to_string(&resp).unwrap())
    }))
}

fn small_grammar() -> (Catalog, Vec<ActionType>, Vec<String>) {
    let cat = Catalog::builtin().subset(&["apple", "fridge", "desklamp"]).unwrap();
    let actions = vec![ActionType::Pickup, ActionType::Put, ActionType::ToggleOn];
    let mut vocab: BTreeSet<String> = [",", "."].iter().map(|s| s.to_string()).collect();
    for &a in &actions {
        for o in cat.iter() {
            let text = SubgoalSequence::new(vec![Subgoal::new(a, o.clone())]).to_string();
            vocab.extend(WordTokenizer.encode(&text));
        }
    }
    (cat, actions, vocab.into_iter().collect())
}

#[test]
fn uniform_mock_matches_local_uniform_bit_for_bit() {
    let (cat, actions, vocab) = small_grammar();
    let remote = RemoteModel::new(uniform_server(vocab.clone()), 0);
    let local = UniformModel::new(vocab);
    let trie = build_prefix_trie(&cat, &actions, &WordTokenizer).unwrap();
    let cfg = BeamConfig {
        beam_size: 12,
        max_subgoals: 3,
        ..BeamConfig::default()
    };
    let prompt = "turn on the lamp = ";
    let a = beam_search(&remote, prompt, &trie, &cfg).unwrap();
    let b = beam_search(&local, prompt, &trie, &cfg).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.tokens, y.tokens);
        assert_eq!(x.logp_forward.to_bits(), y.logp_forward.to_bits());
    }
    assert!(remote.is_deterministic());
}

#[test]
fn cache_hit_issues_no_request() {
    let (_, _, vocab) = small_grammar();
    let remote = RemoteModel::new(uniform_server(vocab), 0);
    let first = remote.next_logprobs(&["pick", "up"]).unwrap();
    assert_eq!(remote.request_count(), 1);
    let second = remote.next_logprobs(&["pick", "up"]).unwrap();
    assert_eq!(remote.request_count(), 1);
    assert_eq!(first, second);
    remote.next_logprobs(&["pick"]).unwrap();
    assert_eq!(remote.request_count(), 2);
}

#[test]
fn top_k_beyond_vocabulary_is_malformed() {
    let (_, _, vocab) = small_grammar();
    let n = vocab.len();
    let remote = RemoteModel::new(uniform_server(vocab), n + 1);
    assert!(matches!(remote.next_logprobs(&["pick"]), Err(LmError::MalformedResponse(_))));
    let ok = RemoteModel::new(remote.endpoint().to_string(), n);
    assert_eq!(ok.next_logprobs(&["pick"]).unwrap().len(), n);
}

#[test]
fn bad_replies_are_classified() {
    let garbage = serve(Arc::new(|_| (200, "not json".to_string())));
    assert!(matches!(RemoteModel::new(garbage, 0).next_logprobs(&[]), Err(LmError::MalformedResponse(_))));

    let positive = serve(Arc::new(|_| (200, r#"{"logprobs":{"a":0.5}}"#.to_string())));
    assert!(matches!(RemoteModel::new(positive, 0).next_logprobs(&[]), Err(LmError::MalformedResponse(_))));

    let too_many = serve(Arc::new(|_| (200, r#"{"logprobs":{"a":-0.7,"b":-0.7}}"#.to_string())));
    assert!(matches!(RemoteModel::new(too_many, 1).next_logprobs(&[]), Err(LmError::MalformedResponse(_))));

    let subword = serve(Arc::new(|_| (200, r#"{"logprobs":{"pick up":-0.1}}"#.to_string())));
    assert!(matches!(RemoteModel::new(subword, 0).next_logprobs(&[]), Err(LmError::ServerVocabMismatch(_))));

    let nondet = serve(Arc::new(|_| (200, r#"{"logprobs":{"a":0.0},"deterministic":false}"#.to_string())));
    let m = RemoteModel::new(nondet, 0);
    assert_eq!(m.next_logprobs(&[]).unwrap().to_map(), HashMap::from([("a".to_string(), 0.0)]));
    assert!(!m.is_deterministic());
}

#[test]
fn unreachable_endpoint_is_transport() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let m = RemoteModel::new(format!("http://127.0.0.1:{port}/"), 0);
    assert!(matches!(m.next_logprobs(&["x"]), Err(LmError::Transport(_))));
}
