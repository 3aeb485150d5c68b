use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::time::Duration;

use super::wire::{decode_response, WireRequest};
use super::*;
use crate::assertion::{canonicalize_heap, PredicateRegistry};
use crate::entailment::Prover;
use crate::frontend::{parse_assertion, parse_file};

const DEFS: &str = "
predicate listrep(x) = x == 0 && emp || exists z, x->tail == z * listrep(z);
predicate lseg(x, y) = x == y && emp || exists z, x->tail == z * lseg(z, y);
";

const CHAIN: [&str; 6] = [
    "w == 0 && v == p && listrep(p)",
    "v == t && w == p && w->tail == 0 && listrep(v)",
    "v == t && w->tail == p && p->tail == 0 && listrep(v)",
    "exists __1, v == t && p->tail == 0 && w->tail == __1 && __1->tail == p && listrep(v)",
    "exists __1 __2, w->tail == __1 && __1->tail == __2 && __2->tail == p && v == t && p->tail == 0 && listrep(v)",
    "exists __1 __2 __3, w->tail == __1 && __1->tail == __2 && __2->tail == __3 && __3->tail == p && v == t && p->tail == 0 && listrep(v)",
];

fn reg() -> PredicateRegistry {
    parse_file(DEFS).unwrap().0
}

fn heap(r: &PredicateRegistry, s: &str) -> SymbolicHeap {
    parse_assertion(s, r).unwrap().disjuncts.remove(0)
}

fn request(r: &PredicateRegistry, xs: &[&str]) -> InferenceRequest {
    InferenceRequest::new(xs.iter().map(|s| parse_assertion(s, r).unwrap()).collect(), vec![], 0)
}

#[test]
fn segment_tops_the_chain() {
    let r = reg();
    let b = HeuristicBackend::new(r.clone()).unwrap();
    let lseg = canonicalize_heap(&heap(&r, "lseg(w,p)"));
    for range in [1..6, 0..4, 0..6] {
        let got = b.candidates(&request(&r, &CHAIN[range.clone()]));
        assert_eq!(got[0].conjunct, lseg, "{range:?}: {:?}", got.iter().take(3).map(|c| c.conjunct.to_string()).collect::<Vec<_>>());
    }
}

#[test]
fn every_candidate_applies_somewhere() {
    let r = reg();
    let b = HeuristicBackend::new(r.clone()).unwrap();
    let req = request(&r, &CHAIN[0..4]);
    let p = Prover::new(&r).unwrap();
    for c in b.candidates(&req) {
        assert!(req.assertions.iter().any(|a| p.frame_check(a, &c.conjunct).is_some()), "{}", c.conjunct);
    }
}

#[test]
fn banned_candidates_are_filtered() {
    let r = reg();
    let b = HeuristicBackend::new(r.clone()).unwrap();
    let mut req = request(&r, &CHAIN[1..6]);
    req.banned = vec![heap(&r, "lseg(w, p)")];
    let got = infer(&b, &req).unwrap();
    assert!(got.iter().all(|c| c.conjunct.to_string() != "lseg(w,p)"));
    assert!(!got.is_empty());
}

#[test]
fn identical_assertions_give_their_spatial_part() {
    let r = reg();
    let b = HeuristicBackend::new(r.clone()).unwrap();
    let s = "x->tail == 0 && listrep(y)";
    let got = b.candidates(&request(&r, &[s, s, s]));
    assert_eq!(got[0].conjunct, canonicalize_heap(&heap(&r, s)));
}

#[test]
fn empty_heap_yields_nothing() {
    let r = reg();
    let b = HeuristicBackend::new(r.clone()).unwrap();
    assert!(b.candidates(&request(&r, &["emp"])).is_empty());
}

#[test]
fn heuristic_is_deterministic() {
    let r = reg();
    let b = HeuristicBackend::new(r.clone()).unwrap();
    let req = request(&r, &CHAIN);
    assert_eq!(b.candidates(&req), b.candidates(&req));
}

#[test]
fn invalid_candidates_are_counted() {
    let r = reg();
    let body = r#"{"candidates": [{"conjunct": "lseg(w,", "score": 2.0}, {"conjunct": "lseg(w,p)", "score": 1.0}], "version": 1}"#;
    let d = decode_response(body, &r).unwrap();
    assert_eq!(d.candidates.len(), 1);
    assert_eq!(d.warnings, 1);
    let bad = r#"{"candidates": [{"conjunct": "nope(", "score": 1.0}], "version": 1}"#;
    assert!(matches!(decode_response(bad, &r), Err(InferenceError::AllInvalid(1))));
    assert!(matches!(decode_response("{}", &r), Err(InferenceError::Malformed(_))));
}

#[test]
fn request_serialization_is_exact() {
    let r = reg();
    let mut req = request(&r, &["x == 0 && emp"]);
    req.banned = vec![heap(&r, "lseg(w,p)")];
    req.max_candidates = 3;
    assert_eq!(
        WireRequest::from_request(&req).to_json(),
        r#"{"assertions":["x == 0 && emp"],"banned":["lseg(w,p)"],"max_candidates":3}"#
    );
}

/// Answers every POST with `reply`; returns the base URL.
fn echo_server(reply: &'static str) -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = l.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in l.incoming() {
            let Ok(mut s) = stream else { continue };
            let mut reader = BufReader::new(s.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let resp = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                reply.len(),
                reply
            );
            s.write_all(resp.as_bytes()).unwrap();
        }
    });
    format!("http://{addr}")
}

#[test]
fn http_backend_round_trip() {
    let r = reg();
    let url = echo_server(r#"{"candidates":[{"conjunct":"lseg(w,p)","score":1.0}],"version":1}"#);
    let b = HttpBackend::new(&url, r.clone(), Duration::from_secs(5));
    let got = infer(&b, &request(&r, &CHAIN[1..3])).unwrap();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].conjunct.to_string(), "lseg(w,p)");
}

#[test]
fn unreachable_endpoint_fails_fast() {
    let r = reg();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let b = HttpBackend::new(&format!("http://127.0.0.1:{port}"), r.clone(), Duration::from_secs(2));
    let t = std::time::Instant::now();
    assert!(b.infer(&request(&r, &["emp"])).is_err());
    assert!(t.elapsed() < Duration::from_secs(3));
}

#[test]
fn subprocess_backend_round_trip_and_timeout() {
    let r = reg();
    let dir = std::env::temp_dir().join(format!("sepinv-sub-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let ok = dir.join("echo.sh");
    std::fs::write(
        &ok,
        "while read l; do echo '{\"candidates\":[{\"conjunct\":\"listrep(v)\",\"score\":0.5}],\"version\":1}'; done\n",
    )
    .unwrap();
    let b = SubprocessBackend::new(&format!("sh {}", ok.display()), r.clone(), Duration::from_secs(5));
    for _ in 0..2 {
        let got = b.infer(&request(&r, &["listrep(v)"])).unwrap();
        assert_eq!(got[0].conjunct.to_string(), "listrep(v)");
    }
    let slow = dir.join("slow.sh");
    std::fs::write(&slow, "while read l; do sleep 5; done\n").unwrap();
    let b = SubprocessBackend::new(&format!("sh {}", slow.display()), r.clone(), Duration::from_millis(300));
    assert!(matches!(b.infer(&request(&r, &["emp"])), Err(InferenceError::Timeout(300))));
}
