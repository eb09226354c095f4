#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

pub const BIN: &str = env!("CARGO_BIN_EXE_tutor-eval");

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Copies a fixture directory into a fresh temp dir.
pub fn stage(name: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(fixture_dir(name)).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            std::fs::copy(entry.path(), dir.path().join(entry.file_name())).unwrap();
        }
    }
    dir
}

pub fn command(dir: &Path, args: &[&str]) -> Command {
    let mut c = Command::new(BIN);
    c.args(args)
        .current_dir(dir)
        .env_remove("TUTOR_EVAL_ENDPOINT")
        .env_remove("TUTOR_EVAL_MODEL")
        .env("MOCK_JUDGE_KEY", "test-key");
    c
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    command(dir, args).output().unwrap()
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn summary(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("summary.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Every file under `dir` as (relative path, bytes), sorted.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Asserts two directories hold the same files with the same bytes,
/// skipping the named files.
pub fn assert_same_tree(a: &Path, b: &Path, skip: &[&str]) {
    let keep = |t: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
        t.into_iter().filter(|(n, _)| !skip.contains(&n.as_str())).collect()
    };
    let (ta, tb) = (keep(tree(a)), keep(tree(b)));
    let names = |t: &[(String, Vec<u8>)]| t.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    assert_eq!(names(&ta), names(&tb));
    for ((name, x), (_, y)) in ta.iter().zip(&tb) {
        assert!(x == y, "{name} differs");
    }
}

/// Reply a mock judge gives for a prompt. Pedagogy labels and sentence
/// verdicts are derived from the prompt text, so they are stable across runs.
pub fn mock_reply(prompt: &str) -> String {
    if let Some(start) = prompt.find("(numbered sentences)") {
        let end = prompt[start..].find("## After").map_or(prompt.len(), |e| start + e);
        let n = prompt[start..end]
            .lines()
            .filter(|l| l.starts_with('[') && l[1..].starts_with(|c: char| c.is_ascii_digit()))
            .count();
        let sentences: Vec<String> = (0..n)
            .map(|i| {
                let rel = (prompt.len() + i) % 3 != 0;
                if rel {
                    let succ = (prompt.len() + i) % 2;
                    format!(r#"{{"index":{i},"rel":1,"succ":{succ},"rationale":"edit follows it"}}"#)
                } else {
                    format!(r#"{{"index":{i},"rel":0,"succ":null,"rationale":""}}"#)
                }
            })
            .collect();
        format!(r#"{{"sentences":[{}]}}"#, sentences.join(","))
    } else {
        let dims = [
            "mistake_identification",
            "mistake_location",
            "revealing_answer",
            "providing_guidance",
            "actionability",
            "coherence",
            "tutor_tone",
            "humanness",
        ];
        let labels: Vec<String> = dims
            .iter()
            .enumerate()
            .map(|(i, d)| format!(r#""{d}":{}"#, 1 + (prompt.len() + i) % 3))
            .collect();
        format!("{{{}}}", labels.join(","))
    }
}

#[derive(Clone, Copy)]
pub enum MockMode {
    Ok,
    Unauthorized,
    ServerError,
}

pub struct MockServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
    pub auth_headers: Arc<std::sync::Mutex<Vec<String>>>,
}

/// A chat-completions endpoint on localhost answering with [`mock_reply`].
pub fn mock_server(mode: MockMode, delay: Duration) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let auth_headers = Arc::new(std::sync::Mutex::new(Vec::new()));
    let (r, a) = (requests.clone(), auth_headers.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let (r, a) = (r.clone(), a.clone());
            thread::spawn(move || handle(stream, mode, delay, &r, &a));
        }
    });
    MockServer { url, requests, auth_headers }
}

fn handle(
    mut stream: TcpStream,
    mode: MockMode,
    delay: Duration,
    requests: &AtomicUsize,
    auth: &std::sync::Mutex<Vec<String>>,
) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    loop {
        let mut len = 0usize;
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        loop {
            line.clear();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let l = line.trim_end();
            if l.is_empty() {
                break;
            }
            let lower = l.to_ascii_lowercase();
            if let Some(v) = lower.strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            if lower.starts_with("authorization:") {
                auth.lock().unwrap().push(l["authorization:".len()..].trim().to_string());
            }
        }
        let mut body = vec![0; len];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        requests.fetch_add(1, Ordering::SeqCst);
        thread::sleep(delay);
        let (status, payload) = match mode {
            MockMode::Unauthorized => ("401 Unauthorized", r#"{"error":"bad key"}"#.to_string()),
            MockMode::ServerError => ("503 Service Unavailable", r#"{"error":"busy"}"#.to_string()),
            MockMode::Ok => {
                let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
                let prompt = req["messages"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .filter(|m| m["role"] == "user")
                    .last()
                    .and_then(|m| m["content"].as_str())
                    .unwrap_or("")
                    .to_string();
                let reply = serde_json::json!({
                    "choices": [{"message": {"role": "assistant", "content": mock_reply(&prompt)}}]
                });
                ("200 OK", reply.to_string())
            }
        };
        let resp = format!(
            "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{payload}",
            payload.len()
        );
        if stream.write_all(resp.as_bytes()).is_err() {
            return;
        }
    }
}

/// A run.toml pointing at a remote endpoint, written into `dir`.
pub fn remote_config(dir: &Path, url: &str, parallelism: usize, max_retries: u32) -> PathBuf {
    let text = format!(
        r#"out_dir = "out"

[inputs]
submissions = "submissions.jsonl"
feedback = "feedback.jsonl"
ratings = "ratings.jsonl"

[judge]
backend = "remote"
endpoint = "{url}"
model = "mock-judge"
api_key_env = "MOCK_JUDGE_KEY"
parallelism = {parallelism}
max_retries = {max_retries}
backoff_ms = 1
"#
    );
    let path = dir.join("remote.toml");
    std::fs::write(&path, text).unwrap();
    path
}
