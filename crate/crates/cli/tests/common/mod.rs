#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, Mutex};
use std::thread;

use kalmv::pipeline::MockScript;
use kalmv::verifier::Verdict;

pub fn kalmv() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kalmv"));
    for var in ["KALMV_LM_URL", "KALMV_VERIFIER_URL", "KALMV_EMBED_URL", "KALMV_API_KEY"] {
        c.env_remove(var);
    }
    c
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p
}

pub fn passage(id: &str, text: &str) -> String {
    serde_json::json!({"doc_id": id, "title": "", "text": text}).to_string() + "\n"
}

pub fn question(id: &str, q: &str, answers: &[&str]) -> String {
    serde_json::json!({"id": id, "question": q, "answers": answers}).to_string() + "\n"
}

pub const GM_Q: &str = "who sang the song good morning good morning?";
pub const GM_K: &str = "Good Morning Call";
pub const HC_Q: &str = "what is the hot coffee mod in san andreas?";
pub const HC_K: &str = "Hot Coffee is a normally inaccessible mini-game in the 2004 video game Grand Theft Auto: San Andreas, developed by Rockstar North. Public awareness of the existence of the mini-game arrived with the release of the Hot Coffee mod, created for the Microsoft Windows port of GTA: San Andreas in 2005. This mod enables access to the mini-game.";
pub const DM_Q: &str = "who is the lead singer of depeche mode?";
pub const DM_K: &str = "David Gahan (born David Callcott; 9 May 1962) is an English singer-songwriter, best known as the baritone lead singer of the electronic band Depeche Mode since their debut in 1980. He is also a successful solo artist, releasing albums in 2003 (Paper Monsters) and 2007 (Hourglass).";

/// The three case-study rows: corpus, dataset, and a mock that answers each
/// question from its own passage.
pub fn table5(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let corpus = [passage("gm", GM_K), passage("hc", HC_K), passage("dm", DM_K)].concat();
    let dataset = [
        question("gm", GM_Q, &["Gene Kelly", "Donald O'Connor", "Judy Garland", "Debbie Reynolds", "Mickey Rooney"]),
        question("hc", HC_Q, &["a normally inaccessible mini-game"]),
        question("dm", DM_Q, &["David Gahan"]),
    ]
    .concat();
    let mut s = MockScript::new();
    s.answer(GM_Q, Some(GM_K), 0, "The Beatles")
        .answer(HC_Q, Some(HC_K), 0, "enables access to the mini-game")
        .answer(DM_Q, Some(DM_K), 0, "David Gahan");
    s.verdict(GM_Q, GM_K, "The Beatles", 0, Verdict::RetrievalError).unwrap();
    s.verdict(HC_Q, HC_K, "enables access to the mini-game", 0, Verdict::GroundingError).unwrap();
    s.verdict(DM_Q, DM_K, "David Gahan", 0, Verdict::Correct).unwrap();
    (write(dir, "corpus.jsonl", &corpus), write(dir, "dataset.jsonl", &dataset), write(dir, "mock.jsonl", &s.to_jsonl()))
}

pub fn index(dir: &Path, corpus: &Path) -> PathBuf {
    let idx = dir.join("index.json");
    let o = run(kalmv().args(["index", "--corpus"]).arg(corpus).arg("--index").arg(&idx));
    assert!(o.status.success(), "{}", stderr(&o));
    idx
}

#[derive(Debug, Clone)]
pub struct Request {
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Request {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }
}

/// Minimal HTTP/1.1 server answering each request through `reply`, which
/// gets the request and its 0-based arrival index.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Request>>>,
}

impl MockServer {
    pub fn start<F>(reply: F) -> Self
    where
        F: Fn(&Request, usize) -> (u16, String) + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let log = requests.clone();
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    continue;
                }
                let path = line.split_whitespace().nth(1).unwrap_or("").to_owned();
                let mut headers = Vec::new();
                let mut len = 0;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                        headers.push((k.trim().to_owned(), v.trim().to_owned()));
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let req = Request { path, headers, body: String::from_utf8(body).unwrap() };
                let n = {
                    let mut l = log.lock().unwrap();
                    l.push(req.clone());
                    l.len() - 1
                };
                let (status, payload) = reply(&req, n);
                let resp = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                let _ = stream.write_all(resp.as_bytes());
            }
        });
        Self { url, requests }
    }

    pub fn requests(&self) -> Vec<Request> {
        self.requests.lock().unwrap().clone()
    }
}
