use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_semsearch");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SEMSEARCH_CONFIG").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn built(dir: &Path) -> String {
    let out = dir.join("art");
    let o = run(&["build", data("plants_athletes.nt").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.to_str().unwrap().to_string()
}

#[test]
fn build_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let art = built(dir.path());
    let names = ["idf.tsv", "similarity.tsv", "summary.txt", "keyword_index.tsv", "graph_index.tsv", "manifest.json"];
    let first: Vec<Vec<u8>> = names.iter().map(|n| fs::read(Path::new(&art).join(n)).unwrap()).collect();
    built(dir.path());
    let second: Vec<Vec<u8>> = names.iter().map(|n| fs::read(Path::new(&art).join(n)).unwrap()).collect();
    assert_eq!(first, second);
}

#[test]
fn build_errors_exit_with_usage_status() {
    let o = run(&["build", "/nonexistent/data.nt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no such dataset"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("semsearch.conf");
    fs::write(&cfg, "beta = 1.5\n").unwrap();
    let o = Command::new(BIN)
        .args(["build", data("plants_athletes.nt").to_str().unwrap(), "--out"])
        .arg(dir.path().join("art"))
        .env("SEMSEARCH_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("beta"), "{}", stderr(&o));

    fs::write(&cfg, "gamma = 0.5\n").unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "build", data("plants_athletes.nt").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gamma"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("semsearch.conf");
    fs::write(&cfg, "beta = 1.5\ntau = 0.8\n").unwrap();
    let art = dir.path().join("art");
    let o = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "build",
        data("plants_athletes.nt").to_str().unwrap(),
        "--beta",
        "0.2",
        "--out",
        art.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(art.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["beta"], 0.2);
    assert_eq!(manifest["config"]["tau"], 0.8);
}

#[test]
fn one_shot_query_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let art = built(dir.path());
    let o = run(&["query", "--artifacts", &art, "--json", "acacia"]);
    assert!(o.status.success());
    let lines: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let got: Vec<(&str, f64)> =
        lines.iter().map(|v| (v["iri"].as_str().unwrap(), v["confidence"].as_f64().unwrap())).collect();
    assert_eq!(got[0], ("http://example.org/Acacia", 1.0));
    assert_eq!(got[1].0, "http://example.org/Aloe");
    assert!((got[1].1 - 0.7661232468951775).abs() < 1e-9);
    assert_eq!(got[2].0, "http://example.org/Amaryllis");
    assert_eq!(got.len(), 3);
    assert_eq!(lines[1]["provenance"], "augmented");
    assert_eq!(lines[1]["via"], "http://example.org/Acacia");
}

#[test]
fn repl_continues_after_empty_lines() {
    let dir = tempfile::tempdir().unwrap();
    let art = built(dir.path());
    let mut child = Command::new(BIN)
        .args(["query", "--artifacts", &art, "--json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"\nandre agassi\n\ntennis\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert_eq!(stderr(&o).matches("empty query").count(), 2);
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn stale_artifacts_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let art = built(dir.path());
    let path = Path::new(&art).join("keyword_index.tsv");
    let text = fs::read_to_string(&path).unwrap().replace("acacia", "acacio");
    fs::write(&path, text).unwrap();
    let o = run(&["query", "--artifacts", &art, "acacia"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("keyword_index.tsv"));

    let o = run(&["query", "--artifacts", dir.path().join("missing").to_str().unwrap(), "acacia"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_reports_and_warns() {
    let dir = tempfile::tempdir().unwrap();
    let art = built(dir.path());
    let gold = data("plants_athletes.gold.tsv");
    let o = run(&["eval", "--artifacts", &art, "--gold", gold.to_str().unwrap(), "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["macro_recall"], 1.0);
    assert_eq!(report["macro_precision"], 1.0);

    let extra = dir.path().join("gold.tsv");
    fs::write(&extra, "acacia\thttp://example.org/Acacia,http://example.org/Baobab\n").unwrap();
    let o = run(&["eval", "--artifacts", &art, "--gold", extra.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("Baobab"));

    let o = run(&["eval", "--artifacts", &art, "--gold", gold.to_str().unwrap(), "-k", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["eval", "--artifacts", &art, "--gold", "/nonexistent/gold.tsv"]);
    assert_eq!(o.status.code(), Some(2));
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn serve(art: &str, port: u16) -> (Server, String) {
    let mut child = Command::new(BIN)
        .args(["serve", "--artifacts", art, "--port", &port.to_string()])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().trim_start_matches("listening on http://").to_string();
    (Server(child), addr)
}

fn get(addr: &str, path: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let status = response.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = response.split_once("\r\n\r\n").unwrap().1.to_string();
    (status, body)
}

#[test]
fn serve_matches_cli_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let art = built(dir.path());
    let (server, addr) = serve(&art, 0);

    let (status, body) = get(&addr, "/search?q=acacia&k=5");
    assert_eq!(status, 200);
    let api: Vec<serde_json::Value> = serde_json::from_str(&body).unwrap();
    let cli = stdout(&run(&["query", "--artifacts", &art, "--json", "-k", "5", "acacia"]));
    let cli: Vec<serde_json::Value> = cli.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(api, cli);

    let (status, body) = get(&addr, "/search?q=");
    assert_eq!(status, 400);
    assert!(body.contains("empty query"));
    assert_eq!(get(&addr, "/search?q=acacia&k=0").0, 400);

    let (status, body) = get(&addr, "/health");
    assert_eq!(status, 200);
    let manifest: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(manifest["config"]["beta"], 0.15);
    assert_eq!(manifest["config"]["tau"], 0.7);
    assert_eq!(manifest["config"]["k"], 10);

    // the port is taken while the first server runs
    let port = addr.rsplit(':').next().unwrap();
    let o = run(&["serve", "--artifacts", &art, "--port", port]);
    assert_eq!(o.status.code(), Some(2));
    drop(server);
}
