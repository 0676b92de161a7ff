use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use ossdoorway::gateway::{SimulatedHost, SANDBOX_REPO_NAME};
use ossdoorway::store::{FileStore, ProgressStore};
use ossdoorway::{default_catalog, VERSION};

const BIN: &str = env!("CARGO_BIN_EXE_ossdoorway");
const SECRET: &str = "cli-test-secret";

fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/assets")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("WEBHOOK_SECRET")
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, listen: &str, extra: &str) -> PathBuf {
    let path = dir.join("service.toml");
    fs::write(
        &path,
        format!(
            "data_dir = \"data\"\nlisten_address = \"{listen}\"\nsecret_env = \"OD_TEST_SECRET\"\nworkers = 2\n{extra}"
        ),
    )
    .unwrap();
    path
}

#[test]
fn version_and_usage() {
    let o = run(&["--version"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), format!("ossdoorway {VERSION}"));

    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["serve"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_full_run() {
    let script = assets().join("scripts/full_run.toml");
    let o = run(&["simulate", "--script", script.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("final: xp 310 | level 4"), "{out}");
    assert!(out.contains("mismatches: 0"));
    assert_eq!(out, stdout(&run(&["simulate", "--script", script.to_str().unwrap()])));
}

#[test]
fn simulate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mismatch = dir.path().join("mismatch.toml");
    fs::write(
        &mismatch,
        "user = \"erin\"\n[[action]]\nkind = \"comment\"\nquest = \"quest1\"\nbody = \"no idea\"\nexpect = \"satisfied\"\n",
    )
    .unwrap();
    let o = run(&["simulate", "--script", mismatch.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stdout(&o).contains("MISMATCH"));

    let invalid = dir.path().join("invalid.toml");
    fs::write(
        &invalid,
        "user = \"erin\"\n[[action]]\nkind = \"comment\"\nquest = \"nope\"\nbody = \"x\"\n",
    )
    .unwrap();
    let o = run(&["simulate", "--script", invalid.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("action 1"), "{}", stderr(&o));

    let o = run(&["simulate", "--script", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "user = \"hana\"\n").unwrap();
    let o = run(&["simulate", "--script", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("(0 actions)"));
    assert!(stdout(&o).contains("final: xp 0 | level 1 | 0/12 tasks"));
}

#[test]
fn report_demo_and_errors() {
    let demo = assets().join("demo_dataset.csv");
    let o = run(&["report", "--dataset", demo.to_str().unwrap(), "--segment", "segment"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let md = stdout(&o);
    assert!(md.contains("| Question | Pre mean | Pre median | Post mean | Post median | p-value |"));
    assert!(md.contains("men") && md.contains("women"));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.md");
    let o = run(&[
        "report",
        "--dataset",
        demo.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap(), md);

    let header = "participant_id,segment,phase,q1,q2,q3,q4,q5,q6,q7\n";
    let bad = dir.path().join("bad.csv");
    fs::write(
        &bad,
        format!("{header}p1,a,pre,1,2,3,4,5,1,2\np1,a,post,1,2,9,4,5,1,2\n"),
    )
    .unwrap();
    let o = run(&["report", "--dataset", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let pre_only = dir.path().join("pre.csv");
    fs::write(
        &pre_only,
        format!("{header}p1,a,pre,1,2,3,4,5,1,2\np2,b,pre,1,2,3,4,5,1,2\n"),
    )
    .unwrap();
    let o = run(&["report", "--dataset", pre_only.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no paired data"), "{}", stderr(&o));

    let o = run(&["report", "--dataset", demo.to_str().unwrap(), "--segment", "cohort"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cohort"));
}

#[test]
fn enroll_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "127.0.0.1:0", "");
    let cfg = config.to_str().unwrap();
    let o = run(&["enroll", "--user", "frank", "--config", cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("enrolled frank in frank/ossdoorway-sandbox"));
    assert!(stdout(&o).contains("issue #3"));
    let o = run(&["enroll", "--user", "frank", "--config", cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("already enrolled"));

    assert_eq!(
        run(&["enroll", "--user", "../evil", "--config", cfg]).status.code(),
        Some(2)
    );
    let broken = dir.path().join("broken.toml");
    fs::write(&broken, "data_dir = 3\n").unwrap();
    assert_eq!(
        run(&["enroll", "--user", "frank", "--config", broken.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn serve_requires_secret() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "127.0.0.1:0", "");
    let o = run(&["serve", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("OD_TEST_SECRET"), "{}", stderr(&o));

    let live = write_config(
        dir.path(),
        "127.0.0.1:0",
        "[hosting]\nmode = \"live\"\ntoken_env = \"OD_TEST_TOKEN\"\n",
    );
    let o = Command::new(BIN)
        .args(["serve", "--config", live.to_str().unwrap()])
        .env("OD_TEST_SECRET", SECRET)
        .env_remove("OD_TEST_TOKEN")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("OD_TEST_TOKEN"));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn wait_healthy(child: &mut Child, base: &str) -> String {
    let http = reqwest::blocking::Client::new();
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        if let Ok(r) = http.get(format!("{base}/healthz")).send() {
            return r.text().unwrap();
        }
        assert!(child.try_wait().unwrap().is_none(), "server exited early");
        assert!(Instant::now() < deadline, "server never became healthy");
        thread::sleep(Duration::from_millis(50));
    }
}

#[test]
fn serve_accepts_signed_webhooks_and_drains_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    let port = free_port();
    let config = write_config(dir.path(), &format!("127.0.0.1:{port}"), "");
    let o = run(&["enroll", "--user", "dana", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let mut child = Command::new(BIN)
        .args(["serve", "--config", config.to_str().unwrap()])
        .env("OD_TEST_SECRET", SECRET)
        .env("RUST_LOG", "info")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let base = format!("http://127.0.0.1:{port}");
    assert!(wait_healthy(&mut child, &base).contains(VERSION));

    let catalog = default_catalog();
    let host = SimulatedHost::default();
    let (repo, _) = host.provision_sandbox("dana", &catalog).unwrap();
    assert_eq!(repo, format!("dana/{SANDBOX_REPO_NAME}"));
    host.take_deliveries();
    for body in ["/issues", "/pulls", "/forks", "README", "/graphs/contributors"] {
        host.comment_as("dana", &repo, 1, body).unwrap();
    }
    let deliveries = host.take_deliveries();

    let http = reqwest::blocking::Client::new();
    let post = |req: ossdoorway::gateway::WebhookRequest| {
        http.post(format!("{base}/webhook"))
            .header("X-GitHub-Event", req.event_name)
            .header("X-GitHub-Delivery", req.delivery_id)
            .header("X-Hub-Signature-256", req.signature)
            .body(req.body)
            .send()
            .unwrap()
            .status()
            .as_u16()
    };

    let forged = deliveries[0].to_request(b"not-the-secret");
    assert_eq!(post(forged), 401);
    let mut garbled = deliveries[0].to_request(SECRET.as_bytes());
    garbled.body = b"{not json".to_vec();
    garbled.signature = ossdoorway::gateway::sign(SECRET.as_bytes(), &garbled.body);
    assert_eq!(post(garbled), 400);

    for d in &deliveries {
        assert_eq!(post(d.to_request(SECRET.as_bytes())), 204);
    }
    assert_eq!(post(deliveries[0].to_request(SECRET.as_bytes())), 204);

    let status = Command::new("kill")
        .args(["-TERM", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(status.success());
    let out = child.wait_with_output().unwrap();
    let log = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(0), "{log}");
    assert!(log.contains("draining"), "{log}");

    let store = FileStore::open(dir.path().join("data"), Arc::new(catalog)).unwrap();
    let state = store.load_progress("dana").unwrap().unwrap();
    assert_eq!(state.completed.len(), 5, "{log}");
    assert_eq!(state.xp, 5 * 10 + 15);
}
