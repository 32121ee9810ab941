use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::process::{Child, Command, Output, Stdio};

use cube_harness::read_trajectories;
use serde_json::Value;

fn bin(name: &str) -> Command {
    let path = match name {
        "cube-bench" => env!("CARGO_BIN_EXE_cube-bench"),
        "cube-run" => env!("CARGO_BIN_EXE_cube-run"),
        "cube-verify" => env!("CARGO_BIN_EXE_cube-verify"),
        "cube-registry" => env!("CARGO_BIN_EXE_cube-registry"),
        other => panic!("no binary {other}"),
    };
    Command::new(path)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().unwrap()
}

fn free_ports(n: usize) -> Vec<u16> {
    let held: Vec<_> = (0..n).map(|_| TcpListener::bind("127.0.0.1:0").unwrap()).collect();
    held.iter().map(|l| l.local_addr().unwrap().port()).collect()
}

struct Background(Child, String);

impl Drop for Background {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn background(cmd: &mut Command) -> Background {
    let mut child = cmd.stdout(Stdio::piped()).stderr(Stdio::null()).spawn().unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    Background(child, line.trim().to_owned())
}

fn serve(id: &str) -> Background {
    let ports = free_ports(80).iter().map(u16::to_string).collect::<Vec<_>>().join(",");
    background(bin("cube-bench").args(["serve", "--benchmark", id, "--ports", &ports]))
}

#[test]
fn debug_configs_are_canonical_lines() {
    let out = run(bin("cube-bench").args(["debug-configs", "--benchmark", "key-vault"]));
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "{\"expected_final_reward\":1,\"max_steps\":8,\"seed\":0,\"task_id\":\"vault-easy\"}\n\
         {\"expected_final_reward\":1,\"max_steps\":12,\"seed\":42,\"task_id\":\"vault-hard\"}\n"
    );
}

#[test]
fn serve_exit_codes() {
    let port = free_ports(1)[0].to_string();
    let bad_toolset = run(bin("cube-bench").args(["serve", "--benchmark", "key-vault", "--ports", &port, "--toolset", "nope"]));
    assert_eq!(bad_toolset.status.code(), Some(2));

    let holder = TcpListener::bind("127.0.0.1:0").unwrap();
    let taken = holder.local_addr().unwrap().port().to_string();
    let exhausted = run(bin("cube-bench").args(["serve", "--benchmark", "key-vault", "--ports", &taken]));
    assert_eq!(exhausted.status.code(), Some(3));

    let unknown = run(bin("cube-bench").args(["serve", "--benchmark", "nope", "--ports", &port]));
    assert_eq!(unknown.status.code(), Some(64));
    assert_eq!(run(bin("cube-bench").arg("--frobnicate")).status.code(), Some(64));
}

#[test]
fn serve_prints_the_url_first() {
    let server = serve("treasure-grid");
    assert!(server.1.starts_with("http://127.0.0.1:") && server.1.ends_with("/rpc"), "{}", server.1);
    let body = ureq::post(&server.1)
        .send(r#"{"id":1,"jsonrpc":"2.0","method":"cube/info","params":{}}"#)
        .unwrap()
        .body_mut()
        .read_to_string()
        .unwrap();
    let reply: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(reply["result"]["name"], "treasure-grid");
}

#[test]
fn run_writes_identical_trajectories_for_both_targets() {
    let dir = tempfile::tempdir().unwrap();
    let server = serve("key-vault");
    let mut files = Vec::new();
    for target in ["local:key-vault", server.1.as_str()] {
        let out = dir.path().join(format!("{}.jsonl", files.len()));
        let status = bin("cube-run")
            .args(["--target", target, "--task", "vault-hard", "--seed", "42", "--agent", "debug", "--out"])
            .arg(&out)
            .stdout(Stdio::null())
            .status()
            .unwrap();
        assert!(status.success(), "{target}");
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let records = read_trajectories(&dir.path().join("0.jsonl")).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(records[0].final_result.reward, 1.0);
}

#[test]
fn run_with_a_jobs_file() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(
        &plan,
        r#"{"jobs":[{"task_id":"grid-3x3"},{"task_id":"grid-3x3-seeded","seed":7},{"task_id":"grid-5x5"},{"task_id":"grid-7x7-walls"}],"parallelism":1}"#,
    )
    .unwrap();
    let outs: Vec<Vec<u8>> = ["1", "4"]
        .iter()
        .map(|k| {
            let out = dir.path().join(format!("k{k}.jsonl"));
            let status = bin("cube-run")
                .args(["--target", "local:treasure-grid", "--agent", "debug", "--parallel", k, "--jobs-file"])
                .arg(&plan)
                .arg("--out")
                .arg(&out)
                .stdout(Stdio::null())
                .status()
                .unwrap();
            assert!(status.success());
            std::fs::read(out).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0].iter().filter(|b| **b == b'\n').count(), 4);
}

#[test]
fn run_fails_on_bad_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    let unknown_task = run(bin("cube-run").args(["--target", "local:treasure-grid", "--task", "grid-9x9", "--out"]).arg(&out));
    assert_eq!(unknown_task.status.code(), Some(1));
    let port = free_ports(1)[0];
    let unreachable =
        run(bin("cube-run").args(["--target", &format!("http://127.0.0.1:{port}/rpc"), "--task", "grid-3x3", "--out"]).arg(&out));
    assert_eq!(unreachable.status.code(), Some(1));
    assert_eq!(run(bin("cube-run").args(["--target", "local:treasure-grid", "--out"]).arg(&out)).status.code(), Some(64));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let pass = run(bin("cube-verify").args(["--target", "local:key-vault", "--level", "basic", "--report"]).arg(&report));
    assert_eq!(pass.status.code(), Some(0));
    let text = String::from_utf8(pass.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("PASS protocol-shape"), "{text}");
    let parsed: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(parsed["benchmark_id"], "key-vault");

    let fail = run(bin("cube-verify").args(["--target", "local:broken-schema", "--level", "basic", "--report"]).arg(&report));
    assert_eq!(fail.status.code(), Some(1));

    let port = free_ports(1)[0];
    let gone = run(bin("cube-verify").args(["--target", &format!("http://127.0.0.1:{port}/rpc"), "--report"]).arg(&report));
    assert_eq!(gone.status.code(), Some(4));
}

#[test]
fn registry_serve_register_search() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.jsonl");
    let port = free_ports(1)[0].to_string();
    let server = background(bin("cube-registry").args(["serve", "--port", &port, "--store"]).arg(&store));
    assert_eq!(server.1, format!("http://127.0.0.1:{port}"));

    let entry = dir.path().join("entry.json");
    std::fs::write(
        &entry,
        r#"{"id":"key-vault","name":"Key Vault","version":"0.1.0","authors":["A"],"package":"key-vault",
            "benchmark_license":"MIT","runtime":"docker","hardware":{"ram_gb":2,"gpu":false,"disk_gb":1},"task_count":2}"#,
    )
    .unwrap();
    let registered = run(bin("cube-registry").args(["register", "--registry", &server.1, "--entry"]).arg(&entry));
    assert!(registered.status.success(), "{}", String::from_utf8_lossy(&registered.stderr));
    let e: Value = serde_json::from_slice(&registered.stdout).unwrap();
    assert_eq!(e["verification_state"], "verified");

    let again = run(bin("cube-registry").args(["register", "--registry", &server.1, "--entry"]).arg(&entry));
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("already registered"));

    let search = |args: &[&str]| {
        let out = run(bin("cube-registry").args(["search", "--registry", &server.1]).args(args));
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap().lines().count()
    };
    assert_eq!(search(&["--runtime", "docker", "--max-ram", "8"]), 1);
    assert_eq!(search(&["--max-ram", "1"]), 0);
    assert_eq!(search(&["--runtime", "vm,live"]), 0);
    assert_eq!(search(&["--badge", "task-isolated,debug-solvable"]), 1);

    let got = run(bin("cube-registry").args(["get", "--registry", &server.1, "key-vault"]));
    assert!(got.status.success());
    let missing = run(bin("cube-registry").args(["get", "--registry", &server.1, "nope"]));
    assert_eq!(missing.status.code(), Some(1));
    drop(server);
    let down = run(bin("cube-registry").args(["search", "--registry", &format!("http://127.0.0.1:{port}")]));
    assert_eq!(down.status.code(), Some(4));
}
