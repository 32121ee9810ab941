mod common;

use std::net::TcpListener;
use std::sync::Arc;

use common::{call, free_port, post, Counter};
use cube_core::{Method, ToolConfig};
use cube_kit::{start, RpcHandle, StartError, StartOptions};
use serde_json::{json, Value};

fn serve(ports: Vec<u16>) -> RpcHandle {
    start(Arc::new(Counter::new()), StartOptions::rpc(ports, ToolConfig::named("standard")))
        .unwrap()
        .into_rpc()
        .unwrap()
}

fn ok(reply: &Value) -> &Value {
    assert!(reply.get("error").is_none(), "unexpected error: {reply}");
    &reply["result"]
}

fn code(reply: &Value) -> i64 {
    reply["error"]["code"].as_i64().unwrap_or_else(|| panic!("expected an error: {reply}"))
}

#[test]
fn benchmark_binds_first_free_port() {
    let blocker = TcpListener::bind("127.0.0.1:0").unwrap();
    let taken = blocker.local_addr().unwrap().port();
    let next = free_port();
    let handle = serve(vec![taken, next]);
    assert_eq!(handle.url(), format!("http://127.0.0.1:{next}/rpc"));
    assert_eq!(ok(&call(handle.url(), "cube/info", json!({})))["name"], "counter");
}

#[test]
fn no_bindable_port() {
    let blocker = TcpListener::bind("127.0.0.1:0").unwrap();
    let taken = blocker.local_addr().unwrap().port();
    for ports in [vec![], vec![taken]] {
        let err = start(Arc::new(Counter::new()), StartOptions::rpc(ports.clone(), ToolConfig::named("standard")))
            .err()
            .unwrap();
        assert_eq!(err, StartError::PortExhausted(ports));
    }
}

#[test]
fn spawns_take_the_remaining_ports() {
    let ports = vec![free_port(), free_port(), free_port()];
    let handle = serve(ports.clone());
    let a = ok(&call(handle.url(), "cube/spawn", json!({"task_id": "count-3"}))).clone();
    let b = ok(&call(handle.url(), "cube/spawn", json!({"task_id": "count-3"}))).clone();
    assert_ne!(a["endpoint"], b["endpoint"]);
    assert_ne!(a["session_id"], b["session_id"]);
    for ticket in [&a, &b] {
        let url = ticket["endpoint"].as_str().unwrap();
        assert!(ports[1..].iter().any(|p| url == format!("http://127.0.0.1:{p}/rpc")), "{url}");
    }
    let third = call(handle.url(), "cube/spawn", json!({"task_id": "count-3"}));
    assert_eq!(code(&third), -32002);

    let url_a = a["endpoint"].as_str().unwrap().to_owned();
    ok(&call(&url_a, "cube/close", json!({})));
    let again = ok(&call(handle.url(), "cube/spawn", json!({"task_id": "count-3"}))).clone();
    assert_eq!(again["endpoint"], url_a.as_str());
}

#[test]
fn task_endpoint_serves_the_task_api() {
    let handle = serve(vec![free_port(), free_port()]);
    let ticket = ok(&call(handle.url(), "cube/spawn", json!({"task_id": "count-3"}))).clone();
    let url = ticket["endpoint"].as_str().unwrap();

    assert_eq!(code(&call(url, "cube/evaluate", json!({}))), -32005);
    let tools = ok(&call(url, "tools/list", json!({})))["tools"].clone();
    assert_eq!(tools.as_array().unwrap().len(), 3);
    assert_eq!(ok(&call(url, "cube/reset", json!({}))), &json!({"obs": {"value": 0}, "info": {"steps_taken": 0}}));

    let step = ok(&call(url, "cube/step", json!({"action": {"name": "add", "args": {"n": 3}}}))).clone();
    let keys: Vec<_> = step.as_object().unwrap().keys().cloned().collect();
    assert_eq!(keys, ["info", "obs", "reward", "terminated", "truncated"]);
    assert_eq!(step["reward"], json!(1));
    assert_eq!(code(&call(url, "tools/call", json!({"name": "inc", "args": {}}))), -32001);

    assert_eq!(ok(&call(url, "cube/privileged_info", json!({}))), "target=3");
    let read = ok(&call(url, "resources/read", json!({"uri": "cube://task/observation"}))).clone();
    assert_eq!(read["contents"][0]["payload"], json!({"value": 3}));

    ok(&call(url, "cube/close", json!({})));
    assert!(ok(&call(handle.url(), "cube/status", json!({}))).as_array().unwrap().is_empty());
}

#[test]
fn methods_are_bound_to_their_level() {
    let handle = serve(vec![free_port(), free_port()]);
    let ticket = ok(&call(handle.url(), "cube/spawn", json!({"task_id": "count-3"}))).clone();
    let task_url = ticket["endpoint"].as_str().unwrap();
    let ends_session = [Method::Close, Method::Shutdown];
    for method in Method::all().filter(|m| !ends_session.contains(m)) {
        let (right, wrong) = match method.level() {
            cube_core::MethodLevel::Task => (task_url, handle.url()),
            cube_core::MethodLevel::Benchmark => (handle.url(), task_url),
        };
        assert_eq!(code(&call(wrong, method.as_str(), json!({}))), -32601, "{method:?} on wrong endpoint");
        let reply = call(right, method.as_str(), json!({}));
        if let Some(err) = reply.get("error") {
            assert_ne!(err["code"], -32601, "{method:?} missing");
        }
    }
    assert_eq!(code(&call(handle.url(), "cube/close", json!({}))), -32601);
    assert_eq!(code(&call(task_url, "cube/shutdown", json!({}))), -32601);
    assert_eq!(ok(&call(task_url, "cube/close", json!({}))), &Value::Null);
    assert_eq!(ok(&call(handle.url(), "cube/shutdown", json!({}))), &Value::Null);
}

#[test]
fn decode_faults() {
    let handle = serve(vec![free_port()]);
    let url = handle.url();
    assert_eq!(code(&post(url, "{not json")), -32700);
    assert_eq!(code(&post(url, r#"{"jsonrpc":"2.0"}"#)), -32600);
    assert_eq!(code(&post(url, r#"[{"jsonrpc":"2.0","id":1,"method":"cube/info","params":{}}]"#)), -32600);
    assert_eq!(code(&call(url, "gym/step", json!({}))), -32601);
    assert_eq!(code(&call(url, "cube/teleport", json!({}))), -32601);
    assert_eq!(code(&call(url, "cube/spawn", json!({"task": "count-3"}))), -32602);
    assert_eq!(code(&call(url, "cube/spawn", json!({"task_id": "noisy"}))), -32004);
    assert_eq!(code(&call(url, "cube/spawn", json!({"task_id": "nope"}))), -32000);
}

#[test]
fn responses_are_canonical_and_echo_the_id() {
    let handle = serve(vec![free_port()]);
    let body = r#"{ "params": {}, "method": "cube/info", "id": "abc", "jsonrpc": "2.0" }"#;
    let mut resp = ureq::post(handle.url()).header("Content-Type", "application/json").send(body).unwrap();
    assert_eq!(resp.headers()["content-type"], "application/json");
    let text = resp.body_mut().read_to_string().unwrap();
    assert!(text.starts_with(r#"{"id":"abc","jsonrpc":"2.0","result":{"description":"#), "{text}");
    assert_eq!(cube_core::canonical::canonicalize(text.as_bytes()).unwrap(), text.as_bytes());
}

#[test]
fn non_rpc_requests() {
    let handle = serve(vec![free_port()]);
    let base = handle.url().trim_end_matches("/rpc").to_owned();
    assert!(ureq::get(handle.url()).call().is_err());
    assert!(ureq::post(format!("{base}/other")).send("{}").is_err());
}

#[test]
fn stopping_frees_the_port() {
    let port = free_port();
    let handle = serve(vec![port]);
    handle.stop();
    // The listener closes on a background thread shortly after stop.
    let again = (0..50).find_map(|_| {
        let attempt = start(Arc::new(Counter::new()), StartOptions::rpc([port], ToolConfig::named("standard")));
        attempt.ok().or_else(|| {
            std::thread::sleep(std::time::Duration::from_millis(20));
            None
        })
    });
    assert!(again.unwrap().into_rpc().unwrap().url().contains(&port.to_string()));
}
