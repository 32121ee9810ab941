//! HTTP front end. Every body is canonical JSON.
//!
//! - `POST /v1/entries` registers (201, 409, 422)
//! - `GET /v1/entries?filter` queries
//! - `GET /v1/entries/{id}[/{version}]` gets, `?include_pending=true` to see unverified
//! - `GET /v1/entries/{id}/{version}/report` returns the stored report

use std::net::{IpAddr, SocketAddr};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::Serialize;
use serde_json::Value;
use tiny_http::{Header, Method, Request, Response, StatusCode};

use crate::{Registration, Registry, RegistryError, RegistryFilter};

pub struct RegistryServer {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    stopped: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl RegistryServer {
    /// Port 0 picks a free port. Several workers so a slow verification
    /// does not block queries.
    pub fn bind(registry: Arc<Registry>, ip: IpAddr, port: u16) -> std::io::Result<Self> {
        let server = tiny_http::Server::http(SocketAddr::new(ip, port))
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::AddrInUse, e.to_string()))?;
        let addr = server.server_addr().to_ip().ok_or_else(|| std::io::Error::other("not an IP listener"))?;
        let server = Arc::new(server);
        let stopped = Arc::new(AtomicBool::new(false));
        let workers = (0..4)
            .map(|i| {
                let (server, stopped, registry) = (server.clone(), stopped.clone(), registry.clone());
                std::thread::Builder::new()
                    .name(format!("registry-{i}"))
                    .spawn(move || {
                        while !stopped.load(Ordering::SeqCst) {
                            let Ok(request) = server.recv() else { break };
                            respond(&registry, request);
                        }
                    })
                    .expect("spawn registry worker")
            })
            .collect();
        Ok(Self { addr, server, stopped, workers })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL, without a trailing slash.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn stop(&self) {
        if !self.stopped.swap(true, Ordering::SeqCst) {
            for _ in 0..self.workers.len() {
                self.server.unblock();
            }
        }
    }

    pub fn join(mut self) {
        for handle in std::mem::take(&mut self.workers) {
            let _ = handle.join();
        }
    }
}

impl Drop for RegistryServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn json_body<T: Serialize>(status: u16, value: &T) -> (u16, Vec<u8>) {
    (status, cube_core::canonical::to_vec(value).expect("registry payloads are finite"))
}

fn error_body(e: &RegistryError) -> (u16, Vec<u8>) {
    json_body(e.http_status(), &e.to_json())
}

fn respond(registry: &Registry, mut request: Request) {
    let mut body = Vec::new();
    let (status, reply) = if request.as_reader().read_to_end(&mut body).is_err() {
        error_body(&RegistryError::ValidationFailed { field: "entry".into(), reason: "unreadable body".into() })
    } else {
        route(registry, request.method(), request.url(), &body)
    };
    let header = Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).unwrap();
    let _ = request.respond(Response::from_data(reply).with_status_code(StatusCode(status)).with_header(header));
}

pub(crate) fn route(registry: &Registry, method: &Method, url: &str, body: &[u8]) -> (u16, Vec<u8>) {
    let (path, query) = url.split_once('?').unwrap_or((url, ""));
    let segments: Vec<String> = path
        .trim_end_matches('/')
        .split('/')
        .skip(1)
        .map(|s| form_urlencoded::parse(format!("s={s}").as_bytes()).next().map(|(_, v)| v.into_owned()).unwrap_or_default())
        .collect();
    let segments: Vec<&str> = segments.iter().map(String::as_str).collect();
    let include_pending = || match RegistryFilter::from_query(query) {
        Ok(f) => Ok(f.include_pending),
        Err(e) => Err(error_body(&e)),
    };

    match (method, segments.as_slice()) {
        (Method::Post, ["v1", "entries"]) => {
            let parsed = serde_json::from_slice::<Value>(body)
                .map_err(|e| RegistryError::ValidationFailed { field: "entry".into(), reason: e.to_string() })
                .and_then(Registration::from_value);
            match parsed.and_then(|reg| registry.register(reg)) {
                Ok(entry) => json_body(201, &entry),
                Err(e) => error_body(&e),
            }
        }
        (Method::Get, ["v1", "entries"]) => match RegistryFilter::from_query(query) {
            Ok(filter) => json_body(200, &registry.query(&filter)),
            Err(e) => error_body(&e),
        },
        (Method::Get, ["v1", "entries", id]) => match include_pending() {
            Ok(pending) => registry.get(id, None, pending).map_or_else(|e| error_body(&e), |e| json_body(200, &e)),
            Err(reply) => reply,
        },
        (Method::Get, ["v1", "entries", id, version]) => match include_pending() {
            Ok(pending) => {
                registry.get(id, Some(version), pending).map_or_else(|e| error_body(&e), |e| json_body(200, &e))
            }
            Err(reply) => reply,
        },
        (Method::Get, ["v1", "entries", id, version, "report"]) => {
            registry.report(id, version).map_or_else(|e| error_body(&e), |r| json_body(200, &r))
        }
        (_, ["v1", "entries", ..]) => {
            json_body(405, &serde_json::json!({ "error": "MethodNotAllowed", "message": format!("{method} {path}") }))
        }
        _ => json_body(404, &serde_json::json!({ "error": "NotFound", "message": path, "what": path })),
    }
}
