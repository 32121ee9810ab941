//! JSON-RPC over HTTP/1.1: `POST /rpc`, `application/json`.

use std::net::{IpAddr, SocketAddr};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use cube_core::envelope::{decode_envelope, encode_envelope, Response, RpcEnvelope};
use cube_core::{codes, CubeError, RpcError};
use serde_json::Value;
use tiny_http::{Header, Method as HttpMethod, StatusCode};

pub const RPC_PATH: &str = "/rpc";

/// Turns one request body into one response body.
pub type Handler = Arc<dyn Fn(&[u8]) -> Vec<u8> + Send + Sync>;

pub struct RpcServer {
    addr: SocketAddr,
    server: Arc<tiny_http::Server>,
    stopped: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl RpcServer {
    pub fn bind(ip: IpAddr, port: u16, workers: usize, handler: Handler) -> std::io::Result<Self> {
        let server = tiny_http::Server::http(SocketAddr::new(ip, port))
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::AddrInUse, e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("server is not listening on an IP address"))?;
        let server = Arc::new(server);
        let stopped = Arc::new(AtomicBool::new(false));
        let workers = (0..workers.max(1))
            .map(|i| {
                let server = server.clone();
                let stopped = stopped.clone();
                let handler = handler.clone();
                std::thread::Builder::new()
                    .name(format!("rpc-{}-{i}", addr.port()))
                    .spawn(move || serve(&server, &stopped, &handler))
                    .expect("spawn rpc worker")
            })
            .collect();
        Ok(Self { addr, server, stopped, workers })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}{}", self.addr, RPC_PATH)
    }

    /// Stops accepting requests. Safe to call from a request handler; the
    /// in-flight response is still delivered.
    pub fn stop(&self) {
        if !self.stopped.swap(true, Ordering::SeqCst) {
            for _ in 0..self.workers.len() {
                self.server.unblock();
            }
        }
    }

    /// Blocks until every worker has exited.
    pub fn join(mut self) {
        for handle in std::mem::take(&mut self.workers) {
            let _ = handle.join();
        }
    }
}

impl Drop for RpcServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn serve(server: &tiny_http::Server, stopped: &AtomicBool, handler: &Handler) {
    while !stopped.load(Ordering::SeqCst) {
        let Ok(mut request) = server.recv() else { break };
        if stopped.load(Ordering::SeqCst) {
            let _ = request.respond(tiny_http::Response::empty(StatusCode(503)));
            break;
        }
        if request.url() != RPC_PATH {
            let _ = request.respond(tiny_http::Response::empty(StatusCode(404)));
            continue;
        }
        if *request.method() != HttpMethod::Post {
            let _ = request.respond(tiny_http::Response::empty(StatusCode(405)));
            continue;
        }
        let mut body = Vec::new();
        if request.as_reader().read_to_end(&mut body).is_err() {
            let _ = request.respond(tiny_http::Response::empty(StatusCode(400)));
            continue;
        }
        let reply = handler(&body);
        let header = Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).unwrap();
        let _ = request.respond(tiny_http::Response::from_data(reply).with_header(header));
    }
}


/// Decodes a request, dispatches it and encodes the response.
pub fn handle_rpc<F>(body: &[u8], dispatch: F) -> Vec<u8>
where
    F: FnOnce(&str, Value) -> Result<Value, CubeError>,
{
    let response = match decode_envelope(body) {
        Ok(RpcEnvelope::Request(req)) => match dispatch(&req.method, req.params) {
            Ok(result) => Response::ok(req.id, result),
            Err(err) => Response::err(Some(req.id), err.to_rpc_error()),
        },
        Ok(RpcEnvelope::Response(resp)) => Response::err(
            resp.id,
            RpcError::new(codes::INVALID_REQUEST, "expected a request, got a response"),
        ),
        Err(fault) => fault.to_response(),
    };
    encode_envelope(&RpcEnvelope::Response(response.clone())).unwrap_or_else(|e| {
        let fallback = Response::err(response.id, RpcError::new(codes::INTERNAL_ERROR, e.to_string()));
        encode_envelope(&RpcEnvelope::Response(fallback)).expect("error responses always encode")
    })
}
