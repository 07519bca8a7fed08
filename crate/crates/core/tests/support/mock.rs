//! Scripted HTTP endpoint for client tests.

use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::Value;

/// One exchange as seen by the server.
#[derive(Debug, Clone)]
pub struct Exchange {
    pub path: String,
    pub authorization: Option<String>,
    pub request: Value,
    pub status: u16,
    pub reply: String,
}

type Handler = dyn Fn(&str, &Value) -> (u16, String) + Send + Sync;

pub struct MockServer {
    pub url: String,
    server: Arc<tiny_http::Server>,
    log: Arc<Mutex<Vec<Exchange>>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Serves each request on its own thread with `handler(path, body)`.
    pub fn start(
        handler: impl Fn(&str, &Value) -> (u16, String) + Send + Sync + 'static,
    ) -> MockServer {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let log = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let thread = {
            let server = server.clone();
            let log = log.clone();
            std::thread::spawn(move || {
                let mut workers = Vec::new();
                for mut req in server.incoming_requests() {
                    let log = log.clone();
                    let handler = handler.clone();
                    workers.push(std::thread::spawn(move || {
                        let mut body = String::new();
                        let _ = req.as_reader().read_to_string(&mut body);
                        let request: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
                        let path = req.url().to_string();
                        let authorization = req
                            .headers()
                            .iter()
                            .find(|h| h.field.equiv("Authorization"))
                            .map(|h| h.value.to_string());
                        let (status, reply) = handler(&path, &request);
                        log.lock().unwrap().push(Exchange {
                            path,
                            authorization,
                            request,
                            status,
                            reply: reply.clone(),
                        });
                        let header =
                            tiny_http::Header::from_bytes("Content-Type", "application/json")
                                .unwrap();
                        let _ = req.respond(
                            tiny_http::Response::from_string(reply)
                                .with_status_code(status)
                                .with_header(header),
                        );
                    }));
                }
                for w in workers {
                    let _ = w.join();
                }
            })
        };
        MockServer {
            url: format!("http://127.0.0.1:{port}"),
            server,
            log,
            thread: Some(thread),
        }
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.log.lock().unwrap().clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// An address nothing listens on.
pub fn dead_url() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    drop(listener);
    format!("http://127.0.0.1:{port}")
}
