//! Local HTTP endpoint for user answers: `POST {"response":"yes"|"no"}`.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use serde::Deserialize;
use tiny_http::{Method, Response as HttpResponse, Server};

use crate::fsm::Response;
use crate::monitor::Injector;
use crate::SentinelError;

const MAX_BODY: u64 = 4096;

#[derive(Deserialize)]
struct Body {
    response: Response,
}

pub struct ResponseListener {
    server: Arc<Server>,
    addr: SocketAddr,
    worker: Option<JoinHandle<()>>,
}

fn reply(request: tiny_http::Request, status: u16, text: &str) {
    if let Err(e) = request.respond(HttpResponse::from_string(text).with_status_code(status)) {
        log::debug!("response listener: {e}");
    }
}

impl ResponseListener {
    pub fn start(addr: SocketAddr, injector: Injector) -> Result<Self, SentinelError> {
        let server = Server::http(addr).map_err(|e| SentinelError::Listener(format!("{addr}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| SentinelError::Listener("listener has no IP address".into()))?;
        let server = Arc::new(server);
        let srv = Arc::clone(&server);
        let worker = thread::spawn(move || {
            for mut request in srv.incoming_requests() {
                if *request.method() != Method::Post {
                    reply(request, 405, "POST {\"response\":\"yes\"|\"no\"}\n");
                    continue;
                }
                let mut text = String::new();
                if request.as_reader().take(MAX_BODY).read_to_string(&mut text).is_err() {
                    reply(request, 400, "unreadable body\n");
                    continue;
                }
                match serde_json::from_str::<Body>(&text) {
                    Ok(body) => {
                        if injector.respond(body.response) {
                            reply(request, 200, "accepted\n");
                        } else {
                            reply(request, 503, "monitor stopped\n");
                        }
                    }
                    Err(e) => reply(request, 400, &format!("{e}\n")),
                }
            }
        });
        Ok(ResponseListener {
            server,
            addr,
            worker: Some(worker),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for ResponseListener {
    fn drop(&mut self) {
        self.stop();
    }
}
