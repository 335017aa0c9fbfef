//! Minimal chat-completions stub server for backend tests: accepts POST
//! /chat/completions, hands the body to a script closure, and replies
//! with the scripted outcome. Tracks request counts and peak in-flight
//! concurrency.

// Shared across test targets; not every target uses every helper.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

/// What the stub should do for one request. The `Content` body is
/// wrapped into a chat-completions JSON response.
pub enum StubReply {
    Content(String),
    DelayedContent(Duration, String),
    Status(u16),
    /// Keep the connection open without answering (forces a client
    /// timeout), then drop it.
    Hang,
}

pub type Script = Arc<dyn Fn(usize, &str) -> StubReply + Send + Sync>;

pub struct StubServer {
    pub base_url: String,
    requests: Arc<AtomicUsize>,
    in_flight: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<std::thread::JoinHandle<()>>,
}

impl StubServer {
    pub fn start(script: Script) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().unwrap();
        listener.set_nonblocking(true).unwrap();

        let requests = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));

        let handle = {
            let requests = requests.clone();
            let in_flight = in_flight.clone();
            let peak = peak.clone();
            let shutdown = shutdown.clone();
            std::thread::spawn(move || {
                while !shutdown.load(Ordering::SeqCst) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let script = script.clone();
                            let requests = requests.clone();
                            let in_flight = in_flight.clone();
                            let peak = peak.clone();
                            std::thread::spawn(move || {
                                let index = requests.fetch_add(1, Ordering::SeqCst);
                                let current = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                                peak.fetch_max(current, Ordering::SeqCst);
                                handle_connection(stream, index, &script);
                                in_flight.fetch_sub(1, Ordering::SeqCst);
                            });
                        }
                        Err(ref e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                            std::thread::sleep(Duration::from_millis(2));
                        }
                        Err(_) => break,
                    }
                }
            })
        };

        StubServer {
            base_url: format!("http://{addr}"),
            requests,
            in_flight,
            peak,
            shutdown,
            handle: Some(handle),
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    pub fn peak_concurrency(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn stop(mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(stream: TcpStream, index: usize, script: &Script) {
    let mut reader = BufReader::new(stream);
    let mut content_length = 0usize;
    let mut line = String::new();
    // Request line + headers.
    loop {
        line.clear();
        if reader.read_line(&mut line).is_err() || line.trim().is_empty() {
            break;
        }
        let lower = line.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("content-length:") {
            content_length = rest.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    if content_length > 0 && reader.read_exact(&mut body).is_err() {
        return;
    }
    let body = String::from_utf8_lossy(&body).to_string();

    let reply = script(index, &body);
    let mut stream = reader.into_inner();
    match reply {
        StubReply::Content(content) => write_content(&mut stream, &content),
        StubReply::DelayedContent(delay, content) => {
            std::thread::sleep(delay);
            write_content(&mut stream, &content);
        }
        StubReply::Status(status) => {
            let response = format!(
                "HTTP/1.1 {status} Stubbed\r\ncontent-length: 0\r\nconnection: close\r\n\r\n"
            );
            let _ = stream.write_all(response.as_bytes());
        }
        StubReply::Hang => {
            // Hold the socket past any reasonable client timeout.
            std::thread::sleep(Duration::from_secs(5));
        }
    }
}

fn write_content(stream: &mut TcpStream, content: &str) {
    let body = serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": content}}]
    })
    .to_string();
    let response = format!(
        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(response.as_bytes());
}
