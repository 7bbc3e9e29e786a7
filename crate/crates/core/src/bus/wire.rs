//! Cross-process queue transport.
//!
//! Every message is a frame: a 4-byte big-endian length followed by that
//! many bytes of canonical JSON. Clients send [`WireRequest`] frames and the
//! host answers each with one [`WireReply`] frame. A delivered item is the
//! [`Envelope`] JSON nested under `"delivered"`.
//!
//! A [`QueueHost`] owns an in-process [`Queue`] and applies its policy; a
//! [`RemoteQueue`] is a client connection implementing [`Endpoint`]. Use
//! one connection per producer and one per consumer.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{BusError, Endpoint, Envelope, Payload, Queue};
use crate::time::Timestamp;

/// Frames larger than this are rejected as corrupt.
pub const MAX_FRAME_LEN: u32 = 64 * 1024 * 1024;

pub fn encode_frame<T: Serialize>(msg: &T) -> Vec<u8> {
    let body = serde_json::to_vec(msg).expect("wire messages serialize");
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

pub fn write_frame<W: Write, T: Serialize>(w: &mut W, msg: &T) -> io::Result<()> {
    w.write_all(&encode_frame(msg))?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream before the length prefix.
pub fn read_frame<R: Read, T: DeserializeOwned>(r: &mut R) -> io::Result<Option<T>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_be_bytes(len);
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame of {len} bytes exceeds limit"),
        ));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    serde_json::from_slice(&body)
        .map(Some)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

pub fn decode_frame<T: DeserializeOwned>(bytes: &[u8]) -> io::Result<T> {
    let mut cursor = bytes;
    let msg = read_frame(&mut cursor)?
        .ok_or_else(|| io::Error::new(io::ErrorKind::UnexpectedEof, "empty frame"))?;
    if !cursor.is_empty() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "trailing bytes after frame",
        ));
    }
    Ok(msg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireRequest {
    Publish {
        produced_ts: Timestamp,
        payload: Payload,
    },
    Consume {
        /// Milliseconds to wait; absent means wait indefinitely.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wait_ms: Option<u64>,
    },
    Close,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireReply {
    Published { seq: u64 },
    Delivered(Envelope),
    NotReady,
    Closed,
    Ack,
    Error { message: String },
}

/// Serves one queue over TCP.
pub struct QueueHost {
    addr: SocketAddr,
    queue: Arc<Queue>,
    shutdown: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl QueueHost {
    pub fn bind(addr: impl ToSocketAddrs, queue: Arc<Queue>) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let shutdown = Arc::new(AtomicBool::new(false));
        let acceptor = {
            let queue = Arc::clone(&queue);
            let shutdown = Arc::clone(&shutdown);
            std::thread::Builder::new()
                .name(format!("queue-host-{addr}"))
                .spawn(move || {
                    for conn in listener.incoming() {
                        if shutdown.load(Ordering::SeqCst) {
                            break;
                        }
                        let Ok(conn) = conn else { continue };
                        let queue = Arc::clone(&queue);
                        std::thread::spawn(move || serve_connection(conn, &queue));
                    }
                })?
        };
        Ok(QueueHost {
            addr,
            queue,
            shutdown,
            acceptor: Some(acceptor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn queue(&self) -> &Arc<Queue> {
        &self.queue
    }
}

impl Drop for QueueHost {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // wake the acceptor
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.acceptor.take() {
            let _ = handle.join();
        }
    }
}

fn serve_connection(mut conn: TcpStream, queue: &Queue) {
    let _ = conn.set_nodelay(true);
    loop {
        let request: WireRequest = match read_frame(&mut conn) {
            Ok(Some(req)) => req,
            Ok(None) => return,
            Err(e) => {
                let _ = write_frame(
                    &mut conn,
                    &WireReply::Error {
                        message: e.to_string(),
                    },
                );
                return;
            }
        };
        let reply = match request {
            WireRequest::Publish {
                produced_ts,
                payload,
            } => reply_for(queue.publish(payload, produced_ts).map(|seq| WireReply::Published { seq })),
            WireRequest::Consume { wait_ms: None } => reply_for(queue.consume().map(WireReply::Delivered)),
            WireRequest::Consume { wait_ms: Some(ms) } => reply_for(
                queue
                    .consume_timeout(Duration::from_millis(ms))
                    .map(WireReply::Delivered),
            ),
            WireRequest::Close => {
                queue.close();
                WireReply::Ack
            }
        };
        if write_frame(&mut conn, &reply).is_err() {
            return;
        }
    }
}

fn reply_for(result: Result<WireReply, BusError>) -> WireReply {
    match result {
        Ok(reply) => reply,
        Err(BusError::Closed) => WireReply::Closed,
        Err(BusError::NotReady) => WireReply::NotReady,
        Err(e) => WireReply::Error {
            message: e.to_string(),
        },
    }
}

/// Client side of a hosted queue.
pub struct RemoteQueue {
    conn: Mutex<TcpStream>,
}

impl RemoteQueue {
    pub fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let conn = TcpStream::connect(addr)?;
        conn.set_nodelay(true)?;
        Ok(RemoteQueue {
            conn: Mutex::new(conn),
        })
    }

    fn call(&self, request: &WireRequest) -> Result<WireReply, BusError> {
        let mut conn = self.conn.lock();
        write_frame(&mut *conn, request).map_err(|e| BusError::Transport(e.to_string()))?;
        match read_frame(&mut *conn) {
            Ok(Some(reply)) => Ok(reply),
            Ok(None) => Err(BusError::Transport("host hung up".into())),
            Err(e) => Err(BusError::Transport(e.to_string())),
        }
    }

    fn expect_envelope(reply: WireReply) -> Result<Envelope, BusError> {
        match reply {
            WireReply::Delivered(env) => Ok(env),
            WireReply::NotReady => Err(BusError::NotReady),
            WireReply::Closed => Err(BusError::Closed),
            other => Err(unexpected(other)),
        }
    }
}

fn unexpected(reply: WireReply) -> BusError {
    match reply {
        WireReply::Error { message } => BusError::Transport(message),
        other => BusError::Transport(format!("unexpected reply {other:?}")),
    }
}

impl Endpoint for RemoteQueue {
    fn publish(&self, payload: Payload, produced_ts: Timestamp) -> Result<u64, BusError> {
        match self.call(&WireRequest::Publish {
            produced_ts,
            payload,
        })? {
            WireReply::Published { seq } => Ok(seq),
            WireReply::Closed => Err(BusError::Closed),
            other => Err(unexpected(other)),
        }
    }

    fn consume(&self) -> Result<Envelope, BusError> {
        Self::expect_envelope(self.call(&WireRequest::Consume { wait_ms: None })?)
    }

    fn consume_timeout(&self, timeout: Duration) -> Result<Envelope, BusError> {
        Self::expect_envelope(self.call(&WireRequest::Consume {
            wait_ms: Some(timeout.as_millis() as u64),
        })?)
    }

    fn close(&self) {
        let _ = self.call(&WireRequest::Close);
    }
}
