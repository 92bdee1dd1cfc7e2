//! TCP channels, listeners and the two sending patterns.

use std::fmt;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Ipv4Addr, Ipv6Addr, Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use super::codec::{read_frame, write_frame};
use super::{CommError, Location, Message};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceDir {
    In,
    Out,
}

impl fmt::Display for TraceDir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceDir::In => "IN",
            TraceDir::Out => "OUT",
        })
    }
}

/// Observer for every frame sent or received: direction, message, frame size.
pub type TraceFn = dyn Fn(TraceDir, &Message, usize) + Send + Sync;

fn trace(t: Option<&TraceFn>, dir: TraceDir, msg: &Message, bytes: usize) {
    if let Some(t) = t {
        t(dir, msg, bytes);
    }
}

/// One bidirectional connection carrying whole messages.
///
/// Receiving needs `&mut self`; sending goes through a shared lock so the
/// handle returned by [`Channel::sender`] can reply from other threads.
pub struct Channel {
    reader: BufReader<TcpStream>,
    writer: Sender,
}

#[derive(Clone)]
pub struct Sender {
    stream: Arc<Mutex<TcpStream>>,
}

impl Sender {
    pub fn send(&self, msg: &Message) -> Result<usize, CommError> {
        let mut stream = self.stream.lock().unwrap_or_else(|e| e.into_inner());
        let mut w = BufWriter::new(&mut *stream);
        let n = write_frame(&mut w, msg)?;
        w.flush()?;
        Ok(n)
    }
}

impl Channel {
    pub fn from_stream(stream: TcpStream) -> io::Result<Channel> {
        stream.set_nodelay(true)?;
        let writer = stream.try_clone()?;
        Ok(Channel {
            reader: BufReader::new(stream),
            writer: Sender {
                stream: Arc::new(Mutex::new(writer)),
            },
        })
    }

    pub fn connect(location: &Location, timeout: Duration) -> Result<Channel, CommError> {
        let connect_err = |source| CommError::Connect {
            location: location.clone(),
            source,
        };
        let addrs = (location.host.as_str(), location.port)
            .to_socket_addrs()
            .map_err(connect_err)?;
        let mut last = io::Error::new(io::ErrorKind::NotFound, "host has no addresses");
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(s) => return Channel::from_stream(s).map_err(connect_err),
                Err(e) => last = e,
            }
        }
        Err(connect_err(last))
    }

    pub fn send(&self, msg: &Message) -> Result<usize, CommError> {
        self.writer.send(msg)
    }

    /// Next message and its frame size; `None` once the peer closed.
    pub fn receive(&mut self) -> Result<Option<(Message, usize)>, CommError> {
        read_frame(&mut self.reader)
    }

    pub fn sender(&self) -> Sender {
        self.writer.clone()
    }

    pub fn set_read_timeout(&self, t: Option<Duration>) -> io::Result<()> {
        self.reader.get_ref().set_read_timeout(t)
    }

    pub fn peer_addr(&self) -> io::Result<SocketAddr> {
        self.reader.get_ref().peer_addr()
    }

    pub fn close(&self) {
        let _ = self.reader.get_ref().shutdown(Shutdown::Both);
    }
}

/// Sends `msg` on a fresh connection and waits for exactly one reply.
/// A fault reply is returned as a message with `fault` set.
pub fn solicit(
    location: &Location,
    msg: &Message,
    timeout: Duration,
    tracer: Option<&TraceFn>,
) -> Result<Message, CommError> {
    let mut ch = Channel::connect(location, timeout)?;
    ch.set_read_timeout(Some(timeout))?;
    let sent = ch.send(msg)?;
    trace(tracer, TraceDir::Out, msg, sent);
    let reply = match ch.receive() {
        Ok(Some((reply, n))) => {
            trace(tracer, TraceDir::In, &reply, n);
            Ok(reply)
        }
        Ok(None) => Err(CommError::Closed),
        Err(CommError::Io(e))
            if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) =>
        {
            Err(CommError::Timeout {
                location: location.clone(),
                millis: timeout.as_millis(),
            })
        }
        Err(e) => Err(e),
    };
    ch.close();
    reply
}

/// Fire-and-forget delivery of one frame.
pub fn notify(
    location: &Location,
    msg: &Message,
    timeout: Duration,
    tracer: Option<&TraceFn>,
) -> Result<(), CommError> {
    let ch = Channel::connect(location, timeout)?;
    let sent = ch.send(msg)?;
    trace(tracer, TraceDir::Out, msg, sent);
    let _ = ch.reader.get_ref().shutdown(Shutdown::Write);
    Ok(())
}

struct Connections {
    stop: AtomicBool,
    live: Mutex<Vec<(TcpStream, JoinHandle<()>)>>,
}

/// A bound server socket dispatching each connection to its own thread.
pub struct Listener {
    addr: SocketAddr,
    location: Location,
    shared: Arc<Connections>,
    accept: Option<JoinHandle<()>>,
}

pub fn listen<F>(location: &Location, handler: F) -> Result<Listener, CommError>
where
    F: Fn(Channel) + Send + Sync + 'static,
{
    let bind_err = |source| CommError::Bind {
        location: location.clone(),
        source,
    };
    let socket = TcpListener::bind((location.host.as_str(), location.port)).map_err(bind_err)?;
    let addr = socket.local_addr().map_err(bind_err)?;
    let shared = Arc::new(Connections {
        stop: AtomicBool::new(false),
        live: Mutex::new(Vec::new()),
    });
    let handler = Arc::new(handler);
    let accept_shared = Arc::clone(&shared);
    let accept = std::thread::Builder::new()
        .name(format!("accept-{}", addr.port()))
        .spawn(move || {
            for conn in socket.incoming() {
                if accept_shared.stop.load(Ordering::SeqCst) {
                    break;
                }
                let stream = match conn {
                    Ok(s) => s,
                    Err(e) => {
                        log::warn!("accept on {addr} failed: {e}");
                        continue;
                    }
                };
                let (Ok(tracked), Ok(ch)) = (stream.try_clone(), Channel::from_stream(stream))
                else {
                    continue;
                };
                let h = Arc::clone(&handler);
                let worker = std::thread::spawn(move || h(ch));
                let mut live = accept_shared.live.lock().unwrap();
                live.retain(|(_, j)| !j.is_finished());
                live.push((tracked, worker));
            }
        })
        .map_err(bind_err)?;
    Ok(Listener {
        addr,
        location: Location {
            host: location.host.clone(),
            port: addr.port(),
        },
        shared,
        accept: Some(accept),
    })
}

impl Listener {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// The requested location with the actually bound port.
    pub fn location(&self) -> &Location {
        &self.location
    }

    /// Stops accepting, ends reading on open connections and waits for
    /// their handlers to return. Replies still being written complete.
    pub fn shutdown(&mut self) {
        let Some(accept) = self.accept.take() else {
            return;
        };
        self.shared.stop.store(true, Ordering::SeqCst);
        let wake = match self.addr {
            SocketAddr::V4(a) if a.ip().is_unspecified() => {
                SocketAddr::from((Ipv4Addr::LOCALHOST, a.port()))
            }
            SocketAddr::V6(a) if a.ip().is_unspecified() => {
                SocketAddr::from((Ipv6Addr::LOCALHOST, a.port()))
            }
            a => a,
        };
        let _ = TcpStream::connect_timeout(&wake, Duration::from_secs(1));
        let _ = accept.join();
        let live = std::mem::take(&mut *self.shared.live.lock().unwrap());
        for (stream, worker) in live {
            let _ = stream.shutdown(Shutdown::Read);
            let _ = worker.join();
        }
    }
}

impl Drop for Listener {
    fn drop(&mut self) {
        self.shutdown();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::ValueTree;
    use std::time::Instant;

    fn ephemeral() -> Location {
        Location::parse("socket://127.0.0.1:0").unwrap()
    }

    fn echo(mut ch: Channel) {
        while let Ok(Some((m, _))) = ch.receive() {
            if ch.send(&m).is_err() {
                break;
            }
        }
    }

    #[test]
    fn exchange_over_ephemeral_port() {
        let mut l = listen(&ephemeral(), echo).unwrap();
        assert_ne!(l.local_addr().port(), 0);
        let msg = Message::new("get_car", ValueTree::leaf("x").with_child("a", 1.into()));
        let reply = solicit(l.location(), &msg, DEFAULT_TIMEOUT, None).unwrap();
        assert_eq!(reply, msg);
        l.shutdown();
    }

    #[test]
    fn fifo_on_one_channel() {
        let _l = listen(&ephemeral(), echo).unwrap();
        let mut ch = Channel::connect(_l.location(), DEFAULT_TIMEOUT).unwrap();
        for i in 0..20 {
            ch.send(&Message::new("n", i.into())).unwrap();
        }
        for i in 0..20 {
            let (m, _) = ch.receive().unwrap().unwrap();
            assert_eq!(m.payload, ValueTree::leaf(i));
        }
    }

    #[test]
    fn second_bind_fails() {
        let l = listen(&ephemeral(), echo).unwrap();
        let again = Location::parse(&format!("socket://127.0.0.1:{}", l.local_addr().port())).unwrap();
        let err = listen(&again, echo).err().unwrap();
        assert_eq!(err.fault_name(), "BindError");
    }

    #[test]
    fn closed_port_is_connect_error() {
        let port = {
            let l = listen(&ephemeral(), echo).unwrap();
            l.local_addr().port()
        };
        let loc = Location::parse(&format!("socket://127.0.0.1:{port}")).unwrap();
        let msg = Message::new("x", ValueTree::new());
        let err = solicit(&loc, &msg, DEFAULT_TIMEOUT, None).unwrap_err();
        assert_eq!(err.fault_name(), "ConnectError");
        let err = notify(&loc, &msg, DEFAULT_TIMEOUT, None).unwrap_err();
        assert_eq!(err.fault_name(), "ConnectError");
    }

    #[test]
    fn silent_server_times_out() {
        let l = listen(&ephemeral(), |mut ch: Channel| {
            while let Ok(Some(_)) = ch.receive() {}
        })
        .unwrap();
        let start = Instant::now();
        let err = solicit(
            l.location(),
            &Message::new("x", ValueTree::new()),
            Duration::from_millis(100),
            None,
        )
        .unwrap_err();
        let took = start.elapsed();
        assert_eq!(err.fault_name(), "TimeoutError");
        assert!(took >= Duration::from_millis(100) && took < Duration::from_millis(200), "{took:?}");
    }

    #[test]
    fn notify_delivers_payload() {
        let (tx, rx) = std::sync::mpsc::channel();
        let tx = Mutex::new(tx);
        let l = listen(&ephemeral(), move |mut ch: Channel| {
            while let Ok(Some((m, _))) = ch.receive() {
                tx.lock().unwrap().send(m).unwrap();
            }
        })
        .unwrap();
        let payload = ValueTree::new().with_child("k", "v".into());
        notify(l.location(), &Message::new("ow", payload.clone()), DEFAULT_TIMEOUT, None).unwrap();
        notify(l.location(), &Message::new("ow", ValueTree::new()), DEFAULT_TIMEOUT, None).unwrap();
        let mut got: Vec<_> = (0..2)
            .map(|_| rx.recv_timeout(Duration::from_secs(5)).unwrap().payload)
            .collect();
        got.sort_by_key(|v| v.has_children());
        assert_eq!(got, vec![ValueTree::new(), payload]);
    }
}
