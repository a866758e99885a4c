//! Line transports: a reader thread feeds a channel so every receive can be
//! bounded by a timeout.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::Message;
use crate::sim::PolicyError;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// A bidirectional stream of [`Message`] frames.
pub struct Transport {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    closed: bool,
}

fn transport_err(e: impl std::fmt::Display) -> PolicyError {
    PolicyError::Transport(e.to_string())
}

impl Transport {
    pub fn from_streams<R, W>(reader: R, writer: W) -> Self
    where
        R: Read + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(reader);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = tx.send(Err(e));
                        break;
                    }
                }
            }
        });
        Self {
            writer: Box::new(writer),
            lines: rx,
            child: None,
            closed: false,
        }
    }

    /// Spawns `argv` and talks to it over its stdin/stdout. Stderr is inherited.
    pub fn spawn(argv: &[String]) -> Result<Self, PolicyError> {
        let (prog, args) = argv
            .split_first()
            .ok_or_else(|| PolicyError::Transport("empty policy command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PolicyError::Transport(format!("cannot start {prog:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut t = Self::from_streams(stdout, stdin);
        t.child = Some(child);
        Ok(t)
    }

    pub fn from_tcp(stream: TcpStream) -> Result<Self, PolicyError> {
        stream.set_nodelay(true).map_err(transport_err)?;
        let reader = stream.try_clone().map_err(transport_err)?;
        Ok(Self::from_streams(reader, TcpWriter(stream)))
    }

    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, PolicyError> {
        Self::from_tcp(TcpStream::connect(addr).map_err(transport_err)?)
    }

    /// Waits up to `timeout` for one client on `listener`.
    pub fn accept(listener: &TcpListener, timeout: Duration) -> Result<Self, PolicyError> {
        listener.set_nonblocking(true).map_err(transport_err)?;
        let deadline = Instant::now() + timeout;
        loop {
            match listener.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false).map_err(transport_err)?;
                    return Self::from_tcp(stream);
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Err(PolicyError::Timeout(timeout));
                    }
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(transport_err(e)),
            }
        }
    }

    pub fn send(&mut self, msg: &Message) -> Result<(), PolicyError> {
        if self.closed {
            return Err(PolicyError::Transport("transport closed".into()));
        }
        self.writer
            .write_all(msg.to_line().as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(transport_err)
    }

    /// Next frame, skipping blank lines.
    pub fn recv(&mut self, timeout: Duration) -> Result<Message, PolicyError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(left) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(transport_err(e)),
                Err(RecvTimeoutError::Timeout) => return Err(PolicyError::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(PolicyError::Transport("peer closed the connection".into()))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            return Message::from_line(&line)
                .map_err(|e| PolicyError::Protocol(format!("malformed frame {:?}: {e}", line.trim_end())));
        }
    }

    /// Stops sending; a spawned child sees EOF and is reaped.
    pub fn close(&mut self) {
        if self.closed {
            return;
        }
        self.closed = true;
        self.writer = Box::new(std::io::sink());
        if let Some(mut child) = self.child.take() {
            // Give a well-behaved child a moment to exit on EOF.
            let deadline = Instant::now() + Duration::from_secs(2);
            loop {
                match child.try_wait() {
                    Ok(Some(_)) => break,
                    Ok(None) if Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                    _ => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                }
            }
        }
    }
}

impl Drop for Transport {
    fn drop(&mut self) {
        self.close();
    }
}

/// Shuts the socket down when dropped; the reader thread holds a clone, so
/// dropping the writer alone would never send FIN.
struct TcpWriter(TcpStream);

impl Write for TcpWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.write(buf)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.0.flush()
    }
}

impl Drop for TcpWriter {
    fn drop(&mut self) {
        let _ = self.0.shutdown(Shutdown::Both);
    }
}

/// An in-memory pipe pair for tests and in-process clients.
pub fn duplex() -> (Transport, Transport) {
    let (a_read, b_write) = pipe();
    let (b_read, a_write) = pipe();
    (Transport::from_streams(a_read, a_write), Transport::from_streams(b_read, b_write))
}

struct PipeReader {
    rx: Receiver<Vec<u8>>,
    buf: Vec<u8>,
    pos: usize,
}

struct PipeWriter {
    tx: mpsc::Sender<Vec<u8>>,
}

fn pipe() -> (PipeReader, PipeWriter) {
    let (tx, rx) = mpsc::channel();
    (
        PipeReader {
            rx,
            buf: Vec::new(),
            pos: 0,
        },
        PipeWriter { tx },
    )
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> std::io::Result<usize> {
        if self.pos == self.buf.len() {
            match self.rx.recv() {
                Ok(chunk) => {
                    self.buf = chunk;
                    self.pos = 0;
                }
                Err(_) => return Ok(0),
            }
        }
        let n = out.len().min(self.buf.len() - self.pos);
        out[..n].copy_from_slice(&self.buf[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

impl Write for PipeWriter {
    fn write(&mut self, data: &[u8]) -> std::io::Result<usize> {
        self.tx
            .send(data.to_vec())
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::BrokenPipe, "pipe closed"))?;
        Ok(data.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplex_roundtrip_and_timeout() {
        let (mut a, mut b) = duplex();
        a.send(&Message::hello()).unwrap();
        assert_eq!(b.recv(Duration::from_secs(1)).unwrap(), Message::hello());
        assert!(matches!(b.recv(Duration::from_millis(20)), Err(PolicyError::Timeout(_))));
        drop(a);
        assert!(matches!(b.recv(Duration::from_secs(1)), Err(PolicyError::Transport(_))));
    }

    #[test]
    fn tcp_roundtrip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let h = thread::spawn(move || {
            let mut c = Transport::connect(addr).unwrap();
            let m = c.recv(Duration::from_secs(5)).unwrap();
            c.send(&m).unwrap();
        });
        let mut s = Transport::accept(&listener, Duration::from_secs(5)).unwrap();
        s.send(&Message::Reset { episode_id: 9 }).unwrap();
        assert_eq!(s.recv(Duration::from_secs(5)).unwrap(), Message::Reset { episode_id: 9 });
        h.join().unwrap();
    }

    #[test]
    fn accept_times_out() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        assert!(matches!(
            Transport::accept(&listener, Duration::from_millis(30)),
            Err(PolicyError::Timeout(_))
        ));
    }
}
