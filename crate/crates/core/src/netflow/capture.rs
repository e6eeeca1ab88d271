//! Datagram capture files and the UDP receiver.
//!
//! A capture file is a sequence of frames, each a big-endian `u32` length
//! followed by that many datagram bytes.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, ErrorKind, Read, Write};
use std::net::{ToSocketAddrs, UdpSocket};
use std::path::Path;
use std::time::{Duration, Instant};

/// Largest UDP payload; bigger frames indicate a corrupt file.
pub const MAX_FRAME: usize = 65_535;

pub fn write_frame<W: Write>(out: &mut W, datagram: &[u8]) -> io::Result<()> {
    if datagram.len() > MAX_FRAME {
        return Err(io::Error::new(
            ErrorKind::InvalidInput,
            "datagram larger than 65535 bytes",
        ));
    }
    out.write_all(&(datagram.len() as u32).to_be_bytes())?;
    out.write_all(datagram)
}

pub fn write_capture_file<D: AsRef<[u8]>>(
    path: impl AsRef<Path>,
    datagrams: &[D],
) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for d in datagrams {
        write_frame(&mut out, d.as_ref())?;
    }
    out.flush()
}

/// Iterates over the frames of a capture stream.
pub struct FrameReader<R: Read> {
    input: R,
    done: bool,
}

impl<R: Read> FrameReader<R> {
    pub fn new(input: R) -> Self {
        FrameReader { input, done: false }
    }
}

impl FrameReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(FrameReader::new(BufReader::new(File::open(path)?)))
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = io::Result<Vec<u8>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut len = [0u8; 4];
        let mut filled = 0;
        while filled < 4 {
            match self.input.read(&mut len[filled..]) {
                Ok(0) if filled == 0 => {
                    self.done = true;
                    return None;
                }
                Ok(0) => {
                    self.done = true;
                    return Some(Err(io::Error::new(
                        ErrorKind::UnexpectedEof,
                        "truncated frame length",
                    )));
                }
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
        }
        let len = u32::from_be_bytes(len) as usize;
        if len > MAX_FRAME {
            self.done = true;
            return Some(Err(io::Error::new(
                ErrorKind::InvalidData,
                format!("frame length {len} exceeds {MAX_FRAME}"),
            )));
        }
        let mut frame = vec![0u8; len];
        if let Err(e) = self.input.read_exact(&mut frame) {
            self.done = true;
            return Some(Err(e));
        }
        Some(Ok(frame))
    }
}

/// When a UDP receive loop stops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReceiveLimit {
    pub max_datagrams: Option<u64>,
    pub duration: Option<Duration>,
}

/// Receives datagrams on `addr` and hands each to `handle` until the limit
/// is reached. With no limit it runs until an I/O error.
pub fn receive_udp<A, F>(addr: A, limit: ReceiveLimit, mut handle: F) -> io::Result<u64>
where
    A: ToSocketAddrs,
    F: FnMut(&[u8]),
{
    let socket = UdpSocket::bind(addr)?;
    log::info!("listening on {}", socket.local_addr()?);
    receive_on(&socket, limit, &mut handle)
}

pub fn receive_on<F: FnMut(&[u8])>(
    socket: &UdpSocket,
    limit: ReceiveLimit,
    handle: &mut F,
) -> io::Result<u64> {
    let deadline = limit.duration.map(|d| Instant::now() + d);
    let mut buf = vec![0u8; MAX_FRAME];
    let mut received = 0u64;
    loop {
        if limit.max_datagrams.is_some_and(|m| received >= m) {
            return Ok(received);
        }
        let timeout = match deadline {
            Some(deadline) => {
                let left = deadline.saturating_duration_since(Instant::now());
                if left.is_zero() {
                    return Ok(received);
                }
                Some(left)
            }
            None => None,
        };
        socket.set_read_timeout(timeout)?;
        match socket.recv_from(&mut buf) {
            Ok((n, _)) => {
                received += 1;
                handle(&buf[..n]);
            }
            Err(e)
                if matches!(
                    e.kind(),
                    ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted
                ) => {}
            Err(e) => return Err(e),
        }
    }
}
