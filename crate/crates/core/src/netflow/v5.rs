//! NetFlow v5 wire format.
//!
//! A datagram is a 24-byte header followed by `count` 48-byte flow records,
//! all fields big-endian. Padding bytes are kept so that re-encoding a parsed
//! datagram reproduces the input exactly.

use std::net::Ipv4Addr;

use serde::Serialize;
use thiserror::Error;

pub const VERSION: u16 = 5;
pub const HEADER_LEN: usize = 24;
pub const RECORD_LEN: usize = 48;
pub const MAX_RECORDS: u16 = 30;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("BadVersion: version {version} at byte {offset}, expected 5")]
    BadVersion { version: u16, offset: usize },
    #[error("BadCount: record count {count} at byte {offset}, expected 1..=30")]
    BadCount { count: u16, offset: usize },
    #[error("TruncatedDatagram: {actual} bytes, expected {expected} (mismatch at byte {offset})")]
    TruncatedDatagram {
        expected: usize,
        actual: usize,
        offset: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Header {
    pub version: u16,
    pub count: u16,
    /// Milliseconds since the exporter booted.
    pub sys_uptime: u32,
    pub unix_secs: u32,
    pub unix_nsecs: u32,
    pub flow_sequence: u32,
    pub engine_type: u8,
    pub engine_id: u8,
    pub sampling_interval: u16,
}

impl Header {
    /// Packet sampling rate (1 when unsampled). The top two bits of the
    /// field carry the sampling mode.
    pub fn sampling_rate(&self) -> u32 {
        match u32::from(self.sampling_interval & 0x3fff) {
            0 => 1,
            n => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Record {
    pub src_addr: Ipv4Addr,
    pub dst_addr: Ipv4Addr,
    pub next_hop: Ipv4Addr,
    pub input_if: u16,
    pub output_if: u16,
    pub packets: u32,
    pub octets: u32,
    /// Exporter uptime at the first packet, ms.
    pub first: u32,
    /// Exporter uptime at the last packet, ms.
    pub last: u32,
    pub src_port: u16,
    pub dst_port: u16,
    pub pad1: u8,
    pub tcp_flags: u8,
    pub protocol: u8,
    pub tos: u8,
    pub src_as: u16,
    pub dst_as: u16,
    pub src_mask: u8,
    pub dst_mask: u8,
    pub pad2: u16,
}

impl Record {
    /// `first <= last` and, when packets were seen, at least one byte each.
    pub fn is_consistent(&self) -> bool {
        self.first <= self.last && (self.packets == 0 || self.octets >= self.packets)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Datagram {
    pub header: Header,
    pub records: Vec<Record>,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn addr_at(b: &[u8], at: usize) -> Ipv4Addr {
    Ipv4Addr::from(u32_at(b, at))
}

/// Decodes one datagram. Any byte slice is accepted; malformed input is an error.
pub fn parse_datagram(bytes: &[u8]) -> Result<Datagram, ParseError> {
    let truncated = |expected: usize| ParseError::TruncatedDatagram {
        expected,
        actual: bytes.len(),
        offset: bytes.len().min(expected),
    };
    if bytes.len() < 2 {
        return Err(truncated(HEADER_LEN));
    }
    let version = u16_at(bytes, 0);
    if version != VERSION {
        return Err(ParseError::BadVersion { version, offset: 0 });
    }
    if bytes.len() < 4 {
        return Err(truncated(HEADER_LEN));
    }
    let count = u16_at(bytes, 2);
    if count == 0 || count > MAX_RECORDS {
        return Err(ParseError::BadCount { count, offset: 2 });
    }
    let expected = HEADER_LEN + RECORD_LEN * usize::from(count);
    if bytes.len() != expected {
        return Err(truncated(expected));
    }

    let header = Header {
        version,
        count,
        sys_uptime: u32_at(bytes, 4),
        unix_secs: u32_at(bytes, 8),
        unix_nsecs: u32_at(bytes, 12),
        flow_sequence: u32_at(bytes, 16),
        engine_type: bytes[20],
        engine_id: bytes[21],
        sampling_interval: u16_at(bytes, 22),
    };
    let records = bytes[HEADER_LEN..]
        .chunks_exact(RECORD_LEN)
        .map(|r| Record {
            src_addr: addr_at(r, 0),
            dst_addr: addr_at(r, 4),
            next_hop: addr_at(r, 8),
            input_if: u16_at(r, 12),
            output_if: u16_at(r, 14),
            packets: u32_at(r, 16),
            octets: u32_at(r, 20),
            first: u32_at(r, 24),
            last: u32_at(r, 28),
            src_port: u16_at(r, 32),
            dst_port: u16_at(r, 34),
            pad1: r[36],
            tcp_flags: r[37],
            protocol: r[38],
            tos: r[39],
            src_as: u16_at(r, 40),
            dst_as: u16_at(r, 42),
            src_mask: r[44],
            dst_mask: r[45],
            pad2: u16_at(r, 46),
        })
        .collect();
    Ok(Datagram { header, records })
}

impl Datagram {
    /// Builds a datagram, setting `header.count` from the records.
    pub fn new(mut header: Header, records: Vec<Record>) -> Self {
        header.version = VERSION;
        header.count = records.len() as u16;
        Datagram { header, records }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + RECORD_LEN * self.records.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        let h = &self.header;
        out.extend_from_slice(&h.version.to_be_bytes());
        out.extend_from_slice(&h.count.to_be_bytes());
        out.extend_from_slice(&h.sys_uptime.to_be_bytes());
        out.extend_from_slice(&h.unix_secs.to_be_bytes());
        out.extend_from_slice(&h.unix_nsecs.to_be_bytes());
        out.extend_from_slice(&h.flow_sequence.to_be_bytes());
        out.push(h.engine_type);
        out.push(h.engine_id);
        out.extend_from_slice(&h.sampling_interval.to_be_bytes());
        for r in &self.records {
            out.extend_from_slice(&r.src_addr.octets());
            out.extend_from_slice(&r.dst_addr.octets());
            out.extend_from_slice(&r.next_hop.octets());
            out.extend_from_slice(&r.input_if.to_be_bytes());
            out.extend_from_slice(&r.output_if.to_be_bytes());
            out.extend_from_slice(&r.packets.to_be_bytes());
            out.extend_from_slice(&r.octets.to_be_bytes());
            out.extend_from_slice(&r.first.to_be_bytes());
            out.extend_from_slice(&r.last.to_be_bytes());
            out.extend_from_slice(&r.src_port.to_be_bytes());
            out.extend_from_slice(&r.dst_port.to_be_bytes());
            out.push(r.pad1);
            out.push(r.tcp_flags);
            out.push(r.protocol);
            out.push(r.tos);
            out.extend_from_slice(&r.src_as.to_be_bytes());
            out.extend_from_slice(&r.dst_as.to_be_bytes());
            out.push(r.src_mask);
            out.push(r.dst_mask);
            out.extend_from_slice(&r.pad2.to_be_bytes());
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("ClockInconsistent: {0}")]
pub struct ClockInconsistent(pub String);

/// Absolute `(first, last)` of a record in epoch seconds.
///
/// The exporter booted at `unix_secs + unix_nsecs * 1e-9 - sys_uptime / 1000`;
/// record timestamps are uptime offsets from that instant.
pub fn to_absolute_time(header: &Header, record: &Record) -> Result<(f64, f64), ClockInconsistent> {
    let export = f64::from(header.unix_secs) + f64::from(header.unix_nsecs) * 1e-9;
    let boot = export - f64::from(header.sys_uptime) / 1000.0;
    if boot < 0.0 {
        return Err(ClockInconsistent(format!(
            "uptime {} ms exceeds export time {export} s",
            header.sys_uptime
        )));
    }
    if record.first > record.last {
        return Err(ClockInconsistent(format!(
            "record first {} ms is after last {} ms",
            record.first, record.last
        )));
    }
    let first = boot + f64::from(record.first) / 1000.0;
    let last = boot + f64::from(record.last) / 1000.0;
    Ok((first, last))
}
