#![allow(dead_code)]

use std::net::Ipv4Addr;
use std::path::Path;
use std::process::{Command, Output};

use flowcap::netflow::{Datagram, Header, Record};

pub fn flowcap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowcap"))
        .args(args)
        .output()
        .expect("flowcap binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub const UNCONSTRAINED_CONF: &str = "\
model.lambda = 50
model.size.family = deterministic
model.size.params = 20000
model.duration.family = deterministic
model.duration.params = 2
sim.horizon = 600
sim.warmup = 20
sim.seed = 11
";

pub const PS_CONF: &str = "\
model.size.family = exponential
model.size.params = 100000
model.duration.family = deterministic
model.duration.params = 1
sim.mode = processor_sharing
sim.capacity = 1000000
sim.peak_rate = 10000
sim.horizon = 1000
sim.warmup = 100
sim.seed = 3
";

pub fn record(octets: u32, first: u32, last: u32) -> Record {
    Record {
        src_addr: Ipv4Addr::new(10, 1, 0, 1),
        dst_addr: Ipv4Addr::new(10, 2, 0, 1),
        next_hop: Ipv4Addr::new(10, 0, 0, 1),
        input_if: 1,
        output_if: 2,
        packets: 10,
        octets,
        first,
        last,
        src_port: 5000,
        dst_port: 80,
        pad1: 0,
        tcp_flags: 0x10,
        protocol: 6,
        tos: 0,
        src_as: 0,
        dst_as: 0,
        src_mask: 24,
        dst_mask: 24,
        pad2: 0,
    }
}

/// Exporter booted at epoch 1_000_000; datagram `i` is sent `i` seconds
/// later and carries `per` flows of one second each that ended just before.
pub fn corpus(count: u32, per: u32) -> Vec<Vec<u8>> {
    (0..count)
        .map(|i| {
            let uptime = 60_000 + i * 1000;
            let header = Header {
                version: 5,
                count: 0,
                sys_uptime: uptime,
                unix_secs: 1_000_000 + uptime / 1000,
                unix_nsecs: 0,
                flow_sequence: i * per,
                engine_type: 0,
                engine_id: 0,
                sampling_interval: 0,
            };
            let records = (0..per)
                .map(|j| record(1500 + j, uptime - 1000, uptime - 1))
                .collect();
            Datagram::new(header, records).encode()
        })
        .collect()
}
