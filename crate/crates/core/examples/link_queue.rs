//! Drives the bottleneck link directly: a sender offers twice the link rate
//! for one second, then goes quiet while the queue drains.
//!
//! ```text
//! cargo run --example link_queue
//! ```

use rtclab::simcore::{EnqueueOutcome, Link, Micros, Packet, HEADER_BYTES, MTU_PAYLOAD};

fn main() {
    let rate_bps = 2e6;
    let owd: Micros = 20_000;
    let mut link = Link::new(vec![(0, rate_bps)], owd, 0.0, 30, 7);
    let size = MTU_PAYLOAD + HEADER_BYTES;
    // 4 Mbps offered: one full packet every 2.48 ms
    let gap = (size as f64 * 8.0 * 1e6 / (2.0 * rate_bps)) as Micros;

    let (mut queued, mut dropped) = (0, 0);
    let mut delays = Vec::new();
    let mut now = 0;
    let mut id = 0;
    while now < 2_000_000 {
        if now < 1_000_000 {
            match link.enqueue_packet(Packet::raw(id, size), now) {
                EnqueueOutcome::Queued => queued += 1,
                _ => dropped += 1,
            }
            id += 1;
        }
        for (p, at) in link.service_link(now) {
            delays.push((at - p.enqueue_us) as f64 / 1e3);
        }
        if id % 80 == 0 && now < 1_000_000 {
            println!("t {:>5.0} ms  occupancy {:>2}", now as f64 / 1e3, link.occupancy());
        }
        now += gap;
    }
    let max = delays.iter().cloned().fold(0.0, f64::max);
    println!(
        "offered {id}, queued {queued}, dropped {dropped}, delivered {}, max one-way delay {max:.1} ms (floor {} ms)",
        delays.len(),
        owd / 1000
    );
}
