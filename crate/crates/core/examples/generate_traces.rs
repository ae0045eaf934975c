//! Generates a reproducible set of piecewise-constant bandwidth traces,
//! saves them, reloads one and prints a summary of each.
//!
//! ```text
//! cargo run --example generate_traces -- [out_dir] [count] [seed]
//! ```

use std::path::PathBuf;

use rtclab::traces::{generate_traces, load_trace, Span, TraceGenParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "rtclab-out/example-traces".into()));
    let count: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    // narrower than the defaults to show how each range is configured
    let params = TraceGenParams {
        bandwidth_mbps: Span::new(1.0, 6.0),
        min_rtt_ms: Span::new(20.0, 80.0),
        ..Default::default()
    };
    let traces = generate_traces(&params, count, seed)?;
    std::fs::create_dir_all(&dir)?;
    for t in &traces {
        let path = dir.join(format!("{}.txt", t.label));
        t.save(&path)?;
        let back = load_trace(&path)?;
        assert_eq!(&back, t);
        println!(
            "{:<24} mean {:>5.2} Mbps  segments {:>2}  rtt {:>4.0} ms  queue {:>3} pkts  loss {:.3}",
            t.label,
            t.mean_bandwidth_mbps(),
            t.breakpoints.len(),
            t.min_rtt_ms,
            t.queue_capacity_packets,
            t.random_loss_rate
        );
    }
    println!("wrote {} traces to {}", traces.len(), dir.display());
    Ok(())
}
