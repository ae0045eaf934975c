#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtclab::rl::{PolicyNetwork, Sample, PARAM_COUNT, STATE_LEN};
use rtclab::simcore::{EnqueueOutcome, Link, Micros, Packet};

/// Counts from one randomized link run.
#[derive(Debug, Default)]
pub struct LinkRun {
    pub events: usize,
    pub offered: usize,
    pub delivered: usize,
    pub dropped: usize,
    pub backlog: usize,
}

/// Drives a random link with `packets` random arrivals and checks
/// conservation, FIFO order, the delay floor and the queue bound as it goes.
pub fn random_link_run(seed: u64, packets: usize) -> Result<LinkRun, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut segments = vec![(0, rng.gen_range(0.2e6..20e6))];
    let mut t = 0;
    for _ in 0..rng.gen_range(0..8) {
        t += rng.gen_range(10_000..2_000_000);
        segments.push((t, rng.gen_range(0.2e6..20e6)));
    }
    let max_bps = segments.iter().map(|s| s.1).fold(0.0, f64::max);
    let owd: Micros = rng.gen_range(0..100_000);
    let loss = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.0..0.2) };
    let cap = rng.gen_range(1..120);
    let mut link = Link::new(segments, owd, loss, cap, seed);

    let mut run = LinkRun::default();
    let mut now: Micros = 0;
    let mut last_admitted: Option<u64> = None;
    let mut last_departed: Option<u64> = None;
    let mut last_deliver: Micros = 0;
    let mut check_departures = |out: Vec<(Packet, Micros)>, run: &mut LinkRun| -> Result<(), String> {
        for (p, d) in out {
            run.events += 1;
            run.delivered += 1;
            if last_departed.is_some_and(|l| p.id <= l) {
                return Err(format!("packet {} departed after {:?}", p.id, last_departed));
            }
            if d < last_deliver {
                return Err(format!("delivery time went back at packet {}", p.id));
            }
            let tx_floor = (p.size_bytes as f64 * 8.0 * 1e6 / max_bps).floor() as Micros;
            if d < p.enqueue_us + owd + tx_floor {
                return Err(format!("packet {} beat the delay floor", p.id));
            }
            last_departed = Some(p.id);
            last_deliver = d;
        }
        Ok(())
    };
    for id in 0..packets as u64 {
        now += rng.gen_range(0..3_000);
        let size = rng.gen_range(60..1_500);
        run.offered += 1;
        run.events += 1;
        match link.enqueue_packet(Packet::raw(id, size), now) {
            EnqueueOutcome::Queued => {
                if last_admitted.is_some_and(|l| id <= l) {
                    return Err("admission order".into());
                }
                last_admitted = Some(id);
            }
            EnqueueOutcome::DroppedQueue(_) | EnqueueOutcome::DroppedRandom(_) => run.dropped += 1,
        }
        if link.occupancy() > link.capacity() {
            return Err(format!("occupancy {} above capacity {}", link.occupancy(), link.capacity()));
        }
        if rng.gen_bool(0.3) {
            let out = link.service_link(now);
            check_departures(out, &mut run)?;
        }
    }
    let out = link.service_link(now);
    check_departures(out, &mut run)?;
    run.backlog = link.backlog();
    if run.offered != run.delivered + run.dropped + run.backlog {
        return Err(format!("conservation: {run:?}"));
    }
    if link.max_occupancy() > link.capacity() {
        return Err("max occupancy above capacity".into());
    }
    Ok(run)
}

/// A small random buffer whose importance ratios stay well inside the clip
/// range, away from the surrogate's kinks.
pub fn random_buffer(net: &PolicyNetwork, rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| {
            let mut obs = [0.0; STATE_LEN];
            obs.iter_mut().for_each(|x| *x = rng.gen_range(-2.0..2.0));
            let mean = net.forward(&obs).unwrap().mean;
            let action = mean + rng.gen_range(-0.5..0.5);
            let lp = net.log_prob(mean, action);
            Sample {
                obs,
                action,
                log_prob_old: lp + rng.gen_range(-0.1..0.1),
                advantage: rng.gen_range(-2.0..2.0),
                ret: rng.gen_range(-3.0..3.0),
            }
        })
        .collect()
}

pub fn random_net(rng: &mut ChaCha8Rng) -> PolicyNetwork {
    let log_std = rng.gen_range(-1.5..0.0);
    let mut net = PolicyNetwork::new(rng, log_std);
    // larger head weights than at init so every parameter matters
    for p in net.params.iter_mut().take(PARAM_COUNT - 1) {
        *p += rng.gen_range(-0.3..0.3);
    }
    net
}

