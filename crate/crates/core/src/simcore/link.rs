use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DropCause, Micros, Packet};
use crate::traces::NetworkTrace;

#[derive(Debug, Clone, PartialEq)]
pub enum EnqueueOutcome {
    Queued,
    DroppedQueue(Packet),
    DroppedRandom(Packet),
}

/// Drop-tail FIFO bottleneck with a piecewise-constant service rate.
///
/// Queue occupancy counts packets waiting behind the one in transmission.
/// Random loss is decided before queue admission.
#[derive(Debug, Clone)]
pub struct Link {
    /// `(start_us, bits_per_second)`, sorted, first at 0.
    segments: Vec<(Micros, f64)>,
    owd_us: Micros,
    random_loss_rate: f64,
    capacity: usize,
    rng: ChaCha8Rng,
    waiting: VecDeque<Packet>,
    in_service: Option<(Packet, Micros)>,
    clock: Micros,
    departed: Vec<(Packet, Micros)>,
    max_occupancy: usize,
}

impl Link {
    pub fn new(
        segments: Vec<(Micros, f64)>,
        owd_us: Micros,
        random_loss_rate: f64,
        capacity: usize,
        seed: u64,
    ) -> Self {
        assert!(
            matches!(segments.first(), Some((0, _))),
            "link segments must start at t = 0"
        );
        assert!(segments.iter().all(|&(_, bps)| bps > 0.0));
        Self {
            segments,
            owd_us,
            random_loss_rate,
            capacity,
            rng: ChaCha8Rng::seed_from_u64(seed),
            waiting: VecDeque::new(),
            in_service: None,
            clock: 0,
            departed: Vec::new(),
            max_occupancy: 0,
        }
    }

    pub fn from_trace(trace: &NetworkTrace, seed: u64) -> Self {
        let mut segments: Vec<(Micros, f64)> = Vec::with_capacity(trace.breakpoints.len());
        for &(t, mbps) in &trace.breakpoints {
            let at = super::s_to_us(t);
            match segments.last_mut() {
                Some(last) if last.0 == at => last.1 = mbps * 1e6,
                _ => segments.push((at, mbps * 1e6)),
            }
        }
        Self::new(
            segments,
            super::ms_to_us(trace.owd_ms()),
            trace.random_loss_rate,
            trace.queue_capacity_packets,
            seed,
        )
    }

    pub fn owd_us(&self) -> Micros {
        self.owd_us
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Packets waiting behind the one in transmission.
    pub fn occupancy(&self) -> usize {
        self.waiting.len()
    }

    /// Highest occupancy seen at any admission.
    pub fn max_occupancy(&self) -> usize {
        self.max_occupancy
    }

    /// Packets accepted but not yet departed (waiting + in transmission).
    pub fn backlog(&self) -> usize {
        self.waiting.len() + usize::from(self.in_service.is_some())
    }

    pub fn bandwidth_bps_at(&self, t: Micros) -> f64 {
        let idx = self.segments.partition_point(|&(s, _)| s <= t);
        self.segments[idx - 1].1
    }

    /// Offers a packet to the link at `now`. The link is advanced to `now`
    /// first so occupancy reflects every departure up to that instant.
    pub fn enqueue_packet(&mut self, mut pkt: Packet, now: Micros) -> EnqueueOutcome {
        self.advance(now);
        pkt.enqueue_us = now;
        if self.random_loss_rate > 0.0 && self.rng.gen::<f64>() < self.random_loss_rate {
            pkt.drop_cause = Some(DropCause::RandomLoss);
            return EnqueueOutcome::DroppedRandom(pkt);
        }
        if self.in_service.is_none() {
            let finish = self.transmit_end(now, pkt.size_bytes);
            self.in_service = Some((pkt, finish));
            return EnqueueOutcome::Queued;
        }
        if self.waiting.len() >= self.capacity {
            pkt.drop_cause = Some(DropCause::QueueOverflow);
            return EnqueueOutcome::DroppedQueue(pkt);
        }
        self.waiting.push_back(pkt);
        self.max_occupancy = self.max_occupancy.max(self.waiting.len());
        EnqueueOutcome::Queued
    }

    /// Every packet whose transmission completed by `until`, in departure
    /// order, paired with its delivery time (departure + one-way delay).
    pub fn service_link(&mut self, until: Micros) -> Vec<(Packet, Micros)> {
        self.advance(until);
        std::mem::take(&mut self.departed)
    }

    fn advance(&mut self, until: Micros) {
        debug_assert!(until >= self.clock, "link clock moved backwards");
        while let Some((_, finish)) = self.in_service {
            if finish > until {
                break;
            }
            let (mut pkt, finish) = self.in_service.take().unwrap();
            let deliver = finish + self.owd_us;
            pkt.deliver_us = Some(deliver);
            self.departed.push((pkt, deliver));
            if let Some(next) = self.waiting.pop_front() {
                let end = self.transmit_end(finish, next.size_bytes);
                self.in_service = Some((next, end));
            }
        }
        self.clock = self.clock.max(until);
    }

    /// Completion time of a transmission starting at `start`, integrating the
    /// piecewise-constant rate across segment boundaries.
    fn transmit_end(&self, start: Micros, size_bytes: usize) -> Micros {
        let mut remaining = (size_bytes * 8) as f64;
        let mut idx = self.segments.partition_point(|&(s, _)| s <= start) - 1;
        let mut t = start;
        loop {
            let bps = self.segments[idx].1;
            let seg_end = self.segments.get(idx + 1).map(|s| s.0);
            let need_us = remaining * 1e6 / bps;
            match seg_end {
                Some(end) if (t as f64 + need_us) > end as f64 + 1e-9 => {
                    remaining -= bps * (end - t) as f64 / 1e6;
                    t = end;
                    idx += 1;
                }
                _ => return t + (need_us - 1e-9).ceil().max(0.0) as Micros,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(bps: f64, owd_us: Micros, loss: f64, cap: usize) -> Link {
        Link::new(vec![(0, bps)], owd_us, loss, cap, 1)
    }

    #[test]
    fn single_packet_timing() {
        let mut l = link(1e6, 10_000, 0.0, 10);
        assert_eq!(l.enqueue_packet(Packet::raw(0, 1250), 0), EnqueueOutcome::Queued);
        assert!(l.service_link(9_999).is_empty());
        let out = l.service_link(10_000);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1, 20_000);
    }

    #[test]
    fn empty_link_delivers_nothing() {
        let mut l = link(1e6, 10_000, 0.0, 10);
        assert!(l.service_link(1_000_000).is_empty());
    }

    #[test]
    fn back_to_back_spacing_is_one_serialization_time() {
        let mut l = link(1e6, 10_000, 0.0, 10);
        l.enqueue_packet(Packet::raw(0, 1250), 0);
        l.enqueue_packet(Packet::raw(1, 1250), 0);
        let out = l.service_link(1_000_000);
        assert_eq!(out[1].1 - out[0].1, 10_000);
    }

    #[test]
    fn overflow_drops() {
        let mut l = link(1e6, 0, 0.0, 1);
        assert_eq!(l.enqueue_packet(Packet::raw(0, 1250), 0), EnqueueOutcome::Queued);
        assert_eq!(l.enqueue_packet(Packet::raw(1, 1250), 0), EnqueueOutcome::Queued);
        assert_eq!(l.occupancy(), 1);
        assert!(matches!(
            l.enqueue_packet(Packet::raw(2, 1250), 0),
            EnqueueOutcome::DroppedQueue(p) if p.drop_cause == Some(DropCause::QueueOverflow)
        ));
    }

    #[test]
    fn zero_and_certain_random_loss() {
        let mut never = link(1e9, 0, 0.0, 1_000_000);
        let mut always = link(1e9, 0, 1.0, 1_000_000);
        for i in 0..10_000 {
            assert!(!matches!(
                never.enqueue_packet(Packet::raw(i, 100), i),
                EnqueueOutcome::DroppedRandom(_)
            ));
            assert!(matches!(
                always.enqueue_packet(Packet::raw(i, 100), i),
                EnqueueOutcome::DroppedRandom(_)
            ));
        }
    }

    /// Independent oracle: walk the timeline in 1 µs steps accumulating bits.
    fn brute_force_finish(segments: &[(Micros, f64)], start: Micros, bits: f64) -> Micros {
        let mut sent = 0.0;
        let mut t = start;
        while sent + 1e-6 < bits {
            let bps = segments.iter().rev().find(|s| s.0 <= t).unwrap().1;
            sent += bps / 1e6;
            t += 1;
        }
        t
    }

    #[test]
    fn rate_change_mid_packet_integrates() {
        let segs = vec![(0, 1e6), (5_000, 2e6)];
        let mut l = Link::new(segs.clone(), 0, 0.0, 10, 1);
        l.enqueue_packet(Packet::raw(0, 1250), 0);
        let out = l.service_link(1_000_000);
        // 5000 bits in the first 5 ms, the remaining 5000 at 2 Mbps
        assert_eq!(out[0].1, 7_500);
        assert_eq!(out[0].1, brute_force_finish(&segs, 0, 10_000.0));
    }

    #[test]
    fn integration_matches_oracle_across_many_segments() {
        let segs = vec![(0, 0.6e6), (3_217, 5.5e6), (4_001, 1.3e6), (9_999, 2.2e6)];
        let l = Link::new(segs.clone(), 0, 0.0, 10, 1);
        for start in [0, 1_000, 3_216, 3_217, 4_000] {
            for size in [100, 1240, 3000] {
                let got = l.transmit_end(start, size);
                let want = brute_force_finish(&segs, start, (size * 8) as f64);
                assert!(got.abs_diff(want) <= 1, "start {start} size {size}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn fifo_under_load() {
        let mut l = link(2e6, 5_000, 0.0, 1000);
        for i in 0..200 {
            l.enqueue_packet(Packet::raw(i, 300 + (i as usize * 37) % 900), i * 100);
        }
        let out = l.service_link(10_000_000);
        assert_eq!(out.len(), 200);
        for w in out.windows(2) {
            assert!(w[0].0.id < w[1].0.id);
            assert!(w[0].1 <= w[1].1);
        }
    }
}
