use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{
    ms_to_us, s_to_us, AckSample, EnqueueOutcome, FeedbackContext, FeedbackReport, FrameRecord,
    Link, Micros, Packet, SessionLog, SessionMeta, FEEDBACK_INTERVAL_US,
};
use crate::codec::{
    decode_deadline, decode_nvc, decode_traditional, frame_loss_rate, CodecMode, CodecSession,
    EncodedFrame, TraditionalDecode, FRAME_INTERVAL_US,
};
use crate::controllers::{clamp_rate, Controller, ControllerDecision};
use crate::traces::NetworkTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub duration_s: f64,
    /// Jitter-buffer slack added to each frame's decode deadline.
    pub deadline_slack_ms: f64,
    /// Extra time after the last frame during which outstanding frames may
    /// still be decoded. No new frames or feedback are produced.
    pub drain_s: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            duration_s: 30.0,
            deadline_slack_ms: 60.0,
            drain_s: 1.0,
        }
    }
}

impl SessionConfig {
    pub fn with_duration(duration_s: f64) -> Self {
        Self {
            duration_s,
            ..Default::default()
        }
    }
}

// Same-instant events run in this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Event {
    LossNotice { packet: u64 },
    Deadline { frame: usize },
    Feedback,
    Encode { frame: usize },
    Send { frame: usize, index: usize },
}

struct FrameState {
    frame: EncodedFrame,
    arrivals: Vec<Option<Micros>>,
    rtt_sum_ms: f64,
    rtt_n: usize,
    record: FrameRecord,
}

struct Sim<'a> {
    link: Link,
    codec: CodecSession,
    controller: &'a mut dyn Controller,
    heap: BinaryHeap<Reverse<(Micros, Event, u64)>>,
    seq: u64,
    owd_us: Micros,
    min_rtt_us: Micros,
    slack_us: Micros,
    duration_us: Micros,
    rate_kbps: f64,

    packets: Vec<Packet>,
    frames: Vec<FrameState>,
    next_to_finalize: usize,
    last_decode_us: Option<Micros>,
    newly_final: Vec<usize>,

    acks: VecDeque<AckSample>,
    losses: VecDeque<(Micros, u64)>,
    window_sent: usize,
    window_bytes_sent: usize,
    acked_history: VecDeque<usize>,

    log: SessionLog,
}

/// Replays `trace` for `cfg.duration_s` with one frame every 40 ms encoded at
/// the controller's current rate and paced evenly across the frame interval.
/// The controller sees a report every 50 ms. The run is a pure function of its
/// inputs and `seed`.
pub fn run_session(
    trace: &NetworkTrace,
    controller: &mut dyn Controller,
    codec: CodecSession,
    cfg: &SessionConfig,
    seed: u64,
) -> Result<SessionLog> {
    if !(cfg.duration_s.is_finite() && cfg.duration_s > 0.0) {
        return Err(Error::Config(format!(
            "session duration must be positive, got {}",
            cfg.duration_s
        )));
    }
    trace.validate()?;
    if trace.duration_s + 1e-9 < cfg.duration_s {
        log::warn!(
            "trace {} covers {} s of a {} s session; its last segment is extended",
            trace.label,
            trace.duration_s,
            cfg.duration_s
        );
    }

    let owd_us = ms_to_us(trace.owd_ms());
    let duration_us = s_to_us(cfg.duration_s);
    let initial = controller.initial_decision();
    let meta = SessionMeta {
        controller: controller.name(),
        trace: trace.label.clone(),
        profile: codec.profile.label.clone(),
        codec_mode: codec.mode(),
        seed,
        duration_us,
        owd_us,
        link_backlog_at_end: 0,
    };
    let mut sim = Sim {
        link: Link::from_trace(trace, seed),
        codec,
        controller,
        heap: BinaryHeap::new(),
        seq: 0,
        owd_us,
        min_rtt_us: 2 * owd_us,
        slack_us: ms_to_us(cfg.deadline_slack_ms),
        duration_us,
        rate_kbps: clamp_rate(initial.rate_kbps),
        packets: Vec::new(),
        frames: Vec::new(),
        next_to_finalize: 0,
        last_decode_us: None,
        newly_final: Vec::new(),
        acks: VecDeque::new(),
        losses: VecDeque::new(),
        window_sent: 0,
        window_bytes_sent: 0,
        acked_history: VecDeque::with_capacity(4),
        log: SessionLog {
            meta,
            packets: Vec::new(),
            frames: Vec::new(),
            decisions: vec![initial],
            switches: Vec::new(),
            rewards: Vec::new(),
        },
    };
    sim.run(s_to_us(cfg.duration_s + cfg.drain_s));
    Ok(sim.finish())
}

impl Sim<'_> {
    fn schedule(&mut self, at: Micros, ev: Event) {
        self.seq += 1;
        self.heap.push(Reverse((at, ev, self.seq)));
    }

    fn run(&mut self, end_us: Micros) {
        self.schedule(0, Event::Encode { frame: 0 });
        if FEEDBACK_INTERVAL_US <= self.duration_us {
            self.schedule(FEEDBACK_INTERVAL_US, Event::Feedback);
        }
        while let Some(&Reverse((t, _, _))) = self.heap.peek() {
            if t > end_us {
                break;
            }
            let Reverse((t, ev, _)) = self.heap.pop().unwrap();
            self.pump_link(t);
            match ev {
                Event::Encode { frame } => self.encode(t, frame),
                Event::Send { frame, index } => self.send(t, frame, index, None),
                Event::Feedback => self.feedback(t),
                Event::Deadline { .. } => self.finalize_ready(t),
                Event::LossNotice { packet } => self.retransmit(t, packet),
            }
        }
        self.pump_link(end_us);
        self.finalize_ready(end_us);
    }

    fn pump_link(&mut self, now: Micros) {
        let departed = self.link.service_link(now);
        if departed.is_empty() {
            return;
        }
        for (pkt, deliver) in departed {
            let id = pkt.id as usize;
            self.packets[id].deliver_us = Some(deliver);
            let ack_us = deliver + self.owd_us;
            let send_us = self.packets[id].enqueue_us;
            self.acks.push_back(AckSample {
                id: pkt.id,
                send_us,
                ack_us,
                size_bytes: pkt.size_bytes,
            });
            let fs = &mut self.frames[pkt.frame_id as usize];
            let slot = &mut fs.arrivals[pkt.index];
            *slot = Some(slot.map_or(deliver, |t| t.min(deliver)));
            fs.rtt_sum_ms += (ack_us - send_us) as f64 / 1000.0;
            fs.rtt_n += 1;
        }
        self.finalize_ready(now);
    }

    fn encode(&mut self, t: Micros, idx: usize) {
        if let Some(d) = self.controller.on_frame(t) {
            self.apply(d);
        }
        let deadline = decode_deadline(t, self.owd_us, self.slack_us);
        let frame = EncodedFrame::new(idx as u64, t, self.rate_kbps, deadline);
        let n = frame.packet_count;
        for k in 0..n {
            let at = t + (k as u64 * FRAME_INTERVAL_US) / n as u64;
            self.schedule(at, Event::Send { frame: idx, index: k });
        }
        self.schedule(deadline, Event::Deadline { frame: idx });
        self.frames.push(FrameState {
            frame,
            arrivals: vec![None; n],
            rtt_sum_ms: 0.0,
            rtt_n: 0,
            record: FrameRecord {
                frame_id: idx as u64,
                encode_us: t,
                deadline_us: deadline,
                bitrate_kbps: frame.target_bitrate_kbps,
                packets: n,
                loss_rate: 1.0,
                decode_us: None,
                quality_db: None,
                quality_norm: None,
                mean_rtt_ms: None,
            },
        });
        let next = t + FRAME_INTERVAL_US;
        if next < self.duration_us {
            self.schedule(next, Event::Encode { frame: idx + 1 });
        }
    }

    fn send(&mut self, t: Micros, frame: usize, index: usize, retransmit_of: Option<u64>) {
        let payload = self.frames[frame].frame.payload_of(index);
        let id = self.packets.len() as u64;
        let mut pkt = Packet::new(id, frame as u64, index, payload, t);
        pkt.retransmit_of = retransmit_of;
        self.packets.push(pkt.clone());
        if t < self.duration_us {
            self.window_sent += 1;
            self.window_bytes_sent += pkt.size_bytes;
        }
        match self.link.enqueue_packet(pkt, t) {
            EnqueueOutcome::Queued => {}
            EnqueueOutcome::DroppedQueue(p) | EnqueueOutcome::DroppedRandom(p) => {
                self.packets[id as usize].drop_cause = p.drop_cause;
                let notice = t + self.min_rtt_us;
                self.losses.push_back((notice, id));
                if self.codec.mode() == CodecMode::Traditional && notice < self.duration_us {
                    self.schedule(notice, Event::LossNotice { packet: id });
                }
            }
        }
    }

    /// NACK-style repair for the traditional codec: resend a lost packet once
    /// its loss is known at the sender, unless the slot arrived meanwhile.
    fn retransmit(&mut self, t: Micros, packet: u64) {
        let p = &self.packets[packet as usize];
        let (frame, index) = (p.frame_id as usize, p.index);
        let original = p.retransmit_of.unwrap_or(packet);
        if self.frames[frame].arrivals[index].is_some() || frame < self.next_to_finalize {
            return;
        }
        self.send(t, frame, index, Some(original));
    }

    fn feedback(&mut self, t: Micros) {
        let start = t - FEEDBACK_INTERVAL_US;
        let mut report = FeedbackReport {
            window_start_us: start,
            window_end_us: t,
            packets_sent: std::mem::take(&mut self.window_sent),
            bytes_sent: std::mem::take(&mut self.window_bytes_sent),
            ..Default::default()
        };
        while self.acks.front().is_some_and(|a| a.ack_us < t) {
            let a = self.acks.pop_front().unwrap();
            report.bytes_acked += a.size_bytes;
            report.acks.push(a);
        }
        while self.losses.front().is_some_and(|l| l.0 < t) {
            report.lost_ids.push(self.losses.pop_front().unwrap().1);
        }

        if self.acked_history.len() == 4 {
            self.acked_history.pop_front();
        }
        self.acked_history.push_back(report.bytes_acked);
        let span_s = 4.0 * FEEDBACK_INTERVAL_US as f64 / 1e6;
        let recent = self.acked_history.iter().sum::<usize>() as f64 * 8.0 / span_s / 1000.0;

        let frames: Vec<FrameRecord> = self
            .newly_final
            .drain(..)
            .map(|i| self.frames[i].record.clone())
            .collect();
        let ctx = FeedbackContext {
            now_us: t,
            report: &report,
            frames: &frames,
            current_rate_kbps: self.rate_kbps,
            recent_throughput_kbps: recent,
        };
        let out = self.controller.on_feedback(&ctx);
        if let Some(r) = out.reward {
            self.log.rewards.push((t, r));
        }
        if let Some(s) = out.switch {
            self.log.switches.push(s);
        }
        self.apply(out.decision);

        let next = t + FEEDBACK_INTERVAL_US;
        if next <= self.duration_us {
            self.schedule(next, Event::Feedback);
        }
    }

    fn apply(&mut self, mut d: ControllerDecision) {
        d.rate_kbps = clamp_rate(d.rate_kbps);
        self.rate_kbps = d.rate_kbps;
        self.log.decisions.push(d);
    }

    /// Decodes frames in order as soon as their outcome is determined.
    fn finalize_ready(&mut self, now: Micros) {
        while self.next_to_finalize < self.frames.len() {
            let i = self.next_to_finalize;
            let prev = self.last_decode_us.unwrap_or(0);
            let fs = &self.frames[i];
            let complete_at = fs
                .arrivals
                .iter()
                .try_fold(0, |acc: Micros, a| a.map(|t| acc.max(t)));
            let loss = frame_loss_rate(&fs.frame, &fs.arrivals);
            let (decode_us, quality) = match self.codec.mode() {
                CodecMode::Nvc => {
                    let at = match complete_at {
                        Some(c) if c <= fs.frame.decode_deadline_us => c,
                        _ if now >= fs.frame.decode_deadline_us => fs.frame.decode_deadline_us,
                        _ => break,
                    };
                    let (q, next_ref) = decode_nvc(
                        &self.codec.profile,
                        &self.codec.damage_model,
                        &fs.frame,
                        loss,
                        self.codec.reference,
                    );
                    self.codec.reference = next_ref;
                    (at.max(prev), q)
                }
                CodecMode::Traditional => {
                    match decode_traditional(&self.codec.profile, &fs.frame, &fs.arrivals) {
                        TraditionalDecode::Decoded {
                            quality_db,
                            decode_us,
                        } => (decode_us.max(prev), quality_db),
                        TraditionalDecode::Pending => break,
                    }
                }
            };
            let norm = self.codec.profile.normalize(quality);
            let fs = &mut self.frames[i];
            fs.record.decode_us = Some(decode_us);
            fs.record.quality_db = Some(quality);
            fs.record.quality_norm = Some(norm);
            fs.record.loss_rate = loss;
            fs.record.mean_rtt_ms = (fs.rtt_n > 0).then(|| fs.rtt_sum_ms / fs.rtt_n as f64);
            self.last_decode_us = Some(decode_us);
            self.newly_final.push(i);
            self.next_to_finalize += 1;
        }
    }

    fn finish(mut self) -> SessionLog {
        self.controller.on_session_end();
        for fs in &mut self.frames {
            if fs.record.decode_us.is_none() {
                fs.record.loss_rate = frame_loss_rate(&fs.frame, &fs.arrivals);
                fs.record.mean_rtt_ms = (fs.rtt_n > 0).then(|| fs.rtt_sum_ms / fs.rtt_n as f64);
            }
        }
        self.log.meta.link_backlog_at_end = self.link.backlog();
        self.log.packets = self.packets;
        self.log.frames = self.frames.into_iter().map(|f| f.record).collect();
        self.log
    }
}
