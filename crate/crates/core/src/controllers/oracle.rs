use super::{Controller, ControllerDecision, Mode, StepOutput};
use crate::codec::{FPS, FRAME_INTERVAL_US};
use crate::simcore::{FeedbackContext, Micros, HEADER_BYTES, MTU_PAYLOAD};
use crate::traces::NetworkTrace;

/// Largest video bitrate whose packetized frames fit exactly in the wire
/// budget of `bandwidth_mbps` over one frame interval.
pub fn max_payload_rate_kbps(bandwidth_mbps: f64) -> f64 {
    let budget = (bandwidth_mbps * 1e6 / 8.0 / FPS).floor() as usize;
    let wire_packet = MTU_PAYLOAD + HEADER_BYTES;
    let full = budget / wire_packet;
    let rest = budget - full * wire_packet;
    let payload = full * MTU_PAYLOAD + rest.saturating_sub(HEADER_BYTES);
    payload as f64 * 8.0 * FPS / 1000.0
}

/// Rate that makes the on-wire rate match the lowest bandwidth seen during
/// the frame interval starting at `t_us`.
pub fn oracle_rate(trace: &NetworkTrace, t_us: Micros) -> ControllerDecision {
    let from = t_us as f64 / 1e6;
    let to = (t_us + FRAME_INTERVAL_US) as f64 / 1e6;
    let bw = trace.min_bandwidth_over(from, to);
    ControllerDecision::new(t_us, max_payload_rate_kbps(bw), Mode::Oracle)
}

/// Knows the whole trace and re-targets at every frame.
#[derive(Debug, Clone)]
pub struct OracleController {
    trace: NetworkTrace,
}

impl OracleController {
    pub fn new(trace: NetworkTrace) -> Self {
        Self { trace }
    }
}

impl Controller for OracleController {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn initial_decision(&mut self) -> ControllerDecision {
        oracle_rate(&self.trace, 0)
    }

    fn on_feedback(&mut self, ctx: &FeedbackContext<'_>) -> StepOutput {
        ControllerDecision::new(ctx.now_us, ctx.current_rate_kbps, Mode::Oracle).into()
    }

    fn on_frame(&mut self, now_us: Micros) -> Option<ControllerDecision> {
        Some(oracle_rate(&self.trace, now_us))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_budget_is_respected() {
        for bw in [0.6, 1.0, 2.0, 3.7, 6.0] {
            let r = max_payload_rate_kbps(bw);
            let size = crate::codec::frame_size_bytes(r);
            let wire = size + HEADER_BYTES * crate::codec::packet_count(size);
            let budget = bw * 1e6 / 8.0 / FPS;
            assert!(wire as f64 <= budget + 1.0, "bw {bw}: wire {wire} budget {budget}");
            assert!(wire as f64 >= budget * 0.97);
        }
    }

    #[test]
    fn rate_changes_at_breakpoint() {
        let t = NetworkTrace::new("s", vec![(0.0, 2.0), (5.0, 1.0)], 10.0, 20.0, 0.0, 10).unwrap();
        let before = oracle_rate(&t, 4_000_000).rate_kbps;
        let at = oracle_rate(&t, 5_000_000).rate_kbps;
        let after = oracle_rate(&t, 5_040_000).rate_kbps;
        assert!(before > at);
        assert_eq!(at, after);
        assert_eq!(at, max_payload_rate_kbps(1.0));
        // the frame straddling the drop already uses the lower bandwidth
        assert_eq!(oracle_rate(&t, 4_980_000).rate_kbps, at);
    }
}
