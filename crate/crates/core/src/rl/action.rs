use crate::controllers::clamp_rate;

/// Inputs to the action-to-rate mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateState {
    /// Sending rate of the previous step (kbps).
    pub x_prev: f64,
    /// Acknowledged throughput over the past 200 ms (kbps).
    pub gamma_tput: f64,
}

/// Maps an action in `[-1, 1]` to a sending rate.
///
/// Positive actions scale the previous rate up by up to 2x. Negative actions
/// scale down from the smaller of the recent throughput and the previous
/// rate, so the mapping is monotone in `a`. The result is clamped to the
/// global rate bounds.
pub fn map_action(a: f64, rs: RateState) -> f64 {
    let a = if a.is_finite() { a.clamp(-1.0, 1.0) } else { 0.0 };
    let rate = if a >= 0.0 {
        rs.x_prev * (1.0 + a)
    } else {
        rs.gamma_tput.min(rs.x_prev) * (1.0 + a)
    };
    clamp_rate(rate)
}
