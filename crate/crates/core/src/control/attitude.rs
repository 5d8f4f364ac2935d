/// Proportional attitude loop: `[roll, pitch]` setpoints and estimates in,
/// body-rate setpoints out, each clamped to `±rate_limit`.
pub fn attitude_p(setpoint: [f64; 2], estimate: [f64; 2], gain: f64, rate_limit: f64) -> [f64; 2] {
    [0, 1].map(|i| (gain * (setpoint[i] - estimate[i])).clamp(-rate_limit, rate_limit))
}
