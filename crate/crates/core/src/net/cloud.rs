use crate::rng::RngStream;
use crate::time::SimDuration;

/// Wide-area segment joining the two subnets: uniform delay around a base,
/// optional independent loss. Packets may overtake each other.
#[derive(Debug, Clone, PartialEq)]
pub struct IpCloud {
    pub base_delay: SimDuration,
    pub jitter_half_width: SimDuration,
    pub loss_prob: f64,
}

impl Default for IpCloud {
    fn default() -> Self {
        IpCloud {
            base_delay: SimDuration::from_millis(30),
            jitter_half_width: SimDuration::from_millis(5),
            loss_prob: 0.0,
        }
    }
}

impl IpCloud {
    pub fn validate(&self) -> bool {
        (0.0..1.0).contains(&self.loss_prob)
    }

    /// Delay for one packet, or `None` if the cloud drops it. The lower end
    /// of the range is clamped at zero.
    pub fn cloud_forward(&self, rng: &mut RngStream) -> Option<SimDuration> {
        if rng.bernoulli(self.loss_prob) {
            return None;
        }
        let base = self.base_delay.as_micros();
        let hw = self.jitter_half_width.as_micros();
        let lo = base.saturating_sub(hw);
        let hi = base + hw;
        Some(SimDuration::from_micros(lo + rng.uniform_inclusive(hi - lo)))
    }
}
