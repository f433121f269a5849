use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Admissible ranges for the three toll parameters.
pub const AMPLITUDE_BOUNDS: (f64, f64) = (0.0, 7.0);
pub const CENTER_BOUNDS: (f64, f64) = (300.0, 540.0);
pub const WIDTH_BOUNDS: (f64, f64) = (50.0, 70.0);

/// Highest discrete toll level used to index travel-time perceptions.
pub const MAX_TOLL_LEVEL: usize = 7;

/// Gaussian-shaped toll tariff: `amplitude * exp(-(t - center)^2 / (2 width^2))` tokens.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TollProfile {
    /// Peak toll M (tokens).
    pub amplitude: f64,
    /// Time of the peak μ (minute of day).
    pub center: f64,
    /// Spread σ (min).
    pub width: f64,
}

impl TollProfile {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Self {
        Self { amplitude, center, width }
    }

    /// A zero toll (the no-tolling case). Center and width are irrelevant but valid.
    pub fn zero() -> Self {
        Self::new(0.0, 420.0, 60.0)
    }

    pub fn clamped(self) -> Self {
        Self {
            amplitude: self.amplitude.clamp(AMPLITUDE_BOUNDS.0, AMPLITUDE_BOUNDS.1),
            center: self.center.clamp(CENTER_BOUNDS.0, CENTER_BOUNDS.1),
            width: self.width.clamp(WIDTH_BOUNDS.0, WIDTH_BOUNDS.1),
        }
    }

    pub fn within_bounds(&self) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
        inside(self.amplitude, AMPLITUDE_BOUNDS)
            && inside(self.center, CENTER_BOUNDS)
            && inside(self.width, WIDTH_BOUNDS)
    }

    /// Toll charged for a departure at minute `t`.
    pub fn toll_at(&self, t: f64) -> f64 {
        toll_at(self, t)
    }

    /// Discrete toll level `clamp(round(M), 0, 7)` used to index perceptions.
    pub fn level(&self) -> usize {
        let rounded = self.amplitude.round();
        if rounded.is_nan() || rounded <= 0.0 {
            0
        } else {
            (rounded as usize).min(MAX_TOLL_LEVEL)
        }
    }

    /// Tolls for departures at every whole minute in `[0, horizon)`.
    pub fn by_minute(&self, horizon: u32) -> Vec<f64> {
        (0..horizon).map(|t| self.toll_at(t as f64)).collect()
    }
}

pub fn toll_at(profile: &TollProfile, t: f64) -> f64 {
    if profile.amplitude == 0.0 {
        return 0.0;
    }
    let z = t - profile.center;
    profile.amplitude * (-(z * z) / (2.0 * profile.width * profile.width)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_equals_amplitude() {
        let p = TollProfile::new(3.65, 443.05, 63.18);
        assert_eq!(p.toll_at(443.05), 3.65);
    }

    #[test]
    fn zero_amplitude_is_free() {
        let p = TollProfile::new(0.0, 400.0, 60.0);
        for t in [0.0, 123.4, 400.0, 719.0] {
            assert_eq!(p.toll_at(t), 0.0);
        }
    }

    #[test]
    fn one_width_from_center() {
        let p = TollProfile::new(3.65, 443.05, 63.18);
        let expected = 3.65 * (-0.5f64).exp();
        assert!((p.toll_at(443.05 + 63.18) - expected).abs() < 1e-12);
        assert!((expected - 2.2139).abs() < 1e-4);
    }

    #[test]
    fn levels_round_and_clamp() {
        assert_eq!(TollProfile::new(0.4, 400.0, 60.0).level(), 0);
        assert_eq!(TollProfile::new(3.5, 400.0, 60.0).level(), 4);
        assert_eq!(TollProfile::new(3.65, 400.0, 60.0).level(), 4);
        assert_eq!(TollProfile::new(7.0, 400.0, 60.0).level(), 7);
        assert_eq!(TollProfile::new(9.0, 400.0, 60.0).level(), 7);
    }

    #[test]
    fn clamping_enforces_bounds() {
        let p = TollProfile::new(-1.0, 900.0, 10.0).clamped();
        assert_eq!(p, TollProfile::new(0.0, 540.0, 50.0));
        assert!(p.within_bounds());
    }
}
