//! Single-reservoir trip-based MFD.
//!
//! Time advances in whole minutes. During minute `t` every vehicle in the
//! network travels `v(n_t) / 60` miles, where `n_t` counts vehicles that have
//! entered by `t` and not yet completed their trip. A vehicle finishing inside
//! a minute exits at the interpolated instant, so travelled distance equals the
//! trip length exactly. Trips still running at the end of the horizon continue
//! at the speed of the final minute.

/// Speed-accumulation relation `v0 (1 - n / n_jam)^2`, floored at `min_speed`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedFunction {
    pub free_flow: f64,
    pub jam_accumulation: f64,
    pub min_speed: f64,
}

impl SpeedFunction {
    #[inline]
    pub fn speed(&self, accumulation: f64) -> f64 {
        let ratio = (accumulation / self.jam_accumulation).min(1.0);
        let slack = 1.0 - ratio;
        (self.free_flow * slack * slack).max(self.min_speed)
    }
}

/// A car trip to simulate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarTrip {
    pub traveler: usize,
    pub departure: u32,
    pub length: f64,
}

/// Realized supply-side outcome of a day.
#[derive(Clone, Debug, PartialEq)]
pub struct MfdOutcome {
    /// Travel time per input trip, same order as the input (min).
    pub travel_times: Vec<f64>,
    /// Accumulation during each minute of the horizon.
    pub accumulation: Vec<u32>,
    /// Speed during each minute of the horizon (mph).
    pub speeds: Vec<f64>,
    /// Cumulative distance a probe would travel from minute 0, indexed by minute boundary (miles).
    pub cumulative_distance: Vec<f64>,
    /// Trips had to be finished after the horizon on the frozen final speed.
    pub overrun: bool,
}

impl MfdOutcome {
    /// Speed used after the horizon.
    pub fn final_speed(&self) -> f64 {
        *self.speeds.last().expect("non-empty horizon")
    }

    /// Travel time of a probe departing at `minute` with trip `length`,
    /// integrating the realized speed profile without adding to accumulation.
    pub fn probe_travel_time(&self, minute: u32, length: f64) -> f64 {
        probe_travel_time(&self.cumulative_distance, self.final_speed(), minute as usize, length)
    }

    /// Probe travel times for departures at every minute of the horizon.
    pub fn probe_curve(&self, length: f64) -> Vec<f64> {
        let cum = &self.cumulative_distance;
        let horizon = cum.len() - 1;
        let per_min_after = self.final_speed() / 60.0;
        let mut out = Vec::with_capacity(horizon);
        let mut k = 0usize;
        for start in 0..horizon {
            k = k.max(start);
            let target = cum[start] + length;
            while k < horizon && cum[k + 1] < target {
                k += 1;
            }
            out.push(if k < horizon {
                let step = cum[k + 1] - cum[k];
                (k - start) as f64 + (target - cum[k]) / step
            } else {
                (horizon - start) as f64 + (target - cum[horizon]) / per_min_after
            });
        }
        out
    }
}

fn probe_travel_time(cum: &[f64], final_speed: f64, start: usize, length: f64) -> f64 {
    let horizon = cum.len() - 1;
    let target = cum[start] + length;
    if cum[horizon] < target {
        return (horizon - start) as f64 + (target - cum[horizon]) / (final_speed / 60.0);
    }
    // First boundary k with cum[k] >= target; crossing happens during minute k - 1.
    let k = start + cum[start..].partition_point(|&d| d < target);
    let step = cum[k] - cum[k - 1];
    (k - 1 - start) as f64 + (target - cum[k - 1]) / step
}

/// Simulates the car trips of one day.
pub fn simulate_mfd(trips: &[CarTrip], speed_fn: &SpeedFunction, horizon: u32) -> MfdOutcome {
    let horizon = horizon as usize;
    let mut by_minute: Vec<Vec<usize>> = vec![Vec::new(); horizon];
    for (i, trip) in trips.iter().enumerate() {
        assert!((trip.departure as usize) < horizon, "departure outside horizon");
        by_minute[trip.departure as usize].push(i);
    }

    let mut travel_times = vec![f64::NAN; trips.len()];
    let mut accumulation = Vec::with_capacity(horizon);
    let mut speeds = Vec::with_capacity(horizon);
    let mut cumulative = Vec::with_capacity(horizon + 1);
    cumulative.push(0.0);
    // (trip index, remaining miles)
    let mut active: Vec<(usize, f64)> = Vec::new();

    for (t, entering) in by_minute.iter().enumerate() {
        active.extend(entering.iter().map(|&i| (i, trips[i].length)));
        let n = active.len();
        let v = speed_fn.speed(n as f64);
        let per_minute = v / 60.0;
        accumulation.push(n as u32);
        speeds.push(v);
        cumulative.push(cumulative[t] + per_minute);
        active.retain_mut(|(i, remaining)| {
            if *remaining <= per_minute {
                let entry = trips[*i].departure as f64;
                travel_times[*i] = t as f64 + *remaining / per_minute - entry;
                false
            } else {
                *remaining -= per_minute;
                true
            }
        });
    }

    let overrun = !active.is_empty();
    if overrun {
        let per_minute = speeds.last().copied().unwrap_or(speed_fn.free_flow) / 60.0;
        for (i, remaining) in active {
            travel_times[i] = horizon as f64 + remaining / per_minute - trips[i].departure as f64;
        }
    }

    MfdOutcome { travel_times, accumulation, speeds, cumulative_distance: cumulative, overrun }
}
