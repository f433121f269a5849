//! Toll-level-indexed travel-time perceptions.
//!
//! Each traveler keeps one perceived travel time per departure window and per
//! discrete toll level. A level's table is materialized on first update;
//! until then it reads as free-flow time.

use super::population::TravelerProfile;
use super::toll::MAX_TOLL_LEVEL;

#[derive(Clone, Debug, PartialEq)]
pub struct PerceptionTable {
    /// Offset of each traveler's first window in a level table.
    offsets: Vec<usize>,
    /// Free-flow time per traveler, the initial perception.
    free_flow: Vec<f64>,
    levels: Vec<Option<Vec<f64>>>,
}

impl PerceptionTable {
    pub fn new(travelers: &[TravelerProfile], free_flow_speed: f64) -> Self {
        let mut offsets = Vec::with_capacity(travelers.len() + 1);
        let mut total = 0usize;
        for t in travelers {
            offsets.push(total);
            total += t.window_count as usize;
        }
        offsets.push(total);
        Self {
            offsets,
            free_flow: travelers.iter().map(|t| t.trip_length / free_flow_speed * 60.0).collect(),
            levels: vec![None; MAX_TOLL_LEVEL + 1],
        }
    }

    pub fn traveler_count(&self) -> usize {
        self.free_flow.len()
    }

    /// Perceived travel time of `traveler` for window `k` at toll `level`.
    #[inline]
    pub fn get(&self, level: usize, traveler: usize, k: usize) -> f64 {
        match &self.levels[level] {
            Some(table) => table[self.offsets[traveler] + k],
            None => self.free_flow[traveler],
        }
    }

    /// All window perceptions of a traveler at a level, or `None` if still at free flow.
    pub fn traveler_row(&self, level: usize, traveler: usize) -> Option<&[f64]> {
        self.levels[level]
            .as_ref()
            .map(|table| &table[self.offsets[traveler]..self.offsets[traveler + 1]])
    }

    pub fn is_materialized(&self, level: usize) -> bool {
        self.levels[level].is_some()
    }

    /// Raw perceptions of one level in traveler-major order (free flow if untouched).
    pub fn level_values(&self, level: usize) -> Vec<f64> {
        match &self.levels[level] {
            Some(table) => table.clone(),
            None => (0..self.traveler_count())
                .flat_map(|n| std::iter::repeat_n(self.free_flow[n], self.offsets[n + 1] - self.offsets[n]))
                .collect(),
        }
    }

    /// Exponential smoothing toward observed times at `level` only.
    ///
    /// `observed(traveler, k)` returns the experienced time for the chosen
    /// window or the probe time for an unchosen one.
    pub fn update<F>(&mut self, level: usize, weight: f64, mut observed: F)
    where
        F: FnMut(usize, usize) -> f64,
    {
        assert!(level <= MAX_TOLL_LEVEL, "toll level out of range");
        if self.levels[level].is_none() {
            self.levels[level] = Some(self.level_values(level));
        }
        let offsets = &self.offsets;
        let table = self.levels[level].as_mut().expect("materialized above");
        for n in 0..offsets.len() - 1 {
            let row = &mut table[offsets[n]..offsets[n + 1]];
            for (k, perceived) in row.iter_mut().enumerate() {
                *perceived = smooth(*perceived, observed(n, k), weight);
            }
        }
    }
}

/// `(1 - θ) perceived + θ observed`.
#[inline]
pub fn smooth(perceived: f64, observed: f64, weight: f64) -> f64 {
    (1.0 - weight) * perceived + weight * observed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::ScenarioConfig;
    use crate::sim::population::make_traveler;

    #[test]
    fn smoothing_cases() {
        assert_eq!(smooth(30.0, 40.0, 0.5), 35.0);
        assert_eq!(smooth(30.0, 99.0, 0.0), 30.0);
        assert_eq!(smooth(30.0, 40.0, 1.0), 40.0);
    }

    #[test]
    fn update_touches_only_one_level() {
        let config = ScenarioConfig::desk();
        let travelers: Vec<_> = (0..3).map(|i| make_traveler(i, &config, 100.0, 470.0 + i as f64, 18.0, 1.0)).collect();
        let mut table = PerceptionTable::new(&travelers, 45.0);
        table.update(2, 0.5, |_, _| 30.0);
        let before: Vec<_> = (0..=MAX_TOLL_LEVEL).map(|l| table.level_values(l)).collect();
        table.update(5, 0.5, |n, k| 24.0 + n as f64 + k as f64);
        for level in (0..=MAX_TOLL_LEVEL).filter(|&l| l != 5) {
            assert_eq!(table.level_values(level), before[level]);
        }
        assert_eq!(table.get(2, 1, 7), 27.0);
        assert_eq!(table.get(5, 1, 7), 0.5 * 24.0 + 0.5 * 32.0);
        assert_eq!(table.get(0, 1, 7), 24.0);
        assert!(!table.is_materialized(0));
    }
}
