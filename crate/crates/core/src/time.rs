//! Time-of-day helpers. Epoch timestamps are interpreted in service-local
//! time; front ends apply any UTC offset before handing data to the core.

#[allow(unused_imports)]
use num_traits::{Euclid, Float};

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;
pub const HOURS_PER_DAY: f64 = 24.0;

/// Hour of day in `[0, 24)` for an epoch timestamp in seconds.
pub fn hour_of_day(epoch_s: f64) -> f64 {
    let s = Euclid::rem_euclid(&epoch_s, &SECONDS_PER_DAY);
    let h = s / SECONDS_PER_HOUR;
    if h >= HOURS_PER_DAY {
        0.0
    } else {
        h
    }
}

/// Hourly bin in `0..24` for an hour-of-day value.
pub fn hour_bin(hour: f64) -> usize {
    let h = Euclid::rem_euclid(&hour, &HOURS_PER_DAY);
    (h as usize).min(23)
}

/// Day number since the epoch.
pub fn day_index(epoch_s: f64) -> i64 {
    (epoch_s / SECONDS_PER_DAY).floor() as i64
}

/// Epoch second of midnight for a day number.
pub fn day_start(day: i64) -> f64 {
    day as f64 * SECONDS_PER_DAY
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hour_and_day_split() {
        let t = day_start(19_000) + 12.5 * SECONDS_PER_HOUR;
        assert_eq!(day_index(t), 19_000);
        assert!((hour_of_day(t) - 12.5).abs() < 1e-12);
        assert_eq!(hour_bin(12.5), 12);
        assert_eq!(hour_bin(23.99), 23);
        assert_eq!(hour_bin(0.0), 0);
    }
}
