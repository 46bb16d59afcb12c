use std::time::Instant;

use serde::Serialize;

use super::stats::aggregate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub total_ms: f64,
    pub items: usize,
    /// Absent for an empty item set.
    pub per_item_ms: Option<f64>,
}

impl Timing {
    pub fn new(total_ms: f64, items: usize) -> Self {
        Self {
            total_ms,
            items,
            per_item_ms: (items > 0).then(|| total_ms / items as f64),
        }
    }
}

/// Runs `action` once on the monotonic clock.
pub fn time_action<T>(items: usize, action: impl FnOnce() -> T) -> (T, Timing) {
    let start = Instant::now();
    let out = action();
    let ms = start.elapsed().as_secs_f64() * 1e3;
    (out, Timing::new(ms, items))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatedTiming {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub runs: usize,
    pub per_item_ms: Option<f64>,
}

/// Runs `action` `runs` times (at least once) and reports mean and spread.
pub fn time_repeated(runs: usize, items: usize, mut action: impl FnMut()) -> RepeatedTiming {
    let samples: Vec<f64> = (0..runs.max(1)).map(|_| time_action(items, &mut action).1.total_ms).collect();
    let agg = aggregate(&samples).expect("non-empty");
    RepeatedTiming {
        mean_ms: agg.mean,
        std_ms: agg.std,
        runs: samples.len(),
        per_item_ms: (items > 0).then(|| agg.mean / items as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn empty_set_has_no_per_item() {
        let (_, t) = time_action(0, || ());
        assert!(t.per_item_ms.is_none());
    }

    #[test]
    fn sleep_is_measured() {
        let (_, t) = time_action(4, || std::thread::sleep(Duration::from_millis(100)));
        assert!((100.0..=200.0).contains(&t.total_ms), "{}", t.total_ms);
        assert!((t.per_item_ms.unwrap() - t.total_ms / 4.0).abs() < 1e-12);
    }

    #[test]
    fn repeated_reports_spread() {
        let r = time_repeated(3, 10, || std::thread::sleep(Duration::from_millis(2)));
        assert_eq!(r.runs, 3);
        assert!(r.std_ms >= 0.0 && r.mean_ms >= 2.0);
    }
}
