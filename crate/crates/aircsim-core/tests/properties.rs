//! Property tests for the physics helpers, event queue, and metrics.

use aircsim_core::engine::EventQueue;
use aircsim_core::metrics::MetricsCollector;
use aircsim_core::model::{propagation_delay, AirLayer, TaskFate};
use proptest::prelude::*;

proptest! {
    /// Free-space propagation delay is linear in distance.
    #[test]
    fn propagation_is_linear(h in 1.0f64..2_000_000.0, k in 1.0f64..10.0) {
        let d1 = propagation_delay(h).unwrap();
        let dk = propagation_delay(h * k).unwrap();
        let rel = (dk - d1 * k).abs() / dk;
        prop_assert!(rel < 1e-12, "nonlinear: {d1} * {k} vs {dk}");
    }

    /// Any altitude inside a layer's band yields a delay inside the
    /// published range (widened 15% for the rounded endpoints).
    #[test]
    fn layer_delay_brackets_altitude(
        layer in prop_oneof![Just(AirLayer::Lap), Just(AirLayer::Hap), Just(AirLayer::Leo)],
        frac in 0.01f64..=1.0,
    ) {
        let (lo_km, hi_km) = layer.altitude_range_km();
        let alt_m = (lo_km + frac * (hi_km - lo_km)) * 1000.0;
        prop_assume!(alt_m > 0.0);
        let d = propagation_delay(alt_m).unwrap();
        let (d_lo, d_hi) = layer.delay_range();
        prop_assert!(
            d >= d_lo * 0.85 && d <= d_hi * 1.15,
            "{layer:?} at {alt_m} m: {d} outside [{d_lo}, {d_hi}]"
        );
    }

    /// Events pop in nondecreasing time order, FIFO within equal times.
    #[test]
    fn event_queue_is_ordered(times in prop::collection::vec(0.0f64..1000.0, 1..200)) {
        let mut q: EventQueue<usize> = EventQueue::new();
        for (i, &t) in times.iter().enumerate() {
            q.schedule(t, i);
        }
        let mut popped = Vec::new();
        while let Some(ev) = q.pop_until(f64::INFINITY) {
            popped.push(ev);
        }
        prop_assert_eq!(popped.len(), times.len());
        for pair in popped.windows(2) {
            prop_assert!(pair[0].0 <= pair[1].0, "time order violated");
            if pair[0].0 == pair[1].0 {
                prop_assert!(pair[0].1 < pair[1].1, "FIFO tie-break violated");
            }
        }
    }

    /// Window rates stay in [0, 1] and windows sum to the resolved total.
    #[test]
    fn metrics_conserve_counts(
        resolutions in prop::collection::vec(
            (0.0f64..1000.0, 0u8..4u8),
            0..300,
        ),
        pending in 0u64..50,
    ) {
        let mut m = MetricsCollector::new(&[1], 1000.0, 100.0);
        for _ in 0..resolutions.len() as u64 + pending {
            m.record_generated(0);
        }
        let mut succeeded = 0u64;
        for &(at, fate_ix) in &resolutions {
            let fate = match fate_ix {
                0 => TaskFate::Succeeded,
                1 => TaskFate::FailedDeadline,
                2 => TaskFate::FailedNoTarget,
                _ => TaskFate::FailedNodeDestroyed,
            };
            if fate == TaskFate::Succeeded {
                succeeded += 1;
            }
            m.record(0, fate, at);
        }
        let series = m.time_series(0);
        for w in &series {
            if let Some(r) = w.rate {
                prop_assert!((0.0..=1.0).contains(&r));
                prop_assert!(w.completed > 0);
            } else {
                prop_assert_eq!(w.completed, 0);
            }
        }
        let completed: u64 = series.iter().map(|w| w.completed).sum();
        let window_succeeded: u64 = series.iter().map(|w| w.succeeded).sum();
        prop_assert_eq!(completed, resolutions.len() as u64);
        prop_assert_eq!(window_succeeded, succeeded);
        let summary = m.summary(0);
        prop_assert_eq!(summary.towns[0].pending_at_end, pending);
        prop_assert_eq!(summary.towns[0].resolved(), completed);
    }
}
