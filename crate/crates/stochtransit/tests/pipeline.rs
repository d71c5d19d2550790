use std::collections::BTreeSet;

use stochtransit::config::{GaussianityConfig, OnlineConfig, ReplayConfig};
use stochtransit::io::models::{Backend, EdgeEntry};
use stochtransit::pipeline::{self, PlanView};
use stochtransit::{replay, world, Error};
use stochtransit_core::corr::Independent;
use stochtransit_core::gp::batch::GpFitConfig;
use stochtransit_core::gp::TravelTimeModel;
use stochtransit_core::graph::EdgeKey;
use stochtransit_core::ingest::{extract_travel_times, IngestConfig, TravelTimeSample};
use stochtransit_core::sim::{default_laws, random_network, simulate_feed, SimConfig};
use stochtransit_core::ssp::{ranked_paths, EtaFeed, PlannerConfig};
use stochtransit_core::time;

fn crossing(days: usize, headway_min: f64) -> (world::World, Vec<TravelTimeSample>) {
    let w = world::crossing_world().unwrap();
    let cfg = world::sim_config(&w.graph, days, 19_000, headway_min, 11);
    let out = simulate_feed(&w.graph, &w.laws, &cfg).unwrap();
    let s = extract_travel_times(out.pings, &w.graph, &IngestConfig::default(), &|_| true).samples;
    (w, s)
}

fn quick_gp() -> GpFitConfig {
    GpFitConfig { max_train: 200, length_scale_starts: vec![1.0, 4.0], ..GpFitConfig::default() }
}

#[test]
fn fitted_models_recover_the_hourly_means() {
    let (w, s) = crossing(8, 20.0);
    let g = &w.graph;
    let ix = |id: &str| g.stop_ix(id).unwrap();
    let (set, summary) = pipeline::fit_models(g, &s, &quick_gp(), None).unwrap();
    assert_eq!(set.backend, Backend::Batch);
    assert_eq!(set.len(), g.ride_edges().len());
    assert!(summary.warnings.is_empty(), "{:?}", summary.warnings);
    let peaky = &set.edges[&EdgeKey::new(ix("s"), ix("ha"))];
    let steady = &set.edges[&EdgeKey::new(ix("s"), ix("hb"))];
    for (hour, want) in [(6.2, 300.0), (12.0, 900.0), (16.5, 900.0), (21.5, 300.0)] {
        let got = peaky.predict(hour).mean;
        assert!((got - want).abs() <= 0.05 * want, "s->ha at {hour}: {got} vs {want}");
    }
    for hour in [7.0, 12.0, 20.0] {
        let got = steady.predict(hour).mean;
        assert!((got - 500.0).abs() <= 25.0, "s->hb at {hour}: {got}");
    }
    // the spread tracks the simulated 8% coefficient of variation
    let sd = peaky.predict(12.0).std();
    assert!((40.0..=120.0).contains(&sd), "sd {sd}");
}

#[test]
fn online_fit_tracks_the_batch_fit() {
    let (w, s) = crossing(8, 20.0);
    let g = &w.graph;
    let (batch, _) = pipeline::fit_models(g, &s, &quick_gp(), None).unwrap();
    let (online, summary) = pipeline::fit_models(g, &s, &quick_gp(), Some(&OnlineConfig::default())).unwrap();
    assert_eq!(online.backend, Backend::Online);
    assert!(summary.edges.iter().all(|e| e.status == "streamed"));
    for (e, m) in &online.edges {
        assert!(matches!(m, EdgeEntry::Online(_)));
        // away from the ramps, where both smooth the corners differently
        for h in [9.5, 12.0, 15.0, 18.5] {
            let (a, b) = (m.predict(h).mean, batch.edges[e].predict(h).mean);
            assert!((a - b).abs() <= 0.03 * b, "{e:?} at {h}: online {a} vs batch {b}");
        }
    }
}

#[test]
fn fit_needs_samples() {
    let w = world::crossing_world().unwrap();
    let err = pipeline::fit_models(&w.graph, &[], &quick_gp(), None).unwrap_err();
    assert_eq!(err.kind(), "insufficient_data");
}

#[test]
fn sparse_edges_inherit_with_warnings() {
    let (w, s) = crossing(8, 20.0);
    let g = &w.graph;
    let ix = |id: &str| g.stop_ix(id).unwrap();
    let sparse = EdgeKey::new(ix("fa"), ix("ha"));
    let mut kept = 0;
    let thinned: Vec<TravelTimeSample> = s
        .into_iter()
        .filter(|x| {
            if x.edge != sparse {
                return true;
            }
            kept += 1;
            kept <= 5
        })
        .collect();
    let (set, summary) = pipeline::fit_models(g, &thinned, &quick_gp(), None).unwrap();
    let row = summary.edges.iter().find(|e| e.tail == "fa" && e.head == "ha").unwrap();
    assert_eq!((row.samples, row.status.as_str()), (5, "inherited"));
    assert!(summary.warnings.iter().any(|w| w.starts_with("fa->ha: 5 samples")), "{:?}", summary.warnings);
    assert!((set.edges[&sparse].predict(12.0).mean - 400.0).abs() < 60.0);
}

#[test]
fn timetable_from_records_takes_the_median_trip() {
    let g = random_network(10, 3, 3, 6, 5).unwrap();
    let laws = default_laws(&g, 8.0, 0.5, 0.1);
    let cfg = SimConfig { days: 5, seed: 5, ..SimConfig::default() };
    let out = simulate_feed(&g, &laws, &cfg).unwrap();
    let sched = pipeline::schedule_from_records(&g, &out.trips).unwrap();
    assert_eq!(sched.trips.len(), g.routes().len() * cfg.trips_per_route_per_day);
    let t = &sched.trips[0];
    let route_id = &g.route(t.route).id;
    let first = t.times[0].unwrap();
    let mut last: Vec<f64> = out
        .trips
        .iter()
        .filter(|r| &r.route == route_id && ((r.arrivals[0] - time::day_start(r.day)) - first).abs() < 0.5)
        .map(|r| r.arrivals[r.arrivals.len() - 1] - time::day_start(r.day))
        .collect();
    assert_eq!(last.len(), cfg.days);
    last.sort_by(|a, b| a.total_cmp(b));
    assert_eq!(t.times[t.times.len() - 1], Some(last[2]));
}

#[test]
fn random_queries_are_connected_and_seeded() {
    let g = random_network(12, 3, 3, 6, 2).unwrap();
    let a = pipeline::random_queries(&g, 50, 19_000..=19_002, 6.0, 21.0, 3).unwrap();
    let b = pipeline::random_queries(&g, 50, 19_000..=19_002, 6.0, 21.0, 3).unwrap();
    assert_eq!(a.len(), 50);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.origin, x.destination, x.tau0), (y.origin, y.destination, y.tau0));
        assert_ne!(x.origin, x.destination);
        let h = time::hour_of_day(x.tau0);
        assert!((6.0..21.0).contains(&h));
        assert!((19_000..=19_002).contains(&time::day_index(x.tau0)));
    }
}

#[test]
fn plan_view_names_stops_and_sums_indices() {
    let (w, s) = crossing(4, 30.0);
    let g = &w.graph;
    let (set, _) = pipeline::fit_models(g, &s, &quick_gp(), None).unwrap();
    let tau0 = time::day_start(19_001) + 8.0 * 3600.0;
    let plan = ranked_paths(g, w.origin, w.destination, tau0, &set, &Independent, &EtaFeed::new(), &PlannerConfig::default()).unwrap();
    let v = PlanView::new(g, &plan, set.backend, 1.5);
    assert_eq!((v.origin.as_str(), v.destination.as_str()), ("s", "t"));
    assert!((v.depart_hour - 8.0).abs() < 1e-9);
    let vias: BTreeSet<String> = v.candidates.iter().filter_map(|c| c.transfer.clone()).collect();
    assert_eq!(vias, ["ha", "hb"].iter().map(|s| s.to_string()).collect());
    assert!((v.index_sum - 1.0).abs() <= 0.02);
    for c in &v.candidates {
        assert_eq!(c.stops.len(), 3);
        assert!(c.mean_s >= c.travel_mean_s);
        assert_eq!(c.boardings.len(), 2);
    }
    // at 8:00 the congested hub is slower
    let sel = &v.candidates[v.selected.unwrap()];
    assert_eq!(sel.transfer.as_deref(), Some("hb"));
}

#[test]
fn replay_emits_windows_and_holds_out_the_tail() {
    let (w, s) = crossing(20, 20.0);
    let g = &w.graph;
    let e = EdgeKey::new(g.stop_ix("s").unwrap(), g.stop_ix("ha").unwrap());
    let data = pipeline::training_data(&s);
    let (x, y) = &data[&e];
    let n = x.len();
    let cfg = ReplayConfig { report_every: 100, ..ReplayConfig::default() };
    let out = replay::replay(x, y, &quick_gp(), &OnlineConfig::default(), &cfg).unwrap();
    let test = (n as f64 * cfg.test_fraction).ceil() as usize;
    assert_eq!(out.summary.stream + out.summary.test, n);
    assert_eq!(out.summary.test, test);
    assert_eq!(out.rows.len(), out.summary.stream.div_ceil(100));
    assert_eq!(out.state.len() as usize, out.summary.stream);
    assert_eq!(out.update_times_s.len(), out.summary.stream);
    let last = out.rows.last().unwrap();
    assert_eq!(last.step as usize, out.summary.stream);
    assert!(last.test_rmse.is_finite() && last.test_rmse < 0.1 * 900.0, "{last:?}");
    assert!(last.regret.is_finite() && last.batch_nll.is_finite());
    for r in &out.rows {
        assert!(r.gp_loss.is_finite() && r.noise > 0.0 && r.online_rmse.is_finite());
    }

    let err = replay::replay(&x[..5], &y[..5], &quick_gp(), &OnlineConfig::default(), &cfg).unwrap_err();
    assert!(matches!(err, Error::Core(_)));
    assert!(replay::replay(&x[..5], &y[..4], &quick_gp(), &OnlineConfig::default(), &cfg).is_err());
}

#[test]
fn gaussianity_suite_groups_by_edge_and_hour() {
    let (w, s) = crossing(30, 20.0);
    let cfg = GaussianityConfig { iterations: 300, min_samples: 60 };
    let (report, plots) = pipeline::gaussianity_suite(&w.graph, &s, &cfg, 1).unwrap();
    assert!(!plots.is_empty());
    assert!(plots.iter().all(|p| p.label.contains("->") && p.label.contains('@')));
    assert!(plots.iter().any(|p| p.label == "s->hb@12"));
    for p in &plots {
        assert!(!p.qq.is_empty() && p.qq.len() == p.pp.len());
        let total: usize = p.histogram.iter().map(|b| b.2).sum();
        assert_eq!(total, p.qq.len());
    }
    // simulated durations are Gaussian, so few groups leave the envelope
    assert_eq!(report.edges.len(), plots.len());
    let outside = report.edges.iter().filter(|e| !e.inside_envelope).count();
    assert!(outside * 5 <= report.edges.len(), "{outside} of {}", report.edges.len());

    let strict = GaussianityConfig { min_samples: 10_000, ..cfg };
    assert!(pipeline::gaussianity_suite(&w.graph, &s, &strict, 1).is_err());
}
