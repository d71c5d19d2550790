//! Command line front end.
//!
//! Each command reads its inputs, writes its artifacts into a directory
//! and prints a one-line JSON summary to stdout. Without `--out` the
//! directory is chosen by the store from the network and input hashes.
//! Errors go to stderr as JSON; the exit code is 2 for bad input and 3 for
//! numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use stochtransit_core::corr::{CovarianceSource, EtaCorrelations, Independent};
use stochtransit_core::graph::{enumerate_paths, EnumerateOptions, StopIx, TransitGraph};
use stochtransit_core::sim::{default_laws, random_network, simulate_feed};
use stochtransit_core::ssp::evaluate::Query;
use stochtransit_core::ssp::{evaluate_static_vs_stochastic, ranked_paths, EtaFeed, Timetable};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::io::models::{entry_file, read_models, write_model, Backend, EdgeEntry, ModelSet};
use crate::io::network::{load_network, save_network, NetworkFile};
use crate::io::{eta, feed, samples, schedule, write_csv, write_json};
use crate::pipeline::{self, PlanView};
use crate::replay;
use crate::store::{Manifest, Store, StoreLock};
use crate::world;

pub const DEFAULT_STORE: &str = "stochtransit-store";

#[derive(Debug, Parser)]
#[command(name = "stochtransit", version, about = "Stochastic shortest paths over bus networks learned from GPS feeds")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Model backend for fit, plan and evaluate.
    #[arg(long, global = true, value_enum)]
    pub backend: Option<Backend>,
    /// Output directory instead of the store.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Random routes over a grid of stops, rush-hour laws.
    Random,
    /// Two hubs whose relative speed flips during the day.
    Crossing,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a GPS feed with ground truth and a published timetable.
    Simulate {
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "random")]
        scenario: Scenario,
        /// Stops and routes of a random network.
        #[arg(long, default_value_t = 16)]
        stops: usize,
        #[arg(long, default_value_t = 4)]
        routes: usize,
        #[arg(long)]
        days: Option<usize>,
        /// Headway of the crossing scenario, in minutes.
        #[arg(long, default_value_t = 20.0)]
        headway_min: f64,
    },
    /// Turn a GPS feed into travel-time samples.
    Ingest {
        #[arg(long)]
        feed: Option<PathBuf>,
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Fit per-edge travel-time models.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Build hourly ETA vectors for edge correlations.
    Corr {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Rank paths between two stops.
    Plan {
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        eta_vectors: Option<PathBuf>,
        /// Live bus arrivals (JSON).
        #[arg(long)]
        bus_etas: Option<PathBuf>,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Departure, epoch seconds.
        #[arg(long)]
        depart: f64,
    },
    /// Replay one edge's samples as a stream through the online model.
    ReplayOnline {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        network: Option<PathBuf>,
        /// Edge to replay; defaults to the edge with the most samples.
        #[arg(long, requires = "head")]
        tail: Option<String>,
        #[arg(long, requires = "tail")]
        head: Option<String>,
    },
    /// Compare the stochastic planner with a timetable-only planner.
    Evaluate {
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        eta_vectors: Option<PathBuf>,
        #[arg(long)]
        bus_etas: Option<PathBuf>,
        /// Published timetable (CSV).
        #[arg(long)]
        schedule: PathBuf,
        /// Realized trips (JSON lines, as written by `simulate`).
        #[arg(long)]
        trips: PathBuf,
        /// Queries (CSV `origin,destination,depart`); random if absent.
        #[arg(long)]
        queries: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        random_queries: usize,
        #[arg(long)]
        origin: Option<String>,
        #[arg(long)]
        destination: Option<String>,
    },
    /// Normality evidence for per-edge, per-hour travel times.
    Gaussianity {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        network: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let report = json!({"error": "usage", "message": e.to_string().trim_end(), "exit_code": 2});
            eprintln!("{report}");
            return 2;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            let r = e.report();
            eprintln!("{}", serde_json::to_string(&r).expect("report serializes"));
            r.exit_code as i32
        }
    }
}

struct Ctx {
    cfg: Config,
    store: Store,
    out: Option<PathBuf>,
    backend: Option<Backend>,
}

impl Ctx {
    fn network_path(&self, arg: &Option<PathBuf>) -> Result<PathBuf> {
        arg.clone()
            .or_else(|| self.cfg.paths.network.clone())
            .ok_or_else(|| Error::input("no network given (--network or paths.network)"))
    }

    fn load_network(&self, arg: &Option<PathBuf>) -> Result<(PathBuf, NetworkFile, TransitGraph)> {
        let p = self.network_path(arg)?;
        let net = load_network(&p)?;
        let g = net.build()?;
        Ok((p, net, g))
    }

    fn manifest(&self, command: &str) -> Manifest {
        Manifest::new(command, self.cfg.seed, self.cfg.hash())
    }

    /// Runs `body` in the output directory of `manifest` under the lock and
    /// records the manifest afterwards.
    fn write_run<T>(&self, net: &NetworkFile, manifest: Manifest, latest: Option<&str>, body: impl FnOnce(&Path) -> Result<T>) -> Result<(PathBuf, T)> {
        let net_hash = net.hash();
        let (dir, _lock) = match &self.out {
            Some(o) => (o.clone(), StoreLock::acquire(o)?),
            None => {
                let lock = self.store.lock()?;
                (self.store.run_dir(&net_hash, &manifest.command, &manifest.input_hash()), lock)
            }
        };
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let value = body(&dir)?;
        manifest.finish(&dir)?;
        if self.out.is_none() {
            if let Some(kind) = latest {
                self.store.set_latest(&net_hash, kind, &dir)?;
            }
        }
        Ok((dir, value))
    }

    fn models(&self, net: &NetworkFile, g: &TransitGraph, arg: &Option<PathBuf>) -> Result<(PathBuf, ModelSet)> {
        let want = self.backend.unwrap_or(Backend::Batch);
        let dir = match arg {
            Some(d) => d.clone(),
            None => self
                .store
                .latest(&net.hash(), &format!("fit-{}", want.as_str()))
                .map_err(|_| Error::input(format!("no fitted {} models in the store; run `fit` or pass --models", want.as_str())))?,
        };
        let set = read_models(&dir, g)?;
        if self.backend.is_some_and(|b| b != set.backend) {
            return Err(Error::input(format!(
                "{} holds {} models but --backend {} was requested",
                dir.display(),
                set.backend.as_str(),
                want.as_str()
            )));
        }
        Ok((dir, set))
    }

    /// Correlations from `arg`, else the latest `corr` run, else none.
    fn correlations(&self, net: &NetworkFile, g: &TransitGraph, arg: &Option<PathBuf>) -> Result<(Option<PathBuf>, Box<dyn CovarianceSource>)> {
        let dir = match arg {
            Some(d) => Some(d.clone()),
            None => self.cfg.paths.eta.clone().or_else(|| self.store.latest(&net.hash(), "corr").ok()),
        };
        match dir {
            Some(d) => {
                let mut c = EtaCorrelations::new(eta::read_eta_vectors(&d, g)?);
                c.min_days = self.cfg.corr.min_days;
                Ok((Some(d), Box::new(c)))
            }
            None => Ok((None, Box::new(Independent))),
        }
    }

    fn bus_etas(&self, g: &TransitGraph, arg: &Option<PathBuf>) -> Result<EtaFeed> {
        match arg {
            Some(p) => eta::read_eta_feed(p, g),
            None => Ok(EtaFeed::new()),
        }
    }
}

fn resolve_stop(g: &TransitGraph, id: &str) -> Result<StopIx> {
    Ok(g.require_stop(id)?)
}

fn warn(lines: &[String]) {
    let mut err = std::io::stderr().lock();
    for l in lines {
        let _ = writeln!(err, "warning: {l}");
    }
}

pub fn execute(cli: &Cli) -> Result<serde_json::Value> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg = cfg.with_seed(s);
    }
    let store = Store::new(cfg.paths.store.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_STORE)));
    let ctx = Ctx { cfg, store, out: cli.out.clone(), backend: cli.backend };
    match &cli.command {
        Command::Simulate { network, scenario, stops, routes, days, headway_min } => {
            cmd_simulate(&ctx, network, *scenario, *stops, *routes, *days, *headway_min)
        }
        Command::Ingest { feed, network } => cmd_ingest(&ctx, feed, network),
        Command::Fit { samples, network } => cmd_fit(&ctx, samples, network),
        Command::Corr { samples, network } => cmd_corr(&ctx, samples, network),
        Command::Plan { network, models, eta_vectors, bus_etas, from, to, depart } => {
            cmd_plan(&ctx, network, models, eta_vectors, bus_etas, from, to, *depart)
        }
        Command::ReplayOnline { samples, network, tail, head } => cmd_replay(&ctx, samples, network, tail, head),
        Command::Evaluate { network, models, eta_vectors, bus_etas, schedule, trips, queries, random_queries, origin, destination } => {
            cmd_evaluate(
                &ctx,
                EvaluateArgs {
                    network,
                    models,
                    eta_vectors,
                    bus_etas,
                    schedule,
                    trips,
                    queries,
                    random_queries: *random_queries,
                    origin,
                    destination,
                },
            )
        }
        Command::Gaussianity { samples, network } => cmd_gaussianity(&ctx, samples, network),
    }
}

fn cmd_simulate(
    ctx: &Ctx,
    network: &Option<PathBuf>,
    scenario: Scenario,
    stops: usize,
    routes: usize,
    days: Option<usize>,
    headway_min: f64,
) -> Result<serde_json::Value> {
    let mut m = ctx.manifest("simulate");
    let mut sim = ctx.cfg.sim.clone();
    if let Some(d) = days {
        sim.days = d;
    }
    let (g, laws, sim) = match scenario {
        Scenario::Crossing => {
            if !(headway_min > 0.0) {
                return Err(Error::input("--headway-min must be positive"));
            }
            let w = world::crossing_world()?;
            let s = world::sim_config(&w.graph, sim.days, sim.start_day, headway_min, sim.seed);
            m.param("headway_min", headway_min);
            (w.graph, w.laws, s)
        }
        Scenario::Random => {
            let g = match network.clone().or_else(|| ctx.cfg.paths.network.clone()) {
                Some(p) => {
                    m.input("network", &p)?;
                    load_network(&p)?.build()?
                }
                None => {
                    m.param("stops", stops);
                    m.param("routes", routes);
                    random_network(stops, routes, 3.min(stops), 6.min(stops), sim.seed)?
                }
            };
            let l = &ctx.cfg.laws;
            let laws = default_laws(&g, l.speed_mps, l.rush_extra, l.cv);
            (g, laws, sim)
        }
    };
    m.param("scenario", format!("{scenario:?}").to_lowercase());
    m.param("days", sim.days);
    let net = NetworkFile::from_graph(&g);
    let out = simulate_feed(&g, &laws, &sim)?;
    let published = match scenario {
        Scenario::Crossing => world::free_flow_schedule(&g, &laws, &sim),
        Scenario::Random => pipeline::schedule_from_records(&g, &out.trips)?,
    };
    let (dir, ()) = ctx.write_run(&net, m, Some("simulate"), |dir| {
        save_network(&dir.join("network.json"), &net)?;
        feed::write_feed(&dir.join("feed.jsonl"), &out.pings)?;
        feed::write_trips(&dir.join("trips.jsonl"), &out.trips)?;
        schedule::write_schedule(&dir.join("schedule.csv"), &g, &published)
    })?;
    Ok(json!({
        "command": "simulate",
        "out": dir,
        "stops": g.num_stops(),
        "routes": g.routes().len(),
        "pings": out.pings.len(),
        "trips": out.trips.len(),
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub feed: feed::FeedStats,
    pub diagnostics: stochtransit_core::ingest::IngestDiagnostics,
    /// Pings whose route id is not in the network.
    pub unmatched_pings: u64,
    pub warnings: Vec<String>,
}

fn cmd_ingest(ctx: &Ctx, feed_arg: &Option<PathBuf>, network: &Option<PathBuf>) -> Result<serde_json::Value> {
    let feed_path = feed_arg
        .clone()
        .or_else(|| ctx.cfg.paths.feed.clone())
        .ok_or_else(|| Error::input("no feed given (--feed or paths.feed)"))?;
    let (net_path, net, g) = ctx.load_network(network)?;
    let mut m = ctx.manifest("ingest");
    m.input("network", &net_path)?;
    m.input("feed", &feed_path)?;
    let (pings, stats) = feed::read_feed(&feed_path)?;
    let ex = stochtransit_core::ingest::extract_travel_times(pings, &g, &ctx.cfg.ingest, &|_| true);
    let d = &ex.diagnostics;
    let mut warnings = Vec::new();
    if stats.malformed > 0 {
        warnings.push(format!("{} malformed feed lines skipped (first: {:?})", stats.malformed, stats.first_malformed));
    }
    if d.unknown_route_pings > 0 {
        warnings.push(format!("{} pings on routes missing from the network", d.unknown_route_pings));
    }
    if d.invalid_pings > 0 {
        warnings.push(format!("{} pings with invalid time or coordinates", d.invalid_pings));
    }
    if d.duplicate_pings > 0 {
        warnings.push(format!("{} duplicate pings dropped", d.duplicate_pings));
    }
    warn(&warnings);
    let report = IngestReport { feed: stats, diagnostics: d.clone(), unmatched_pings: d.unknown_route_pings, warnings };
    let (dir, ()) = ctx.write_run(&net, m, Some("ingest"), |dir| {
        samples::write_samples(&dir.join("samples.csv"), &g, &ex.samples)?;
        write_json(&dir.join("diagnostics.json"), &report)
    })?;
    Ok(json!({
        "command": "ingest",
        "out": dir,
        "samples": ex.samples.len(),
        "trips": d.trips,
        "trip_coverage": d.trip_coverage(),
        "malformed_lines": report.feed.malformed,
        "unmatched_pings": report.unmatched_pings,
        "warnings": report.warnings.len(),
    }))
}

fn cmd_fit(ctx: &Ctx, samples_path: &Path, network: &Option<PathBuf>) -> Result<serde_json::Value> {
    let (net_path, net, g) = ctx.load_network(network)?;
    let backend = ctx.backend.unwrap_or(Backend::Batch);
    let kind = format!("fit-{}", backend.as_str());
    let mut m = ctx.manifest(&kind);
    m.input("network", &net_path)?;
    m.input("samples", samples_path)?;
    let data = samples::read_samples(samples_path, &g)?;
    let online = (backend == Backend::Online).then_some(&ctx.cfg.online);
    let (set, summary) = pipeline::fit_models(&g, &data, &ctx.cfg.gp, online)?;
    warn(&summary.warnings);
    let training = pipeline::training_data(&data);
    let (dir, ()) = ctx.write_run(&net, m, Some(&kind), |dir| {
        for (e, entry) in &set.edges {
            let (n, hours) = match training.get(e) {
                Some((x, _)) => {
                    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (x.len() as u64, Some((lo, hi)))
                }
                None => (0, None),
            };
            write_model(dir, &entry_file(&g, *e, entry, n, hours))?;
        }
        write_json(&dir.join("fit_summary.json"), &summary)
    })?;
    let streamed = set.edges.values().filter(|e| matches!(e, EdgeEntry::Online(_))).count();
    Ok(json!({
        "command": "fit",
        "backend": backend,
        "out": dir,
        "edges": set.len(),
        "streamed": streamed,
        "warnings": summary.warnings.len(),
    }))
}

fn cmd_corr(ctx: &Ctx, samples_path: &Path, network: &Option<PathBuf>) -> Result<serde_json::Value> {
    let (net_path, net, g) = ctx.load_network(network)?;
    let mut m = ctx.manifest("corr");
    m.input("network", &net_path)?;
    m.input("samples", samples_path)?;
    let data = samples::read_samples(samples_path, &g)?;
    let vectors = pipeline::eta_vectors(&data);
    let interpolated: usize = vectors.values().map(|v| v.interpolated.iter().filter(|x| **x).count()).sum();
    let (dir, ()) = ctx.write_run(&net, m, Some("corr"), |dir| eta::write_eta_vectors(dir, &g, &vectors))?;
    Ok(json!({
        "command": "corr",
        "out": dir,
        "edges": vectors.len(),
        "interpolated_hours": interpolated,
    }))
}

#[allow(clippy::too_many_arguments)]
fn cmd_plan(
    ctx: &Ctx,
    network: &Option<PathBuf>,
    models: &Option<PathBuf>,
    eta_vectors: &Option<PathBuf>,
    bus_etas: &Option<PathBuf>,
    from: &str,
    to: &str,
    depart: f64,
) -> Result<serde_json::Value> {
    let (_, net, g) = ctx.load_network(network)?;
    let (s, t) = (resolve_stop(&g, from)?, resolve_stop(&g, to)?);
    if s == t {
        return Err(Error::input("origin and destination are the same stop"));
    }
    if !(depart.is_finite() && depart > 0.0) {
        return Err(Error::input("--depart must be positive epoch seconds"));
    }
    let opts = EnumerateOptions { hub_transfers_only: ctx.cfg.planner.hub_transfers_only };
    if enumerate_paths(&g, s, t, opts)?.is_empty() {
        return Err(Error::input(format!("{to} is not reachable from {from} with at most one transfer")));
    }
    let (_, set) = ctx.models(&net, &g, models)?;
    let (_, corr) = ctx.correlations(&net, &g, eta_vectors)?;
    let feed = ctx.bus_etas(&g, bus_etas)?;
    let started = Instant::now();
    let plan = ranked_paths(&g, s, t, depart, &set, corr.as_ref(), &feed, &ctx.cfg.planner)?;
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let view = PlanView::new(&g, &plan, set.backend, elapsed_ms);
    if let Some(o) = &ctx.out {
        let _lock = StoreLock::acquire(o)?;
        write_json(&o.join("plan.json"), &view)?;
    }
    Ok(serde_json::to_value(&view).expect("plan serializes"))
}

fn cmd_replay(
    ctx: &Ctx,
    samples_path: &Path,
    network: &Option<PathBuf>,
    tail: &Option<String>,
    head: &Option<String>,
) -> Result<serde_json::Value> {
    let (net_path, net, g) = ctx.load_network(network)?;
    let mut m = ctx.manifest("replay-online");
    m.input("network", &net_path)?;
    m.input("samples", samples_path)?;
    let data = samples::read_samples(samples_path, &g)?;
    let mut training = pipeline::training_data(&data);
    let edge = match (tail, head) {
        (Some(t), Some(h)) => samples::resolve_edge(&g, t, h)?,
        _ => *training
            .iter()
            .max_by_key(|(e, (x, _))| (x.len(), std::cmp::Reverse(**e)))
            .map(|(e, _)| e)
            .ok_or_else(|| Error::input("no samples to replay"))?,
    };
    let (tname, hname) = samples::edge_name(&g, edge);
    m.param("edge", format!("{tname}->{hname}"));
    let (x, y) = training.remove(&edge).unwrap_or_default();
    let out = replay::replay(&x, &y, &ctx.cfg.gp, &ctx.cfg.online, &ctx.cfg.replay)?;
    let (dir, ()) = ctx.write_run(&net, m, None, |dir| {
        write_csv(&dir.join("metrics.csv"), &out.rows)?;
        write_json(&dir.join("summary.json"), &json!({"tail": tname, "head": hname, "summary": out.summary}))?;
        let state = EdgeEntry::Online(out.state.clone());
        let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        write_model(dir, &entry_file(&g, edge, &state, out.state.len(), Some((lo, hi))))?;
        Ok(())
    })?;
    Ok(json!({
        "command": "replay-online",
        "out": dir,
        "edge": format!("{tname}->{hname}"),
        "stream": out.summary.stream,
        "test": out.summary.test,
        "total_s": out.summary.total_s,
        "test_rmse": out.summary.final_test_rmse,
        "test_nll": out.summary.final_test_nll,
    }))
}

struct EvaluateArgs<'a> {
    network: &'a Option<PathBuf>,
    models: &'a Option<PathBuf>,
    eta_vectors: &'a Option<PathBuf>,
    bus_etas: &'a Option<PathBuf>,
    schedule: &'a Path,
    trips: &'a Path,
    queries: &'a Option<PathBuf>,
    random_queries: usize,
    origin: &'a Option<String>,
    destination: &'a Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct QueryRow {
    origin: String,
    destination: String,
    depart: f64,
}

#[derive(Debug, Serialize)]
struct OutcomeRow {
    origin: String,
    destination: String,
    depart: f64,
    stochastic_via: String,
    static_via: String,
    stochastic_s: f64,
    static_s: f64,
    savings_s: f64,
}

#[derive(Debug, Serialize)]
struct CurveRow {
    origin: String,
    destination: String,
    via: String,
    hour: usize,
    index: f64,
    queries: usize,
}

fn cmd_evaluate(ctx: &Ctx, a: EvaluateArgs<'_>) -> Result<serde_json::Value> {
    let (net_path, net, g) = ctx.load_network(a.network)?;
    let (models_dir, set) = ctx.models(&net, &g, a.models)?;
    let (corr_dir, corr) = ctx.correlations(&net, &g, a.eta_vectors)?;
    let feed = ctx.bus_etas(&g, a.bus_etas)?;
    let published = schedule::read_schedule(a.schedule, &g)?;
    let records = feed::read_trips(a.trips)?;
    let realized = Timetable::from_records(&g, &records)?;

    let mut m = ctx.manifest("evaluate");
    m.input("network", &net_path)?;
    m.input("models", &models_dir)?;
    if let Some(d) = &corr_dir {
        m.input("eta_vectors", d)?;
    }
    if let Some(p) = a.bus_etas {
        m.input("bus_etas", p)?;
    }
    m.input("schedule", a.schedule)?;
    m.input("trips", a.trips)?;

    let queries: Vec<Query> = match a.queries {
        Some(p) => {
            m.input("queries", p)?;
            let rows: Vec<QueryRow> = crate::io::read_csv(p)?;
            rows.iter()
                .map(|r| Ok(Query { origin: resolve_stop(&g, &r.origin)?, destination: resolve_stop(&g, &r.destination)?, tau0: r.depart }))
                .collect::<Result<_>>()?
        }
        None => {
            let (lo, hi) = match (records.iter().map(|r| r.day).min(), records.iter().map(|r| r.day).max()) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return Err(Error::input("no realized trips")),
            };
            m.param("random_queries", a.random_queries);
            let mut qs = pipeline::random_queries(&g, a.random_queries, lo..=hi, 6.0, 21.0, ctx.cfg.seed)?;
            if let (Some(o), Some(d)) = (a.origin, a.destination) {
                m.param("origin", o);
                m.param("destination", d);
                let (o, d) = (resolve_stop(&g, o)?, resolve_stop(&g, d)?);
                for q in &mut qs {
                    q.origin = o;
                    q.destination = d;
                }
            }
            qs
        }
    };
    let report = evaluate_static_vs_stochastic(&g, &set, corr.as_ref(), &feed, &ctx.cfg.planner, &published, &realized, &queries)?;
    let id = |s: StopIx| g.stop(s).id.clone();
    let via = |t: Option<StopIx>| t.map_or_else(|| "direct".to_string(), id);
    let summary = json!({
        "queries": queries.len(),
        "evaluated": report.outcomes.len(),
        "skipped": report.skipped,
        "wins": report.wins,
        "ties": report.ties,
        "losses": report.losses,
        "win_fraction": report.win_fraction(),
        "mean_savings_s": report.mean_savings_s,
        "mean_relative_savings": report.mean_relative_savings,
        "backend": set.backend,
    });
    let (dir, ()) = ctx.write_run(&net, m, None, |dir| {
        write_json(&dir.join("evaluation.json"), &summary)?;
        write_csv(
            &dir.join("outcomes.csv"),
            report.outcomes.iter().map(|o| OutcomeRow {
                origin: id(o.query.origin),
                destination: id(o.query.destination),
                depart: o.query.tau0,
                stochastic_via: via(o.stochastic_path.transfer),
                static_via: via(o.static_path.transfer),
                stochastic_s: o.stochastic_s,
                static_s: o.static_s,
                savings_s: o.savings_s,
            }),
        )?;
        write_csv(
            &dir.join("curves.csv"),
            report.curves.iter().map(|c| CurveRow {
                origin: id(c.origin),
                destination: id(c.destination),
                via: via(c.candidate.transfer),
                hour: c.hour,
                index: c.index,
                queries: c.queries,
            }),
        )
    })?;
    let mut out = summary;
    out["command"] = json!("evaluate");
    out["out"] = json!(dir);
    Ok(out)
}

#[derive(Debug, Serialize)]
struct PointRow<'a> {
    label: &'a str,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize)]
struct BinRow<'a> {
    label: &'a str,
    lo: f64,
    hi: f64,
    count: usize,
}

fn cmd_gaussianity(ctx: &Ctx, samples_path: &Path, network: &Option<PathBuf>) -> Result<serde_json::Value> {
    let (net_path, net, g) = ctx.load_network(network)?;
    let mut m = ctx.manifest("gaussianity");
    m.input("network", &net_path)?;
    m.input("samples", samples_path)?;
    let data = samples::read_samples(samples_path, &g)?;
    let (report, plots) = pipeline::gaussianity_suite(&g, &data, &ctx.cfg.gaussianity, ctx.cfg.seed)?;
    let points = |f: fn(&pipeline::GroupPlots) -> &Vec<(f64, f64)>| {
        plots.iter().flat_map(move |p| f(p).iter().map(move |&(x, y)| PointRow { label: &p.label, x, y })).collect::<Vec<_>>()
    };
    let (dir, ()) = ctx.write_run(&net, m, None, |dir| {
        write_json(&dir.join("report.json"), &report)?;
        write_csv(&dir.join("qq.csv"), points(|p| &p.qq))?;
        write_csv(&dir.join("pp.csv"), points(|p| &p.pp))?;
        write_csv(
            &dir.join("histogram.csv"),
            plots.iter().flat_map(|p| p.histogram.iter().map(|&(lo, hi, count)| BinRow { label: &p.label, lo, hi, count })),
        )
    })?;
    Ok(json!({
        "command": "gaussianity",
        "out": dir,
        "groups": report.edges.len(),
        "inside_fraction": report.inside_fraction,
        "above_p95_fraction": report.above_p95_fraction,
        "median_ks_p": report.median_ks_p,
    }))
}
