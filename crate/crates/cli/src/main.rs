//! Command-line front end: Monte Carlo studies, model fitting, prediction
//! and one-off optimal transport between two quantile functions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use otfpca::dense::{fit_dense, DenseConfig};
use otfpca::frechet::{center_panel, default_bandwidth, CenteringOptions};
use otfpca::io::{self as pio, AffineMap, FittedModel, PanelSchema, SavedModel};
use otfpca::measure::wasserstein_distance;
use otfpca::simulation::{run_study, write_results_csv, SimConfig};
use otfpca::sparse::{fit_sparse, SparseConfig};
use otfpca::transport::optimal_transport;
use otfpca::{grid, ErrorClass, Link};

#[derive(Debug, Parser)]
#[command(name = "otfpca", version, about = "Transport-process FPCA for distribution-valued longitudinal data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a Monte Carlo study and write its error table.
    Simulate(SimulateArgs),
    /// Fit a dense or sparse model to a panel file.
    Fit(FitArgs),
    /// Predict transports of one subject from a fitted model.
    Predict(PredictArgs),
    /// Optimal transport and Wasserstein distance between two quantile functions.
    Ot(OtArgs),
}

#[derive(Debug, clap::Args, Serialize)]
struct SimulateArgs {
    /// Study configuration (JSON, or TOML with a `.toml` extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Dense,
    Sparse,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LinkArg {
    Arctan,
    Algebraic,
    Logistic,
}

impl From<LinkArg> for Link {
    fn from(l: LinkArg) -> Self {
        match l {
            LinkArg::Arctan => Link::Arctan,
            LinkArg::Algebraic => Link::Algebraic,
            LinkArg::Logistic => Link::Logistic,
        }
    }
}

#[derive(Debug, clap::Args, Serialize)]
struct FitArgs {
    /// Panel CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Panel schema (JSON, or TOML with a `.toml` extension).
    #[arg(long)]
    schema: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Target baseline norm (dense mode).
    #[arg(long, conflicts_with = "norm_t0")]
    kappa: Option<f64>,
    /// Common baseline norm (sparse mode).
    #[arg(long)]
    norm_t0: Option<f64>,
    /// Bandwidth for centering and covariance smoothing.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Link function (sparse mode).
    #[arg(long, value_enum)]
    link: Option<LinkArg>,
    /// Number of components; chosen by explained variance when absent.
    #[arg(long)]
    ncomp: Option<usize>,
    /// Quantile grid size.
    #[arg(long, default_value_t = 101)]
    grid: usize,
    /// Time grid size.
    #[arg(long, default_value_t = 51)]
    time_grid: usize,
}

#[derive(Debug, clap::Args)]
struct PredictArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    subject: String,
    /// Comma-separated times in original units, or `grid:G` for G equispaced times.
    #[arg(long)]
    times: String,
    /// Output CSV file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct OtArgs {
    /// Source quantile CSV (`level,q`).
    #[arg(long)]
    from: PathBuf,
    /// Target quantile CSV (`level,q`).
    #[arg(long)]
    to: PathBuf,
    /// Wasserstein order.
    #[arg(short, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    p: u8,
    /// Output CSV for the transport map; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let mut config: SimConfig = pio::load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(reps) = args.reps {
        config.reps = reps;
    }
    config.validate()?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut results = Vec::new();
    for cell in config.cells() {
        log::info!("cell n={} N={} m={}", cell.n, cell.n_obs, cell.m);
        let r = run_study(&cell)?;
        log::info!("imse {:.6} (sd {:.6}, {} failures, {:.1}s)", r.mean, r.sd, r.failures, r.wall_time_secs);
        results.push(r);
    }
    let csv_path = args.out.join("imse.csv");
    let file = File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
    write_results_csv(&results, BufWriter::new(file))?;
    write_json(
        &args.out.join("imse.json"),
        &json!({
            "command": { "simulate": &args },
            "config": &config,
            "results": &results,
            "created": timestamp(),
        }),
    )?;
    eprintln!("wrote {}", csv_path.display());
    Ok(())
}

fn fit(args: FitArgs) -> anyhow::Result<()> {
    match args.mode {
        Mode::Dense if args.norm_t0.is_some() || args.link.is_some() => {
            return Err(otfpca::Error::Config("--norm-t0 and --link apply to sparse mode only".into()).into())
        }
        Mode::Sparse if args.kappa.is_some() => {
            return Err(otfpca::Error::Config("--kappa applies to dense mode only".into()).into())
        }
        _ => {}
    }
    let schema =
        PanelSchema::from_path(&args.schema).with_context(|| format!("reading schema {}", args.schema.display()))?;
    let ingested = pio::ingest_panel(&args.input, &schema, args.grid)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let panel = &ingested.panel;
    let h_center = args
        .bandwidth
        .unwrap_or_else(|| default_bandwidth(panel.len(), panel.mean_observations()));
    let centered = center_panel(
        panel,
        &CenteringOptions {
            grid_size: args.grid,
            bandwidth: Some(h_center),
            time_grid: args.time_grid,
            ..Default::default()
        },
    )?;

    let model = match args.mode {
        Mode::Dense => FittedModel::Dense(fit_dense(
            &centered.transports,
            &DenseConfig {
                kappa: args.kappa.unwrap_or(1.0),
                bandwidth: args.bandwidth,
                time_grid: args.time_grid,
                ncomp: args.ncomp,
                ..Default::default()
            },
        )?),
        Mode::Sparse => FittedModel::Sparse(fit_sparse(
            &centered.transports,
            &SparseConfig {
                norm_t0: args.norm_t0,
                link: args.link.map(Link::from).unwrap_or_default(),
                bandwidth: args.bandwidth,
                time_grid: args.time_grid,
                ncomp: args.ncomp,
                ..Default::default()
            },
        )?),
    };

    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let ncomp = model.ncomp();
    pio::write_eigenfunctions(out, model.eig(), ncomp, &ingested.time_map)?;
    pio::write_scores(out, &model)?;
    pio::write_sign_mass(out, &centered.transports, &ingested.time_map)?;
    pio::write_barycenter(out, &centered.barycenter, &ingested.time_map, &ingested.support_map)?;
    let scale = match &model {
        FittedModel::Dense(m) => json!({ "kappa": m.kappa }),
        FittedModel::Sparse(m) => json!({ "norm_t0": m.norm_t0, "empirical_norms": m.empirical_norms }),
    };
    write_json(
        &out.join("manifest.json"),
        &json!({
            "command": { "fit": &args },
            "schema": &schema,
            "mode": args.mode,
            "scale": scale,
            "ncomp": ncomp,
            "eigenvalues": &model.eig().eigenvalues[..ncomp],
            "n_subjects": panel.len(),
            "design": panel.design(),
            "centering_bandwidth": h_center,
            "time_map": ingested.time_map,
            "support_map": ingested.support_map,
            "created": timestamp(),
        }),
    )?;
    SavedModel {
        time_map: ingested.time_map,
        support_map: ingested.support_map,
        model,
    }
    .save(&out.join("model.json"))?;
    eprintln!("fitted {} subjects with {ncomp} component(s); wrote {}", panel.len(), out.display());
    Ok(())
}

/// Parses `grid:G` or a comma list into (original, normalized) time pairs.
fn parse_times(spec: &str, map: &AffineMap) -> anyhow::Result<Vec<(f64, f64)>> {
    if let Some(g) = spec.strip_prefix("grid:") {
        let g: usize = g.trim().parse().context("grid size after `grid:`")?;
        if g < 2 {
            return Err(otfpca::Error::Config("`grid:G` needs G >= 2".into()).into());
        }
        return Ok(grid::nodes(g).into_iter().map(|u| (map.to_original(u), u)).collect());
    }
    spec.split(',')
        .map(|s| {
            let x: f64 = s
                .trim()
                .parse()
                .map_err(|_| otfpca::Error::Config(format!("time `{}` is not a number", s.trim())))?;
            let u = map.to_unit(x);
            if !(-1e-12..=1.0 + 1e-12).contains(&u) {
                return Err(otfpca::Error::Domain(format!("time {x} outside the fitted time range")).into());
            }
            Ok((x, u.clamp(0.0, 1.0)))
        })
        .collect()
}

fn predict(args: PredictArgs) -> anyhow::Result<()> {
    let saved = SavedModel::load(&args.model.join("model.json"))
        .with_context(|| format!("loading model from {}", args.model.display()))?;
    let times = parse_times(&args.times, &saved.time_map)?;
    let mut w = output(args.out.as_deref())?;
    writeln!(w, "time,u,T")?;
    for (x, t) in times {
        let map = saved.model.predict(&args.subject, t)?;
        let m = map.grid_size();
        for (j, v) in map.tvals().iter().enumerate() {
            writeln!(w, "{x},{},{v}", grid::node(j, m))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn ot(args: OtArgs) -> anyhow::Result<()> {
    let from = pio::read_quantile_csv(&args.from).with_context(|| format!("reading {}", args.from.display()))?;
    let to = pio::read_quantile_csv(&args.to).with_context(|| format!("reading {}", args.to.display()))?;
    let map = optimal_transport(&from, &to)?;
    let d = wasserstein_distance(&from, &to, f64::from(args.p))?;
    match &args.out {
        Some(p) => pio::write_transport_csv(&map, output(Some(p))?)?,
        None => pio::write_transport_csv(&map, io::stdout().lock())?,
    }
    println!("# W{} distance: {d}", args.p);
    Ok(())
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|c| {
        let io_err = c
            .downcast_ref::<io::Error>()
            .or_else(|| match c.downcast_ref::<otfpca::Error>() {
                Some(otfpca::Error::Io(e)) => Some(e),
                _ => None,
            });
        io_err.is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe)
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<otfpca::Error>() {
            return match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::Ot(a) => ot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
