//! Command-line front end: `analyze`, `fit`, `generate` and `synth`.
//!
//! Exit codes: 0 success, 1 usage or I/O failure, 2 ingest failure, 3 empty
//! dataset, 4 bad grid, 5 model failure, 6 infeasible synth spec.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::fit::{fit_power_law_with, FitMethod, FitOptions};
use crate::geostats::{
    correlation_report, daily_activity, distance_distribution, heatmap, linear_edges, log_edges,
    waiting_times, ActivityFilter, EmpiricalDistribution, Histogram, Histogram2D, Unit, YField,
};
use crate::graph::{build_user_graph, degree_distribution, Direction};
use crate::ingest::{read_path, write_records, ContinentRules, Format};
use crate::markov::{build_model, GenerationMode, MarkovModel};
use crate::model::{Continent, Dataset, DatasetError, UserGroup};
use crate::sweep::{Criterion, Grid, PreparedSweep, SweepOptions, SweepResult, DEFAULT_N_GENERATE};
use crate::synth::{generate_dataset, SynthSpec};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_INGEST: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;
pub const EXIT_GRID: i32 = 4;
pub const EXIT_MODEL: i32 = 5;
pub const EXIT_SPEC: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "geotx", version, about = "Geolocated transaction statistics and Markov modelling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    MaxP,
    MinD,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Chain,
    Independent,
}

impl From<ModeArg> for GenerationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Chain => GenerationMode::Chain,
            ModeArg::Independent => GenerationMode::Independent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Calibration,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Descriptive statistics and plot data for a dataset.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Bins for the 1-D histograms.
        #[arg(long, default_value_t = 50)]
        bins: usize,
        /// Bins per axis for the heatmaps.
        #[arg(long, default_value_t = 30)]
        heatmap_bins: usize,
        /// Extra daily-activity column for this ISO country code; repeatable.
        #[arg(long = "country")]
        countries: Vec<String>,
    },
    /// Parameter sweep and best Markov model.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        seed: u64,
        /// JSON grid `{"val_btc": [..], "tx_miner": [..], "tx_merch": [..]}`;
        /// the default grid when omitted.
        #[arg(long)]
        grid_file: Option<PathBuf>,
        /// Transactions generated per triple.
        #[arg(long, default_value_t = DEFAULT_N_GENERATE)]
        n: usize,
        #[arg(long, value_enum, default_value_t = CriterionArg::MaxP)]
        criterion: CriterionArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Chain)]
        mode: ModeArg,
    },
    /// Transactions from a saved model.
    Generate {
        /// `best_model.json` from `fit`, or a bare model.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_N_GENERATE)]
        n: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Chain)]
        mode: ModeArg,
    },
    /// Synthetic dataset with planted roles.
    Synth {
        /// Spec JSON; required unless `--preset` is given.
        #[arg(long, required_unless_present = "preset")]
        input: Option<PathBuf>,
        #[arg(long, conflicts_with = "input", value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Record count; overrides the spec.
        #[arg(long)]
        n: Option<usize>,
    },
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

fn fail<T>(code: i32, message: impl Into<String>) -> Result<T, CliError> {
    Err(CliError {
        code,
        message: message.into(),
    })
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError {
        code: EXIT_OTHER,
        message: format!("{}: {e}", path.display()),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_OTHER } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Analyze {
            input,
            out_dir,
            format,
            bins,
            heatmap_bins,
            countries,
        } => cmd_analyze(&input, &out_dir, format.map(Format::from), bins, heatmap_bins, &countries),
        Command::Fit {
            input,
            out_dir,
            format,
            seed,
            grid_file,
            n,
            criterion,
            mode,
        } => {
            let opts = SweepOptions {
                n_generate: n,
                seed,
                criterion: match criterion {
                    CriterionArg::MaxP => Criterion::MaxP,
                    CriterionArg::MinD => Criterion::MinD,
                },
                mode: mode.into(),
            };
            cmd_fit(&input, &out_dir, format.map(Format::from), grid_file.as_deref(), &opts)
        }
        Command::Generate {
            input,
            out_dir,
            seed,
            n,
            mode,
        } => cmd_generate(&input, &out_dir, seed, n, mode.into()),
        Command::Synth {
            input,
            preset,
            out_dir,
            seed,
            format,
            n,
        } => {
            let spec = match (input, preset) {
                (Some(path), _) => read_spec(&path)?,
                (None, _) => SynthSpec::calibration(20_000),
            };
            cmd_synth(spec, &out_dir, seed, format.into(), n)
        }
    }
}

/// Reads and validates a dataset; the ingest report goes to stderr.
pub fn load_dataset(input: &Path, format: Option<Format>) -> Result<Dataset, CliError> {
    let (records, report) = match read_path(input, format, &ContinentRules::default()) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_INGEST, e.to_string()),
    };
    eprintln!("ingest: {report}");
    match Dataset::build(records) {
        Ok(ds) => Ok(ds),
        Err(DatasetError::EmptyDataset) => fail(EXIT_EMPTY, "no usable records"),
        Err(e) => fail(EXIT_INGEST, e.to_string()),
    }
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_fail(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| io_fail(path, e))?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| io_fail(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_fail(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| io_fail(path, e))?;
    write_file(path, &bytes)
}

/// Shortest round-trip form; exponent notation for very small or large
/// magnitudes.
fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn histogram_rows(h: &Histogram<f64>) -> Vec<Vec<String>> {
    h.counts
        .iter()
        .enumerate()
        .map(|(i, c)| vec![num(h.edges[i]), num(h.edges[i + 1]), c.to_string()])
        .collect()
}

fn heatmap_rows(h: &Histogram2D<f64>) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (i, col) in h.counts.iter().enumerate() {
        for (j, c) in col.iter().enumerate() {
            rows.push(vec![
                num(h.x_edges[i]),
                num(h.x_edges[i + 1]),
                num(h.y_edges[j]),
                num(h.y_edges[j + 1]),
                c.to_string(),
            ]);
        }
    }
    rows
}

pub const HIST_HEADER: [&str; 3] = ["bin_lo", "bin_hi", "count"];
pub const HEATMAP_HEADER: [&str; 5] = ["x_lo", "x_hi", "y_lo", "y_hi", "count"];
pub const DEGREE_HEADER: [&str; 2] = ["degree", "count"];
pub const GENERATED_HEADER: [&str; 3] = ["sender_group", "receiver_group", "distance_km"];

/// Both fitting methods on the positive samples, errors reported in place.
fn power_law_report(positive: Vec<f64>, unit: Unit, opts: &FitOptions<f64>) -> Value {
    let Ok(dist) = EmpiricalDistribution::new(positive, unit) else {
        return json!({ "error": "non-finite sample" });
    };
    let mut out = serde_json::Map::new();
    out.insert("n".into(), json!(dist.len()));
    for (key, method) in [("mle", FitMethod::Mle), ("loglog_regression", FitMethod::LogLogRegression)] {
        let v = match fit_power_law_with(&dist, method, opts) {
            Ok(f) => json!(f),
            Err(e) => json!({ "error": e.to_string() }),
        };
        out.insert(key.into(), v);
    }
    Value::Object(out)
}

fn degree_rows(d: &EmpiricalDistribution<f64>) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let xs = d.samples();
    let mut i = 0;
    while i < xs.len() {
        let j = xs[i..].partition_point(|&x| x == xs[i]) + i;
        rows.push(vec![(xs[i] as u64).to_string(), (j - i).to_string()]);
        i = j;
    }
    rows
}

pub fn cmd_analyze(
    input: &Path,
    out_dir: &Path,
    format: Option<Format>,
    bins: usize,
    heatmap_bins: usize,
    countries: &[String],
) -> Result<(), CliError> {
    if bins == 0 || heatmap_bins == 0 {
        return fail(EXIT_OTHER, "bin counts must be positive");
    }
    let ds = load_dataset(input, format)?;
    prepare_dir(out_dir)?;
    let mut summary = serde_json::Map::new();
    summary.insert("schema_version".into(), json!(SCHEMA_VERSION));
    let (start, end) = ds.window();
    summary.insert(
        "dataset".into(),
        json!({
            "records": ds.len(),
            "addresses": ds.address_index().len(),
            "window": { "start": start, "end": end },
        }),
    );

    let distances = distance_distribution(&ds);
    summary.insert("distance_km".into(), json!(distances.summary()));
    let dh = Histogram::from_samples(
        distances.samples(),
        linear_edges(distances.min().unwrap_or(0.0), distances.max().unwrap_or(0.0), bins),
    );
    write_csv(&out_dir.join("distance_hist.csv"), &HIST_HEADER, histogram_rows(&dh))?;

    let waiting = match waiting_times(&ds) {
        Ok(w) if w.has_linkage() => Some(w),
        Ok(_) => {
            eprintln!("notice: no output links resolve inside the dataset; waiting-time outputs omitted");
            None
        }
        Err(e) => {
            eprintln!("notice: {e}; waiting-time outputs omitted");
            None
        }
    };

    let mut fits = serde_json::Map::new();
    let positive_distances: Vec<f64> = distances.samples().iter().copied().filter(|&d| d > 0.0).collect();
    fits.insert(
        "distance_km".into(),
        power_law_report(positive_distances, Unit::Km, &FitOptions::default()),
    );

    match &waiting {
        Some(w) => {
            let days = w.days();
            summary.insert(
                "waiting_time_days".into(),
                json!({
                    "summary": days.summary(),
                    "unresolved_inputs": w.unresolved,
                    "repeated_spends": w.repeated,
                }),
            );
            let positive: Vec<f64> = days.samples().iter().copied().filter(|&d| d > 0.0).collect();
            let lo = positive.first().copied().unwrap_or(1.0);
            let hi = positive.last().copied().unwrap_or(lo);
            let wh = Histogram::from_samples(&positive, log_edges(lo, hi, bins));
            write_csv(&out_dir.join("waiting_hist.csv"), &HIST_HEADER, histogram_rows(&wh))?;
            fits.insert(
                "waiting_time_days".into(),
                power_law_report(positive, Unit::Days, &FitOptions::default()),
            );
            if let Ok(h) = heatmap(&ds, YField::WaitingTime, heatmap_bins, heatmap_bins, Some(w)) {
                write_csv(&out_dir.join("heatmap_waiting_time.csv"), &HEATMAP_HEADER, heatmap_rows(&h))?;
            }
        }
        None => {
            summary.insert("waiting_time_days".into(), Value::Null);
        }
    }
    if let Ok(h) = heatmap(&ds, YField::Value, heatmap_bins, heatmap_bins, None) {
        write_csv(&out_dir.join("heatmap_value.csv"), &HEATMAP_HEADER, heatmap_rows(&h))?;
    }
    summary.insert("correlations".into(), json!(correlation_report(&ds, waiting.as_ref())));

    let graph = build_user_graph(&ds);
    let mut graph_info = serde_json::Map::new();
    graph_info.insert("nodes".into(), json!(graph.node_count()));
    graph_info.insert("edges".into(), json!(graph.edge_count()));
    for (dir, key, file) in [
        (Direction::In, "in_degree", "degree_in.csv"),
        (Direction::Out, "out_degree", "degree_out.csv"),
    ] {
        let d = degree_distribution::<f64>(&graph, dir);
        write_csv(&out_dir.join(file), &DEGREE_HEADER, degree_rows(&d))?;
        let positive: Vec<f64> = d.samples().iter().copied().filter(|&x| x > 0.0).collect();
        fits.insert(key.into(), power_law_report(positive, Unit::Count, &FitOptions::degrees()));
    }
    summary.insert("user_graph".into(), Value::Object(graph_info));
    summary.insert("power_laws".into(), Value::Object(fits));

    let mut filters: Vec<(String, Option<ActivityFilter>)> = vec![("all".into(), None)];
    for c in Continent::ALL {
        filters.push((c.label().into(), Some(ActivityFilter::Continent(c))));
    }
    for cc in countries {
        filters.push((cc.to_ascii_uppercase(), Some(ActivityFilter::Country(cc.clone()))));
    }
    let mut columns = Vec::new();
    for (_, f) in &filters {
        match daily_activity(&ds, f.as_ref()) {
            Ok(series) => columns.push(series),
            Err(e) => return fail(EXIT_OTHER, e.to_string()),
        }
    }
    let mut header = vec!["date"];
    header.extend(filters.iter().map(|(name, _)| name.as_str()));
    let rows = (0..columns[0].len()).map(|i| {
        let mut row = vec![columns[0][i].date.clone()];
        row.extend(columns.iter().map(|c| c[i].count.to_string()));
        row
    });
    write_csv(&out_dir.join("daily_activity.csv"), &header, rows)?;

    write_json(&out_dir.join("summary.json"), &Value::Object(summary))
}

pub fn sweep_header() -> Vec<String> {
    let mut h: Vec<String> = ["val_btc", "tx_miner", "tx_merch", "d_statistic", "p_value", "seed"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(UserGroup::all().iter().map(|g| g.label()));
    h.push("error".into());
    h
}

fn sweep_rows(result: &SweepResult) -> Vec<Vec<String>> {
    result
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.params.val.to_string(),
                r.params.tx_miner.to_string(),
                r.params.tx_merch.to_string(),
                num(r.d_statistic),
                num(r.p_value),
                r.seed.to_string(),
            ];
            row.extend(r.group_sizes.iter().map(|n| n.to_string()));
            row.push(r.error.clone().unwrap_or_default());
            row
        })
        .collect()
}

pub fn read_grid(path: &Path) -> Result<Grid, CliError> {
    let text = fs::read_to_string(path).or_else(|e| fail(EXIT_GRID, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).or_else(|e| fail(EXIT_GRID, format!("{}: {e}", path.display())))
}

pub fn cmd_fit(
    input: &Path,
    out_dir: &Path,
    format: Option<Format>,
    grid_file: Option<&Path>,
    opts: &SweepOptions,
) -> Result<(), CliError> {
    let grid = match grid_file {
        Some(p) => read_grid(p)?,
        None => Grid::default(),
    };
    if let Err(e) = grid.triples() {
        return fail(EXIT_GRID, e.to_string());
    }
    if opts.n_generate == 0 {
        return fail(EXIT_OTHER, "--n must be at least 1");
    }
    let ds = load_dataset(input, format)?;
    prepare_dir(out_dir)?;
    let result = match PreparedSweep::new(&ds).run(&grid, opts) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_MODEL, e.to_string()),
    };
    let header = sweep_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out_dir.join("sweep.csv"), &header, sweep_rows(&result))?;
    write_json(&out_dir.join("sweep.json"), &result)?;
    let model: MarkovModel<f64> = match build_model(&ds, result.best.params) {
        Ok(m) => m,
        Err(e) => return fail(EXIT_MODEL, e.to_string()),
    };
    let best = &result.best;
    write_json(
        &out_dir.join("best_model.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "model": model,
            "ks": {
                "d_statistic": best.d_statistic,
                "p_value": best.p_value,
                "n_generated": opts.n_generate,
                "n_empirical": ds.len(),
                "seed": best.seed,
            },
        }),
    )
}

/// Loads a model from `best_model.json` (the `model` member) or a bare model
/// document.
pub fn read_model(path: &Path) -> Result<MarkovModel<f64>, CliError> {
    let bad = |e: &dyn std::fmt::Display| CliError {
        code: EXIT_MODEL,
        message: format!("{}: {e}", path.display()),
    };
    let text = fs::read_to_string(path).map_err(|e| bad(&e))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
    let body = match doc.get_mut("model") {
        Some(m) => m.take(),
        None => doc,
    };
    let model: MarkovModel<f64> = serde_json::from_value(body).map_err(|e| bad(&e))?;
    model.validate().map_err(|e| bad(&e))?;
    Ok(model)
}

pub fn cmd_generate(input: &Path, out_dir: &Path, seed: u64, n: usize, mode: GenerationMode) -> Result<(), CliError> {
    let model = read_model(input)?;
    prepare_dir(out_dir)?;
    let rows = model
        .generate_with(n, seed, mode)
        .into_iter()
        .map(|t| vec![t.sender_group.label(), t.receiver_group.label(), num(t.distance_km)]);
    write_csv(&out_dir.join("generated.csv"), &GENERATED_HEADER, rows)
}

pub fn read_spec(path: &Path) -> Result<SynthSpec, CliError> {
    let text = fs::read_to_string(path).or_else(|e| fail(EXIT_SPEC, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).or_else(|e| fail(EXIT_SPEC, format!("{}: {e}", path.display())))
}

pub fn cmd_synth(
    mut spec: SynthSpec,
    out_dir: &Path,
    seed: u64,
    format: Format,
    n: Option<usize>,
) -> Result<(), CliError> {
    if let Some(n) = n {
        spec.n_records = n;
    }
    let synth = match generate_dataset(&spec, seed) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_SPEC, e.to_string()),
    };
    prepare_dir(out_dir)?;
    let path = out_dir.join(format!("dataset.{}", format.extension()));
    let mut buf = Vec::new();
    write_records(&mut buf, synth.dataset.records(), format).map_err(|e| io_fail(&path, e))?;
    write_file(&path, &buf)?;
    let roles = synth
        .planted_assignment
        .iter()
        .map(|(a, g)| vec![a.clone(), g.label()]);
    write_csv(&out_dir.join("planted_roles.csv"), &["address_id", "group"], roles)?;
    write_json(&out_dir.join("spec.json"), &spec)
}
