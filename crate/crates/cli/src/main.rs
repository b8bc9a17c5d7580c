//! `panel-outliers`: outlier detection for two-occasion panels.

mod explore;
mod settings;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use panel_outliers::pipeline::{curve_csv, load_ratios};
use panel_outliers::report::{emit_matrix, emit_plot_data, emit_report, to_json};
use panel_outliers::{run_compare, run_curve, run_detect, Error, Format};

use settings::{Output, Settings};

#[derive(Parser)]
#[command(name = "panel-outliers", version, about = "Outlier detection for two-occasion panel data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run detectors and write a report.
    Detect(Common),
    /// Kendall tau-b matrix between |E|, isolation forest and k-NN scores.
    Compare(Common),
    /// Sorted k-NN distances, for choosing the DBSCAN radius.
    Curve(Common),
    /// Serve the JSON API used by the interactive explorer.
    Explore {
        #[command(flatten)]
        common: Common,
        /// Address to listen on.
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

/// Parameters shared by every subcommand. Anything not covered by a named
/// flag can be given with `--set key=value`.
#[derive(Args, Debug, Default)]
struct Common {
    /// TOML file of `key = value` settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Panel CSV.
    #[arg(long)]
    input: Option<String>,
    /// Unit id column.
    #[arg(long)]
    id: Option<String>,
    /// First-occasion column.
    #[arg(long)]
    t1: Option<String>,
    /// Second-occasion column.
    #[arg(long)]
    t2: Option<String>,
    /// hb, sabp, boxplot, iforest, dbscan, knn-dist, knn-weight or all.
    #[arg(long)]
    method: Option<String>,
    /// Effect-score size exponent U.
    #[arg(long = "hb-u")]
    hb_u: Option<String>,
    /// Interval width C.
    #[arg(long = "hb-c")]
    hb_c: Option<String>,
    /// Interval floor A.
    #[arg(long = "hb-a")]
    hb_a: Option<String>,
    /// quartiles or deciles.
    #[arg(long = "percentile-mode")]
    percentile_mode: Option<String>,
    /// Standard boxplot width.
    #[arg(long = "box-c")]
    box_c: Option<String>,
    /// Isolation forest subsample size.
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    ntrees: Option<String>,
    /// Seed for all randomness; drawn from entropy and reported when absent.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "max-depth")]
    max_depth: Option<String>,
    /// Isolation score threshold.
    #[arg(long)]
    u0: Option<String>,
    /// DBSCAN radius.
    #[arg(long)]
    delta: Option<String>,
    /// DBSCAN minimum cluster sizes, comma-separated.
    #[arg(long)]
    g: Option<String>,
    /// Neighbour counts, comma-separated.
    #[arg(long)]
    k: Option<String>,
    /// k-NN gap threshold fraction in (0, 1].
    #[arg(long)]
    epsilon: Option<String>,
    /// Fixed k-NN score threshold.
    #[arg(long)]
    threshold: Option<String>,
    /// Neighbour rank for `curve` (default g - 1).
    #[arg(long = "curve-k")]
    curve_k: Option<String>,
    /// Run detectors on raw ratios instead of effect scores.
    #[arg(long = "on-ratios")]
    on_ratios: bool,
    /// Extra settings as key=value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for plot data CSV files.
    #[arg(long = "plot-dir")]
    plot_dir: Option<PathBuf>,
}

impl Common {
    fn flag_pairs(&self) -> Vec<(&'static str, String)> {
        let named = [
            ("input", &self.input),
            ("id", &self.id),
            ("t1", &self.t1),
            ("t2", &self.t2),
            ("method", &self.method),
            ("U", &self.hb_u),
            ("C", &self.hb_c),
            ("A", &self.hb_a),
            ("percentile_mode", &self.percentile_mode),
            ("c", &self.box_c),
            ("q", &self.q),
            ("ntrees", &self.ntrees),
            ("seed", &self.seed),
            ("max_depth", &self.max_depth),
            ("u0", &self.u0),
            ("delta", &self.delta),
            ("g", &self.g),
            ("k", &self.k),
            ("epsilon", &self.epsilon),
            ("threshold", &self.threshold),
            ("curve_k", &self.curve_k),
        ];
        let mut pairs: Vec<_> = named
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect();
        if self.on_ratios {
            pairs.push(("on_ratios", "true".into()));
        }
        pairs
    }

    fn resolve(&self) -> Result<Settings, Failure> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
            s.apply_toml(&text)?;
        }
        for (key, value) in self.flag_pairs() {
            s.apply(key, &value)?;
        }
        for kv in &self.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| Failure::config(format!("`--set {kv}`: expected KEY=VALUE")))?;
            s.apply(key.trim(), value.trim())?;
        }
        if let Some(f) = &self.format {
            s.output.format = Some(f.parse().map_err(Failure::from)?);
        }
        if let Some(p) = &self.out {
            s.output.out = Some(p.clone());
        }
        if let Some(p) = &self.plot_dir {
            s.output.plot_dir = Some(p.clone());
        }
        s.run.validate()?;
        Ok(s)
    }
}

/// An error with its exit code: 2 for configuration problems, 3 for data.
#[derive(Debug)]
pub struct Failure {
    pub(crate) code: u8,
    pub(crate) message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::config(e.to_string())
        } else {
            Failure::data(e.to_string())
        }
    }
}

fn write_output(output: &Output, bytes: &[u8]) -> Result<(), Failure> {
    match &output.out {
        Some(path) => fs::write(path, bytes)
            .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| Failure::data(format!("cannot write to stdout: {e}")))
        }
    }
}

fn detect(common: &Common) -> Result<(), Failure> {
    let s = common.resolve()?;
    let ratios = load_ratios(&s.run)?;
    let report = run_detect(&s.run, &ratios)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    for r in &report.results {
        for w in &r.warnings {
            eprintln!("warning [{}]: {w}", r.method);
        }
    }
    write_output(&s.output, &emit_report(&report, s.output.format.unwrap_or(Format::Json)))?;
    if let Some(dir) = &s.output.plot_dir {
        let files = emit_plot_data(&report, dir)?;
        eprintln!("wrote {} plot files to {}", files.len(), dir.display());
    }
    Ok(())
}

fn compare(common: &Common) -> Result<(), Failure> {
    let s = common.resolve()?;
    let ratios = load_ratios(&s.run)?;
    let (matrix, notes) = run_compare(&s.run, &ratios)?;
    for note in &notes {
        eprintln!("note: {note}");
    }
    write_output(&s.output, &emit_matrix(&matrix, s.output.format.unwrap_or(Format::Json)))
}

fn curve(common: &Common) -> Result<(), Failure> {
    let s = common.resolve()?;
    let ratios = load_ratios(&s.run)?;
    let (k, points) = run_curve(&s.run, &ratios)?;
    let hint = (ratios.len() as f64).sqrt().ceil();
    eprintln!("hint: ceiling(sqrt(m)) = {hint} for m = {}; pick delta where the curve jumps", ratios.len());
    let bytes = match s.output.format.unwrap_or(Format::Csv) {
        Format::Csv => curve_csv(k, &points).into_bytes(),
        Format::Json => to_json(&serde_json::json!({
            "k": k,
            "distances": points.iter().map(|p| p.1).collect::<Vec<_>>(),
        })),
    };
    write_output(&s.output, &bytes)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("PANEL_OUTLIERS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::config(format!("PANEL_OUTLIERS_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::config(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Detect(c) => detect(c),
        Command::Compare(c) => compare(c),
        Command::Curve(c) => curve(c),
        Command::Explore { common, addr } => explore::serve(common.resolve()?, addr),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
