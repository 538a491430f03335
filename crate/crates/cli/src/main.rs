//! `subscan`: p-value ranges, subset scans, detection AUC and synthetic data
//! from the command line.

mod error;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use subscan_core::analysis::{representation, synthesize, SynthSpec};
use subscan_core::store::import_csv;
use subscan_core::{
    evaluate_detection, exhaustive_scan, load_acts, load_layout, per_layer_counts, scan,
    score_all_nodes, ActivationMatrix, AlphaPolicy, BackgroundActivations, NetworkLayout,
    RangeSource, RangeVector, ScanConfig, SortedBackground,
};

use crate::error::CliError;
use crate::output::{emit, manifest_path, write_atomic, ManifestBuilder};

/// Inputs with more rows than this get a sorted background index; fewer are
/// answered by sweeping the row-major background once per input.
const SORTED_INDEX_MIN_ROWS: usize = 5;

#[derive(Parser)]
#[command(
    name = "subscan",
    version,
    about = "Subset scanning over neural network activations"
)]
struct Cli {
    /// Worker threads for per-input scoring (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-node p-value ranges of one input row as JSON.
    Pvalues {
        /// Background activations (ACTS).
        #[arg(long)]
        background: PathBuf,
        /// Evaluation activations (ACTS).
        #[arg(long)]
        input: PathBuf,
        /// Row of the evaluation file to convert.
        #[arg(long)]
        row: usize,
        /// Output JSON file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Background values within this distance of the input count as ties.
        #[arg(long, default_value_t = 0.0)]
        tie_tolerance: f64,
    },
    /// Highest-scoring node subset for every input row, as JSONL.
    Scan {
        #[arg(long)]
        background: PathBuf,
        /// Layout JSON; must cover every column.
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        scan: ScanFlags,
        /// Score all eligible nodes together instead of searching subsets.
        #[arg(long)]
        all_nodes: bool,
        /// Output JSONL file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detection AUC of the subset scan and the all-nodes score.
    EvalAuc {
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        /// Clean evaluation activations (ACTS).
        #[arg(long)]
        clean: PathBuf,
        /// Anomalous evaluation activations (ACTS).
        #[arg(long)]
        anom: PathBuf,
        #[command(flatten)]
        scan: ScanFlags,
        /// Output JSON file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer representation of each detected subset, as CSV.
    Represent {
        /// JSONL written by `scan`.
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        /// Output CSV file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded synthetic background, clean and anomalous activations.
    Synth {
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        /// Number of background rows.
        #[arg(long, default_value_t = 500)]
        background: usize,
        /// Number of clean evaluation rows.
        #[arg(long, default_value_t = 50)]
        clean: usize,
        /// Number of anomalous evaluation rows.
        #[arg(long, default_value_t = 50)]
        anom: usize,
        /// Fraction of nodes carrying the shift.
        #[arg(long, default_value_t = 0.05)]
        rho: f64,
        /// Shift added to planted nodes in anomalous rows.
        #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `single` (one layer named "all") or `cifar-cnn` (needs --nodes 96800).
        #[arg(long, default_value = "single")]
        layout: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Exhaustive search over every subset of a small range list.
    Oracle {
        /// JSON as written by `pvalues`.
        #[arg(long)]
        ranges: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha_max: f64,
        /// `endpoints` or `grid:<k>`.
        #[arg(long, default_value = "endpoints")]
        alpha_policy: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert headerless CSV (one input per line) to ACTS.
    ImportCsv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct ScanFlags {
    /// Largest significance level considered, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    alpha_max: f64,
    /// `endpoints` or `grid:<k>`.
    #[arg(long, default_value = "endpoints")]
    alpha_policy: String,
    /// Restrict the scan to these layers (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    layers: Vec<String>,
    /// Background values within this distance of the input count as ties.
    #[arg(long, default_value_t = 0.0)]
    tie_tolerance: f64,
}

impl ScanFlags {
    fn config(&self) -> Result<ScanConfig, CliError> {
        let config = ScanConfig {
            alpha_max: self.alpha_max,
            alpha_policy: self.alpha_policy.parse::<AlphaPolicy>()?,
            layer_restriction: (!self.layers.is_empty()).then(|| self.layers.clone()),
            tie_tolerance: self.tie_tolerance,
        };
        config.validate()?;
        Ok(config)
    }
}

fn config_json(config: &ScanConfig) -> serde_json::Value {
    json!({
        "alpha_max": config.alpha_max,
        "alpha_policy": config.alpha_policy.to_string(),
        "layers": config.layer_restriction,
        "tie_tolerance": config.tie_tolerance,
    })
}

fn load_background(path: &Path) -> Result<BackgroundActivations, CliError> {
    Ok(BackgroundActivations::new(load_acts(path)?)?)
}

fn check_columns(what: &str, background: usize, other: usize) -> Result<(), CliError> {
    if background != other {
        return Err(CliError::Dimension(format!(
            "{what} has {other} columns, background has {background}"
        )));
    }
    Ok(())
}

fn load_checked_layout(path: &Path, n_nodes: usize) -> Result<NetworkLayout, CliError> {
    let layout = load_layout(path)?;
    if layout.total_nodes() != n_nodes {
        return Err(CliError::Dimension(format!(
            "layout covers {} nodes, matrices have {n_nodes} columns",
            layout.total_nodes()
        )));
    }
    Ok(layout)
}

enum Background {
    Sweep(BackgroundActivations),
    Sorted(SortedBackground),
}

impl Background {
    fn for_rows(background: BackgroundActivations, rows: usize) -> Self {
        if rows >= SORTED_INDEX_MIN_ROWS {
            Background::Sorted(SortedBackground::new(&background))
        } else {
            Background::Sweep(background)
        }
    }

    fn source(&self) -> &dyn RangeSource {
        match self {
            Background::Sweep(b) => b,
            Background::Sorted(s) => s,
        }
    }
}

fn json_line(w: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    serde_json::to_writer(&mut *w, value).map_err(CliError::internal)?;
    w.write_all(b"\n").map_err(CliError::internal)
}

fn finish_manifest(manifest: ManifestBuilder, out: Option<&Path>) -> Result<(), CliError> {
    if let Some(out) = out {
        manifest.write(&manifest_path(out), &[out])?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ScanLine {
    row: usize,
    score: f64,
    alpha: f64,
    subset_size: usize,
    n_alpha: f64,
    nodes: Vec<usize>,
    per_layer_counts: IndexMap<String, usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(CliError::internal)?;
    }

    match cli.command {
        Command::Pvalues {
            background,
            input,
            row,
            out,
            tie_tolerance,
        } => {
            let mut manifest = ManifestBuilder::new(
                "pvalues",
                json!({ "row": row, "tie_tolerance": tie_tolerance }),
            );
            manifest.input(&background);
            manifest.input(&input);
            let bg = load_background(&background)?;
            let eval = load_acts(&input)?;
            check_columns("input", bg.n_nodes(), eval.cols())?;
            if row >= eval.rows() {
                return Err(CliError::Dimension(format!(
                    "row {row} out of range for {} input rows",
                    eval.rows()
                )));
            }
            let ranges = bg.ranges_for_input(eval.row(row), tie_tolerance)?;
            emit(out.as_deref(), |w| {
                w.write_all(ranges.to_json().as_bytes())
                    .and_then(|_| w.write_all(b"\n"))
                    .map_err(CliError::internal)
            })?;
            finish_manifest(manifest, out.as_deref())
        }

        Command::Scan {
            background,
            layout,
            input,
            scan: flags,
            all_nodes,
            out,
        } => {
            let config = flags.config()?;
            let mut cfg_json = config_json(&config);
            cfg_json["all_nodes"] = json!(all_nodes);
            let mut manifest = ManifestBuilder::new("scan", cfg_json);
            for p in [&background, &layout, &input] {
                manifest.input(p);
            }
            let bg = load_background(&background)?;
            let layout = load_checked_layout(&layout, bg.n_nodes())?;
            let eval = load_acts(&input)?;
            check_columns("input", bg.n_nodes(), eval.cols())?;
            let bg = Background::for_rows(bg, eval.rows());
            let source = bg.source();

            let lines: Vec<ScanLine> = (0..eval.rows())
                .into_par_iter()
                .map(|row| -> Result<ScanLine, CliError> {
                    let ranges = source.ranges_for_input(eval.row(row), config.tie_tolerance)?;
                    let result = if all_nodes {
                        score_all_nodes(&ranges, &config, &layout)?
                    } else {
                        scan(&ranges, &config, &layout)?
                    };
                    Ok(ScanLine {
                        row,
                        score: result.score,
                        alpha: result.alpha_star,
                        subset_size: result.n,
                        n_alpha: result.n_alpha,
                        per_layer_counts: per_layer_counts(&result.subset, &layout)?,
                        nodes: result.subset,
                    })
                })
                .collect::<Result<_, _>>()?;
            emit(out.as_deref(), |w| {
                lines.iter().try_for_each(|line| json_line(w, line))
            })?;
            finish_manifest(manifest, out.as_deref())
        }

        Command::EvalAuc {
            background,
            layout,
            clean,
            anom,
            scan: flags,
            out,
        } => {
            let config = flags.config()?;
            let mut manifest = ManifestBuilder::new("eval-auc", config_json(&config));
            for p in [&background, &layout, &clean, &anom] {
                manifest.input(p);
            }
            let bg = load_background(&background)?;
            let layout = load_checked_layout(&layout, bg.n_nodes())?;
            let clean = load_acts(&clean)?;
            let anom = load_acts(&anom)?;
            check_columns("clean", bg.n_nodes(), clean.cols())?;
            check_columns("anom", bg.n_nodes(), anom.cols())?;
            let bg = Background::for_rows(bg, clean.rows() + anom.rows());
            let report = evaluate_detection(bg.source(), &clean, &anom, &config, &layout)?;
            emit(out.as_deref(), |w| json_line(w, &report))?;
            finish_manifest(manifest, out.as_deref())
        }

        Command::Represent {
            results,
            layout,
            out,
        } => {
            let mut manifest = ManifestBuilder::new("represent", json!({}));
            manifest.input(&results);
            manifest.input(&layout);
            let layout = load_layout(&layout)?;
            let text =
                std::fs::read_to_string(&results).map_err(|e| CliError::input(&results, e))?;
            let mut rows = Vec::new();
            for (i, line) in text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
            {
                let parsed: ScanLine = serde_json::from_str(line).map_err(|e| {
                    CliError::Input(format!("{} line {}: {e}", results.display(), i + 1))
                })?;
                let report = representation(&parsed.nodes, &layout)?;
                rows.push((parsed.row, report));
            }
            emit(out.as_deref(), |w| {
                let mut csv = csv::Writer::from_writer(w);
                let write = |csv: &mut csv::Writer<&mut dyn Write>| -> csv::Result<()> {
                    csv.write_record(["input_row", "layer", "rep"])?;
                    for (row, report) in &rows {
                        for layer in &report.layers {
                            csv.write_record([
                                row.to_string(),
                                layer.layer.clone(),
                                layer.rep.to_string(),
                            ])?;
                        }
                    }
                    csv.flush()?;
                    Ok(())
                };
                write(&mut csv).map_err(CliError::internal)
            })?;
            finish_manifest(manifest, out.as_deref())
        }

        Command::Synth {
            nodes,
            background,
            clean,
            anom,
            rho,
            delta,
            seed,
            layout,
            out_dir,
        } => {
            let spec = SynthSpec {
                n_nodes: nodes,
                n_background: background,
                n_clean_eval: clean,
                n_anomalous_eval: anom,
                affected_fraction: rho,
                shift: delta,
                seed,
            };
            let layout = match layout.as_str() {
                "single" => NetworkLayout::single("all", nodes)?,
                "cifar-cnn" => {
                    let t = NetworkLayout::cifar_cnn();
                    if t.total_nodes() != nodes {
                        return Err(CliError::Usage(format!(
                            "--layout cifar-cnn needs --nodes {}",
                            t.total_nodes()
                        )));
                    }
                    t
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "--layout must be `single` or `cifar-cnn`, got {other:?}"
                    )))
                }
            };
            let manifest = ManifestBuilder::new(
                "synth",
                serde_json::to_value(&spec).map_err(CliError::internal)?,
            );
            let data = synthesize(&spec)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| CliError::output(&out_dir, e))?;
            let write_matrix = |name: &str, m: &ActivationMatrix| -> Result<PathBuf, CliError> {
                let path = out_dir.join(name);
                write_atomic(&path, |w| Ok(m.write_acts(w)?))?;
                Ok(path)
            };
            let bg = write_matrix("bg.acts", data.background.matrix())?;
            let cl = write_matrix("clean.acts", &data.clean)?;
            let an = write_matrix("anom.acts", &data.anomalous)?;
            let layout_path = out_dir.join("layout.json");
            write_atomic(&layout_path, |w| {
                writeln!(w, "{}", layout.to_json()).map_err(CliError::internal)
            })?;
            let planted_path = out_dir.join("planted.json");
            write_atomic(&planted_path, |w| {
                json_line(w, &json!({ "planted": data.planted }))
            })?;
            manifest.write(
                &out_dir.join("manifest.json"),
                &[&bg, &cl, &an, &layout_path, &planted_path],
            )
        }

        Command::Oracle {
            ranges,
            alpha_max,
            alpha_policy,
            out,
        } => {
            let config = ScanConfig {
                alpha_max,
                alpha_policy: alpha_policy.parse()?,
                ..ScanConfig::default()
            };
            let mut manifest = ManifestBuilder::new("oracle", config_json(&config));
            manifest.input(&ranges);
            let text = std::fs::read_to_string(&ranges).map_err(|e| CliError::input(&ranges, e))?;
            let ranges = RangeVector::from_json(&text)?;
            let result = exhaustive_scan(&ranges, &config)?;
            emit(out.as_deref(), |w| json_line(w, &result))?;
            finish_manifest(manifest, out.as_deref())
        }

        Command::ImportCsv { input, out } => {
            let mut manifest = ManifestBuilder::new("import-csv", json!({}));
            manifest.input(&input);
            let matrix = import_csv(&input)?;
            write_atomic(&out, |w| Ok(matrix.write_acts(w)?))?;
            finish_manifest(manifest, Some(&out))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            let first = rendered
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", category.name());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
