//! The `kosm` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 model or training
//! error. Every failure prints one line starting with `kosm: <kind> error:`
//! to the diagnostic stream.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use kosm_core::bundle::{default_facility_catalog, ModelBundle};
use kosm_core::dataset::{cleanse_from, describe, SplitSpec};
use kosm_core::nas::{SearchBudget, SearchError, SearchSpace};
use kosm_core::neuralnet::{evaluate, ArchSpec, TrainConfig};

use crate::checkpoint::Checkpoint;
use crate::csvio::{self, parse_raw_csv};
use crate::lite::{self, Timestamp};
use crate::pipeline::{self, PipelineError};
use crate::{service, synth};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_MODEL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kosm", version, about = "Boarding-house rent price prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and cleanse a raw listing CSV.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Print the counters as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Descriptive statistics of a clean CSV.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 25)]
        top_k: usize,
        /// Write the report as JSON to this file.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Train one architecture and export it.
    Train(TrainArgs),
    /// Architecture search; exports the best model.
    Search(SearchArgs),
    /// Mean absolute error of a bundle on a clean CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Convert a JSON checkpoint to a .kosm bundle.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        time: TimeArgs,
    },
    /// Predict the monthly rent of one listing.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        kota: String,
        #[arg(long)]
        area: String,
        #[arg(long = "type")]
        type_kos: String,
        /// Comma-separated facility names.
        #[arg(long, value_delimiter = ',')]
        facilities: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Serve predictions over HTTP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: std::net::IpAddr,
    },
    /// Write a synthetic listing corpus.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = synth::MIRROR_ROWS)]
        rows: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct TimeArgs {
    /// Creation time in Unix seconds (default: now).
    #[arg(long)]
    timestamp: Option<u64>,
}

impl TimeArgs {
    fn resolve(&self) -> Timestamp {
        self.timestamp.map_or(Timestamp::Now, Timestamp::Fixed)
    }
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 42)]
    split_seed: u64,
}

impl SplitArgs {
    fn spec(&self) -> SplitSpec {
        SplitSpec {
            test_fraction: self.test_fraction,
            seed: self.split_seed,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated hidden widths.
    #[arg(long, default_value = "256,512,128", value_delimiter = ',', num_args = 1..)]
    arch: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write the full-precision JSON checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Also write the held-out rows as a clean CSV.
    #[arg(long)]
    test_out: Option<PathBuf>,
    /// Comma-separated facility catalog stored in the bundle.
    #[arg(long, value_delimiter = ',')]
    facilities: Option<Vec<String>>,
    /// Train on raw IDR targets.
    #[arg(long)]
    no_target_scaling: bool,
    #[command(flatten)]
    time: TimeArgs,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 8)]
    random: usize,
    #[arg(long, default_value_t = 8)]
    morph: usize,
    #[arg(long, default_value_t = 30)]
    epochs_per_trial: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Comma-separated width choices.
    #[arg(
        long,
        default_value = "16,32,64,128,256,512,1024",
        value_delimiter = ','
    )]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    min_depth: usize,
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
    /// JSON-lines file receiving one record per trial.
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    facilities: Option<Vec<String>>,
    #[command(flatten)]
    time: TimeArgs,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }
    fn data(message: impl ToString) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.to_string(),
        }
    }
    fn model(message: impl ToString) -> Self {
        Self {
            code: EXIT_MODEL,
            message: message.to_string(),
        }
    }
    fn kind(&self) -> &'static str {
        match self.code {
            EXIT_USAGE => "usage",
            EXIT_DATA => "data",
            _ => "model",
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Search(SearchError::Budget(_) | SearchError::Space(_)) => {
                Failure::usage(e)
            }
            e if e.is_data_error() => Failure::data(e),
            e => Failure::model(e),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn load_bundle(path: &Path) -> Result<ModelBundle, Failure> {
    lite::load(path).map_err(|e| Failure::model(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

/// Runs one invocation; `args` includes the program name.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let rendered = e.render().to_string();
            let mut lines = rendered.lines();
            let first = lines.next().unwrap_or("invalid arguments");
            let _ = writeln!(
                err,
                "kosm: usage error: {}",
                first.trim_start_matches("error: ")
            );
            for line in lines {
                let _ = writeln!(err, "{line}");
            }
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "kosm: {} error: {}", f.kind(), f.message);
            f.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::data(e);
    match command {
        Command::Ingest {
            input,
            output,
            json,
        } => {
            let file = File::open(&input)
                .map_err(|e| Failure::data(format!("{}: {e}", input.display())))?;
            let raw = parse_raw_csv(file).map_err(Failure::data)?;
            let clean = cleanse_from(&raw, &input.display().to_string()).map_err(Failure::data)?;
            csvio::save_clean_csv(&clean, &output).map_err(Failure::data)?;
            let p = &clean.provenance;
            if json {
                writeln!(out, "{}", to_json(p)).map_err(io)?;
            } else {
                writeln!(
                    out,
                    "rows read: {}\nduplicates dropped: {}\nnulls dropped: {}\nrows kept: {}",
                    p.rows_read,
                    p.duplicates_dropped,
                    p.nulls_dropped,
                    clean.len()
                )
                .map_err(io)?;
            }
        }
        Command::Stats {
            input,
            top_k,
            output,
            json,
        } => {
            let data = csvio::load_dataset(&input).map_err(Failure::data)?;
            let report = describe(&data, top_k).map_err(Failure::usage)?;
            let text = to_json(&report);
            if let Some(path) = output {
                write_file(&path, text.as_bytes())?;
            }
            if json {
                writeln!(out, "{text}").map_err(io)?;
            } else {
                writeln!(out, "total_records: {}", report.total_records).map_err(io)?;
                for (city, n) in &report.city_counts {
                    let areas = report.areas_per_city.get(city).copied().unwrap_or(0);
                    writeln!(out, "city {city}: {n} listings, {areas} areas").map_err(io)?;
                }
                for (t, n) in &report.type_counts {
                    writeln!(out, "type {t}: {n}").map_err(io)?;
                }
                for pc in &report.price_ranking {
                    writeln!(out, "price {}: {}", pc.price, pc.count).map_err(io)?;
                }
            }
        }
        Command::Train(a) => train(a, out)?,
        Command::Search(a) => search(a, out)?,
        Command::Evaluate { model, data, json } => {
            let bundle = load_bundle(&model)?;
            let data = csvio::load_dataset(&data).map_err(Failure::data)?;
            let mae = evaluate(&bundle.model, &bundle.encoder, &data).map_err(Failure::data)?;
            if json {
                writeln!(
                    out,
                    "{}",
                    serde_json::json!({ "mae": mae, "rows": data.len() })
                )
                .map_err(io)?;
            } else {
                writeln!(out, "MAE: {mae:.3}").map_err(io)?;
            }
        }
        Command::Export {
            checkpoint,
            out: path,
            time,
        } => {
            let ckpt = Checkpoint::load(&checkpoint).map_err(Failure::model)?;
            let bundle = ckpt
                .to_bundle(time.resolve().unix())
                .map_err(Failure::model)?;
            write_file(&path, &bundle.to_lite_bytes())?;
            writeln!(out, "wrote {}", path.display()).map_err(io)?;
        }
        Command::Predict {
            model,
            kota,
            area,
            type_kos,
            facilities,
            json,
        } => {
            let bundle = load_bundle(&model)?;
            let p = bundle.predict(&kota, &area, &type_kos, &facilities);
            if json {
                writeln!(out, "{}", to_json(&p)).map_err(io)?;
            } else {
                writeln!(out, "price_idr: {:.3}", p.price_idr).map_err(io)?;
                writeln!(out, "display_price: {}", p.display_price).map_err(io)?;
                writeln!(out, "facility_score_used: {}", p.facility_score_used).map_err(io)?;
                if !p.unknown_facilities.is_empty() {
                    writeln!(
                        out,
                        "unknown_facilities: {}",
                        p.unknown_facilities.join(",")
                    )
                    .map_err(io)?;
                }
                if !p.oov_fields.is_empty() {
                    writeln!(out, "oov_fields: {}", p.oov_fields.join(",")).map_err(io)?;
                }
            }
        }
        Command::Serve { model, port, bind } => {
            let bundle = Arc::new(load_bundle(&model)?);
            let addr = SocketAddr::new(bind, port);
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(Failure::model)?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr)
                    .await
                    .map_err(|e| Failure::usage(format!("cannot bind {addr}: {e}")))?;
                let local = listener.local_addr().map_err(Failure::usage)?;
                writeln!(out, "listening on http://{local}").map_err(io)?;
                out.flush().map_err(io)?;
                service::serve(listener, bundle)
                    .await
                    .map_err(Failure::model)
            })?;
        }
        Command::Synth {
            seed,
            rows,
            out: path,
        } => {
            if rows == 0 {
                return Err(Failure::usage("--rows must be at least 1"));
            }
            let data = synth::generate(seed, rows);
            csvio::save_clean_csv(&data, &path).map_err(Failure::data)?;
            writeln!(out, "wrote {} rows to {}", data.len(), path.display()).map_err(io)?;
        }
    }
    Ok(())
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::data(e);
    let arch = ArchSpec::new(4, a.arch.clone()).map_err(Failure::usage)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        seed: a.seed,
        target_scaling: !a.no_target_scaling,
        ..TrainConfig::default()
    };
    let data = csvio::load_dataset(&a.data).map_err(Failure::data)?;
    let catalog = a.facilities.unwrap_or_else(default_facility_catalog);
    let outcome = pipeline::train_model(&data, &arch, &cfg, a.split.spec(), catalog)?;
    let bundle = outcome.bundle(a.time.resolve().unix());
    write_file(&a.out, &bundle.to_lite_bytes())?;
    if let Some(path) = &a.checkpoint {
        outcome.checkpoint.save(path).map_err(Failure::data)?;
    }
    if let Some(path) = &a.test_out {
        csvio::save_clean_csv(&outcome.prepared.test, path).map_err(Failure::data)?;
    }
    writeln!(
        out,
        "arch {} ({} trainable parameters), {} epochs\ntrain MAE: {:.3}\ntest MAE: {:.3}\nwrote {}",
        arch.summary(),
        outcome.model.n_params(),
        cfg.epochs,
        outcome.train_mae,
        outcome.test_mae,
        a.out.display()
    )
    .map_err(io)
}

fn search(a: SearchArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::data(e);
    let space = SearchSpace {
        input_dim: 4,
        min_depth: a.min_depth,
        max_depth: a.max_depth,
        widths: a.widths.clone(),
        positional: Vec::new(),
    };
    let budget = SearchBudget {
        n_random: a.random,
        n_morph: a.morph,
        epochs_per_trial: a.epochs_per_trial,
        seed: a.seed,
    };
    let base = TrainConfig {
        batch_size: a.batch_size,
        learning_rate: a.lr,
        ..TrainConfig::default()
    };
    let data = csvio::load_dataset(&a.data).map_err(Failure::data)?;
    let catalog = a.facilities.unwrap_or_else(default_facility_catalog);
    let run = pipeline::search_model(
        &data,
        &space,
        &budget,
        &base,
        a.split.spec(),
        catalog,
        a.time.resolve().unix(),
    )?;
    if let Some(path) = &a.ledger {
        let file =
            File::create(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        for t in &run.trials {
            writeln!(w, "{}", to_json(t)).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    write_file(&a.out, &run.bundle.to_lite_bytes())?;
    for t in &run.trials {
        let mae = t
            .val_mae
            .map_or_else(|| "diverged".to_string(), |m| format!("{m:.3}"));
        writeln!(out, "trial {} {} val MAE: {mae}", t.id, t.arch.summary()).map_err(io)?;
    }
    writeln!(
        out,
        "best: trial {} {} val MAE: {:.3}\nwrote {}",
        run.best_trial,
        run.best.arch.summary(),
        run.bundle.metadata.val_mae,
        a.out.display()
    )
    .map_err(io)
}
