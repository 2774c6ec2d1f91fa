use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use vibwalk_core::dsp::FeatureKind;
use vibwalk_core::ingest::SplitMode;
use vibwalk_core::model::TrainConfig;
use vibwalk_core::pipeline::Modality;
use vibwalk_core::{Condition, Material};
use vibwalk_harness::stages;
use vibwalk_harness::{Analysis, ExperimentConfig, FixtureSpec, Stage};
use vibwalk_mapping::simulate::{read_track, simulate_clients};
use vibwalk_mapping::{build_map, render_html, serve, AppState, HtmlOptions, MapOptions, ReportStore};

#[derive(Parser)]
#[command(name = "vibmap", version, about = "Ground-material decoding and haptic map construction")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Within,
    Cross,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityArg {
    Mic,
    Acc,
    Fused,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalysisArg {
    Grain,
    Wetdry,
    Noise,
    Merge,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "within")]
    split: Split,
    #[arg(long, value_enum, default_value = "mic")]
    modality: ModalityArg,
    #[arg(long, value_enum, default_value = "off")]
    tko: OnOff,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Train only the first N folds.
    #[arg(long)]
    max_folds: Option<usize>,
    /// Subjects held out per cross-user fold.
    #[arg(long, default_value_t = 1)]
    group_size: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Divide every channel width by this.
    #[arg(long, default_value_t = 1)]
    divisor: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a released dataset tree (WAV/CSV) into canonical f32 files and a manifest.
    Adapt {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sample rate of CSV sources.
        #[arg(long, default_value_t = 1600)]
        csv_rate: u64,
    },
    /// Validate a manifest and write its segment index.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute feature tensors for every unit of a segment index.
    Featurize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated: mic_mel, acc_stft, acc_mel, tko, fused.
        #[arg(long, value_delimiter = ',', default_value = "mic_mel")]
        features: Vec<String>,
    },
    /// Cross-validate on a feature directory and save the fold-0 model.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        args: TrainArgs,
    },
    /// Score a model on its held-out rows.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
    },
    /// Run one analysis and write JSON and text reports.
    Analyze {
        #[arg(value_enum)]
        which: AnalysisArg,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also retrain on the merged labels (merge only).
        #[arg(long)]
        retrain: bool,
        #[command(flatten)]
        args: TrainArgs,
    },
    /// Serve the report-collection and map endpoints.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Replay a GPS track as N concurrent clients against a server.
    SimulateClients {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        track: PathBuf,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        url: String,
        /// Northward spacing between clients, degrees.
        #[arg(long, default_value_t = 3e-5)]
        offset_deg: f64,
    },
    /// Render a store to a self-contained HTML map.
    Render {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        geojson: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 5.0)]
        radius_m: f64,
        #[arg(long)]
        tile_url: Option<String>,
    },
    /// Execute an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic dataset.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        subjects: u32,
        /// Comma-separated material names.
        #[arg(long, value_delimiter = ',', default_value = "carpet,sand,tile,wood,asphalt,grass")]
        materials: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 60.0)]
        seconds: f64,
        /// Comma-separated: dry, wet, noisy, clean.
        #[arg(long, value_delimiter = ',', default_value = "dry")]
        conditions: Vec<String>,
    },
}

fn experiment(args: &TrainArgs) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(&[Stage::Train], "", "");
    cfg.split = match args.split {
        Split::Within => SplitMode::WithinUser,
        Split::Cross => SplitMode::CrossUser,
    };
    cfg.modality = match args.modality {
        ModalityArg::Mic => Modality::Mic,
        ModalityArg::Acc => Modality::Acc,
        ModalityArg::Fused => Modality::Fused,
    };
    cfg.tko = matches!(args.tko, OnOff::On);
    cfg.folds = args.folds;
    cfg.max_folds = args.max_folds;
    cfg.group_size = args.group_size;
    cfg.seed = args.seed;
    cfg.network.divisor = args.divisor;
    let mut train = TrainConfig { epochs: args.epochs, batch_size: args.batch_size, ..TrainConfig::default() };
    train.adam.lr = args.lr;
    cfg.train = train;
    cfg
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn stage_err(e: stages::StageError) -> anyhow::Error {
    anyhow!(e)
}

fn parse_condition(s: &str) -> Result<Condition> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string())).map_err(|_| anyhow!("unknown condition `{s}`"))
}

fn execute(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Adapt { src, out, csv_rate } => {
            let layout = vibwalk_core::ingest::SourceLayout { root: src, csv_rate_hz: csv_rate };
            let (manifest, report) = vibwalk_core::ingest::adapt_dataset(&layout, &out)?;
            for s in &report.skipped {
                eprintln!("skipped {s}");
            }
            println!("{}", out.join("manifest.json").display());
            eprintln!("{} sessions, {} skipped", manifest.sessions.len(), report.skipped.len());
            Ok(())
        }
        Cmd::Ingest { manifest, out } => print_json(&stages::ingest(&manifest, &out).map_err(stage_err)?),
        Cmd::Featurize { input, out, features } => {
            let kinds = features
                .iter()
                .map(|f| FeatureKind::parse(f.trim()).ok_or_else(|| anyhow!("unknown feature kind `{f}`")))
                .collect::<Result<Vec<_>>>()?;
            print_json(&stages::featurize_index(&input, &kinds, &out).map_err(stage_err)?)
        }
        Cmd::Train { features, out, args } => {
            let cfg = experiment(&args);
            cfg.validate()?;
            print_json(&stages::train(&features, &cfg, &out).map_err(stage_err)?)
        }
        Cmd::Eval { model, features } => {
            let r = stages::evaluate_checkpoint(&model, &features).map_err(stage_err)?;
            print_json(&serde_json::json!({ "labels": r.labels, "metrics": r.metrics }))
        }
        Cmd::Analyze { which, features, model, out, retrain, args } => {
            let which = match which {
                AnalysisArg::Grain => Analysis::Grain,
                AnalysisArg::Wetdry => Analysis::Wetdry,
                AnalysisArg::Noise => Analysis::Noise,
                AnalysisArg::Merge => Analysis::Merge,
            };
            let model = match (which, model) {
                (Analysis::Noise | Analysis::Merge, None) => bail!("--model is required for this analysis"),
                (_, m) => m.unwrap_or_default(),
            };
            let mut cfg = experiment(&args);
            cfg.merge_retrain = retrain;
            print_json(&stages::analyze(which, &features, &model, &cfg, &out).map_err(stage_err)?)
        }
        Cmd::Serve { port, store, host } => {
            let store = ReportStore::open(&store, true)?;
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad listen address")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let (bound, handle) = serve(addr, AppState::new(store, MapOptions::default())).await?;
                eprintln!("listening on http://{bound}");
                handle.await??;
                Ok(())
            })
        }
        Cmd::SimulateClients { n, track, url, offset_deg } => {
            let track = read_track(&track)?;
            let rt = tokio::runtime::Runtime::new()?;
            let runs = rt.block_on(simulate_clients(url.trim_end_matches('/'), n, &track, offset_deg))?;
            print_json(&runs)
        }
        Cmd::Render { store, out, geojson, k, radius_m, tile_url } => {
            let store = ReportStore::open(&store, false)?;
            let doc = build_map(&store.snapshot(), k, radius_m)?;
            if let Some(p) = geojson {
                std::fs::write(p, serde_json::to_vec(&doc)?)?;
            }
            let mut opts = HtmlOptions::default();
            if let Some(u) = tile_url {
                opts.tile_url = u;
            }
            std::fs::write(&out, render_html(&doc, &opts)?)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = vibwalk_harness::run(&cfg)?;
            print!("{}", report.summary());
            Ok(())
        }
        Cmd::Fixtures { out, subjects, materials, seed, seconds, conditions } => {
            let materials = materials.iter().map(|m| m.trim().parse::<Material>().map_err(|e| anyhow!("{e}"))).collect::<Result<Vec<_>>>()?;
            let conditions = conditions.iter().map(|c| parse_condition(c)).collect::<Result<Vec<_>>>()?;
            let spec = FixtureSpec::new(subjects, &materials, seconds, seed).with_conditions(&conditions);
            let path = vibwalk_harness::make_fixtures(&spec, &out)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
