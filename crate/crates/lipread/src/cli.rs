//! Command-line interface: `ingest`, `align`, `lexicon`, `synth`, `serve`, `stats`.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lipread_core::alignment::{
    build_alignment_plan, detect_mouth_activity, mouth_motion_signal, render_padded_audio, ActivityConfig, AlignmentError, AlignmentPlan,
};
use lipread_core::landmark::{validate_video, GateConfig, LandmarkError};
use lipread_core::lexicon::{cluster_homophenes, generate_distractors, LexiconError, PronDict, VisemeMap};
use lipread_core::stats::{self, McmcConfig, ScoreSample, StatsError};
use lipread_core::synth::{build_manifest, DatasetManifest, EntryStatus, SynthError};
use lipread_core::Protocol;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::AdapterError;
use crate::api::{self, AppState, ServeError};
use crate::audio::{self, AudioError, SAMPLE_RATE};
use crate::fsutil::{read_json, write_json_atomic};
use crate::lexfiles::{self, LexFileError};
use crate::media::{FfmpegTool, MediaTool, MockMediaTool};
use crate::report::{compare_samples, CompareOptions, TestKind};
use crate::runner::{run_generation, AdapterConfig, DriverSet, RunConfig, RunError};
use crate::store::{LabelScope, Lexicon, Store, StoreConfig, StoreError};
use crate::track::{read_track_file, TrackError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    LexFile(#[from] LexFileError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Serve(#[from] ServeError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "lipread", version, about = "Lipreading training data and quiz service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Landmark track checks.
    #[command(subcommand)]
    Ingest(IngestCmd),
    /// Speech placement against mouth activity.
    #[command(subcommand)]
    Align(AlignCmd),
    /// Homophenes and answer distractors.
    #[command(subcommand)]
    Lexicon(LexiconCmd),
    /// Dataset manifests and generation runs.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Score statistics.
    #[command(subcommand)]
    Stats(StatsCmd),
}

#[derive(Debug, Subcommand)]
pub enum IngestCmd {
    /// Print the validity report; exit 2 if the video fails a gate.
    Validate {
        track: PathBuf,
        #[arg(long)]
        gates: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AlignCmd {
    /// Print the alignment plan for speech of the given length.
    Plan {
        track: PathBuf,
        #[arg(long)]
        speech_duration: f64,
        #[arg(long)]
        activity: Option<PathBuf>,
    },
    /// Pad speech with silence as the plan says.
    Render {
        plan: PathBuf,
        speech: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum LexiconCmd {
    /// Group the vocabulary's words by viseme sequence.
    Clusters { vocab: PathBuf, dict: PathBuf, map: PathBuf },
    /// Pick look-alike wrong answers for a word.
    Distractors {
        word: String,
        #[arg(short, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Candidate pool; the bundled word list when omitted.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum SynthCmd {
    /// Build a manifest from a vocabulary and a directory of driving videos.
    Manifest {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        drivers: PathBuf,
        #[arg(long, default_value_t = 10)]
        variations: u32,
        #[arg(long, default_value = "AE")]
        accent: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        gates: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate every pending or failed entry.
    Run {
        manifest: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        drivers: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TOML with [tts], [lipsync], [retry] and media_tool; mock adapters when omitted.
        #[arg(long)]
        adapters: Option<PathBuf>,
    },
    /// Print entry counts and failures.
    Status { manifest: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    Protocol,
    ProtocolDataset,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub media: PathBuf,
    /// Fixed seed for session sampling; random when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// TOML table mapping bearer tokens to user ids.
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "protocol")]
    pub label_scope: ScopeArg,
    /// Vocabulary JSON files; the bundled lists when omitted.
    #[arg(long)]
    pub vocab: Vec<PathBuf>,
    #[arg(long)]
    pub dict: Option<PathBuf>,
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[command(flatten)]
    pub mcmc: McmcArgs,
}

#[derive(Debug, Clone, Args)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 2000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 12500)]
    pub draws: usize,
}

impl McmcArgs {
    fn config(&self, seed: u64) -> McmcConfig {
        McmcConfig { chains: self.chains, burn_in: self.burn_in, draws: self.draws, ..McmcConfig::new(seed) }
    }
}

#[derive(Debug, Subcommand)]
pub enum StatsCmd {
    /// Compare two score files.
    Compare {
        #[arg(long, default_value = "z")]
        test: TestKind,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        mcmc: McmcArgs,
        a: PathBuf,
        b: PathBuf,
    },
    /// Mean, SEM and boxplot numbers for one score file.
    Summary { scores: PathBuf },
}

/// A score file: a bare array of numbers or `{"label": ..., "values": [...]}`.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ScoreFile {
    Bare(Vec<f64>),
    Labelled(ScoreSample),
}

fn read_scores(path: &Path) -> Result<ScoreSample, CliError> {
    let f: ScoreFile = read_json(path).map_err(io_err(path))?;
    Ok(match f {
        ScoreFile::Bare(values) => ScoreSample::new(path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), values),
        ScoreFile::Labelled(s) => s,
    })
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    let text = serde_json::to_string_pretty(value).expect("serializable");
    writeln!(out, "{text}").map_err(io_err(Path::new("<stdout>")))
}

fn load_lexicon(dict: Option<&Path>, map: Option<&Path>) -> Result<(PronDict, VisemeMap), CliError> {
    let dict = match dict {
        Some(p) => lexfiles::load_dict(p)?,
        None => lexfiles::demo_dict(),
    };
    let map = match map {
        Some(p) => lexfiles::load_viseme_map(p)?,
        None => VisemeMap::default_table(),
    };
    Ok((dict, map))
}

pub fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Ingest(IngestCmd::Validate { track, gates }) => {
            let gates: GateConfig = gates.as_deref().map(read_toml).transpose()?.unwrap_or_default();
            let report = validate_video(&read_track_file(&track)?, &gates)?;
            print_json(&report)?;
            Ok(if report.valid { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Align(AlignCmd::Plan { track, speech_duration, activity }) => {
            let cfg: ActivityConfig = activity.as_deref().map(read_toml).transpose()?.unwrap_or_default();
            let t = read_track_file(&track)?;
            let segment = detect_mouth_activity(&mouth_motion_signal(&t)?, t.fps, &cfg)?;
            if segment.multiple_regions {
                eprintln!("warning: several disjoint mouth-activity regions, using the longest");
            }
            print_json(&build_alignment_plan(&t.video_id, &segment, speech_duration, t.duration_s)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Align(AlignCmd::Render { plan, speech, output }) => {
            let plan: AlignmentPlan = read_json(&plan).map_err(io_err(&plan))?;
            let samples = audio::read_speech(&speech)?;
            audio::write_wav(&output, &render_padded_audio(&plan, &samples, SAMPLE_RATE)?, SAMPLE_RATE)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Lexicon(LexiconCmd::Clusters { vocab, dict, map }) => {
            let vocab = lexfiles::load_vocab(&vocab)?;
            let (dict, map) = load_lexicon(Some(&dict), Some(&map))?;
            print_json(&cluster_homophenes(vocab.iter().flat_map(|e| e.words()), &dict, &map))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Lexicon(LexiconCmd::Distractors { word, k, seed, vocab, dict, map }) => {
            let vocab = match vocab {
                Some(p) => lexfiles::load_vocab(&p)?,
                None => lexfiles::demo_vocab(Protocol::WordLevel),
            };
            let (dict, map) = load_lexicon(dict.as_deref(), map.as_deref())?;
            let pool = vocab.iter().filter(|e| e.protocol == Protocol::WordLevel).map(|e| e.text.as_str());
            print_json(&generate_distractors(&word, k, pool, &dict, &map, seed)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth(cmd) => synth(cmd),
        Command::Serve(args) => serve(args),
        Command::Stats(StatsCmd::Compare { test, alpha, seed, mcmc, a, b }) => {
            let (a, b) = (read_scores(&a)?, read_scores(&b)?);
            let opts = CompareOptions { test, alpha, mcmc: mcmc.config(seed) };
            print_json(&compare_samples(&a, &b, &opts)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats(StatsCmd::Summary { scores }) => {
            #[derive(Serialize)]
            struct Summary {
                label: String,
                n: usize,
                mean: f64,
                sem: f64,
                boxplot: stats::BoxplotSummary,
            }
            let s = read_scores(&scores)?;
            s.check()?;
            let summary = Summary {
                n: s.n(),
                mean: stats::mean(&s.values),
                sem: stats::sem(&s.values)?,
                boxplot: stats::boxplot_summary(&s.values)?,
                label: s.label,
            };
            print_json(&summary)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn synth(cmd: SynthCmd) -> Result<ExitCode, CliError> {
    match cmd {
        SynthCmd::Manifest { vocab, drivers, variations, accent, seed, gates, output } => {
            let vocab = lexfiles::load_vocab(&vocab)?;
            let gates: GateConfig = gates.as_deref().map(read_toml).transpose()?.unwrap_or_default();
            let screening = DriverSet::new(&drivers).screen(&gates).map_err(io_err(&drivers))?;
            for r in &screening.rejected {
                let why = r.error.clone().unwrap_or_else(|| format!("{:?}", r.report.as_ref().map(|x| &x.reasons).unwrap_or(&Vec::new())));
                eprintln!("skipping driving video {}: {why}", r.video_id);
            }
            let m = build_manifest(&vocab, &screening.valid, variations, &accent, seed)?;
            write_json_atomic(&output, &m).map_err(io_err(&output))?;
            print_json(&serde_json::json!({
                "manifest_id": m.manifest_id,
                "entries": m.entries.len(),
                "driving_videos": screening.valid.len(),
                "rejected_videos": screening.rejected.len(),
                "sampled_with_replacement": m.sampled_with_replacement,
            }))?;
            Ok(ExitCode::SUCCESS)
        }
        SynthCmd::Run { manifest, workers, drivers, out, adapters } => {
            let mut m: DatasetManifest = read_json(&manifest).map_err(io_err(&manifest))?;
            let ac: AdapterConfig = adapters.as_deref().map(read_toml).transpose()?.unwrap_or_else(AdapterConfig::mock);
            let media: Arc<dyn MediaTool> = match ac.media_tool.as_str() {
                "mock" => Arc::new(MockMediaTool),
                "ffmpeg" => Arc::new(FfmpegTool::default()),
                other => return Err(CliError::Usage(format!("unknown media_tool {other:?}, expected mock or ffmpeg"))),
            };
            let cfg = RunConfig {
                tts: ac.tts,
                lipsync: ac.lipsync,
                retry: ac.retry,
                workers,
                drivers: DriverSet::new(drivers),
                out_dir: out,
                activity: ActivityConfig::default(),
                media,
            };
            let report = run_generation(&mut m, &cfg, |m| write_json_atomic(&manifest, m))?;
            print_json(&serde_json::json!({"run": report, "counts": m.counts()}))?;
            Ok(if m.counts().failed > 0 { ExitCode::from(3) } else { ExitCode::SUCCESS })
        }
        SynthCmd::Status { manifest } => {
            let m: DatasetManifest = read_json(&manifest).map_err(io_err(&manifest))?;
            let failures: Vec<_> = m
                .entries
                .iter()
                .filter(|e| e.status == EntryStatus::Failed)
                .map(|e| serde_json::json!({"label_id": e.label_id, "variation_id": e.variation_id, "attempts": e.attempts, "error": e.error}))
                .collect();
            print_json(
                &serde_json::json!({"manifest_id": m.manifest_id, "protocol": m.protocol, "counts": m.counts(), "failures": failures}),
            )?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn serve(args: ServeArgs) -> Result<ExitCode, CliError> {
    let (dict, map) = load_lexicon(args.dict.as_deref(), args.map.as_deref())?;
    let vocab = if args.vocab.is_empty() {
        lexfiles::demo_vocab_all()
    } else {
        let mut all = Vec::new();
        for p in &args.vocab {
            all.extend(lexfiles::load_vocab(p)?);
        }
        all
    };
    let tokens: BTreeMap<String, String> = args.tokens.as_deref().map(read_toml).transpose()?.unwrap_or_default();
    let store_cfg = StoreConfig {
        root: args.store.clone(),
        seed: args.seed,
        label_scope: match args.label_scope {
            ScopeArg::Protocol => LabelScope::Protocol,
            ScopeArg::ProtocolDataset => LabelScope::ProtocolDataset,
        },
        grading: Default::default(),
        lexicon: Lexicon { vocab, dict, map },
    };
    let (store, recovery) = Store::open(store_cfg)?;
    if recovery.replayed > 0 || recovery.torn_tail_bytes > 0 {
        eprintln!("recovered store: {} attempts replayed, {} torn bytes dropped", recovery.replayed, recovery.torn_tail_bytes);
    }
    let state = AppState { store, media_root: args.media, alpha: args.alpha, tokens, mcmc: args.mcmc.config(0) };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(io_err(Path::new("<runtime>")))?;
    rt.block_on(api::serve(args.bind, state, shutdown_signal()))?;
    Ok(ExitCode::SUCCESS)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_documented_forms() {
        for args in [
            &["lipread", "ingest", "validate", "t.jsonl", "--gates", "g.toml"][..],
            &["lipread", "align", "plan", "t.jsonl", "--speech-duration", "1.5"],
            &["lipread", "align", "render", "p.json", "s.wav", "-o", "o.wav"],
            &["lipread", "lexicon", "clusters", "v.json", "d.dict", "m.tsv"],
            &["lipread", "lexicon", "distractors", "mat", "-k", "4", "--seed", "9"],
            &["lipread", "synth", "run", "m.json", "--workers", "4", "--drivers", "d", "--out", "o"],
            &["lipread", "synth", "status", "m.json"],
            &["lipread", "stats", "compare", "--test", "best", "--alpha", "0.1", "a.json", "b.json"],
            &["lipread", "stats", "summary", "s.json"],
            &["lipread", "serve", "--store", "s", "--media", "m"],
        ] {
            Cli::try_parse_from(args).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
    }
}
