use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use dialectic_client::{Client, Upload};
use dialectic_core::api::HealthStatus;
use dialectic_core::evaluation::{corpus_error_rate, sample_many, word_error_rate, HyperparamSpace, ScoreReport};
use dialectic_core::feedback::FeedbackStore;
use dialectic_server::ServiceConfig;
use uuid::Uuid;

#[derive(Parser)]
#[command(name = "dialectic", version, about = "Dialect-aware Arabic transcription")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Remote {
    /// Service base URL.
    #[arg(long, env = "DIALECTIC_URL", default_value = "http://127.0.0.1:8080")]
    url: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Word and character error rates of line-aligned hypothesis text.
    Score {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "hyp")]
        hypothesis: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Draw configurations from the identifier search space, one JSON object per line.
    SampleHparams {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Print unflagged events from a feedback store, one JSON object per line.
    ExportSilver {
        #[arg(long)]
        store: PathBuf,
    },
    /// Transcribe an audio file through a running service.
    Transcribe {
        file: PathBuf,
        /// "auto", "other" or a dialect code such as EGY.
        #[arg(long, default_value = "auto")]
        dialect: String,
        #[arg(long)]
        min_confidence: Option<f64>,
        /// Send base64 JSON instead of a multipart form.
        #[arg(long)]
        json_upload: bool,
        #[command(flatten)]
        remote: Remote,
    },
    /// Identify the dialect of an audio file through a running service.
    Identify {
        file: PathBuf,
        #[command(flatten)]
        remote: Remote,
    },
    /// Flag an event, or one model's output in it.
    Flag {
        event_id: Uuid,
        #[arg(long)]
        model: Option<String>,
        #[command(flatten)]
        remote: Remote,
    },
    /// List the service's models.
    Models {
        #[command(flatten)]
        remote: Remote,
    },
    /// Service health; exits non-zero when failing.
    Health {
        #[command(flatten)]
        remote: Remote,
    },
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn percent(v: f64) -> String {
    if v.is_finite() {
        format!("{:.2}%", v * 100.0)
    } else {
        "undefined (empty reference)".to_string()
    }
}

fn score(reference: &Path, hypothesis: &Path, json: bool) -> Result<()> {
    let refs = read_lines(reference)?;
    let hyps = read_lines(hypothesis)?;
    if refs.len() != hyps.len() {
        bail!("{} reference lines but {} hypothesis lines", refs.len(), hyps.len());
    }
    let pairs: Vec<(&str, &str)> = refs.iter().map(String::as_str).zip(hyps.iter().map(String::as_str)).collect();
    let corpus = corpus_error_rate(pairs.iter().copied());
    if json {
        let utterances: Vec<ScoreReport> = pairs.iter().map(|(r, h)| word_error_rate(r, h)).collect();
        let out = serde_json::json!({ "corpus": corpus, "utterances": utterances });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("utterances {}", pairs.len());
        println!(
            "WER {} (S={} I={} D={}, {} reference words)",
            percent(corpus.wer),
            corpus.substitutions,
            corpus.insertions,
            corpus.deletions,
            corpus.ref_tokens
        );
        println!("CER {} ({} reference characters)", percent(corpus.cer), corpus.ref_chars);
    }
    Ok(())
}

fn print_json_lines<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut out = std::io::stdout().lock();
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn read_audio(path: &Path) -> Result<(Vec<u8>, String)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "audio".into());
    Ok((bytes, name))
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

async fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Serve { config } => {
            let cfg = ServiceConfig::load(&config)?;
            dialectic_server::serve(cfg).await?;
        }
        Command::Score {
            reference,
            hypothesis,
            json,
        } => score(&reference, &hypothesis, json)?,
        Command::SampleHparams { seed, count } => {
            print_json_lines(sample_many(&HyperparamSpace::default(), seed, count))?;
        }
        Command::ExportSilver { store } => {
            if !store.is_file() {
                bail!("no feedback store at {}", store.display());
            }
            print_json_lines(FeedbackStore::open(&store)?.export_silver())?;
        }
        Command::Transcribe {
            file,
            dialect,
            min_confidence,
            json_upload,
            remote,
        } => {
            let (bytes, name) = read_audio(&file)?;
            let upload = if json_upload { Upload::Base64Json } else { Upload::Multipart };
            let resp = Client::new(&remote.url)?
                .transcribe(bytes, &name, &dialect, min_confidence, upload)
                .await?;
            pretty(&resp)?;
        }
        Command::Identify { file, remote } => {
            let (bytes, name) = read_audio(&file)?;
            pretty(&Client::new(&remote.url)?.identify(bytes, &name, Upload::Multipart).await?)?;
        }
        Command::Flag { event_id, model, remote } => {
            Client::new(&remote.url)?.flag(event_id, model.as_deref()).await?;
            println!("flagged {event_id}");
        }
        Command::Models { remote } => pretty(&Client::new(&remote.url)?.models().await?)?,
        Command::Health { remote } => {
            let h = Client::new(&remote.url)?.health().await?;
            pretty(&h)?;
            if h.status == HealthStatus::Failing {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()).await {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
