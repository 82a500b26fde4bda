use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use focusloop_core::ahp::{
    consistency_ratio, default_comparison, principal_eigenvector, score_option, select_channels,
    ChannelOption, CONSISTENCY_THRESHOLD,
};
use focusloop_core::fnn::FnnHyper;
use focusloop_core::svm::SvmHyper;
use focusloop_core::tick::{TickEngine, TrainedModel};
use focusloop_core::{Band, ChannelSet};
use serde_json::json;

use focusloop::bench::benchmark_latency;
use focusloop::config::PipelineConfig;
use focusloop::ingestion::osc_listener::OscListener;
use focusloop::ingestion::protocol::{run_protocol, trials_from_recording, Group, TrialProtocol};
use focusloop::ingestion::queue::{BoundedQueue, DEFAULT_QUEUE_CAPACITY};
use focusloop::ingestion::recording::{read_session, record_session, replay_csv, write_session, SessionWriter};
use focusloop::ingestion::synth::{free_control_schedule, synth_stream, SyntheticConfig};
use focusloop::ingestion::{spawn_producer, Paced, SampleSource, SourceSpec, VecSource};
use focusloop::model_file::{load_model, save_model};
use focusloop::service::{run_source, to_json_line, RunningService, ServeOptions};
use focusloop::workflow::{csp_svm_cv, threshold_baseline_cv, train_nn_workflow, train_svm_workflow, SvmWorkflowConfig};

/// Length of the free-control stream behind a `synth:` source.
const SYNTH_SOURCE_S: f64 = 3600.0;

#[derive(Parser)]
#[command(name = "focusloop", version, about = "Concentration/relaxation neurofeedback engine")]
struct Cli {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct SourceArgs {
    /// osc:<port>, csv:<path> or synth:<config.json>
    #[arg(long)]
    source: SourceSpec,
    /// Replay/synthesis pace; 1 is real time, 0 is as fast as possible.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Record a source to CSV.
    Record {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long)]
        out: PathBuf,
        /// Stop after this many seconds of samples.
        #[arg(long)]
        seconds: Option<f64>,
    },
    /// Run the prompted trial protocol and save a labeled session.
    ProtocolRun {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long, default_value = "A")]
        group: Group,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train CSP filters and the SVM from a labeled protocol session.
    TrainSvm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Save even when held-out accuracy is below the acceptance bar.
        #[arg(long)]
        force: bool,
    },
    /// Train the look-ahead network from a free-control session.
    TrainNn {
        #[arg(long)]
        input: PathBuf,
        /// Accepted SVM model file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
    },
    /// Classify a live source and broadcast state frames.
    Serve {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        /// Also print frames to stdout as NDJSON.
        #[arg(long)]
        stdout: bool,
        /// Enable POST /manual.
        #[arg(long)]
        dev: bool,
    },
    /// Classify a recording unpaced and print the frames as NDJSON.
    Replay {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score channel options and pick one.
    SelectChannels {
        /// Comma-separated `band[+band...]=accuracy`, e.g. gamma=0.92,beta=0.84
        #[arg(long, default_value = "gamma=0.9238,beta=0.8416,alpha=0.714")]
        options: String,
    },
    /// Measure per-tick classification latency.
    Benchmark {
        #[command(flatten)]
        src: SourceArgs,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        ticks: usize,
    },
    /// Write a synthetic session: a protocol run, or free control for `--seconds`.
    Synth {
        /// Synthetic config; defaults to 3 sigma separation.
        #[arg(long)]
        synth_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        group: Option<Group>,
        #[arg(long, default_value_t = 120.0)]
        seconds: f64,
    },
}

fn pipeline_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    })
}

fn open_source(spec: &SourceSpec, channels: &ChannelSet, speed: f64) -> anyhow::Result<(Box<dyn SampleSource>, Option<OscListener>)> {
    Ok(match spec {
        SourceSpec::Csv(p) => (Box::new(replay_csv(p, speed)?), None),
        SourceSpec::Synth(p) => {
            let cfg = SyntheticConfig::load(p)?;
            let schedule = free_control_schedule(SYNTH_SOURCE_S, 5, 10, cfg.seed);
            let samples = synth_stream(&cfg, &schedule)?;
            (Box::new(Paced::new(VecSource::new(cfg.channels.clone(), samples), speed)?), None)
        }
        SourceSpec::Osc(port) => {
            let q = BoundedQueue::new(DEFAULT_QUEUE_CAPACITY);
            let l = OscListener::bind(*port, channels.clone(), q)?;
            (Box::new(l.source(channels.clone())), Some(l))
        }
    })
}

fn model_for(cfg: &PipelineConfig, arg: Option<&Path>) -> anyhow::Result<TrainedModel> {
    let path = arg
        .or(cfg.model_path.as_deref())
        .context("no model given (use --model or model_path in the config)")?;
    let (model, channels) = load_model(path).with_context(|| format!("loading {}", path.display()))?;
    if channels != cfg.channels {
        bail!("model channels differ from the configured channel set");
    }
    cfg.check_model(&model)?;
    Ok(model)
}

fn parse_options(s: &str) -> anyhow::Result<Vec<ChannelOption>> {
    s.split(',')
        .map(|item| {
            let (bands, acc) = item.split_once('=').context("expected band=accuracy")?;
            let bands = bands
                .split('+')
                .map(|b| match b.trim() {
                    "gamma" => Ok(Band::Gamma),
                    "beta" => Ok(Band::Beta),
                    "alpha" => Ok(Band::Alpha),
                    other => bail!("unknown band `{}`", other),
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            Ok(ChannelOption::new(ChannelSet::bands(&bands), acc.trim().parse()?)?)
        })
        .collect()
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = pipeline_config(cli.config.as_deref())?;
    let mut stdout = std::io::stdout();

    match cli.cmd {
        Cmd::Record { src, out, seconds } => {
            let (mut source, _listener) = open_source(&src.source, &cfg.channels, src.speed)?;
            let limit = seconds.map(|s| (s * 10.0).round() as usize);
            let rec = record_session(&mut source, &out, false, limit)?;
            log::info!("wrote {} samples to {}", rec.len(), out.display());
        }
        Cmd::ProtocolRun { src, group, out } => {
            let (mut source, _listener) = open_source(&src.source, &cfg.channels, src.speed)?;
            let protocol = TrialProtocol { group, ..TrialProtocol::default() };
            let mut w = SessionWriter::create(&out, source.channels().clone(), true)?;
            let trials = run_protocol(
                &protocol,
                &mut source,
                |m| eprintln!("[{:>7.1} s] {}", m.start_ms as f64 / 1000.0, m.phase),
                |ls| w.write(&ls.sample, ls.label),
            )?;
            log::info!("{} trials, {} rows in {}", trials.len(), w.rows(), out.display());
        }
        Cmd::TrainSvm { input, out, force } => {
            let rec = read_session(&input)?;
            let trials = trials_from_recording(&rec, &TrialProtocol::default())?;
            let wf = SvmWorkflowConfig {
                seed: cli.seed,
                svm: SvmHyper { seed: cli.seed, ..SvmHyper::default() },
                window_len: cfg.window_len,
                ..SvmWorkflowConfig::default()
            };
            let res = train_svm_workflow(&trials, &wf)?;
            let cv = csp_svm_cv(&trials, &wf)?;
            let baseline = threshold_baseline_cv(&trials, &wf)?;
            let report = json!({
                "test_accuracy": res.test_accuracy,
                "accepted": res.accepted,
                "cv_overall": cv.overall_acc,
                "cv_concentration": cv.concentration_acc,
                "cv_relaxation": cv.relaxation_acc,
                "baseline_cv_overall": baseline.overall_acc,
            });
            writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
            if res.accepted || force {
                save_model(&out, &TrainedModel::Svm(res.model), &rec.channels)?;
                log::info!("model saved to {}", out.display());
            } else {
                bail!("held-out accuracy {:.3} not above {}; model not saved", res.test_accuracy, wf.accept_above);
            }
        }
        Cmd::TrainNn { input, model, out, epochs } => {
            let rec = read_session(&input)?;
            let (svm, channels) = load_model(&model)?;
            let TrainedModel::Svm(svm) = svm else {
                bail!("{} is not an svm model", model.display());
            };
            if channels != rec.channels {
                bail!("recording channels differ from the svm model's");
            }
            let hyper = FnnHyper { epochs, seed: cli.seed, ..FnnHyper::default() };
            let res = train_nn_workflow(&rec.samples, &svm, cfg.window_len, hyper)?;
            log::info!(
                "{} pairs, final loss {:.4}",
                res.pairs,
                res.loss_history.last().copied().unwrap_or(f64::NAN)
            );
            save_model(&out, &TrainedModel::Fnn(res.net), &channels)?;
        }
        Cmd::Serve { src, model, port, stdout: to_stdout, dev } => {
            let model = model_for(&cfg, model.as_deref())?;
            let engine = TickEngine::new(model, cfg.buffer(), cfg.plane())?;
            let (source, listener) = open_source(&src.source, &cfg.channels, src.speed)?;
            let queue = BoundedQueue::new(DEFAULT_QUEUE_CAPACITY);
            let producer = spawn_producer(source, queue.clone());
            let opts = ServeOptions {
                bind: ([0, 0, 0, 0], port.unwrap_or(cfg.broadcast_port)).into(),
                ratings_path: cfg.ratings_path.clone(),
                dev_mode: dev || cfg.dev_mode,
                stdout: to_stdout,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let svc = RunningService::start(opts, engine, queue).await?;
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = async {
                        while !svc.loop_finished() {
                            tokio::time::sleep(std::time::Duration::from_millis(100)).await;
                        }
                    } => {}
                }
                let n = svc.stop().await?;
                log::info!("{} frames sent", n);
                anyhow::Ok(())
            })?;
            drop(listener);
            producer.join().map_err(|_| anyhow::anyhow!("producer panicked"))??;
        }
        Cmd::Replay { input, model } => {
            let model = model_for(&cfg, model.as_deref())?;
            let mut engine = TickEngine::new(model, cfg.buffer(), cfg.plane())?;
            let mut source = replay_csv(&input, 0.0)?;
            run_source(&mut engine, &mut source, |m| {
                writeln!(stdout, "{}", to_json_line(m))?;
                Ok(())
            })?;
        }
        Cmd::SelectChannels { options } => {
            let options = parse_options(&options)?;
            let a = default_comparison();
            let (w, lambda) = principal_eigenvector(&a)?;
            let cr = consistency_ratio(&a)?;
            let best = select_channels(&w, &options)?;
            let rows: Vec<_> = options
                .iter()
                .map(|o| {
                    let names: Vec<String> = o.channels.channels().iter().map(|c| c.to_string()).collect();
                    json!({ "channels": names, "q": score_option(&w, o) })
                })
                .collect();
            let chosen: Vec<String> = best.channels.channels().iter().map(|c| c.to_string()).collect();
            let report = json!({
                "weights": w.weights(),
                "lambda_max": lambda,
                "consistency_ratio": cr,
                "consistent": cr < CONSISTENCY_THRESHOLD,
                "options": rows,
                "selected": chosen,
            });
            writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
        }
        Cmd::Benchmark { src, model, ticks } => {
            let model = model_for(&cfg, model.as_deref())?;
            let (mut source, _listener) = open_source(&src.source, &cfg.channels, 0.0)?;
            let mut samples = Vec::with_capacity(ticks + cfg.window_len);
            while samples.len() < ticks + cfg.window_len - 1 {
                match source.next_sample()? {
                    Some(s) => samples.push(s.sample),
                    None => break,
                }
            }
            let stats = benchmark_latency(&model, &samples, cfg.window_len, ticks)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&stats)?)?;
        }
        Cmd::Synth { synth_config, out, group, seconds } => {
            let scfg = match synth_config {
                Some(p) => SyntheticConfig::load(p)?,
                None => SyntheticConfig::with_separation(cfg.channels.clone(), 3.0, cli.seed),
            };
            let schedule = match group {
                Some(group) => TrialProtocol { group, ..TrialProtocol::default() }.schedule(),
                None => free_control_schedule(seconds, 5, 10, scfg.seed),
            };
            let samples = synth_stream(&scfg, &schedule)?;
            let mut src = Paced::new(VecSource::new(scfg.channels.clone(), samples), 0.0)?;
            let rec = record_session(&mut src, &out, true, None)?;
            write_session(&out, &rec)?;
            log::info!("wrote {} samples to {}", rec.len(), out.display());
        }
    }
    Ok(())
}
