use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sceneact_core::arl::{sidecar_path, History, Pipeline, Stage1Model, TrainConfig};
use sceneact_core::config::{load_config, render_config};
use sceneact_core::experiment::{self, Dataset, Mode, SweepAxis};
use sceneact_core::io::{read_to_string, write_atomic};
use sceneact_core::qa::{write_predictions, FrontEnd, PipelineBundle};
use sceneact_core::tensorize::Vocabulary;
use sceneact_core::worldgen::{read_split, write_dataset, GenConfig, Split};
use sceneact_core::Error;

#[derive(Parser)]
#[command(name = "sceneact", version, about = "Hypothetical action-effect reasoning over synthetic scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate every split plus vocab.json and metadata.json.
    Gen {
        /// Generation config (key = value lines); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the scene-pair encoder and effect decoder.
    TrainStage1 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the text encoder through the frozen stage-1 decoder.
    TrainStage2 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        stage1: PathBuf,
        /// Overrides on top of the stage-1 checkpoint's config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score one split and write a report as JSON and as a table.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        split: String,
        #[arg(long, default_value = "learned")]
        mode: String,
        #[arg(long, required_if_eq("mode", "learned"))]
        stage1: Option<PathBuf>,
        #[arg(long, required_if_eq("mode", "learned"))]
        stage2: Option<PathBuf>,
        /// template-parse or oracle-program.
        #[arg(long, default_value = "template-parse")]
        front_end: String,
        /// Output directory for the report and predictions.
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrain both stages per grid value and write a CSV of held-out accuracy.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        /// vector_length or data_size.
        #[arg(long)]
        axis: String,
        /// Comma-separated grid; the axis default when omitted.
        #[arg(long, value_delimiter = ',')]
        values: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the action vectors of every validation action text as CSV.
    ExportVectors {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        stage1: PathBuf,
        #[arg(long)]
        stage2: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::ModelMismatch(_) | Error::Shape(_) => 4,
        _ => 3,
    }
}

/// Files written so far; removed again if the command fails.
#[derive(Default)]
struct Outputs(Vec<PathBuf>);

impl Outputs {
    fn write(&mut self, path: &Path, bytes: &[u8]) -> sceneact_core::Result<()> {
        self.0.push(path.to_path_buf());
        write_atomic(path, bytes)
    }

    fn track(&mut self, path: PathBuf) {
        self.0.push(path);
    }

    fn discard(self) {
        for p in self.0 {
            let _ = std::fs::remove_file(p);
        }
    }
}

fn load_vocab(data: &Path) -> sceneact_core::Result<Vocabulary> {
    Vocabulary::from_json(&read_to_string(&data.join("vocab.json"))?)
}

fn train_config(path: Option<&Path>, base: TrainConfig) -> sceneact_core::Result<TrainConfig> {
    let cfg = match path {
        Some(p) => load_config(p, &base)?,
        None => base,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn parse_split(name: &str) -> sceneact_core::Result<Split> {
    Split::from_name(name).ok_or_else(|| Error::Config(format!("unknown split `{name}`")))
}

fn load_pipeline(data: &Path, stage1: &Path, stage2: &Path) -> sceneact_core::Result<(Pipeline, Vocabulary)> {
    let vocab = load_vocab(data)?;
    let s1 = Stage1Model::load(stage1, &vocab)?;
    Ok((Pipeline::load(stage2, s1.decoder(), &vocab)?, vocab))
}

fn report_history(stage: &str, history: &History) {
    let val = history.best().and_then(|e| e.val_acc).map_or("n/a".to_string(), |a| format!("{:.1}", 100.0 * a));
    println!("{stage}: {} epochs, kept epoch {}, val scene accuracy {val}", history.epochs.len(), history.best_epoch);
}

fn run(cmd: Command, out: &mut Outputs) -> sceneact_core::Result<()> {
    match cmd {
        Command::Gen { config, out: dir } => {
            let cfg = match config {
                Some(p) => load_config(&p, &GenConfig::default())?,
                None => GenConfig::default(),
            };
            let meta = write_dataset(&cfg, &dir)?;
            for (split, n) in &meta.counts {
                println!("{split}: {n} records");
            }
            println!("uniqueness ratio {:.4}", meta.uniqueness_ratio);
        }
        Command::TrainStage1 { data, config, out: path } => {
            let cfg = train_config(config.as_deref(), TrainConfig::default())?;
            let vocab = load_vocab(&data)?;
            let train = read_split(&data, Split::Train, true)?;
            let val = read_split(&data, Split::Val, true)?;
            let (model, history) = experiment::run_stage1(&train, &val, &cfg)?;
            out.track(path.clone());
            out.track(sidecar_path(&path));
            model.save(&path, &vocab)?;
            report_history("stage 1", &history);
            println!("decoder hash {}", model.decoder().hash());
        }
        Command::TrainStage2 { data, stage1, config, out: path } => {
            let vocab = load_vocab(&data)?;
            let s1 = Stage1Model::load(&stage1, &vocab)?;
            let cfg = train_config(config.as_deref(), s1.config.clone())?;
            if cfg.action_dim != s1.config.action_dim {
                return Err(Error::ModelMismatch("action_dim differs from the stage-1 checkpoint".into()));
            }
            let train = read_split(&data, Split::Train, true)?;
            let val = read_split(&data, Split::Val, true)?;
            let (pipeline, history) = experiment::run_stage2(&train, &val, &s1, &cfg, &vocab)?;
            out.track(path.clone());
            out.track(sidecar_path(&path));
            pipeline.save(&path, &vocab)?;
            report_history("stage 2", &history);
        }
        Command::Eval { data, split, mode, stage1, stage2, front_end, out: dir } => {
            let split = parse_split(&split)?;
            let mode = Mode::from_name(&mode).ok_or_else(|| Error::Config(format!("unknown mode `{mode}`")))?;
            let records = read_split(&data, split, true)?;
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let stem = format!("{}.{}", split.name(), mode.name());
            let report = match mode {
                Mode::Oracle => experiment::evaluate_oracle(split.name(), &records)?,
                Mode::Learned => {
                    let front_end = match front_end.as_str() {
                        "template-parse" => FrontEnd::TemplateParse,
                        "oracle-program" => FrontEnd::OracleProgram,
                        other => return Err(Error::Config(format!("unknown front end `{other}`"))),
                    };
                    let (stage1, stage2) = (stage1.expect("required by clap"), stage2.expect("required by clap"));
                    let (pipeline, vocab) = load_pipeline(&data, &stage1, &stage2)?;
                    let bundle = PipelineBundle::new(pipeline, vocab, front_end)?;
                    let (report, predictions) = experiment::evaluate_learned(split.name(), &records, &bundle)?;
                    let path = dir.join(format!("{stem}.predictions.jsonl"));
                    out.track(path.clone());
                    write_predictions(&path, &predictions)?;
                    report
                }
            };
            let table = report.to_table();
            out.write(&dir.join(format!("{stem}.report.json")), report.to_json().as_bytes())?;
            out.write(&dir.join(format!("{stem}.report.txt")), table.as_bytes())?;
            print!("{table}");
        }
        Command::Sweep { data, axis, values, config, out: path } => {
            let axis = SweepAxis::from_name(&axis).ok_or_else(|| Error::Config(format!("unknown sweep axis `{axis}`")))?;
            let values = if values.is_empty() { axis.default_values() } else { values };
            let cfg = train_config(config.as_deref(), TrainConfig::default())?;
            let vocab = load_vocab(&data)?;
            let dataset = Dataset::load(&data)?;
            let rows = experiment::sweep(axis, &values, &dataset, &cfg, &vocab, &mut |r| {
                eprintln!("{} = {}: scene {:.1} qa {:.1}", axis.name(), r.axis_value, r.scene_acc, r.qa_acc)
            })?;
            out.write(&path, experiment::sweep_csv(&rows).as_bytes())?;
            let mut used = path.clone().into_os_string();
            used.push(".config");
            out.write(Path::new(&used), render_config(&cfg).as_bytes())?;
        }
        Command::ExportVectors { data, stage1, stage2, out: path } => {
            let (pipeline, vocab) = load_pipeline(&data, &stage1, &stage2)?;
            let val = read_split(&data, Split::Val, false)?;
            out.write(&path, experiment::export_vectors(&pipeline, &val, &vocab)?.as_bytes())?;
            println!("{} vectors written to {}", val.len(), path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut outputs = Outputs::default();
    match run(cli.command, &mut outputs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            outputs.discard();
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
