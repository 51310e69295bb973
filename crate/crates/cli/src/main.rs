mod config;
mod manifest;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use derivgen::checkpoint::{self, Metadata};
use derivgen::data::{
    dampen_contexts, dataset_stats, extract_contexts, load_embeddings, load_inflections, load_lemma_pairs,
    read_corpus, read_instances, split_dataset, stems, write_instances, EmbeddingSource, EmbeddingTable,
    Instance, Split,
};
use derivgen::eval::{evaluate, nonsense_probe, NeuralPredictor};
use derivgen::model::Model;
use derivgen::ngram::KnBaseline;
use derivgen::synth::{generate, nonsense_stems, SynthConfig};
use derivgen::train::train;

use config::RunConfig;
use manifest::Manifest;

#[derive(Parser)]
#[command(name = "derivgen", version, about = "Context-sensitive derivational morphology generation")]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. `--set hidden=32`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract, dampen and split instances from lemma pairs and a corpus.
    BuildData {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        inflections: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a synthetic cue-word dataset, split like `build-data`.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 40)]
        stems: usize,
        #[arg(long, default_value_t = 3)]
        contexts: usize,
    },
    /// Train the neural model and write a checkpoint.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the Kneser–Ney rescoring baseline and evaluate it.
    Baseline {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also export the language model in ARPA format.
        #[arg(long)]
        arpa: Option<PathBuf>,
    },
    /// Print one derived form per input instance.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact-match evaluation report.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Training instances, for the lexicon overlap audit.
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Substitute nonsense stems into template contexts.
    Probe {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        /// One stem per line; otherwise `--random` stems are generated.
        #[arg(long)]
        stems: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        random: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Marks errors caused by invalid configuration or arguments.
#[derive(Debug)]
struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| UsageError(e).into())
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_env(std::env::vars())?;
    cfg.apply_overrides(&cli.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn words_of<'a>(sets: impl IntoIterator<Item = &'a [Instance]>) -> HashSet<String> {
    sets.into_iter()
        .flatten()
        .flat_map(|i| i.left.iter().chain(&i.right))
        .cloned()
        .collect()
}

fn embeddings(source: &EmbeddingSource, dim: usize, data: &[&[Instance]]) -> Result<EmbeddingTable> {
    Ok(match source {
        EmbeddingSource::Hashed { seed } => EmbeddingTable::hashed(dim, *seed),
        EmbeddingSource::File { path } => {
            let vocab = words_of(data.iter().copied());
            load_embeddings(Path::new(path), Some(&vocab), Some(dim))?
        }
    })
}

fn source_of(cfg: &RunConfig) -> EmbeddingSource {
    if cfg.embeddings == "hashed" {
        EmbeddingSource::Hashed {
            seed: cfg.embedding_seed,
        }
    } else {
        EmbeddingSource::File {
            path: cfg.embeddings.clone(),
        }
    }
}

fn load_model(path: &Path, data: &[&[Instance]]) -> Result<(Model, EmbeddingTable, Metadata)> {
    let (model, meta) = checkpoint::load(path)?;
    let (Some(source), Some(dim)) = (&meta.embedding, meta.embedding_dim) else {
        bail!("checkpoint {} does not record its word vectors", path.display());
    };
    let emb = embeddings(source, dim, data)?;
    Ok((model, emb, meta))
}

fn write_split(dir: &Path, split: &Split, m: &mut Manifest) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        let path = dir.join(format!("{name}.tsv"));
        write_instances(&path, part)?;
        m.output(&path);
    }
    log::info!(
        "wrote {} train / {} dev / {} test instances to {}",
        split.train.len(),
        split.dev.len(),
        split.test.len(),
        dir.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = usage(resolve_config(&cli))?;
    match &cli.command {
        Command::BuildData {
            pairs,
            inflections,
            corpus,
            out_dir,
        } => {
            let mut m = Manifest::new("build-data", &cfg);
            for p in [pairs, inflections, corpus] {
                m.input(p)?;
            }
            let pair_list = load_lemma_pairs(pairs)?;
            let table = load_inflections(inflections)?;
            let sentences = read_corpus(corpus)?;
            let raw = extract_contexts(&sentences, &pair_list, &table);
            let kept = dampen_contexts(&raw, cfg.alpha, cfg.seed);
            log::info!("{} raw contexts, {} after dampening", raw.len(), kept.len());
            let split = split_dataset(&kept, cfg.lexicon, cfg.ratios(), cfg.seed)?;
            write_split(out_dir, &split, &mut m)?;
            let stats_path = out_dir.join("stats.json");
            let stats = dataset_stats(&pair_list, &kept);
            std::fs::write(&stats_path, serde_json::to_string_pretty(&stats)? + "\n")?;
            println!(
                "lemma pairs: {}\nsuffix types: {}\ninstances: {}",
                stats.lemma_pairs, stats.suffix_types, stats.instances
            );
            m.output(&stats_path);
            m.write_next_to(&out_dir.join("build-data"))?;
        }
        Command::Synth {
            out_dir,
            stems,
            contexts,
        } => {
            let mut m = Manifest::new("synth", &cfg);
            let data = generate(&SynthConfig {
                stems: *stems,
                contexts_per_pair: *contexts,
                seed: cfg.seed,
                ..SynthConfig::default()
            });
            let split = split_dataset(&data, cfg.lexicon, cfg.ratios(), cfg.seed)?;
            write_split(out_dir, &split, &mut m)?;
            m.write_next_to(&out_dir.join("synth"))?;
        }
        Command::Train { train: tr, dev, out } => {
            let mut m = Manifest::new("train", &cfg);
            m.input(tr)?;
            let train_set = read_instances(tr)?;
            let dev_set = match dev {
                Some(d) => {
                    m.input(d)?;
                    read_instances(d)?
                }
                None => Vec::new(),
            };
            let source = source_of(&cfg);
            if let EmbeddingSource::File { path } = &source {
                m.input(Path::new(path))?;
            }
            let emb = embeddings(&source, cfg.word_dim, &[&train_set, &dev_set])?;
            let mut model = Model::for_instances(cfg.model()?, &train_set, cfg.seed)?;
            log::info!(
                "training {} ({} parameters) on {} instances",
                cfg.variant,
                model.params().num_scalars(),
                train_set.len()
            );
            let mut log_path = out.as_os_str().to_owned();
            log_path.push(".log.jsonl");
            let log_path = PathBuf::from(log_path);
            let mut log = BufWriter::new(
                File::create(&log_path).with_context(|| format!("cannot create {}", log_path.display()))?,
            );
            let mut log_err = None;
            let outcome = train(&mut model, &emb, &train_set, &dev_set, &cfg.training(), |s| {
                if let Err(e) = serde_json::to_writer(&mut log, s).map_err(anyhow::Error::from).and_then(|_| {
                    writeln!(log).map_err(Into::into)
                }) {
                    log_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = log_err {
                return Err(e.context("writing training log"));
            }
            log.flush()?;
            let meta = Metadata {
                epoch: Some(outcome.best_epoch),
                dev_accuracy: outcome.best_dev_accuracy,
                embedding: Some(source),
                embedding_dim: Some(cfg.word_dim),
                run: serde_json::to_value(&cfg)?,
            };
            checkpoint::save(out, &model, &meta)?;
            println!(
                "trained {} epochs; kept epoch {} (dev accuracy {})",
                outcome.epochs_run,
                outcome.best_epoch,
                outcome
                    .best_dev_accuracy
                    .map_or("n/a".to_string(), |a| format!("{a:.4}"))
            );
            m.output(out);
            m.output(&log_path);
            m.write_next_to(out)?;
        }
        Command::Baseline {
            train: tr,
            test,
            out,
            arpa,
        } => {
            let mut m = Manifest::new("baseline", &cfg);
            m.input(tr)?;
            m.input(test)?;
            let train_set = read_instances(tr)?;
            let test_set = read_instances(test)?;
            let baseline = KnBaseline::train(&train_set, cfg.kn())?;
            if let Some(a) = arpa {
                std::fs::write(a, baseline.lm.to_arpa()).with_context(|| format!("cannot write {}", a.display()))?;
                m.output(a);
            }
            let report = match evaluate(&baseline, &test_set, cfg.lexicon, &stems(&train_set)) {
                Err(e @ (derivgen::Error::Unsupported(_) | derivgen::Error::Config(_))) => {
                    return usage(Err(e.into()));
                }
                r => r?,
            };
            report.write(out)?;
            println!("accuracy {:.4} ({}/{})", report.accuracy, report.correct, test_set.len());
            m.output(out);
            m.write_next_to(out)?;
        }
        Command::Predict { model, input, out } => {
            let instances = read_instances(input)?;
            let (model, emb, _) = load_model(model, &[&instances])?;
            let mut sink: Box<dyn Write> = match out {
                Some(p) => Box::new(BufWriter::new(
                    File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
                )),
                None => Box::new(std::io::stdout().lock()),
            };
            for inst in &instances {
                let p = model.predict(inst, &emb)?;
                if p.truncated {
                    log::warn!("generation for `{}` hit the length limit", inst.base);
                }
                writeln!(sink, "{}\t{}", inst.base, p.form)?;
            }
            sink.flush()?;
        }
        Command::Evaluate {
            model,
            test,
            train: tr,
            out,
        } => {
            let mut m = Manifest::new("evaluate", &cfg);
            for p in [model, test, tr] {
                m.input(p)?;
            }
            let test_set = read_instances(test)?;
            let train_set = read_instances(tr)?;
            let (net, emb, _) = load_model(model, &[&test_set])?;
            let predictor = NeuralPredictor {
                model: &net,
                embeddings: &emb,
            };
            let report = match evaluate(&predictor, &test_set, cfg.lexicon, &stems(&train_set)) {
                Err(e @ derivgen::Error::Config(_)) => return usage(Err(e.into())),
                r => r?,
            };
            report.write(out)?;
            println!("accuracy {:.4} ({}/{})", report.accuracy, report.correct, test_set.len());
            for (s, r) in &report.per_suffix_recall {
                println!("  {s:<12} {r:.3}");
            }
            m.output(out);
            m.write_next_to(out)?;
        }
        Command::Probe {
            model,
            templates,
            stems: stem_file,
            random,
            out,
        } => {
            let mut m = Manifest::new("probe", &cfg);
            m.input(model)?;
            m.input(templates)?;
            let temps = read_instances(templates)?;
            let stem_list: Vec<String> = match stem_file {
                Some(p) => {
                    m.input(p)?;
                    std::fs::read_to_string(p)
                        .with_context(|| format!("cannot read {}", p.display()))?
                        .lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(str::to_owned)
                        .collect()
                }
                None => nonsense_stems(*random, cfg.seed),
            };
            let (net, emb, _) = load_model(model, &[&temps])?;
            let rows = nonsense_probe(&net, &emb, &temps, &stem_list)?;
            let mut w = BufWriter::new(File::create(out).with_context(|| format!("cannot create {}", out.display()))?);
            for row in &rows {
                serde_json::to_writer(&mut w, row)?;
                writeln!(w)?;
            }
            w.flush()?;
            let truncated = rows
                .iter()
                .flat_map(|r| &r.outputs)
                .filter(|o| o.truncated)
                .count();
            println!(
                "{} contexts × {} stems, {truncated} truncated generations",
                rows.len(),
                stem_list.len()
            );
            m.output(out);
            m.write_next_to(out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
