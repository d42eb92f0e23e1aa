use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use prediag::config::Config;
use prediag::model::{self, ClassScheme, Snapshot, TrainOptions};
use prediag::{container, corpus, manifest, rules, scripts, service, store};
use prediag_core::classifier::{canonical_manifest, HeadKind, Magnification};
use prediag_core::KnowledgeGraph;

#[derive(Parser)]
#[command(
    name = "prediag",
    version,
    about = "Pre-diagnosis chatbot and pathology classifier"
)]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for shuffling, initialisation and response choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn statement/response pairs from a directory of *.txt conversations.
    TrainChat {
        #[arg(long)]
        corpus_dir: PathBuf,
        /// Store file; the configured store by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one classifier head on precomputed features.
    TrainClassifier {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of *.feat containers.
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "EfficientNetV2-SA")]
        head: HeadKind,
        #[arg(long, default_value = "40")]
        magnification: Magnification,
        /// 2 for benign/malignant, 8 for subtypes.
        #[arg(long, default_value_t = 2)]
        classes: usize,
        /// Output directory; the configured model directory by default.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        model_id: Option<String>,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 10)]
        patience: usize,
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        #[arg(long)]
        conv_width: Option<usize>,
    },
    /// Score a saved model on the records of a manifest.
    EvalClassifier {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Feature directory; the manifest's directory by default.
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Replay scripted dialogues and report the goal completion rate.
    EvalGcr {
        #[arg(long)]
        scripts: PathBuf,
        /// Trained store; ignored when --corpus-dir is given.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Train a fresh store from this corpus instead.
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Write the canonical record manifest (every image of the dataset).
    GenManifest {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic features for every record of a manifest.
    GenFeatures {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Feature map shape H,W,C.
        #[arg(long, value_delimiter = ',', default_value = "1,1,16")]
        shape: Vec<usize>,
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
        #[arg(long, default_value_t = 2)]
        classes: usize,
    },
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut cfg = Config::load_or_default(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::TrainChat { corpus_dir, out } => {
            let out = out.unwrap_or_else(|| cfg.store.clone());
            let graph = train_graph(&cfg, &corpus_dir)?;
            store::save(&graph, &out)?;
            println!("{} statements -> {}", graph.len(), out.display());
        }
        Command::TrainClassifier {
            manifest: manifest_path,
            features,
            head,
            magnification,
            classes,
            out,
            model_id,
            epochs,
            patience,
            lr,
            conv_width,
        } => {
            let m = manifest::read(&manifest_path)?;
            let f = container::read_dir(&features)?;
            let mut opts = TrainOptions::new(head, magnification, cfg.seed);
            opts.scheme = ClassScheme::from_classes(classes)?;
            opts.hyper.max_epochs = epochs;
            opts.hyper.patience = patience;
            opts.hyper.lr = lr;
            opts.conv_width = conv_width;
            let id = model_id.unwrap_or_else(|| opts.default_model_id());
            let out = out.unwrap_or_else(|| cfg.model_dir.clone());
            std::fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            let trained = model::train_classifier(&m, &f, &opts)?;
            let snap = Snapshot::new(&id, Some(magnification), trained.model)?;
            let model_path = out.join(format!("{id}.json"));
            snap.save(&model_path)?;
            let test_path = out.join(format!("{id}.test.csv"));
            manifest::write(&test_path, &trained.test_manifest)?;
            let r = &trained.report;
            eprintln!(
                "stopped at epoch {}, kept epoch {}; model {}, test records {}",
                r.stopped_epoch,
                r.best_epoch,
                model_path.display(),
                test_path.display()
            );
            let acc = r.test_accuracy.expect("set by train_classifier");
            print!(
                "{}",
                model::accuracy_table(&[(head, Some(magnification), acc)])
            );
            if let Some(per) = &r.per_class {
                print!(
                    "{}",
                    model::subtype_table(&[(head, Some(magnification), per)])
                );
            }
        }
        Command::EvalClassifier {
            model: model_path,
            manifest: manifest_path,
            features,
        } => {
            let snap = Snapshot::load(&model_path)?;
            let m = manifest::read(&manifest_path)?;
            let dir = features.unwrap_or_else(|| parent_dir(&manifest_path));
            let f = container::read_dir(&dir)?;
            let e = model::evaluate_classifier(&snap, &m, &f)?;
            eprintln!("{}: {} samples", e.model_id, e.samples);
            print!(
                "{}",
                model::accuracy_table(&[(e.head, e.magnification, e.accuracy)])
            );
            print!(
                "{}",
                model::subtype_table(&[(e.head, e.magnification, &e.per_class)])
            );
        }
        Command::EvalGcr {
            scripts: dir,
            store: store_path,
            corpus_dir,
        } => {
            let graph = match (corpus_dir, store_path) {
                (Some(c), _) => train_graph(&cfg, &c)?,
                (None, Some(s)) => load_graph(&cfg, &s)?,
                (None, None) => load_graph(&cfg, &cfg.store)?,
            };
            let rules = rules::load_rules(cfg.rules.as_deref())?;
            let list = scripts::load_scripts(&dir)?;
            if list.is_empty() {
                bail!("no *.txt scripts in {}", dir.display());
            }
            let report =
                scripts::run_gcr_harness(&list, &graph, &rules, cfg.chat_settings()?, cfg.seed)?;
            println!("{report}");
        }
        Command::Serve { listen } => {
            let listen = listen.unwrap_or_else(|| cfg.listen.clone());
            let graph = load_graph(&cfg, &cfg.store)?;
            let rules = rules::load_rules(cfg.rules.as_deref())?;
            let models = model::load_model_dir(&cfg.model_dir)?;
            eprintln!("{} statements, {} models", graph.len(), models.len());
            let state = service::AppState::new(
                graph,
                rules,
                cfg.chat_settings()?,
                models,
                Duration::from_secs(cfg.session_idle_minutes * 60),
                cfg.seed,
            );
            serve(state, &listen)?;
        }
        Command::GenManifest { out } => {
            let m = canonical_manifest();
            manifest::write(&out, &m)?;
            println!("{} records -> {}", m.len(), out.display());
        }
        Command::GenFeatures {
            manifest: manifest_path,
            out,
            shape,
            separation,
            classes,
        } => {
            let m = manifest::read(&manifest_path)?;
            let scheme = ClassScheme::from_classes(classes)?;
            std::fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            for mag in Magnification::ALL {
                let part = m.at_magnification(mag);
                if part.is_empty() {
                    continue;
                }
                let seed = cfg.seed.wrapping_add(u64::from(mag.factor()));
                let samples = model::synthetic_features(&part, scheme, &shape, separation, seed)?;
                let path = out.join(format!("{}.{}", mag.factor(), container::EXTENSION));
                container::write_file(&path, &samples)?;
                println!("{} samples -> {}", samples.len(), path.display());
            }
        }
    }
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn train_graph(cfg: &Config, dir: &Path) -> anyhow::Result<KnowledgeGraph> {
    let mut graph = KnowledgeGraph::new(rules::load_preprocessor(cfg.stopwords.as_deref())?);
    let files = corpus::corpus_files(dir)?;
    if files.is_empty() {
        bail!("no *.txt conversations in {}", dir.display());
    }
    corpus::train_from_files(&mut graph, &files)?;
    Ok(graph)
}

fn load_graph(cfg: &Config, path: &Path) -> anyhow::Result<KnowledgeGraph> {
    Ok(store::load(
        path,
        rules::load_preprocessor(cfg.stopwords.as_deref())?,
    )?)
}

#[tokio::main]
async fn serve(state: service::AppState, listen: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .with_context(|| format!("bind {listen}"))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, service::router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
