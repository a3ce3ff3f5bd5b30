use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use focused_feedback::annotation::{self, AnnotationError, SessionStore};
use focused_feedback::aspect::Aspect;
use focused_feedback::backend::BackendError;
use focused_feedback::config::{ConfigError, EmbeddingConfig, RunConfig};
use focused_feedback::dataset::{self, ClassifierHandle, Classifiers, DatasetError, MatchParams};
use focused_feedback::investigator::Corpus;
use focused_feedback::metrics::{
    self, agreement_pairs, aspect_scores, cohen_kappa, dominance, read_judgments, systems_in, tie_rate, Criterion,
    DominanceTable, MetricError, Smoothing, TieHandling,
};
use focused_feedback::orchestrator::{OrchestratorError, Variant};
use focused_feedback::reranker::{
    fit, recall_at_1, select_best, synthetic_corpus, Featurizer, LinearModel, NativeScorer, PlanScorer, RandomScorer,
    RankingQuadruple, RerankError, TrainParams,
};

const AFTER_HELP: &str = "Exit codes: 0 ok, 1 internal, 2 config or usage, 3 input data, 4 backend, \
5 pipeline gave up, 6 budget exceeded, 7 address in use";

#[derive(Parser)]
#[command(name = "ffb", version, about = "Focused feedback on paper paragraphs", after_help = AFTER_HELP)]
struct Cli {
    /// Seed for every randomised step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log level filter, e.g. `info` or `focused_feedback=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one focused review for a paragraph.
    Review(ReviewArgs),
    /// Train, apply and evaluate the plan re-ranker.
    #[command(subcommand)]
    Rerank(RerankCmd),
    /// Build paragraph/review datapoints.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Automatic metrics and human-judgment aggregates.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Blind pairwise annotation service.
    #[command(subcommand)]
    Annotate(AnnotateCmd),
}

#[derive(Args)]
struct ReviewArgs {
    /// File holding the paragraph.
    paragraph: PathBuf,
    /// Directory with the paper (manifest.json plus text files).
    paper: PathBuf,
    #[arg(long)]
    config: PathBuf,
    /// Write the run result JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// swif2t, no-rerank, gpt4 or cove.
    #[arg(long)]
    baseline: Option<Variant>,
}

#[derive(Subcommand)]
enum RerankCmd {
    /// Train a linear re-ranker on quadruples.
    Train {
        /// Quadruple JSONL. Omit to use the synthetic corpus.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Size of the synthetic training corpus.
        #[arg(long, default_value_t = 200)]
        synthetic: usize,
        /// Held-out synthetic quadruples scored after training.
        #[arg(long, default_value_t = 50)]
        test: usize,
        /// Training parameters as TOML.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score candidate plans for a paragraph.
    Score {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        paragraph: PathBuf,
        /// One file per candidate plan.
        #[arg(long, num_args = 1.., required = true)]
        plans: Vec<PathBuf>,
    },
    /// Report recall@1 against the majority baseline.
    Eval {
        /// Trained model; omitted means untrained.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Random scores instead of a model.
        #[arg(long, conflicts_with = "model")]
        random: bool,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        synthetic: usize,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Compile datapoints from papers and review sentences.
    Compile {
        #[arg(long)]
        papers: PathBuf,
        #[arg(long)]
        reviews: PathBuf,
        /// `rule` or the URL of a purpose classifier.
        #[arg(long, default_value = "rule")]
        classifier: String,
        /// `rule` or the URL of an aspect classifier.
        #[arg(long, default_value = "rule")]
        aspect_classifier: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    /// METEOR, BLEU@4, ROUGE-L and aspect scores per system.
    Metrics {
        /// JSONL of {system, generated, reference, predicted_aspect?, gold_aspect?}.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        no_smoothing: bool,
        #[arg(long)]
        json: bool,
    },
    /// Dominance tables and tie rates.
    Dominance {
        /// Judgment JSONL as exported by the annotation service.
        #[arg(long, required_unless_present = "cells")]
        judgments: Option<PathBuf>,
        /// Pre-aggregated table JSON {systems, cells}.
        #[arg(long, conflicts_with = "judgments")]
        cells: Option<PathBuf>,
        /// Column order; defaults to first appearance.
        #[arg(long, value_delimiter = ',')]
        systems: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Cohen's kappa over doubly judged items.
    Kappa {
        #[arg(long)]
        judgments: PathBuf,
        /// How ties are handled in the second figure.
        #[arg(long, default_value = "drop-either")]
        ties: String,
    },
}

#[derive(Subcommand)]
enum AnnotateCmd {
    /// Serve sessions over HTTP.
    Serve {
        #[arg(long = "session-file", required = true, num_args = 1..)]
        session_files: Vec<PathBuf>,
        /// Journal directory; one `<session>.jsonl` per session.
        #[arg(long, default_value = "journal")]
        journal_dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Static UI bundle.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Write a synthetic session definition.
    Demo {
        #[arg(long, default_value = "demo")]
        session_id: String,
        #[arg(long, default_value_t = 2)]
        examples: usize,
        #[arg(long, value_delimiter = ',', default_value = "swif2t,gpt4")]
        systems: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "annotator")]
        annotators: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        double_fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn backend_code(e: &BackendError) -> u8 {
    match e {
        BackendError::BudgetExceeded(_) => 6,
        BackendError::Config(_) => 2,
        _ => 4,
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) | CliError::Metric(_) => 3,
            CliError::Orchestrator(e) => match e {
                OrchestratorError::Backend(b) | OrchestratorError::Rerank(RerankError::Backend(b)) => backend_code(b),
                OrchestratorError::Investigator(_) | OrchestratorError::EmptyParagraph => 3,
                OrchestratorError::Prompt(_) => 2,
                _ => 5,
            },
            CliError::Rerank(RerankError::Backend(b)) => backend_code(b),
            CliError::Rerank(RerankError::External(_)) => 4,
            CliError::Rerank(_) => 3,
            CliError::Dataset(DatasetError::ExternalClassifierUnavailable(_)) => 4,
            CliError::Dataset(_) => 3,
            CliError::Annotation(AnnotationError::Io { .. }) | CliError::Io(_) => 1,
            CliError::Annotation(_) => 3,
        }
    }
}

fn input_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(input_err(path))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(CliError::Io),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn review(args: ReviewArgs, seed: Option<u64>) -> Result<(), CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let (Some(s), EmbeddingConfig::Hash { seed, .. }) = (seed, &mut config.embedding) {
        *seed = Some(s);
    }
    if let Some(v) = args.baseline {
        config.orchestrator.variant = v;
    }
    let pipeline = config.build_pipeline()?;
    let paragraph = read(&args.paragraph)?;
    let paper = Corpus::load_dir(&args.paper).map_err(|e| CliError::Input(format!("{}: {e}", args.paper.display())))?;
    match pipeline.run_review(paragraph.trim(), &paper) {
        Ok(result) => {
            let json = result.to_json();
            match &args.out {
                Some(p) => {
                    std::fs::write(p, format!("{json}\n"))?;
                    println!("[{}] {}\n\nQuote: {}", result.review.label, result.review.review_text, result.review.quoted_substring);
                }
                None => println!("{json}"),
            }
            Ok(())
        }
        Err(e) => {
            let trace = pipeline.llm.trace().to_jsonl(0);
            match &args.out {
                Some(p) => {
                    let path = p.with_extension("trace.jsonl");
                    std::fs::write(&path, trace)?;
                    eprintln!("trace written to {}", path.display());
                }
                None => eprint!("{trace}"),
            }
            Err(e.into())
        }
    }
}

fn quads(data: Option<&Path>, synthetic: usize, seed: u64) -> Result<Vec<RankingQuadruple>, CliError> {
    match data {
        Some(p) => Ok(RankingQuadruple::read_jsonl(p)?),
        None => Ok(synthetic_corpus(synthetic, seed)),
    }
}

fn rerank(cmd: RerankCmd, seed: u64) -> Result<(), CliError> {
    let featurizer = Featurizer::default();
    match cmd {
        RerankCmd::Train { data, synthetic, test, params, out } => {
            let mut params: TrainParams = match params {
                Some(p) => toml::from_str(&read(&p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
                None => TrainParams::default(),
            };
            params.seed = seed;
            let (corpus, held_out) = match data {
                Some(p) => (RankingQuadruple::read_jsonl(&p)?, Vec::new()),
                None => {
                    let mut all = synthetic_corpus(synthetic + test, seed);
                    let held_out = all.split_off(synthetic);
                    (all, held_out)
                }
            };
            let (model, report) = fit(&featurizer, &corpus, &params)?;
            model.save(&out)?;
            for e in &report.epochs {
                eprintln!("epoch {:>2}  loss {:.6}  validation recall@1 {:.4}", e.epoch, e.train_loss, e.validation_recall);
            }
            println!("model written to {} (best epoch {})", out.display(), report.best_epoch);
            if !held_out.is_empty() {
                let r = recall_at_1(&NativeScorer { model, featurizer }, &held_out)?;
                println!("held-out recall@1 {r:.4} over {} quadruples (majority baseline 0.2500)", held_out.len());
            }
        }
        RerankCmd::Score { model, paragraph, plans } => {
            let model = match model {
                Some(p) => LinearModel::load(&p)?,
                None => LinearModel::zeros(),
            };
            let paragraph = read(&paragraph)?;
            let texts = plans.iter().map(|p| read(p)).collect::<Result<Vec<_>, _>>()?;
            let (selected, scores) = select_best(&NativeScorer { model, featurizer }, paragraph.trim(), &texts)?;
            println!("{}", serde_json::json!({ "scores": scores, "selected": selected }));
        }
        RerankCmd::Eval { model, random, data, synthetic } => {
            let corpus = quads(data.as_deref(), synthetic, seed)?;
            let scorer: Box<dyn PlanScorer> = if random {
                Box::new(RandomScorer { seed })
            } else {
                let model = model.map(|p| LinearModel::load(&p)).transpose()?.unwrap_or_else(LinearModel::zeros);
                Box::new(NativeScorer { model, featurizer })
            };
            let r = recall_at_1(scorer.as_ref(), &corpus)?;
            println!("recall@1 {r:.4} over {} quadruples", corpus.len());
            println!("majority baseline 0.2500");
        }
    }
    Ok(())
}

fn handle(spec: &str) -> Result<ClassifierHandle, CliError> {
    if spec == "rule" {
        Ok(ClassifierHandle::RuleBased)
    } else {
        Ok(ClassifierHandle::external(spec)?)
    }
}

fn dataset_compile(papers: &Path, reviews: &Path, purpose: &str, aspect: &str, out: Option<&Path>) -> Result<(), CliError> {
    let papers = dataset::load_papers(papers)?;
    let reviews = dataset::load_reviews(reviews)?;
    let classifiers = Classifiers { purpose: handle(purpose)?, aspect: handle(aspect)? };
    let (points, report) = dataset::compile(&papers, &reviews, &classifiers, &MatchParams::default())?;
    let mut buf = Vec::new();
    dataset::write_datapoints(&mut buf, &points)?;
    emit(out, &String::from_utf8(buf).expect("JSON is UTF-8"))?;
    eprint!("{}", report.render());
    Ok(())
}

#[derive(Deserialize)]
struct PredictionRow {
    system: String,
    generated: String,
    reference: String,
    #[serde(default)]
    predicted_aspect: Option<Aspect>,
    #[serde(default)]
    gold_aspect: Option<Aspect>,
}

fn eval_metrics(path: &Path, smoothing: Smoothing, json: bool) -> Result<(), CliError> {
    let text = read(path)?;
    let mut by_system: BTreeMap<String, Vec<PredictionRow>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: PredictionRow =
            serde_json::from_str(line).map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        by_system.entry(row.system.clone()).or_default().push(row);
    }
    let mut report = serde_json::Map::new();
    if !json {
        println!("{:<16} {:>8} {:>8} {:>8}", "system", "METEOR", "BLEU@4", "ROUGE-L");
    }
    for (system, rows) in &by_system {
        let scores = metrics::text_scores(rows.iter().map(|r| (r.generated.as_str(), r.reference.as_str())), smoothing)?;
        let labelled: Vec<(Aspect, Aspect)> =
            rows.iter().filter_map(|r| Some((r.predicted_aspect?, r.gold_aspect?))).collect();
        let aspects = if labelled.is_empty() {
            None
        } else {
            let (p, g): (Vec<_>, Vec<_>) = labelled.into_iter().unzip();
            Some(aspect_scores(&p, &g)?)
        };
        if json {
            report.insert(system.clone(), serde_json::json!({ "text": scores, "aspects": aspects }));
            continue;
        }
        println!("{system:<16} {:>8.2} {:>8.2} {:>8.2}", 100.0 * scores.meteor, 100.0 * scores.bleu4, 100.0 * scores.rouge_l);
        if let Some(a) = aspects {
            let f1s: Vec<String> = a
                .per_aspect
                .iter()
                .map(|(k, v)| format!("{k} {:.2}{}", 100.0 * v.f1, if v.undefined { "*" } else { "" }))
                .collect();
            println!("{:<16} accuracy {:.2}; F1 {}", "", 100.0 * a.accuracy, f1s.join(", "));
        }
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
    }
    Ok(())
}

#[derive(Deserialize)]
struct CellsFile {
    systems: Vec<String>,
    cells: Vec<Vec<f64>>,
    #[serde(default)]
    title: Option<String>,
}

fn eval_dominance(judgments: Option<PathBuf>, cells: Option<PathBuf>, systems: Vec<String>, json: bool) -> Result<(), CliError> {
    if let Some(p) = cells {
        let file: CellsFile = serde_json::from_str(&read(&p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        let table = DominanceTable::from_cells(file.systems, file.cells)?;
        if json {
            println!("{}", serde_json::to_string_pretty(&table).expect("table serialises"));
        } else {
            print!("{}", table.render(file.title.as_deref().unwrap_or("Dominance")));
        }
        return Ok(());
    }
    let p = judgments.expect("clap requires judgments or cells");
    let js = read_judgments(&read(&p)?)?;
    let systems = if systems.is_empty() { systems_in(&js) } else { systems };
    let mut tables = Vec::new();
    for c in Criterion::ALL {
        let t = dominance(&js, c, &systems)?;
        let ties = tie_rate(&js, c);
        if !json {
            print!("{}", t.render(c.title()));
            match ties {
                Some(r) => println!("Tie % {r:.2}\n"),
                None => println!("Tie % n/a\n"),
            }
        }
        tables.push(serde_json::json!({ "criterion": c, "table": t, "tie_percent": ties }));
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&tables).expect("tables serialise"));
    }
    Ok(())
}

fn eval_kappa(path: &Path, ties: &str) -> Result<(), CliError> {
    let mode: TieHandling =
        serde_json::from_value(serde_json::Value::String(ties.into())).map_err(|_| CliError::Input(format!("unknown tie mode `{ties}`")))?;
    let js = read_judgments(&read(path)?)?;
    let (a, b) = agreement_pairs(&js);
    println!("items {}", a.len());
    println!("kappa with ties {:.4}", cohen_kappa(&a, &b, TieHandling::Include)?);
    if mode != TieHandling::Include {
        println!("kappa {ties} {:.4}", cohen_kappa(&a, &b, mode)?);
    }
    Ok(())
}

fn annotate(cmd: AnnotateCmd, seed: u64) -> Result<(), CliError> {
    match cmd {
        AnnotateCmd::Serve { session_files, journal_dir, port, host, static_dir } => {
            std::fs::create_dir_all(&journal_dir)?;
            let mut sessions = HashMap::new();
            for f in &session_files {
                let session = annotation::load_session(f)?;
                let journal = journal_dir.join(format!("{}.jsonl", session.session_id));
                let store = SessionStore::open(session, &journal)?;
                eprintln!("session {} with {} tasks, journal {}", store.session.session_id, store.session.tasks.len(), journal.display());
                sessions.insert(store.session.session_id.clone(), Arc::new(store));
            }
            let app = annotation::router(Arc::new(sessions), static_dir);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port)).await?;
                eprintln!("listening on http://{}", listener.local_addr()?);
                annotation::serve(listener, app).await
            })?;
        }
        AnnotateCmd::Demo { session_id, examples, systems, annotators, double_fraction, out } => {
            let systems: Vec<&str> = systems.iter().map(|s| s.as_str()).collect();
            let annotators: Vec<&str> = annotators.iter().map(|s| s.as_str()).collect();
            let spec = annotation::demo_spec(&session_id, examples, &systems, &annotators, double_fraction, seed);
            annotation::EvaluationSession::create(spec.clone())?;
            emit(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&spec).expect("spec serialises")))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Review(args) => review(args, cli.seed),
        Command::Rerank(cmd) => rerank(cmd, seed),
        Command::Dataset(DatasetCmd::Compile { papers, reviews, classifier, aspect_classifier, out }) => {
            dataset_compile(&papers, &reviews, &classifier, &aspect_classifier, out.as_deref())
        }
        Command::Eval(EvalCmd::Metrics { predictions, no_smoothing, json }) => {
            eval_metrics(&predictions, if no_smoothing { Smoothing::None } else { Smoothing::default() }, json)
        }
        Command::Eval(EvalCmd::Dominance { judgments, cells, systems, json }) => eval_dominance(judgments, cells, systems, json),
        Command::Eval(EvalCmd::Kappa { judgments, ties }) => eval_kappa(&judgments, &ties),
        Command::Annotate(cmd) => annotate(cmd, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_new(&cli.log).unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Io(io) = &e {
                if io.kind() == std::io::ErrorKind::AddrInUse {
                    return ExitCode::from(7);
                }
            }
            ExitCode::from(e.code())
        }
    }
}
