use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use eafd::eval::{
    chronological_split, evaluate, generate_corpus, run_baseline, Baseline as BaselineRun, CorpusSpec, DirectOptions,
    ScriptedClient,
};
use eafd::graph::{from_canonical_text, CaseGraph};
use eafd::ingest::{parse_case_record, read_corpus, write_corpus, CaseRecord};
use eafd::kb::{embed, summarize, CaseSummary, KnowledgeBase, DEFAULT_DIMENSION, DEFAULT_K, DEFAULT_K_PRIME};
use eafd::reasoner::{build_maker_graph, Pipeline};
use eafd::service::{api, Service, SessionStore};
use eafd::validate::validate;

#[derive(Parser)]
#[command(name = "eafd", version, about = "Evidence-Action-Factor-Decision graph adjudication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct KbArg {
    /// Knowledge-base directory (kb-v1). Created when absent.
    #[arg(long, env = "EAFD_KB_DIR")]
    kb: PathBuf,
    /// Embedding dimension for a new knowledge base.
    #[arg(long, default_value_t = DEFAULT_DIMENSION)]
    dimension: usize,
}

impl KbArg {
    fn open(&self) -> Result<KnowledgeBase, String> {
        let dim = (!self.kb.join("manifest").exists()).then_some(self.dimension);
        KnowledgeBase::open(&self.kb, dim).map_err(|e| format!("{}: {e}", self.kb.display()))
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum ReportFormat {
    /// Human-readable lines.
    Text,
    /// Machine-readable `report-v1` JSON.
    #[value(name = "report-v1")]
    ReportV1,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a graph file (eafd-graph-v1); exits 1 on violations.
    Validate {
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
    },
    /// Stream every case record of a corpus directory into the knowledge base.
    Ingest {
        dir: PathBuf,
        #[command(flatten)]
        kb: KbArg,
    },
    /// Extract the graph of one case record and print it in eafd-graph-v1.
    Extract {
        record: PathBuf,
        /// Extract only the Maker lane, as for a query; historical records are
        /// stripped to their query view first.
        #[arg(long)]
        maker_only: bool,
    },
    /// Knowledge-base maintenance and lookup.
    Kb {
        #[command(subcommand)]
        command: KbCommand,
    },
    /// Generate a synthetic labelled corpus.
    Generate {
        /// Corpus spec (JSON); missing fields take their defaults.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write a chronological train/test split into `out/train` and
        /// `out/test` with this train fraction.
        #[arg(long)]
        split: Option<f64>,
    },
    /// Adjudicate held-out cases against a knowledge base and write a
    /// metrics-v1 report.
    Evaluate {
        #[command(flatten)]
        kb: KbArg,
        /// Directory of labelled test records.
        #[arg(long)]
        test: PathBuf,
        /// Output file for the metrics-v1 report; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Per-case predictions as JSON lines.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_K_PRIME)]
        k_prime: usize,
    },
    /// Run a comparison baseline over labelled test records.
    Baseline {
        #[arg(long, value_enum)]
        name: BaselineName,
        #[command(flatten)]
        kb: KbArg,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Precedents consulted (cbr) or shown in the prompt (direct).
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Recorded model replies for `direct`: JSON with `replies` keyed by
        /// case id and an optional `fallback`.
        #[arg(long)]
        replies: Option<PathBuf>,
        /// Allow the direct model to answer rmi.
        #[arg(long)]
        with_rmi: bool,
        /// Add retrieved precedents to the direct prompt.
        #[arg(long)]
        with_retrieval: bool,
    },
    /// Serve the api-v1 HTTP interface and the reviewer console.
    Serve {
        #[command(flatten)]
        kb: KbArg,
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: String,
        /// Built console assets served under /console/.
        #[arg(long)]
        console_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KbCommand {
    /// Index historical case records (files or corpus directories).
    Ingest {
        #[command(flatten)]
        kb: KbArg,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Print kb statistics as JSON.
    Stats {
        #[command(flatten)]
        kb: KbArg,
    },
    /// Top-k precedents for free text or a case record.
    Query {
        #[command(flatten)]
        kb: KbArg,
        #[arg(long, conflicts_with = "case", required_unless_present = "case")]
        text: Option<String>,
        #[arg(long)]
        case: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K_PRIME)]
        k: usize,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum BaselineName {
    Cbr,
    Direct,
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), String> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_records(path: &Path) -> Result<Vec<CaseRecord>, String> {
    if path.is_dir() {
        read_corpus(path).map_err(|e| e.to_string())
    } else {
        Ok(vec![parse_case_record(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?])
    }
}

fn ingest_all(pipeline: &Pipeline, paths: &[PathBuf]) -> Result<(), String> {
    let mut added = 0usize;
    for p in paths {
        for r in read_records(p)? {
            pipeline.ingest(&r).map_err(|e| format!("{}: {e}", r.case_id))?;
            added += 1;
        }
    }
    println!("indexed {added} case(s); knowledge base holds {}", pipeline.kb.len());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Validate { graph, format } => {
            let text = String::from_utf8(read(&graph)?).map_err(|e| e.to_string())?;
            let g: CaseGraph = from_canonical_text(&text).map_err(|e| format!("{}: {e}", graph.display()))?;
            let report = validate(&g);
            match format {
                ReportFormat::Text => print!("{}", report.to_text()),
                ReportFormat::ReportV1 => println!("{}", report.to_report_v1()),
            }
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Ingest { dir, kb } => {
            let pipeline = Pipeline::new(Arc::new(kb.open()?));
            ingest_all(&pipeline, &[dir])?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Extract { record, maker_only } => {
            let r = parse_case_record(&read(&record)?).map_err(|e| e.to_string())?;
            let extractor = eafd::ingest::AnnotationExtractor;
            let g = if maker_only {
                build_maker_graph(&r.to_query(), &extractor).map_err(|e| e.to_string())?
            } else {
                eafd::ingest::extract_graph(&r, &extractor).map_err(|e| e.to_string())?
            };
            print!("{}", eafd::graph::to_canonical_text(&g));
            Ok(ExitCode::SUCCESS)
        }
        Command::Kb { command } => kb_command(command),
        Command::Generate { spec, out, split } => {
            let spec: CorpusSpec = serde_json::from_slice(&read(&spec)?).map_err(|e| format!("{}: {e}", spec.display()))?;
            let corpus = generate_corpus(&spec).map_err(|e| e.to_string())?;
            match split {
                Some(frac) => {
                    if !(0.0..=1.0).contains(&frac) {
                        return Err(format!("--split must lie in [0, 1], got {frac}"));
                    }
                    let (train, test) = chronological_split(&corpus, frac);
                    write_corpus(&out.join("train"), &train).map_err(|e| e.to_string())?;
                    write_corpus(&out.join("test"), &test).map_err(|e| e.to_string())?;
                    println!("wrote {} train and {} test records to {}", train.len(), test.len(), out.display());
                }
                None => {
                    write_corpus(&out, &corpus).map_err(|e| e.to_string())?;
                    println!("wrote {} records to {}", corpus.len(), out.display());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { kb, test, report, predictions, k, k_prime } => {
            let pipeline = Pipeline::new(Arc::new(kb.open()?)).with_k(k, k_prime);
            let records = read_corpus(&test).map_err(|e| e.to_string())?;
            let result = evaluate(&pipeline, &records).map_err(|e| e.to_string())?;
            if let Some(p) = predictions {
                let lines: Vec<String> = result
                    .predictions
                    .iter()
                    .map(|p| eafd::json::to_canonical(p).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?;
                fs::write(&p, lines.join("\n") + "\n").map_err(|e| format!("{}: {e}", p.display()))?;
            }
            write_or_print(report.as_deref(), &result.report.to_text())?;
            eprintln!("accuracy {:.4} over {} cases", result.report.accuracy, result.report.total);
            Ok(ExitCode::SUCCESS)
        }
        Command::Baseline { name, kb, test, report, k, replies, with_rmi, with_retrieval } => {
            let pipeline = Pipeline::new(Arc::new(kb.open()?));
            let records = read_corpus(&test).map_err(|e| e.to_string())?;
            let client = match (&name, replies) {
                (BaselineName::Direct, Some(p)) => {
                    serde_json::from_slice::<ScriptedClient>(&read(&p)?).map_err(|e| format!("{}: {e}", p.display()))?
                }
                (BaselineName::Direct, None) => return Err("--replies is required for the direct baseline".into()),
                (BaselineName::Cbr, _) => ScriptedClient::default(),
            };
            let baseline = match name {
                BaselineName::Cbr => BaselineRun::Cbr { k },
                BaselineName::Direct => BaselineRun::Direct { client: &client, options: DirectOptions { with_rmi, with_retrieval, k } },
            };
            let m = run_baseline(&pipeline, &records, &baseline).map_err(|e| e.to_string())?;
            write_or_print(report.as_deref(), &m.to_text())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { kb, listen, console_dir } => {
            let base = kb.open()?;
            let sessions = SessionStore::open(&kb.kb.join("sessions")).map_err(|e| e.to_string())?;
            let service = Service::new(Pipeline::new(Arc::new(base)), sessions).with_console_dir(console_dir);
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            eprintln!("listening on http://{listen} (console at /console/)");
            rt.block_on(api::serve(Arc::new(service), &listen)).map_err(|e| e.to_string())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn kb_command(command: KbCommand) -> Result<ExitCode, String> {
    match command {
        KbCommand::Ingest { kb, paths } => {
            let pipeline = Pipeline::new(Arc::new(kb.open()?));
            ingest_all(&pipeline, &paths)?;
        }
        KbCommand::Stats { kb } => {
            let stats = kb.open()?.stats();
            println!("{}", eafd::json::to_canonical_pretty(&stats).map_err(|e| e.to_string())?);
        }
        KbCommand::Query { kb, text, case, k } => {
            let pipeline = Pipeline::new(Arc::new(kb.open()?));
            let summary = match (text, case) {
                (Some(text), _) => CaseSummary {
                    case_id: eafd::graph::CaseId::new("query").expect("non-empty"),
                    violation_category: String::new(),
                    core_rationale: text.clone(),
                    rendered: text,
                },
                (None, Some(path)) => {
                    let r = parse_case_record(&read(&path)?).map_err(|e| e.to_string())?;
                    summarize(&r, pipeline.summarizer.as_ref()).map_err(|e| e.to_string())?
                }
                (None, None) => unreachable!("clap requires --text or --case"),
            };
            let v = embed(&summary, pipeline.embedder.as_ref()).map_err(|e| e.to_string())?;
            for s in pipeline.kb.retrieve(&v, k).map_err(|e| e.to_string())? {
                let verdict = s.entry.verdict().map(|v| v.as_str()).unwrap_or("-");
                println!("{:.6}\t{}\t{}\t{}", s.similarity, s.case_id(), verdict, s.entry.summary.rendered);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
