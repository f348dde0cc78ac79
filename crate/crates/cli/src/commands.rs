use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use topic_forge::corpus::{self, Provenance, SentenceRecord};
use topic_forge::eval::{self, EvalReport, PointMetrics};
use topic_forge::keywords::{union_glossaries, Glossary};
use topic_forge::link_index::LinkIndex;
use topic_forge::nb::{self, Feature, FeatureBoosts, NbConfig, NbModel, Ngrams};
use topic_forge::ngd::{self, Relatedness, TraversalConfig};
use topic_forge::session::{SessionConfig, SessionStore};
use topic_forge::Label;

use crate::error::{CliError, CliResult};
use crate::{Command, SampleMode, DATA_DIR_ENV};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::BuildIndex { edges, out, json } => build_index(&edges, &out, json),
        Command::Inlinks { index, title, json } => inlinks(&index, &title, json),
        Command::Ngd { index, a, b, json } => ngd_cmd(&index, &a, &b, json),
        Command::Traverse {
            index,
            seed,
            threshold,
            iters,
            out,
            json,
        } => traverse(&index, &seed, threshold, iters, out.as_deref(), json),
        Command::Sample {
            mode,
            input,
            n,
            seed,
            pred,
            model,
            out,
        } => sample(mode, &input, n, seed, pred.as_deref(), model.as_deref(), out.as_deref()),
        Command::Consensus { input, out } => consensus(&input, out.as_deref()),
        Command::ClassifyKeywords {
            glossary,
            union,
            input,
            out,
        } => classify_keywords(&glossary, union, &input, out.as_deref()),
        Command::TrainNb {
            labeled,
            features,
            unlabeled,
            em,
            alpha,
            boost,
            unigrams,
            out,
        } => {
            let config = NbConfig {
                alpha,
                feature_boost: boost,
                ngrams: if unigrams { Ngrams::Unigrams } else { Ngrams::UnigramsAndBigrams },
                em_pass: em,
            };
            train_nb(&labeled, features.as_deref(), unlabeled.as_deref(), config, &out)
        }
        Command::AlServe {
            corpus,
            evaluation,
            port,
            host,
            data_dir,
            session_id,
            seed,
            defer_retrain,
        } => al_serve(AlServeArgs {
            corpus,
            evaluation,
            port,
            host,
            data_dir,
            session_id,
            seed,
            defer_retrain,
        }),
        Command::Evaluate {
            pred,
            gold,
            bootstrap,
            seed,
            name,
            json,
        } => evaluate(&pred, &gold, bootstrap, seed, &name, json),
        Command::Kappa { ratings, json } => kappa(&ratings, json),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

/// Writes to `path`, or stdout when absent.
fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::io(p, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(p, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(CliError::data)?;
    with_output(None, |w| writeln!(w, "{text}"))
}

fn read_records(path: &Path) -> CliResult<Vec<SentenceRecord>> {
    corpus::read_records(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_records(path: Option<&Path>, records: &[SentenceRecord]) -> CliResult<()> {
    with_output(path, |w| corpus::write_records(w, records))
}

fn load_index(path: &Path) -> CliResult<LinkIndex> {
    LinkIndex::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn build_index(edges: &Path, out: &Path, json: bool) -> CliResult<()> {
    let index = LinkIndex::from_tsv(open(edges)?).map_err(|e| CliError::Data(format!("{}: {e}", edges.display())))?;
    index.save(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    if json {
        print_json(&serde_json::json!({
            "index": out,
            "articles": index.total_articles(),
            "edges": index.edge_count(),
        }))
    } else {
        println!("{} articles, {} edges -> {}", index.total_articles(), index.edge_count(), out.display());
        Ok(())
    }
}

fn inlinks(index: &Path, title: &str, json: bool) -> CliResult<()> {
    let index = load_index(index)?;
    if index.id(title).is_none() {
        return Err(CliError::Data(format!("unknown title {title:?}")));
    }
    let links = index.inlinks(title);
    if json {
        return print_json(&links);
    }
    with_output(None, |w| links.iter().try_for_each(|t| writeln!(w, "{t}")))
}

fn ngd_cmd(index: &Path, a: &str, b: &str, json: bool) -> CliResult<()> {
    let index = load_index(index)?;
    let r = ngd::ngd(&index, a, b).map_err(CliError::data)?;
    if json {
        return print_json(&serde_json::json!({ "a": a, "b": b, "ngd": r.distance(), "related": !r.is_unrelated() }));
    }
    match r {
        Relatedness::Distance(d) => println!("{d:.6}"),
        Relatedness::Unrelated => println!("unrelated"),
    }
    Ok(())
}

fn traverse(index: &Path, seed: &str, threshold: f64, iters: u32, out: Option<&Path>, json: bool) -> CliResult<()> {
    let config = TraversalConfig {
        threshold,
        max_iterations: iters,
    };
    if !(threshold > 0.0 && threshold.is_finite()) || iters == 0 {
        return Err(CliError::Usage("--threshold must be positive and --iters at least 1".into()));
    }
    let index = load_index(index)?;
    let result = ngd::traverse(&index, seed, &config).map_err(CliError::data)?;
    let ranked = ngd::rank_candidates(&result);
    eprintln!("seed {seed:?}, threshold {threshold}, iterations {iters}: {} articles", ranked.len());
    if json {
        let text = serde_json::to_string_pretty(&ranked).map_err(CliError::data)?;
        return with_output(out, |w| writeln!(w, "{text}"));
    }
    with_output(out, |w| ngd::write_ranked_tsv(w, &ranked))
}

fn sample(
    mode: SampleMode,
    input: &Path,
    n: usize,
    seed: u64,
    pred: Option<&Path>,
    model: Option<&Path>,
    out: Option<&Path>,
) -> CliResult<()> {
    let records = read_records(input)?;
    let picked = match mode {
        SampleMode::Balanced => {
            if pred.is_some() || model.is_some() {
                return Err(CliError::Usage("--pred and --model apply to --mode by-prediction".into()));
            }
            corpus::sample_balanced(&records, n, seed).map_err(CliError::data)?
        }
        SampleMode::ByPrediction => {
            let predictions = match (pred, model) {
                (Some(p), None) => predictions_by_id(&records, p)?,
                (None, Some(m)) => {
                    let model = load_model(m)?;
                    records.iter().map(|r| model.predict(&r.text)).collect()
                }
                _ => return Err(CliError::Usage("--mode by-prediction needs exactly one of --pred or --model".into())),
            };
            corpus::prediction_based_sample(&records, &predictions, n, seed).map_err(CliError::data)?
        }
    };
    eprintln!("sampled {} records, {n} per class, seed {seed}", picked.len());
    write_records(out, &picked)
}

fn predictions_by_id(records: &[SentenceRecord], pred: &Path) -> CliResult<Vec<Label>> {
    let preds: HashMap<String, Label> = read_records(pred)?
        .into_iter()
        .map(|r| {
            r.label
                .map(|l| (r.id.clone(), l))
                .ok_or_else(|| CliError::Data(format!("{}: record {:?} has no label", pred.display(), r.id)))
        })
        .collect::<CliResult<_>>()?;
    records
        .iter()
        .map(|r| {
            preds
                .get(&r.id)
                .copied()
                .ok_or_else(|| CliError::Data(format!("{}: no prediction for record {:?}", pred.display(), r.id)))
        })
        .collect()
}

fn load_model(path: &Path) -> CliResult<NbModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    NbModel::from_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn consensus(input: &Path, out: Option<&Path>) -> CliResult<()> {
    let records = corpus::apply_consensus(read_records(input)?);
    write_records(out, &records)
}

fn classify_keywords(glossaries: &[PathBuf], union: bool, input: &Path, out: Option<&Path>) -> CliResult<()> {
    if glossaries.len() > 1 && !union {
        return Err(CliError::Usage("several glossaries need --union".into()));
    }
    let loaded: Vec<Glossary> = glossaries
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Glossary::load(p, name).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        })
        .collect::<CliResult<_>>()?;
    let glossary = union_glossaries(&loaded).map_err(CliError::data)?;
    let mut records = read_records(input)?;
    let mut positives = 0;
    for r in &mut records {
        let label = glossary.classify(&r.text);
        positives += usize::from(label == Label::Positive);
        r.label = Some(label);
        r.provenance = Provenance::Heuristic;
    }
    eprintln!(
        "glossary {} ({} keywords): {positives} of {} positive",
        glossary.name(),
        glossary.len(),
        records.len()
    );
    write_records(out, &records)
}

fn read_feature_labels(path: &Path) -> CliResult<Vec<(Feature, Label)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| CliError::Data(format!("{}: line {}: {msg}", path.display(), i + 1));
        let (feature, class) = line.split_once('\t').ok_or_else(|| bad("expected feature<TAB>class"))?;
        let label: Label = class.trim().parse().map_err(|_| bad("class must be positive or negative"))?;
        let feature = Feature::new(feature);
        if feature.is_empty() {
            return Err(bad("feature has no word characters"));
        }
        out.push((feature, label));
    }
    Ok(out)
}

fn train_nb(
    labeled: &Path,
    features: Option<&Path>,
    unlabeled: Option<&Path>,
    config: NbConfig,
    out: &Path,
) -> CliResult<()> {
    let labeled_records = read_records(labeled)?;
    let docs: Vec<(&str, Label)> = labeled_records
        .iter()
        .filter_map(|r| r.label.map(|l| (r.text.as_str(), l)))
        .collect();
    let feature_labels = match features {
        Some(p) => read_feature_labels(p)?,
        None => Vec::new(),
    };
    let boosts: FeatureBoosts = nb::uniform_boosts(&feature_labels, config.feature_boost);
    let unlabeled_records = match unlabeled {
        Some(p) => read_records(p)?,
        None => Vec::new(),
    };
    if config.em_pass && unlabeled_records.is_empty() {
        return Err(CliError::Usage("--em needs --unlabeled".into()));
    }
    let pool: Vec<&str> = unlabeled_records.iter().map(|r| r.text.as_str()).collect();
    let model = nb::train(&docs, &boosts, &pool, &config).map_err(CliError::data)?;
    std::fs::write(out, model.to_json()).map_err(|e| CliError::io(out, e))?;
    eprintln!(
        "trained on {} labeled records, {} labeled features, {} unlabeled; vocabulary {} -> {}",
        docs.len(),
        boosts.len(),
        pool.len(),
        model.vocabulary().len(),
        out.display()
    );
    Ok(())
}

struct AlServeArgs {
    corpus: Option<PathBuf>,
    evaluation: Option<PathBuf>,
    port: u16,
    host: String,
    data_dir: Option<PathBuf>,
    session_id: String,
    seed: u64,
    defer_retrain: bool,
}

fn al_serve(args: AlServeArgs) -> CliResult<()> {
    let data_dir = args
        .data_dir
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(|d| PathBuf::from(d).join("sessions")))
        .unwrap_or_else(|| PathBuf::from("topic-forge-data").join("sessions"));
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid address {}:{}", args.host, args.port)))?;
    let store = SessionStore::open(&data_dir).map_err(|e| CliError::Data(format!("{}: {e}", data_dir.display())))?;
    if let Some(corpus_path) = &args.corpus {
        if store.session_ids().contains(&args.session_id) {
            eprintln!("session {} replayed from {}", args.session_id, data_dir.display());
        } else {
            let corpus = read_records(corpus_path)?;
            let evaluation = match &args.evaluation {
                Some(p) => read_records(p)?,
                None => Vec::new(),
            };
            let config = SessionConfig {
                nb: NbConfig::default(),
                seed: args.seed,
                defer_retrain: args.defer_retrain,
            };
            store
                .create(Some(&args.session_id), corpus, evaluation, config)
                .map_err(CliError::data)?;
            eprintln!("session {} created, seed {}", args.session_id, args.seed);
        }
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Data(e.to_string()))?;
    runtime.block_on(async {
        let listener = topic_forge_server::bind(addr).await.map_err(|e| CliError::io(addr.to_string(), e))?;
        let local = listener.local_addr().map_err(|e| CliError::io(addr.to_string(), e))?;
        eprintln!("listening on http://{local} (data dir {})", data_dir.display());
        topic_forge_server::serve(listener, Arc::new(store))
            .await
            .map_err(|e| CliError::io(local.to_string(), e))
    })
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    model: &'a str,
    n: usize,
    point: PointMetrics,
    bootstrap: EvalReport,
}

fn evaluate(pred: &Path, gold: &Path, n_bootstrap: usize, seed: u64, name: &str, json: bool) -> CliResult<()> {
    if n_bootstrap == 0 {
        return Err(CliError::Usage("--bootstrap must be at least 1".into()));
    }
    let p = read_records(pred)?;
    let g = read_records(gold)?;
    if p.len() != g.len() {
        let (short, long) = if p.len() < g.len() { ((pred, p.len()), (gold, g.len())) } else { ((gold, g.len()), (pred, p.len())) };
        return Err(CliError::Data(format!(
            "{} is shorter: {} records vs {} in {}",
            short.0.display(),
            short.1,
            long.1,
            long.0.display()
        )));
    }
    let mut predictions = Vec::with_capacity(p.len());
    let mut labels = Vec::with_capacity(g.len());
    for (i, (pr, gr)) in p.iter().zip(&g).enumerate() {
        if pr.id != gr.id {
            return Err(CliError::Data(format!(
                "record {}: id {:?} in {} but {:?} in {}",
                i + 1,
                pr.id,
                pred.display(),
                gr.id,
                gold.display()
            )));
        }
        let unlabeled = |path: &Path| CliError::Data(format!("{}: record {:?} has no label", path.display(), pr.id));
        predictions.push(pr.label.ok_or_else(|| unlabeled(pred))?);
        labels.push(gr.label.ok_or_else(|| unlabeled(gold))?);
    }
    let point = eval::point_metrics(&predictions, &labels).map_err(CliError::data)?;
    let report = eval::bootstrap_metrics(&predictions, &labels, n_bootstrap, seed).map_err(CliError::data)?;
    if json {
        return print_json(&EvaluateOutput {
            model: name,
            n: predictions.len(),
            point,
            bootstrap: report,
        });
    }
    with_output(None, |w| {
        write!(w, "{}", EvalReport::table(&[(name, &report)]))?;
        writeln!(w, "n = {}, bootstrap = {n_bootstrap}, seed = {seed}", predictions.len())
    })
}

fn kappa(ratings: &Path, json: bool) -> CliResult<()> {
    let text = std::fs::read_to_string(ratings).map_err(|e| CliError::io(ratings, e))?;
    let matrix = eval::parse_rating_matrix(&text).map_err(|e| CliError::Data(format!("{}: {e}", ratings.display())))?;
    let report = eval::fleiss_kappa(&matrix).map_err(CliError::data)?;
    if json {
        return print_json(&report);
    }
    println!("kappa {:.6} ({})", report.kappa, report.agreement_level);
    Ok(())
}
