//! Command-line pipelines: corpus ingestion, embedding training, table
//! population and retrieval runs, and TREC-style evaluation.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tablevec::corpus::{
    self, extract_sequence, parse_corpus, CorpusIndex, CorpusIndexBuilder, TableRecord,
    TableSummary, TermSequence, Variant,
};
use tablevec::embedding::{
    load_vectors, save_vectors_with_header, train, EmbeddingMatrix, TrainingConfig,
};
use tablevec::eval::{
    make_population_cases, Metric, MetricReport, PopulationCase, PopulationMode, Qrels,
};
use tablevec::kb::{candidate_entities, load_kb, KnowledgeBase};
use tablevec::population::{grid_search_alpha, score_columns, score_rows, KbMethod};
use tablevec::rank::{read_run, write_run, RankedList, Run};
use tablevec::retrieval::{
    extract_features, train_and_rank, EntityLinker, FeatureContext, ForestParams, LabeledPair,
    Query, DIRICHLET_MU,
};
use tablevec::synth::{generate, SynthParams};

#[derive(Parser)]
#[command(
    name = "tablevec",
    about = "Table embeddings for row/column population and table retrieval",
    version
)]
struct Cli {
    /// Data root used to resolve default paths.
    #[arg(long, global = true, env = "TABLEVEC_DATA", default_value = ".")]
    data_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a JSON-lines table dump into sequence files and a corpus index.
    Ingest(IngestArgs),
    /// Train one embedding variant on its sequence file.
    Train(TrainArgs),
    /// Run row or column population over protocol-generated cases.
    Populate(PopulateArgs),
    /// Sweep the mixture parameter alpha and report the metric curve.
    Gridsearch(GridsearchArgs),
    /// Rank judged tables per query with the learning-to-rank model.
    Retrieve(RetrieveArgs),
    /// Score a run file against qrels.
    Eval(EvalArgs),
    /// Generate the bundled synthetic benchmark corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// JSON-lines corpus; defaults to <data-dir>/corpus.jsonl.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory; defaults to the data dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Embedding variant: w, h, e, or estar.
    #[arg(long)]
    variant: Variant,
    /// Sequence file; defaults to <data-dir>/sequences_<variant>.tsv.
    #[arg(long)]
    sequences: Option<PathBuf>,
    /// Output vector TSV; defaults to <data-dir>/vectors_<variant>.tsv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
}

#[derive(Args)]
struct PopulationInputs {
    /// row or column.
    #[arg(long)]
    mode: PopulationMode,
    /// Corpus index; defaults to <data-dir>/index.json.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Embedding vectors (core-entity variant for rows, heading variant for
    /// columns); defaults to <data-dir>/vectors_estar.tsv or vectors_h.tsv.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Restrict cases to one seed size (1..=5 rows or 1..=3 columns).
    #[arg(long)]
    seed_size: Option<usize>,
    /// Knowledge-base scorer for rows: relations, wlm, or jaccard.
    #[arg(long, default_value = "relations")]
    method: KbMethod,
    #[arg(long)]
    kb_outlinks: Option<PathBuf>,
    #[arg(long)]
    kb_relations: Option<PathBuf>,
    /// Candidate pool cap for row population.
    #[arg(long, default_value_t = 10_000)]
    limit: usize,
    /// Relevant tables retrieved by the column baseline.
    #[arg(long, default_value_t = 256)]
    k: usize,
}

#[derive(Args)]
struct PopulateArgs {
    #[command(flatten)]
    inputs: PopulationInputs,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Output run file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the protocol's ground truth here.
    #[arg(long)]
    qrels_out: Option<PathBuf>,
}

#[derive(Args)]
struct GridsearchArgs {
    #[command(flatten)]
    inputs: PopulationInputs,
    #[arg(long, default_value = "map")]
    metric: Metric,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Curve TSV output.
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

#[derive(Args)]
struct RetrieveArgs {
    /// Queries TSV: query_id<TAB>text; defaults to <data-dir>/queries.tsv.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Judged pairs (TREC qrels); defaults to <data-dir>/qrels.tsv.
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// JSON-lines corpus holding the judged tables.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Corpus index (collection statistics for the lexical features).
    #[arg(long)]
    index: Option<PathBuf>,
    /// Word-embedding vectors; omit to drop the word-side semantic features.
    #[arg(long)]
    vectors_w: Option<PathBuf>,
    /// Entity-embedding vectors; omit to drop the entity-side features.
    #[arg(long)]
    vectors_e: Option<PathBuf>,
    #[arg(long)]
    kb_outlinks: Option<PathBuf>,
    #[arg(long)]
    kb_relations: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 1)]
    rng_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long, default_value = "map")]
    metric: Metric,
    /// Reference run for the paired significance test.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Report TSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory; defaults to <data-dir>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    tables: usize,
    #[arg(long, default_value_t = 12)]
    queries: usize,
    #[arg(long, default_value_t = 42)]
    rng_seed: u64,
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let data = cli.data_dir;
    match cli.command {
        Command::Ingest(args) => cmd_ingest(&data, args),
        Command::Train(args) => cmd_train(&data, args),
        Command::Populate(args) => cmd_populate(&data, args).map(|_| ()),
        Command::Gridsearch(args) => cmd_gridsearch(&data, args),
        Command::Retrieve(args) => cmd_retrieve(&data, args),
        Command::Eval(args) => cmd_eval(&data, args),
        Command::Synth(args) => cmd_synth(&data, args),
    }
}

fn resolve(data: &Path, explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| data.join(default_name))
}

fn require_input(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("{what} not found: {}", path.display());
    }
    Ok(())
}

fn sequence_file_name(variant: Variant) -> String {
    format!("sequences_{}.tsv", variant.code())
}

fn vector_file_name(variant: Variant) -> String {
    format!("vectors_{}.tsv", variant.code())
}

fn cmd_ingest(data: &Path, args: IngestArgs) -> Result<()> {
    let corpus_path = resolve(data, args.corpus, "corpus.jsonl");
    let out_dir = resolve(data, args.out, "");
    require_input(&corpus_path, "corpus")?;
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let header = vec![format!("ingest corpus={}", corpus_path.display())];
    let mut reader = parse_corpus(&corpus_path)?;
    let mut builder = CorpusIndexBuilder::new();
    let mut sequences: HashMap<Variant, Vec<TermSequence>> = HashMap::new();
    for record in reader.by_ref() {
        let mut record = record?;
        corpus::ensure_core_column(&mut record);
        for variant in Variant::ALL {
            if let Some(seq) = extract_sequence(&record, variant)? {
                sequences.entry(variant).or_default().push(seq);
            }
        }
        builder.push(&record)?;
    }
    let stats = reader.stats();

    for variant in Variant::ALL {
        let seqs = sequences.remove(&variant).unwrap_or_default();
        let path = out_dir.join(sequence_file_name(variant));
        let mut variant_header = header.clone();
        variant_header.push(format!("variant={}", variant.label()));
        let total = corpus::write_sequences(&path, &seqs, &variant_header)?;
        println!(
            "variant {}\tsequences {}\ttotal terms {}",
            variant.label(),
            seqs.len(),
            total
        );
    }

    let index = builder.finish();
    index.save(&out_dir.join("index.json"), &header)?;
    println!(
        "records {}\tskipped {}\tduplicate ids {}",
        stats.records, stats.skipped, stats.duplicate_ids
    );
    Ok(())
}

fn cmd_train(data: &Path, args: TrainArgs) -> Result<()> {
    let variant = args.variant;
    let seq_path = resolve(data, args.sequences, &sequence_file_name(variant));
    let out_path = resolve(data, args.out, &vector_file_name(variant));
    require_input(&seq_path, "sequence file")?;

    let mut config = TrainingConfig::for_variant(variant);
    if let Some(v) = args.dim {
        config.dim = v;
    }
    if let Some(v) = args.window {
        config.window = v;
    }
    if let Some(v) = args.negatives {
        config.negatives = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.min_count {
        config.min_count = v;
    }
    if let Some(v) = args.lr {
        config.lr_initial = v;
    }
    if let Some(v) = args.subsample {
        config.subsample_t = v;
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }
    config.rng_seed = args.rng_seed;

    let sequences = corpus::read_sequences(&seq_path, variant)?;
    let matrix = train(&sequences, &config)?;
    println!(
        "variant {}\tvocabulary {}\ttotal terms {}",
        variant.label(),
        matrix.vocab().len(),
        matrix.vocab().total_terms()
    );

    let header = vec![
        format!("train variant={}", variant.label()),
        format!(
            "dim={} window={} negatives={} epochs={} lr={} subsample={} min_count={} rng_seed={} workers={} negative_power={}",
            config.dim,
            config.window,
            config.negatives,
            config.epochs,
            config.lr_initial,
            config.subsample_t,
            config.min_count,
            config.rng_seed,
            config.workers,
            config.negative_power
        ),
    ];
    save_vectors_with_header(&matrix, &out_path, &header)?;
    Ok(())
}

struct PopulationSetup {
    cases: Vec<PopulationCase>,
    qrels: Qrels,
    index: CorpusIndex,
    vectors: EmbeddingMatrix,
    kb: Option<KnowledgeBase>,
}

fn load_population_setup(data: &Path, args: &PopulationInputs) -> Result<PopulationSetup> {
    let index_path = resolve(data, args.index.clone(), "index.json");
    require_input(&index_path, "corpus index")?;
    let default_vectors = match args.mode {
        PopulationMode::Row => vector_file_name(Variant::CoreEntities),
        PopulationMode::Column => vector_file_name(Variant::Headings),
    };
    let vectors_path = resolve(data, args.vectors.clone(), &default_vectors);
    require_input(&vectors_path, "vector file")?;

    let index = CorpusIndex::load(&index_path)?;
    let vectors = load_vectors(&vectors_path)?;

    let kb = match args.mode {
        PopulationMode::Row => {
            let outlinks = resolve(data, args.kb_outlinks.clone(), "kb_outlinks.tsv");
            let relations = resolve(data, args.kb_relations.clone(), "kb_relations.tsv");
            require_input(&outlinks, "kb outlinks")?;
            require_input(&relations, "kb relations")?;
            Some(load_kb(&outlinks, &relations)?)
        }
        PopulationMode::Column => None,
    };

    let summaries: Vec<TableSummary> = index.tables().to_vec();
    let protocol = make_population_cases(&summaries, args.mode)?;
    let mut cases = protocol.cases;
    if let Some(size) = args.seed_size {
        cases.retain(|c| c.seed_size == size);
    }
    if cases.is_empty() {
        bail!("no population cases after filtering (seed size {:?})", args.seed_size);
    }
    let mut qrels = Qrels::new();
    for case in &cases {
        if let Some(items) = protocol.qrels.get(&case.case_id) {
            for (item, grade) in items {
                qrels.insert(case.case_id.clone(), item.clone(), *grade);
            }
        }
    }
    eprintln!(
        "cases {}\texcluded tables {}",
        cases.len(),
        protocol.excluded_tables
    );
    Ok(PopulationSetup {
        cases,
        qrels,
        index,
        vectors,
        kb,
    })
}

fn score_population_case(
    setup: &PopulationSetup,
    case: &PopulationCase,
    method: KbMethod,
    alpha: f64,
    limit: usize,
    k: usize,
) -> tablevec::Result<RankedList> {
    match case.mode {
        PopulationMode::Row => {
            let kb = setup.kb.as_ref().expect("kb loaded for row mode");
            let candidates: Vec<_> = candidate_entities(case.seed.entities(), &setup.index, kb, limit)
                .entities()
                .cloned()
                .collect();
            score_rows(
                &candidates,
                case.seed.entities(),
                method,
                kb,
                &setup.vectors,
                alpha,
            )
        }
        PopulationMode::Column => score_columns(
            case.seed.headings(),
            &setup.index,
            &setup.vectors,
            alpha,
            k,
        ),
    }
}

fn cmd_populate(data: &Path, args: PopulateArgs) -> Result<Run> {
    let inputs = &args.inputs;
    let setup = load_population_setup(data, inputs)?;
    let mut run = Run::new();
    for case in &setup.cases {
        let ranking =
            score_population_case(&setup, case, inputs.method, args.alpha, inputs.limit, inputs.k)?;
        run.insert(case.case_id.clone(), ranking);
    }
    let tag = format!("populate-{}", inputs.mode);
    let header = vec![format!(
        "populate mode={} alpha={} method={:?} seed_size={:?} limit={} k={}",
        inputs.mode, args.alpha, inputs.method, inputs.seed_size, inputs.limit, inputs.k
    )];
    write_run(&args.out, &run, &tag, &header)?;
    if let Some(qrels_out) = &args.qrels_out {
        setup.qrels.save(qrels_out, &header)?;
    }
    println!("cases ranked {}", run.len());
    Ok(run)
}

fn cmd_gridsearch(data: &Path, args: GridsearchArgs) -> Result<()> {
    let inputs = &args.inputs;
    let setup = load_population_setup(data, inputs)?;
    let metric = args.metric;

    let curve = grid_search_alpha(
        &setup.cases,
        |case, alpha| {
            score_population_case(&setup, case, inputs.method, alpha, inputs.limit, inputs.k)
        },
        |case, ranking| {
            setup
                .qrels
                .get(&case.case_id)
                .and_then(|judgments| metric.evaluate(ranking, judgments))
        },
        args.step,
    )?;

    for (alpha, value) in &curve.points {
        println!("{alpha}\t{value}");
    }
    println!("best alpha\t{}", curve.best_alpha);

    if let Some(path) = &args.curve_out {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        writeln!(
            w,
            "# gridsearch mode={} metric={} step={} method={:?}",
            inputs.mode, metric, args.step, inputs.method
        )?;
        writeln!(w, "alpha\t{metric}")?;
        for (alpha, value) in &curve.points {
            writeln!(w, "{alpha}\t{value}")?;
        }
        writeln!(w, "best\t{}", curve.best_alpha)?;
    }
    Ok(())
}

fn read_queries(path: &Path) -> Result<Vec<(String, String)>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut queries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (id, text) = trimmed
            .split_once('\t')
            .ok_or_else(|| anyhow!("{}:{}: expected query_id<TAB>text", path.display(), idx + 1))?;
        queries.push((id.to_string(), text.to_string()));
    }
    Ok(queries)
}

fn cmd_retrieve(data: &Path, args: RetrieveArgs) -> Result<()> {
    let queries_path = resolve(data, args.queries, "queries.tsv");
    let qrels_path = resolve(data, args.qrels, "qrels.tsv");
    let corpus_path = resolve(data, args.corpus, "corpus.jsonl");
    let index_path = resolve(data, args.index, "index.json");
    for (path, what) in [
        (&queries_path, "queries"),
        (&qrels_path, "qrels"),
        (&corpus_path, "corpus"),
        (&index_path, "corpus index"),
    ] {
        require_input(path, what)?;
    }

    let queries = read_queries(&queries_path)?;
    let qrels = Qrels::load(&qrels_path)?;
    let index = CorpusIndex::load(&index_path)?;

    let m_words = args.vectors_w.as_deref().map(load_vectors).transpose()?;
    let m_entities = args.vectors_e.as_deref().map(load_vectors).transpose()?;
    let kb = match (&args.kb_outlinks, &args.kb_relations) {
        (Some(outlinks), Some(relations)) => Some(load_kb(outlinks, relations)?),
        _ => None,
    };
    let linker = kb.as_ref().map(EntityLinker::new);

    // Only judged tables are featurized; pull them out of the corpus stream.
    let mut judged_tables: HashMap<String, TableRecord> = HashMap::new();
    let judged_ids: std::collections::HashSet<&str> = qrels
        .case_ids()
        .filter_map(|case| qrels.get(case))
        .flat_map(|items| items.keys().map(String::as_str))
        .collect();
    let mut reader = parse_corpus(&corpus_path)?;
    for record in reader.by_ref() {
        let record = record?;
        if judged_ids.contains(record.table_id.as_str()) {
            judged_tables.insert(record.table_id.clone(), record);
        }
    }

    let stopwords = corpus::default_stopwords();
    let ctx = FeatureContext {
        collection: index.collection(),
        stopwords,
        mu: DIRICHLET_MU,
    };

    let mut pairs: Vec<LabeledPair> = Vec::new();
    let mut skipped_queries = 0usize;
    let mut missing_tables = 0usize;
    for (query_id, text) in &queries {
        let query = match Query::parse(query_id.clone(), text, stopwords, linker.as_ref()) {
            Ok(q) => q,
            Err(err) => {
                eprintln!("skipping query {query_id}: {err}");
                skipped_queries += 1;
                continue;
            }
        };
        let Some(judged) = qrels.get(query_id) else {
            eprintln!("skipping query {query_id}: no judged tables");
            skipped_queries += 1;
            continue;
        };
        let mut table_ids: Vec<&String> = judged.keys().collect();
        table_ids.sort();
        for table_id in table_ids {
            let Some(table) = judged_tables.get(table_id) else {
                missing_tables += 1;
                continue;
            };
            let features =
                extract_features(&query, table, m_words.as_ref(), m_entities.as_ref(), &ctx);
            pairs.push(LabeledPair {
                query_id: query_id.clone(),
                table_id: table_id.clone(),
                features,
                grade: judged[table_id] as f64,
            });
        }
    }
    if missing_tables > 0 {
        eprintln!("warning: {missing_tables} judged tables absent from the corpus");
    }
    if skipped_queries > 0 {
        eprintln!("warning: {skipped_queries} queries skipped");
    }

    let params = ForestParams {
        n_trees: args.trees,
        ..ForestParams::default()
    };
    let run = train_and_rank(&pairs, args.folds, args.rng_seed, &params)?;
    let header = vec![format!(
        "retrieve folds={} trees={} rng_seed={} vectors_w={} vectors_e={}",
        args.folds,
        args.trees,
        args.rng_seed,
        m_words.is_some(),
        m_entities.is_some()
    )];
    write_run(&args.out, &run, "retrieve", &header)?;
    println!("queries ranked {}", run.len());
    Ok(())
}

fn cmd_eval(data: &Path, args: EvalArgs) -> Result<()> {
    let qrels_path = resolve(data, args.qrels, "qrels.tsv");
    require_input(&args.run, "run file")?;
    require_input(&qrels_path, "qrels")?;

    let run = read_run(&args.run)?;
    let qrels = Qrels::load(&qrels_path)?;

    let unscored: Vec<&str> = qrels
        .case_ids()
        .filter(|case| !run.contains_key(*case))
        .collect();
    if !unscored.is_empty() {
        eprintln!(
            "warning: {} judged cases not present in the run (e.g. {})",
            unscored.len(),
            unscored[0]
        );
    }

    let report = MetricReport::evaluate(&run, &qrels, args.metric)?;
    println!("run\t{}\t{}\t{}", args.run.display(), args.metric, report.mean);

    let mut comparison = None;
    if let Some(reference_path) = &args.compare {
        let reference_run = read_run(reference_path)?;
        let reference = MetricReport::evaluate(&reference_run, &qrels, args.metric)?;
        let (p, marker) = report.compare(&reference)?;
        println!(
            "reference\t{}\t{}\t{}",
            reference_path.display(),
            args.metric,
            reference.mean
        );
        println!("paired t-test\tp={p}\tsignificance {marker}");
        comparison = Some((reference_path.clone(), reference, p, marker));
    }

    if let Some(out) = &args.out {
        let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
        let mut w = BufWriter::new(file);
        let mut header = vec![format!(
            "eval run={} qrels={} metric={}",
            args.run.display(),
            qrels_path.display(),
            args.metric
        )];
        if let Some((reference_path, reference, p, marker)) = &comparison {
            header.push(format!(
                "reference={} mean={} p={} marker={}",
                reference_path.display(),
                reference.mean,
                p,
                marker
            ));
        }
        report.write_tsv(&mut w, &header)?;
    }
    Ok(())
}

fn cmd_synth(data: &Path, args: SynthArgs) -> Result<()> {
    let out_dir = resolve(data, args.out, "");
    let params = SynthParams {
        n_tables: args.tables,
        n_queries: args.queries,
        seed: args.rng_seed,
        ..SynthParams::default()
    };
    let files = generate(&params).write_to(&out_dir)?;
    println!(
        "wrote {}\t{}\t{}\t{}\t{}",
        files.corpus.display(),
        files.outlinks.display(),
        files.relations.display(),
        files.queries.display(),
        files.qrels.display()
    );
    Ok(())
}
