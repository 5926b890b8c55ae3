use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use kbqa::decode::{
    corpus_forms, BeamConfig, DecodeError, ExternalTokenScorer, NgramScorer, OracleMixtureScorer, OracleTargets,
    TokenScorer, UniformScorer, Vocabulary,
};
use kbqa::enumerate::{enumerate_candidates, EnumConfig, StartPoint};
use kbqa::exec::{evaluate, SparqlCompiler};
use kbqa::kb::{parse_object, AliasPolicy, KbError, Node, StoreBuilder, TripleFormat, TripleStore, DEFAULT_TYPE_RELATION};
use kbqa::pipeline::{
    evaluate_dataset, mean_hits_at_1, read_jsonl, Pipeline, PipelineConfig, PipelineError, PredictOutput, Prediction,
    QaExample,
};
use kbqa::retrieve::{
    link_entities, retrieve_schema, ExternalScorer, LexicalScorer, Question, RetrieveError, Scorer, ScorerError,
    TextOracleScorer, MAX_MENTION_LEN,
};
use kbqa::sexpr::{parse, LogicalForm};

const USAGE: u8 = 1;
const DATA: u8 = 2;
const PROTOCOL: u8 = 3;
const NGRAM_ORDER: usize = 3;
const HITS_TRIALS: usize = 100;

/// Question answering over a triple store with s-expression logical forms.
#[derive(Parser)]
#[command(name = "kbqa", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// Knowledge base: a store dump (.json), N-Triples (.nt) or triple TSV.
    #[arg(long, global = true)]
    kb: Option<PathBuf>,
    /// Alias TSV: `alias \t entity \t popularity`.
    #[arg(long, global = true)]
    aliases: Option<PathBuf>,
    /// Seed for randomized metrics.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 10)]
    beam_size: usize,
    /// Longest generated sequence, end token included.
    #[arg(long, global = true, default_value_t = 128)]
    max_output_tokens: usize,
    /// Token budget of the generator input.
    #[arg(long, global = true, default_value_t = 1000)]
    input_budget: usize,
    /// Classes and relations kept by schema retrieval, each.
    #[arg(long, global = true, default_value_t = 10)]
    top_schema: usize,
    /// Exemplary forms placed in the generator input.
    #[arg(long, global = true, default_value_t = 5)]
    top_elf: usize,
    /// Mask decoding with the grammar and schema tries (default).
    #[arg(long, global = true, overrides_with = "unconstrained")]
    constrained: bool,
    /// Decode without masking.
    #[arg(long, global = true, overrides_with = "constrained")]
    unconstrained: bool,
    /// Retrieval scorer: `lexical`, `oracle:<json>` or `extern:<command>`.
    #[arg(long, global = true, default_value = "lexical")]
    scorer: String,
    /// Generator: `uniform`, `ngram:<forms file>`, `oracle:<json>` or `extern:<command>`.
    #[arg(long, global = true, default_value = "uniform")]
    generator: String,
}

#[derive(Subcommand)]
enum Command {
    /// Builds a store dump from the --kb triples, --aliases and optional label and schema files.
    Ingest(IngestArgs),
    /// Links question mentions to store entities.
    Link { question: String },
    /// Lists candidate forms around start points with their answer counts.
    Enumerate(EnumerateArgs),
    /// Top classes and relations for a question.
    RetrieveSchema { question: String },
    /// Generator beam for a question.
    Decode { question: String },
    /// Evaluates a form against the store.
    Execute { sexpr: String },
    /// Prints the SPARQL query for a form.
    CompileSparql { sexpr: String },
    /// Predicts forms and answers for questions.
    Predict(PredictArgs),
    /// Scores predictions against gold data.
    Eval(EvalArgs),
    /// Prints the token table, one token per line in id order.
    Vocab,
}

#[derive(Args)]
struct IngestArgs {
    /// `entity \t label` rows.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Schema declarations: `class \t name [\t label]` or `relation \t name [\t domain [\t range [\t label]]]`.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Class-membership relation for triple inputs.
    #[arg(long, default_value = DEFAULT_TYPE_RELATION)]
    type_relation: String,
    /// Reject aliases naming unknown entities.
    #[arg(long)]
    strict_aliases: bool,
    /// Output path; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    /// Entity ids or literals to start from.
    starts: Vec<String>,
    /// Also start from the entities linked in this question.
    #[arg(long)]
    question: Option<String>,
    /// 1 or 2.
    #[arg(long, default_value_t = 2)]
    hops: usize,
}

#[derive(Args)]
struct PredictArgs {
    /// Dataset JSONL with `qid` and `question` fields.
    #[arg(long, conflicts_with = "question", required_unless_present = "question")]
    input: Option<PathBuf>,
    /// A single question.
    #[arg(long)]
    question: Option<String>,
    /// Output JSONL path; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Include the generator input and beam in each output line.
    #[arg(long)]
    dump_context: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset JSONL with gold `sexpr` and/or `answers`.
    #[arg(long)]
    gold: PathBuf,
    /// Prediction JSONL as written by `predict`.
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CliResult<T> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: USAGE, error: anyhow!(msg.into()) }
}

fn data<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure { code: DATA, error: e.into() }
}

fn scorer_failure(e: ScorerError) -> Failure {
    match e {
        ScorerError::Data(_) => data(e),
        other => Failure { code: PROTOCOL, error: other.into() },
    }
}

fn decode_failure(e: DecodeError) -> Failure {
    match e {
        DecodeError::Scorer(s) => scorer_failure(s),
        other => data(other),
    }
}

fn retrieve_failure(e: RetrieveError) -> Failure {
    match e {
        RetrieveError::Scorer(s) => scorer_failure(s),
        other => data(other),
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    match e {
        PipelineError::Scorer { .. } => Failure { code: PROTOCOL, error: e.into() },
        other => data(other),
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| data(anyhow!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| data(anyhow!("{}: {e}", path.display())))
}

fn in_file(path: &Path) -> impl Fn(KbError) -> Failure + '_ {
    move |e| data(anyhow!("{}: {e}", path.display()))
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| data(anyhow!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_line(out: &mut dyn Write, line: impl std::fmt::Display) -> CliResult<()> {
    writeln!(out, "{line}").map_err(data)
}

fn parse_form(text: &str) -> CliResult<LogicalForm> {
    parse(text).map_err(|e| data(anyhow!("`{text}`: {e}")))
}

fn store_builder(g: &GlobalOpts, type_relation: &str, policy: AliasPolicy) -> CliResult<StoreBuilder> {
    let path = g.kb.as_deref().ok_or_else(|| usage("--kb is required"))?;
    let mut b = if path.extension().is_some_and(|e| e == "json") {
        StoreBuilder::from_dump(open(path)?).map_err(in_file(path))?
    } else {
        let mut b = StoreBuilder::with_type_relation(type_relation);
        b.load_triples(open(path)?, TripleFormat::from_path(&path.to_string_lossy())).map_err(in_file(path))?;
        b
    };
    if let Some(a) = &g.aliases {
        b.load_aliases(open(a)?, policy).map_err(in_file(a))?;
    }
    Ok(b)
}

fn load_store(g: &GlobalOpts) -> CliResult<TripleStore> {
    let store = store_builder(g, DEFAULT_TYPE_RELATION, AliasPolicy::WarnAndKeep)?.freeze();
    log::info!("store: {} triples, {} entities, {} aliases", store.len(), store.entities().len(), store.alias_count());
    Ok(store)
}

fn retriever(g: &GlobalOpts, store: &TripleStore) -> CliResult<Box<dyn Scorer>> {
    match g.scorer.split_once(':') {
        None if g.scorer == "lexical" => Ok(Box::new(LexicalScorer::new(store))),
        Some(("oracle", path)) => {
            Ok(Box::new(TextOracleScorer::from_json(&read_text(Path::new(path))?).map_err(scorer_failure)?))
        }
        Some(("extern", cmd)) => Ok(Box::new(ExternalScorer::spawn(cmd).map_err(scorer_failure)?)),
        _ => Err(usage(format!("unknown --scorer `{}`", g.scorer))),
    }
}

enum GeneratorSpec {
    Uniform,
    Ngram(String),
    Oracle(OracleTargets),
    Extern(String),
}

impl GeneratorSpec {
    fn parse(spec: &str) -> CliResult<Self> {
        match spec.split_once(':') {
            None if spec == "uniform" => Ok(GeneratorSpec::Uniform),
            Some(("ngram", path)) => Ok(GeneratorSpec::Ngram(read_text(Path::new(path))?)),
            Some(("oracle", path)) => {
                Ok(GeneratorSpec::Oracle(OracleTargets::from_json(&read_text(Path::new(path))?).map_err(decode_failure)?))
            }
            Some(("extern", cmd)) => Ok(GeneratorSpec::Extern(cmd.to_string())),
            _ => Err(usage(format!("unknown --generator `{spec}`"))),
        }
    }

    /// Forms whose tokens must be in the vocabulary.
    fn forms(&self) -> CliResult<Vec<LogicalForm>> {
        match self {
            GeneratorSpec::Ngram(text) => corpus_forms(text).map_err(decode_failure),
            GeneratorSpec::Oracle(targets) => targets.forms().map_err(decode_failure),
            GeneratorSpec::Uniform | GeneratorSpec::Extern(_) => Ok(Vec::new()),
        }
    }

    fn build(&self, vocab: &Vocabulary) -> CliResult<Box<dyn TokenScorer>> {
        Ok(match self {
            GeneratorSpec::Uniform => Box::new(UniformScorer::new(vocab.len())),
            GeneratorSpec::Ngram(text) => {
                Box::new(NgramScorer::train_on_forms(text, vocab, NGRAM_ORDER).map_err(decode_failure)?)
            }
            GeneratorSpec::Oracle(targets) => Box::new(OracleMixtureScorer::new(targets, vocab).map_err(decode_failure)?),
            GeneratorSpec::Extern(cmd) => Box::new(ExternalTokenScorer::spawn(cmd, vocab.len()).map_err(scorer_failure)?),
        })
    }
}

fn vocabulary(store: &TripleStore, spec: &GeneratorSpec) -> CliResult<Vocabulary> {
    Vocabulary::for_store(store, spec.forms()?.iter()).map_err(decode_failure)
}

fn pipeline_config(g: &GlobalOpts) -> CliResult<PipelineConfig> {
    if g.beam_size == 0 || g.max_output_tokens == 0 {
        return Err(usage("--beam-size and --max-output-tokens must be positive"));
    }
    Ok(PipelineConfig {
        top_elf: g.top_elf,
        top_schema: g.top_schema,
        input_budget: g.input_budget,
        beam: BeamConfig {
            beam_size: g.beam_size,
            max_len: g.max_output_tokens,
            constrained: !g.unconstrained,
            length_normalize: false,
        },
        ..PipelineConfig::default()
    })
}

/// Runs `f` with a fully configured pipeline.
fn with_pipeline<T>(g: &GlobalOpts, f: impl FnOnce(&Pipeline, &TripleStore) -> CliResult<T>) -> CliResult<T> {
    let cfg = pipeline_config(g)?;
    let store = load_store(g)?;
    let spec = GeneratorSpec::parse(&g.generator)?;
    let vocab = vocabulary(&store, &spec)?;
    let retriever = retriever(g, &store)?;
    let generator = spec.build(&vocab)?;
    let pipeline = Pipeline::new(&store, &vocab, retriever.as_ref(), generator.as_ref(), cfg).map_err(pipeline_failure)?;
    f(&pipeline, &store)
}

fn output_line(out: &PredictOutput, dump_context: bool) -> CliResult<Value> {
    let mut line = serde_json::to_value(&out.prediction).map_err(data)?;
    let obj = line.as_object_mut().expect("prediction is an object");
    obj.insert("timing".into(), serde_json::to_value(&out.timing).map_err(data)?);
    if dump_context {
        obj.insert("context".into(), serde_json::to_value(&out.context).map_err(data)?);
        obj.insert("context_text".into(), Value::String(out.context.text()));
        obj.insert("context_tokens".into(), json!(out.context.tokens.len()));
        obj.insert("hypotheses".into(), json!(out.hypotheses));
    }
    Ok(line)
}

fn ingest(g: &GlobalOpts, args: &IngestArgs) -> CliResult<()> {
    let policy = if args.strict_aliases { AliasPolicy::Strict } else { AliasPolicy::WarnAndKeep };
    let mut b = store_builder(g, &args.type_relation, policy)?;
    if let Some(p) = &args.labels {
        b.load_labels(open(p)?).map_err(in_file(p))?;
    }
    if let Some(p) = &args.schema {
        b.load_schema(open(p)?).map_err(in_file(p))?;
    }
    let store = b.freeze();
    let mut out = output(args.output.as_deref())?;
    store.dump(&mut out).map_err(data)?;
    write_line(&mut out, "")?;
    out.flush().map_err(data)?;
    log::info!("wrote {} triples", store.len());
    Ok(())
}

fn link(g: &GlobalOpts, question: &str) -> CliResult<()> {
    let store = load_store(g)?;
    let scorer = retriever(g, &store)?;
    let links = link_entities(&Question::new(question), &store, scorer.as_ref(), MAX_MENTION_LEN).map_err(retrieve_failure)?;
    let mut out = output(None)?;
    for l in links {
        let line = json!({
            "mention": l.mention.surface,
            "start": l.mention.start,
            "end": l.mention.end,
            "entity": l.entity.as_str(),
            "label": store.label(&l.entity),
            "score": l.score,
        });
        write_line(&mut out, line)?;
    }
    out.flush().map_err(data)
}

fn enumerate(g: &GlobalOpts, args: &EnumerateArgs) -> CliResult<()> {
    let cfg = EnumConfig::new(args.hops).map_err(|e| usage(e.to_string()))?;
    let store = load_store(g)?;
    let mut starts = Vec::new();
    for s in &args.starts {
        let start = match parse_object(s).map_err(|e| data(anyhow!("start `{s}`: {e}")))? {
            Node::Entity(e) => StartPoint::Entity(e),
            Node::Literal(l) => StartPoint::Literal(l),
        };
        starts.push(start);
    }
    if let Some(q) = &args.question {
        let scorer = retriever(g, &store)?;
        let links = link_entities(&Question::new(q), &store, scorer.as_ref(), MAX_MENTION_LEN).map_err(retrieve_failure)?;
        starts.extend(links.into_iter().map(|l| StartPoint::Entity(l.entity)));
    }
    starts.sort();
    starts.dedup();
    let mut out = output(None)?;
    for c in enumerate_candidates(&starts, &store, &cfg) {
        write_line(&mut out, format_args!("{}\t{}", c.form.print_canonical(), c.answers.len()))?;
    }
    out.flush().map_err(data)
}

fn schema(g: &GlobalOpts, question: &str) -> CliResult<()> {
    let store = load_store(g)?;
    let scorer = retriever(g, &store)?;
    let found = retrieve_schema(&Question::new(question), &store, scorer.as_ref(), g.top_schema).map_err(scorer_failure)?;
    println!("{}", serde_json::to_string_pretty(&found).map_err(data)?);
    Ok(())
}

fn decode(g: &GlobalOpts, question: &str) -> CliResult<()> {
    with_pipeline(g, |pipeline, store| {
        let result = pipeline.predict("decode", question).map_err(pipeline_failure)?;
        let mut out = output(None)?;
        for (rank, h) in result.hypotheses.iter().enumerate() {
            let valid = parse(h).is_ok_and(|lf| kbqa::exec::is_valid_prediction(&lf, store));
            write_line(&mut out, json!({ "rank": rank, "sexpr": h, "valid": valid }))?;
        }
        for e in &result.prediction.errors {
            log::warn!("{e}");
        }
        out.flush().map_err(data)
    })
}

fn execute(g: &GlobalOpts, text: &str) -> CliResult<()> {
    let store = load_store(g)?;
    let lf = parse_form(text)?;
    let answers = evaluate(&lf, &store).map_err(data)?;
    println!("{}", json!({ "sexpr": lf.print_canonical(), "answers": answers.answer_strings() }));
    Ok(())
}

fn compile(g: &GlobalOpts, text: &str) -> CliResult<()> {
    let lf = parse_form(text)?;
    let compiler = match &g.kb {
        Some(_) => SparqlCompiler::new(load_store(g)?.type_relation()),
        None => SparqlCompiler::default(),
    };
    println!("{}", compiler.compile(&lf).text);
    Ok(())
}

fn predict(g: &GlobalOpts, args: &PredictArgs) -> CliResult<()> {
    let examples: Vec<QaExample> = match (&args.input, &args.question) {
        (Some(path), _) => read_jsonl(open(path)?).map_err(|e| data(anyhow!("{}: {e}", path.display())))?,
        (None, Some(q)) => vec![QaExample { qid: "q0".into(), question: q.clone(), sexpr: None, answers: None }],
        (None, None) => return Err(usage("give --input or --question")),
    };
    with_pipeline(g, |pipeline, _| {
        let outputs = pipeline.predict_all(&examples).map_err(pipeline_failure)?;
        let mut out = output(args.output.as_deref())?;
        for o in &outputs {
            write_line(&mut out, output_line(o, args.dump_context)?)?;
        }
        out.flush().map_err(data)
    })
}

fn eval(g: &GlobalOpts, args: &EvalArgs) -> CliResult<()> {
    let mut gold: Vec<QaExample> =
        read_jsonl(open(&args.gold)?).map_err(|e| data(anyhow!("{}: {e}", args.gold.display())))?;
    if g.kb.is_some() {
        let store = load_store(g)?;
        gold = gold.into_iter().map(|ex| ex.with_executed_answers(&store)).collect::<Result<_, _>>().map_err(data)?;
    }
    let predictions: Vec<Prediction> =
        read_jsonl(open(&args.predictions)?).map_err(|e| data(anyhow!("{}: {e}", args.predictions.display())))?;
    let report = evaluate_dataset(&gold, &predictions).map_err(data)?;
    let hits = mean_hits_at_1(&gold, &predictions, HITS_TRIALS, g.seed);
    match args.format {
        ReportFormat::Json => {
            let mut v = serde_json::to_value(&report).map_err(data)?;
            v["hits_at_1"] = json!(hits.map(|h| 100.0 * h));
            println!("{}", serde_json::to_string_pretty(&v).map_err(data)?);
        }
        ReportFormat::Text => {
            print!("{}", report.to_text());
            println!("hits@1  {}", hits.map_or("-".to_string(), |h| format!("{:.2}", 100.0 * h)));
        }
    }
    Ok(())
}

fn vocab(g: &GlobalOpts) -> CliResult<()> {
    let store = load_store(g)?;
    let vocab = vocabulary(&store, &GeneratorSpec::parse(&g.generator)?)?;
    let mut out = output(None)?;
    for t in vocab.tokens() {
        write_line(&mut out, t)?;
    }
    out.flush().map_err(data)
}

fn run(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Ingest(args) => ingest(g, args),
        Command::Link { question } => link(g, question),
        Command::Enumerate(args) => enumerate(g, args),
        Command::RetrieveSchema { question } => schema(g, question),
        Command::Decode { question } => decode(g, question),
        Command::Execute { sexpr } => execute(g, sexpr),
        Command::CompileSparql { sexpr } => compile(g, sexpr),
        Command::Predict(args) => predict(g, args),
        Command::Eval(args) => eval(g, args),
        Command::Vocab => vocab(g),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse_with_defaults() {
        let cli = Cli::try_parse_from(["kbqa", "execute", "e1"]).unwrap();
        assert_eq!(cli.global.beam_size, 10);
        assert_eq!(cli.global.max_output_tokens, 128);
        assert_eq!(cli.global.input_budget, 1000);
        assert_eq!((cli.global.top_schema, cli.global.top_elf), (10, 5));
        assert!(!cli.global.unconstrained);
        let cfg = pipeline_config(&cli.global).unwrap();
        assert!(cfg.beam.constrained);
    }

    #[test]
    fn constraint_flags_override_each_other() {
        let cli = Cli::try_parse_from(["kbqa", "--unconstrained", "--constrained", "vocab"]).unwrap();
        assert!(pipeline_config(&cli.global).unwrap().beam.constrained);
        let cli = Cli::try_parse_from(["kbqa", "vocab", "--constrained", "--unconstrained"]).unwrap();
        assert!(!pipeline_config(&cli.global).unwrap().beam.constrained);
    }

    #[test]
    fn unknown_scorer_kinds_are_usage_errors() {
        assert_eq!(GeneratorSpec::parse("beam").err().map(|f| f.code), Some(USAGE));
        let cli = Cli::try_parse_from(["kbqa", "--scorer", "bm25", "vocab"]).unwrap();
        let store = kbqa::fixtures::toy_kb();
        assert_eq!(retriever(&cli.global, &store).err().map(|f| f.code), Some(USAGE));
    }

    #[test]
    fn scorer_errors_map_to_exit_codes() {
        assert_eq!(scorer_failure(ScorerError::Protocol("x".into())).code, PROTOCOL);
        assert_eq!(scorer_failure(ScorerError::Data("x".into())).code, DATA);
        assert_eq!(decode_failure(DecodeError::MissingGrammar).code, DATA);
        assert_eq!(retrieve_failure(RetrieveError::NoCandidates("m".into())).code, DATA);
    }
}
