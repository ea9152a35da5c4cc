use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use cctree::ast::{export_tree, Ast, AstNode};
use cctree::change::{flatten_change_tree, ChangeTree, RankMode};
use cctree::demo::worked_example;
use cctree::embed::{train, EmbeddingModel};
use cctree::eval::{run_experiment, EvalConfig};
use cctree::features::{
    embedding_corpus, parse_record, read_records, represent_parsed, write_csv, write_records, ChangeRecord,
    ParsedRecord, Representation,
};
use cctree::java::{extract_methods, parse_source, MethodUnit};
use cctree::synth::{planted_vulnerability_dataset, single_edit_corpus};
use cctree::tokens::{apply_oov, build_vocabulary, build_vocabulary_parallel, normalize_sequence, OovPolicy, Vocabulary};

use crate::manifest::{now, RunManifest};
use crate::{Cli, Command, EmbedArgs, EmbedCommand, Emit, SynthKind, VocabCommand};

#[derive(Debug)]
pub enum Failure {
    /// Bad invocation: exit status 2.
    Usage(String),
    /// Bad or unreadable input: exit status 1.
    Data(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) => f.write_str(m),
        }
    }
}

fn data(e: impl fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

type Outcome<T = ()> = Result<T, Failure>;

/// Per-command context: records inputs and writes outputs with their
/// manifests.
struct Run {
    subcommand: &'static str,
    inputs: Vec<PathBuf>,
    config: Value,
    seed: Option<u64>,
    started_at: String,
    parallel: bool,
}

impl Run {
    fn new(subcommand: &'static str, parallel: bool) -> Self {
        Run {
            subcommand,
            inputs: Vec::new(),
            config: Value::Null,
            seed: None,
            started_at: now(),
            parallel,
        }
    }

    fn read(&mut self, path: &Path) -> Outcome<String> {
        self.inputs.push(path.to_owned());
        fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
    }

    fn records(&mut self, path: &Path) -> Outcome<Vec<ChangeRecord>> {
        self.inputs.push(path.to_owned());
        let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        let records = read_records(BufReader::new(file)).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
        if records.is_empty() {
            return Err(Failure::Data(format!("{}: no records", path.display())));
        }
        Ok(records)
    }

    fn parsed(&self, records: &[ChangeRecord]) -> Outcome<Vec<ParsedRecord>> {
        let out: Result<Vec<_>, _> = if self.parallel {
            records.par_iter().map(parse_record).collect()
        } else {
            records.iter().map(parse_record).collect()
        };
        out.map_err(data)
    }

    fn model(&mut self, path: &Path) -> Outcome<EmbeddingModel> {
        self.inputs.push(path.to_owned());
        EmbeddingModel::load(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
    }

    /// Writes `bytes` to `output` with its manifest, or to stdout.
    fn emit(&self, output: Option<&Path>, bytes: &[u8]) -> Outcome {
        match output {
            Some(path) => {
                fs::write(path, bytes).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
                self.manifest(path)
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes).and_then(|_| out.flush()).map_err(data)
            }
        }
    }

    fn manifest(&self, output: &Path) -> Outcome {
        RunManifest::new(
            self.subcommand,
            self.inputs.clone(),
            output,
            self.config.clone(),
            self.seed,
            self.started_at.clone(),
        )
        .write()
        .map_err(|e| Failure::Data(format!("{}: {e}", output.display())))
    }
}

fn json_bytes(value: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s.into_bytes()
}

pub fn run(cli: Cli) -> Outcome {
    if cli.threads == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    let parallel = cli.threads > 1;
    if parallel {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(data)?;
    }
    let threads = cli.threads;
    match cli.command {
        Command::Parse { file, json, output } => {
            let mut run = Run::new("parse", parallel);
            run.config = json!({ "json": json });
            let source = run.read(&file)?;
            let ast = parse_source(&source).map_err(|e| Failure::Data(format!("{}:{e}", file.display())))?;
            let bytes = if json {
                json_bytes(&export_tree(&ast))
            } else {
                outline(&ast).into_bytes()
            };
            run.emit(output.as_deref(), &bytes)
        }
        Command::Diff {
            pre,
            post,
            method,
            rank,
            emit,
            output,
        } => {
            let mut run = Run::new("diff", parallel);
            run.config = json!({ "method": method, "rank_mode": rank.rank_mode, "emit": format!("{emit:?}").to_lowercase() });
            let pre_src = run.read(&pre)?;
            let post_src = run.read(&post)?;
            let parse = |path: &Path, src: &str| -> Outcome<Vec<MethodUnit>> {
                let ast = parse_source(src).map_err(|e| Failure::Data(format!("{}:{e}", path.display())))?;
                Ok(extract_methods(&ast, src))
            };
            let pre_methods = parse(&pre, &pre_src)?;
            let post_methods = parse(&post, &post_src)?;
            let parsed = select_method(method.as_deref(), (&pre, pre_methods), (&post, post_methods))?;
            let (pre_tree, post_tree) = parsed.change_trees(rank.rank_mode);
            let value = match emit {
                Emit::Tree => json!({ "pre": pre_tree.to_json(), "post": post_tree.to_json() }),
                Emit::Tokens => json!({
                    "pre": flatten_change_tree(&pre_tree).items(),
                    "post": flatten_change_tree(&post_tree).items(),
                }),
                Emit::Stats => diff_stats(&parsed, &pre_tree, &post_tree),
            };
            run.emit(output.as_deref(), &json_bytes(&value))
        }
        Command::Stats { records, rank, output } => {
            let mut run = Run::new("stats", parallel);
            run.config = json!({ "rank_mode": rank.rank_mode });
            let recs = run.records(&records)?;
            let parsed = run.parsed(&recs)?;
            let sizes = |p: &ParsedRecord| {
                let (pre, post) = p.change_trees(rank.rank_mode);
                let states = usize::from(p.pre.is_some()) + usize::from(p.post.is_some());
                let ast = p.pre_ast().map_or(0, Ast::node_count) + p.post_ast().map_or(0, Ast::node_count);
                let nonempty = usize::from(!pre.is_empty()) + usize::from(!post.is_empty());
                (states, ast, nonempty, pre.node_count() + post.node_count())
            };
            let per: Vec<_> = if parallel {
                parsed.par_iter().map(sizes).collect()
            } else {
                parsed.iter().map(sizes).collect()
            };
            let sum = |f: fn(&(usize, usize, usize, usize)) -> usize| per.iter().map(f).sum::<usize>() as f64;
            let n = per.len() as f64;
            let (states, ast, nonempty, tree) = (sum(|s| s.0), sum(|s| s.1), sum(|s| s.2), sum(|s| s.3));
            let value = json!({
                "records": per.len(),
                "rank_mode": rank.rank_mode,
                "mean_ast_nodes_per_state": ast / states,
                "mean_change_tree_nodes_per_nonempty_tree": if nonempty > 0.0 { tree / nonempty } else { 0.0 },
                "mean_ast_nodes_per_record": ast / n,
                "mean_change_tree_nodes_per_record": tree / n,
                "reduction": if ast > 0.0 { 1.0 - tree / ast } else { 0.0 },
            });
            run.emit(output.as_deref(), &json_bytes(&value))
        }
        Command::Vocab {
            command: VocabCommand::Build {
                corpus,
                min_df,
                rank,
                output,
            },
        } => {
            let mut run = Run::new("vocab build", parallel);
            run.config = json!({ "min_df": min_df, "rank_mode": rank.rank_mode });
            let recs = run.records(&corpus)?;
            let parsed = run.parsed(&recs)?;
            let sequences: Vec<_> = embedding_corpus(&parsed, rank.rank_mode).iter().map(normalize_sequence).collect();
            let vocab = if parallel {
                build_vocabulary_parallel(&sequences, min_df)
            } else {
                build_vocabulary(&sequences, min_df)
            }
            .map_err(|e| Failure::Usage(e.to_string()))?;
            eprintln!(
                "{} terms kept of {} sequences (threshold {})",
                vocab.len(),
                vocab.corpus_size(),
                vocab.threshold()
            );
            run.emit(Some(&output), vocab.to_tsv_string().as_bytes())
        }
        Command::Embed {
            command: EmbedCommand::Train {
                corpus,
                seed,
                vocab,
                embed,
                rank,
                output,
            },
        } => {
            let mut run = Run::new("embed train", parallel);
            let config = embed.config(seed);
            config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            run.seed = Some(seed);
            run.config = json!({
                "embed": config,
                "min_df": if vocab.is_some() { Value::Null } else { json!(embed.min_df) },
                "rank_mode": rank.rank_mode,
                "threads": threads,
            });
            let recs = run.records(&corpus)?;
            let vocab = match vocab {
                Some(path) => {
                    let text = run.read(&path)?;
                    Some(Vocabulary::read_tsv(text.as_bytes()).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?)
                }
                None => None,
            };
            let parsed = run.parsed(&recs)?;
            let model = train_model(&parsed, &embed, seed, rank.rank_mode, vocab)?;
            eprintln!("trained {} terms, dim {}", model.terms().len(), model.dim());
            run.emit(Some(&output), &model.to_bytes())
        }
        Command::Featurize {
            records,
            mode,
            model,
            rank,
            output,
        } => {
            let mut run = Run::new("featurize", parallel);
            run.config = json!({ "mode": mode, "rank_mode": rank.rank_mode, "model": model });
            let model = match (&model, mode.needs_model()) {
                (Some(path), _) => Some(run.model(path)?),
                (None, true) => return Err(Failure::Usage(format!("--mode {mode} needs --model"))),
                (None, false) => None,
            };
            let recs = run.records(&records)?;
            let featurize = |r: &ChangeRecord| {
                let p = parse_record(r)?;
                represent_parsed(&p, mode, model.as_ref(), rank.rank_mode)
            };
            let vectors: Result<Vec<_>, _> = if parallel {
                recs.par_iter().map(featurize).collect()
            } else {
                recs.iter().map(featurize).collect()
            };
            let rows: Vec<_> = recs.iter().zip(vectors.map_err(data)?).collect();
            let mut bytes = Vec::new();
            write_csv(&mut bytes, &rows).map_err(data)?;
            run.emit(Some(&output), &bytes)
        }
        Command::Evaluate {
            records,
            modes,
            folds,
            seed,
            model,
            no_upsample,
            baseline_rate,
            embed,
            rank,
            output,
        } => {
            let mut run = Run::new("evaluate", parallel);
            let modes = parse_modes(&modes)?;
            let config = EvalConfig {
                folds,
                upsample_to_balance: !no_upsample,
                seed,
                positive_rate_for_baseline: baseline_rate,
                ..EvalConfig::default()
            };
            config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let needs_model = modes.iter().any(|m| m.needs_model());
            let embed_config = embed.config(seed);
            if needs_model && model.is_none() {
                embed_config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            }
            run.seed = Some(seed);
            run.config = json!({
                "eval": config,
                "modes": modes,
                "rank_mode": rank.rank_mode,
                "model": model,
                "embed": (needs_model && model.is_none()).then(|| json!({ "config": embed_config, "min_df": embed.min_df })),
                "threads": threads,
            });
            let recs = run.records(&records)?;
            let model = match (&model, needs_model) {
                (Some(path), _) => Some(run.model(path)?),
                (None, true) => {
                    let parsed = run.parsed(&recs)?;
                    Some(train_model(&parsed, &embed, seed, rank.rank_mode, None)?)
                }
                (None, false) => None,
            };
            let report = run_experiment(&recs, &modes, &config, model.as_ref(), rank.rank_mode, parallel).map_err(data)?;
            let table = report.to_markdown();
            run.emit(Some(&output), report.to_json().as_bytes())?;
            let md = output.with_extension("md");
            if md != output {
                run.emit(Some(&md), table.as_bytes())?;
            }
            print!("{table}");
            Ok(())
        }
        Command::DemoExample { rank, json } => {
            let ex = worked_example(rank.rank_mode).map_err(data)?;
            if json {
                let mut value = serde_json::to_value(&ex).expect("example serializes");
                value["post_change_tree_tokens_list"] = json!(flatten_change_tree(&ex.trees.1).items());
                value["post_reduction"] = json!(ex.post_reduction());
                print!("{}", String::from_utf8(json_bytes(&value)).expect("JSON is UTF-8"));
            } else {
                println!("rank mode: {}", ex.rank_mode);
                println!("before: {} AST tokens, {} change tree tokens", ex.pre_ast_tokens, ex.pre_change_tree_tokens);
                println!("after:  {} AST tokens, {} change tree tokens", ex.post_ast_tokens, ex.post_change_tree_tokens);
                println!("total:  {} -> {} tokens", ex.simple_total(), ex.change_tree_total());
                println!("after-state reduction: {:.1}%", 100.0 * ex.post_reduction());
                println!(
                    "before-state change tree: {}",
                    if ex.pre_change_tree_empty { "empty" } else { "nonempty" }
                );
                println!("after-state change tree:");
                for item in flatten_change_tree(&ex.trees.1).iter() {
                    println!("  {item}");
                }
            }
            Ok(())
        }
        Command::Synth {
            kind,
            count,
            seed,
            output,
        } => {
            let mut run = Run::new("synth", parallel);
            run.seed = Some(seed);
            run.config = json!({ "kind": format!("{kind:?}"), "count": count });
            let records = match kind {
                SynthKind::Planted => planted_vulnerability_dataset(count, seed),
                SynthKind::SingleEdit => single_edit_corpus(count, seed),
            };
            let mut bytes = Vec::new();
            write_records(&mut bytes, &records).map_err(data)?;
            run.emit(Some(&output), &bytes)
        }
    }
}

fn train_model(
    parsed: &[ParsedRecord],
    embed: &EmbedArgs,
    seed: u64,
    rank_mode: RankMode,
    vocab: Option<Vocabulary>,
) -> Outcome<EmbeddingModel> {
    let config = embed.config(seed);
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let sequences: Vec<_> = embedding_corpus(parsed, rank_mode).iter().map(normalize_sequence).collect();
    let vocab = match vocab {
        Some(v) => v,
        None => build_vocabulary(&sequences, embed.min_df).map_err(|e| Failure::Usage(e.to_string()))?,
    };
    let policy = OovPolicy::default();
    let corpus: Vec<_> = sequences.iter().map(|s| apply_oov(s, &vocab, &policy)).collect();
    train(&corpus, &config, Some(&vocab)).map_err(data)
}

fn parse_modes(spec: &str) -> Outcome<Vec<Representation>> {
    if spec == "all" {
        return Ok(Representation::ALL.to_vec());
    }
    let mut modes = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let mode: Representation = part.parse().map_err(Failure::Usage)?;
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }
    if modes.is_empty() {
        return Err(Failure::Usage("--modes lists no representation".into()));
    }
    Ok(modes)
}

fn find_method(query: Option<&str>, path: &Path, methods: Vec<MethodUnit>) -> Outcome<Option<MethodUnit>> {
    let Some(query) = query else {
        return match methods.len() {
            0 => Ok(None),
            1 => Ok(methods.into_iter().next()),
            _ => Err(Failure::Usage(format!(
                "{} has {} methods; pick one with --method ({})",
                path.display(),
                methods.len(),
                names(&methods)
            ))),
        };
    };
    let mut hits: Vec<MethodUnit> = methods
        .iter()
        .filter(|m| m.qualified_name == query || m.name() == query)
        .cloned()
        .collect();
    if hits.len() > 1 {
        return Err(Failure::Usage(format!(
            "--method {query} is ambiguous in {}: {}",
            path.display(),
            names(&hits)
        )));
    }
    Ok(hits.pop())
}

fn names(methods: &[MethodUnit]) -> String {
    methods.iter().map(|m| m.qualified_name.as_str()).collect::<Vec<_>>().join(", ")
}

/// A method missing from one side is an added or deleted function.
fn select_method(
    query: Option<&str>,
    pre: (&Path, Vec<MethodUnit>),
    post: (&Path, Vec<MethodUnit>),
) -> Outcome<ParsedRecord> {
    let parsed = ParsedRecord {
        pre: find_method(query, pre.0, pre.1)?,
        post: find_method(query, post.0, post.1)?,
    };
    if parsed.pre.is_none() && parsed.post.is_none() {
        return Err(Failure::Data(match query {
            Some(q) => format!("method {q} is in neither file"),
            None => "neither file contains a method".into(),
        }));
    }
    Ok(parsed)
}

fn diff_stats(parsed: &ParsedRecord, pre: &ChangeTree, post: &ChangeTree) -> Value {
    let ast = |a: Option<&Ast>| a.map_or(0, Ast::node_count);
    let total_ast = ast(parsed.pre_ast()) + ast(parsed.post_ast());
    let total_tree = pre.node_count() + post.node_count();
    json!({
        "pre_ast_nodes": ast(parsed.pre_ast()),
        "post_ast_nodes": ast(parsed.post_ast()),
        "pre_change_tree_nodes": pre.node_count(),
        "post_change_tree_nodes": post.node_count(),
        "pre_change_tree_empty": pre.is_empty(),
        "post_change_tree_empty": post.is_empty(),
        "reduction_percent": if total_ast == 0 { 0.0 } else { 100.0 * (1.0 - total_tree as f64 / total_ast as f64) },
    })
}

fn outline(ast: &Ast) -> String {
    fn walk(node: &AstNode, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push_str(node.kind());
        if let Some(token) = node.token() {
            out.push_str(" '");
            out.push_str(token);
            out.push('\'');
        }
        out.push('\n');
        for child in node.children() {
            walk(child, depth + 1, out);
        }
    }
    let mut out = String::new();
    walk(ast.root(), 0, &mut out);
    out
}
