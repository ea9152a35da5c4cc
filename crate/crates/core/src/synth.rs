//! Seeded generators for the synthetic corpora used by the test suites and
//! the `synth` subcommand.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{Ast, AstNode, TokenSequence};
use crate::features::ChangeRecord;
use crate::java::parse_method;

const BRANCH_KINDS: [&str; 4] = ["alpha", "beta", "gamma", "delta"];
const LEAF_KINDS: [&str; 2] = ["x", "y"];
const LEAF_TOKENS: [&str; 3] = ["1", "2", "3"];

/// A random tree of `1..=max_nodes` nodes over a deliberately small kind and
/// token alphabet, so that repeated root paths are common.
pub fn random_ast<R: Rng>(rng: &mut R, max_nodes: usize) -> Ast {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        // Half the time extend the newest node, which yields deeper trees.
        let parent = if rng.gen_bool(0.5) { i - 1 } else { rng.gen_range(0..i) };
        children[parent].push(i);
    }
    let labels: Vec<(usize, usize)> = (0..n)
        .map(|_| (rng.gen_range(0..BRANCH_KINDS.len()), rng.gen_range(0..LEAF_KINDS.len() * LEAF_TOKENS.len())))
        .collect();
    fn build(i: usize, children: &[Vec<usize>], labels: &[(usize, usize)]) -> AstNode {
        if children[i].is_empty() {
            let l = labels[i].1;
            AstNode::leaf(LEAF_KINDS[l / LEAF_TOKENS.len()], LEAF_TOKENS[l % LEAF_TOKENS.len()])
        } else {
            let kids = children[i].iter().map(|&c| build(c, children, labels)).collect();
            AstNode::branch(BRANCH_KINDS[labels[i].0], kids)
        }
    }
    Ast::new(build(0, &children, &labels))
}

const VARS: [&str; 8] = ["count", "total", "size", "index", "limit", "offset", "value", "result"];
const OBJECTS: [&str; 8] = ["conn", "stream", "buffer", "user", "config", "request", "session", "node"];
const METHODS: [&str; 8] = ["process", "update", "validate", "send", "close", "flush", "reset", "handle"];
const WORDS: [&str; 6] = ["starting", "done", "retry", "failed", "value is", "ready"];
const TYPES: [&str; 4] = ["Connection", "Stream", "Buffer", "Request"];

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

/// A body statement with one integer literal that edits can change.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Filler {
    template: u8,
    a: &'static str,
    b: &'static str,
    obj: &'static str,
    method: &'static str,
    word: &'static str,
    n: u32,
}

impl Filler {
    fn random<R: Rng>(rng: &mut R) -> Self {
        Filler {
            template: rng.gen_range(0..8),
            a: pick(rng, &VARS),
            b: pick(rng, &VARS),
            obj: pick(rng, &OBJECTS),
            method: pick(rng, &METHODS),
            word: pick(rng, &WORDS),
            n: rng.gen_range(1..100),
        }
    }

    fn render(&self, indent: &str) -> String {
        let Filler { a, b, obj, method, word, n, .. } = self;
        match self.template {
            0 => format!("{indent}int {a}{n} = {b} + {n};"),
            1 => format!("{indent}{a} = {b} * {n};"),
            2 => format!("{indent}{obj}.{method}({a}, {n});"),
            3 => format!("{indent}log(\"{word} {n}\");"),
            4 => format!("{indent}{a} += {n};"),
            5 => format!("{indent}if ({a} > {n}) {{\n{indent}    {a} = {n};\n{indent}}}"),
            6 => format!("{indent}for (int i = 0; i < {n}; i++) {{\n{indent}    {b} += i;\n{indent}}}"),
            _ => format!("{indent}while ({a} > {n}) {{\n{indent}    {a} = {a} - 1;\n{indent}}}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Method {
    name: String,
    params: Vec<(&'static str, &'static str)>,
    body: Vec<String>,
}

impl Method {
    fn random_header<R: Rng>(rng: &mut R, serial: usize) -> Self {
        let mut params = vec![("int", pick(rng, &VARS))];
        if rng.gen_bool(0.5) {
            params.push((pick(rng, &TYPES), pick(rng, &OBJECTS)));
        }
        Method {
            name: format!("{}{}", pick(rng, &METHODS), serial),
            params,
            body: Vec::new(),
        }
    }

    fn render(&self, body: &[String]) -> String {
        let params: Vec<String> = self.params.iter().map(|(t, n)| format!("{t} {n}")).collect();
        let mut out = format!("void {}({}) {{\n", self.name, params.join(", "));
        for stmt in body {
            out.push_str(stmt);
            out.push('\n');
        }
        out.push_str("}\n");
        out
    }

    fn source(&self) -> String {
        self.render(&self.body)
    }
}

fn node_count(source: &str) -> usize {
    parse_method(source).expect("generated methods parse").node_count()
}

/// Fills a random method with statements until its AST has between
/// `min` and `max` nodes.
fn sized_method<R: Rng>(rng: &mut R, serial: usize, min: usize, max: usize) -> (Method, Vec<Filler>) {
    loop {
        let header = Method::random_header(rng, serial);
        let mut fillers = Vec::new();
        loop {
            fillers.push(Filler::random(rng));
            let body: Vec<String> = fillers.iter().map(|f| f.render("    ")).collect();
            let n = node_count(&header.render(&body));
            if n > max {
                break;
            }
            if n >= min && rng.gen_bool(0.5) {
                let mut m = header;
                m.body = body;
                return (m, fillers);
            }
        }
    }
}

/// `n` records whose before state is a method of 30 to 80 AST nodes and
/// whose after state differs by one inserted or one replaced statement.
pub fn single_edit_corpus(n: usize, seed: u64) -> Vec<ChangeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let (method, _) = sized_method(&mut rng, i, 30, 80);
            let mut post = method.body.clone();
            let at = rng.gen_range(0..=post.len());
            let fresh = loop {
                let f = Filler::random(&mut rng).render("    ");
                if !post.contains(&f) {
                    break f;
                }
            };
            if rng.gen_bool(0.5) || at == post.len() {
                post.insert(at, fresh);
            } else {
                post[at] = fresh;
            }
            ChangeRecord {
                id: format!("edit-{i:04}"),
                pre_source: Some(method.source()),
                post_source: Some(method.render(&post)),
                label: false,
            }
        })
        .collect()
}

/// Conditions guarding a call that the benign guard removals strip. Some
/// compare against another variable, so only the `null` literal tells them
/// apart from the vulnerable pattern.
const BENIGN_GUARDS: [&str; 7] = [
    "{v} > 0",
    "{o}.isReady()",
    "!{o}.isClosed()",
    "{v} < limit",
    "{o} != other",
    "{v} != {w}",
    "enabled",
];

fn guard<R: Rng>(rng: &mut R, obj: &str, null_check: bool) -> String {
    if null_check {
        return format!("{obj} != null");
    }
    pick(rng, &BENIGN_GUARDS)
        .replace("{o}", obj)
        .replace("{v}", pick(rng, &VARS))
        .replace("{w}", pick(rng, &VARS))
}

fn guarded(cond: &str, call: &str) -> String {
    format!("    if ({cond}) {{\n        {call}\n    }}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edit {
    /// Removes a `!= null` guard, keeping the guarded call.
    NullGuardRemoval,
    /// Removes any other guard, keeping the guarded call.
    GuardRemoval,
    InsertStatement,
    ChangeLiteral,
}

/// `n` labelled records, `round(0.2 n)` of them positive.
///
/// Every before state holds a guarded call on an object among ordinary
/// statements. Positives remove a null-check guard and keep the call. Half of
/// the negatives remove some other guard the same way, which no size or
/// complexity metric can tell apart from the positives; the rest insert a
/// statement or change an integer literal and leave the guard alone.
pub fn planted_vulnerability_dataset(n: usize, seed: u64) -> Vec<ChangeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives = (n as f64 * 0.2).round() as usize;
    let negatives = n - positives;
    let mut edits = vec![Edit::NullGuardRemoval; positives];
    let removals = negatives / 2;
    edits.extend(std::iter::repeat_n(Edit::GuardRemoval, removals));
    for i in 0..negatives - removals {
        edits.push(if i % 2 == 0 { Edit::InsertStatement } else { Edit::ChangeLiteral });
    }
    edits.shuffle(&mut rng);

    edits
        .into_iter()
        .enumerate()
        .map(|(i, edit)| {
            let (method, mut fillers) = sized_method(&mut rng, i, 20, 60);
            let obj = pick(&mut rng, &OBJECTS);
            let call = format!("{obj}.{}({});", pick(&mut rng, &METHODS), pick(&mut rng, &VARS));
            let null_check = match edit {
                Edit::NullGuardRemoval => true,
                Edit::GuardRemoval => false,
                // Untouched guards are null checks as often as not.
                _ => rng.gen_bool(0.5),
            };
            let cond = guard(&mut rng, obj, null_check);
            let at = rng.gen_range(0..=fillers.len());
            let render = |fillers: &[Filler], guard_stmt: &str| {
                let mut body: Vec<String> = fillers.iter().map(|f| f.render("    ")).collect();
                body.insert(at, guard_stmt.to_owned());
                method.render(&body)
            };
            let guarded_stmt = guarded(&cond, &call);
            let pre = render(&fillers, &guarded_stmt);
            let post = match edit {
                Edit::NullGuardRemoval | Edit::GuardRemoval => render(&fillers, &format!("    {call}")),
                Edit::InsertStatement => {
                    let pos = rng.gen_range(0..=fillers.len());
                    fillers.insert(pos, Filler::random(&mut rng));
                    let mut body: Vec<String> = fillers.iter().map(|f| f.render("    ")).collect();
                    let at = if pos < at { at + 1 } else { at };
                    body.insert(at, guarded_stmt.clone());
                    method.render(&body)
                }
                Edit::ChangeLiteral => {
                    let k = rng.gen_range(0..fillers.len());
                    let old = fillers[k].n;
                    while fillers[k].n == old {
                        fillers[k].n = rng.gen_range(1..100);
                    }
                    render(&fillers, &guarded_stmt)
                }
            };
            ChangeRecord {
                id: format!("vuln-{i:04}"),
                pre_source: Some(pre),
                post_source: Some(post),
                label: edit == Edit::NullGuardRemoval,
            }
        })
        .collect()
}

/// Token documents drawn from two clusters with disjoint core vocabularies
/// and a small shared vocabulary.
#[derive(Debug, Clone)]
pub struct ClusterCorpus {
    pub train: Vec<(TokenSequence, usize)>,
    pub held_out: Vec<(TokenSequence, usize)>,
}

pub const CLUSTER_CORE_TERMS: usize = 15;
pub const CLUSTER_SHARED_TERMS: usize = 5;
pub const CLUSTER_DOC_LEN: usize = 20;
/// Share of each document's tokens drawn from the shared vocabulary.
pub const CLUSTER_SHARED_RATE: f64 = 0.2;

fn cluster_doc<R: Rng>(rng: &mut R, cluster: usize) -> TokenSequence {
    let prefix = ["a", "b"][cluster];
    let items = (0..CLUSTER_DOC_LEN)
        .map(|_| {
            if rng.gen_bool(CLUSTER_SHARED_RATE) {
                format!("identifier|s{}", rng.gen_range(0..CLUSTER_SHARED_TERMS))
            } else {
                format!("identifier|{prefix}{}", rng.gen_range(0..CLUSTER_CORE_TERMS))
            }
        })
        .collect();
    TokenSequence::new(items).expect("items are nonempty")
}

/// `per_cluster` training and `held_out` held-out documents per cluster.
pub fn two_cluster_corpus(per_cluster: usize, held_out: usize, seed: u64) -> ClusterCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = |count: usize| -> Vec<(TokenSequence, usize)> {
        (0..2 * count).map(|i| (cluster_doc(&mut rng, i % 2), i % 2)).collect()
    };
    let train = docs(per_cluster);
    let held_out = docs(held_out);
    ClusterCorpus { train, held_out }
}
