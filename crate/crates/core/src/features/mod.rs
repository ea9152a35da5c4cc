//! The three change representations: concatenated metrics, embedded
//! flattened ASTs ("simple"), and embedded flattened Code Change Trees.
//!
//! Every representation is the before-state vector followed by the
//! after-state vector. An absent state, or an empty change tree, contributes
//! a zero vector of the per-state width.

mod metrics;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ast::{flatten, Ast, TokenSequence};
use crate::change::{build_change_tree, change_trees, flatten_change_tree, root_paths, ChangeTree, RankMode};
use crate::embed::EmbeddingModel;
use crate::error::FeatureError;
use crate::java::{parse_methods, MethodUnit};

pub use metrics::{compute_metrics, MetricSet, METRIC_NAMES, STATEMENT_KINDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Metrics,
    Simple,
    ChangeTree,
}

impl Representation {
    pub const ALL: [Representation; 3] = [
        Representation::Metrics,
        Representation::Simple,
        Representation::ChangeTree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Representation::Metrics => "metrics",
            Representation::Simple => "simple",
            Representation::ChangeTree => "change_tree",
        }
    }

    pub fn needs_model(self) -> bool {
        self != Representation::Metrics
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Representation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown representation '{s}' (expected metrics, simple or change_tree)"))
    }
}

/// A function before and after a change. `pre_source` is absent for added
/// functions and `post_source` for deleted ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub id: String,
    #[serde(default)]
    pub pre_source: Option<String>,
    #[serde(default)]
    pub post_source: Option<String>,
    pub label: bool,
}

/// Reads one record per nonblank line.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ChangeRecord>, String> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| format!("line {}: {e}", n + 1))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ChangeRecord =
            serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", n + 1))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut w: W, records: &[ChangeRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// The parsed method of each present state.
#[derive(Debug, Clone)]
pub struct ParsedRecord {
    pub pre: Option<MethodUnit>,
    pub post: Option<MethodUnit>,
}

impl ParsedRecord {
    pub fn pre_ast(&self) -> Option<&Ast> {
        self.pre.as_ref().map(|m| &m.ast)
    }

    pub fn post_ast(&self) -> Option<&Ast> {
        self.post.as_ref().map(|m| &m.ast)
    }

    /// Change trees of both sides. An absent state has no root paths, so the
    /// other side's tree is its whole AST.
    pub fn change_trees(&self, mode: RankMode) -> (ChangeTree, ChangeTree) {
        let whole = |ast: &Ast| build_change_tree(&root_paths(ast, mode)).expect("AST paths share a root");
        match (self.pre_ast(), self.post_ast()) {
            (Some(pre), Some(post)) => change_trees(pre, post, mode).expect("same rank mode on both sides"),
            (Some(pre), None) => (whole(pre), ChangeTree::empty(mode)),
            (None, Some(post)) => (ChangeTree::empty(mode), whole(post)),
            (None, None) => (ChangeTree::empty(mode), ChangeTree::empty(mode)),
        }
    }
}

fn parse_state(id: &str, source: &Option<String>) -> Result<Option<MethodUnit>, FeatureError> {
    let Some(source) = source else {
        return Ok(None);
    };
    let mut methods = parse_methods(source).map_err(|e| FeatureError::Parse {
        record_id: id.to_owned(),
        source: e,
    })?;
    if methods.len() != 1 {
        return Err(FeatureError::NotSingleMethod {
            record_id: id.to_owned(),
            found: methods.len(),
        });
    }
    Ok(methods.pop())
}

pub fn parse_record(record: &ChangeRecord) -> Result<ParsedRecord, FeatureError> {
    if record.pre_source.is_none() && record.post_source.is_none() {
        return Err(FeatureError::EmptyRecord {
            record_id: record.id.clone(),
        });
    }
    Ok(ParsedRecord {
        pre: parse_state(&record.id, &record.pre_source)?,
        post: parse_state(&record.id, &record.post_source)?,
    })
}

/// Token sequences an embedding model for these records should be trained
/// on: the flattened AST of every present state plus every nonempty change
/// tree. Sequences are not yet normalized.
pub fn embedding_corpus(parsed: &[ParsedRecord], mode: RankMode) -> Vec<TokenSequence> {
    let mut out = Vec::new();
    for p in parsed {
        out.extend(p.pre_ast().map(flatten));
        out.extend(p.post_ast().map(flatten));
        let (pre, post) = p.change_trees(mode);
        for tree in [pre, post] {
            if !tree.is_empty() {
                out.push(flatten_change_tree(&tree));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub mode: Representation,
    pub dim: usize,
}

/// Width of one state's vector.
pub fn state_width(mode: Representation, model: Option<&EmbeddingModel>) -> Result<usize, FeatureError> {
    match mode {
        Representation::Metrics => Ok(MetricSet::LEN),
        _ => model.map(EmbeddingModel::dim).ok_or(FeatureError::MissingModel(mode)),
    }
}

pub fn represent(
    record: &ChangeRecord,
    mode: Representation,
    model: Option<&EmbeddingModel>,
    rank_mode: RankMode,
) -> Result<FeatureVector, FeatureError> {
    let parsed = parse_record(record)?;
    represent_parsed(&parsed, mode, model, rank_mode)
}

pub fn represent_parsed(
    parsed: &ParsedRecord,
    mode: Representation,
    model: Option<&EmbeddingModel>,
    rank_mode: RankMode,
) -> Result<FeatureVector, FeatureError> {
    let width = state_width(mode, model)?;
    let embed = |seq: &TokenSequence| -> Vec<f64> {
        let model = model.expect("embedding modes have a model");
        model.embed(seq).into_iter().map(f64::from).collect()
    };
    let (pre, post) = match mode {
        Representation::Metrics => {
            let m = |s: &Option<MethodUnit>| s.as_ref().map(|m| compute_metrics(m).to_vec());
            (m(&parsed.pre), m(&parsed.post))
        }
        Representation::Simple => (
            parsed.pre_ast().map(|a| embed(&flatten(a))),
            parsed.post_ast().map(|a| embed(&flatten(a))),
        ),
        Representation::ChangeTree => {
            let (pre, post) = parsed.change_trees(rank_mode);
            let e = |t: &ChangeTree| (!t.is_empty()).then(|| embed(&flatten_change_tree(t)));
            (e(&pre), e(&post))
        }
    };
    let mut values = Vec::with_capacity(2 * width);
    for half in [pre, post] {
        values.extend(half.unwrap_or_else(|| vec![0.0; width]));
    }
    Ok(FeatureVector {
        dim: values.len(),
        values,
        mode,
    })
}

/// Writes `id,label,f0..f{n-1}` rows.
pub fn write_csv<W: Write>(
    w: W,
    rows: &[(&ChangeRecord, FeatureVector)],
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    let dim = rows.first().map_or(0, |(_, v)| v.dim);
    let mut header = vec!["id".to_owned(), "label".to_owned()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    out.write_record(&header)?;
    for (record, v) in rows {
        let mut row = vec![record.id.clone(), u8::from(record.label).to_string()];
        row.extend(v.values.iter().map(|x| x.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{FIG1_POST, FIG1_PRE};
    use crate::embed::{train, EmbedConfig};
    use crate::tokens::normalize_sequence;

    fn record(id: &str, pre: Option<&str>, post: Option<&str>) -> ChangeRecord {
        ChangeRecord {
            id: id.into(),
            pre_source: pre.map(str::to_owned),
            post_source: post.map(str::to_owned),
            label: false,
        }
    }

    fn model_for(records: &[ChangeRecord]) -> EmbeddingModel {
        let parsed: Vec<_> = records.iter().map(|r| parse_record(r).unwrap()).collect();
        let corpus: Vec<_> = embedding_corpus(&parsed, RankMode::None)
            .iter()
            .map(normalize_sequence)
            .collect();
        let cfg = EmbedConfig {
            dim: 8,
            epochs: 5,
            infer_epochs: 10,
            ..EmbedConfig::default()
        };
        train(&corpus, &cfg, None).unwrap()
    }

    #[test]
    fn representation_names() {
        for r in Representation::ALL {
            assert_eq!(r.to_string().parse::<Representation>().unwrap(), r);
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{r}\""));
        }
        assert!("tree".parse::<Representation>().is_err());
    }

    #[test]
    fn identity_change_tree_is_zero() {
        let r = record("same", Some(FIG1_POST), Some(FIG1_POST));
        let model = model_for(std::slice::from_ref(&r));
        let v = represent(&r, Representation::ChangeTree, Some(&model), RankMode::None).unwrap();
        assert_eq!(v.dim, 16);
        assert!(v.values.iter().all(|&x| x == 0.0));
        let s = represent(&r, Representation::Simple, Some(&model), RankMode::None).unwrap();
        assert_eq!(s.values[..8], s.values[8..]);
    }

    #[test]
    fn added_function_has_zero_metrics_prefix() {
        let r = record("added", None, Some("void f() { g(); }"));
        let v = represent(&r, Representation::Metrics, None, RankMode::None).unwrap();
        assert_eq!(v.dim, 2 * MetricSet::LEN);
        assert!(v.values[..MetricSet::LEN].iter().all(|&x| x == 0.0));
        assert!(v.values[MetricSet::LEN..].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn worked_example_halves() {
        let r = record("fig1", Some(FIG1_PRE), Some(FIG1_POST));
        let model = model_for(std::slice::from_ref(&r));
        let v = represent(&r, Representation::ChangeTree, Some(&model), RankMode::None).unwrap();
        assert!(v.values[..8].iter().all(|&x| x == 0.0));
        assert!(v.values[8..].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn metrics_ignore_the_model() {
        let r = record("fig1", Some(FIG1_PRE), Some(FIG1_POST));
        let model = model_for(std::slice::from_ref(&r));
        assert_eq!(
            represent(&r, Representation::Metrics, None, RankMode::None).unwrap(),
            represent(&r, Representation::Metrics, Some(&model), RankMode::Positional).unwrap()
        );
    }

    #[test]
    fn errors_carry_the_record_id() {
        let bad = record("r17", Some("void f( {"), None);
        let err = represent(&bad, Representation::Metrics, None, RankMode::None).unwrap_err();
        assert_eq!(err.record_id(), Some("r17"));
        let two = record("r18", Some("class A { void f() {} void g() {} }"), None);
        assert!(matches!(
            represent(&two, Representation::Metrics, None, RankMode::None),
            Err(FeatureError::NotSingleMethod { found: 2, .. })
        ));
        let empty = record("r19", None, None);
        assert!(matches!(
            represent(&empty, Representation::Metrics, None, RankMode::None),
            Err(FeatureError::EmptyRecord { .. })
        ));
        let ok = record("r20", Some("void f() {}"), None);
        assert!(matches!(
            represent(&ok, Representation::Simple, None, RankMode::None),
            Err(FeatureError::MissingModel(Representation::Simple))
        ));
    }

    #[test]
    fn jsonl_and_csv() {
        let recs = vec![
            record("a", Some("void f() {}"), None),
            ChangeRecord {
                label: true,
                ..record("b", None, Some("void g() {}"))
            },
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &recs).unwrap();
        assert_eq!(read_records(&buf[..]).unwrap(), recs);
        assert!(read_records(&b"{\"id\": 1}\n"[..]).unwrap_err().starts_with("line 1"));

        let rows: Vec<_> = recs
            .iter()
            .map(|r| (r, represent(r, Representation::Metrics, None, RankMode::None).unwrap()))
            .collect();
        let mut out = Vec::new();
        write_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("id,label,f0,f1,"));
        assert!(lines.next().unwrap().starts_with("a,0,0,1,1,"));
        assert!(lines.next().unwrap().starts_with("b,1,0,0,0,"));
    }
}
