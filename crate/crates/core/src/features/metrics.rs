//! Per-method source metrics.
//!
//! | code   | meaning                                                        |
//! |--------|----------------------------------------------------------------|
//! | LLOC   | distinct source lines on which a statement starts              |
//! | LOC    | source lines spanned by the method                             |
//! | McCC   | 1 + `if`, `while`, `for`, `&&`, `\|\|` and `?:`                 |
//! | NL     | deepest nesting of `if`/`while`/`for`                          |
//! | NLE    | as NL, but an `else if` stays on its chain's level             |
//! | NOC    | `if` statements and conditional expressions                    |
//! | NOI    | distinct names of invoked methods                              |
//! | NOL    | `while` and `for` loops                                        |
//! | NOS    | statements (blocks excluded)                                   |
//! | NUMPAR | formal parameters                                              |
//!
//! Statements are the kinds in [`STATEMENT_KINDS`]; a declaration in a `for`
//! header is part of the loop, not a statement of its own.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ast::AstNode;
use crate::java::{parameter_count, MethodUnit};

/// Metric codes in vector order.
pub const METRIC_NAMES: [&str; 10] = [
    "LLOC", "LOC", "McCC", "NL", "NLE", "NOC", "NOI", "NOL", "NOS", "NUMPAR",
];

pub const STATEMENT_KINDS: [&str; 8] = [
    "if_statement",
    "while_statement",
    "for_statement",
    "return_statement",
    "break_statement",
    "continue_statement",
    "local_variable_declaration",
    "expression_statement",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct MetricSet {
    pub LLOC: u32,
    pub LOC: u32,
    pub McCC: u32,
    pub NL: u32,
    pub NLE: u32,
    pub NOC: u32,
    pub NOI: u32,
    pub NOL: u32,
    pub NOS: u32,
    pub NUMPAR: u32,
}

impl MetricSet {
    pub const LEN: usize = METRIC_NAMES.len();

    /// Values in [`METRIC_NAMES`] order.
    pub fn to_vec(&self) -> Vec<f64> {
        [
            self.LLOC, self.LOC, self.McCC, self.NL, self.NLE, self.NOC, self.NOI, self.NOL,
            self.NOS, self.NUMPAR,
        ]
        .iter()
        .map(|&v| v as f64)
        .collect()
    }
}

struct Walker<'a> {
    source: &'a str,
    base: usize,
    lines: BTreeSet<usize>,
    invoked: BTreeSet<String>,
    m: MetricSet,
}

impl Walker<'_> {
    fn line_of(&self, offset: usize) -> Option<usize> {
        let rel = offset.checked_sub(self.base)?;
        let prefix = self.source.get(..rel)?;
        Some(prefix.matches('\n').count())
    }

    fn visit(&mut self, node: &AstNode, parent: Option<&str>, nl: u32, nle: u32) {
        let kind = node.kind();
        let is_statement = STATEMENT_KINDS.contains(&kind)
            && !(kind == "local_variable_declaration" && parent == Some("for_statement"));
        if is_statement {
            self.m.NOS += 1;
            if let Some(line) = node.span().and_then(|s| self.line_of(s.start)) {
                self.lines.insert(line);
            }
        }

        let (mut nl, mut nle) = (nl, nle);
        match kind {
            "if_statement" | "while_statement" | "for_statement" => {
                self.m.McCC += 1;
                if kind == "if_statement" {
                    self.m.NOC += 1;
                } else {
                    self.m.NOL += 1;
                }
                let else_if = kind == "if_statement"
                    && parent == Some("if_statement")
                    && node.child_rank() == 2;
                nl += 1;
                if !else_if {
                    nle += 1;
                }
                self.m.NL = self.m.NL.max(nl);
                self.m.NLE = self.m.NLE.max(nle);
            }
            "ternary_expression" => {
                self.m.McCC += 1;
                self.m.NOC += 1;
            }
            "operator" if matches!(node.token(), Some("&&" | "||")) => self.m.McCC += 1,
            "method_invocation" => {
                let children = node.children();
                if let Some(name) = children.len().checked_sub(2).and_then(|i| children[i].token()) {
                    self.invoked.insert(name.to_owned());
                }
            }
            _ => {}
        }

        for child in node.children() {
            self.visit(child, Some(kind), nl, nle);
        }
    }
}

pub fn compute_metrics(method: &MethodUnit) -> MetricSet {
    let root = method.ast.root();
    let base = root.span().map_or(0, |s| s.start);
    let mut w = Walker {
        source: &method.source_text,
        base,
        lines: BTreeSet::new(),
        invoked: BTreeSet::new(),
        m: MetricSet {
            McCC: 1,
            ..MetricSet::default()
        },
    };
    w.visit(root, None, 0, 0);
    let mut m = w.m;
    m.LLOC = w.lines.len() as u32;
    m.LOC = if method.source_text.is_empty() {
        0
    } else {
        method.source_text.trim_end_matches('\n').matches('\n').count() as u32 + 1
    };
    m.NOI = w.invoked.len() as u32;
    m.NUMPAR = parameter_count(root) as u32;
    m
}
