//! Syntax tree data model, depth-first flattening and the generic JSON tree
//! interchange format.
//!
//! A tree is made of non-terminals (inner nodes carrying only a kind) and
//! terminals (leaves carrying a kind and the source token). Every node knows
//! its zero-based rank among its siblings.

use serde_json::{Map, Value};
use std::fmt;

use crate::error::{AstError, SchemaError};

/// Separator between kind and token inside a flattened terminal item.
pub const SEPARATOR: char = '|';

/// Byte offsets `[start, end)` into the original source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }
}

/// Read access shared by syntax trees and change trees, so both flatten and
/// serialize the same way.
pub trait TreeNode: Sized {
    fn kind(&self) -> &str;
    fn token(&self) -> Option<&str>;
    fn children(&self) -> &[Self];
}

/// Node of an abstract syntax tree.
///
/// Equality is structural: spans are ignored.
#[derive(Debug, Clone)]
pub struct AstNode {
    kind: String,
    token: Option<String>,
    children: Vec<AstNode>,
    child_rank: usize,
    span: Option<Span>,
}

impl PartialEq for AstNode {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.token == other.token
            && self.child_rank == other.child_rank
            && self.children == other.children
    }
}

impl Eq for AstNode {}

impl AstNode {
    /// A terminal node.
    pub fn leaf(kind: impl Into<String>, token: impl Into<String>) -> Self {
        let kind = kind.into();
        debug_assert!(is_valid_kind(&kind), "invalid node kind {kind:?}");
        AstNode {
            kind,
            token: Some(token.into()),
            children: Vec::new(),
            child_rank: 0,
            span: None,
        }
    }

    /// A non-terminal node. Child ranks are assigned from the order of
    /// `children`.
    ///
    /// # Panics
    ///
    /// If `children` is empty: a node without children is a terminal and
    /// must carry a token.
    pub fn branch(kind: impl Into<String>, children: Vec<AstNode>) -> Self {
        let kind = kind.into();
        debug_assert!(is_valid_kind(&kind), "invalid node kind {kind:?}");
        assert!(
            !children.is_empty(),
            "non-terminal `{kind}` must have at least one child"
        );
        let mut children = children;
        for (rank, child) in children.iter_mut().enumerate() {
            child.child_rank = rank;
        }
        AstNode {
            kind,
            token: None,
            children,
            child_rank: 0,
            span: None,
        }
    }

    pub fn with_span(mut self, span: Span) -> Self {
        self.span = Some(span);
        self
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn children(&self) -> &[AstNode] {
        &self.children
    }

    pub fn child_rank(&self) -> usize {
        self.child_rank
    }

    pub fn span(&self) -> Option<Span> {
        self.span
    }

    pub fn is_terminal(&self) -> bool {
        self.token.is_some()
    }

    /// Number of nodes in the subtree rooted here.
    pub fn subtree_size(&self) -> usize {
        let mut count = 0;
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            count += 1;
            stack.extend(node.children.iter());
        }
        count
    }

    /// Pre-order iterator over the subtree rooted here.
    pub fn preorder(&self) -> Preorder<'_, AstNode> {
        Preorder { stack: vec![self] }
    }
}

impl TreeNode for AstNode {
    fn kind(&self) -> &str {
        &self.kind
    }
    fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }
    fn children(&self) -> &[Self] {
        &self.children
    }
}

/// Pre-order depth-first traversal.
pub struct Preorder<'a, T> {
    stack: Vec<&'a T>,
}

impl<'a, T> Preorder<'a, T> {
    pub fn new(root: &'a T) -> Self {
        Preorder { stack: vec![root] }
    }

    pub fn empty() -> Self {
        Preorder { stack: Vec::new() }
    }
}

impl<'a, T: TreeNode> Iterator for Preorder<'a, T> {
    type Item = &'a T;

    fn next(&mut self) -> Option<&'a T> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children().iter().rev());
        Some(node)
    }
}

/// A validated syntax tree with a cached node count.
///
/// Equality is structural, like [`AstNode`].
#[derive(Debug, Clone)]
pub struct Ast {
    root: AstNode,
    node_count: usize,
    source_span: Option<Span>,
}

impl PartialEq for Ast {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Eq for Ast {}

impl Ast {
    pub fn new(mut root: AstNode) -> Self {
        root.child_rank = 0;
        let node_count = root.subtree_size();
        let source_span = root.span;
        Ast {
            root,
            node_count,
            source_span,
        }
    }

    pub fn root(&self) -> &AstNode {
        &self.root
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn source_span(&self) -> Option<Span> {
        self.source_span
    }

    pub fn into_root(self) -> AstNode {
        self.root
    }

    /// Number of terminals.
    pub fn terminal_count(&self) -> usize {
        self.root.preorder().filter(|n| n.is_terminal()).count()
    }
}

/// Ordered list of flattened items. No item is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(items: Vec<String>) -> Result<Self, AstError> {
        if let Some(index) = items.iter().position(|s| s.is_empty()) {
            return Err(AstError::EmptyItem { index });
        }
        Ok(TokenSequence(items))
    }

    pub fn empty() -> Self {
        TokenSequence(Vec::new())
    }

    pub(crate) fn from_items(items: Vec<String>) -> Self {
        debug_assert!(items.iter().all(|s| !s.is_empty()));
        TokenSequence(items)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn into_items(self) -> Vec<String> {
        self.0
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, item) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(item)?;
        }
        Ok(())
    }
}

/// Kinds follow the named-node alphabet of conventional grammars.
pub fn is_valid_kind(kind: &str) -> bool {
    let mut chars = kind.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Escapes `\` and `|` inside token text.
pub fn escape_token(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    for c in token.chars() {
        if c == '\\' || c == SEPARATOR {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

/// Flattened form of a single node.
pub fn flat_item(kind: &str, token: Option<&str>) -> String {
    match token {
        None => kind.to_owned(),
        Some(tok) => {
            let mut item = String::with_capacity(kind.len() + tok.len() + 1);
            item.push_str(kind);
            item.push(SEPARATOR);
            item.push_str(&escape_token(tok));
            item
        }
    }
}

/// Splits a flattened item into its kind and (still escaped) token part.
pub fn split_item(item: &str) -> (&str, Option<&str>) {
    match item.split_once(SEPARATOR) {
        Some((kind, tok)) => (kind, Some(tok)),
        None => (item, None),
    }
}

/// Pre-order flattening of any tree.
pub fn flatten_tree<T: TreeNode>(root: &T) -> Vec<String> {
    Preorder { stack: vec![root] }
        .map(|n| flat_item(n.kind(), n.token()))
        .collect()
}

/// Flattens an AST depth first: non-terminals yield their kind, terminals
/// yield `kind|token`.
pub fn flatten(ast: &Ast) -> TokenSequence {
    TokenSequence::from_items(flatten_tree(ast.root()))
}

/// Serializes a tree to the generic JSON tree format.
pub fn export_node<T: TreeNode>(node: &T) -> Value {
    let mut obj = Map::new();
    obj.insert("kind".into(), Value::String(node.kind().to_owned()));
    if let Some(tok) = node.token() {
        obj.insert("token".into(), Value::String(tok.to_owned()));
    }
    if !node.children().is_empty() {
        let children = node.children().iter().map(export_node).collect();
        obj.insert("children".into(), Value::Array(children));
    }
    Value::Object(obj)
}

pub fn export_tree(ast: &Ast) -> Value {
    export_node(ast.root())
}

/// Builds an [`Ast`] from a generic JSON tree document.
pub fn import_tree(doc: &Value) -> Result<Ast, SchemaError> {
    import_node(doc, "$").map(Ast::new)
}

pub fn import_tree_str(text: &str) -> Result<Ast, SchemaError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| SchemaError {
        path: "$".into(),
        reason: format!("invalid JSON: {e}"),
    })?;
    import_tree(&doc)
}

fn import_node(value: &Value, path: &str) -> Result<AstNode, SchemaError> {
    let err = |path: String, reason: &str| SchemaError {
        path,
        reason: reason.to_owned(),
    };
    let obj = value
        .as_object()
        .ok_or_else(|| err(path.to_owned(), "node must be an object"))?;

    let kind = match obj.get("kind") {
        Some(Value::String(k)) => k,
        Some(_) => return Err(err(format!("{path}.kind"), "kind must be a string")),
        None => return Err(err(path.to_owned(), "missing kind")),
    };
    if !is_valid_kind(kind) {
        return Err(err(
            format!("{path}.kind"),
            "kind must match [A-Za-z_][A-Za-z0-9_]*",
        ));
    }

    let token = match obj.get("token") {
        Some(Value::String(t)) => Some(t),
        Some(_) => return Err(err(format!("{path}.token"), "token must be a string")),
        None => None,
    };

    let children = match obj.get("children") {
        Some(Value::Array(items)) => items.as_slice(),
        Some(_) => {
            return Err(err(
                format!("{path}.children"),
                "children must be an array",
            ))
        }
        None => &[],
    };

    match (token, children.is_empty()) {
        (Some(tok), true) => Ok(AstNode::leaf(kind.as_str(), tok.as_str())),
        (Some(_), false) => Err(err(
            format!("{path}.token"),
            "token present on a non-leaf node",
        )),
        (None, true) => Err(err(path.to_owned(), "leaf node without token")),
        (None, false) => {
            let nodes = children
                .iter()
                .enumerate()
                .map(|(i, child)| import_node(child, &format!("{path}.children[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(AstNode::branch(kind.as_str(), nodes))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn binary() -> Ast {
        Ast::new(AstNode::branch(
            "binary_expression",
            vec![
                AstNode::leaf("identifier", "a"),
                AstNode::leaf("operator", "+"),
                AstNode::leaf("identifier", "b"),
            ],
        ))
    }

    #[test]
    fn flatten_single_terminal() {
        let ast = Ast::new(AstNode::leaf("identifier", "x"));
        assert_eq!(flatten(&ast).items(), ["identifier|x"]);
    }

    #[test]
    fn flatten_binary_expression_preorder() {
        let ast = binary();
        assert_eq!(
            flatten(&ast).items(),
            [
                "binary_expression",
                "identifier|a",
                "operator|+",
                "identifier|b"
            ]
        );
        assert_eq!(ast.node_count(), 4);
    }

    #[test]
    fn child_ranks_follow_order() {
        let ast = binary();
        let ranks: Vec<_> = ast.root().children().iter().map(|c| c.child_rank()).collect();
        assert_eq!(ranks, [0, 1, 2]);
        assert_eq!(ast.root().child_rank(), 0);
    }

    #[test]
    fn separator_and_backslash_are_escaped() {
        let ast = Ast::new(AstNode::leaf("string_literal", r"a|b\c"));
        assert_eq!(flatten(&ast).items(), [r"string_literal|a\|b\\c"]);
    }

    #[test]
    #[should_panic]
    fn branch_without_children_panics() {
        AstNode::branch("block", vec![]);
    }

    #[test]
    fn token_sequence_rejects_empty_items() {
        let err = TokenSequence::new(vec!["a".into(), "".into()]).unwrap_err();
        assert!(matches!(err, AstError::EmptyItem { index: 1 }));
    }

    #[test]
    fn import_single_leaf() {
        let ast = import_tree(&json!({"kind": "identifier", "token": "x"})).unwrap();
        assert_eq!(ast.node_count(), 1);
        assert_eq!(ast.root().token(), Some("x"));
    }

    #[test]
    fn import_block_with_leaf() {
        let ast = import_tree(&json!({
            "kind": "block",
            "children": [{"kind": "identifier", "token": "x"}]
        }))
        .unwrap();
        assert_eq!(ast.node_count(), 2);
        assert_eq!(ast.root().children()[0].child_rank(), 0);
    }

    #[test]
    fn import_rejects_token_on_inner_node() {
        let err = import_tree(&json!({
            "kind": "block",
            "token": "oops",
            "children": [{"kind": "identifier", "token": "x"}]
        }))
        .unwrap_err();
        assert_eq!(err.path, "$.token");
    }

    #[test]
    fn import_reports_path_of_nested_error() {
        let err = import_tree(&json!({
            "kind": "block",
            "children": [
                {"kind": "identifier", "token": "x"},
                {"kind": "block", "children": [{"token": "y"}]}
            ]
        }))
        .unwrap_err();
        assert_eq!(err.path, "$.children[1].children[0]");
        assert!(err.reason.contains("missing kind"));
    }

    #[test]
    fn import_rejects_tokenless_leaf_and_bad_kinds() {
        assert!(import_tree(&json!({"kind": "block"})).is_err());
        assert!(import_tree(&json!({"kind": "a|b", "token": "x"})).is_err());
        assert!(import_tree(&json!({"kind": 3, "token": "x"})).is_err());
        assert!(import_tree(&json!(["kind"])).is_err());
    }

    #[test]
    fn export_omits_empty_children() {
        let ast = Ast::new(AstNode::leaf("identifier", "x"));
        assert_eq!(
            export_tree(&ast),
            json!({"kind": "identifier", "token": "x"})
        );
        assert_eq!(
            serde_json::to_string(&export_tree(&ast)).unwrap(),
            r#"{"kind":"identifier","token":"x"}"#
        );
    }

    #[test]
    fn export_import_round_trip() {
        let ast = binary();
        let back = import_tree(&export_tree(&ast)).unwrap();
        assert_eq!(back, ast);
    }

    #[test]
    fn split_item_parts() {
        assert_eq!(split_item("block"), ("block", None));
        assert_eq!(split_item(r"string_literal|a\|b"), ("string_literal", Some(r"a\|b")));
    }
}
