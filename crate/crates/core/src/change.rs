//! Root-path representation of syntax trees and Code Change Trees.
//!
//! Every terminal of a tree defines one root path: the sequence of nodes from
//! the root down to it. Two paths are equal when their nodes have equal
//! identifiers at every position. The identifier of a node encodes the whole
//! ancestor chain: each element's kind, its child rank (in positional mode)
//! and, for the terminal, its token. Removing from one tree's paths all those
//! present in the other tree leaves the paths unique to that side, which are
//! merged back into a tree: the Code Change Tree.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::ast::{export_node, flatten_tree, Ast, AstNode, Preorder, TokenSequence, TreeNode};
use crate::error::ChangeError;

/// Whether a node's child rank takes part in its identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMode {
    /// Ranks are part of the identifier: inserting a sibling before a node
    /// changes the identity of the node and its whole subtree.
    Positional,
    /// Ranks are ignored: nodes are identified by their kind chain and
    /// terminal token only.
    #[default]
    None,
}

impl fmt::Display for RankMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankMode::Positional => "positional",
            RankMode::None => "none",
        })
    }
}

impl FromStr for RankMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positional" => Ok(RankMode::Positional),
            "none" => Ok(RankMode::None),
            other => Err(format!("unknown rank mode `{other}` (expected positional|none)")),
        }
    }
}

/// Node descriptor inside a root path.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathNode {
    pub kind: String,
    pub child_rank: usize,
    pub token: Option<String>,
}

impl PathNode {
    fn of(node: &AstNode) -> Self {
        PathNode {
            kind: node.kind().to_owned(),
            child_rank: node.child_rank(),
            token: node.token().map(str::to_owned),
        }
    }
}

/// Identifier of a node, encoding its full ancestor chain.
///
/// The encoding is a concatenation of self-delimiting element records, so
/// two identifiers are equal exactly when the encoded chains are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIdentifier(Arc<str>);

impl NodeIdentifier {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn child(&self, node: &PathNode, mode: RankMode) -> NodeIdentifier {
        let mut enc = String::with_capacity(self.0.len() + node.kind.len() + 8);
        enc.push_str(&self.0);
        encode_element(&mut enc, node, mode);
        NodeIdentifier(enc.into())
    }

    fn root(node: &PathNode, mode: RankMode) -> NodeIdentifier {
        let mut enc = String::new();
        encode_element(&mut enc, node, mode);
        NodeIdentifier(enc.into())
    }
}

fn encode_element(out: &mut String, node: &PathNode, mode: RankMode) {
    use std::fmt::Write;
    // <len>:<kind>[@<rank>](=<len>:<token> | ;)
    let _ = write!(out, "{}:{}", node.kind.len(), node.kind);
    if mode == RankMode::Positional {
        let _ = write!(out, "@{}", node.child_rank);
    }
    match &node.token {
        Some(tok) => {
            let _ = write!(out, "={}:{}", tok.len(), tok);
        }
        None => out.push(';'),
    }
}

/// Identifier of the last node of `path_to_node` (ordered root first).
///
/// # Panics
///
/// If `path_to_node` is empty.
pub fn node_id(path_to_node: &[PathNode], mode: RankMode) -> NodeIdentifier {
    let (first, rest) = path_to_node
        .split_first()
        .expect("node_id needs a nonempty path");
    rest.iter()
        .fold(NodeIdentifier::root(first, mode), |id, node| id.child(node, mode))
}

/// Path from the root to one terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootPath {
    nodes: Vec<PathNode>,
    ids: Vec<NodeIdentifier>,
}

impl RootPath {
    /// Builds a path from descriptors, computing identifiers under `mode`.
    pub fn from_nodes(nodes: Vec<PathNode>, mode: RankMode) -> Self {
        let mut ids: Vec<NodeIdentifier> = Vec::with_capacity(nodes.len());
        for node in &nodes {
            let id = match ids.last() {
                Some(parent) => parent.child(node, mode),
                None => NodeIdentifier::root(node, mode),
            };
            ids.push(id);
        }
        RootPath { nodes, ids }
    }

    pub fn nodes(&self) -> &[PathNode] {
        &self.nodes
    }

    pub fn ids(&self) -> &[NodeIdentifier] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Key of the whole path. The last identifier already encodes every
    /// ancestor, so it determines the full identifier sequence.
    fn key(&self) -> PathKey {
        PathKey::new(self.ids.last().expect("root paths are nonempty").clone())
    }
}

/// Hash of the path encoding plus the encoding itself; the hash decides
/// bucket placement and the encoding settles collisions.
#[derive(Debug, Clone)]
struct PathKey {
    hash: u64,
    encoding: NodeIdentifier,
}

impl PathKey {
    fn new(encoding: NodeIdentifier) -> Self {
        let mut h = DefaultHasher::new();
        encoding.as_str().hash(&mut h);
        PathKey {
            hash: h.finish(),
            encoding,
        }
    }
}

impl PartialEq for PathKey {
    fn eq(&self, other: &Self) -> bool {
        self.hash == other.hash && self.encoding == other.encoding
    }
}

impl Eq for PathKey {}

impl Hash for PathKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash);
    }
}

/// Set of unique root paths, in first-occurrence order.
#[derive(Debug, Clone)]
pub struct RootPathSet {
    mode: RankMode,
    paths: IndexMap<PathKey, RootPath>,
}

impl PartialEq for RootPathSet {
    /// Set equality: same mode and same keys; order is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.paths.len() == other.paths.len()
            && self.paths.keys().all(|k| other.paths.contains_key(k))
    }
}

impl RootPathSet {
    pub fn new(mode: RankMode) -> Self {
        RootPathSet {
            mode,
            paths: IndexMap::new(),
        }
    }

    pub fn mode(&self) -> RankMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RootPath> {
        self.paths.values()
    }

    /// Inserts a path; returns false if an equal path was already present.
    ///
    /// # Panics
    ///
    /// If `path` is empty.
    pub fn insert(&mut self, path: RootPath) -> bool {
        assert!(!path.is_empty(), "root paths are nonempty");
        let key = path.key();
        if self.paths.contains_key(&key) {
            return false;
        }
        self.paths.insert(key, path);
        true
    }

    pub fn contains(&self, path: &RootPath) -> bool {
        !path.is_empty() && self.paths.contains_key(&path.key())
    }

    /// Sorted path encodings, a canonical form for comparisons and output.
    pub fn encodings(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.paths.keys().map(|k| k.encoding.as_str()).collect();
        out.sort_unstable();
        out
    }
}

/// One root path per terminal of `ast`; equal paths collapse.
pub fn root_paths(ast: &Ast, mode: RankMode) -> RootPathSet {
    let mut set = RootPathSet::new(mode);
    let mut nodes = Vec::new();
    let mut ids = Vec::new();
    collect_paths(ast.root(), mode, &mut nodes, &mut ids, &mut set);
    set
}

fn collect_paths(
    node: &AstNode,
    mode: RankMode,
    nodes: &mut Vec<PathNode>,
    ids: &mut Vec<NodeIdentifier>,
    set: &mut RootPathSet,
) {
    let desc = PathNode::of(node);
    let id = match ids.last() {
        Some(parent) => parent.child(&desc, mode),
        None => NodeIdentifier::root(&desc, mode),
    };
    nodes.push(desc);
    ids.push(id);
    if node.is_terminal() {
        set.insert(RootPath {
            nodes: nodes.clone(),
            ids: ids.clone(),
        });
    } else {
        for child in node.children() {
            collect_paths(child, mode, nodes, ids, set);
        }
    }
    nodes.pop();
    ids.pop();
}

/// Paths of `reference` that are not in `target`, in reference order.
pub fn path_difference(
    reference: &RootPathSet,
    target: &RootPathSet,
) -> Result<RootPathSet, ChangeError> {
    if reference.mode != target.mode {
        return Err(ChangeError::ModeMismatch {
            reference: reference.mode,
            target: target.mode,
        });
    }
    let paths = reference
        .paths
        .iter()
        .filter(|(k, _)| !target.paths.contains_key(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Ok(RootPathSet {
        mode: reference.mode,
        paths,
    })
}

/// Node of a Code Change Tree.
///
/// `child_rank` is the node's rank in the tree it was taken from, not its
/// position among the change-tree siblings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeNode {
    kind: String,
    token: Option<String>,
    child_rank: usize,
    children: Vec<ChangeNode>,
}

impl ChangeNode {
    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    pub fn child_rank(&self) -> usize {
        self.child_rank
    }

    pub fn children(&self) -> &[ChangeNode] {
        &self.children
    }

    fn descriptor(&self) -> PathNode {
        PathNode {
            kind: self.kind.clone(),
            child_rank: self.child_rank,
            token: self.token.clone(),
        }
    }
}

impl TreeNode for ChangeNode {
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

/// Tree rebuilt from a set of root paths. Empty when built from no paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeTree {
    mode: RankMode,
    root: Option<ChangeNode>,
}

impl ChangeTree {
    pub fn empty(mode: RankMode) -> Self {
        ChangeTree { mode, root: None }
    }

    pub fn mode(&self) -> RankMode {
        self.mode
    }

    pub fn root(&self) -> Option<&ChangeNode> {
        self.root.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_none()
    }

    pub fn node_count(&self) -> usize {
        self.preorder().count()
    }

    pub fn preorder(&self) -> Preorder<'_, ChangeNode> {
        match &self.root {
            Some(root) => Preorder::new(root),
            None => Preorder::empty(),
        }
    }

    /// Every root-to-leaf path of the tree, identifiers recomputed from the
    /// node descriptors.
    pub fn root_paths(&self) -> RootPathSet {
        let mut set = RootPathSet::new(self.mode);
        if let Some(root) = &self.root {
            let mut stack = Vec::new();
            enumerate_leaves(root, self.mode, &mut stack, &mut set);
        }
        set
    }

    /// Generic JSON tree document; `null` for the empty tree.
    pub fn to_json(&self) -> Value {
        self.root.as_ref().map_or(Value::Null, export_node)
    }
}

fn enumerate_leaves(
    node: &ChangeNode,
    mode: RankMode,
    stack: &mut Vec<PathNode>,
    set: &mut RootPathSet,
) {
    stack.push(node.descriptor());
    if node.children.is_empty() {
        set.insert(RootPath::from_nodes(stack.clone(), mode));
    } else {
        for child in &node.children {
            enumerate_leaves(child, mode, stack, set);
        }
    }
    stack.pop();
}

struct BuildNode {
    desc: PathNode,
    children: Vec<usize>,
    by_id: HashMap<NodeIdentifier, usize>,
}

/// Merges root paths into a tree: each path walks down from the root,
/// following existing children with the same identifier, and the unmatched
/// remainder is appended as a new branch.
pub fn build_change_tree(paths: &RootPathSet) -> Result<ChangeTree, ChangeError> {
    let mut iter = paths.iter();
    let Some(first) = iter.next() else {
        return Ok(ChangeTree::empty(paths.mode));
    };
    let root_id = first.ids[0].clone();
    let mut arena = vec![BuildNode {
        desc: first.nodes[0].clone(),
        children: Vec::new(),
        by_id: HashMap::new(),
    }];

    for path in std::iter::once(first).chain(iter) {
        if path.ids[0] != root_id {
            return Err(ChangeError::InconsistentRoots);
        }
        let mut current = 0;
        for (desc, id) in path.nodes.iter().zip(&path.ids).skip(1) {
            current = match arena[current].by_id.get(id) {
                Some(&child) => child,
                None => {
                    let child = arena.len();
                    arena.push(BuildNode {
                        desc: desc.clone(),
                        children: Vec::new(),
                        by_id: HashMap::new(),
                    });
                    arena[current].children.push(child);
                    arena[current].by_id.insert(id.clone(), child);
                    child
                }
            };
        }
    }

    Ok(ChangeTree {
        mode: paths.mode,
        root: Some(freeze(&arena, 0)),
    })
}

fn freeze(arena: &[BuildNode], index: usize) -> ChangeNode {
    let node = &arena[index];
    ChangeNode {
        kind: node.desc.kind.clone(),
        token: node.desc.token.clone(),
        child_rank: node.desc.child_rank,
        children: node.children.iter().map(|&c| freeze(arena, c)).collect(),
    }
}

/// Code Change Trees of both sides of a change: the pre-side tree holds the
/// paths of `pre` absent from `post`, and vice versa.
pub fn change_trees(
    pre: &Ast,
    post: &Ast,
    mode: RankMode,
) -> Result<(ChangeTree, ChangeTree), ChangeError> {
    let pre_paths = root_paths(pre, mode);
    let post_paths = root_paths(post, mode);
    let pre_tree = build_change_tree(&path_difference(&pre_paths, &post_paths)?)?;
    let post_tree = build_change_tree(&path_difference(&post_paths, &pre_paths)?)?;
    Ok((pre_tree, post_tree))
}

/// Same depth-first rule as [`crate::ast::flatten`]; the empty tree
/// flattens to the empty sequence.
pub fn flatten_change_tree(tree: &ChangeTree) -> TokenSequence {
    match &tree.root {
        Some(root) => TokenSequence::from_items(flatten_tree(root)),
        None => TokenSequence::empty(),
    }
}
