//! The two-state "Hello, World!" change used throughout the documentation:
//! one statement is inserted before an unchanged call and one after it.

use serde::Serialize;

use crate::ast::flatten;
use crate::change::{change_trees, flatten_change_tree, ChangeTree, RankMode};
use crate::error::Result;
use crate::java::parse_compilation_unit;

pub const FIG1_PRE: &str = "class HelloWorld {
    public static void main(String[] args) {
        System.out.println(\"Hello, World!\");
    }
}
";

pub const FIG1_POST: &str = "class HelloWorld {
    public static void main(String[] args) {
        String msg = \"World!\";
        System.out.println(\"Hello, World!\");
        System.out.println(\"Hello, \" + msg );
    }
}
";

/// Token counts of the worked example under both representations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkedExample {
    pub rank_mode: RankMode,
    pub pre_ast_tokens: usize,
    pub post_ast_tokens: usize,
    pub pre_change_tree_tokens: usize,
    pub post_change_tree_tokens: usize,
    pub pre_change_tree_empty: bool,
    #[serde(skip)]
    pub trees: (ChangeTree, ChangeTree),
}

impl WorkedExample {
    pub fn simple_total(&self) -> usize {
        self.pre_ast_tokens + self.post_ast_tokens
    }

    pub fn change_tree_total(&self) -> usize {
        self.pre_change_tree_tokens + self.post_change_tree_tokens
    }

    /// Fraction of post-state tokens removed by the change tree.
    pub fn post_reduction(&self) -> f64 {
        1.0 - self.post_change_tree_tokens as f64 / self.post_ast_tokens as f64
    }
}

pub fn worked_example(rank_mode: RankMode) -> Result<WorkedExample> {
    let pre = parse_compilation_unit(FIG1_PRE)?;
    let post = parse_compilation_unit(FIG1_POST)?;
    let (pre_tree, post_tree) = change_trees(&pre, &post, rank_mode)?;
    Ok(WorkedExample {
        rank_mode,
        pre_ast_tokens: flatten(&pre).len(),
        post_ast_tokens: flatten(&post).len(),
        pre_change_tree_tokens: flatten_change_tree(&pre_tree).len(),
        post_change_tree_tokens: flatten_change_tree(&post_tree).len(),
        pre_change_tree_empty: pre_tree.is_empty(),
        trees: (pre_tree, post_tree),
    })
}
