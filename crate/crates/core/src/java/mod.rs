//! Bundled parser for a Java subset.
//!
//! Supported: class declarations with fields and methods; typed parameters;
//! local variable declarations, expression statements, `if`/`else`,
//! `while`, `for`, `return`, `break`, `continue` and blocks; method
//! invocations with receiver chains, field and array access, assignment,
//! binary, unary, update and ternary operators, object and array creation,
//! literals, identifiers and parenthesized expressions. Node kinds are listed
//! in `docs/node-kinds.txt`.

mod lexer;
mod parser;

use crate::ast::{Ast, AstNode};
use crate::error::ParseError;
use parser::Parser;

/// One method of a compilation unit: the unit of change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodUnit {
    /// `Class.method(arity)`.
    pub qualified_name: String,
    /// Rooted at `method_declaration`.
    pub ast: Ast,
    pub source_text: String,
}

impl MethodUnit {
    /// Method name without class and arity.
    pub fn name(&self) -> &str {
        method_name(self.ast.root()).unwrap_or("")
    }
}

/// Parses a compilation unit. A unit with a single top-level class is rooted
/// at its `class_declaration`; several classes are wrapped in `program`.
pub fn parse_compilation_unit(source: &str) -> Result<Ast, ParseError> {
    let mut p = Parser::new(source)?;
    let root = p.compilation_unit()?;
    p.expect_eof()?;
    Ok(Ast::new(root))
}

/// Parses a single method declaration without an enclosing class.
pub fn parse_method(source: &str) -> Result<Ast, ParseError> {
    let mut p = Parser::new(source)?;
    let root = p.method_declaration()?;
    p.expect_eof()?;
    Ok(Ast::new(root))
}

/// Parses a single expression.
pub fn parse_expression(source: &str) -> Result<Ast, ParseError> {
    let mut p = Parser::new(source)?;
    let root = p.expression()?;
    p.expect_eof()?;
    Ok(Ast::new(root))
}

/// Parses function-level source text: either a compilation unit or a bare
/// method declaration.
pub fn parse_source(source: &str) -> Result<Ast, ParseError> {
    match parse_compilation_unit(source) {
        Ok(unit) => Ok(unit),
        Err(unit_err) => match parse_method(source) {
            Ok(ast) => Ok(ast),
            // Report whichever attempt got further into the input.
            Err(method_err) => Err(
                if Parser::error_offset(&method_err, source) > Parser::error_offset(&unit_err, source) {
                    method_err
                } else {
                    unit_err
                },
            ),
        },
    }
}

/// All methods of function-level source text; see [`parse_source`].
pub fn parse_methods(source: &str) -> Result<Vec<MethodUnit>, ParseError> {
    Ok(extract_methods(&parse_source(source)?, source))
}

/// One [`MethodUnit`] per `method_declaration`, in document order.
///
/// `source` is the text the tree was parsed from; it supplies each method's
/// source text through node spans. Trees without spans (imported ones) get
/// empty source text.
pub fn extract_methods(ast: &Ast, source: &str) -> Vec<MethodUnit> {
    let mut out = Vec::new();
    collect_methods(ast.root(), None, source, &mut out);
    out
}

fn collect_methods<'a>(
    node: &'a AstNode,
    class: Option<&'a str>,
    source: &str,
    out: &mut Vec<MethodUnit>,
) {
    match node.kind() {
        "method_declaration" => out.push(method_unit(class, node.clone(), source)),
        "class_declaration" => {
            let name = node
                .children()
                .iter()
                .find(|c| c.kind() == "identifier")
                .and_then(|c| c.token());
            for child in node.children() {
                collect_methods(child, name, source, out);
            }
        }
        _ => {
            for child in node.children() {
                collect_methods(child, class, source, out);
            }
        }
    }
}

fn method_unit(class: Option<&str>, node: AstNode, source: &str) -> MethodUnit {
    let name = method_name(&node).unwrap_or("").to_owned();
    let arity = parameter_count(&node);
    let qualified_name = match class {
        Some(class) => format!("{class}.{name}({arity})"),
        None => format!("{name}({arity})"),
    };
    let source_text = node
        .span()
        .and_then(|s| source.get(s.start..s.end))
        .unwrap_or("")
        .to_owned();
    MethodUnit {
        qualified_name,
        ast: Ast::new(node),
        source_text,
    }
}

fn method_name(method: &AstNode) -> Option<&str> {
    method
        .children()
        .iter()
        .find(|c| c.kind() == "identifier")
        .and_then(|c| c.token())
}

/// Number of formal parameters of a `method_declaration` node.
pub fn parameter_count(method: &AstNode) -> usize {
    method
        .children()
        .iter()
        .find(|c| c.kind() == "formal_parameters")
        .map_or(0, |p| p.children().len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::flatten;

    use crate::demo::{FIG1_POST, FIG1_PRE};

    fn kinds(ast: &Ast) -> Vec<String> {
        flatten(ast).into_items()
    }

    #[test]
    fn minimal_class() {
        let ast = parse_compilation_unit("class A { void f() {} }").unwrap();
        assert_eq!(
            kinds(&ast),
            [
                "class_declaration",
                "identifier|A",
                "class_body",
                "method_declaration",
                "void_type|void",
                "identifier|f",
                "formal_parameters|()",
                "block|{}"
            ]
        );
        let methods: Vec<_> = ast
            .root()
            .preorder()
            .filter(|n| n.kind() == "method_declaration")
            .collect();
        assert_eq!(methods.len(), 1);
    }

    #[test]
    fn fig1_before_structure() {
        let ast = parse_compilation_unit(FIG1_PRE).unwrap();
        let count = |kind: &str| ast.root().preorder().filter(|n| n.kind() == kind).count();
        assert_eq!(count("method_declaration"), 1);
        assert_eq!(count("method_invocation"), 1);
        assert_eq!(count("expression_statement"), 1);
        assert!(kinds(&ast).contains(&"string_literal|Hello, World!".to_owned()));
    }

    #[test]
    fn fig1_after_methods() {
        let ast = parse_compilation_unit(FIG1_POST).unwrap();
        let methods = extract_methods(&ast, FIG1_POST);
        assert_eq!(methods.len(), 1);
        assert_eq!(methods[0].qualified_name, "HelloWorld.main(1)");
        let body = methods[0]
            .ast
            .root()
            .children()
            .iter()
            .find(|c| c.kind() == "block")
            .unwrap();
        assert_eq!(body.children().len(), 3);
        assert!(methods[0].source_text.starts_with("public static void main"));
        assert!(methods[0].source_text.ends_with('}'));
    }

    #[test]
    fn unclosed_parameter_list_is_reported_at_mismatch() {
        let err = parse_compilation_unit("class A { void f( {} }").unwrap_err();
        assert_eq!(err.diagnostic.line, 1);
        assert_eq!(err.diagnostic.column, 19);
        assert!(err.diagnostic.message.contains("'('"), "{}", err.diagnostic.message);
    }

    #[test]
    fn methods_in_document_order() {
        let src = "class A { void f() {} int g(int x) { return x; } }";
        let ast = parse_compilation_unit(src).unwrap();
        let names: Vec<_> = extract_methods(&ast, src)
            .into_iter()
            .map(|m| m.qualified_name)
            .collect();
        assert_eq!(names, ["A.f(0)", "A.g(1)"]);
    }

    #[test]
    fn class_without_methods() {
        let src = "class A { int x = 1; }";
        let ast = parse_compilation_unit(src).unwrap();
        assert!(extract_methods(&ast, src).is_empty());
    }

    #[test]
    fn several_classes_share_a_program_root() {
        let src = "class A { void f() {} } class B { void f() {} }";
        let ast = parse_compilation_unit(src).unwrap();
        assert_eq!(ast.root().kind(), "program");
        let names: Vec<_> = extract_methods(&ast, src)
            .into_iter()
            .map(|m| m.qualified_name)
            .collect();
        assert_eq!(names, ["A.f(0)", "B.f(0)"]);
    }

    #[test]
    fn bare_method_source() {
        let methods = parse_methods("int add(int a, int b) { return a + b; }").unwrap();
        assert_eq!(methods.len(), 1);
        assert_eq!(methods[0].qualified_name, "add(2)");
        assert_eq!(methods[0].ast.root().kind(), "method_declaration");
    }

    #[test]
    fn statements_and_expressions() {
        let src = "class C {
  static final int LIMIT = 10;
  int run(int[] xs, List<String> names) {
    int total = 0;
    for (int i = 0; i < xs.length; i++) {
      if (xs[i] > LIMIT && !skip(i)) { total += xs[i]; } else if (xs[i] == 0) { continue; } else { break; }
    }
    while (total > 100) total = total / 2;
    Foo f = new Foo(1, 'c', 2.5);
    int[] buf = new int[total];
    this.count = total == 0 ? -1 : total % 7;
    return total;
  }
}";
        let ast = parse_compilation_unit(src).unwrap();
        let flat = kinds(&ast);
        for expected in [
            "field_declaration",
            "for_statement",
            "update_expression",
            "array_access",
            "ternary_expression",
            "object_creation_expression",
            "array_creation_expression",
            "generic_type",
            "character_literal|c",
            "decimal_floating_point_literal|2.5",
            "operator|+=",
            "continue_statement|continue",
            "break_statement|break",
        ] {
            assert!(flat.iter().any(|k| k == expected), "missing {expected}");
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let ast = parse_expression("a + b * c - d").unwrap();
        // ((a + (b * c)) - d)
        assert_eq!(
            kinds(&ast),
            [
                "binary_expression",
                "binary_expression",
                "identifier|a",
                "operator|+",
                "binary_expression",
                "identifier|b",
                "operator|*",
                "identifier|c",
                "operator|-",
                "identifier|d"
            ]
        );
    }

    #[test]
    fn receiver_chain() {
        let ast = parse_expression("System.out.println(x)").unwrap();
        assert_eq!(
            kinds(&ast),
            [
                "method_invocation",
                "field_access",
                "identifier|System",
                "identifier|out",
                "identifier|println",
                "argument_list",
                "identifier|x"
            ]
        );
    }

    #[test]
    fn generic_type_is_not_a_comparison() {
        let ast = parse_method("void f() { List<String> xs = make(); a = b < c; }").unwrap();
        let flat = kinds(&ast);
        assert!(flat.contains(&"generic_type".to_owned()));
        assert!(flat.contains(&"operator|<".to_owned()));
    }

    #[test]
    fn errors() {
        assert!(parse_compilation_unit("").is_err());
        assert!(parse_compilation_unit("class A { void f() { x = ; } }").is_err());
        assert!(parse_compilation_unit("class A { void f() { try {} } }").is_err());
        assert!(parse_compilation_unit("class A { void f() { }").is_err());
        let err = parse_methods("void f() { g(1 }").unwrap_err();
        assert!(err.diagnostic.message.contains("'('"), "{}", err.diagnostic.message);
    }
}
