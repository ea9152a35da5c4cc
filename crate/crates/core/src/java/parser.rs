//! Recursive-descent parser for the supported Java subset.
//!
//! Structural punctuation (braces, parentheses, semicolons, dots) is not
//! emitted. A construct that would be left without children becomes a
//! terminal whose token is its fixed source text, e.g. `block|{}`.

use super::lexer::{tokenize, Tok, Token};
use crate::ast::{AstNode, Span};
use crate::error::{ParseDiagnostic, ParseError};

type PResult<T> = Result<T, ParseError>;

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%="];

const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["==", "!="],
    &["<", ">", "<=", ">="],
    &["+", "-"],
    &["*", "/", "%"],
];

const MODIFIERS: &[&str] = &[
    "public",
    "private",
    "protected",
    "static",
    "final",
    "abstract",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    prev_end: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> PResult<Self> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
            prev_end: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn start(&self) -> usize {
        self.toks[self.pos].span.start
    }

    fn span_from(&self, start: usize) -> Span {
        Span::new(start, self.prev_end.max(start))
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
            self.prev_end = t.span.end;
        }
        t
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn at_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Keyword(q) if *q == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            diagnostic: ParseDiagnostic {
                line: t.line,
                column: t.column,
                message: message.into(),
            },
        }
    }

    fn expected(&self, what: &str) -> ParseError {
        self.error_here(format!("expected {what}, found {}", self.peek().describe()))
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.expected(&format!("'{p}'")))
        }
    }

    fn expect_keyword(&mut self, k: &str) -> PResult<()> {
        if self.at_keyword(k) {
            self.advance();
            Ok(())
        } else {
            Err(self.expected(&format!("`{k}`")))
        }
    }

    fn position_of(&self, index: usize) -> String {
        let t = &self.toks[index];
        format!("{}:{}", t.line, t.column)
    }

    pub(crate) fn expect_eof(&self) -> PResult<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => Err(self.expected("end of input")),
        }
    }

    pub(crate) fn error_offset(err: &ParseError, src: &str) -> usize {
        // Monotone in source position; used only to compare diagnostics.
        let mut offset = 0;
        for (i, line) in src.split('\n').enumerate() {
            if i + 1 == err.diagnostic.line {
                return offset + err.diagnostic.column;
            }
            offset += line.chars().count() + 1;
        }
        offset
    }

    fn identifier(&mut self) -> PResult<AstNode> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let t = self.advance();
                Ok(AstNode::leaf("identifier", name).with_span(t.span))
            }
            _ => Err(self.expected("identifier")),
        }
    }

    // ---- declarations -------------------------------------------------

    pub(crate) fn compilation_unit(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let mut classes = Vec::new();
        while *self.peek() != Tok::Eof {
            classes.push(self.class_declaration()?);
        }
        match classes.len() {
            0 => Err(self.expected("class declaration")),
            1 => Ok(classes.pop().unwrap()),
            _ => Ok(AstNode::branch("program", classes).with_span(self.span_from(start))),
        }
    }

    fn modifiers(&mut self) -> Option<AstNode> {
        let start = self.start();
        let mut mods = Vec::new();
        while let Tok::Keyword(k) = self.peek() {
            if !MODIFIERS.contains(k) {
                break;
            }
            let k = *k;
            let t = self.advance();
            mods.push(AstNode::leaf("modifier", k).with_span(t.span));
        }
        if mods.is_empty() {
            None
        } else {
            Some(AstNode::branch("modifiers", mods).with_span(self.span_from(start)))
        }
    }

    fn class_declaration(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let mut children = Vec::new();
        children.extend(self.modifiers());
        self.expect_keyword("class")?;
        children.push(self.identifier()?);
        children.push(self.class_body()?);
        Ok(AstNode::branch("class_declaration", children).with_span(self.span_from(start)))
    }

    fn class_body(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let open = self.pos;
        self.expect_punct("{")?;
        let mut members = Vec::new();
        loop {
            if self.eat_punct("}") {
                break;
            }
            if *self.peek() == Tok::Eof {
                return Err(self.error_here(format!(
                    "expected '}}' to close class body opened at {}",
                    self.position_of(open)
                )));
            }
            members.push(self.member()?);
        }
        let span = self.span_from(start);
        Ok(if members.is_empty() {
            AstNode::leaf("class_body", "{}").with_span(span)
        } else {
            AstNode::branch("class_body", members).with_span(span)
        })
    }

    fn member(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let mods = self.modifiers();
        let ty = self.type_()?;
        let name = self.identifier()?;
        if self.at_punct("(") {
            self.method_rest(start, mods, ty, name)
        } else {
            let mut children = Vec::new();
            children.extend(mods);
            children.push(ty);
            children.push(self.declarator_rest(name)?);
            while self.eat_punct(",") {
                let name = self.identifier()?;
                children.push(self.declarator_rest(name)?);
            }
            self.expect_punct(";")?;
            Ok(AstNode::branch("field_declaration", children).with_span(self.span_from(start)))
        }
    }

    /// Bare method declaration, used for function-level sources.
    pub(crate) fn method_declaration(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let mods = self.modifiers();
        let ty = self.type_()?;
        let name = self.identifier()?;
        if !self.at_punct("(") {
            return Err(self.expected("'('"));
        }
        self.method_rest(start, mods, ty, name)
    }

    fn method_rest(
        &mut self,
        start: usize,
        mods: Option<AstNode>,
        ty: AstNode,
        name: AstNode,
    ) -> PResult<AstNode> {
        let mut children = Vec::new();
        children.extend(mods);
        children.push(ty);
        children.push(name);
        children.push(self.formal_parameters()?);
        children.push(self.block()?);
        Ok(AstNode::branch("method_declaration", children).with_span(self.span_from(start)))
    }

    fn formal_parameters(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let open = self.pos;
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.eat_punct(")") {
            loop {
                if !self.starts_type() && !self.at_keyword("final") {
                    return Err(self.error_here(format!(
                        "expected parameter type or ')' to close '(' at {}, found {}",
                        self.position_of(open),
                        self.peek().describe()
                    )));
                }
                params.push(self.formal_parameter()?);
                if self.eat_punct(")") {
                    break;
                }
                if !self.eat_punct(",") {
                    return Err(self.error_here(format!(
                        "expected ',' or ')' to close '(' at {}, found {}",
                        self.position_of(open),
                        self.peek().describe()
                    )));
                }
            }
        }
        let span = self.span_from(start);
        Ok(if params.is_empty() {
            AstNode::leaf("formal_parameters", "()").with_span(span)
        } else {
            AstNode::branch("formal_parameters", params).with_span(span)
        })
    }

    fn formal_parameter(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let mut children = Vec::new();
        children.extend(self.modifiers());
        children.push(self.type_()?);
        children.push(self.identifier()?);
        Ok(AstNode::branch("formal_parameter", children).with_span(self.span_from(start)))
    }

    // ---- types --------------------------------------------------------

    fn starts_type(&self) -> bool {
        match self.peek() {
            Tok::Ident(_) => true,
            Tok::Keyword(k) => matches!(
                *k,
                "void" | "int" | "long" | "short" | "byte" | "char" | "boolean" | "float" | "double"
            ),
            _ => false,
        }
    }

    fn type_(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let base = match self.peek().clone() {
            Tok::Keyword(k) => {
                let kind = match k {
                    "void" => "void_type",
                    "int" | "long" | "short" | "byte" | "char" => "integral_type",
                    "float" | "double" => "floating_point_type",
                    "boolean" => "boolean_type",
                    _ => return Err(self.expected("type")),
                };
                let t = self.advance();
                AstNode::leaf(kind, k).with_span(t.span)
            }
            Tok::Ident(_) => self.class_type()?,
            _ => return Err(self.expected("type")),
        };
        self.dimensions(start, base, "array_type")
    }

    fn class_type(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let mut parts = vec![self.type_identifier()?];
        while self.at_punct(".") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.advance();
            parts.push(self.type_identifier()?);
        }
        let mut ty = if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            AstNode::branch("scoped_type_identifier", parts).with_span(self.span_from(start))
        };
        if self.at_punct("<") {
            let args_start = self.start();
            self.advance();
            let mut args = vec![self.type_()?];
            while self.eat_punct(",") {
                args.push(self.type_()?);
            }
            self.expect_punct(">")?;
            let args = AstNode::branch("type_arguments", args).with_span(self.span_from(args_start));
            ty = AstNode::branch("generic_type", vec![ty, args]).with_span(self.span_from(start));
        }
        Ok(ty)
    }

    fn type_identifier(&mut self) -> PResult<AstNode> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                let t = self.advance();
                Ok(AstNode::leaf("type_identifier", name).with_span(t.span))
            }
            _ => Err(self.expected("type name")),
        }
    }

    /// Wraps `base` in `kind` when followed by one or more `[]` pairs.
    fn dimensions(&mut self, start: usize, base: AstNode, kind: &str) -> PResult<AstNode> {
        let dims_start = self.start();
        let mut dims = String::new();
        while self.at_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.advance();
            self.advance();
            dims.push_str("[]");
        }
        if dims.is_empty() {
            return Ok(base);
        }
        let dims = AstNode::leaf("dimensions", dims).with_span(self.span_from(dims_start));
        Ok(AstNode::branch(kind, vec![base, dims]).with_span(self.span_from(start)))
    }

    // ---- statements ---------------------------------------------------

    fn block(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let open = self.pos;
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        loop {
            if self.eat_punct("}") {
                break;
            }
            if *self.peek() == Tok::Eof {
                return Err(self.error_here(format!(
                    "expected '}}' to close block opened at {}",
                    self.position_of(open)
                )));
            }
            stmts.push(self.statement()?);
        }
        let span = self.span_from(start);
        Ok(if stmts.is_empty() {
            AstNode::leaf("block", "{}").with_span(span)
        } else {
            AstNode::branch("block", stmts).with_span(span)
        })
    }

    fn statement(&mut self) -> PResult<AstNode> {
        let start = self.start();
        match self.peek().clone() {
            Tok::Punct("{") => self.block(),
            Tok::Keyword("if") => {
                self.advance();
                let cond = self.parenthesized()?;
                let then = self.statement()?;
                let mut children = vec![cond, then];
                if self.at_keyword("else") {
                    self.advance();
                    children.push(self.statement()?);
                }
                Ok(AstNode::branch("if_statement", children).with_span(self.span_from(start)))
            }
            Tok::Keyword("while") => {
                self.advance();
                let cond = self.parenthesized()?;
                let body = self.statement()?;
                Ok(AstNode::branch("while_statement", vec![cond, body])
                    .with_span(self.span_from(start)))
            }
            Tok::Keyword("for") => self.for_statement(),
            Tok::Keyword("return") => {
                let t = self.advance();
                if self.eat_punct(";") {
                    return Ok(AstNode::leaf("return_statement", "return")
                        .with_span(Span::new(t.span.start, self.prev_end)));
                }
                let value = self.expression()?;
                self.expect_punct(";")?;
                Ok(AstNode::branch("return_statement", vec![value])
                    .with_span(self.span_from(start)))
            }
            Tok::Keyword(k @ ("break" | "continue")) => {
                self.advance();
                self.expect_punct(";")?;
                let kind = if k == "break" {
                    "break_statement"
                } else {
                    "continue_statement"
                };
                Ok(AstNode::leaf(kind, k).with_span(self.span_from(start)))
            }
            _ => {
                if let Some(decl) = self.try_local_variable_declaration()? {
                    self.expect_punct(";")?;
                    return Ok(decl.with_span(self.span_from(start)));
                }
                let expr = self.expression()?;
                self.expect_punct(";")?;
                Ok(AstNode::branch("expression_statement", vec![expr])
                    .with_span(self.span_from(start)))
            }
        }
    }

    fn parenthesized(&mut self) -> PResult<AstNode> {
        let start = self.start();
        self.expect_punct("(")?;
        let inner = self.expression()?;
        self.expect_punct(")")?;
        Ok(AstNode::branch("parenthesized_expression", vec![inner]).with_span(self.span_from(start)))
    }

    /// A declaration without its terminating `;`, or `None` when the input
    /// at this point is not a declaration.
    fn try_local_variable_declaration(&mut self) -> PResult<Option<AstNode>> {
        let start = self.start();
        let definite = self.at_keyword("final") || (self.starts_type() && !matches!(self.peek(), Tok::Ident(_)));
        if !definite {
            if !matches!(self.peek(), Tok::Ident(_)) {
                return Ok(None);
            }
            let save = (self.pos, self.prev_end);
            let is_decl = self.type_().is_ok() && matches!(self.peek(), Tok::Ident(_));
            self.pos = save.0;
            self.prev_end = save.1;
            if !is_decl {
                return Ok(None);
            }
        }
        let mut children = Vec::new();
        children.extend(self.modifiers());
        children.push(self.type_()?);
        let name = self.identifier()?;
        children.push(self.declarator_rest(name)?);
        while self.eat_punct(",") {
            let name = self.identifier()?;
            children.push(self.declarator_rest(name)?);
        }
        Ok(Some(
            AstNode::branch("local_variable_declaration", children).with_span(self.span_from(start)),
        ))
    }

    fn declarator_rest(&mut self, name: AstNode) -> PResult<AstNode> {
        let start = name.span().map_or(self.start(), |s| s.start);
        let mut children = vec![name];
        if self.eat_punct("=") {
            children.push(self.expression()?);
        }
        Ok(AstNode::branch("variable_declarator", children).with_span(self.span_from(start)))
    }

    fn for_statement(&mut self) -> PResult<AstNode> {
        let start = self.start();
        self.advance();
        self.expect_punct("(")?;
        let mut children = Vec::new();
        if !self.at_punct(";") {
            match self.try_local_variable_declaration()? {
                Some(decl) => children.push(decl),
                None => {
                    children.push(self.expression()?);
                    while self.eat_punct(",") {
                        children.push(self.expression()?);
                    }
                }
            }
        }
        self.expect_punct(";")?;
        if !self.at_punct(";") {
            children.push(self.expression()?);
        }
        self.expect_punct(";")?;
        if !self.at_punct(")") {
            children.push(self.expression()?);
            while self.eat_punct(",") {
                children.push(self.expression()?);
            }
        }
        self.expect_punct(")")?;
        children.push(self.statement()?);
        Ok(AstNode::branch("for_statement", children).with_span(self.span_from(start)))
    }

    // ---- expressions --------------------------------------------------

    fn operator(&mut self) -> AstNode {
        let t = self.advance();
        let Tok::Punct(p) = t.tok else {
            unreachable!("operator() called on a non-punctuation token")
        };
        AstNode::leaf("operator", p).with_span(t.span)
    }

    pub(crate) fn expression(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let lhs = self.ternary()?;
        if let Tok::Punct(p) = self.peek() {
            if ASSIGN_OPS.contains(p) {
                let op = self.operator();
                let rhs = self.expression()?;
                return Ok(AstNode::branch("assignment_expression", vec![lhs, op, rhs])
                    .with_span(self.span_from(start)));
            }
        }
        Ok(lhs)
    }

    fn ternary(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let cond = self.binary(0)?;
        if !self.eat_punct("?") {
            return Ok(cond);
        }
        let then = self.expression()?;
        self.expect_punct(":")?;
        let otherwise = self.ternary()?;
        Ok(AstNode::branch("ternary_expression", vec![cond, then, otherwise])
            .with_span(self.span_from(start)))
    }

    fn binary(&mut self, level: usize) -> PResult<AstNode> {
        if level == BINARY_LEVELS.len() {
            return self.unary();
        }
        let start = self.start();
        let mut lhs = self.binary(level + 1)?;
        while let Tok::Punct(p) = self.peek() {
            if !BINARY_LEVELS[level].contains(p) {
                break;
            }
            let op = self.operator();
            let rhs = self.binary(level + 1)?;
            lhs = AstNode::branch("binary_expression", vec![lhs, op, rhs])
                .with_span(self.span_from(start));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<AstNode> {
        let start = self.start();
        match self.peek() {
            Tok::Punct("!" | "-" | "+") => {
                let op = self.operator();
                let operand = self.unary()?;
                Ok(AstNode::branch("unary_expression", vec![op, operand])
                    .with_span(self.span_from(start)))
            }
            Tok::Punct("++" | "--") => {
                let op = self.operator();
                let operand = self.unary()?;
                Ok(AstNode::branch("update_expression", vec![op, operand])
                    .with_span(self.span_from(start)))
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let mut expr = self.primary()?;
        loop {
            if self.eat_punct(".") {
                let name = self.identifier()?;
                expr = if self.at_punct("(") {
                    let args = self.argument_list()?;
                    AstNode::branch("method_invocation", vec![expr, name, args])
                } else {
                    AstNode::branch("field_access", vec![expr, name])
                }
                .with_span(self.span_from(start));
            } else if self.at_punct("[") {
                self.advance();
                let index = self.expression()?;
                self.expect_punct("]")?;
                expr = AstNode::branch("array_access", vec![expr, index])
                    .with_span(self.span_from(start));
            } else if matches!(self.peek(), Tok::Punct("++" | "--")) {
                let op = self.operator();
                expr = AstNode::branch("update_expression", vec![expr, op])
                    .with_span(self.span_from(start));
            } else {
                return Ok(expr);
            }
        }
    }

    fn primary(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let leaf = |kind: &str, text: String, t: Token| AstNode::leaf(kind, text).with_span(t.span);
        match self.peek().clone() {
            Tok::Int(s) => Ok(leaf("decimal_integer_literal", s, self.advance())),
            Tok::HexInt(s) => Ok(leaf("hex_integer_literal", s, self.advance())),
            Tok::Float(s) => Ok(leaf("decimal_floating_point_literal", s, self.advance())),
            Tok::Str(s) => Ok(leaf("string_literal", s, self.advance())),
            Tok::Char(s) => Ok(leaf("character_literal", s, self.advance())),
            Tok::Keyword(k @ ("true" | "false")) => {
                Ok(leaf("boolean_literal", k.to_owned(), self.advance()))
            }
            Tok::Keyword("null") => Ok(leaf("null_literal", "null".to_owned(), self.advance())),
            Tok::Keyword("this") => Ok(leaf("this", "this".to_owned(), self.advance())),
            Tok::Keyword("new") => {
                self.advance();
                let ty = self.class_type_or_primitive()?;
                if self.at_punct("[") {
                    let dims_start = self.start();
                    self.advance();
                    let size = self.expression()?;
                    self.expect_punct("]")?;
                    let dims = AstNode::branch("dimensions_expr", vec![size])
                        .with_span(self.span_from(dims_start));
                    return Ok(AstNode::branch("array_creation_expression", vec![ty, dims])
                        .with_span(self.span_from(start)));
                }
                let args = self.argument_list()?;
                Ok(AstNode::branch("object_creation_expression", vec![ty, args])
                    .with_span(self.span_from(start)))
            }
            Tok::Ident(_) => {
                let name = self.identifier()?;
                if self.at_punct("(") {
                    let args = self.argument_list()?;
                    return Ok(AstNode::branch("method_invocation", vec![name, args])
                        .with_span(self.span_from(start)));
                }
                Ok(name)
            }
            Tok::Punct("(") => self.parenthesized(),
            _ => Err(self.expected("expression")),
        }
    }

    fn class_type_or_primitive(&mut self) -> PResult<AstNode> {
        match self.peek() {
            Tok::Ident(_) => self.class_type(),
            Tok::Keyword(_) if self.starts_type() => {
                let start = self.start();
                let base = self.type_()?;
                self.dimensions(start, base, "array_type")
            }
            _ => Err(self.expected("type")),
        }
    }

    fn argument_list(&mut self) -> PResult<AstNode> {
        let start = self.start();
        let open = self.pos;
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.eat_punct(")") {
            loop {
                args.push(self.expression()?);
                if self.eat_punct(")") {
                    break;
                }
                if !self.eat_punct(",") {
                    return Err(self.error_here(format!(
                        "expected ',' or ')' to close '(' at {}, found {}",
                        self.position_of(open),
                        self.peek().describe()
                    )));
                }
            }
        }
        let span = self.span_from(start);
        Ok(if args.is_empty() {
            AstNode::leaf("argument_list", "()").with_span(span)
        } else {
            AstNode::branch("argument_list", args).with_span(span)
        })
    }
}
