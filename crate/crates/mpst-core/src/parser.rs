//! Parser for the extended Scribble-style protocol language.
//!
//! The surface grammar:
//!
//! ```text
//! protocol := "global" "protocol" IDENT "(" roleDecl ("," roleDecl)* ")" "{" stmt* "}"
//! roleDecl := ["reliable"] "role" IDENT
//! stmt     := IDENT ["(" IDENT ")"] "from" IDENT "to" IDENT ";"
//!           | "choice" "at" IDENT block ("or" block)*
//!           | "rec" IDENT block
//!           | "continue" IDENT ";"
//! block    := "{" stmt* "}"
//! ```
//!
//! Two extensions support crash handling: the reserved label `crash` marks a
//! crash handling branch (it must be the first interaction of a choice
//! branch and carries no payload), and the `reliable` keyword marks roles
//! assumed never to crash.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::global::{GBranch, GlobalType};
use crate::ident::{Label, RecVar, Role, Sort};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleDecl {
    pub name: Role,
    pub reliable: bool,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stmt {
    Interaction {
        label: Label,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        payload: Option<Sort>,
        from: Role,
        to: Role,
        pos: Pos,
    },
    Choice {
        at: Role,
        blocks: Vec<Block>,
        pos: Pos,
    },
    Rec {
        var: RecVar,
        body: Block,
        pos: Pos,
    },
    Continue {
        var: RecVar,
        pos: Pos,
    },
}

impl Stmt {
    fn pos(&self) -> Pos {
        match self {
            Stmt::Interaction { pos, .. }
            | Stmt::Choice { pos, .. }
            | Stmt::Rec { pos, .. }
            | Stmt::Continue { pos, .. } => *pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolDecl {
    pub name: String,
    pub roles: Vec<RoleDecl>,
    pub body: Block,
}

impl ProtocolDecl {
    pub fn reliable_set(&self) -> BTreeSet<Role> {
        self.roles.iter().filter(|r| r.reliable).map(|r| r.name.clone()).collect()
    }

    pub fn role_set(&self) -> BTreeSet<Role> {
        self.roles.iter().map(|r| r.name.clone()).collect()
    }
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: duplicate role {role}")]
    DuplicateRole { pos: Pos, role: Role },
    #[error("a protocol needs at least two roles")]
    TooFewRoles,
    #[error("{pos}: role {role} is not declared")]
    UndeclaredRole { pos: Pos, role: Role },
    #[error("{pos}: `continue {var}` is not bound by an enclosing `rec {var}`")]
    UnboundContinue { pos: Pos, var: RecVar },
    #[error("{pos}: the crash pseudo-label carries no payload")]
    CrashPayload { pos: Pos },
    #[error("{pos}: `crash` may only start a crash handling branch of a choice")]
    CrashOutsideBranch { pos: Pos },
    #[error("{pos}: choice branch is empty")]
    EmptyBranch { pos: Pos },
    #[error("{pos}: choice branch must begin with an interaction")]
    BranchNotInteraction { pos: Pos },
    #[error("{pos}: branch sender {found} differs from the choice subject {expected}")]
    WrongChoiceSender { pos: Pos, expected: Role, found: Role },
    #[error("{pos}: mixed receivers in choice: {first} vs {second}")]
    MixedReceivers { pos: Pos, first: Role, second: Role },
    #[error("{pos}: unreachable statements after `{after}`")]
    UnreachableStatements { pos: Pos, after: String },
}

#[derive(Clone, Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConvertError {
    #[error("{pos}: duplicate label {label} in one transmission")]
    DuplicateLabel { pos: Pos, label: Label },
    #[error("{pos}: self-reception: {role} sends to itself")]
    SelfSend { pos: Pos, role: Role },
    #[error("{pos}: crash cannot be the only label of a transmission")]
    CrashSoleLabel { pos: Pos },
    #[error("recursion `{var}` is not contractive")]
    NotContractive { var: RecVar },
}

// ---------------------------------------------------------------------------
// Lexing
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let mut toks = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = src.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '/' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'/') {
                    for c in chars.by_ref() {
                        if c == '\n' {
                            line += 1;
                            col = 1;
                            break;
                        }
                    }
                } else {
                    return Err(ParseError::Syntax { pos, msg: "stray `/`".into() });
                }
            }
            '(' | ')' | '{' | '}' | ',' | ';' => {
                chars.next();
                col += 1;
                toks.push((
                    match c {
                        '(' => Tok::LParen,
                        ')' => Tok::RParen,
                        '{' => Tok::LBrace,
                        '}' => Tok::RBrace,
                        ',' => Tok::Comma,
                        _ => Tok::Semi,
                    },
                    pos,
                ));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Ident(ident), pos));
            }
            other => {
                return Err(ParseError::Syntax {
                    pos,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, Pos)> {
        self.toks.get(self.at)
    }

    fn pos(&self) -> Pos {
        self.peek().map(|(_, p)| *p).unwrap_or(Pos {
            line: self.toks.last().map(|(_, p)| p.line).unwrap_or(1),
            col: self.toks.last().map(|(_, p)| p.col + 1).unwrap_or(1),
        })
    }

    fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::Syntax { pos: self.pos(), msg: msg.into() }
    }

    fn next(&mut self) -> Result<(Tok, Pos), ParseError> {
        let t = self.toks.get(self.at).cloned().ok_or_else(|| self.error("unexpected end of input"))?;
        self.at += 1;
        Ok(t)
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, ParseError> {
        let (t, p) = self.next()?;
        if t == tok {
            Ok(p)
        } else {
            Err(ParseError::Syntax { pos: p, msg: format!("expected {tok}, found {t}") })
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Pos, ParseError> {
        let (t, p) = self.next()?;
        match t {
            Tok::Ident(s) if s == kw => Ok(p),
            other => Err(ParseError::Syntax { pos: p, msg: format!("expected `{kw}`, found {other}") }),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        let (t, p) = self.next()?;
        match t {
            Tok::Ident(s) => Ok((s, p)),
            other => Err(ParseError::Syntax { pos: p, msg: format!("expected {what}, found {other}") }),
        }
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some((Tok::Ident(s), _)) if s == kw)
    }

    fn protocol(&mut self) -> Result<ProtocolDecl, ParseError> {
        self.expect_kw("global")?;
        self.expect_kw("protocol")?;
        let (name, _) = self.ident("protocol name")?;
        self.expect(Tok::LParen)?;
        let mut roles = Vec::new();
        loop {
            let reliable = if self.peek_kw("reliable") {
                self.next()?;
                true
            } else {
                false
            };
            self.expect_kw("role")?;
            let (role, pos) = self.ident("role name")?;
            roles.push(RoleDecl { name: Role::new(role), reliable, pos });
            match self.next()? {
                (Tok::Comma, _) => continue,
                (Tok::RParen, _) => break,
                (other, p) => {
                    return Err(ParseError::Syntax {
                        pos: p,
                        msg: format!("expected `,` or `)`, found {other}"),
                    })
                }
            }
        }
        let body = self.block()?;
        if let Some((t, p)) = self.peek() {
            return Err(ParseError::Syntax { pos: *p, msg: format!("trailing input: {t}") });
        }
        Ok(ProtocolDecl { name, roles, body })
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        loop {
            if matches!(self.peek(), Some((Tok::RBrace, _))) {
                self.next()?;
                break;
            }
            stmts.push(self.stmt()?);
        }
        Ok(Block { stmts })
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.peek_kw("choice") {
            let pos = self.next()?.1;
            self.expect_kw("at")?;
            let (at, _) = self.ident("role name")?;
            let mut blocks = vec![self.block()?];
            while self.peek_kw("or") {
                self.next()?;
                blocks.push(self.block()?);
            }
            return Ok(Stmt::Choice { at: Role::new(at), blocks, pos });
        }
        if self.peek_kw("rec") {
            let pos = self.next()?.1;
            let (var, _) = self.ident("recursion variable")?;
            let body = self.block()?;
            return Ok(Stmt::Rec { var: RecVar::new(var), body, pos });
        }
        if self.peek_kw("continue") {
            let pos = self.next()?.1;
            let (var, _) = self.ident("recursion variable")?;
            self.expect(Tok::Semi)?;
            return Ok(Stmt::Continue { var: RecVar::new(var), pos });
        }
        // interaction: label [ "(" sort ")" ] "from" role "to" role ";"
        let (label, pos) = self.ident("message label")?;
        let payload = if matches!(self.peek(), Some((Tok::LParen, _))) {
            self.next()?;
            let (sort, _) = self.ident("payload sort")?;
            self.expect(Tok::RParen)?;
            Some(Sort::new(sort))
        } else {
            None
        };
        self.expect_kw("from")?;
        let (from, _) = self.ident("role name")?;
        self.expect_kw("to")?;
        let (to, _) = self.ident("role name")?;
        self.expect(Tok::Semi)?;
        Ok(Stmt::Interaction {
            label: Label::new(label),
            payload,
            from: Role::new(from),
            to: Role::new(to),
            pos,
        })
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

fn validate(decl: &ProtocolDecl) -> Result<(), ParseError> {
    let mut seen = BTreeSet::new();
    for rd in &decl.roles {
        if !seen.insert(rd.name.clone()) {
            return Err(ParseError::DuplicateRole { pos: rd.pos, role: rd.name.clone() });
        }
    }
    if decl.roles.len() < 2 {
        return Err(ParseError::TooFewRoles);
    }
    let declared = decl.role_set();
    validate_block(&decl.body, &declared, &mut Vec::new())
}

fn validate_block(block: &Block, declared: &BTreeSet<Role>, recs: &mut Vec<RecVar>) -> Result<(), ParseError> {
    for (i, stmt) in block.stmts.iter().enumerate() {
        let last = i + 1 == block.stmts.len();
        match stmt {
            Stmt::Interaction { label, payload, from, to, pos } => {
                if label.is_crash() {
                    // A crash interaction is only meaningful as a branch
                    // header; branch headers are validated in Choice below
                    // and never reach this point.
                    if payload.is_some() {
                        return Err(ParseError::CrashPayload { pos: *pos });
                    }
                    return Err(ParseError::CrashOutsideBranch { pos: *pos });
                }
                for role in [from, to] {
                    if !declared.contains(role) {
                        return Err(ParseError::UndeclaredRole { pos: *pos, role: role.clone() });
                    }
                }
            }
            Stmt::Choice { at, blocks, pos } => {
                if !last {
                    return Err(ParseError::UnreachableStatements {
                        pos: block.stmts[i + 1].pos(),
                        after: "choice".into(),
                    });
                }
                if !declared.contains(at) {
                    return Err(ParseError::UndeclaredRole { pos: *pos, role: at.clone() });
                }
                let mut receiver: Option<Role> = None;
                for b in blocks {
                    let head = b.stmts.first().ok_or(ParseError::EmptyBranch { pos: *pos })?;
                    let Stmt::Interaction { label, payload, from, to, pos: hpos } = head else {
                        return Err(ParseError::BranchNotInteraction { pos: head.pos() });
                    };
                    if label.is_crash() && payload.is_some() {
                        return Err(ParseError::CrashPayload { pos: *hpos });
                    }
                    if from != at {
                        return Err(ParseError::WrongChoiceSender {
                            pos: *hpos,
                            expected: at.clone(),
                            found: from.clone(),
                        });
                    }
                    match &receiver {
                        None => receiver = Some(to.clone()),
                        Some(first) if first != to => {
                            return Err(ParseError::MixedReceivers {
                                pos: *hpos,
                                first: first.clone(),
                                second: to.clone(),
                            });
                        }
                        _ => {}
                    }
                    if !declared.contains(to) {
                        return Err(ParseError::UndeclaredRole { pos: *hpos, role: to.clone() });
                    }
                    // Validate the branch tail (everything after the header).
                    let tail = Block { stmts: b.stmts[1..].to_vec() };
                    validate_block(&tail, declared, recs)?;
                }
            }
            Stmt::Rec { var, body, pos } => {
                if !last {
                    return Err(ParseError::UnreachableStatements {
                        pos: block.stmts[i + 1].pos(),
                        after: "rec".into(),
                    });
                }
                let _ = pos;
                recs.push(var.clone());
                let r = validate_block(body, declared, recs);
                recs.pop();
                r?;
            }
            Stmt::Continue { var, pos } => {
                if !recs.contains(var) {
                    return Err(ParseError::UnboundContinue { pos: *pos, var: var.clone() });
                }
                if !last {
                    return Err(ParseError::UnreachableStatements {
                        pos: block.stmts[i + 1].pos(),
                        after: "continue".into(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Parse and validate a protocol source file.
pub fn parse_protocol(source: &str) -> Result<ProtocolDecl, ParseError> {
    let toks = lex(source)?;
    let mut parser = Parser { toks, at: 0 };
    let decl = parser.protocol()?;
    validate(&decl)?;
    Ok(decl)
}

// ---------------------------------------------------------------------------
// Conversion to global types
// ---------------------------------------------------------------------------

/// Convert a validated protocol declaration into a global type plus the set
/// of reliable roles.
pub fn to_global_type(decl: &ProtocolDecl) -> Result<(GlobalType, BTreeSet<Role>), ConvertError> {
    let g = convert_block(&decl.body.stmts)?;
    debug_assert!(g.is_design_time());
    Ok((g, decl.reliable_set()))
}

fn convert_block(stmts: &[Stmt]) -> Result<GlobalType, ConvertError> {
    match stmts.split_first() {
        None => Ok(GlobalType::End),
        Some((Stmt::Interaction { label, payload, from, to, pos }, rest)) => {
            if from == to {
                return Err(ConvertError::SelfSend { pos: *pos, role: from.clone() });
            }
            if label.is_crash() {
                // Validation rejects this earlier; a lone crash statement
                // would otherwise become a sole-label transmission.
                return Err(ConvertError::CrashSoleLabel { pos: *pos });
            }
            Ok(GlobalType::comm(
                from.clone(),
                to.clone(),
                vec![GBranch::new(label.clone(), payload.clone(), convert_block(rest)?)],
            ))
        }
        Some((Stmt::Choice { at, blocks, pos }, _)) => {
            let mut branches = Vec::new();
            let mut receiver = None;
            let mut labels = BTreeSet::new();
            for b in blocks {
                let Some((Stmt::Interaction { label, payload, from, to, pos: hpos }, tail)) =
                    b.stmts.split_first()
                else {
                    unreachable!("validated: branches start with an interaction");
                };
                if from == to {
                    return Err(ConvertError::SelfSend { pos: *hpos, role: from.clone() });
                }
                receiver.get_or_insert_with(|| to.clone());
                if !labels.insert(label.clone()) {
                    return Err(ConvertError::DuplicateLabel { pos: *hpos, label: label.clone() });
                }
                branches.push(GBranch::new(label.clone(), payload.clone(), convert_block(tail)?));
            }
            if labels.len() == 1 && labels.iter().next().unwrap().is_crash() {
                return Err(ConvertError::CrashSoleLabel { pos: *pos });
            }
            Ok(GlobalType::comm(at.clone(), receiver.expect("non-empty choice"), branches))
        }
        Some((Stmt::Rec { var, body, .. }, _)) => {
            let g = GlobalType::rec(var.clone(), convert_block(&body.stmts)?);
            if !g.is_contractive() {
                return Err(ConvertError::NotContractive { var: var.clone() });
            }
            Ok(g)
        }
        Some((Stmt::Continue { var, .. }, _)) => Ok(GlobalType::var(var.clone())),
    }
}

// ---------------------------------------------------------------------------
// Rendering back to protocol source
// ---------------------------------------------------------------------------

/// Render a design-time global type back to protocol source. Re-parsing the
/// result yields a structurally equal global type.
pub fn to_scribble(name: &str, roles: &[(Role, bool)], g: &GlobalType) -> String {
    let mut out = String::new();
    out.push_str(&format!("global protocol {name}("));
    for (i, (role, reliable)) in roles.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        if *reliable {
            out.push_str("reliable ");
        }
        out.push_str(&format!("role {role}"));
    }
    out.push_str(") {\n");
    render_type(g, 1, &mut out);
    out.push_str("}\n");
    out
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn render_type(g: &GlobalType, depth: usize, out: &mut String) {
    match g {
        GlobalType::Comm { sender, receiver, branches, .. } if branches.len() == 1 => {
            let b = &branches[0];
            indent(depth, out);
            out.push_str(b.label.as_str());
            if let Some(p) = &b.payload {
                out.push_str(&format!("({p})"));
            }
            out.push_str(&format!(" from {sender} to {receiver};\n"));
            render_type(&b.cont, depth, out);
        }
        GlobalType::Comm { sender, receiver, branches, .. } => {
            indent(depth, out);
            out.push_str(&format!("choice at {sender} "));
            for (i, b) in branches.iter().enumerate() {
                if i > 0 {
                    indent(depth, out);
                    out.push_str("or ");
                }
                out.push_str("{\n");
                indent(depth + 1, out);
                out.push_str(b.label.as_str());
                if let Some(p) = &b.payload {
                    out.push_str(&format!("({p})"));
                }
                out.push_str(&format!(" from {sender} to {receiver};\n"));
                render_type(&b.cont, depth + 1, out);
                indent(depth, out);
                out.push_str("}\n");
            }
        }
        GlobalType::Transit { .. } => {
            unreachable!("runtime constructs cannot be rendered as protocol source")
        }
        GlobalType::Rec { var, body } => {
            indent(depth, out);
            out.push_str(&format!("rec {var} {{\n"));
            render_type(body, depth + 1, out);
            indent(depth, out);
            out.push_str("}\n");
        }
        GlobalType::Var(v) => {
            indent(depth, out);
            out.push_str(&format!("continue {v};\n"));
        }
        GlobalType::End => {}
    }
}

/// Serialize the AST as JSON (the `--emit ast-json` surface).
pub fn ast_json(decl: &ProtocolDecl) -> serde_json::Value {
    serde_json::to_value(decl).expect("AST serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMPLE_LOGGER: &str = r#"
        global protocol SimpleLogger(role U, reliable role L)
        { rec t0 { choice at U { write(String) from U to L;
                                 continue t0;               }
                            or { read from U to L;
                                 report(Log) from L to U;
                                 continue t0;               }
                            or { crash from U to L;         } } }
    "#;

    #[test]
    fn parses_simple_logger() {
        let decl = parse_protocol(SIMPLE_LOGGER).unwrap();
        assert_eq!(decl.name, "SimpleLogger");
        assert_eq!(decl.roles.len(), 2);
        assert!(!decl.roles[0].reliable);
        assert!(decl.roles[1].reliable);
        assert_eq!(decl.reliable_set(), [Role::new("L")].into_iter().collect());

        let (g, reliable) = to_global_type(&decl).unwrap();
        assert_eq!(reliable, [Role::new("L")].into_iter().collect());
        // mu t0. U->L{write(String).t0, read. L->U:report(Log).t0, crash.end}
        let expected = GlobalType::rec(
            "t0",
            GlobalType::comm(
                "U",
                "L",
                vec![
                    GBranch::new("write", Some(Sort::new("String")), GlobalType::var("t0")),
                    GBranch::new(
                        "read",
                        None,
                        GlobalType::comm(
                            "L",
                            "U",
                            vec![GBranch::new("report", Some(Sort::new("Log")), GlobalType::var("t0"))],
                        ),
                    ),
                    GBranch::new("crash", None, GlobalType::End),
                ],
            ),
        );
        assert_eq!(g, expected);
    }

    #[test]
    fn minimal_protocol() {
        let decl = parse_protocol("global protocol P(role A, role B){ hi from A to B; }").unwrap();
        assert!(decl.reliable_set().is_empty());
        let (g, _) = to_global_type(&decl).unwrap();
        assert_eq!(
            g,
            GlobalType::comm("A", "B", vec![GBranch::new("hi", None, GlobalType::End)])
        );
    }

    #[test]
    fn mixed_receivers_rejected() {
        let src = r#"global protocol P(role A, role B, role C){
            choice at A { x from A to B; } or { y from A to C; } }"#;
        match parse_protocol(src) {
            Err(ParseError::MixedReceivers { first, second, .. }) => {
                assert_eq!((first, second), (Role::new("B"), Role::new("C")));
            }
            other => panic!("expected mixed receivers error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_role_rejected() {
        let src = "global protocol P(role A, role A){ x from A to A; }";
        assert!(matches!(parse_protocol(src), Err(ParseError::DuplicateRole { .. })));
    }

    #[test]
    fn unbound_continue_rejected() {
        let src = "global protocol P(role A, role B){ x from A to B; continue t; }";
        assert!(matches!(parse_protocol(src), Err(ParseError::UnboundContinue { .. })));
    }

    #[test]
    fn crash_with_payload_rejected() {
        let src = r#"global protocol P(role A, role B){
            choice at A { x from A to B; } or { crash(Int) from A to B; } }"#;
        assert!(matches!(parse_protocol(src), Err(ParseError::CrashPayload { .. })));
    }

    #[test]
    fn crash_outside_branch_rejected() {
        let src = "global protocol P(role A, role B){ crash from A to B; }";
        assert!(matches!(parse_protocol(src), Err(ParseError::CrashOutsideBranch { .. })));
    }

    #[test]
    fn crash_mid_branch_rejected() {
        let src = r#"global protocol P(role A, role B){
            choice at A { x from A to B; crash from A to B; } or { y from A to B; } }"#;
        assert!(matches!(parse_protocol(src), Err(ParseError::CrashOutsideBranch { .. })));
    }

    #[test]
    fn crash_sole_label_rejected() {
        let src = r#"global protocol P(role A, role B){
            choice at A { crash from A to B; } }"#;
        let decl = parse_protocol(src).unwrap();
        assert!(matches!(to_global_type(&decl), Err(ConvertError::CrashSoleLabel { .. })));
    }

    #[test]
    fn self_send_rejected() {
        let src = "global protocol P(role A, role B){ x from A to A; }";
        let decl = parse_protocol(src).unwrap();
        assert!(matches!(to_global_type(&decl), Err(ConvertError::SelfSend { .. })));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let src = r#"global protocol P(role A, role B){
            choice at A { x from A to B; } or { x(Int) from A to B; } }"#;
        let decl = parse_protocol(src).unwrap();
        assert!(matches!(to_global_type(&decl), Err(ConvertError::DuplicateLabel { .. })));
    }

    #[test]
    fn non_contractive_rejected() {
        let src = "global protocol P(role A, role B){ rec t { continue t; } }";
        let decl = parse_protocol(src).unwrap();
        assert!(matches!(to_global_type(&decl), Err(ConvertError::NotContractive { .. })));
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_protocol("global protocol P(role A role B){}") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos.line, 1),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn scribble_round_trip() {
        let decl = parse_protocol(SIMPLE_LOGGER).unwrap();
        let (g, _) = to_global_type(&decl).unwrap();
        let roles: Vec<(Role, bool)> =
            decl.roles.iter().map(|r| (r.name.clone(), r.reliable)).collect();
        let rendered = to_scribble(&decl.name, &roles, &g);
        let reparsed = parse_protocol(&rendered).unwrap();
        let (g2, reliable2) = to_global_type(&reparsed).unwrap();
        assert_eq!(g, g2);
        assert_eq!(reliable2, decl.reliable_set());
    }
}
