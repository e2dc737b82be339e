//! Lexer and recursive-descent parser for the probabilistic while-language
//! (affine and polynomial modes) and for the canonical expression/predicate
//! text used by the JSON pCFG format and certificate files.
//!
//! Grammar sketch:
//!
//! ```text
//! program  ::= stmts
//! stmts    ::= annstmt (';' annstmt)* ';'?
//! annstmt  ::= ('{' pred '}')? stmt
//! stmt     ::= 'skip'
//!            | ident ':=' rhs
//!            | 'if' ndb 'then' stmts 'else' stmts 'fi'
//!            | 'while' pred 'do' stmts 'od'
//!            | 'refute' '(' pred ')'
//! ndb      ::= '*' | 'prob' '(' expr ')' | pred
//! rhs      ::= 'Unif' '(' expr ',' expr ')'
//!            | 'Discrete' '{' expr ':' expr (',' expr ':' expr)* '}'
//!            | 'Geometric' '(' expr ')'
//!            | 'ndet' domain
//!            | expr
//! domain   ::= 'Real' ('[' expr ',' expr ']')? ('or' 'Real' ...)*
//! pred     ::= conj ('or' conj)*
//! conj     ::= lit ('and' lit)*
//! lit      ::= 'true' | expr ('<='|'<'|'>='|'>'|'=') expr
//! ```
//!
//! Invariant annotations `{ pred }` attach to the statement they precede.

use thiserror::Error;

use crate::expr::{ConjPredicate, LinConstraint, Predicate, Var};
use crate::pcfg::DistDescriptor;
use crate::scalar::rat_from_str;
use crate::{Rat, RatPoly};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: nonlinear expression not allowed in affine mode")]
    NonlinearInApp { line: usize },
    #[error("line {line}: probability {p} outside [0,1]")]
    BadProbability { line: usize, p: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    App,
    Ppp,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(Rat),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Walrus,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Lt,
    Le,
    Gt,
    Ge,
    EqSign,
    Eof,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut toks = Vec::new();
    let mut line = 1usize;
    let mut it = src.chars().peekable();
    while let Some(&c) = it.peek() {
        match c {
            '\n' => {
                line += 1;
                it.next();
            }
            c if c.is_whitespace() => {
                it.next();
            }
            '#' => {
                // comment to end of line
                while let Some(&c) = it.peek() {
                    if c == '\n' {
                        break;
                    }
                    it.next();
                }
            }
            '{' => {
                it.next();
                toks.push((Tok::LBrace, line));
            }
            '}' => {
                it.next();
                toks.push((Tok::RBrace, line));
            }
            '(' => {
                it.next();
                toks.push((Tok::LParen, line));
            }
            ')' => {
                it.next();
                toks.push((Tok::RParen, line));
            }
            '[' => {
                it.next();
                toks.push((Tok::LBracket, line));
            }
            ']' => {
                it.next();
                toks.push((Tok::RBracket, line));
            }
            ',' => {
                it.next();
                toks.push((Tok::Comma, line));
            }
            ';' => {
                it.next();
                toks.push((Tok::Semi, line));
            }
            '+' => {
                it.next();
                toks.push((Tok::Plus, line));
            }
            '-' => {
                it.next();
                toks.push((Tok::Minus, line));
            }
            '*' => {
                it.next();
                toks.push((Tok::Star, line));
            }
            '/' => {
                it.next();
                toks.push((Tok::Slash, line));
            }
            '^' => {
                it.next();
                toks.push((Tok::Caret, line));
            }
            ':' => {
                it.next();
                if it.peek() == Some(&'=') {
                    it.next();
                    toks.push((Tok::Walrus, line));
                } else {
                    toks.push((Tok::Colon, line));
                }
            }
            '<' => {
                it.next();
                if it.peek() == Some(&'=') {
                    it.next();
                    toks.push((Tok::Le, line));
                } else {
                    toks.push((Tok::Lt, line));
                }
            }
            '>' => {
                it.next();
                if it.peek() == Some(&'=') {
                    it.next();
                    toks.push((Tok::Ge, line));
                } else {
                    toks.push((Tok::Gt, line));
                }
            }
            '=' => {
                it.next();
                toks.push((Tok::EqSign, line));
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut s = String::new();
                while let Some(&c) = it.peek() {
                    if c.is_ascii_digit() || c == '.' {
                        s.push(c);
                        it.next();
                    } else {
                        break;
                    }
                }
                let r = rat_from_str(&s).ok_or_else(|| ParseError::Syntax {
                    line,
                    msg: format!("bad number literal '{}'", s),
                })?;
                toks.push((Tok::Num(r), line));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = it.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        it.next();
                    } else {
                        break;
                    }
                }
                toks.push((Tok::Ident(s), line));
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    msg: format!("unexpected character '{}'", other),
                })
            }
        }
    }
    toks.push((Tok::Eof, line));
    Ok(toks)
}

/// Nondeterministic-or-probabilistic branch condition of an `if`.
#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Star,
    Prob(Rat),
    Pred(Predicate<Rat>),
}

/// One `ndet` domain: a union of (optionally unbounded) real intervals.
pub type NdetDomain = Vec<(Option<Rat>, Option<Rat>)>;

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Skip,
    Assign(Var, RatPoly),
    Sample(Var, DistDescriptor),
    NdetAssign(Var, NdetDomain),
    If(Cond, Vec<AnnStmt>, Vec<AnnStmt>),
    While(Predicate<Rat>, Vec<AnnStmt>),
    Refute(Predicate<Rat>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnStmt {
    pub invariant: Option<Predicate<Rat>>,
    pub stmt: Stmt,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub mode: Mode,
    pub vars: Vec<String>,
    pub body: Vec<AnnStmt>,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: Vec<String>,
    /// When set, identifiers must already be interned (used for certificate
    /// and JSON expression parsing where the variable set is fixed).
    closed_vars: bool,
}

impl Parser {
    fn new(toks: Vec<(Tok, usize)>, vars: Vec<String>, closed_vars: bool) -> Self {
        Parser {
            toks,
            pos: 0,
            vars,
            closed_vars,
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn line(&self) -> usize {
        self.toks[self.pos].1
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            line: self.line(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {}, found {:?}", what, self.peek()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.next();
            true
        } else {
            false
        }
    }

    fn intern(&mut self, name: &str) -> Result<Var, ParseError> {
        if let Some(i) = self.vars.iter().position(|v| v == name) {
            return Ok(i as Var);
        }
        if self.closed_vars {
            return self.err(format!("unknown variable '{}'", name));
        }
        self.vars.push(name.to_string());
        Ok((self.vars.len() - 1) as Var)
    }

    // ---- expressions ----

    fn parse_expr(&mut self) -> Result<RatPoly, ParseError> {
        let mut acc = self.parse_term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    acc = acc.add(&self.parse_term()?);
                }
                Tok::Minus => {
                    self.next();
                    acc = acc.sub(&self.parse_term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_term(&mut self) -> Result<RatPoly, ParseError> {
        let mut acc = self.parse_factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.next();
                    acc = acc.mul(&self.parse_factor()?);
                }
                Tok::Slash => {
                    self.next();
                    let d = self.parse_factor()?;
                    if !d.is_constant() || d.is_zero() {
                        return self.err("division only by a nonzero constant");
                    }
                    let inv = Rat::new(
                        d.constant_part().denom().clone(),
                        d.constant_part().numer().clone(),
                    );
                    acc = acc.scale(&inv);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<RatPoly, ParseError> {
        let mut negs = 0;
        while *self.peek() == Tok::Minus {
            self.next();
            negs += 1;
        }
        let mut base = match self.next() {
            Tok::Num(r) => RatPoly::constant(r),
            Tok::Ident(name) => {
                let v = self.intern(&name)?;
                RatPoly::var(v)
            }
            Tok::LParen => {
                let e = self.parse_expr()?;
                self.expect(Tok::RParen, "')'")?;
                e
            }
            other => {
                return Err(ParseError::Syntax {
                    line: self.toks[self.pos.saturating_sub(1)].1,
                    msg: format!("expected expression, found {:?}", other),
                })
            }
        };
        if *self.peek() == Tok::Caret {
            self.next();
            match self.next() {
                Tok::Num(r) if r.is_integer() && r >= Rat::from_integer(0.into()) => {
                    use num_traits::ToPrimitive;
                    let e = r.to_integer().to_u32().ok_or_else(|| ParseError::Syntax {
                        line: self.line(),
                        msg: "exponent too large".into(),
                    })?;
                    base = base.pow(e);
                }
                _ => return self.err("expected nonnegative integer exponent after '^'"),
            }
        }
        if negs % 2 == 1 {
            base = base.neg();
        }
        Ok(base)
    }

    fn parse_const(&mut self) -> Result<Rat, ParseError> {
        let e = self.parse_expr()?;
        if e.is_constant() {
            Ok(e.constant_part())
        } else {
            self.err("expected a constant expression")
        }
    }

    // ---- predicates ----

    fn parse_literal(&mut self) -> Result<Vec<LinConstraint<Rat>>, ParseError> {
        if self.eat_kw("true") {
            return Ok(Vec::new());
        }
        let lhs = self.parse_expr()?;
        let op = self.next();
        let rhs = self.parse_expr()?;
        let mk = |p: RatPoly, strict: bool| LinConstraint { lhs: p, strict };
        Ok(match op {
            Tok::Le => vec![mk(rhs.sub(&lhs), false)],
            Tok::Lt => vec![mk(rhs.sub(&lhs), true)],
            Tok::Ge => vec![mk(lhs.sub(&rhs), false)],
            Tok::Gt => vec![mk(lhs.sub(&rhs), true)],
            Tok::EqSign => vec![mk(lhs.sub(&rhs), false), mk(rhs.sub(&lhs), false)],
            other => {
                return self.err(format!("expected comparison operator, found {:?}", other))
            }
        })
    }

    fn parse_conj(&mut self) -> Result<ConjPredicate<Rat>, ParseError> {
        let mut conj = self.parse_literal()?;
        while self.eat_kw("and") {
            conj.extend(self.parse_literal()?);
        }
        Ok(conj)
    }

    fn parse_pred(&mut self) -> Result<Predicate<Rat>, ParseError> {
        let mut disjuncts = vec![self.parse_conj()?];
        while self.eat_kw("or") {
            disjuncts.push(self.parse_conj()?);
        }
        Ok(Predicate { disjuncts })
    }

    // ---- statements ----

    fn parse_stmts(&mut self, terminators: &[&str]) -> Result<Vec<AnnStmt>, ParseError> {
        let mut out = Vec::new();
        loop {
            if *self.peek() == Tok::Eof || terminators.iter().any(|t| self.is_kw(t)) {
                return Ok(out);
            }
            out.push(self.parse_annstmt()?);
            if *self.peek() == Tok::Semi {
                self.next();
            } else if *self.peek() != Tok::Eof && !terminators.iter().any(|t| self.is_kw(t)) {
                return self.err("expected ';' between statements");
            }
        }
    }

    fn parse_annstmt(&mut self) -> Result<AnnStmt, ParseError> {
        let line = self.line();
        let invariant = if *self.peek() == Tok::LBrace {
            self.next();
            let p = self.parse_pred()?;
            self.expect(Tok::RBrace, "'}'")?;
            Some(p)
        } else {
            None
        };
        let stmt = self.parse_stmt()?;
        Ok(AnnStmt {
            invariant,
            stmt,
            line,
        })
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let line = self.line();
        if self.eat_kw("skip") {
            return Ok(Stmt::Skip);
        }
        if self.eat_kw("while") {
            let cond = self.parse_pred()?;
            if !self.eat_kw("do") {
                return self.err("expected 'do'");
            }
            let body = self.parse_stmts(&["od"])?;
            if !self.eat_kw("od") {
                return self.err("expected 'od'");
            }
            return Ok(Stmt::While(cond, body));
        }
        if self.eat_kw("if") {
            let cond = if *self.peek() == Tok::Star {
                self.next();
                Cond::Star
            } else if self.eat_kw("prob") {
                self.expect(Tok::LParen, "'('")?;
                let p = self.parse_const()?;
                self.expect(Tok::RParen, "')'")?;
                if p < Rat::from_integer(0.into()) || p > Rat::from_integer(1.into()) {
                    return Err(ParseError::BadProbability {
                        line,
                        p: p.to_string(),
                    });
                }
                Cond::Prob(p)
            } else {
                Cond::Pred(self.parse_pred()?)
            };
            if !self.eat_kw("then") {
                return self.err("expected 'then'");
            }
            let then_branch = self.parse_stmts(&["else"])?;
            if !self.eat_kw("else") {
                return self.err("expected 'else'");
            }
            let else_branch = self.parse_stmts(&["fi"])?;
            if !self.eat_kw("fi") {
                return self.err("expected 'fi'");
            }
            return Ok(Stmt::If(cond, then_branch, else_branch));
        }
        if self.eat_kw("refute") {
            self.expect(Tok::LParen, "'('")?;
            let p = self.parse_pred()?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(Stmt::Refute(p));
        }
        // assignment
        let name = match self.next() {
            Tok::Ident(s) => s,
            other => {
                return Err(ParseError::Syntax {
                    line,
                    msg: format!("expected statement, found {:?}", other),
                })
            }
        };
        let v = self.intern(&name)?;
        self.expect(Tok::Walrus, "':='")?;
        self.parse_rhs(v, line)
    }

    fn parse_rhs(&mut self, v: Var, line: usize) -> Result<Stmt, ParseError> {
        if self.eat_kw("sample") {
            self.expect(Tok::LParen, "'('")?;
            let d = self.parse_dist(line)?;
            self.expect(Tok::RParen, "')'")?;
            return Ok(Stmt::Sample(v, d));
        }
        if self.is_kw("Unif") || self.is_kw("Discrete") || self.is_kw("Geometric") {
            let d = self.parse_dist(line)?;
            return Ok(Stmt::Sample(v, d));
        }
        if self.is_kw("Norm") || self.is_kw("Normal") || self.is_kw("Gauss") {
            return self.err(
                "normal distributions are not supported (unbounded support breaks \
                 bounded-difference checks); use Unif, Discrete or Geometric",
            );
        }
        if self.eat_kw("ndet") {
            let mut dom = Vec::new();
            loop {
                if !self.eat_kw("Real") {
                    return self.err("expected 'Real' in ndet domain");
                }
                if *self.peek() == Tok::LBracket {
                    self.next();
                    let lo = self.parse_const()?;
                    self.expect(Tok::Comma, "','")?;
                    let hi = self.parse_const()?;
                    self.expect(Tok::RBracket, "']'")?;
                    dom.push((Some(lo), Some(hi)));
                } else {
                    dom.push((None, None));
                }
                if !self.eat_kw("or") {
                    break;
                }
            }
            return Ok(Stmt::NdetAssign(v, dom));
        }
        Ok(Stmt::Assign(v, self.parse_expr()?))
    }

    fn parse_dist(&mut self, line: usize) -> Result<DistDescriptor, ParseError> {
        if self.eat_kw("Unif") {
            self.expect(Tok::LParen, "'('")?;
            let a = self.parse_const()?;
            self.expect(Tok::Comma, "','")?;
            let b = self.parse_const()?;
            self.expect(Tok::RParen, "')'")?;
            if a >= b {
                return Err(ParseError::Syntax {
                    line,
                    msg: "Unif(a,b) requires a < b".into(),
                });
            }
            return Ok(DistDescriptor::Uniform(a, b));
        }
        if self.eat_kw("Discrete") {
            self.expect(Tok::LBrace, "'{'")?;
            let mut items = Vec::new();
            loop {
                let val = self.parse_const()?;
                self.expect(Tok::Colon, "':'")?;
                let p = self.parse_const()?;
                items.push((val, p));
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
            self.expect(Tok::RBrace, "'}'")?;
            let total: Rat = items.iter().map(|(_, p)| p.clone()).sum();
            if total != Rat::from_integer(1.into())
                || items.iter().any(|(_, p)| *p <= Rat::from_integer(0.into()))
            {
                return Err(ParseError::Syntax {
                    line,
                    msg: "Discrete probabilities must be positive and sum to 1".into(),
                });
            }
            return Ok(DistDescriptor::Finite(items));
        }
        if self.eat_kw("Geometric") {
            self.expect(Tok::LParen, "'('")?;
            let p = self.parse_const()?;
            self.expect(Tok::RParen, "')'")?;
            if p <= Rat::from_integer(0.into()) || p > Rat::from_integer(1.into()) {
                return Err(ParseError::BadProbability {
                    line,
                    p: p.to_string(),
                });
            }
            return Ok(DistDescriptor::Geometric(p));
        }
        self.err("expected a distribution (Unif, Discrete, Geometric)")
    }
}

fn check_linearity(body: &[AnnStmt]) -> Result<(), ParseError> {
    fn pred_linear(p: &Predicate<Rat>) -> bool {
        p.is_linear()
    }
    for s in body {
        if let Some(inv) = &s.invariant {
            if !pred_linear(inv) {
                return Err(ParseError::NonlinearInApp { line: s.line });
            }
        }
        let ok = match &s.stmt {
            Stmt::Skip | Stmt::Sample(..) | Stmt::NdetAssign(..) => true,
            Stmt::Assign(_, e) => e.is_linear(),
            Stmt::Refute(p) => pred_linear(p),
            Stmt::While(p, body) => {
                check_linearity(body)?;
                pred_linear(p)
            }
            Stmt::If(c, t, e) => {
                check_linearity(t)?;
                check_linearity(e)?;
                match c {
                    Cond::Pred(p) => pred_linear(p),
                    _ => true,
                }
            }
        };
        if !ok {
            return Err(ParseError::NonlinearInApp { line: s.line });
        }
    }
    Ok(())
}

/// Parses a whole program in the given mode.
pub fn parse(source: &str, mode: Mode) -> Result<Program, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser::new(toks, Vec::new(), false);
    let body = p.parse_stmts(&[])?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input after program");
    }
    if mode == Mode::App {
        check_linearity(&body)?;
    }
    Ok(Program {
        mode,
        vars: p.vars,
        body,
    })
}

/// Parses a single expression against a fixed variable table.
pub fn parse_expr_str(source: &str, vars: &[String]) -> Result<RatPoly, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser::new(toks, vars.to_vec(), true);
    let e = p.parse_expr()?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input after expression");
    }
    Ok(e)
}

/// Parses a predicate (DNF over comparisons) against a fixed variable table.
pub fn parse_pred_str(source: &str, vars: &[String]) -> Result<Predicate<Rat>, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser::new(toks, vars.to_vec(), true);
    let e = p.parse_pred()?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input after predicate");
    }
    Ok(e)
}

/// Pretty-prints a program in parseable concrete syntax.
pub fn pretty(prog: &Program) -> String {
    fn pred(p: &Predicate<Rat>, vars: &[String]) -> String {
        crate::expr::render_predicate(p, vars)
    }
    fn go(body: &[AnnStmt], vars: &[String], indent: usize, out: &mut String) {
        for (i, s) in body.iter().enumerate() {
            let pad = "  ".repeat(indent);
            if let Some(inv) = &s.invariant {
                out.push_str(&format!("{}{{ {} }}\n", pad, pred(inv, vars)));
            }
            let stmt = match &s.stmt {
                Stmt::Skip => format!("{}skip", pad),
                Stmt::Assign(v, e) => format!(
                    "{}{} := {}",
                    pad,
                    vars[*v as usize],
                    crate::expr::render_poly(e, vars)
                ),
                Stmt::Sample(v, d) => format!("{}{} := {}", pad, vars[*v as usize], d.render()),
                Stmt::NdetAssign(v, dom) => {
                    let ds: Vec<String> = dom
                        .iter()
                        .map(|(lo, hi)| match (lo, hi) {
                            (Some(a), Some(b)) => format!(
                                "Real[{}, {}]",
                                crate::scalar::rat_to_str(a),
                                crate::scalar::rat_to_str(b)
                            ),
                            _ => "Real".to_string(),
                        })
                        .collect();
                    format!("{}{} := ndet {}", pad, vars[*v as usize], ds.join(" or "))
                }
                Stmt::Refute(p) => format!("{}refute ({})", pad, pred(p, vars)),
                Stmt::While(c, b) => {
                    let mut s = format!("{}while {} do\n", pad, pred(c, vars));
                    go(b, vars, indent + 1, &mut s);
                    s.push_str(&format!("{}od", pad));
                    s
                }
                Stmt::If(c, t, e) => {
                    let cond = match c {
                        Cond::Star => "*".to_string(),
                        Cond::Prob(p) => format!("prob({})", crate::scalar::rat_to_str(p)),
                        Cond::Pred(p) => pred(p, vars),
                    };
                    let mut s = format!("{}if {} then\n", pad, cond);
                    go(t, vars, indent + 1, &mut s);
                    s.push_str(&format!("{}else\n", pad));
                    go(e, vars, indent + 1, &mut s);
                    s.push_str(&format!("{}fi", pad));
                    s
                }
            };
            out.push_str(&stmt);
            if indent > 0 || i + 1 < body.len() {
                out.push(';');
            }
            out.push('\n');
        }
    }
    let mut out = String::new();
    go(&prog.body, &prog.vars, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{rat, rint};

    #[test]
    fn parses_fig_style_loop() {
        let src = "
            x := 2;
            y := 2;
            t := 0;
            while t <= 100 do
                t := t + 1;
                z := Unif(-2, 1);
                if * then
                    x := x + z
                else
                    y := y + z
                fi
            od
        ";
        let p = parse(src, Mode::App).unwrap();
        assert_eq!(p.vars, vec!["x", "y", "t", "z"]);
        assert_eq!(p.body.len(), 4);
        match &p.body[3].stmt {
            Stmt::While(cond, body) => {
                assert_eq!(cond.disjuncts.len(), 1);
                assert_eq!(body.len(), 3);
                assert!(matches!(&body[2].stmt, Stmt::If(Cond::Star, t, e)
                    if t.len() == 1 && e.len() == 1));
            }
            other => panic!("expected while, got {:?}", other),
        }
    }

    #[test]
    fn parses_annotations_and_refute() {
        let src = "{0 <= x} while true do x := x - 1; refute (x <= 0) od";
        let p = parse(src, Mode::App).unwrap();
        assert_eq!(p.body.len(), 1);
        assert!(p.body[0].invariant.is_some());
        match &p.body[0].stmt {
            Stmt::While(c, body) => {
                assert!(c.disjuncts[0].is_empty()); // true
                assert!(matches!(&body[1].stmt, Stmt::Refute(_)));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn skip_parses() {
        let p = parse("skip", Mode::App).unwrap();
        assert_eq!(p.body.len(), 1);
        assert_eq!(p.body[0].stmt, Stmt::Skip);
        assert!(p.vars.is_empty());
    }

    #[test]
    fn prob_and_discrete_and_ndet() {
        let src = "
            if prob(0.875) then x := x - 1 else skip fi;
            y := Discrete{0: 1/2, 1: 1/2};
            z := ndet Real[17, 22] or Real[30, 31]
        ";
        let p = parse(src, Mode::App).unwrap();
        match &p.body[0].stmt {
            Stmt::If(Cond::Prob(pr), _, _) => assert_eq!(pr, &rat(7, 8)),
            _ => panic!(),
        }
        match &p.body[1].stmt {
            Stmt::Sample(_, DistDescriptor::Finite(items)) => assert_eq!(items.len(), 2),
            _ => panic!(),
        }
        match &p.body[2].stmt {
            Stmt::NdetAssign(_, dom) => {
                assert_eq!(dom.len(), 2);
                assert_eq!(dom[0], (Some(rint(17)), Some(rint(22))));
            }
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_bad_probability_and_normal() {
        assert!(matches!(
            parse("if prob(1.5) then skip else skip fi", Mode::App),
            Err(ParseError::BadProbability { .. })
        ));
        assert!(parse("x := Norm(0, 1)", Mode::App).is_err());
    }

    #[test]
    fn app_mode_rejects_nonlinear() {
        let r = parse("x := x * x", Mode::App);
        assert!(matches!(r, Err(ParseError::NonlinearInApp { line: 1 })));
        assert!(parse("x := x * x", Mode::Ppp).is_ok());
    }

    #[test]
    fn syntax_error_carries_line() {
        let r = parse("x := 1;\ny := ;", Mode::App);
        match r {
            Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {:?}", other),
        }
    }

    #[test]
    fn expression_parser_round_trips_canonical_form() {
        let vars = vec!["x1".to_string(), "x2".to_string()];
        let e = parse_expr_str("1/2*x1 + -3*x2 + 7", &vars).unwrap();
        assert_eq!(crate::expr::render_poly(&e, &vars), "1/2*x1 + -3*x2 + 7");
        let q = parse_expr_str("x1^2 - 2*x1*x2", &vars).unwrap();
        assert_eq!(q.degree(), 2);
        assert_eq!(
            parse_expr_str(&crate::expr::render_poly(&q, &vars), &vars).unwrap(),
            q
        );
    }

    #[test]
    fn predicate_parser_handles_dnf_and_equality() {
        let vars = vec!["x".to_string()];
        let p = parse_pred_str("x >= 0 and x <= 10 or x = 12", &vars).unwrap();
        assert_eq!(p.disjuncts.len(), 2);
        assert_eq!(p.disjuncts[1].len(), 2); // equality splits
        assert!(p.holds_at(&[rint(5)]).unwrap());
        assert!(p.holds_at(&[rint(12)]).unwrap());
        assert!(!p.holds_at(&[rint(11)]).unwrap());
        // strict comparisons
        let q = parse_pred_str("x < 1", &vars).unwrap();
        assert!(q.disjuncts[0][0].strict);
    }

    #[test]
    fn pretty_print_reparses_to_same_ast() {
        let src = "
            {0 <= x and x <= 13}
            x := 2;
            while x <= 10 do
                if prob(0.2) then skip else x := x + 1 fi;
                if * then
                    if prob(0.875) then x := x - 1 else skip fi
                else
                    x := x - 1
                fi;
                refute (x <= 0)
            od
        ";
        let p1 = parse(src, Mode::App).unwrap();
        let printed = pretty(&p1);
        let p2 = parse(&printed, Mode::App).unwrap();
        // Source positions differ; the printed forms must agree exactly.
        assert_eq!(printed, pretty(&p2));
        assert_eq!(p1.vars, p2.vars);
    }
}
