//! The action language of atomic actions: assignments to attributes or
//! locals, integer arithmetic, and comparison guards.
//!
//! ```text
//! stmt   ::= ε | "skip" | IDENT ":=" expr | "local" IDENT ":=" expr
//! expr   ::= term (("+" | "-") term)*
//! term   ::= unary ("*" unary)*
//! unary  ::= "-" unary | INT | IDENT | "(" expr ")"
//! guard  ::= "true" | "false" | expr CMP expr
//! CMP    ::= "<" | "<=" | "=" | "!=" | ">=" | ">" | "≤" | "≥" | "≠"
//! ```

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LangError {
    #[error("at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unknown variable `{0}`")]
    Unknown(String),
    #[error("`{0}` is not an integer")]
    NotInteger(String),
    #[error("integer overflow")]
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Var(String),
    Neg(Box<Expr>),
    Bin(Box<Expr>, Op, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl Cmp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Ge => a >= b,
            Cmp::Gt => a > b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Skip,
    SetAttr(String, Expr),
    SetLocal(String, Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GuardExpr {
    Const(bool),
    Compare(Expr, Cmp, Expr),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(i) => write!(f, "{i}"),
            Expr::Var(v) => f.write_str(v),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(a, op, b) => {
                let sym = match op {
                    Op::Add => "+",
                    Op::Sub => "-",
                    Op::Mul => "*",
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Int(i64),
    Ident(String),
    Assign,
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Cmp(Cmp),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, LangError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |column: usize, message: String| LangError::Syntax { column, message };
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        let next = chars.get(i + 1).copied();
        let (tok, width) = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse().map_err(|_| err(col, format!("integer `{text}` is too large")))?;
                out.push((col, Tok::Int(v)));
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push((col, Tok::Ident(chars[start..i].iter().collect())));
                continue;
            }
            ':' if next == Some('=') => (Tok::Assign, 2),
            '+' => (Tok::Plus, 1),
            '-' | '−' => (Tok::Minus, 1),
            '*' => (Tok::Star, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '<' if next == Some('=') => (Tok::Cmp(Cmp::Le), 2),
            '>' if next == Some('=') => (Tok::Cmp(Cmp::Ge), 2),
            '!' if next == Some('=') => (Tok::Cmp(Cmp::Ne), 2),
            '<' => (Tok::Cmp(Cmp::Lt), 1),
            '>' => (Tok::Cmp(Cmp::Gt), 1),
            '=' => (Tok::Cmp(Cmp::Eq), 1),
            '≤' => (Tok::Cmp(Cmp::Le), 1),
            '≥' => (Tok::Cmp(Cmp::Ge), 1),
            '≠' => (Tok::Cmp(Cmp::Ne), 1),
            other => return Err(err(col, format!("unexpected character `{other}`"))),
        };
        out.push((col, tok));
        i += width;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, LangError> {
        Ok(Parser { toks: lex(src)?, pos: 0, end: src.chars().count() + 1 })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(c, _)| *c)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, LangError> {
        Err(LangError::Syntax { column: self.column(), message: message.into() })
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn finish(&self) -> Result<(), LangError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => self.fail(format!("unexpected {t:?} after the end")),
        }
    }

    fn expr(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => Op::Add,
                Some(Tok::Minus) => Op::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(Box::new(lhs), op, Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, LangError> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Tok::Star) {
            self.bump();
            lhs = Expr::Bin(Box::new(lhs), Op::Mul, Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        match self.peek().cloned() {
            Some(Tok::Minus) => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Int(v)) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Some(Tok::Ident(name)) => {
                self.bump();
                Ok(Expr::Var(name))
            }
            Some(Tok::LParen) => {
                self.bump();
                let e = self.expr()?;
                if self.bump() != Some(Tok::RParen) {
                    self.pos -= 1;
                    return self.fail("expected `)`");
                }
                Ok(e)
            }
            Some(Tok::Cmp(_)) => self.fail("comparisons are only allowed at the top of a guard"),
            _ => self.fail("expected an expression"),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, LangError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

pub fn parse_stmt(src: &str) -> Result<Stmt, LangError> {
    let mut p = Parser::new(src)?;
    let stmt = match p.peek().cloned() {
        None => return Ok(Stmt::Skip),
        Some(Tok::Ident(w)) if w == "skip" => {
            p.bump();
            Stmt::Skip
        }
        Some(Tok::Ident(w)) => {
            p.bump();
            let (local, name) = match p.peek().cloned() {
                Some(Tok::Ident(name)) if w == "local" => {
                    p.bump();
                    (true, name)
                }
                _ => (false, w),
            };
            if p.bump() != Some(Tok::Assign) {
                p.pos -= 1;
                return p.fail("expected `:=`");
            }
            let e = p.expr()?;
            if local {
                Stmt::SetLocal(name, e)
            } else {
                Stmt::SetAttr(name, e)
            }
        }
        Some(_) => return p.fail("expected an assignment or `skip`"),
    };
    p.finish()?;
    Ok(stmt)
}

pub fn parse_guard(src: &str) -> Result<GuardExpr, LangError> {
    let mut p = Parser::new(src)?;
    match p.peek() {
        Some(Tok::Ident(w)) if (w == "true" || w == "false") && p.toks.len() == 1 => {
            return Ok(GuardExpr::Const(w == "true"));
        }
        None => return p.fail("empty guard"),
        _ => {}
    }
    let lhs = p.expr()?;
    let cmp = match p.bump() {
        Some(Tok::Cmp(c)) => c,
        _ => {
            p.pos -= 1;
            return p.fail("expected a comparison");
        }
    };
    let rhs = p.expr()?;
    p.finish()?;
    Ok(GuardExpr::Compare(lhs, cmp, rhs))
}

/// Variable lookup used during evaluation.
pub trait Env {
    fn lookup(&self, name: &str) -> Result<i64, LangError>;
}

impl<F: Fn(&str) -> Result<i64, LangError>> Env for F {
    fn lookup(&self, name: &str) -> Result<i64, LangError> {
        self(name)
    }
}

pub fn eval_expr(e: &Expr, env: &dyn Env) -> Result<i64, LangError> {
    match e {
        Expr::Int(v) => Ok(*v),
        Expr::Var(name) => env.lookup(name),
        Expr::Neg(e) => eval_expr(e, env)?.checked_neg().ok_or(LangError::Overflow),
        Expr::Bin(a, op, b) => {
            let (a, b) = (eval_expr(a, env)?, eval_expr(b, env)?);
            match op {
                Op::Add => a.checked_add(b),
                Op::Sub => a.checked_sub(b),
                Op::Mul => a.checked_mul(b),
            }
            .ok_or(LangError::Overflow)
        }
    }
}

pub fn eval_guard(g: &GuardExpr, env: &dyn Env) -> Result<bool, LangError> {
    match g {
        GuardExpr::Const(b) => Ok(*b),
        GuardExpr::Compare(a, cmp, b) => Ok(cmp.holds(eval_expr(a, env)?, eval_expr(b, env)?)),
    }
}
