//! Recursive-descent parser for the textual formula grammar.

use crate::error::{Error, Result};

use super::{CmpOp, Formula, Threshold};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Slot(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Not,
    And,
    Or,
    Implies,
    Cmp(CmpOp),
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, col: self.col, msg: msg.into() }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.src.get(self.pos).copied()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn tokens(mut self) -> Result<Vec<Spanned>> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let (line, col) = (self.line, self.col);
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.bump();
                }
                b'#' => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                b'(' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::LParen, line, col });
                }
                b')' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::RParen, line, col });
                }
                b'[' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::LBracket, line, col });
                }
                b']' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::RBracket, line, col });
                }
                b',' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::Comma, line, col });
                }
                b'!' => {
                    self.bump();
                    out.push(Spanned { tok: Tok::Not, line, col });
                }
                b'&' => {
                    self.bump();
                    if self.peek() == Some(b'&') {
                        self.bump();
                        out.push(Spanned { tok: Tok::And, line, col });
                    } else {
                        return Err(self.err("expected `&&`"));
                    }
                }
                b'|' => {
                    self.bump();
                    if self.peek() == Some(b'|') {
                        self.bump();
                        out.push(Spanned { tok: Tok::Or, line, col });
                    } else {
                        return Err(self.err("expected `||`"));
                    }
                }
                b'-' => {
                    // either `->` or the sign of a number
                    if self.src.get(self.pos + 1) == Some(&b'>') {
                        self.bump();
                        self.bump();
                        out.push(Spanned { tok: Tok::Implies, line, col });
                    } else if self.src.get(self.pos + 1).is_some_and(|d| d.is_ascii_digit() || *d == b'.') {
                        let n = self.number()?;
                        out.push(Spanned { tok: Tok::Num(n), line, col });
                    } else {
                        return Err(self.err("expected `->` or a number after `-`"));
                    }
                }
                b'<' => {
                    self.bump();
                    let op = if self.peek() == Some(b'=') {
                        self.bump();
                        CmpOp::Le
                    } else {
                        CmpOp::Lt
                    };
                    out.push(Spanned { tok: Tok::Cmp(op), line, col });
                }
                b'>' => {
                    self.bump();
                    let op = if self.peek() == Some(b'=') {
                        self.bump();
                        CmpOp::Ge
                    } else {
                        CmpOp::Gt
                    };
                    out.push(Spanned { tok: Tok::Cmp(op), line, col });
                }
                b'=' => {
                    self.bump();
                    if self.peek() == Some(b'=') {
                        self.bump();
                    }
                    out.push(Spanned { tok: Tok::Cmp(CmpOp::Eq), line, col });
                }
                b'?' => {
                    self.bump();
                    let name = self.ident_str()?;
                    out.push(Spanned { tok: Tok::Slot(name), line, col });
                }
                c if c.is_ascii_digit() || c == b'.' => {
                    let n = self.number()?;
                    out.push(Spanned { tok: Tok::Num(n), line, col });
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let name = self.ident_str()?;
                    out.push(Spanned { tok: Tok::Ident(name), line, col });
                }
                other => return Err(self.err(format!("unexpected character `{}`", other as char))),
            }
        }
        Ok(out)
    }

    fn ident_str(&mut self) -> Result<String> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("expected identifier"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.bump();
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' {
                self.bump();
                // allow exponent sign
                if matches!(self.src.get(self.pos.wrapping_sub(1)), Some(b'e') | Some(b'E'))
                    && matches!(self.peek(), Some(b'+') | Some(b'-'))
                {
                    self.bump();
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map_err(|_| self.err(format!("bad number `{text}`")))
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn err_at(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self
            .toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1));
        Error::Parse { line, col, msg: msg.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<()> {
        match self.next() {
            Some(t) if &t == tok => Ok(()),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_at(format!("expected {what}")))
            }
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        let lhs = self.or_expr()?;
        if self.peek() == Some(&Tok::Implies) {
            self.next();
            let rhs = self.formula()?; // right-associative
            return Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or_expr(&mut self) -> Result<Formula> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(&Tok::Or) {
            self.next();
            let rhs = self.and_expr()?;
            lhs = Formula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Formula> {
        let mut lhs = self.since_expr()?;
        while self.peek() == Some(&Tok::And) {
            self.next();
            let rhs = self.since_expr()?;
            lhs = Formula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn since_expr(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while matches!(self.peek(), Some(Tok::Ident(s)) if s == "S") {
            self.next();
            let rhs = self.unary()?;
            lhs = Formula::Since(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn interval(&mut self) -> Result<(f64, f64)> {
        self.expect(&Tok::LBracket, "`[`")?;
        let lo = match self.next() {
            Some(Tok::Num(v)) => v,
            _ => return Err(self.err_at("expected interval lower bound")),
        };
        self.expect(&Tok::Comma, "`,`")?;
        let hi = match self.next() {
            Some(Tok::Num(v)) => v,
            _ => return Err(self.err_at("expected interval upper bound")),
        };
        self.expect(&Tok::RBracket, "`]`")?;
        if !(lo >= 0.0 && lo <= hi) {
            return Err(self.err_at(format!("bad temporal interval [{lo},{hi}]")));
        }
        Ok((lo, hi))
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek() {
            Some(Tok::Not) => {
                self.next();
                Ok(Formula::Not(Box::new(self.unary()?)))
            }
            Some(Tok::Ident(s)) if s == "G" => {
                self.next();
                let (lo, hi) = self.interval()?;
                Ok(Formula::Globally { lo, hi, inner: Box::new(self.unary()?) })
            }
            Some(Tok::Ident(s)) if s == "F" => {
                self.next();
                let (lo, hi) = self.interval()?;
                Ok(Formula::Eventually { lo, hi, inner: Box::new(self.unary()?) })
            }
            Some(Tok::LParen) => {
                self.next();
                let f = self.formula()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(f)
            }
            Some(Tok::Ident(_)) => self.atom(),
            _ => Err(self.err_at("expected a formula")),
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        let signal = match self.next() {
            Some(Tok::Ident(s)) => s,
            _ => return Err(self.err_at("expected signal name")),
        };
        if signal == "S" || signal == "G" || signal == "F" {
            return Err(self.err_at(format!("`{signal}` is a reserved word")));
        }
        match self.peek() {
            Some(Tok::Cmp(op)) => {
                let op = *op;
                self.next();
                let rhs = match self.next() {
                    Some(Tok::Num(v)) => Threshold::Lit(v),
                    Some(Tok::Slot(name)) => Threshold::Slot(name),
                    _ => return Err(self.err_at("expected number or ?slot after comparator")),
                };
                Ok(Formula::Atom { signal, op, rhs })
            }
            _ => Ok(Formula::Prop(signal)),
        }
    }
}

/// Parse one formula from text.
pub fn parse(text: &str) -> Result<Formula> {
    let toks = Lexer::new(text).tokens()?;
    if toks.is_empty() {
        return Err(Error::Parse { line: 1, col: 1, msg: "empty formula".into() });
    }
    let mut p = Parser { toks, pos: 0 };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return Err(p.err_at("trailing input after formula"));
    }
    f.validate_intervals()?;
    Ok(f)
}

/// Parse a rule file: one formula per non-empty line, `#` comments.
pub fn parse_rule_file(text: &str) -> Result<Vec<Formula>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let stripped = match line.find('#') {
            Some(idx) => &line[..idx],
            None => line,
        };
        if stripped.trim().is_empty() {
            continue;
        }
        let f = parse(stripped).map_err(|e| match e {
            Error::Parse { col, msg, .. } => Error::Parse { line: i + 1, col, msg },
            other => other,
        })?;
        out.push(f);
    }
    Ok(out)
}
