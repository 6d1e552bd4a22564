//! Line-oriented problem file parser.
//!
//! ```text
//! vars x y
//! minimize x^2 + 3/2*x*y - (y - 1)^2
//! st 1 - x^2 - y^2 >= 0
//! st x - y == 0
//! box -1 1          # uniform bounds
//! box y 0 2         # per-variable override
//! ```
//!
//! `^` binds tighter than `*` and `/`, which bind tighter than `+` and `-`.
//! Exponents must be nonnegative integer literals. Division is only allowed by
//! constants. `#` starts a comment.

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::problem::{GpoProblem, HyperRectangle};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Ge,
    Le,
    EqEq,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn perr<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        column,
        message: message.into(),
    })
}

fn lex(line_no: usize, text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, col });
            i += 1;
            continue;
        }
        if c == '>' || c == '<' || c == '=' {
            if chars.get(i + 1) == Some(&'=') {
                let tok = match c {
                    '>' => Tok::Ge,
                    '<' => Tok::Le,
                    _ => Tok::EqEq,
                };
                out.push(Token { tok, col });
                i += 2;
                continue;
            }
            return perr(line_no, col, format!("expected '{c}=' "));
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // optional exponent part
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = match s.parse() {
                Ok(v) => v,
                Err(_) => return perr(line_no, col, format!("malformed number '{s}'")),
            };
            out.push(Token {
                tok: Tok::Num(v, s),
                col,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                col,
            });
            continue;
        }
        return perr(line_no, col, format!("unexpected character '{c}'"));
    }
    Ok(out)
}

struct ExprParser<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
    vars: &'a [String],
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn n(&self) -> usize {
        self.vars.len()
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?)?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = acc.mul(&self.unary()?)?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let col = self.col();
                    let d = self.unary()?;
                    if d.degree() > 0 {
                        return perr(self.line, col, "division by a non-constant expression");
                    }
                    let c = d.constant_term();
                    if c == 0.0 {
                        return perr(self.line, col, "division by zero");
                    }
                    acc = acc.scale(1.0 / c);
                }
                Some(Tok::Num(..)) | Some(Tok::Ident(_)) | Some(Tok::LParen) => {
                    return perr(
                        self.line,
                        self.col(),
                        "implicit multiplication is not allowed; use '*'",
                    );
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(v, s)) => {
                self.pos += 1;
                if s.contains(['.', 'e', 'E']) || v.fract() != 0.0 {
                    return perr(self.line, col, format!("fractional exponent '{s}'"));
                }
                if v > 64.0 {
                    return perr(self.line, col, format!("exponent {s} is too large"));
                }
                Ok(base.pow(v as u32))
            }
            Some(Tok::Minus) => perr(self.line, col, "negative exponent"),
            _ => perr(self.line, col, "expected an integer exponent after '^'"),
        }
    }

    fn atom(&mut self) -> Result<Polynomial> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Num(v, _)) => {
                self.pos += 1;
                Ok(Polynomial::constant(self.n(), v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match self.vars.iter().position(|v| *v == name) {
                    Some(i) => Ok(Polynomial::var(self.n(), i)),
                    None => perr(self.line, col, format!("unknown variable '{name}'")),
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return perr(self.line, self.col(), "expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(t) => perr(self.line, col, format!("unexpected token {t:?}")),
            None => perr(self.line, col, "unexpected end of line"),
        }
    }
}

fn parse_full_expr(line: usize, toks: &[Token], vars: &[String], end_col: usize) -> Result<Polynomial> {
    let mut p = ExprParser {
        toks,
        pos: 0,
        line,
        end_col,
        vars,
    };
    let e = p.expr()?;
    if p.pos != toks.len() {
        return perr(line, p.col(), "unexpected trailing input");
    }
    Ok(e)
}

// signed literal, optionally a ratio: -3, 2.5, -3/2
fn parse_bound(line: usize, toks: &[Token], pos: &mut usize, end_col: usize) -> Result<f64> {
    let col = toks.get(*pos).map_or(end_col, |t| t.col);
    let mut sign = 1.0;
    match toks.get(*pos).map(|t| &t.tok) {
        Some(Tok::Minus) => {
            sign = -1.0;
            *pos += 1;
        }
        Some(Tok::Plus) => *pos += 1,
        _ => {}
    }
    let num = match toks.get(*pos).map(|t| &t.tok) {
        Some(Tok::Num(v, _)) => *v,
        _ => return perr(line, col, "expected a numeric bound"),
    };
    *pos += 1;
    if let Some(Tok::Slash) = toks.get(*pos).map(|t| &t.tok) {
        *pos += 1;
        match toks.get(*pos).map(|t| &t.tok) {
            Some(Tok::Num(d, _)) if *d != 0.0 => {
                *pos += 1;
                return Ok(sign * num / d);
            }
            _ => return perr(line, col, "expected a nonzero denominator"),
        }
    }
    Ok(sign * num)
}

/// Parses a problem file into a [`GpoProblem`].
pub fn parse_problem(text: &str) -> Result<GpoProblem> {
    let mut vars: Option<Vec<String>> = None;
    let mut objective: Option<Polynomial> = None;
    let mut inequalities = Vec::new();
    let mut equalities = Vec::new();
    let mut uniform: Option<(f64, f64)> = None;
    let mut per_var: Vec<Option<(f64, f64)>> = Vec::new();
    let mut any_box = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let toks = lex(line, raw)?;
        if toks.is_empty() {
            continue;
        }
        let end_col = raw.chars().count() + 1;
        let keyword = match &toks[0].tok {
            Tok::Ident(k) => k.as_str(),
            _ => return perr(line, toks[0].col, "expected a statement keyword"),
        };
        let rest = &toks[1..];
        if keyword != "vars" && vars.is_none() {
            return perr(line, toks[0].col, "a 'vars' declaration must come first");
        }
        match keyword {
            "vars" => {
                if vars.is_some() {
                    return perr(line, toks[0].col, "duplicate 'vars' declaration");
                }
                let mut names = Vec::new();
                for t in rest {
                    match &t.tok {
                        Tok::Ident(name) => {
                            if ["vars", "minimize", "st", "box"].contains(&name.as_str()) {
                                return perr(line, t.col, format!("'{name}' is a keyword"));
                            }
                            if names.contains(name) {
                                return perr(line, t.col, format!("duplicate variable '{name}'"));
                            }
                            names.push(name.clone());
                        }
                        _ => return perr(line, t.col, "expected a variable name"),
                    }
                }
                if names.is_empty() {
                    return perr(line, end_col, "'vars' needs at least one variable");
                }
                per_var = vec![None; names.len()];
                vars = Some(names);
            }
            "minimize" => {
                if objective.is_some() {
                    return perr(line, toks[0].col, "duplicate objective");
                }
                let names = vars.as_deref().unwrap_or_default();
                objective = Some(parse_full_expr(line, rest, names, end_col)?);
            }
            "st" => {
                let names = vars.as_deref().unwrap_or_default();
                let rel = rest
                    .iter()
                    .position(|t| matches!(t.tok, Tok::Ge | Tok::Le | Tok::EqEq));
                let Some(rel) = rel else {
                    return perr(line, end_col, "constraint needs '>=', '<=' or '=='");
                };
                if rel == 0 {
                    return perr(line, rest[0].col, "missing left-hand side");
                }
                let lhs = parse_full_expr(line, &rest[..rel], names, rest[rel].col)?;
                let rhs = parse_full_expr(line, &rest[rel + 1..], names, end_col)?;
                match rest[rel].tok {
                    Tok::Ge => inequalities.push(lhs.sub(&rhs)?),
                    Tok::Le => inequalities.push(rhs.sub(&lhs)?),
                    _ => equalities.push(lhs.sub(&rhs)?),
                }
            }
            "box" => {
                any_box = true;
                let names = vars.as_deref().unwrap_or_default();
                let mut pos = 0;
                let target = match rest.first().map(|t| &t.tok) {
                    Some(Tok::Ident(name)) => match names.iter().position(|v| v == name) {
                        Some(i) => {
                            pos = 1;
                            Some(i)
                        }
                        None => {
                            return perr(line, rest[0].col, format!("unknown variable '{name}'"))
                        }
                    },
                    _ => None,
                };
                let lo = parse_bound(line, rest, &mut pos, end_col)?;
                let hi = parse_bound(line, rest, &mut pos, end_col)?;
                if pos != rest.len() {
                    return perr(line, rest[pos].col, "unexpected trailing input");
                }
                if !(lo < hi) {
                    return perr(line, toks[0].col, format!("empty box interval [{lo}, {hi}]"));
                }
                match target {
                    Some(i) => per_var[i] = Some((lo, hi)),
                    None => uniform = Some((lo, hi)),
                }
            }
            other => return perr(line, toks[0].col, format!("unknown statement '{other}'")),
        }
    }

    let Some(var_names) = vars else {
        return perr(last_line.max(1), 1, "missing 'vars' declaration");
    };
    let Some(objective) = objective else {
        return perr(last_line.max(1), 1, "missing 'minimize' objective");
    };
    let declared_box = if any_box {
        let mut a = Vec::with_capacity(var_names.len());
        let mut b = Vec::with_capacity(var_names.len());
        for (i, name) in var_names.iter().enumerate() {
            match per_var[i].or(uniform) {
                Some((lo, hi)) => {
                    a.push(lo);
                    b.push(hi);
                }
                None => {
                    return perr(last_line, 1, format!("variable '{name}' has no box bounds"))
                }
            }
        }
        Some(HyperRectangle::new(a, b)?)
    } else {
        None
    };
    GpoProblem::new(var_names, objective, inequalities, equalities, declared_box)
}
