//! A small arithmetic expression grammar for custom observables:
//! `+ - * / ^`, `sin`, `cos`, `exp`, numeric literals, parentheses and state
//! references `x1 … xn` (1-based). `^` binds tighter than unary minus and is
//! right-associative, so `-x1^2` is `-(x1^2)` and `x1^3^2` is `x1^(3^2)`.

use crate::error::{Error, Result};

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 0-based state index.
    State(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    /// Evaluate at a state vector (panics are impossible: indices are
    /// validated against the state dimension at dictionary-build time).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::State(i) => x[*i],
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => {
                let base = a.eval(x);
                // Integer exponents go through powi so that sign handling is
                // exact (important for the antithetic cancellation property).
                if let Expr::Const(c) = **b {
                    if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 {
                        return base.powi(c as i32);
                    }
                }
                base.powf(b.eval(x))
            }
            Expr::Neg(a) => -a.eval(x),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Exp(a) => a.eval(x).exp(),
        }
    }

    /// Largest referenced state index plus one (0 when no state appears).
    pub fn max_state(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::State(i) => i + 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_state().max(b.max_state())
            }
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.max_state(),
        }
    }

    /// Collect every referenced (0-based) state index.
    pub fn collect_states(&self, out: &mut std::collections::BTreeSet<usize>) {
        match self {
            Expr::Const(_) => {}
            Expr::State(i) => {
                out.insert(*i);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.collect_states(out);
                b.collect_states(out);
            }
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => a.collect_states(out),
        }
    }
}

/// Parse an expression source string.
pub fn parse(source: &str) -> Result<Expr> {
    let mut p = Parser {
        source,
        chars: source.char_indices().peekable(),
    };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if let Some(&(pos, c)) = p.chars.peek() {
        return Err(p.err(format!("unexpected character `{c}` at offset {pos}")));
    }
    Ok(e)
}

struct Parser<'a> {
    source: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::InvalidExpression {
            text: self.source.to_string(),
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some(&(_, c)) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn eat(&mut self, want: char) -> bool {
        self.skip_ws();
        if matches!(self.chars.peek(), Some(&(_, c)) if c == want) {
            self.chars.next();
            true
        } else {
            false
        }
    }

    fn peek_char(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.peek().map(|&(_, c)| c)
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat('-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat('/') {
                let rhs = self.unary()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    // power := atom ('^' unary)?   (right-associative, exponent may be signed)
    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek_char() {
            Some('(') => {
                self.chars.next();
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.err("missing closing parenthesis"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(format!("unexpected character `{c}`"))),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let mut text = String::new();
        while let Some(&(_, c)) = self.chars.peek() {
            if c.is_ascii_digit() || c == '.' {
                text.push(c);
                self.chars.next();
            } else if (c == 'e' || c == 'E') && !text.is_empty() {
                // Exponent part: e, optional sign, digits.
                let mut clone = self.chars.clone();
                clone.next();
                let mut exp = String::from("e");
                if let Some(&(_, s)) = clone.peek() {
                    if s == '+' || s == '-' {
                        exp.push(s);
                        clone.next();
                    }
                }
                if matches!(clone.peek(), Some(&(_, d)) if d.is_ascii_digit()) {
                    while matches!(clone.peek(), Some(&(_, d)) if d.is_ascii_digit()) {
                        let (_, d) = clone.next().unwrap();
                        exp.push(d);
                    }
                    text.push_str(&exp);
                    self.chars = clone;
                }
                break;
            } else {
                break;
            }
        }
        text.parse::<f64>()
            .map(Expr::Const)
            .map_err(|_| self.err(format!("invalid number literal `{text}`")))
    }

    fn ident(&mut self) -> Result<Expr> {
        let mut name = String::new();
        while let Some(&(_, c)) = self.chars.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                name.push(c);
                self.chars.next();
            } else {
                break;
            }
        }
        // State references: x<digits>, 1-based.
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                let idx: usize = rest
                    .parse()
                    .map_err(|_| self.err(format!("invalid state reference `{name}`")))?;
                if idx == 0 {
                    return Err(self.err("state references are 1-based; `x0` is invalid"));
                }
                return Ok(Expr::State(idx - 1));
            }
        }
        let func = match name.as_str() {
            "sin" => Expr::Sin as fn(Box<Expr>) -> Expr,
            "cos" => Expr::Cos,
            "exp" => Expr::Exp,
            other => return Err(self.err(format!("unknown identifier `{other}`"))),
        };
        if !self.eat('(') {
            return Err(self.err(format!("`{name}` must be called as {name}(…)")));
        }
        let arg = self.expr()?;
        if !self.eat(')') {
            return Err(self.err("missing closing parenthesis"));
        }
        Ok(func(Box::new(arg)))
    }
}
