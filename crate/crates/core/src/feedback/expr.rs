//! Feedback expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | 'k' | fn '(' expr ')' | '(' expr ')'
//! fn     := 'log' | 'exp' | 'sqrt'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-k^2`
//! means `-(k^2)` and `2^-k` means `2^(-k)`.

use std::fmt;

use crate::error::{Result, UrnError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Log,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    K,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, k: f64) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::K => k,
            Expr::Neg(a) => -a.eval(k),
            Expr::Add(a, b) => a.eval(k) + b.eval(k),
            Expr::Sub(a, b) => a.eval(k) - b.eval(k),
            Expr::Mul(a, b) => a.eval(k) * b.eval(k),
            Expr::Div(a, b) => a.eval(k) / b.eval(k),
            Expr::Pow(a, b) => a.eval(k).powf(b.eval(k)),
            Expr::Call(Func::Log, a) => a.eval(k).ln(),
            Expr::Call(Func::Exp, a) => a.eval(k).exp(),
            Expr::Call(Func::Sqrt, a) => a.eval(k).sqrt(),
        }
    }

    /// Natural log of the value, kept finite where products and `exp`
    /// would overflow. NaN when the value is not positive.
    pub fn ln_eval(&self, k: f64) -> f64 {
        let direct = || {
            let v = self.eval(k);
            if v > 0.0 {
                v.ln()
            } else {
                f64::NAN
            }
        };
        match self {
            Expr::Num(_) | Expr::K | Expr::Neg(_) | Expr::Add(..) | Expr::Sub(..) => direct(),
            Expr::Call(Func::Log, _) => direct(),
            Expr::Call(Func::Exp, a) => a.eval(k),
            Expr::Call(Func::Sqrt, a) => 0.5 * a.ln_eval(k),
            Expr::Mul(a, b) => {
                let s = a.ln_eval(k) + b.ln_eval(k);
                if s.is_nan() {
                    direct()
                } else {
                    s
                }
            }
            Expr::Div(a, b) => {
                let s = a.ln_eval(k) - b.ln_eval(k);
                if s.is_nan() {
                    direct()
                } else {
                    s
                }
            }
            Expr::Pow(a, b) => {
                let la = a.ln_eval(k);
                if la.is_nan() {
                    direct()
                } else {
                    b.eval(k) * la
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }
}

fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if e.precedence() < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::K => write!(f, "k"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 3)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, "{}", if matches!(self, Expr::Add(..)) { "+" } else { "-" })?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "{}", if matches!(self, Expr::Mul(..)) { "*" } else { "/" })?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, b) => {
                wrap(f, a, 5)?;
                write!(f, "^")?;
                wrap(f, b, 3)
            }
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Log => "log",
                    Func::Exp => "exp",
                    Func::Sqrt => "sqrt",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    K,
    Func(Func),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| UrnError::Syntax {
                pos: start,
                msg: format!("malformed number '{text}'"),
            })?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_alphabetic() {
                i += 1;
            }
            let tok = match &src[start..i] {
                "k" => Tok::K,
                "log" => Tok::Func(Func::Log),
                "exp" => Tok::Func(Func::Exp),
                "sqrt" => Tok::Func(Func::Sqrt),
                other => {
                    return Err(UrnError::Syntax {
                        pos: start,
                        msg: format!("unknown identifier '{other}'"),
                    })
                }
            };
            out.push((start, tok));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => {
                return Err(UrnError::Syntax {
                    pos: i,
                    msg: format!("unexpected character '{c}'"),
                })
            }
        };
        out.push((i, tok));
        i += c.len_utf8();
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: &str) -> Result<T> {
        Err(UrnError::Syntax {
            pos: self.here(),
            msg: msg.to_string(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let base = self.base()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::K) => {
                self.pos += 1;
                Ok(Expr::K)
            }
            Some(Tok::Func(func)) => {
                self.pos += 1;
                if self.peek() != Some(&Tok::LParen) {
                    return self.err("expected '(' after function name");
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.err("expected ')'");
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(_) => self.err("expected number, 'k', function or '('"),
            None => self.err("unexpected end of input"),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: src.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

/// `coef * k^k_pow * log(k+1)^log_pow * exp(lin * k) * exp(s_coef * k^s_pow)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Monomial {
    pub coef: f64,
    pub k_pow: f64,
    pub log_pow: f64,
    pub lin: f64,
    pub stretched: Option<(f64, f64)>,
}

impl Monomial {
    fn constant(c: f64) -> Self {
        Monomial {
            coef: c,
            k_pow: 0.0,
            log_pow: 0.0,
            lin: 0.0,
            stretched: None,
        }
    }

    fn is_constant(&self) -> bool {
        self.k_pow == 0.0 && self.log_pow == 0.0 && self.lin == 0.0 && self.stretched.is_none()
    }

    fn mul(self, o: Monomial) -> Option<Monomial> {
        let stretched = match (self.stretched, o.stretched) {
            (None, s) | (s, None) => s,
            (Some((a, g)), Some((b, h))) if g == h => Some((a + b, g)),
            _ => return None,
        };
        Some(Monomial {
            coef: self.coef * o.coef,
            k_pow: self.k_pow + o.k_pow,
            log_pow: self.log_pow + o.log_pow,
            lin: self.lin + o.lin,
            stretched,
        })
    }

    fn powf(self, p: f64) -> Option<Monomial> {
        if self.coef <= 0.0 {
            return None;
        }
        Some(Monomial {
            coef: self.coef.powf(p),
            k_pow: self.k_pow * p,
            log_pow: self.log_pow * p,
            lin: self.lin * p,
            stretched: self.stretched.map(|(c, g)| (c * p, g)),
        })
    }
}

fn is_k_plus_one(e: &Expr) -> bool {
    match e {
        Expr::Add(a, b) => {
            matches!((a.as_ref(), b.as_ref()), (Expr::K, Expr::Num(c)) | (Expr::Num(c), Expr::K) if *c == 1.0)
        }
        _ => false,
    }
}

/// Structural normalization into a product of recognised atoms.
pub(crate) fn monomial(e: &Expr) -> Option<Monomial> {
    match e {
        Expr::Num(c) => Some(Monomial::constant(*c)),
        Expr::K => Some(Monomial {
            k_pow: 1.0,
            ..Monomial::constant(1.0)
        }),
        Expr::Neg(a) => {
            let m = monomial(a)?;
            Some(Monomial { coef: -m.coef, ..m })
        }
        Expr::Mul(a, b) => monomial(a)?.mul(monomial(b)?),
        Expr::Div(a, b) => {
            let d = monomial(b)?;
            if d.coef == 0.0 {
                return None;
            }
            let inv = Monomial {
                coef: 1.0 / d.coef,
                k_pow: -d.k_pow,
                log_pow: -d.log_pow,
                lin: -d.lin,
                stretched: d.stretched.map(|(c, g)| (-c, g)),
            };
            monomial(a)?.mul(inv)
        }
        Expr::Pow(a, b) => {
            let pm = monomial(b)?;
            if !pm.is_constant() {
                return None;
            }
            monomial(a)?.powf(pm.coef)
        }
        Expr::Call(Func::Sqrt, a) => monomial(a)?.powf(0.5),
        Expr::Call(Func::Log, a) if is_k_plus_one(a) => Some(Monomial {
            log_pow: 1.0,
            ..Monomial::constant(1.0)
        }),
        Expr::Call(Func::Exp, a) => {
            let m = monomial(a)?;
            if m.log_pow != 0.0 || m.lin != 0.0 || m.stretched.is_some() {
                return None;
            }
            if m.k_pow == 0.0 {
                Some(Monomial::constant(m.coef.exp()))
            } else if m.k_pow == 1.0 {
                Some(Monomial {
                    lin: m.coef,
                    ..Monomial::constant(1.0)
                })
            } else if m.k_pow > 0.0 {
                Some(Monomial {
                    stretched: Some((m.coef, m.k_pow)),
                    ..Monomial::constant(1.0)
                })
            } else {
                None
            }
        }
        _ => None,
    }
}
