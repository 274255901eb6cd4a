//! Forcing expressions in `t`: numbers, `t`, `i`, `pi`, `+ - * / ^`,
//! parentheses and `exp`, `sin`, `cos`. Parsing is total and evaluation has
//! no side effects.

use std::fmt;

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    T,
    I,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprError {
    /// 1-based character column in the expression.
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let col = i + 1;
        if ch.is_whitespace() {
            i += 1;
        } else if ch.is_ascii_digit() || ch == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| ExprError {
                column: col,
                message: format!("malformed number '{text}'"),
            })?;
            out.push((col, Tok::Num(v)));
        } else if ch.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((col, Tok::Ident(chars[start..i].iter().collect())));
        } else {
            let tok = match ch {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(ch),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ExprError {
                        column: col,
                        message: format!("unexpected character '{ch}'"),
                    })
                }
            };
            out.push((col, tok));
            i += 1;
        }
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

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(c, _)| *c)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            column: self.column(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
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

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // right-associative; -t^2 is -(t^2)
    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of expression");
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.close()?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "t" => Ok(Expr::T),
                "i" => Ok(Expr::I),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                "exp" | "sin" | "cos" => {
                    let f = match name.as_str() {
                        "exp" => Func::Exp,
                        "sin" => Func::Sin,
                        _ => Func::Cos,
                    };
                    if self.peek() != Some(&Tok::LParen) {
                        return self.err(format!("'{name}' needs a parenthesised argument"));
                    }
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.close()?;
                    Ok(Expr::Call(f, Box::new(arg)))
                }
                _ => {
                    self.pos -= 1;
                    self.err(format!("unknown name '{name}'"))
                }
            },
            Tok::Op(op) => {
                self.pos -= 1;
                self.err(format!("unexpected '{op}'"))
            }
            Tok::RParen => {
                self.pos -= 1;
                self.err("unexpected ')'")
            }
        }
    }

    fn close(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&Tok::RParen) {
            self.pos += 1;
            Ok(())
        } else {
            self.err("expected ')'")
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let toks = lex(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            end: src.chars().count() + 1,
        };
        let e = p.expr()?;
        if p.pos < p.toks.len() {
            return p.err("unexpected trailing input");
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let r = |x: f64| Complex64::new(x, 0.0);
        match self {
            Expr::Num(v) => r(*v),
            Expr::T => r(t),
            Expr::I => Complex64::new(0.0, 1.0),
            Expr::Neg(a) => -a.eval(t),
            Expr::Add(a, b) => a.eval(t) + b.eval(t),
            Expr::Sub(a, b) => a.eval(t) - b.eval(t),
            Expr::Mul(a, b) => a.eval(t) * b.eval(t),
            Expr::Div(a, b) => a.eval(t) / b.eval(t),
            Expr::Pow(a, b) => pow(a.eval(t), b.eval(t)),
            Expr::Call(f, a) => {
                let z = a.eval(t);
                match f {
                    Func::Exp => z.exp(),
                    Func::Sin => z.sin(),
                    Func::Cos => z.cos(),
                }
            }
        }
    }
}

fn pow(base: Complex64, exp: Complex64) -> Complex64 {
    if exp.im == 0.0 {
        let e = exp.re;
        if base == Complex64::new(0.0, 0.0) {
            return if e > 0.0 {
                base
            } else if e == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(f64::INFINITY, 0.0)
            };
        }
        if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
            return base.powi(e as i32);
        }
        if base.im == 0.0 && base.re > 0.0 {
            return Complex64::new(base.re.powf(e), 0.0);
        }
    }
    base.powc(exp)
}
