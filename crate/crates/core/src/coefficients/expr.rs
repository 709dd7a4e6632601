//! Recursive-descent parser and evaluator for coefficient and source
//! expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := NUMBER | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')' | '-' factor
//! FUNC   := sin | cos | exp
//! VAR    := x1 | x2 | y1 | y2
//! ```
//!
//! Whitespace is insignificant. Errors carry a 1-based line and column.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{HomogError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    Y1,
    Y2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            (Tok::End, _) => Ok(e),
            (t, at) => Err(at.error(format!("unexpected {t} after complete expression"))),
        }
    }

    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        match self {
            Expr::Number(v) => *v,
            Expr::Var(Var::X1) => x[0],
            Expr::Var(Var::X2) => x[1],
            Expr::Var(Var::Y1) => y[0],
            Expr::Var(Var::Y2) => y[1],
            Expr::Neg(e) => -e.eval(x, y),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x, y), b.eval(x, y));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Call(f, e) => {
                let v = e.eval(x, y);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                }
            }
        }
    }

    fn any_var(&self, pred: &impl Fn(Var) -> bool) -> bool {
        match self {
            Expr::Number(_) => false,
            Expr::Var(v) => pred(*v),
            Expr::Neg(e) | Expr::Call(_, e) => e.any_var(pred),
            Expr::Binary(_, a, b) => a.any_var(pred) || b.any_var(pred),
        }
    }

    pub fn uses_x(&self) -> bool {
        self.any_var(&|v| matches!(v, Var::X1 | Var::X2))
    }

    pub fn uses_y(&self) -> bool {
        self.any_var(&|v| matches!(v, Var::Y1 | Var::Y2))
    }

    /// Largest coordinate index referenced (1 for `x1`/`y1` only, 2 if any
    /// second coordinate appears, 0 for constants).
    pub fn max_coordinate(&self) -> usize {
        if self.any_var(&|v| matches!(v, Var::X2 | Var::Y2)) {
            2
        } else if self.any_var(&|v| matches!(v, Var::X1 | Var::Y1)) {
            1
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

impl Pos {
    fn error(self, message: String) -> HomogError {
        HomogError::Syntax {
            line: self.line,
            column: self.column,
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let at = Pos { line, column };
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
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
                let v = s
                    .parse::<f64>()
                    .map_err(|_| at.error(format!("malformed number `{s}`")))?;
                column += i - start;
                out.push((Tok::Num(v), at));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                column += i - start;
                out.push((Tok::Ident(s), at));
                continue;
            }
            other => return Err(at.error(format!("unexpected character `{other}`"))),
        };
        out.push((tok, at));
        i += 1;
        column += 1;
    }
    out.push((Tok::End, Pos { line, column }));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, Pos)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> (Tok, Pos) {
        self.tokens[self.pos].clone()
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().0 {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().0 {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Number(v)),
            Tok::Minus => Ok(Expr::Neg(Box::new(self.factor()?))),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "pi" => Ok(Expr::Number(PI)),
                "x1" => Ok(Expr::Var(Var::X1)),
                "x2" => Ok(Expr::Var(Var::X2)),
                "y1" => Ok(Expr::Var(Var::Y1)),
                "y2" => Ok(Expr::Var(Var::Y2)),
                "sin" | "cos" | "exp" => {
                    let func = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        _ => Func::Exp,
                    };
                    match self.bump() {
                        (Tok::LParen, _) => {}
                        (t, at) => {
                            return Err(at.error(format!("expected `(` after `{name}`, found {t}")))
                        }
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                }
                _ => Err(at.error(format!("unknown identifier `{name}`"))),
            },
            other => Err(at.error(format!("expected a factor, found {other}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.bump() {
            (Tok::RParen, _) => Ok(()),
            (t, at) => Err(at.error(format!("expected `)`, found {t}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str) -> f64 {
        Expr::parse(s).unwrap().eval([0.5, 0.25], [0.0, 0.75])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3"), 7.0);
        assert_eq!(ev("(1 + 2) * 3"), 9.0);
        assert_eq!(ev("8 / 4 / 2"), 1.0);
        assert_eq!(ev("10 - 4 - 3"), 3.0);
        assert_eq!(ev("-2 * 3"), -6.0);
        assert_eq!(ev("2 * -3"), -6.0);
        assert_eq!(ev("--1"), 1.0);
        assert_eq!(ev("1.5e1 + .5"), 15.5);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("x1 + x2"), 0.75);
        assert_eq!(ev("y2"), 0.75);
        assert_eq!(ev("2 + cos(2*pi*y1)"), 3.0);
        assert!((ev("sin(pi/2)") - 1.0).abs() < 1e-15);
        assert!((ev("exp(0)") - 1.0).abs() < 1e-15);
        let e = Expr::parse("2 + cos(2*pi*y1)").unwrap();
        assert!(!e.uses_x());
        assert!(e.uses_y());
        assert_eq!(e.max_coordinate(), 1);
        assert_eq!(Expr::parse("x2 * 3").unwrap().max_coordinate(), 2);
    }

    #[test]
    fn whitespace_is_insignificant() {
        assert_eq!(
            Expr::parse("2+cos(2*pi*y1)").unwrap(),
            Expr::parse("  2 +\n cos ( 2 * pi * y1 ) ").unwrap()
        );
    }

    #[test]
    fn syntax_errors_report_position() {
        match Expr::parse("2 + * 3").unwrap_err() {
            HomogError::Syntax { line, column, .. } => assert_eq!((line, column), (1, 5)),
            e => panic!("wrong error {e}"),
        }
        match Expr::parse("1 +\n  foo").unwrap_err() {
            HomogError::Syntax {
                line,
                column,
                message,
            } => {
                assert_eq!((line, column), (2, 3));
                assert!(message.contains("foo"));
            }
            e => panic!("wrong error {e}"),
        }
        assert!(Expr::parse("cos 2").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("2 $ 3").is_err());
    }
}
