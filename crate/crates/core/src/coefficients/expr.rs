//! Coefficient expression language.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ('-' | '+') factor | base ('^' integer)?
//! base   := number | ident | '(' expr ')' | func '(' expr (',' expr)* ')'
//! ident  := x | y | z | pi
//! func   := sin | cos | exp | log | sqrt | abs | tanh
//! ```
//!
//! Unary signs bind looser than `^`, so `-x^2` is `-(x^2)`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Tanh => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Parsed expression tree. Variables are indexed 0 = x, 1 = y, 2 = z.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens, pos: 0, len: text.len() };
        let expr = parser.expr()?;
        match parser.peek() {
            None => Ok(expr),
            Some(tok) => Err(Error::Syntax {
                pos: tok.pos,
                msg: format!("unexpected {}", tok.kind),
            }),
        }
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => x[*i],
            Expr::Neg(a) => -a.eval(x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(a, n) => a.eval(x).powi(*n),
            Expr::Call(f, a) => f.apply(a.eval(x)),
        }
    }

    /// Whether the expression mentions coordinate `axis` anywhere.
    pub fn depends_on(&self, axis: usize) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(i) => *i == axis,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(axis),
            Expr::Bin(_, a, b) => a.depends_on(axis) || b.depends_on(axis),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ if !(0..3).any(|a| self.depends_on(a)) => Some(self.eval(&[0.0; 3])),
            _ => None,
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; numbers use the shortest round-trip representation.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(i) => f.write_str(["x", "y", "z"][*i]),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Bin(op, a, b) => {
                let op = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({a} {op} {b})")
            }
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Num(v) => write!(f, "number {v}"),
            TokKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokKind::Op(c) => write!(f, "`{c}`"),
            TokKind::LParen => f.write_str("`(`"),
            TokKind::RParen => f.write_str("`)`"),
            TokKind::Comma => f.write_str("`,`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    pos: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let kind = if c.is_ascii_digit() || c == '.' {
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
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("malformed number `{lit}`"),
            })?;
            TokKind::Num(v)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            TokKind::Ident(text[start..i].to_string())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => TokKind::Op(c),
                '(' => TokKind::LParen,
                ')' => TokKind::RParen,
                ',' => TokKind::Comma,
                _ => {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            }
        };
        out.push(Token { kind, pos: start });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eof_error(&self, what: &str) -> Error {
        Error::Syntax {
            pos: self.len,
            msg: format!("unexpected end of input, expected {what}"),
        }
    }

    fn expect(&mut self, kind: TokKind, what: &str) -> Result<()> {
        match self.next() {
            Some(t) if t.kind == kind => Ok(()),
            Some(t) => Err(Error::Syntax {
                pos: t.pos,
                msg: format!("expected {what}, found {}", t.kind),
            }),
            None => Err(self.eof_error(what)),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Token { kind: TokKind::Op(c @ ('+' | '-')), .. }) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while let Some(Token { kind: TokKind::Op(c @ ('*' | '/')), .. }) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(Token { kind: TokKind::Op('-'), .. }) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Some(Token { kind: TokKind::Op('+'), .. }) => {
                self.pos += 1;
                self.factor()
            }
            _ => {
                let base = self.base()?;
                if let Some(Token { kind: TokKind::Op('^'), .. }) = self.peek() {
                    self.pos += 1;
                    let n = self.integer()?;
                    Ok(Expr::Pow(Box::new(base), n))
                } else {
                    Ok(base)
                }
            }
        }
    }

    fn integer(&mut self) -> Result<i32> {
        let negative = match self.peek() {
            Some(Token { kind: TokKind::Op('-'), .. }) => {
                self.pos += 1;
                true
            }
            _ => false,
        };
        match self.next() {
            Some(Token { kind: TokKind::Num(v), pos }) => {
                if v.fract() != 0.0 || v.abs() > i32::MAX as f64 {
                    return Err(Error::Syntax {
                        pos,
                        msg: format!("exponent must be an integer, found {v}"),
                    });
                }
                let n = v as i32;
                Ok(if negative { -n } else { n })
            }
            Some(t) => Err(Error::Syntax {
                pos: t.pos,
                msg: format!("expected integer exponent, found {}", t.kind),
            }),
            None => Err(self.eof_error("integer exponent")),
        }
    }

    fn base(&mut self) -> Result<Expr> {
        let tok = self.next().ok_or_else(|| self.eof_error("operand"))?;
        match tok.kind {
            TokKind::Num(v) => Ok(Expr::Num(v)),
            TokKind::LParen => {
                let e = self.expr()?;
                self.expect(TokKind::RParen, "`)`")?;
                Ok(e)
            }
            TokKind::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(TokKind::LParen, "`(` after function name")?;
                    let mut args = vec![self.expr()?];
                    while let Some(Token { kind: TokKind::Comma, .. }) = self.peek() {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(TokKind::RParen, "`)`")?;
                    if args.len() != 1 {
                        return Err(Error::ArityMismatch {
                            name,
                            expected: 1,
                            got: args.len(),
                        });
                    }
                    Ok(Expr::Call(func, Box::new(args.pop().unwrap())))
                } else {
                    match name.as_str() {
                        "x" => Ok(Expr::Var(0)),
                        "y" => Ok(Expr::Var(1)),
                        "z" => Ok(Expr::Var(2)),
                        "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                        _ => Err(Error::UnknownIdentifier { name, pos: tok.pos }),
                    }
                }
            }
            other => Err(Error::Syntax {
                pos: tok.pos,
                msg: format!("expected operand, found {other}"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_and_products() {
        assert_eq!(Expr::parse("1.0").unwrap().eval(&[3.0, 4.0, 5.0]), 1.0);
        let e = Expr::parse("sin(x)*y").unwrap();
        let v = e.eval(&[std::f64::consts::FRAC_PI_2, 2.0, 0.0]);
        assert_eq!(v, 2.0);
    }

    #[test]
    fn gaussian_against_closure() {
        let e = Expr::parse("exp(-x^2)").unwrap();
        assert_eq!(e.eval(&[0.0; 3]), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let x: f64 = rng.random_range(-3.0..3.0);
            let oracle = (-(x * x)).exp();
            assert!((e.eval(&[x, 0.0, 0.0]) - oracle).abs() <= 1e-14);
        }
    }

    #[test]
    fn precedence() {
        let e = Expr::parse("1 + 2*3^2 - 4/2").unwrap();
        assert_eq!(e.eval(&[0.0; 3]), 17.0);
        let e = Expr::parse("-x^2").unwrap();
        assert_eq!(e.eval(&[3.0, 0.0, 0.0]), -9.0);
        let e = Expr::parse("x^-1 + 2e-1 + 1.5E+1").unwrap();
        assert!((e.eval(&[4.0, 0.0, 0.0]) - 15.45).abs() < 1e-14);
    }

    #[test]
    fn errors_carry_positions() {
        match Expr::parse("1 + * x") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("unexpected {other:?}"),
        }
        match Expr::parse("sin(x") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Expr::parse("w + 1"),
            Err(Error::UnknownIdentifier { pos: 0, .. })
        ));
        assert!(matches!(
            Expr::parse("sin(x, y)"),
            Err(Error::ArityMismatch { got: 2, .. })
        ));
        assert!(matches!(Expr::parse("x^1.5"), Err(Error::Syntax { .. })));
        assert!(matches!(Expr::parse("x $ 2"), Err(Error::Syntax { pos: 2, .. })));
    }

    #[test]
    fn dependency_analysis() {
        let e = Expr::parse("x*y + 3").unwrap();
        assert!(e.depends_on(0) && e.depends_on(1) && !e.depends_on(2));
        assert_eq!(Expr::parse("2*pi").unwrap().as_constant(), Some(2.0 * std::f64::consts::PI));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-10.0f64..10.0).prop_map(Expr::Num),
            (0usize..3).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), inner.clone(), 0usize..4).prop_map(|(a, b, k)| {
                    let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][k];
                    Expr::Bin(op, Box::new(a), Box::new(b))
                }),
                (inner.clone(), -3i32..4).prop_map(|(a, n)| Expr::Pow(Box::new(a), n)),
                (inner, 0usize..7).prop_map(|(a, k)| {
                    let f = [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Sqrt, Func::Abs, Func::Tanh][k];
                    Expr::Call(f, Box::new(a))
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr(), x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
            let printed = e.to_string();
            let reparsed = Expr::parse(&printed).unwrap();
            let p = [x, y, z];
            let (a, b) = (e.eval(&p), reparsed.eval(&p));
            prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()), "{} vs {}", a, b);
        }
    }
}
