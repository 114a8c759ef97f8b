//! Expression trees for real-valued functions on ℝⁿ.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := NUMBER | VAR | CONST | FUNC '(' expr (',' expr)* ')' | '(' expr ')' | '-' factor
//! VAR    := 'x' DIGIT+            (1-based coordinate index)
//! CONST  := 'pi' | 'e'
//! ```
//!
//! Besides the elementary functions, a few piecewise primitives are accepted:
//! `sign(u)`, `ind(u, a, b)` (1 on `[a, b)`), `bump(r)` (the standard
//! `exp(-1/(1-r²))` bump on `|r| < 1`) and `radial(r0, inner, outer)`, which
//! picks `inner` when the Euclidean norm of the point is below `r0`.

use std::fmt;

use crate::error::{DomainError, DomainKind, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
    Pow,
    Min,
    Max,
    Sign,
    Ind,
    Bump,
    Radial,
}

impl Func {
    const ALL: [Func; 13] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Abs,
        Func::Sqrt,
        Func::Pow,
        Func::Min,
        Func::Max,
        Func::Sign,
        Func::Ind,
        Func::Bump,
        Func::Radial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
            Func::Sign => "sign",
            Func::Ind => "ind",
            Func::Bump => "bump",
            Func::Radial => "radial",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            Func::Ind | Func::Radial => 3,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Largest coordinate index referenced, plus one.
    pub fn min_dim(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) => e.min_dim(),
            Expr::Bin(_, a, b) => a.min_dim().max(b.min_dim()),
            Expr::Call(_, args) => args.iter().map(Expr::min_dim).max().unwrap_or(0),
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        let v = self.eval_raw(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainError::new(DomainKind::NonFinite, x))
        }
    }

    fn eval_raw(&self, x: &[f64]) -> Result<f64, DomainError> {
        let err = |kind| DomainError::new(kind, x);
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(i) => x.get(*i).copied().ok_or_else(|| err(DomainKind::MissingCoordinate)),
            Expr::Neg(e) => Ok(-e.eval_raw(x)?),
            Expr::Bin(op, a, b) => {
                let a = a.eval_raw(x)?;
                let b = b.eval_raw(x)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(err(DomainKind::DivisionByZero))
                        } else {
                            Ok(a / b)
                        }
                    }
                }
            }
            Expr::Call(func, args) => {
                // radial evaluates only the selected branch
                if let Func::Radial = func {
                    let r0 = args[0].eval_raw(x)?;
                    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    return if norm < r0 {
                        args[1].eval_raw(x)
                    } else {
                        args[2].eval_raw(x)
                    };
                }
                let u = args[0].eval_raw(x)?;
                let out = match func {
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return Err(err(DomainKind::LogNonPositive));
                        }
                        u.ln()
                    }
                    Func::Abs => u.abs(),
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(err(DomainKind::SqrtNegative));
                        }
                        u.sqrt()
                    }
                    Func::Pow => u.powf(args[1].eval_raw(x)?),
                    Func::Min => u.min(args[1].eval_raw(x)?),
                    Func::Max => u.max(args[1].eval_raw(x)?),
                    Func::Sign => {
                        if u > 0.0 {
                            1.0
                        } else if u < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                    Func::Ind => {
                        let lo = args[1].eval_raw(x)?;
                        let hi = args[2].eval_raw(x)?;
                        if lo <= u && u < hi {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Func::Bump => bump(u),
                    Func::Radial => unreachable!(),
                };
                if out.is_nan() {
                    Err(err(DomainKind::NonFinite))
                } else {
                    Ok(out)
                }
            }
        }
    }

    /// `(a, b)` when `self` is `a·x_axis + b` and reads no other coordinate.
    fn affine_in(&self, axis: usize) -> Option<(f64, f64)> {
        if !self.reads_only(axis) {
            return None;
        }
        let mut x = vec![0.0; axis + 1];
        let mut at = |t: f64| {
            x[axis] = t;
            self.eval(&x).ok()
        };
        let (v0, v1, v2) = (at(0.0)?, at(1.0)?, at(2.0)?);
        let slope = v1 - v0;
        let scale = v0.abs().max(v1.abs()).max(v2.abs()).max(1.0);
        ((v2 - 2.0 * v1 + v0).abs() <= 1e-12 * scale).then_some((slope, v0))
    }

    fn reads_only(&self, axis: usize) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(i) => *i == axis,
            Expr::Neg(e) => e.reads_only(axis),
            Expr::Bin(_, a, b) => a.reads_only(axis) && b.reads_only(axis),
            Expr::Call(_, args) => args.iter().all(|a| a.reads_only(axis)),
        }
    }

    /// Axis-aligned jump locations along `axis`: the constant thresholds of
    /// `ind(x_k, a, b)` and `sign(x_k)` terms, and the support edges of
    /// `bump` applied to an affine function of `x_k`.
    pub fn breakpoints(&self, axis: usize, out: &mut Vec<f64>) {
        match self {
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(e) => e.breakpoints(axis, out),
            Expr::Bin(_, a, b) => {
                a.breakpoints(axis, out);
                b.breakpoints(axis, out);
            }
            Expr::Call(func, args) => {
                match (func, args.first()) {
                    (Func::Sign, Some(Expr::Var(i))) if *i == axis => out.push(0.0),
                    (Func::Ind, Some(Expr::Var(i))) if *i == axis => {
                        for bound in &args[1..] {
                            if let Ok(v) = bound.eval(&[]) {
                                out.push(v);
                            }
                        }
                    }
                    (Func::Bump, Some(arg)) => {
                        if let Some((slope, offset)) = arg.affine_in(axis) {
                            if slope != 0.0 {
                                out.push((-1.0 - offset) / slope);
                                out.push((1.0 - offset) / slope);
                            }
                        }
                    }
                    _ => {}
                }
                for a in args {
                    a.breakpoints(axis, out);
                }
            }
        }
    }
}

/// `exp(-1/(1-r²))` on `|r| < 1`, zero elsewhere.
pub fn bump(r: f64) -> f64 {
    let q = 1.0 - r * r;
    if q > 0.0 {
        (-1.0 / q).exp()
    } else {
        0.0
    }
}

/// Fully parenthesised rendering; parsing the output yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    // Not produced by the parser; rendered so it still reads back.
                    write!(f, "(0-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
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
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
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
                    expected: vec!["number".into()],
                    found: format!("`{lit}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Syntax {
                        pos: start,
                        expected: vec!["finite number".into()],
                        found: format!("`{lit}`"),
                    });
                }
                toks.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(Error::Syntax {
                    pos: start,
                    expected: vec!["operator".into(), "number".into(), "identifier".into()],
                    found: format!("character {:?}", text[start..].chars().next().unwrap()),
                })
            }
        };
        toks.push((tok, start));
        i += 1;
    }
    toks.push((Tok::End, text.len()));
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &[&str]) -> Result<T> {
        Err(Error::Syntax {
            pos: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        const FACTOR: [&str; 5] = ["number", "variable", "function", "'('", "'-'"];
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let pos = self.pos();
                self.bump();
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return self.fail(&["'('"]);
                    }
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect_rparen()?;
                    if args.len() != func.arity() {
                        return Err(Error::Arity {
                            func: name,
                            expected: func.arity(),
                            found: args.len(),
                            pos,
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => return Ok(Expr::Num(std::f64::consts::E)),
                    _ => {}
                }
                if let Some(digits) = name.strip_prefix('x') {
                    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                        if let Ok(k) = digits.parse::<usize>() {
                            if k >= 1 {
                                return Ok(Expr::Var(k - 1));
                            }
                        }
                    }
                }
                Err(Error::UnknownIdentifier { name, pos })
            }
            _ => self.fail(&FACTOR),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.peek() {
            Tok::RParen => {
                self.bump();
                Ok(())
            }
            _ => self.fail(&["')'", "','", "operator"]),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            pos: 0,
            expected: vec!["expression".into()],
            found: "end of input".into(),
        });
    }
    if !text.is_ascii() {
        let pos = text.char_indices().find(|(_, c)| !c.is_ascii()).map(|(i, _)| i).unwrap_or(0);
        return Err(Error::Syntax {
            pos,
            expected: vec!["ASCII input".into()],
            found: "non-ASCII character".into(),
        });
    }
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail(&["operator", "end of input"]);
    }
    Ok(e)
}

/// Evaluates a closed numeric expression such as `-pi/2` or `2pi`.
///
/// A number immediately followed by `pi` or `e` is read as a product.
pub fn parse_number(text: &str) -> Result<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    for (suffix, value) in [("pi", std::f64::consts::PI), ("e", std::f64::consts::E)] {
        if let Some(prefix) = t.strip_suffix(suffix) {
            let prefix = prefix.trim();
            if prefix.is_empty() {
                return Ok(value);
            }
            if prefix == "-" {
                return Ok(-value);
            }
            if let Ok(k) = prefix.parse::<f64>() {
                return Ok(k * value);
            }
        }
    }
    let e = parse_expr(t)?;
    if e.min_dim() > 0 {
        return Err(Error::precondition(format!(
            "`{t}` is not a constant expression"
        )));
    }
    Ok(e.eval(&[])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sine() {
        let e = parse_expr("sin(x1)").unwrap();
        assert_eq!(e, Expr::Call(Func::Sin, vec![Expr::Var(0)]));
    }

    #[test]
    fn product_of_sines_is_two_dimensional() {
        let e = parse_expr("sin(x1)*sin(x2)").unwrap();
        assert_eq!(
            e,
            Expr::Bin(
                BinOp::Mul,
                Box::new(Expr::Call(Func::Sin, vec![Expr::Var(0)])),
                Box::new(Expr::Call(Func::Sin, vec![Expr::Var(1)])),
            )
        );
        assert_eq!(e.min_dim(), 2);
    }

    #[test]
    fn log_of_abs() {
        let e = parse_expr("log(abs(x1))").unwrap();
        assert_eq!(
            e,
            Expr::Call(Func::Log, vec![Expr::Call(Func::Abs, vec![Expr::Var(0)])])
        );
        assert_eq!(e.min_dim(), 1);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = parse_expr("1 - 2 * -x1 / 4").unwrap();
        assert_eq!(e.eval(&[2.0]).unwrap(), 2.0);
        let e = parse_expr("2 - 3 - 4").unwrap();
        assert_eq!(e.eval(&[]).unwrap(), -5.0);
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_expr("sin(x1 +)") {
            Err(Error::Syntax { pos, expected, .. }) => {
                assert_eq!(pos, 8);
                assert!(expected.iter().any(|s| s == "variable"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_expr("x1 x2"), Err(Error::Syntax { pos: 3, .. })));
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(
            parse_expr("tan(x1)"),
            Err(Error::UnknownIdentifier { pos: 0, .. })
        ));
        assert!(matches!(parse_expr("x0"), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(
            parse_expr("pow(x1)"),
            Err(Error::Arity { expected: 2, found: 1, .. })
        ));
    }

    #[test]
    fn domain_errors_are_reported() {
        let e = parse_expr("1/x1").unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap_err().kind, DomainKind::DivisionByZero);
        let e = parse_expr("log(x1)").unwrap();
        assert_eq!(e.eval(&[-1.0]).unwrap_err().kind, DomainKind::LogNonPositive);
        let e = parse_expr("sqrt(x1)").unwrap();
        assert_eq!(e.eval(&[-1.0]).unwrap_err().kind, DomainKind::SqrtNegative);
        let e = parse_expr("pow(x1, 0.5)").unwrap();
        assert_eq!(e.eval(&[-1.0]).unwrap_err().kind, DomainKind::NonFinite);
        let e = parse_expr("x2").unwrap();
        assert_eq!(e.eval(&[1.0]).unwrap_err().kind, DomainKind::MissingCoordinate);
    }

    #[test]
    fn piecewise_primitives() {
        let ind = parse_expr("ind(x1, 0, 1)").unwrap();
        assert_eq!(ind.eval(&[0.0]).unwrap(), 1.0);
        assert_eq!(ind.eval(&[1.0]).unwrap(), 0.0);
        let r = parse_expr("radial(1, log(x1), 0)").unwrap();
        // the unused branch is never evaluated
        assert_eq!(r.eval(&[-3.0]).unwrap(), 0.0);
        let mut bp = Vec::new();
        parse_expr("ind(x1, 0, 1) + sign(x2)").unwrap().breakpoints(0, &mut bp);
        assert_eq!(bp, vec![0.0, 1.0]);
        let mut bp = Vec::new();
        parse_expr("bump((x1 - 3)/2)").unwrap().breakpoints(0, &mut bp);
        assert_eq!(bp, vec![1.0, 5.0]);
        let mut bp = Vec::new();
        parse_expr("bump(x1*x1)").unwrap().breakpoints(0, &mut bp);
        assert!(bp.is_empty());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("2pi").unwrap(), 2.0 * std::f64::consts::PI);
        assert_eq!(parse_number("-pi/2").unwrap(), -std::f64::consts::FRAC_PI_2);
        assert_eq!(parse_number("1e-3").unwrap(), 1e-3);
        assert_eq!(parse_number("e").unwrap(), std::f64::consts::E);
        assert!(parse_number("x1").is_err());
    }
}
