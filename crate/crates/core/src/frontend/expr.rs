//! Arithmetic expressions over `x1..x3`, `u`, `p1..p3`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?          right-associative
//! primary := number | var | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! so `-2^2 = -4` and `2^3^2 = 512`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X(usize),
    U,
    P(usize),
}

impl Var {
    fn parse(name: &str) -> Option<Var> {
        match name {
            "x1" => Some(Var::X(0)),
            "x2" => Some(Var::X(1)),
            "x3" => Some(Var::X(2)),
            "u" => Some(Var::U),
            "p1" => Some(Var::P(0)),
            "p2" => Some(Var::P(1)),
            "p3" => Some(Var::P(2)),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::U => f.write_str("u"),
            Var::P(i) => write!(f, "p{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    fn parse(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(&self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(Var),
    Neg(Box<Expression>),
    Bin(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

/// Values bound to the identifiers. Unused coordinates may be left at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Env {
    pub x: [f64; 3],
    pub u: f64,
    pub p: [f64; 3],
}

impl Env {
    pub fn new(x: &[f64], u: f64, p: &[f64]) -> Self {
        let mut env = Env {
            u,
            ..Env::default()
        };
        for (d, s) in env.x.iter_mut().zip(x) {
            *d = *s;
        }
        for (d, s) in env.p.iter_mut().zip(p) {
            *d = *s;
        }
        env
    }

    fn get(&self, v: Var) -> f64 {
        match v {
            Var::X(i) => self.x[i],
            Var::U => self.u,
            Var::P(i) => self.p[i],
        }
    }
}

impl Expression {
    pub fn parse(source: &str) -> Result<Expression> {
        parse(source)
    }

    pub fn constant(v: f64) -> Expression {
        Expression::Num(v)
    }

    /// Evaluates in IEEE double precision. Division by zero, logarithms of
    /// non-positive numbers, square roots of negatives and any non-finite
    /// intermediate are errors naming the offending subexpression.
    pub fn eval(&self, env: &Env) -> Result<f64> {
        let v = match self {
            Expression::Num(v) => *v,
            Expression::Var(var) => env.get(*var),
            Expression::Neg(e) => -e.eval(env)?,
            Expression::Bin(op, l, r) => {
                let a = l.eval(env)?;
                let b = r.eval(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.eval_error("division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            Expression::Call(func, arg) => {
                let a = arg.eval(env)?;
                match func {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(self.eval_error(&format!("log of non-positive value {a}")));
                        }
                        a.ln()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(self.eval_error(&format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                }
            }
        };
        if !v.is_finite() {
            return Err(self.eval_error(&format!("non-finite result {v}")));
        }
        Ok(v)
    }

    fn eval_error(&self, message: &str) -> Error {
        Error::Eval {
            expr: self.to_string(),
            message: message.to_string(),
        }
    }

    /// Whether the expression mentions `u` or any `p_i`.
    pub fn depends_on_solution(&self) -> bool {
        match self {
            Expression::Num(_) => false,
            Expression::Var(v) => !matches!(v, Var::X(_)),
            Expression::Neg(e) | Expression::Call(_, e) => e.depends_on_solution(),
            Expression::Bin(_, l, r) => l.depends_on_solution() || r.depends_on_solution(),
        }
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expression::Num(v) if *v == 0.0)
    }
}

/// Fully parenthesized output; re-parsing it gives back the same tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(v) => write!(f, "{v:?}"),
            Expression::Var(v) => write!(f, "{v}"),
            Expression::Neg(e) => write!(f, "(-{e})"),
            Expression::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expression::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((start, Tok::Op(c as char)));
                i += 1;
            }
            b'(' => {
                out.push((start, Tok::LParen));
                i += 1;
            }
            b')' => {
                out.push((start, Tok::RParen));
                i += 1;
            }
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
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Syntax {
                        offset: start,
                        message: format!("number `{text}` out of range"),
                    });
                }
                out.push((start, Tok::Num(v)));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(src[start..i].to_string())));
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

// Deep nesting is cut off before it can exhaust the stack.
const MAX_DEPTH: usize = 256;

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expected(&self, what: &str) -> Error {
        Error::Syntax {
            offset: self.offset(),
            message: format!("expected {what}, found {}", self.peek().describe()),
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(Error::Syntax {
                offset: self.offset(),
                message: format!("expression nested deeper than {MAX_DEPTH}"),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expression> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expression> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expression::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expression> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(Expression::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression> {
        let base = self.primary()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            self.enter()?;
            let exp = self.unary()?;
            self.depth -= 1;
            return Ok(Expression::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expression> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expression::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.close_paren()?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(v) = Var::parse(&name) {
                    return Ok(Expression::Var(v));
                }
                if let Some(func) = Func::parse(&name) {
                    if self.peek() != &Tok::LParen {
                        return Err(self.expected(&format!("`(` after `{name}`")));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.close_paren()?;
                    return Ok(Expression::Call(func, Box::new(arg)));
                }
                Err(Error::UnknownIdentifier { offset, name })
            }
            tok => {
                self.pos -= usize::from(tok != Tok::End);
                Err(self.expected("number, identifier or `(`"))
            }
        }
    }

    fn close_paren(&mut self) -> Result<()> {
        if self.peek() != &Tok::RParen {
            return Err(self.expected("`)`"));
        }
        self.bump();
        Ok(())
    }
}

/// Recursive-descent parse of one expression.
pub fn parse(source: &str) -> Result<Expression> {
    let toks = tokenize(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if p.peek() != &Tok::End {
        return Err(p.expected("operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, env: &Env) -> Result<f64> {
        parse(s)?.eval(env)
    }

    #[test]
    fn spec_examples() {
        let z = Env::default();
        assert_eq!(ev("12 + 6", &z).unwrap(), 18.0);
        let e = Env::new(&[1.0, 2.0], 0.0, &[]);
        assert_eq!(ev("x1^2 + x2^2", &e).unwrap(), 5.0);
        let e = Env::new(&[], 0.0, &[2.0]);
        assert_eq!(ev("exp(u) * (1 + p1^2)", &e).unwrap(), 5.0);
        assert_eq!(ev("sqrt(4)", &z).unwrap(), 2.0);
    }

    #[test]
    fn precedence() {
        let z = Env::default();
        assert_eq!(ev("2+3*4^2", &z).unwrap(), 50.0);
        assert_eq!(ev("-2^2", &z).unwrap(), -4.0);
        assert_eq!(ev("2^3^2", &z).unwrap(), 512.0);
        assert_eq!(ev("2^-1", &z).unwrap(), 0.5);
        assert_eq!(ev("8/4/2", &z).unwrap(), 1.0);
        assert_eq!(ev("10-4-3", &z).unwrap(), 3.0);
        assert_eq!(ev("--3", &z).unwrap(), 3.0);
        assert_eq!(ev("-x1*2", &Env::new(&[3.0], 0.0, &[])).unwrap(), -6.0);
        assert_eq!(ev(" 1.5e1 +\t2E-1 ", &z).unwrap(), 15.2);
    }

    #[test]
    fn eval_errors() {
        let e = Env::new(&[1.0], 0.0, &[]);
        match ev("1/ (x1 - 1)", &e) {
            Err(Error::Eval { expr, message }) => {
                assert!(message.contains("division by zero"));
                assert!(expr.contains("x1"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(ev("log(0)", &e), Err(Error::Eval { .. })));
        assert!(matches!(ev("log(-1)", &e), Err(Error::Eval { .. })));
        assert!(matches!(ev("sqrt(-1)", &e), Err(Error::Eval { .. })));
        assert!(matches!(ev("exp(1000)", &e), Err(Error::Eval { .. })));
        assert!(matches!(ev("(-8)^0.5", &e), Err(Error::Eval { .. })));
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("1 + * 2") {
            Err(Error::Syntax { offset, message }) => {
                assert_eq!(offset, 4);
                assert!(message.contains("expected"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("(1 + 2"), Err(Error::Syntax { offset: 6, .. })));
        assert!(matches!(parse("1 2"), Err(Error::Syntax { offset: 2, .. })));
        assert!(matches!(parse(""), Err(Error::Syntax { offset: 0, .. })));
        assert!(matches!(parse("exp 1"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("1e999"), Err(Error::Syntax { .. })));
        assert!(matches!(parse("2 # 3"), Err(Error::Syntax { offset: 2, .. })));
        match parse("x4 + 1") {
            Err(Error::UnknownIdentifier { offset, name }) => {
                assert_eq!((offset, name.as_str()), (0, "x4"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("2 * tan(1)"), Err(Error::UnknownIdentifier { offset: 4, .. })));
    }

    #[test]
    fn deep_nesting_is_rejected_not_overflowed() {
        let s = format!("{}1{}", "(".repeat(10_000), ")".repeat(10_000));
        assert!(matches!(parse(&s), Err(Error::Syntax { .. })));
        let s = "-".repeat(10_000) + "1";
        assert!(parse(&s).is_err());
        let s = "2^".repeat(10_000) + "1";
        assert!(parse(&s).is_err());
    }

    #[test]
    fn print_parse_fixpoint() {
        for s in [
            "2+3*4^2",
            "-2^2",
            "exp(u) * (1 + p1^2)",
            "x1 - (x2 - x3) / 1e-7",
            "abs(sin(x1)) ^ cos(p3) - -u",
            "0.1 + 18",
        ] {
            let a = parse(s).unwrap();
            let b = parse(&a.to_string()).unwrap();
            assert_eq!(a, b, "{s}");
        }
    }

    #[test]
    fn solution_dependence() {
        assert!(!parse("x1 + exp(x2)").unwrap().depends_on_solution());
        assert!(parse("x1 + u").unwrap().depends_on_solution());
        assert!(parse("sin(p2)").unwrap().depends_on_solution());
    }
}
