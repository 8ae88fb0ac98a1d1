//! Arithmetic expressions over named variables, evaluated on `f64` or [`Dual2`].
//!
//! Grammar: `+ − * / ^`, unary minus, parentheses, decimal literals, and the
//! functions `sin cos sinh cosh sqrt exp`. `^` binds tighter than unary minus
//! and associates to the right, so `-x^2^3 = -(x^(2^3))`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use routhk_core::Dual2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at column {column} in `{source_text}`")]
pub struct ParseError {
    pub message: String,
    pub column: usize,
    pub source_text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sinh,
    Cosh,
    Sqrt,
    Exp,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// Numbers an expression can be evaluated on.
pub trait Scalar: Clone {
    fn lift(x: f64) -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn neg(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn pow(self, o: Self) -> Self;
    fn call(self, f: Func) -> Self;
}

impl Scalar for f64 {
    fn lift(x: f64) -> Self {
        x
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn pow(self, o: Self) -> Self {
        f64::powf(self, o)
    }
    fn call(self, f: Func) -> Self {
        match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Sinh => self.sinh(),
            Func::Cosh => self.cosh(),
            Func::Sqrt => self.sqrt(),
            Func::Exp => self.exp(),
        }
    }
}

impl Scalar for Dual2 {
    fn lift(x: f64) -> Self {
        Dual2::constant(x)
    }
    fn add(self, o: Self) -> Self {
        self + o
    }
    fn sub(self, o: Self) -> Self {
        self - o
    }
    fn mul(self, o: Self) -> Self {
        self * o
    }
    fn div(self, o: Self) -> Self {
        self / o
    }
    fn neg(self) -> Self {
        -self
    }
    fn powi(self, n: i32) -> Self {
        Dual2::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        Dual2::powf(self, p)
    }
    fn pow(self, o: Self) -> Self {
        Dual2::pow(self, o)
    }
    fn call(self, f: Func) -> Self {
        match f {
            Func::Sin => self.sin(),
            Func::Cos => self.cos(),
            Func::Sinh => self.sinh(),
            Func::Cosh => self.cosh(),
            Func::Sqrt => self.sqrt(),
            Func::Exp => self.exp(),
        }
    }
}

impl Node {
    fn eval<S: Scalar>(&self, vars: &[S]) -> S {
        match self {
            Node::Const(c) => S::lift(*c),
            Node::Var(i) => vars[*i].clone(),
            Node::Neg(a) => a.eval(vars).neg(),
            Node::Add(a, b) => a.eval(vars).add(b.eval(vars)),
            Node::Sub(a, b) => a.eval(vars).sub(b.eval(vars)),
            Node::Mul(a, b) => a.eval(vars).mul(b.eval(vars)),
            Node::Div(a, b) => a.eval(vars).div(b.eval(vars)),
            Node::Pow(a, b) => {
                let base = a.eval(vars);
                match **b {
                    Node::Const(p) if p.fract() == 0.0 && p.abs() <= 64.0 => base.powi(p as i32),
                    Node::Const(p) => base.powf(p),
                    _ => base.pow(b.eval(vars)),
                }
            }
            Node::Call(f, a) => a.eval(vars).call(*f),
        }
    }

    /// Folds subtrees without variables into constants.
    fn fold(self) -> Node {
        let c = |n: &Node| match n {
            Node::Const(x) => Some(*x),
            _ => None,
        };
        let node = match self {
            Node::Neg(a) => Node::Neg(Box::new(a.fold())),
            Node::Add(a, b) => Node::Add(Box::new(a.fold()), Box::new(b.fold())),
            Node::Sub(a, b) => Node::Sub(Box::new(a.fold()), Box::new(b.fold())),
            Node::Mul(a, b) => Node::Mul(Box::new(a.fold()), Box::new(b.fold())),
            Node::Div(a, b) => Node::Div(Box::new(a.fold()), Box::new(b.fold())),
            Node::Pow(a, b) => Node::Pow(Box::new(a.fold()), Box::new(b.fold())),
            Node::Call(f, a) => Node::Call(f, Box::new(a.fold())),
            other => other,
        };
        let constant = match &node {
            Node::Neg(a) => c(a).is_some(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => c(a).is_some() && c(b).is_some(),
            Node::Call(_, a) => c(a).is_some(),
            _ => false,
        };
        if constant {
            Node::Const(node.eval::<f64>(&[]))
        } else {
            node
        }
    }
}

/// Names an expression may refer to: fixed constants and positional variables.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    constants: BTreeMap<String, f64>,
    variables: BTreeMap<String, usize>,
}

impl Scope {
    pub fn new() -> Self {
        let mut s = Self::default();
        s.constants.insert("pi".into(), std::f64::consts::PI);
        s
    }

    pub fn constant(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.into(), value);
        self
    }

    pub fn constants<'a>(
        mut self,
        values: impl IntoIterator<Item = (&'a String, &'a f64)>,
    ) -> Self {
        for (k, v) in values {
            self.constants.insert(k.clone(), *v);
        }
        self
    }

    pub fn variable(mut self, name: &str, index: usize) -> Self {
        self.variables.insert(name.into(), index);
        self
    }

    /// `prefix1 … prefixN` bound to positions `0 … N−1`.
    pub fn indexed(mut self, prefix: &str, count: usize) -> Self {
        for i in 0..count {
            self.variables.insert(format!("{prefix}{}", i + 1), i);
        }
        self
    }

    pub fn arity(&self) -> usize {
        self.variables.values().map(|i| i + 1).max().unwrap_or(0)
    }
}

/// A parsed expression. Cheap to clone.
#[derive(Clone)]
pub struct Expr {
    root: Arc<Node>,
    text: Arc<str>,
    arity: usize,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.text)
    }
}

impl Expr {
    pub fn parse(text: &str, scope: &Scope) -> Result<Self, ParseError> {
        let mut p = Parser {
            src: text,
            chars: text.char_indices().collect(),
            pos: 0,
            scope,
        };
        let node = p.expr()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("unexpected input"));
        }
        Ok(Self {
            root: Arc::new(node.fold()),
            text: text.into(),
            arity: scope.arity(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Number of positional variables the scope defined.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// The value when the expression has no variables.
    pub fn as_constant(&self) -> Option<f64> {
        match *self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn eval<S: Scalar>(&self, vars: &[S]) -> S {
        assert!(
            vars.len() >= self.arity,
            "expression `{}` needs {} variables",
            self.text,
            self.arity
        );
        self.root.eval(vars)
    }
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
    scope: &'a Scope,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            message: message.into(),
            column: self.pos + 1,
            source_text: self.src.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Pow(Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.name(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn slice(&self, start: usize) -> &str {
        let a = self.chars[start].0;
        let b = self.chars.get(self.pos).map_or(self.src.len(), |c| c.0);
        &self.src[a..b]
    }

    fn number(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.chars.len() && p.chars[p.pos].1.is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.chars.len() && self.chars[self.pos].1 == '.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.chars.len() && matches!(self.chars[self.pos].1, 'e' | 'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.chars.len() && matches!(self.chars[self.pos].1, '+' | '-') {
                self.pos += 1;
            }
            let before = self.pos;
            digits(self);
            if self.pos == before {
                self.pos = save;
            }
        }
        let text = self.slice(start);
        text.parse::<f64>().map(Node::Const).map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }

    fn name(&mut self) -> Result<Node, ParseError> {
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].1.is_alphanumeric() || self.chars[self.pos].1 == '_')
        {
            self.pos += 1;
        }
        let name = self.slice(start).to_string();
        if let Some(f) = Func::from_name(&name) {
            if !self.eat('(') {
                return Err(self.error(&format!("`{name}` needs an argument in parentheses")));
            }
            let arg = self.expr()?;
            if !self.eat(')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Node::Call(f, Box::new(arg)));
        }
        if let Some(&i) = self.scope.variables.get(&name) {
            return Ok(Node::Var(i));
        }
        if let Some(&c) = self.scope.constants.get(&name) {
            return Ok(Node::Const(c));
        }
        self.pos = start;
        Err(self.error(&format!("unknown name `{name}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xy() -> Scope {
        Scope::new()
            .variable("x", 0)
            .variable("y", 1)
            .constant("a", 3.0)
    }

    fn ev(text: &str, x: f64, y: f64) -> f64 {
        Expr::parse(text, &xy()).unwrap().eval(&[x, y])
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("-x^2", 3.0, 0.0), -9.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("8 / 4 / 2", 0.0, 0.0), 1.0);
        assert_eq!(ev("x - y - 1", 5.0, 2.0), 2.0);
        assert_eq!(ev("2^-1", 0.0, 0.0), 0.5);
    }

    #[test]
    fn functions_constants_and_literals() {
        assert!((ev("sin(x)^2 + cos(x)^2", 0.7, 0.0) - 1.0).abs() < 1e-15);
        assert!((ev("cosh(y)^2 - sinh(y)^2", 0.0, 1.3) - 1.0).abs() < 1e-14);
        assert_eq!(ev("sqrt(a*a + 16)", 0.0, 0.0), 5.0);
        assert_eq!(ev("1.5e2 + .5", 0.0, 0.0), 150.5);
        assert!((ev("cos(pi)", 0.0, 0.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants_fold() {
        let e = Expr::parse("a * (2 - 1) + sqrt(4)", &xy()).unwrap();
        assert_eq!(e.as_constant(), Some(5.0));
        assert!(Expr::parse("0 * 1", &xy()).unwrap().is_zero());
        assert!(Expr::parse("x * 0", &xy()).unwrap().as_constant().is_none());
    }

    #[test]
    fn dual_evaluation_matches_hand_derivatives() {
        let e = Expr::parse("x^3 * y + sin(x*y)", &xy()).unwrap();
        let (x0, y0) = (0.4, -1.1);
        let d = e.eval(&[Dual2::variable(x0, 0, 2), Dual2::variable(y0, 1, 2)]);
        let s = x0 * y0;
        assert!((d.value() - (x0.powi(3) * y0 + s.sin())).abs() < 1e-15);
        assert!((d.first(0) - (3.0 * x0 * x0 * y0 + y0 * s.cos())).abs() < 1e-14);
        assert!((d.second(0, 1) - (3.0 * x0 * x0 + s.cos() - s * s.sin())).abs() < 1e-14);
    }

    #[test]
    fn errors_point_at_the_problem() {
        let err = Expr::parse("x + foo", &xy()).unwrap_err();
        assert_eq!(err.column, 5);
        assert!(err.message.contains("foo"));
        assert!(Expr::parse("(x + 1", &xy()).is_err());
        assert!(Expr::parse("x +", &xy()).is_err());
        assert!(Expr::parse("sin x", &xy()).is_err());
        assert!(Expr::parse("x y", &xy()).is_err());
    }
}
