//! Scalar expressions in chart coordinates and time: parsing, symbolic
//! differentiation and compiled evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Abs,
    Sign,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Sinh => v.sinh(),
            Func::Cosh => v.cosh(),
            Func::Tanh => v.tanh(),
            Func::Abs => v.abs(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

use Expr::*;

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            toks: tokenize(src)?,
            pos: 0,
            src,
        };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expr(format!("unexpected trailing input in `{src}`")));
        }
        Ok(e)
    }

    pub fn num(v: f64) -> Expr {
        Num(v)
    }

    pub fn var(name: &str) -> Expr {
        Var(name.to_string())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Num(v) if *v == 0.0)
    }

    /// Variable names in first-appearance order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Num(_) => {}
            Var(s) => {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
            Neg(a) | Call(_, a) => a.collect_vars(out),
            Add(a, c) | Sub(a, c) | Mul(a, c) | Div(a, c) | Pow(a, c) => {
                a.collect_vars(out);
                c.collect_vars(out);
            }
        }
    }

    pub fn depends_on(&self, name: &str) -> bool {
        match self {
            Num(_) => false,
            Var(s) => s == name,
            Neg(a) | Call(_, a) => a.depends_on(name),
            Add(a, c) | Sub(a, c) | Mul(a, c) | Div(a, c) | Pow(a, c) => {
                a.depends_on(name) || c.depends_on(name)
            }
        }
    }

    /// Replaces every occurrence of variable `name` by `with`.
    pub fn substitute(&self, name: &str, with: &Expr) -> Expr {
        match self {
            Num(v) => Num(*v),
            Var(s) if s == name => with.clone(),
            Var(s) => Var(s.clone()),
            Neg(a) => Neg(b(a.substitute(name, with))),
            Call(f, a) => Call(*f, b(a.substitute(name, with))),
            Add(a, c) => Add(b(a.substitute(name, with)), b(c.substitute(name, with))),
            Sub(a, c) => Sub(b(a.substitute(name, with)), b(c.substitute(name, with))),
            Mul(a, c) => Mul(b(a.substitute(name, with)), b(c.substitute(name, with))),
            Div(a, c) => Div(b(a.substitute(name, with)), b(c.substitute(name, with))),
            Pow(a, c) => Pow(b(a.substitute(name, with)), b(c.substitute(name, with))),
        }
        .simplify()
    }

    /// Replaces named constants by numbers.
    pub fn bind_constants(&self, consts: &BTreeMap<String, f64>) -> Expr {
        let mut e = self.clone();
        for (k, v) in consts {
            if e.depends_on(k) {
                e = e.substitute(k, &Num(*v));
            }
        }
        e
    }

    /// Symbolic partial derivative.
    pub fn diff(&self, name: &str) -> Expr {
        if !self.depends_on(name) {
            return Num(0.0);
        }
        let d = match self {
            Num(_) => Num(0.0),
            Var(s) => Num(if s == name { 1.0 } else { 0.0 }),
            Neg(a) => Neg(b(a.diff(name))),
            Add(a, c) => Add(b(a.diff(name)), b(c.diff(name))),
            Sub(a, c) => Sub(b(a.diff(name)), b(c.diff(name))),
            Mul(a, c) => Add(
                b(Mul(b(a.diff(name)), c.clone())),
                b(Mul(a.clone(), b(c.diff(name)))),
            ),
            Div(a, c) => Div(
                b(Sub(
                    b(Mul(b(a.diff(name)), c.clone())),
                    b(Mul(a.clone(), b(c.diff(name)))),
                )),
                b(Pow(c.clone(), b(Num(2.0)))),
            ),
            Pow(a, c) if !c.depends_on(name) => Mul(
                b(Mul(c.clone(), b(Pow(a.clone(), b(Sub(c.clone(), b(Num(1.0)))))))),
                b(a.diff(name)),
            ),
            Pow(a, c) => Mul(
                b(self.clone()),
                b(Add(
                    b(Mul(b(c.diff(name)), b(Call(Func::Log, a.clone())))),
                    b(Div(b(Mul(c.clone(), b(a.diff(name)))), a.clone())),
                )),
            ),
            Call(f, a) => {
                let inner = a.diff(name);
                let outer = match f {
                    Func::Exp => Call(Func::Exp, a.clone()),
                    Func::Log => Div(b(Num(1.0)), a.clone()),
                    Func::Sqrt => Div(b(Num(0.5)), b(Call(Func::Sqrt, a.clone()))),
                    Func::Sin => Call(Func::Cos, a.clone()),
                    Func::Cos => Neg(b(Call(Func::Sin, a.clone()))),
                    Func::Tan => Add(
                        b(Num(1.0)),
                        b(Pow(b(Call(Func::Tan, a.clone())), b(Num(2.0)))),
                    ),
                    Func::Sinh => Call(Func::Cosh, a.clone()),
                    Func::Cosh => Call(Func::Sinh, a.clone()),
                    Func::Tanh => Sub(
                        b(Num(1.0)),
                        b(Pow(b(Call(Func::Tanh, a.clone())), b(Num(2.0)))),
                    ),
                    Func::Abs => Call(Func::Sign, a.clone()),
                    Func::Sign => Num(0.0),
                };
                Mul(b(outer), b(inner))
            }
        };
        d.simplify()
    }

    /// Constant folding and removal of neutral elements.
    pub fn simplify(&self) -> Expr {
        match self {
            Num(v) => Num(*v),
            Var(s) => Var(s.clone()),
            Neg(a) => match a.simplify() {
                Num(v) => Num(-v),
                Neg(inner) => *inner,
                s => Neg(b(s)),
            },
            Call(f, a) => match a.simplify() {
                Num(v) => Num(f.apply(v)),
                s => Call(*f, b(s)),
            },
            Add(a, c) => match (a.simplify(), c.simplify()) {
                (Num(x), Num(y)) => Num(x + y),
                (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
                (x, Neg(y)) => Sub(b(x), y),
                (x, y) => Add(b(x), b(y)),
            },
            Sub(a, c) => match (a.simplify(), c.simplify()) {
                (Num(x), Num(y)) => Num(x - y),
                (e, Num(z)) if z == 0.0 => e,
                (Num(z), e) if z == 0.0 => Neg(b(e)),
                (x, y) if x == y => Num(0.0),
                (x, y) => Sub(b(x), b(y)),
            },
            Mul(a, c) => match (a.simplify(), c.simplify()) {
                (Num(x), Num(y)) => Num(x * y),
                (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
                (Num(o), e) | (e, Num(o)) if o == 1.0 => e,
                (Num(o), e) | (e, Num(o)) if o == -1.0 => Neg(b(e)),
                (x, y) => Mul(b(x), b(y)),
            },
            Div(a, c) => match (a.simplify(), c.simplify()) {
                (Num(x), Num(y)) if y != 0.0 => Num(x / y),
                (Num(z), _) if z == 0.0 => Num(0.0),
                (e, Num(o)) if o == 1.0 => e,
                (x, y) => Div(b(x), b(y)),
            },
            Pow(a, c) => match (a.simplify(), c.simplify()) {
                (Num(x), Num(y)) => Num(x.powf(y)),
                (_, Num(z)) if z == 0.0 => Num(1.0),
                (e, Num(o)) if o == 1.0 => e,
                (x, y) => Pow(b(x), b(y)),
            },
        }
    }

    /// Compiles against an ordered variable list; unknown names are errors.
    pub fn compile(&self, vars: &[&str]) -> Result<CompiledExpr> {
        for v in self.variables() {
            if !vars.contains(&v.as_str()) {
                return Err(Error::Expr(format!(
                    "unknown symbol `{v}` in `{self}` (allowed: {})",
                    vars.join(", ")
                )));
            }
        }
        Ok(CompiledExpr {
            node: Arc::new(Node::from_expr(self, vars)),
            nvars: vars.len(),
        })
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl std::ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $variant(b(self), b(rhs)).simplify()
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Neg(b(self)).simplify()
    }
}

impl Expr {
    pub fn powf(self, k: f64) -> Expr {
        Pow(b(self), b(Num(k))).simplify()
    }

    pub fn sqrt(self) -> Expr {
        Call(Func::Sqrt, b(self)).simplify()
    }

    pub fn ln(self) -> Expr {
        Call(Func::Log, b(self)).simplify()
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num(v) => write!(f, "{v}"),
            Var(s) => write!(f, "{s}"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, c) => write!(f, "({a} + {c})"),
            Sub(a, c) => write!(f, "({a} - {c})"),
            Mul(a, c) => write!(f, "({a} * {c})"),
            Div(a, c) => write!(f, "({a} / {c})"),
            Pow(a, c) => write!(f, "({a}^{c})"),
            Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

#[derive(Debug)]
enum Node {
    Num(f64),
    Slot(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Powi(Box<Node>, i32),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn from_expr(e: &Expr, vars: &[&str]) -> Node {
        let n = |x: &Expr| Box::new(Node::from_expr(x, vars));
        match e {
            Num(v) => Node::Num(*v),
            Var(s) => Node::Slot(vars.iter().position(|v| v == s).expect("checked by compile")),
            Neg(a) => Node::Neg(n(a)),
            Add(a, c) => Node::Add(n(a), n(c)),
            Sub(a, c) => Node::Sub(n(a), n(c)),
            Mul(a, c) => Node::Mul(n(a), n(c)),
            Div(a, c) => Node::Div(n(a), n(c)),
            Pow(a, c) => match **c {
                Num(k) if k.fract() == 0.0 && k.abs() < 64.0 => Node::Powi(n(a), k as i32),
                _ => Node::Pow(n(a), n(c)),
            },
            Call(f, a) => Node::Call(*f, n(a)),
        }
    }

    fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Node::Num(x) => *x,
            Node::Slot(i) => v[*i],
            Node::Neg(a) => -a.eval(v),
            Node::Add(a, c) => a.eval(v) + c.eval(v),
            Node::Sub(a, c) => a.eval(v) - c.eval(v),
            Node::Mul(a, c) => a.eval(v) * c.eval(v),
            Node::Div(a, c) => a.eval(v) / c.eval(v),
            Node::Powi(a, k) => a.eval(v).powi(*k),
            Node::Pow(a, c) => a.eval(v).powf(c.eval(v)),
            Node::Call(f, a) => f.apply(a.eval(v)),
        }
    }
}

/// An expression bound to a fixed variable ordering; cheap to clone and share.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    node: Arc<Node>,
    nvars: usize,
}

impl CompiledExpr {
    pub fn eval(&self, vars: &[f64]) -> f64 {
        debug_assert_eq!(vars.len(), self.nvars);
        self.node.eval(vars)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
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
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| Error::Expr(format!("bad number `{s}` in `{src}`")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c == '*' && i + 1 < chars.len() && chars[i + 1] == '*' {
            out.push(Tok::Op('^'));
            i += 2;
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expr(format!("unexpected character `{c}` in `{src}`")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn fail<T>(&self, what: &str) -> Result<T> {
        Err(Error::Expr(format!("{what} at token {} in `{}`", self.pos, self.src)))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' { Add(b(lhs), b(rhs)) } else { Sub(b(lhs), b(rhs)) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' { Mul(b(lhs), b(rhs)) } else { Div(b(lhs), b(rhs)) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Neg(b(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Pow(b(base), b(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Num(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.peek_op() == Some('(') {
                    let Some(f) = Func::from_name(&name) else {
                        return self.fail(&format!("unknown function `{name}`"));
                    };
                    self.pos += 1;
                    let arg = self.expr()?;
                    if self.peek_op() != Some(')') {
                        return self.fail("missing `)`");
                    }
                    self.pos += 1;
                    Ok(Call(f, b(arg)))
                } else {
                    Ok(match name.as_str() {
                        "pi" => Num(std::f64::consts::PI),
                        _ => Var(name),
                    })
                }
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek_op() != Some(')') {
                    return self.fail("missing `)`");
                }
                self.pos += 1;
                Ok(e)
            }
            _ => self.fail("expected a number, symbol or `(`"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, x: f64, t: f64) -> f64 {
        Expr::parse(src).unwrap().compile(&["x", "t"]).unwrap().eval(&[x, t])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1 + 2*3^2", 0.0, 0.0), 19.0);
        assert_eq!(eval("-x^2", 3.0, 0.0), -9.0);
        assert_eq!(eval("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(eval("8/4/2", 0.0, 0.0), 1.0);
        assert_eq!(eval("2**-1", 0.0, 0.0), 0.5);
        assert_eq!(eval("1e-2*x", 100.0, 0.0), 1.0);
    }

    #[test]
    fn functions_evaluate() {
        assert!((eval("exp(-t)*x^2*(1-x)", 0.5, 1.0) - (-1.0f64).exp() * 0.125).abs() < 1e-15);
        assert!((eval("sqrt(x) + log(x)", 4.0, 0.0) - (2.0 + 4f64.ln())).abs() < 1e-15);
        assert!((eval("sin(pi*x)", 0.5, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_closed_forms() {
        let e = Expr::parse("exp(-t)*x^2*(1-x)").unwrap();
        let dx = e.diff("x").compile(&["x", "t"]).unwrap();
        let dxx = e.diff("x").diff("x").compile(&["x", "t"]).unwrap();
        let dt = e.diff("t").compile(&["x", "t"]).unwrap();
        let (x, t) = (0.3f64, 0.7f64);
        let w = (-t).exp();
        assert!((dx.eval(&[x, t]) - w * (2.0 * x - 3.0 * x * x)).abs() < 1e-15);
        assert!((dxx.eval(&[x, t]) - w * (2.0 - 6.0 * x)).abs() < 1e-15);
        assert!((dt.eval(&[x, t]) + w * x * x * (1.0 - x)).abs() < 1e-15);
    }

    #[test]
    fn variable_exponent_derivative() {
        let e = Expr::parse("x^x").unwrap().diff("x");
        let x = 1.7f64;
        let want = x.powf(x) * (x.ln() + 1.0);
        assert!((e.compile(&["x"]).unwrap().eval(&[x]) - want).abs() < 1e-13);
    }

    #[test]
    fn substitution_and_constants() {
        let e = Expr::parse("rho^2 * alpha").unwrap();
        let e = e.substitute("rho", &Expr::parse("x^alpha").unwrap());
        let mut c = BTreeMap::new();
        c.insert("alpha".to_string(), 2.0);
        let e = e.bind_constants(&c);
        assert_eq!(e.compile(&["x"]).unwrap().eval(&[3.0]), 162.0);
    }

    #[test]
    fn rejects_unknowns_and_garbage() {
        assert!(Expr::parse("foo(x)").is_err());
        assert!(Expr::parse("x +").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x $ 2").is_err());
        assert!(Expr::parse("z").unwrap().compile(&["x"]).is_err());
    }

    #[test]
    fn constants_fold_away() {
        assert_eq!(Expr::parse("2*x - 2*x").unwrap().diff("t"), Num(0.0));
        assert_eq!(Expr::parse("3*x").unwrap().diff("x"), Num(3.0));
    }
}
