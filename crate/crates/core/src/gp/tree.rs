//! Expression trees over modality scores and constants, with their
//! s-expression text form.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominators smaller than this in magnitude make `div` return 1.
pub const DIV_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    Avg,
}

impl Op {
    pub const ALL: [Op; 7] = [Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Min, Op::Max, Op::Avg];

    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Div => "div",
            Op::Min => "min",
            Op::Max => "max",
            Op::Avg => "avg",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Total on finite inputs: division is protected and overflow saturates
    /// at `±f64::MAX`, so the result is always finite.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        let v = match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => {
                if b.abs() < DIV_GUARD {
                    1.0
                } else {
                    a / b
                }
            }
            Op::Min => a.min(b),
            Op::Max => a.max(b),
            Op::Avg => a * 0.5 + b * 0.5,
        };
        if v.is_finite() {
            v
        } else if v.is_nan() {
            1.0
        } else {
            v.signum() * f64::MAX
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Terminal {
    Var(usize),
    Const(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Function { op: Op, left: Box<Node>, right: Box<Node> },
    Var(usize),
    Const(f64),
}

impl From<Terminal> for Node {
    fn from(t: Terminal) -> Self {
        match t {
            Terminal::Var(m) => Node::Var(m),
            Terminal::Const(c) => Node::Const(c),
        }
    }
}

impl Node {
    pub fn func(op: Op, left: Node, right: Node) -> Node {
        Node::Function { op, left: Box::new(left), right: Box::new(right) }
    }

    pub fn is_function(&self) -> bool {
        matches!(self, Node::Function { .. })
    }

    /// Terminals have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Node::Function { left, right, .. } => 1 + left.depth().max(right.depth()),
            _ => 0,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Node::Function { left, right, .. } => 1 + left.size() + right.size(),
            _ => 1,
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Node::Function { left, right, .. } => match (left.max_var(), right.max_var()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
            Node::Var(m) => Some(*m),
            Node::Const(_) => None,
        }
    }

    pub fn eval(&self, scores: &[f64]) -> f64 {
        match self {
            Node::Function { op, left, right } => op.apply(left.eval(scores), right.eval(scores)),
            Node::Var(m) => scores[*m],
            Node::Const(c) => *c,
        }
    }

    /// Evaluates over column-major data, one output per row.
    pub fn eval_columns(&self, columns: &[Vec<f64>], rows: usize) -> Vec<f64> {
        match self {
            Node::Function { op, left, right } => {
                let mut out = left.eval_columns(columns, rows);
                let rhs = right.eval_columns(columns, rows);
                for (a, b) in out.iter_mut().zip(&rhs) {
                    *a = op.apply(*a, *b);
                }
                out
            }
            Node::Var(m) => columns[*m].clone(),
            Node::Const(c) => vec![*c; rows],
        }
    }

    /// Pre-order lookup: returns the node at `index` and its depth below self.
    pub fn get(&self, index: usize) -> Option<(&Node, usize)> {
        fn walk<'a>(n: &'a Node, index: &mut usize, depth: usize) -> Option<(&'a Node, usize)> {
            if *index == 0 {
                return Some((n, depth));
            }
            *index -= 1;
            match n {
                Node::Function { left, right, .. } => {
                    walk(left, index, depth + 1).or_else(|| walk(right, index, depth + 1))
                }
                _ => None,
            }
        }
        let mut i = index;
        walk(self, &mut i, 0)
    }

    /// Copy of self with the pre-order node at `index` replaced.
    pub fn replaced(&self, index: usize, with: Node) -> Node {
        fn walk(n: &Node, index: &mut Option<usize>, with: &mut Option<Node>) -> Node {
            match index {
                Some(0) => {
                    *index = None;
                    return with.take().expect("replacement used once");
                }
                Some(i) => *i -= 1,
                None => {}
            }
            match n {
                Node::Function { op, left, right } => {
                    let l = walk(left, index, with);
                    let r = walk(right, index, with);
                    Node::func(*op, l, r)
                }
                other => other.clone(),
            }
        }
        let mut idx = Some(index);
        let mut w = Some(with);
        walk(self, &mut idx, &mut w)
    }

    /// Depth of every node below self, pre-order.
    pub fn leaf_depths(&self) -> Vec<usize> {
        fn walk(n: &Node, d: usize, out: &mut Vec<usize>) {
            match n {
                Node::Function { left, right, .. } => {
                    walk(left, d + 1, out);
                    walk(right, d + 1, out);
                }
                _ => out.push(d),
            }
        }
        let mut out = Vec::new();
        walk(self, 0, &mut out);
        out
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Function { op, left, right } => write!(f, "({} {left} {right})", op.name()),
            Node::Var(m) => write!(f, "(var {m})"),
            Node::Const(c) => write!(f, "(const {c:?})"),
        }
    }
}

/// A GP individual. The root is always a function node.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionTree {
    root: Node,
    depth: usize,
}

impl ExpressionTree {
    pub fn new(root: Node) -> Result<Self> {
        if !root.is_function() {
            return Err(Error::Validation("tree root must be a function node".to_owned()));
        }
        let depth = root.depth();
        Ok(Self { root, depth })
    }

    pub(crate) fn from_function(root: Node) -> Self {
        debug_assert!(root.is_function());
        let depth = root.depth();
        Self { root, depth }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn eval(&self, scores: &[f64]) -> f64 {
        self.root.eval(scores)
    }

    /// Errors if a variable refers to a modality outside `0..modality_count`.
    pub fn check_modalities(&self, modality_count: usize) -> Result<()> {
        match self.root.max_var() {
            Some(m) if m >= modality_count => Err(Error::ModalityMismatch {
                expected: modality_count,
                found: m + 1,
            }),
            _ => Ok(()),
        }
    }

    pub fn to_sexpr(&self) -> String {
        self.root.to_string()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let root = parse_node(text)?;
        if !root.is_function() {
            return Err(Error::Sexpr {
                token: root.to_string(),
                msg: "tree root must be a function".to_owned(),
            });
        }
        Ok(Self::from_function(root))
    }
}

impl fmt::Display for ExpressionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

fn tokenize(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(&text[s..i]);
            }
            if !c.is_whitespace() {
                tokens.push(&text[i..i + 1]);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(&text[s..]);
    }
    tokens
}

/// Parses `(op a b)`, `(var N)` and `(const X)` forms.
pub fn parse_node(text: &str) -> Result<Node> {
    let tokens = tokenize(text);
    let mut pos = 0;
    let node = parse_expr(&tokens, &mut pos)?;
    if let Some(extra) = tokens.get(pos) {
        return Err(sexpr_err(extra, "trailing input"));
    }
    Ok(node)
}

fn sexpr_err(token: &str, msg: &str) -> Error {
    Error::Sexpr { token: token.to_owned(), msg: msg.to_owned() }
}

fn expect<'a>(tokens: &[&'a str], pos: &mut usize) -> Result<&'a str> {
    let t = tokens.get(*pos).copied().ok_or_else(|| sexpr_err("<eof>", "unexpected end of input"))?;
    *pos += 1;
    Ok(t)
}

fn parse_expr(tokens: &[&str], pos: &mut usize) -> Result<Node> {
    let open = expect(tokens, pos)?;
    if open != "(" {
        return Err(sexpr_err(open, "expected `(`"));
    }
    let head = expect(tokens, pos)?;
    let node = match head {
        "var" => {
            let t = expect(tokens, pos)?;
            Node::Var(t.parse().map_err(|_| sexpr_err(t, "variable index must be a non-negative integer"))?)
        }
        "const" => {
            let t = expect(tokens, pos)?;
            let c: f64 = t.parse().map_err(|_| sexpr_err(t, "constant must be a number"))?;
            if !c.is_finite() {
                return Err(sexpr_err(t, "constant must be finite"));
            }
            Node::Const(c)
        }
        name => {
            let op = Op::from_name(name).ok_or_else(|| sexpr_err(name, "unknown operator"))?;
            let left = parse_expr(tokens, pos)?;
            let right = parse_expr(tokens, pos)?;
            Node::func(op, left, right)
        }
    };
    let close = expect(tokens, pos)?;
    if close != ")" {
        return Err(sexpr_err(close, "expected `)`"));
    }
    Ok(node)
}
