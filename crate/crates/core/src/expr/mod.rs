//! Scalar expressions over `x1..xn` with finitely many nonsmooth atoms.
//!
//! Expressions are stored as an arena of nodes where every child precedes its
//! parent. `abs` and `min` are rewritten at construction time so the only
//! nonsmooth atom left is the k-ary `max`:
//!
//! ```text
//! abs(u)      = max(u, -u)
//! min(u, ...) = -max(-u, ...)
//! ```
//!
//! A *profile* records, for every `max` node, which arguments attain the
//! maximum within the activity tolerance. Fixing one argument per `max` node
//! selects a smooth branch whose gradient [`Expr::grad_smooth`] computes exactly
//! by reverse accumulation.

mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node inside an [`Expr`] arena.
pub type NodeId = usize;

/// Relative activity tolerance for `max` arguments: an argument is active when
/// it is within `ACTIVITY_REL_TOL * (1 + |max|)` of the achieved value.
pub const ACTIVITY_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("variable x{index} at line {line}, column {col} is out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize, line: usize, col: usize },
    #[error("exponent at line {line}, column {col} must be an integer literal")]
    NonIntegerExponent { line: usize, col: usize },
    #[error("domain violation at node {node} ({op}): {msg}")]
    Domain { node: NodeId, op: &'static str, msg: String },
    #[error("point has dimension {got}, expression expects {want}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("profile does not match the expression: {0}")]
    Profile(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    /// Zero-based variable index.
    Var(usize),
    Neg(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Pow(NodeId, i32),
    Exp(NodeId),
    Log(NodeId),
    Sqrt(NodeId),
    Atan(NodeId),
    Max(Vec<NodeId>),
}

impl Node {
    fn op_name(&self) -> &'static str {
        match self {
            Node::Const(_) => "const",
            Node::Var(_) => "var",
            Node::Neg(_) => "neg",
            Node::Add(..) => "add",
            Node::Sub(..) => "sub",
            Node::Mul(..) => "mul",
            Node::Div(..) => "div",
            Node::Pow(..) => "pow",
            Node::Exp(_) => "exp",
            Node::Log(_) => "log",
            Node::Sqrt(_) => "sqrt",
            Node::Atan(_) => "atan",
            Node::Max(_) => "max",
        }
    }

    fn shifted(&self, off: usize) -> Node {
        match self {
            Node::Const(c) => Node::Const(*c),
            Node::Var(i) => Node::Var(*i),
            Node::Neg(a) => Node::Neg(a + off),
            Node::Add(a, b) => Node::Add(a + off, b + off),
            Node::Sub(a, b) => Node::Sub(a + off, b + off),
            Node::Mul(a, b) => Node::Mul(a + off, b + off),
            Node::Div(a, b) => Node::Div(a + off, b + off),
            Node::Pow(a, k) => Node::Pow(a + off, *k),
            Node::Exp(a) => Node::Exp(a + off),
            Node::Log(a) => Node::Log(a + off),
            Node::Sqrt(a) => Node::Sqrt(a + off),
            Node::Atan(a) => Node::Atan(a + off),
            Node::Max(args) => Node::Max(args.iter().map(|a| a + off).collect()),
        }
    }
}

/// An immutable expression DAG over `dim` variables.
#[derive(Debug, Clone)]
pub struct Expr {
    nodes: Vec<Node>,
    root: NodeId,
    dim: usize,
    /// Arena ids of the `max` nodes, in arena order. Profiles index into this.
    max_nodes: Vec<NodeId>,
}

/// Active argument sets of every `max` node at a point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveProfile {
    /// `selections[k]` lists the active argument positions of the k-th `max` node.
    pub selections: Vec<Vec<usize>>,
}

impl ActiveProfile {
    /// A profile that fixes one argument per `max` node.
    pub fn fixed(choices: &[usize]) -> Self {
        ActiveProfile { selections: choices.iter().map(|&c| vec![c]).collect() }
    }

    /// True when every atom has a single active argument.
    pub fn is_smooth_selection(&self) -> bool {
        self.selections.iter().all(|s| s.len() == 1)
    }
}

fn activity_tol(value: f64) -> f64 {
    ACTIVITY_REL_TOL * (1.0 + value.abs())
}

impl Expr {
    pub fn parse(text: &str, dim: usize) -> Result<Expr, ExprError> {
        parser::parse(text, dim)
    }

    fn from_parts(nodes: Vec<Node>, root: NodeId, dim: usize) -> Expr {
        let max_nodes = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Max(_)))
            .map(|(i, _)| i)
            .collect();
        Expr { nodes, root, dim, max_nodes }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of `max` atoms after rewriting.
    pub fn max_atoms(&self) -> usize {
        self.max_nodes.len()
    }

    pub fn constant(dim: usize, c: f64) -> Expr {
        if c < 0.0 {
            Expr::from_parts(vec![Node::Const(-c), Node::Neg(0)], 1, dim)
        } else {
            Expr::from_parts(vec![Node::Const(c)], 0, dim)
        }
    }

    /// The coordinate `x_{index+1}`.
    pub fn variable(dim: usize, index: usize) -> Expr {
        assert!(index < dim, "variable index {index} out of range for dimension {dim}");
        Expr::from_parts(vec![Node::Var(index)], 0, dim)
    }

    fn combine(parts: &[&Expr], build: impl FnOnce(&[NodeId]) -> Node) -> Expr {
        let dim = parts[0].dim;
        assert!(parts.iter().all(|p| p.dim == dim), "expressions must share a dimension");
        let mut nodes = Vec::new();
        let mut roots = Vec::with_capacity(parts.len());
        for p in parts {
            let off = nodes.len();
            nodes.extend(p.nodes.iter().map(|n| n.shifted(off)));
            roots.push(p.root + off);
        }
        nodes.push(build(&roots));
        let root = nodes.len() - 1;
        Expr::from_parts(nodes, root, dim)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        Expr::combine(&[self, other], |r| Node::Add(r[0], r[1]))
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        Expr::combine(&[self, other], |r| Node::Sub(r[0], r[1]))
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        Expr::combine(&[self, other], |r| Node::Mul(r[0], r[1]))
    }

    pub fn neg(&self) -> Expr {
        Expr::combine(&[self], |r| Node::Neg(r[0]))
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::constant(self.dim, c).mul(self)
    }

    /// `self - c`.
    pub fn shift(&self, c: f64) -> Expr {
        self.sub(&Expr::constant(self.dim, c))
    }

    /// Pointwise maximum of a nonempty family.
    pub fn max_of(parts: &[Expr]) -> Expr {
        assert!(!parts.is_empty(), "max of an empty family");
        let refs: Vec<&Expr> = parts.iter().collect();
        Expr::combine(&refs, |r| Node::Max(r.to_vec()))
    }

    /// Tree equality, ignoring how the arena shares subexpressions.
    pub fn structurally_eq(&self, other: &Expr) -> bool {
        self.dim == other.dim && node_eq(self, self.root, other, other.root)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ExprError> {
        if x.len() != self.dim {
            return Err(ExprError::DimensionMismatch { want: self.dim, got: x.len() });
        }
        Ok(())
    }

    /// Values of every node at `x`.
    pub fn eval_nodes(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.check_dim(x)?;
        let mut v = vec![0.0; self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            let dom = |msg: String| ExprError::Domain { node: id, op: node.op_name(), msg };
            v[id] = match node {
                Node::Const(c) => *c,
                Node::Var(i) => x[*i],
                Node::Neg(a) => -v[*a],
                Node::Add(a, b) => v[*a] + v[*b],
                Node::Sub(a, b) => v[*a] - v[*b],
                Node::Mul(a, b) => v[*a] * v[*b],
                Node::Div(a, b) => {
                    if v[*b] == 0.0 {
                        return Err(dom("division by zero".into()));
                    }
                    v[*a] / v[*b]
                }
                Node::Pow(a, k) => {
                    if *k < 0 && v[*a] == 0.0 {
                        return Err(dom(format!("zero raised to negative power {k}")));
                    }
                    v[*a].powi(*k)
                }
                Node::Exp(a) => v[*a].exp(),
                Node::Log(a) => {
                    if v[*a] <= 0.0 || v[*a].is_nan() {
                        return Err(dom(format!("log of nonpositive value {}", v[*a])));
                    }
                    v[*a].ln()
                }
                Node::Sqrt(a) => {
                    if v[*a] < 0.0 || v[*a].is_nan() {
                        return Err(dom(format!("sqrt of negative value {}", v[*a])));
                    }
                    v[*a].sqrt()
                }
                Node::Atan(a) => v[*a].atan(),
                Node::Max(args) => args.iter().map(|a| v[*a]).fold(f64::NEG_INFINITY, f64::max),
            };
        }
        Ok(v)
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        Ok(self.eval_nodes(x)?[self.root])
    }

    fn profile_from_values(&self, v: &[f64]) -> ActiveProfile {
        let selections = self
            .max_nodes
            .iter()
            .map(|&id| {
                let Node::Max(args) = &self.nodes[id] else { unreachable!() };
                let m = v[id];
                let tol = activity_tol(m);
                args.iter()
                    .enumerate()
                    .filter(|(_, &a)| m - v[a] <= tol)
                    .map(|(k, _)| k)
                    .collect()
            })
            .collect();
        ActiveProfile { selections }
    }

    /// Active argument sets of all `max` atoms at `x`.
    pub fn active_profile(&self, x: &[f64]) -> Result<ActiveProfile, ExprError> {
        let v = self.eval_nodes(x)?;
        Ok(self.profile_from_values(&v))
    }

    /// Exact gradient of the smooth branch fixed by `profile` at `x`.
    pub fn grad_smooth(&self, x: &[f64], profile: &ActiveProfile) -> Result<Vec<f64>, ExprError> {
        let v = self.eval_nodes(x)?;
        self.check_profile(profile)?;
        let choice: Vec<usize> = profile.selections.iter().map(|s| s[0]).collect();
        self.reverse_pass(&v, &choice)
    }

    fn check_profile(&self, profile: &ActiveProfile) -> Result<(), ExprError> {
        if profile.selections.len() != self.max_nodes.len() {
            return Err(ExprError::Profile(format!(
                "expected selections for {} max atoms, got {}",
                self.max_nodes.len(),
                profile.selections.len()
            )));
        }
        for (k, (&id, sel)) in self.max_nodes.iter().zip(&profile.selections).enumerate() {
            let Node::Max(args) = &self.nodes[id] else { unreachable!() };
            if sel.len() != 1 {
                return Err(ExprError::Profile(format!(
                    "atom {k} must fix exactly one argument, got {}",
                    sel.len()
                )));
            }
            if sel[0] >= args.len() {
                return Err(ExprError::Profile(format!(
                    "atom {k} selects argument {} of {}",
                    sel[0],
                    args.len()
                )));
            }
        }
        Ok(())
    }

    fn reverse_pass(&self, v: &[f64], choice: &[usize]) -> Result<Vec<f64>, ExprError> {
        let mut adj = vec![0.0; self.nodes.len()];
        let mut grad = vec![0.0; self.dim];
        adj[self.root] = 1.0;
        let mut max_ord = self.max_nodes.len();
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            if matches!(node, Node::Max(_)) {
                max_ord -= 1;
            }
            let g = adj[id];
            if g == 0.0 {
                continue;
            }
            let dom = |msg: String| ExprError::Domain { node: id, op: node.op_name(), msg };
            match node {
                Node::Const(_) => {}
                Node::Var(i) => grad[*i] += g,
                Node::Neg(a) => adj[*a] -= g,
                Node::Add(a, b) => {
                    adj[*a] += g;
                    adj[*b] += g;
                }
                Node::Sub(a, b) => {
                    adj[*a] += g;
                    adj[*b] -= g;
                }
                Node::Mul(a, b) => {
                    adj[*a] += g * v[*b];
                    adj[*b] += g * v[*a];
                }
                Node::Div(a, b) => {
                    adj[*a] += g / v[*b];
                    adj[*b] -= g * v[*a] / (v[*b] * v[*b]);
                }
                Node::Pow(a, k) => {
                    if *k != 0 {
                        if *k < 1 && v[*a] == 0.0 {
                            return Err(dom("derivative of power at zero".into()));
                        }
                        adj[*a] += g * (*k as f64) * v[*a].powi(k - 1);
                    }
                }
                Node::Exp(a) => adj[*a] += g * v[id],
                Node::Log(a) => adj[*a] += g / v[*a],
                Node::Sqrt(a) => {
                    if v[id] == 0.0 {
                        return Err(dom("sqrt is not differentiable at zero".into()));
                    }
                    adj[*a] += g / (2.0 * v[id]);
                }
                Node::Atan(a) => adj[*a] += g / (1.0 + v[*a] * v[*a]),
                Node::Max(args) => adj[args[choice[max_ord]]] += g,
            }
        }
        Ok(grad)
    }

    /// Gradients of every smooth branch active at `x`, one per consistent
    /// selection over the `max` atoms that are reachable through active
    /// arguments and tied. Errors when more than `cap` branches would be needed.
    pub fn active_branch_gradients(
        &self,
        x: &[f64],
        cap: usize,
    ) -> Result<(Vec<Vec<f64>>, ActiveProfile), ExprError> {
        let v = self.eval_nodes(x)?;
        let profile = self.profile_from_values(&v);
        let ord_of: std::collections::HashMap<NodeId, usize> =
            self.max_nodes.iter().enumerate().map(|(k, &id)| (id, k)).collect();

        // walk from the root through active arguments only
        let mut live = vec![false; self.nodes.len()];
        live[self.root] = true;
        for id in (0..self.nodes.len()).rev() {
            if !live[id] {
                continue;
            }
            match &self.nodes[id] {
                Node::Max(args) => {
                    for &k in &profile.selections[ord_of[&id]] {
                        live[args[k]] = true;
                    }
                }
                n => each_child(n, |c| live[c] = true),
            }
        }
        let tied: Vec<usize> = self
            .max_nodes
            .iter()
            .enumerate()
            .filter(|(k, &id)| live[id] && profile.selections[*k].len() > 1)
            .map(|(k, _)| k)
            .collect();
        let mut count: usize = 1;
        for &k in &tied {
            count = count.saturating_mul(profile.selections[k].len());
        }
        if count > cap {
            return Err(ExprError::Profile(format!(
                "{count} simultaneously active branches exceed the cap of {cap}"
            )));
        }
        let mut choice: Vec<usize> = profile.selections.iter().map(|s| s[0]).collect();
        let mut grads = Vec::with_capacity(count);
        let mut counter = vec![0usize; tied.len()];
        loop {
            for (slot, &k) in tied.iter().enumerate() {
                choice[k] = profile.selections[k][counter[slot]];
            }
            grads.push(self.reverse_pass(&v, &choice)?);
            // odometer increment
            let mut slot = 0;
            loop {
                if slot == tied.len() {
                    return Ok((grads, profile));
                }
                counter[slot] += 1;
                if counter[slot] < profile.selections[tied[slot]].len() {
                    break;
                }
                counter[slot] = 0;
                slot += 1;
            }
        }
    }

    fn fmt_node(&self, id: NodeId, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let unary = |f: &mut fmt::Formatter<'_>, name: &str, a: NodeId| -> fmt::Result {
            write!(f, "{name}(")?;
            self.fmt_node(a, f)?;
            write!(f, ")")
        };
        let binary = |f: &mut fmt::Formatter<'_>, op: &str, a: NodeId, b: NodeId| -> fmt::Result {
            write!(f, "(")?;
            self.fmt_node(a, f)?;
            write!(f, " {op} ")?;
            self.fmt_node(b, f)?;
            write!(f, ")")
        };
        match &self.nodes[id] {
            Node::Const(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            Node::Const(c) => write!(f, "{c:?}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Neg(a) => {
                write!(f, "(-")?;
                self.fmt_node(*a, f)?;
                write!(f, ")")
            }
            Node::Add(a, b) => binary(f, "+", *a, *b),
            Node::Sub(a, b) => binary(f, "-", *a, *b),
            Node::Mul(a, b) => binary(f, "*", *a, *b),
            Node::Div(a, b) => binary(f, "/", *a, *b),
            Node::Pow(a, k) => {
                write!(f, "(")?;
                self.fmt_node(*a, f)?;
                write!(f, ")^{k}")
            }
            Node::Exp(a) => unary(f, "exp", *a),
            Node::Log(a) => unary(f, "log", *a),
            Node::Sqrt(a) => unary(f, "sqrt", *a),
            Node::Atan(a) => unary(f, "atan", *a),
            Node::Max(args) => {
                write!(f, "max(")?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    self.fmt_node(*a, f)?;
                }
                write!(f, ")")
            }
        }
    }
}

fn each_child(n: &Node, mut visit: impl FnMut(NodeId)) {
    match n {
        Node::Const(_) | Node::Var(_) => {}
        Node::Neg(a) | Node::Pow(a, _) | Node::Exp(a) | Node::Log(a) | Node::Sqrt(a) | Node::Atan(a) => {
            visit(*a)
        }
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            visit(*a);
            visit(*b);
        }
        Node::Max(args) => args.iter().for_each(|a| visit(*a)),
    }
}

fn node_eq(ea: &Expr, a: NodeId, eb: &Expr, b: NodeId) -> bool {
    use Node::*;
    match (&ea.nodes[a], &eb.nodes[b]) {
        (Const(x), Const(y)) => x.to_bits() == y.to_bits(),
        (Var(i), Var(j)) => i == j,
        (Neg(x), Neg(y)) | (Exp(x), Exp(y)) | (Log(x), Log(y)) | (Sqrt(x), Sqrt(y)) | (Atan(x), Atan(y)) => {
            node_eq(ea, *x, eb, *y)
        }
        (Pow(x, k), Pow(y, l)) => k == l && node_eq(ea, *x, eb, *y),
        (Add(x1, x2), Add(y1, y2))
        | (Sub(x1, x2), Sub(y1, y2))
        | (Mul(x1, x2), Mul(y1, y2))
        | (Div(x1, x2), Div(y1, y2)) => node_eq(ea, *x1, eb, *y1) && node_eq(ea, *x2, eb, *y2),
        (Max(xs), Max(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| node_eq(ea, *x, eb, *y))
        }
        _ => false,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_node(self.root, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_grad(e: &Expr, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (e.eval(&xp).unwrap() - e.eval(&xm).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn parses_example_objective() {
        let e = Expr::parse("1/(abs(x1)+1)", 1).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 1.0);
        assert!((e.eval(&[9.0]).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(e.max_atoms(), 1);
    }

    #[test]
    fn identity_expression() {
        let e = Expr::parse("x1", 1).unwrap();
        assert_eq!(e.eval(&[-2.5]).unwrap(), -2.5);
        assert!(e.structurally_eq(&Expr::variable(1, 0)));
    }

    #[test]
    fn max_of_x_and_minus_x_matches_abs_on_grid() {
        let m = Expr::parse("max(x1, -x1)", 1).unwrap();
        let a = Expr::parse("abs(x1)", 1).unwrap();
        for k in 0..1000 {
            let x = -50.0 + 100.0 * k as f64 / 999.0;
            assert_eq!(m.eval(&[x]).unwrap(), x.abs());
            assert_eq!(a.eval(&[x]).unwrap(), x.abs());
        }
        assert_eq!(m.eval(&[-3.0]).unwrap(), 3.0);
    }

    #[test]
    fn precedence_and_unary_minus() {
        let e = Expr::parse("-x1^2 + 2*x2 - 3/x1", 2).unwrap();
        let v = e.eval(&[2.0, 5.0]).unwrap();
        assert!((v - (-4.0 + 10.0 - 1.5)).abs() < 1e-15);
        let e = Expr::parse("min(x1, 2, x2)", 2).unwrap();
        assert_eq!(e.eval(&[3.0, -1.0]).unwrap(), -1.0);
        let e = Expr::parse("x1^-2", 1).unwrap();
        assert_eq!(e.eval(&[2.0]).unwrap(), 0.25);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match Expr::parse("x1 +\n  * x1", 1) {
            Err(ExprError::Syntax { line, col, .. }) => {
                assert_eq!((line, col), (2, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            Expr::parse("x3", 2),
            Err(ExprError::VariableOutOfRange { index: 3, dim: 2, .. })
        ));
        assert!(matches!(Expr::parse("x0", 2), Err(ExprError::VariableOutOfRange { index: 0, .. })));
        assert!(matches!(Expr::parse("x1^2.5", 1), Err(ExprError::NonIntegerExponent { .. })));
        assert!(matches!(Expr::parse("x1^x1", 1), Err(ExprError::NonIntegerExponent { .. })));
        assert!(matches!(Expr::parse("abs(x1, x1)", 1), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse("sin(x1)", 1), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse("(x1", 1), Err(ExprError::Syntax { .. })));
        assert!(matches!(Expr::parse("", 1), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn domain_violations_name_the_node() {
        let e = Expr::parse("log(x1)", 1).unwrap();
        assert!(matches!(e.eval(&[0.0]), Err(ExprError::Domain { op: "log", .. })));
        let e = Expr::parse("1/x1", 1).unwrap();
        assert!(matches!(e.eval(&[0.0]), Err(ExprError::Domain { op: "div", .. })));
        let e = Expr::parse("sqrt(x1)", 1).unwrap();
        assert!(matches!(e.eval(&[-1.0]), Err(ExprError::Domain { op: "sqrt", .. })));
        assert_eq!(e.eval(&[0.0]).unwrap(), 0.0);
        let p = e.active_profile(&[0.0]).unwrap();
        assert!(matches!(e.grad_smooth(&[0.0], &p), Err(ExprError::Domain { op: "sqrt", .. })));
    }

    #[test]
    fn grad_of_example_objective_at_two() {
        let e = Expr::parse("1/(abs(x1)+1)", 1).unwrap();
        let x = [2.0];
        let fd = fd_grad(&e, &x, 1e-5);
        // frozen from the finite-difference oracle: -1/9
        assert!((fd[0] + 0.111_111_111_111).abs() < 1e-9);
        let p = ActiveProfile::fixed(&[0]);
        let g = e.grad_smooth(&x, &p).unwrap();
        assert!((g[0] - fd[0]).abs() <= 1e-6 * fd[0].abs());
        assert!((g[0] + 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn grad_of_linear_is_constant() {
        let e = Expr::parse("3*x1 - 2*x2 + 0.5*x3", 3).unwrap();
        let p = e.active_profile(&[1.0, -7.0, 2.0]).unwrap();
        assert_eq!(e.grad_smooth(&[1.0, -7.0, 2.0], &p).unwrap(), vec![3.0, -2.0, 0.5]);
    }

    #[test]
    fn grad_selects_requested_branch() {
        let e = Expr::parse("max(x1^2, x2^2)", 2).unwrap();
        let x = [1.0, 2.0];
        let fd = fd_grad(&e, &x, 1e-5);
        assert!((fd[0]).abs() < 1e-9 && (fd[1] - 4.0).abs() < 1e-6);
        let g = e.grad_smooth(&x, &ActiveProfile::fixed(&[1])).unwrap();
        assert_eq!(g, vec![0.0, 4.0]);
    }

    #[test]
    fn profile_shape_is_checked() {
        let e = Expr::parse("max(x1, 0)", 1).unwrap();
        assert!(matches!(e.grad_smooth(&[1.0], &ActiveProfile::fixed(&[])), Err(ExprError::Profile(_))));
        assert!(matches!(e.grad_smooth(&[1.0], &ActiveProfile::fixed(&[5])), Err(ExprError::Profile(_))));
        let tie = e.active_profile(&[0.0]).unwrap();
        assert_eq!(tie.selections, vec![vec![0, 1]]);
        assert!(matches!(e.grad_smooth(&[0.0], &tie), Err(ExprError::Profile(_))));
    }

    #[test]
    fn activity_tolerance_is_relative() {
        let e = Expr::parse("max(x1, 1e6)", 1).unwrap();
        let p = e.active_profile(&[1e6 - 1e-4]).unwrap();
        assert_eq!(p.selections[0], vec![0, 1]);
        let p = e.active_profile(&[1e6 - 1e-2]).unwrap();
        assert_eq!(p.selections[0], vec![1]);
    }

    #[test]
    fn branch_gradients_enumerate_ties() {
        let e = Expr::parse("abs(x1) + abs(x2)", 2).unwrap();
        let (g, _) = e.active_branch_gradients(&[0.0, 0.0], 64).unwrap();
        assert_eq!(g.len(), 4);
        let (g, _) = e.active_branch_gradients(&[0.0, 1.0], 64).unwrap();
        assert_eq!(g, vec![vec![1.0, 1.0], vec![-1.0, 1.0]]);
        // an inactive argument's own ties do not count
        let e = Expr::parse("max(abs(x1) - 5, 1)", 1).unwrap();
        let (g, _) = e.active_branch_gradients(&[0.0], 64).unwrap();
        assert_eq!(g, vec![vec![0.0]]);
    }

    #[test]
    fn branch_cap_is_enforced() {
        let text: Vec<String> = (1..=7).map(|i| format!("abs(x{i})")).collect();
        let e = Expr::parse(&text.join("+"), 7).unwrap();
        let err = e.active_branch_gradients(&[0.0; 7], 64).unwrap_err();
        assert!(matches!(err, ExprError::Profile(_)));
        let (g, _) = e.active_branch_gradients(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0], 64).unwrap();
        assert_eq!(g.len(), 64);
    }

    #[test]
    fn display_round_trips() {
        for s in [
            "1/(abs(x1)+1)",
            "min(x1, -3, x2^-2)",
            "exp(x1) - log(x2) * sqrt(x1) / atan(x2)",
            "--x1 + 1e-7 - 2.5e20",
        ] {
            let e = Expr::parse(s, 2).unwrap();
            let back = Expr::parse(&e.to_string(), 2).unwrap();
            assert!(e.structurally_eq(&back), "{s} -> {e}");
        }
    }

    #[test]
    fn builders_compose() {
        let x = Expr::variable(1, 0);
        let f = Expr::max_of(&[x.shift(1.0), x.neg().shift(-1.0)]);
        for t in [-3.0, 0.0, 1.0, 4.5] {
            assert_eq!(f.eval(&[t]).unwrap(), (t - 1.0_f64).abs());
        }
        let c = Expr::constant(1, -2.0);
        assert_eq!(c.eval(&[0.0]).unwrap(), -2.0);
        assert!(Expr::parse(&c.to_string(), 1).unwrap().structurally_eq(&c));
    }
}
