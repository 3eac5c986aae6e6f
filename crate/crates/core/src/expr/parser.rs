use super::{Expr, ExprError, Node, NodeId};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Var(usize),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, line: tl, col: tc });
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
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
            let v: f64 = s.parse().map_err(|_| ExprError::Syntax {
                line: tl,
                col: tc,
                msg: format!("malformed number `{s}`"),
            })?;
            if !v.is_finite() {
                return Err(ExprError::Syntax {
                    line: tl,
                    col: tc,
                    msg: format!("number `{s}` is not finite"),
                });
            }
            col += i - start;
            out.push(Token { tok: Tok::Num(v, s), line: tl, col: tc });
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match s.strip_prefix('x') {
                Some(rest) if !rest.is_empty() && rest.chars().all(|d| d.is_ascii_digit()) => {
                    let idx: usize = rest.parse().map_err(|_| ExprError::Syntax {
                        line: tl,
                        col: tc,
                        msg: format!("variable index too large in `{s}`"),
                    })?;
                    Tok::Var(idx)
                }
                _ => Tok::Ident(s),
            };
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        return Err(ExprError::Syntax {
            line: tl,
            col: tc,
            msg: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    dim: usize,
    nodes: Vec<Node>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, t: &Token, msg: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn push(&mut self, n: Node) -> NodeId {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        let t = self.bump();
        if t.tok == want {
            Ok(())
        } else {
            self.err(&t, format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<NodeId, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = self.push(Node::Add(lhs, rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = self.push(Node::Sub(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<NodeId, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = self.push(Node::Mul(lhs, rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.factor()?;
                    lhs = self.push(Node::Div(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<NodeId, ExprError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.factor()?;
            return Ok(self.push(Node::Neg(inner)));
        }
        let base = self.base()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let mut sign = 1i64;
        if self.peek().tok == Tok::Minus {
            self.bump();
            sign = -1;
        } else if self.peek().tok == Tok::Plus {
            self.bump();
        }
        let t = self.bump();
        match &t.tok {
            Tok::Num(_, text) if text.chars().all(|c| c.is_ascii_digit()) => {
                let k: i64 = text
                    .parse()
                    .or_else(|_| self.err(&t, "exponent out of range"))?;
                let k = i32::try_from(sign * k).or_else(|_| self.err(&t, "exponent out of range"))?;
                Ok(self.push(Node::Pow(base, k)))
            }
            _ => Err(ExprError::NonIntegerExponent { line: t.line, col: t.col }),
        }
    }

    fn base(&mut self) -> Result<NodeId, ExprError> {
        let t = self.bump();
        match t.tok.clone() {
            Tok::Num(v, _) => Ok(self.push(Node::Const(v))),
            Tok::Var(idx) => {
                if idx == 0 || idx > self.dim {
                    return Err(ExprError::VariableOutOfRange {
                        index: idx,
                        dim: self.dim,
                        line: t.line,
                        col: t.col,
                    });
                }
                Ok(self.push(Node::Var(idx - 1)))
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let arity_one = matches!(name.as_str(), "abs" | "exp" | "log" | "sqrt" | "atan");
                let nary = matches!(name.as_str(), "max" | "min");
                if !arity_one && !nary {
                    return self.err(&t, format!("unknown function `{name}`"));
                }
                self.expect(Tok::LParen, "`(` after function name")?;
                let mut args = vec![self.expr()?];
                while self.peek().tok == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                let close = self.peek().clone();
                self.expect(Tok::RParen, "`)` closing the argument list")?;
                if arity_one && args.len() != 1 {
                    return self.err(&close, format!("`{name}` takes exactly one argument"));
                }
                let a = args[0];
                Ok(match name.as_str() {
                    "exp" => self.push(Node::Exp(a)),
                    "log" => self.push(Node::Log(a)),
                    "sqrt" => self.push(Node::Sqrt(a)),
                    "atan" => self.push(Node::Atan(a)),
                    "abs" => {
                        let neg = self.push(Node::Neg(a));
                        self.push(Node::Max(vec![a, neg]))
                    }
                    "max" => self.push(Node::Max(args)),
                    _ => {
                        // min(u..) = -max(-u..)
                        let negs: Vec<NodeId> =
                            args.into_iter().map(|u| self.push(Node::Neg(u))).collect();
                        let m = self.push(Node::Max(negs));
                        self.push(Node::Neg(m))
                    }
                })
            }
            Tok::End => self.err(&t, "unexpected end of input"),
            _ => self.err(&t, "expected a number, variable, function or `(`"),
        }
    }
}

pub(super) fn parse(text: &str, dim: usize) -> Result<Expr, ExprError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, dim, nodes: Vec::new() };
    let root = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return p.err(&t, "unexpected trailing input");
    }
    Ok(Expr::from_parts(p.nodes, root, dim))
}
