use std::fmt::{self, Write};

use super::{BinaryOp, Expr, Node, UnaryOp};

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(c) if c.is_sign_negative() => PREC_NEG,
        Node::Const(_) | Node::Var(_) => PREC_ATOM,
        Node::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Node::Unary(..) => PREC_ATOM,
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_SUM,
        Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_PRODUCT,
        Node::Binary(BinaryOp::Pow, ..) => PREC_POW,
    }
}

fn write_operand(f: &mut impl Write, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        f.write_char('(')?;
        write_expr(f, e)?;
        f.write_char(')')
    } else {
        write_expr(f, e)
    }
}

// Parenthesization preserves the tree shape exactly, so printing and
// re-parsing reproduces the same evaluation order.
fn write_expr(f: &mut impl Write, e: &Expr) -> fmt::Result {
    match e.node() {
        // Debug formatting of f64 is the shortest round-trip representation.
        Node::Const(c) if c.fract() == 0.0 && c.abs() < 1e15 => write!(f, "{c}"),
        Node::Const(c) => write!(f, "{c:?}"),
        Node::Var(v) => f.write_str(v.name()),
        Node::Unary(UnaryOp::Neg, a) => {
            f.write_char('-')?;
            write_operand(f, a, precedence(a) <= PREC_NEG)
        }
        Node::Unary(op, a) => {
            f.write_str(op.function_name().unwrap_or("?"))?;
            write_operand(f, a, true)
        }
        Node::Binary(op, a, b) => {
            let (symbol, prec) = match op {
                BinaryOp::Add => (" + ", PREC_SUM),
                BinaryOp::Sub => (" - ", PREC_SUM),
                BinaryOp::Mul => ("*", PREC_PRODUCT),
                BinaryOp::Div => ("/", PREC_PRODUCT),
                BinaryOp::Pow => ("^", PREC_POW),
            };
            if *op == BinaryOp::Pow {
                write_operand(f, a, precedence(a) <= PREC_POW)?;
                f.write_str(symbol)?;
                write_operand(f, b, precedence(b) < PREC_POW)
            } else {
                write_operand(f, a, precedence(a) < prec)?;
                f.write_str(symbol)?;
                write_operand(f, b, precedence(b) <= prec)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

struct Bounded {
    out: String,
    limit: usize,
}

impl Write for Bounded {
    fn write_str(&mut self, s: &str) -> fmt::Result {
        if self.out.len() + s.len() > self.limit {
            return Err(fmt::Error);
        }
        self.out.push_str(s);
        Ok(())
    }
}

impl Expr {
    /// Prints at most `limit` bytes; longer output is cut and marked with `...`.
    ///
    /// Printing expands shared subtrees, so this is the safe way to render
    /// expressions produced by repeated differentiation.
    pub fn to_string_limited(&self, limit: usize) -> String {
        let mut w = Bounded {
            out: String::new(),
            limit,
        };
        match write_expr(&mut w, self) {
            Ok(()) => w.out,
            Err(_) => {
                w.out.push_str("...");
                w.out
            }
        }
    }
}
