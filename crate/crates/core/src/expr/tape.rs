use std::collections::HashMap;

use thiserror::Error;

use super::{BinaryOp, Expr, Node, UnaryOp, Var};

/// Evaluation failed at a singular point of the expression.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{reason} in `{subexpr}`")]
pub struct EvalError {
    pub reason: &'static str,
    /// Printed form of the offending subexpression, truncated.
    pub subexpr: String,
}

pub(crate) fn apply_unary(op: UnaryOp, a: f64) -> Result<f64, &'static str> {
    let v = match op {
        UnaryOp::Neg => -a,
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Tan => a.tan(),
        UnaryOp::Exp => a.exp(),
        UnaryOp::Log => {
            if a <= 0.0 {
                return Err("logarithm of a non-positive value");
            }
            a.ln()
        }
        UnaryOp::Sqrt => {
            if a < 0.0 {
                return Err("square root of a negative value");
            }
            a.sqrt()
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err("non-finite result")
    }
}

pub(crate) fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, &'static str> {
    let v = match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err("division by zero");
            }
            a / b
        }
        BinaryOp::Pow => {
            if a < 0.0 && b.fract() != 0.0 {
                return Err("fractional power of a negative value");
            }
            if a == 0.0 && b < 0.0 {
                return Err("negative power of zero");
            }
            if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                a.powi(b as i32)
            } else {
                a.powf(b)
            }
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err("non-finite result")
    }
}

#[derive(Debug, Clone, Copy)]
enum Instr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
}

/// A set of expressions flattened into a straight-line program.
///
/// Shared subtrees appear once, so evaluation cost is proportional to the
/// number of distinct nodes rather than the size of the expanded tree.
#[derive(Clone)]
pub struct Tape {
    instrs: Vec<Instr>,
    nodes: Vec<Expr>,
    outputs: Vec<usize>,
}

impl Tape {
    pub fn compile(exprs: &[Expr]) -> Tape {
        let mut tape = Tape {
            instrs: Vec::new(),
            nodes: Vec::new(),
            outputs: Vec::with_capacity(exprs.len()),
        };
        let mut slots: HashMap<usize, usize> = HashMap::new();
        for e in exprs {
            let slot = tape.push(e, &mut slots);
            tape.outputs.push(slot);
        }
        tape
    }

    // Iterative post-order walk; generated derivatives can be deep.
    fn push(&mut self, root: &Expr, slots: &mut HashMap<usize, usize>) -> usize {
        let mut stack: Vec<(Expr, bool)> = vec![(root.clone(), false)];
        while let Some((e, expanded)) = stack.pop() {
            if slots.contains_key(&e.id()) {
                continue;
            }
            if !expanded {
                stack.push((e.clone(), true));
                match e.node() {
                    Node::Unary(_, a) => stack.push((a.clone(), false)),
                    Node::Binary(_, a, b) => {
                        stack.push((b.clone(), false));
                        stack.push((a.clone(), false));
                    }
                    _ => {}
                }
                continue;
            }
            let instr = match e.node() {
                Node::Const(c) => Instr::Const(*c),
                Node::Var(v) => Instr::Var(*v),
                Node::Unary(op, a) => Instr::Unary(*op, slots[&a.id()]),
                Node::Binary(op, a, b) => Instr::Binary(*op, slots[&a.id()], slots[&b.id()]),
            };
            slots.insert(e.id(), self.instrs.len());
            self.instrs.push(instr);
            self.nodes.push(e);
        }
        slots[&root.id()]
    }

    /// Number of distinct nodes.
    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn eval(&self, point: [f64; 3], time: f64) -> Result<Vec<f64>, EvalError> {
        let mut scratch = Vec::new();
        self.eval_with(point, time, &mut scratch)
    }

    pub fn eval_with(
        &self,
        point: [f64; 3],
        time: f64,
        scratch: &mut Vec<f64>,
    ) -> Result<Vec<f64>, EvalError> {
        scratch.clear();
        scratch.reserve(self.instrs.len());
        for (i, instr) in self.instrs.iter().enumerate() {
            let value = match *instr {
                Instr::Const(c) => Ok(c),
                Instr::Var(v) => Ok(match v {
                    Var::X => point[0],
                    Var::Y => point[1],
                    Var::Z => point[2],
                    Var::T => time,
                }),
                Instr::Unary(op, a) => apply_unary(op, scratch[a]),
                Instr::Binary(op, a, b) => apply_binary(op, scratch[a], scratch[b]),
            };
            match value {
                Ok(v) => scratch.push(v),
                Err(reason) => {
                    let subexpr = self.nodes[i].to_string_limited(120);
                    return Err(EvalError { reason, subexpr });
                }
            }
        }
        Ok(self.outputs.iter().map(|&o| scratch[o]).collect())
    }
}
