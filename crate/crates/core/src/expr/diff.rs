use std::collections::HashMap;

use super::{BinaryOp, Expr, Node, UnaryOp, Var};

/// Memoizing symbolic differentiator for one variable.
///
/// The memo is keyed by node identity, so a DAG with shared subtrees is
/// differentiated in time proportional to its distinct nodes and the result
/// shares structure in the same way. Reuse one instance across related
/// expressions (the components of a field) to share work between them.
pub struct Differentiator {
    var: Var,
    // Holds the source node alive so its address stays a valid key.
    memo: HashMap<usize, (Expr, Expr)>,
}

impl Differentiator {
    pub fn new(var: Var) -> Self {
        Differentiator {
            var,
            memo: HashMap::new(),
        }
    }

    pub fn var(&self) -> Var {
        self.var
    }

    pub fn diff(&mut self, e: &Expr) -> Expr {
        // Iterative post-order so deep expressions cannot overflow the stack.
        let mut stack: Vec<(Expr, bool)> = vec![(e.clone(), false)];
        while let Some((node, expanded)) = stack.pop() {
            if self.memo.contains_key(&node.id()) {
                continue;
            }
            if !expanded {
                stack.push((node.clone(), true));
                match node.node() {
                    Node::Unary(_, a) => stack.push((a.clone(), false)),
                    Node::Binary(_, a, b) => {
                        stack.push((b.clone(), false));
                        stack.push((a.clone(), false));
                    }
                    _ => {}
                }
                continue;
            }
            let d = self.rule(&node);
            self.memo.insert(node.id(), (node, d));
        }
        self.memo[&e.id()].1.clone()
    }

    fn get(&self, e: &Expr) -> Expr {
        self.memo[&e.id()].1.clone()
    }

    fn rule(&self, e: &Expr) -> Expr {
        match e.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(v) => {
                if *v == self.var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Unary(op, a) => {
                let da = self.get(a);
                if da.is_zero() {
                    return Expr::zero();
                }
                match op {
                    UnaryOp::Neg => -da,
                    UnaryOp::Sin => a.cos() * da,
                    UnaryOp::Cos => -(a.sin() * da),
                    UnaryOp::Tan => da / a.cos().powi(2),
                    UnaryOp::Exp => e * da,
                    UnaryOp::Log => da / a,
                    UnaryOp::Sqrt => da / (2.0 * e),
                }
            }
            Node::Binary(op, a, b) => {
                let da = self.get(a);
                let db = self.get(b);
                match op {
                    BinaryOp::Add => da + db,
                    BinaryOp::Sub => da - db,
                    BinaryOp::Mul => da * b + a * db,
                    BinaryOp::Div => {
                        if db.is_zero() {
                            da / b
                        } else {
                            (da - e * db) / b
                        }
                    }
                    BinaryOp::Pow => {
                        if let Some(n) = b.as_const() {
                            // d(a^n) = n a^(n-1) da
                            n * a.pow(Expr::constant(n - 1.0)) * da
                        } else if da.is_zero() {
                            e * a.ln() * db
                        } else {
                            e * (db * a.ln() + b * da / a)
                        }
                    }
                }
            }
        }
    }
}

/// Differentiates several expressions with respect to `var`, sharing work.
pub fn diff_many(exprs: &[Expr], var: Var) -> Vec<Expr> {
    let mut d = Differentiator::new(var);
    exprs.iter().map(|e| d.diff(e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn at(e: &Expr, p: [f64; 3]) -> f64 {
        e.eval(p, 0.0).unwrap()
    }

    #[test]
    fn power_rule() {
        let e = parse("x^2 * y").unwrap();
        assert_eq!(at(&e.diff(Var::X), [1.0, 2.0, 4.0]), 4.0);
    }

    #[test]
    fn halphen_component() {
        let e = parse("y*z - x*y - x*z").unwrap();
        assert_eq!(at(&e.diff(Var::X), [1.0, 2.0, 4.0]), -6.0);
    }

    #[test]
    fn constant_has_zero_derivative() {
        assert!(parse("7").unwrap().diff(Var::Z).is_zero());
        assert!(parse("x*y").unwrap().diff(Var::Z).is_zero());
    }

    #[test]
    fn elementary_functions() {
        let p = [0.3, 0.7, 1.1];
        let cases = [
            ("sin(x*y)", "y*cos(x*y)"),
            ("cos(x)", "-sin(x)"),
            ("tan(x)", "1/cos(x)^2"),
            ("exp(2*x)", "2*exp(2*x)"),
            ("log(x^2+1)", "2*x/(x^2+1)"),
            ("sqrt(x+z)", "1/(2*sqrt(x+z))"),
            ("x^y", "y*x^(y-1)"),
            ("2^x", "2^x*log(2)"),
            ("x/(y+x)", "y/(y+x)^2"),
        ];
        for (f, df) in cases {
            let got = at(&parse(f).unwrap().diff(Var::X), p);
            let want = at(&parse(df).unwrap(), p);
            assert!((got - want).abs() < 1e-12, "{f}: {got} vs {want}");
        }
    }

    #[test]
    fn shared_dag_stays_small() {
        // Repeated squaring: the tree doubles every level, the DAG does not.
        let mut e = parse("x + y").unwrap();
        for _ in 0..40 {
            e = (&e * &e).sin();
        }
        let d = e.diff(Var::X);
        assert!(d.dag_size() < 2000, "{}", d.dag_size());
    }
}
