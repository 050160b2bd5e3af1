//! Closed-form data given as small arithmetic expressions in the
//! coordinates `x1 .. xn` (and the constant `pi`). Besides the evalexpr
//! builtins (`math::cos`, ...) the short names `sin`, `cos`, `tan`, `exp`,
//! `ln`, `sqrt` and `abs` are available.

use evalexpr::{
    build_operator_tree, Context, EvalexprError, EvalexprResult, Node, Value,
};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::MAX_DIM;

/// A parsed expression, cheap to evaluate repeatedly.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    tree: Node,
    dim: usize,
    constant: Option<f64>,
}

struct Coords {
    values: [Value; MAX_DIM],
    dim: usize,
    pi: Value,
}

impl Coords {
    fn new(x: &[f64]) -> Self {
        let mut values: [Value; MAX_DIM] = std::array::from_fn(|_| Value::Float(0.0));
        for (v, xi) in values.iter_mut().zip(x) {
            *v = Value::Float(*xi);
        }
        Self { values, dim: x.len(), pi: Value::Float(std::f64::consts::PI) }
    }
}

impl Context for Coords {
    fn get_value(&self, identifier: &str) -> Option<&Value> {
        if identifier == "pi" {
            return Some(&self.pi);
        }
        let idx: usize = identifier.strip_prefix('x')?.parse().ok()?;
        (1..=self.dim).contains(&idx).then(|| &self.values[idx - 1])
    }

    fn call_function(&self, identifier: &str, argument: &Value) -> EvalexprResult<Value> {
        let f: fn(f64) -> f64 = match identifier {
            "sin" => f64::sin,
            "cos" => f64::cos,
            "tan" => f64::tan,
            "exp" => f64::exp,
            "ln" => f64::ln,
            "sqrt" => f64::sqrt,
            "abs" => f64::abs,
            _ => return Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string())),
        };
        Ok(Value::Float(f(argument.as_number()?)))
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _disabled: bool) -> EvalexprResult<()> {
        Err(EvalexprError::ContextNotMutable)
    }
}

impl Expr {
    /// Parses `source` and checks that it evaluates to a finite number for
    /// coordinates in dimension `dim`.
    pub fn parse(source: &str, dim: usize) -> Result<Self> {
        let fail = |msg: String| Error::Expression { expr: source.to_string(), msg };
        let tree = build_operator_tree(source).map_err(|e| fail(e.to_string()))?;
        for id in tree.iter_read_variable_identifiers() {
            let ok = id == "pi"
                || id
                    .strip_prefix('x')
                    .and_then(|s| s.parse::<usize>().ok())
                    .is_some_and(|i| (1..=dim).contains(&i));
            if !ok {
                return Err(fail(format!("unknown variable `{id}` (use x1..x{dim} or pi)")));
            }
        }
        let constant = tree.iter_read_variable_identifiers().all(|id| id == "pi");
        let mut expr = Self { source: source.to_string(), tree, dim, constant: None };
        let probe = expr.try_eval(&vec![0.5; dim]).map_err(|e| fail(e.to_string()))?;
        if !probe.is_finite() {
            return Err(fail("does not evaluate to a finite number".into()));
        }
        if constant {
            expr.constant = Some(probe);
        }
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn try_eval(&self, x: &[f64]) -> EvalexprResult<f64> {
        self.tree.eval_number_with_context(&Coords::new(x))
    }

    /// Evaluates at `x`; non-numeric results become NaN.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

impl ScalarField for Expr {
    fn value(&self, x: &[f64]) -> f64 {
        match self.constant {
            Some(c) => c,
            None => self.eval(x),
        }
    }

    fn constant_value(&self) -> Option<f64> {
        self.constant
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_coordinates() {
        let e = Expr::parse("1 + 2*x1 - x3^2", 3).unwrap();
        assert!((e.value(&[0.5, 0.0, 2.0]) - (-2.0)).abs() < 1e-15);
        assert_eq!(Expr::parse("1", 3).unwrap().constant_value(), Some(1.0));
        assert_eq!(Expr::parse("-1", 3).unwrap().value(&[0.0; 3]), -1.0);
        let s = Expr::parse("math::sin(pi*x1)", 3).unwrap();
        assert!((s.value(&[0.5, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        let c = Expr::parse("cos(2 * pi * x1) + sqrt(x2)", 3).unwrap();
        assert!((c.value(&[0.5, 4.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expr::parse("x4", 3).is_err());
        assert!(Expr::parse("y + 1", 3).is_err());
        assert!(Expr::parse("1 +", 3).is_err());
        assert!(Expr::parse("true", 3).is_err());
        assert!(Expr::parse("cosh(x1)", 3).is_err());
    }
}
