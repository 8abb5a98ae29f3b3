use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, GeneratorId, LatticeExpr};
use crate::plfan::PLFunction;

/// Black-box real function on dual vectors, positively homogeneous of
/// degree [`Evaluator::degree`]. Points are dense over [`Evaluator::dims`].
pub trait Evaluator: Sync {
    fn dims(&self) -> &[GeneratorId];
    fn eval(&self, p: &[f64]) -> f64;
    fn degree(&self) -> u32 {
        1
    }
}

/// A lattice expression compiled over a fixed coordinate order.
#[derive(Debug, Clone)]
pub struct ExprEvaluator {
    dims: Vec<GeneratorId>,
    compiled: CompiledExpr,
}

impl ExprEvaluator {
    pub fn new(e: &LatticeExpr, dims: &[GeneratorId]) -> Result<Self> {
        Ok(ExprEvaluator {
            dims: dims.to_vec(),
            compiled: e.compile(dims)?,
        })
    }

    pub fn compiled(&self) -> &CompiledExpr {
        &self.compiled
    }
}

impl Evaluator for ExprEvaluator {
    fn dims(&self) -> &[GeneratorId] {
        &self.dims
    }
    fn eval(&self, p: &[f64]) -> f64 {
        self.compiled.eval(p)
    }
}

impl Evaluator for PLFunction<f64> {
    fn dims(&self) -> &[GeneratorId] {
        PLFunction::dims(self)
    }
    fn eval(&self, p: &[f64]) -> f64 {
        PLFunction::eval(self, p)
    }
}

/// Pointwise product `f · |δ_a|`, homogeneous of degree `deg f + 1`.
pub struct AbsProduct<'a> {
    inner: &'a dyn Evaluator,
    index: usize,
}

impl<'a> AbsProduct<'a> {
    pub fn new(inner: &'a dyn Evaluator, a: &GeneratorId) -> Result<Self> {
        let index = inner
            .dims()
            .iter()
            .position(|g| g == a)
            .ok_or_else(|| Error::MissingCoordinate(a.to_string()))?;
        Ok(AbsProduct { inner, index })
    }
}

impl Evaluator for AbsProduct<'_> {
    fn dims(&self) -> &[GeneratorId] {
        self.inner.dims()
    }
    fn eval(&self, p: &[f64]) -> f64 {
        self.inner.eval(p) * p[self.index].abs()
    }
    fn degree(&self) -> u32 {
        self.inner.degree() + 1
    }
}

/// Closure-backed evaluator.
pub struct FnEvaluator<F> {
    dims: Vec<GeneratorId>,
    degree: u32,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnEvaluator<F> {
    pub fn new(dims: Vec<GeneratorId>, degree: u32, f: F) -> Self {
        FnEvaluator { dims, degree, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Evaluator for FnEvaluator<F> {
    fn dims(&self) -> &[GeneratorId] {
        &self.dims
    }
    fn eval(&self, p: &[f64]) -> f64 {
        (self.f)(p)
    }
    fn degree(&self) -> u32 {
        self.degree
    }
}

/// `Σ_i |F(x_i*)|`, summed in list order.
pub fn config_value(f: &dyn Evaluator, points: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| f.eval(p).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{gids, parse_expr};

    fn ev(text: &str, dims: &[&str]) -> ExprEvaluator {
        ExprEvaluator::new(&parse_expr(text).unwrap(), &gids(dims)).unwrap()
    }

    #[test]
    fn config_value_examples() {
        let f = ev("d(a)", &["a"]);
        assert_eq!(config_value(&f, &[vec![1.0]]), 1.0);
        assert_eq!(config_value(&f, &[vec![0.5], vec![-0.5]]), 1.0);
        let g = ev("d(a) v d(b)", &["a", "b"]);
        assert_eq!(config_value(&g, &[vec![1.0, 0.0], vec![0.0, 1.0]]), 2.0);
    }

    #[test]
    fn product_has_degree_two() {
        let f = ev("d(b)", &["a", "b"]);
        let p = AbsProduct::new(&f, &gids(&["a"])[0]).unwrap();
        assert_eq!(p.degree(), 2);
        assert_eq!(p.eval(&[-0.5, 0.8]), 0.4);
        assert!(AbsProduct::new(&f, &gids(&["z"])[0]).is_err());
    }
}
