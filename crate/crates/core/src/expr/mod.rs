//! Lattice expressions over evaluation generators `d(a)`.
//!
//! An expression is a finite tree built from generators with `+`, scalar
//! multiples, join (`v`, pointwise max) and meet (`^`, pointwise min). It is
//! evaluated pointwise at dual points, i.e. coordinate assignments.

mod maxmin;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use maxmin::{LinearFunctional, MaxMinForm, DEFAULT_MAXMIN_CAP};
pub use parse::parse_expr;

/// Name of a generator `a` in `d(a)`: nonempty, over `[a-zA-Z0-9_]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GeneratorId(String);

impl GeneratorId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if Self::is_valid(&name) {
            Ok(GeneratorId(name))
        } else {
            Err(Error::InvalidGenerator(name))
        }
    }

    pub fn is_valid(name: &str) -> bool {
        !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for GeneratorId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        GeneratorId::new(s)
    }
}

impl From<GeneratorId> for String {
    fn from(g: GeneratorId) -> String {
        g.0
    }
}

impl fmt::Display for GeneratorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Convenience for literals known to be valid; panics otherwise.
pub fn gid(name: &str) -> GeneratorId {
    GeneratorId::new(name).expect("valid generator name")
}

pub fn gids(names: &[&str]) -> Vec<GeneratorId> {
    names.iter().map(|n| gid(n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LatticeExpr {
    Gen {
        id: GeneratorId,
    },
    Scale {
        c: f64,
        child: Box<LatticeExpr>,
    },
    Sum {
        left: Box<LatticeExpr>,
        right: Box<LatticeExpr>,
    },
    Join {
        left: Box<LatticeExpr>,
        right: Box<LatticeExpr>,
    },
    Meet {
        left: Box<LatticeExpr>,
        right: Box<LatticeExpr>,
    },
}

impl LatticeExpr {
    pub fn gen(id: GeneratorId) -> Self {
        LatticeExpr::Gen { id }
    }

    /// `d(name)`; panics on an invalid name.
    pub fn d(name: &str) -> Self {
        LatticeExpr::gen(gid(name))
    }

    pub fn scale(c: f64, e: LatticeExpr) -> Self {
        LatticeExpr::Scale {
            c,
            child: Box::new(e),
        }
    }

    pub fn sum(l: LatticeExpr, r: LatticeExpr) -> Self {
        LatticeExpr::Sum {
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    pub fn join(l: LatticeExpr, r: LatticeExpr) -> Self {
        LatticeExpr::Join {
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    pub fn meet(l: LatticeExpr, r: LatticeExpr) -> Self {
        LatticeExpr::Meet {
            left: Box::new(l),
            right: Box::new(r),
        }
    }

    pub fn neg(e: LatticeExpr) -> Self {
        LatticeExpr::scale(-1.0, e)
    }

    /// `|e| = e v (-e)`
    pub fn abs(e: LatticeExpr) -> Self {
        LatticeExpr::join(e.clone(), LatticeExpr::neg(e))
    }

    /// `Σ c_i d(a_i)`, left-nested; panics on an empty list.
    pub fn linear(terms: &[(f64, GeneratorId)]) -> Self {
        let mut it = terms
            .iter()
            .map(|(c, g)| LatticeExpr::scale(*c, LatticeExpr::gen(g.clone())));
        let first = it.next().expect("at least one term");
        it.fold(first, LatticeExpr::sum)
    }

    /// Generators occurring syntactically in the tree.
    pub fn support(&self) -> BTreeSet<GeneratorId> {
        let mut out = BTreeSet::new();
        self.collect_support(&mut out);
        out
    }

    fn collect_support(&self, out: &mut BTreeSet<GeneratorId>) {
        match self {
            LatticeExpr::Gen { id } => {
                out.insert(id.clone());
            }
            LatticeExpr::Scale { child, .. } => child.collect_support(out),
            LatticeExpr::Sum { left, right }
            | LatticeExpr::Join { left, right }
            | LatticeExpr::Meet { left, right } => {
                left.collect_support(out);
                right.collect_support(out);
            }
        }
    }

    /// Sorted support as a coordinate list.
    pub fn dims(&self) -> Vec<GeneratorId> {
        self.support().into_iter().collect()
    }

    pub fn node_count(&self) -> usize {
        match self {
            LatticeExpr::Gen { .. } => 1,
            LatticeExpr::Scale { child, .. } => 1 + child.node_count(),
            LatticeExpr::Sum { left, right }
            | LatticeExpr::Join { left, right }
            | LatticeExpr::Meet { left, right } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn evaluate(&self, p: &BTreeMap<GeneratorId, f64>) -> Result<f64> {
        self.eval_by(&|g: &GeneratorId| p.get(g).copied())
    }

    /// Evaluation with an arbitrary coordinate lookup.
    pub fn eval_by<S: Scalar>(&self, lookup: &dyn Fn(&GeneratorId) -> Option<S>) -> Result<S> {
        Ok(match self {
            LatticeExpr::Gen { id } => {
                lookup(id).ok_or_else(|| Error::MissingCoordinate(id.to_string()))?
            }
            LatticeExpr::Scale { c, child } => S::from_f64(*c) * child.eval_by(lookup)?,
            LatticeExpr::Sum { left, right } => left.eval_by(lookup)? + right.eval_by(lookup)?,
            LatticeExpr::Join { left, right } => S::max_of(left.eval_by(lookup)?, right.eval_by(lookup)?),
            LatticeExpr::Meet { left, right } => S::min_of(left.eval_by(lookup)?, right.eval_by(lookup)?),
        })
    }

    /// Compiles against an ordered coordinate list for fast dense evaluation.
    pub fn compile(&self, dims: &[GeneratorId]) -> Result<CompiledExpr> {
        let index: BTreeMap<&GeneratorId, usize> = dims.iter().enumerate().map(|(i, g)| (g, i)).collect();
        let mut ops = Vec::with_capacity(self.node_count());
        self.emit(&index, &mut ops)?;
        Ok(CompiledExpr {
            ops,
            width: dims.len(),
        })
    }

    fn emit(&self, index: &BTreeMap<&GeneratorId, usize>, ops: &mut Vec<Op>) -> Result<()> {
        match self {
            LatticeExpr::Gen { id } => {
                let i = index
                    .get(id)
                    .ok_or_else(|| Error::MissingCoordinate(id.to_string()))?;
                ops.push(Op::Load(*i));
            }
            LatticeExpr::Scale { c, child } => {
                child.emit(index, ops)?;
                ops.push(Op::Scale(*c));
            }
            LatticeExpr::Sum { left, right } => {
                left.emit(index, ops)?;
                right.emit(index, ops)?;
                ops.push(Op::Add);
            }
            LatticeExpr::Join { left, right } => {
                left.emit(index, ops)?;
                right.emit(index, ops)?;
                ops.push(Op::Max);
            }
            LatticeExpr::Meet { left, right } => {
                left.emit(index, ops)?;
                right.emit(index, ops)?;
                ops.push(Op::Min);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("expression serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl fmt::Display for LatticeExpr {
    /// Fully parenthesized form accepted by [`parse_expr`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeExpr::Gen { id } => write!(f, "d({id})"),
            LatticeExpr::Scale { c, child } => match **child {
                LatticeExpr::Gen { .. } => write!(f, "{c:?}*{child}"),
                _ => write!(f, "{c:?}*({child})"),
            },
            LatticeExpr::Sum { left, right } => write!(f, "({left} + {right})"),
            LatticeExpr::Join { left, right } => write!(f, "({left} v {right})"),
            LatticeExpr::Meet { left, right } => write!(f, "({left} ^ {right})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Load(usize),
    Scale(f64),
    Add,
    Max,
    Min,
}

/// Postfix program for an expression over a fixed coordinate order.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    width: usize,
}

impl CompiledExpr {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        debug_assert!(p.len() >= self.width);
        let mut stack: Vec<f64> = Vec::with_capacity(16);
        for op in &self.ops {
            match *op {
                Op::Load(i) => stack.push(p[i]),
                Op::Scale(c) => {
                    let x = stack.last_mut().expect("operand");
                    *x *= c;
                }
                Op::Add | Op::Max | Op::Min => {
                    let b = stack.pop().expect("operand");
                    let a = stack.last_mut().expect("operand");
                    *a = match op {
                        Op::Add => *a + b,
                        Op::Max => a.max(b),
                        _ => a.min(b),
                    };
                }
            }
        }
        stack.pop().expect("result")
    }

    pub fn eval_scalar<S: Scalar>(&self, p: &[S]) -> S {
        let mut stack: Vec<S> = Vec::with_capacity(16);
        for op in &self.ops {
            match *op {
                Op::Load(i) => stack.push(p[i].clone()),
                Op::Scale(c) => {
                    let x = stack.pop().expect("operand");
                    stack.push(S::from_f64(c) * x);
                }
                Op::Add | Op::Max | Op::Min => {
                    let b = stack.pop().expect("operand");
                    let a = stack.pop().expect("operand");
                    stack.push(match op {
                        Op::Add => a + b,
                        Op::Max => S::max_of(a, b),
                        _ => S::min_of(a, b),
                    });
                }
            }
        }
        stack.pop().expect("result")
    }
}

/// Builds a coordinate map from parallel name/value slices.
pub fn point(dims: &[GeneratorId], values: &[f64]) -> BTreeMap<GeneratorId, f64> {
    dims.iter().cloned().zip(values.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(pairs: &[(&str, f64)]) -> BTreeMap<GeneratorId, f64> {
        pairs.iter().map(|(n, v)| (gid(n), *v)).collect()
    }

    #[test]
    fn evaluation_examples() {
        let e = parse_expr("d(a)").unwrap();
        assert_eq!(e.evaluate(&p(&[("a", 0.7)])).unwrap(), 0.7);
        let e = parse_expr("d(a) v d(b)").unwrap();
        assert_eq!(e.evaluate(&p(&[("a", 1.0), ("b", -1.0)])).unwrap(), 1.0);
        let e = parse_expr("|d(a)| + |d(b)|").unwrap();
        assert_eq!(e.evaluate(&p(&[("a", -0.5), ("b", 0.25)])).unwrap(), 0.75);
    }

    #[test]
    fn missing_coordinate_is_reported() {
        let e = parse_expr("d(a) + d(b)").unwrap();
        match e.evaluate(&p(&[("a", 0.1)])) {
            Err(Error::MissingCoordinate(g)) => assert_eq!(g, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn support_is_syntactic() {
        let s = |t: &str| parse_expr(t).unwrap().support();
        assert_eq!(s("d(a)"), [gid("a")].into_iter().collect());
        assert_eq!(s("d(a) + 0*d(b)"), [gid("a"), gid("b")].into_iter().collect());
        assert_eq!(s("|d(a)| ^ d(a)"), [gid("a")].into_iter().collect());
    }

    #[test]
    fn compiled_matches_tree_evaluation() {
        let e = parse_expr("(2*d(a) - d(b)) ^ |d(c) + 0.5*d(a)|").unwrap();
        let dims = e.dims();
        let c = e.compile(&dims).unwrap();
        let x = [0.3, -0.8, 0.1];
        let direct = e.evaluate(&point(&dims, &x)).unwrap();
        assert_eq!(c.eval(&x), direct);
        assert_eq!(c.eval_scalar::<f64>(&x), direct);
    }

    #[test]
    fn generator_names_are_validated() {
        assert!(GeneratorId::new("a_1").is_ok());
        assert!(GeneratorId::new("").is_err());
        assert!(GeneratorId::new("a-b").is_err());
        assert!(serde_json::from_str::<GeneratorId>("\"x y\"").is_err());
    }

    #[test]
    fn json_encoding_is_tagged() {
        let e = parse_expr("0.5*d(a) v d(b)").unwrap();
        let js = e.to_json();
        assert_eq!(
            js,
            r#"{"kind":"join","left":{"kind":"scale","c":0.5,"child":{"kind":"gen","id":"a"}},"right":{"kind":"gen","id":"b"}}"#
        );
        assert_eq!(LatticeExpr::from_json(&js).unwrap(), e);
    }
}
