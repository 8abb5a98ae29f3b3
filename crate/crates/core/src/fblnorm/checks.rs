use serde::{Deserialize, Serialize};

use super::bracket::NormBracket;
use super::eval::{AbsProduct, Evaluator, ExprEvaluator};
use super::exact::{exact_norm_of_expr, ExactOptions};
use super::oracle::oracle_lower_bound;
use super::space::AdmissibilitySpace;
use crate::error::{Error, Result};
use crate::expr::{GeneratorId, LatticeExpr, DEFAULT_MAXMIN_CAP};
use crate::plfan::{pl_from_maxmin, FanOptions, PLFunction};
use crate::scalar::Arithmetic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma34Report {
    pub sup_norm: f64,
    pub best_lower: f64,
    pub pass: bool,
    pub bracket: NormBracket,
}

/// Sup norm of an expression on `[-1,1]^dims`.
pub fn expr_sup_norm(e: &LatticeExpr, dims: &[GeneratorId]) -> Result<f64> {
    let m = e.to_maxmin_with(dims, DEFAULT_MAXMIN_CAP)?;
    let f: PLFunction<f64> = pl_from_maxmin(&m, dims, &FanOptions::default())?;
    f.sup_norm_on_cube()
}

/// Oracle check that `‖f·|δ_a|‖ <= ‖f‖_∞`.
pub fn check_lemma34(
    f: &LatticeExpr,
    a: &GeneratorId,
    space: &AdmissibilitySpace,
    budget: u64,
    seed: u64,
) -> Result<Lemma34Report> {
    let dims = space.generators();
    if !dims.contains(a) {
        return Err(Error::MissingCoordinate(a.to_string()));
    }
    let sup_norm = expr_sup_norm(f, dims)?;
    let inner = ExprEvaluator::new(f, dims)?;
    check_lemma34_with(&inner, sup_norm, a, space, budget, seed)
}

/// Same check for a black-box `f` with a known sup norm.
pub fn check_lemma34_with(
    f: &dyn Evaluator,
    sup_norm: f64,
    a: &GeneratorId,
    space: &AdmissibilitySpace,
    budget: u64,
    seed: u64,
) -> Result<Lemma34Report> {
    let product = AbsProduct::new(f, a)?;
    let bracket = oracle_lower_bound(&product, space, budget, seed)?;
    Ok(Lemma34Report {
        sup_norm,
        best_lower: bracket.lower,
        pass: bracket.lower <= sup_norm + 1e-9,
        bracket,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedralReport {
    /// Symbolic `±e_a` ball.
    pub l1_norm: f64,
    /// Same ball given as an explicit vertex list.
    pub l1_vertex_norm: f64,
    pub identical: bool,
    /// Cube vertices `{±1}^n`, recorded without any equality claim.
    pub linf_norm: f64,
    pub linf_oracle: f64,
    /// Oracle never exceeds the exact value.
    pub oracle_consistent: bool,
}

/// Compares the free lattice norm with the lattice over `ℓ_1^n` (identical
/// constraint sets) and records the norm over `ℓ_∞^n`.
pub fn fbl_vs_polyhedral_check(e: &LatticeExpr, budget: u64, seed: u64) -> Result<PolyhedralReport> {
    let dims = e.dims();
    let opts = ExactOptions::default();
    let l1 = AdmissibilitySpace::l1(dims.clone())?;
    let explicit = AdmissibilitySpace::from_vertices(dims.clone(), l1.vertices())?;
    let linf = AdmissibilitySpace::linf(dims.clone())?;
    let a = exact_norm_of_expr(e, &l1, Arithmetic::F64, &opts)?;
    let b = exact_norm_of_expr(e, &explicit, Arithmetic::F64, &opts)?;
    let c = exact_norm_of_expr(e, &linf, Arithmetic::F64, &opts)?;
    let ev = ExprEvaluator::new(e, &dims)?;
    let o = oracle_lower_bound(&ev, &linf, budget, seed)?;
    Ok(PolyhedralReport {
        l1_norm: a.upper,
        l1_vertex_norm: b.upper,
        identical: (a.upper - b.upper).abs() <= 1e-9,
        linf_norm: c.upper,
        linf_oracle: o.lower,
        oracle_consistent: o.lower <= c.upper + 1e-9,
    })
}
