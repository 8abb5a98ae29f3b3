//! Exact norm of a piecewise-linear function by a single linear program.
//!
//! Let `H` be the fan hyperplanes of `f`, the zero sets of its pieces and the
//! hyperplanes `<·, v> = 0` of the ball vertices. On every closed cell of this
//! arrangement `|f|` and each `|<·, v>|` are linear, and the cell is the cone
//! over its extreme rays. Splitting each configuration point along those rays
//! keeps both the objective and every vertex sum unchanged, and merging points
//! that share a ray never hurts either. So the sup over configurations equals
//!
//! ```text
//! max Σ_r μ_r |f(r)|   s.t.   Σ_r μ_r |<r, v>| <= 1  (v in V),   μ >= 0
//! ```
//!
//! over the one-dimensional flats `r` of `H`. The per-cell formulation (one
//! free vector per cell with sign constraints) is kept for cross-checking.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use super::bracket::{Diagnostics, DualConfig, NormBracket};
use super::space::AdmissibilitySpace;
use crate::error::{Error, Result};
use crate::expr::{LatticeExpr, DEFAULT_MAXMIN_CAP};
use crate::lp::{LinearProgram, LpOutcome, Relation, VarKind};
use crate::plfan::{arrangement_rays, canonical_hyperplanes, pl_from_maxmin, Fan, FanOptions, PLFunction};
use crate::scalar::{dot, Arithmetic, Scalar};

/// Rational mode is limited to this many generators.
pub const RATIONAL_MAX_DIM: usize = 4;
/// Variable cap for the per-cell formulation.
pub const DEFAULT_PATTERN_CAP: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMethod {
    #[default]
    Rays,
    Cells,
}

impl NormMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            NormMethod::Rays => "rays",
            NormMethod::Cells => "cells",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions {
    pub method: NormMethod,
    pub fan: FanOptions,
    pub pattern_cap: usize,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            method: NormMethod::Rays,
            fan: FanOptions::default(),
            pattern_cap: DEFAULT_PATTERN_CAP,
        }
    }
}

fn hyperplane_set<S: Scalar>(f: &PLFunction<S>, space: &AdmissibilitySpace) -> Result<Vec<Vec<S>>> {
    let mut hs = f.fan.hyperplanes.clone();
    hs.extend(
        f.pieces
            .iter()
            .filter(|p| p.iter().any(|x| !x.is_zero_tol()))
            .cloned(),
    );
    hs.extend(
        space
            .vertex_pairs()
            .iter()
            .map(|v| v.iter().map(|&x| S::from_f64(x)).collect()),
    );
    canonical_hyperplanes(&hs)
}

fn abs_f<S: Scalar>(f: &PLFunction<S>, p: &[S]) -> S {
    f.eval(p).abs()
}

/// Exact FBL norm of `f` in `space`. The generator sets must agree.
pub fn exact_fbl_norm<S: Scalar>(f: &PLFunction<S>, space: &AdmissibilitySpace, opts: &ExactOptions) -> Result<NormBracket> {
    let d = space.dim();
    if S::EXACT && d > RATIONAL_MAX_DIM {
        return Err(Error::RationalDimension {
            got: d,
            max: RATIONAL_MAX_DIM,
        });
    }
    let f = f.aligned_to(space.generators())?;
    let hs = hyperplane_set(&f, space)?;
    let (points, value, mut diag) = match opts.method {
        NormMethod::Rays => by_rays(&f, space, &hs)?,
        NormMethod::Cells => by_cells(&f, space, &hs, opts)?,
    };
    diag.hyperplanes = Some(hs.len());
    diag.method = opts.method.as_str().into();

    let mut fpoints: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().map(Scalar::to_f64).collect())
        .collect();
    let lower;
    if S::EXACT {
        diag.exact_value = Some(value.to_text());
        diag.exact_points = Some(
            points
                .iter()
                .map(|p| p.iter().map(Scalar::to_text).collect())
                .collect(),
        );
        lower = points
            .iter()
            .fold(S::zero(), |acc, p| acc + abs_f(&f, p))
            .to_f64();
    } else {
        let worst = space
            .vertex_sums(&fpoints)?
            .into_iter()
            .fold(1.0f64, f64::max);
        if worst > 1.0 {
            for p in fpoints.iter_mut() {
                for x in p.iter_mut() {
                    *x /= worst;
                }
            }
        }
        let fl: Vec<Vec<S>> = fpoints
            .iter()
            .map(|p| p.iter().map(|&x| S::from_f64(x)).collect())
            .collect();
        lower = fl.iter().fold(S::zero(), |acc, p| acc + abs_f(&f, p)).to_f64();
    }
    Ok(NormBracket {
        lower,
        certificate: DualConfig { points: fpoints },
        upper: value.to_f64(),
        exact: true,
        arithmetic: S::MODE,
        diagnostics: diag,
    })
}

type Solved<S> = (Vec<Vec<S>>, S, Diagnostics);

fn optimal<S: Scalar>(lp: &LinearProgram<S>) -> Result<crate::lp::LpSolution<S>> {
    match lp.solve()? {
        LpOutcome::Optimal(sol) => Ok(sol),
        other => Err(Error::Internal(format!("norm LP was {}", other.status()))),
    }
}

fn by_rays<S: Scalar>(f: &PLFunction<S>, space: &AdmissibilitySpace, hs: &[Vec<S>]) -> Result<Solved<S>> {
    let d = space.dim();
    let rays = arrangement_rays(hs, d)?;
    let verts: Vec<Vec<S>> = space
        .vertex_pairs()
        .iter()
        .map(|v| v.iter().map(|&x| S::from_f64(x)).collect())
        .collect();
    // rays come in (-u, u) pairs; keep the better direction of each
    let mut dirs: Vec<Vec<S>> = Vec::new();
    let mut gains: Vec<S> = Vec::new();
    for pair in rays.chunks(2) {
        let (neg, pos) = (&pair[0], &pair[1]);
        let (gp, gn) = (abs_f(f, pos), abs_f(f, neg));
        let (dir, gain) = if gn > gp { (neg, gn) } else { (pos, gp) };
        if gain.is_zero_tol() {
            continue;
        }
        dirs.push(dir.clone());
        gains.push(gain);
    }
    let mut diag = Diagnostics {
        cells: Some(f.fan.cells.len()),
        rays: Some(rays.len()),
        lp_vars: Some(dirs.len()),
        lp_rows: Some(verts.len()),
        ..Diagnostics::default()
    };
    if dirs.is_empty() {
        diag.lp_status = Some("trivial".into());
        return Ok((Vec::new(), S::zero(), diag));
    }
    let mut lp = LinearProgram::new(gains, vec![VarKind::NonNeg; dirs.len()]);
    for v in &verts {
        lp.add(dirs.iter().map(|r| dot(r, v).abs()).collect(), Relation::Le, S::one());
    }
    let sol = optimal(&lp)?;
    diag.lp_status = Some("optimal".into());
    diag.pivots = Some(sol.pivots);
    let points = dirs
        .iter()
        .zip(&sol.x)
        .filter(|(_, mu)| **mu > S::zero() && !(!S::EXACT && mu.is_zero_tol()))
        .map(|(r, mu)| r.iter().map(|x| x.clone() * mu.clone()).collect())
        .collect();
    Ok((points, sol.value, diag))
}

fn by_cells<S: Scalar>(
    f: &PLFunction<S>,
    space: &AdmissibilitySpace,
    hs: &[Vec<S>],
    opts: &ExactOptions,
) -> Result<Solved<S>> {
    let d = space.dim();
    let fan = Fan::arrangement(hs, space.generators(), &opts.fan)?;
    let verts: Vec<Vec<S>> = space
        .vertex_pairs()
        .iter()
        .map(|v| v.iter().map(|&x| S::from_f64(x)).collect())
        .collect();
    // (signed piece, vertex signs) per cell with a nonzero piece
    let mut used = Vec::new();
    for (i, c) in fan.cells.iter().enumerate() {
        let piece = f.piece_at(&c.witness);
        let s = dot(piece, &c.witness).sign();
        if s == 0 {
            continue;
        }
        let signed: Vec<S> = piece
            .iter()
            .map(|x| if s > 0 { x.clone() } else { -x.clone() })
            .collect();
        let vsigns: Vec<bool> = verts.iter().map(|v| dot(v, &c.witness) > S::zero()).collect();
        used.push((i, signed, vsigns));
    }
    let nvars = used.len() * d;
    if nvars > opts.pattern_cap {
        return Err(Error::PatternCap {
            count: nvars,
            cap: opts.pattern_cap,
        });
    }
    let mut diag = Diagnostics {
        cells: Some(fan.cells.len()),
        lp_vars: Some(nvars),
        ..Diagnostics::default()
    };
    if used.is_empty() {
        diag.lp_status = Some("trivial".into());
        return Ok((Vec::new(), S::zero(), diag));
    }
    let objective: Vec<S> = used.iter().flat_map(|(_, p, _)| p.iter().cloned()).collect();
    let mut lp = LinearProgram::new(objective, vec![VarKind::Free; nvars]);
    for (k, (i, _, _)) in used.iter().enumerate() {
        for row in fan.cell_rows(*i) {
            let mut full = vec![S::zero(); nvars];
            for (j, x) in row.into_iter().enumerate() {
                full[k * d + j] = -x;
            }
            lp.add(full, Relation::Le, S::zero());
        }
    }
    for (vi, v) in verts.iter().enumerate() {
        let mut full = vec![S::zero(); nvars];
        for (k, (_, _, vs)) in used.iter().enumerate() {
            for j in 0..d {
                full[k * d + j] = if vs[vi] { v[j].clone() } else { -v[j].clone() };
            }
        }
        lp.add(full, Relation::Le, S::one());
    }
    diag.lp_rows = Some(lp.constraints.len());
    let sol = optimal(&lp)?;
    diag.lp_status = Some("optimal".into());
    diag.pivots = Some(sol.pivots);
    let points = (0..used.len())
        .map(|k| sol.x[k * d..(k + 1) * d].to_vec())
        .filter(|p| p.iter().any(|x| !x.is_zero_tol()))
        .collect();
    Ok((points, sol.value, diag))
}

/// Exact norm of an expression over the space's generators in the chosen
/// arithmetic.
pub fn exact_norm_of_expr(
    e: &LatticeExpr,
    space: &AdmissibilitySpace,
    arithmetic: Arithmetic,
    opts: &ExactOptions,
) -> Result<NormBracket> {
    let m = e.to_maxmin_with(space.generators(), DEFAULT_MAXMIN_CAP)?;
    match arithmetic {
        Arithmetic::F64 => {
            let f: PLFunction<f64> = pl_from_maxmin(&m, space.generators(), &opts.fan)?;
            exact_fbl_norm(&f, space, opts)
        }
        Arithmetic::Rational => {
            if space.dim() > RATIONAL_MAX_DIM {
                return Err(Error::RationalDimension {
                    got: space.dim(),
                    max: RATIONAL_MAX_DIM,
                });
            }
            let f: PLFunction<BigRational> = pl_from_maxmin(&m, space.generators(), &opts.fan)?;
            exact_fbl_norm(&f, space, opts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{gids, parse_expr};
    use crate::fblnorm::space::admissible;

    fn norm(text: &str, gens: &[&str], method: NormMethod, mode: Arithmetic) -> NormBracket {
        let space = AdmissibilitySpace::l1(gids(gens)).unwrap();
        let opts = ExactOptions {
            method,
            ..ExactOptions::default()
        };
        exact_norm_of_expr(&parse_expr(text).unwrap(), &space, mode, &opts).unwrap()
    }

    fn all_modes(text: &str, gens: &[&str]) -> Vec<NormBracket> {
        let mut out = Vec::new();
        for method in [NormMethod::Rays, NormMethod::Cells] {
            for mode in [Arithmetic::F64, Arithmetic::Rational] {
                out.push(norm(text, gens, method, mode));
            }
        }
        out
    }

    #[test]
    fn spec_examples() {
        for (text, gens, want) in [
            ("d(a)", &["a"][..], 1.0),
            ("d(a) - 2*d(b) + 3*d(c)", &["a", "b", "c"][..], 6.0),
            ("d(a) v d(b)", &["a", "b"][..], 2.0),
            ("|d(a)| + |d(b)|", &["a", "b"][..], 2.0),
        ] {
            for b in all_modes(text, gens) {
                assert!((b.upper - want).abs() < 1e-9, "{text}: {b:?}");
                assert!((b.lower - want).abs() < 1e-9, "{text}: {b:?}");
                let space = AdmissibilitySpace::l1(gids(gens)).unwrap();
                assert!(admissible(&b.certificate.points, &space).unwrap().admissible);
            }
        }
    }

    #[test]
    fn rational_value_is_exact() {
        let b = norm("d(a) v d(b)", &["a", "b"], NormMethod::Rays, Arithmetic::Rational);
        assert_eq!(b.diagnostics.exact_value.as_deref(), Some("2"));
        assert_eq!(b.arithmetic, Arithmetic::Rational);
    }

    #[test]
    fn methods_agree_on_mixed_expressions() {
        for text in [
            "(d(a) ^ d(b)) + 0.5*|d(a) - d(b)|",
            "(d(a) v -2*d(b)) ^ (d(b) + 0.25*d(a))",
            "|d(a) + d(b)| - |d(a) - d(b)|",
        ] {
            let bs = all_modes(text, &["a", "b"]);
            for b in &bs[1..] {
                assert!((b.upper - bs[0].upper).abs() < 1e-9, "{text}: {bs:?}");
            }
        }
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let b = norm("d(a) - d(a)", &["a"], NormMethod::Rays, Arithmetic::F64);
        assert_eq!(b.upper, 0.0);
        assert!(b.certificate.points.is_empty());
    }

    #[test]
    fn cube_ball_is_a_different_space() {
        let space = AdmissibilitySpace::linf(gids(&["a", "b"])).unwrap();
        let e = parse_expr("d(a) + d(b)").unwrap();
        let f = exact_norm_of_expr(&e, &space, Arithmetic::F64, &ExactOptions::default()).unwrap();
        let r = exact_norm_of_expr(&e, &space, Arithmetic::Rational, &ExactOptions::default()).unwrap();
        assert!(f.upper > 0.0 && f.upper <= 2.0 + 1e-9);
        assert!((f.upper - r.upper).abs() < 1e-12);
        assert!(admissible(&f.certificate.points, &space).unwrap().admissible);
    }

    #[test]
    fn rational_dimension_cap() {
        let space = AdmissibilitySpace::l1(gids(&["a", "b", "c", "d", "e"])).unwrap();
        let e = parse_expr("d(a)").unwrap();
        assert!(matches!(
            exact_norm_of_expr(&e, &space, Arithmetic::Rational, &ExactOptions::default()),
            Err(Error::RationalDimension { got: 5, max: 4 })
        ));
    }
}
