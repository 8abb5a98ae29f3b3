//! Replayable lower-bound certificates: an admissible dual configuration, the
//! function it was evaluated on, and the value it certifies.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{GeneratorId, LatticeExpr};
use crate::fblnorm::{admissible, config_value, AdmissibilitySpace, Evaluator, FnEvaluator, NormBracket};
use crate::plfan::{PLFunction, PLFunctionJson};
use crate::scalar::{Arithmetic, Scalar};

pub const CERT_SCHEMA: u32 = 1;
/// Slack allowed between the certified value and the claimed norm.
pub const CLAIM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertFunction {
    Expr { expr: LatticeExpr },
    /// `expr · |δ_generator|`.
    AbsProduct { expr: LatticeExpr, generator: GeneratorId },
    Pl { pl: PLFunctionJson },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertMode {
    /// `value` is a lower bound for the norm.
    Lower,
    /// `value` attains the claimed exact norm.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub schema: u32,
    pub space: AdmissibilitySpace,
    pub function: CertFunction,
    pub points: Vec<Vec<f64>>,
    pub value: f64,
    pub claimed_norm: f64,
    pub mode: CertMode,
    pub arithmetic: Arithmetic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_points: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_value: Option<String>,
}

fn index_of(dims: &[GeneratorId], g: &GeneratorId) -> Result<usize> {
    dims.iter()
        .position(|h| h == g)
        .ok_or_else(|| Error::MissingCoordinate(g.to_string()))
}

impl CertFunction {
    /// Floating evaluator over the space's generator order.
    pub fn evaluator(&self, dims: &[GeneratorId]) -> Result<Box<dyn Evaluator>> {
        let dims = dims.to_vec();
        Ok(match self {
            CertFunction::Expr { expr } => {
                let c = expr.compile(&dims)?;
                Box::new(FnEvaluator::new(dims, 1, move |p: &[f64]| c.eval(p)))
            }
            CertFunction::AbsProduct { expr, generator } => {
                let c = expr.compile(&dims)?;
                let a = index_of(&dims, generator)?;
                Box::new(FnEvaluator::new(dims, 2, move |p: &[f64]| c.eval(p) * p[a].abs()))
            }
            CertFunction::Pl { pl } => {
                let f = PLFunction::from_json_repr(pl)?.aligned_to(&dims)?;
                Box::new(f)
            }
        })
    }

    /// Exact `Σ |f(x_i)|` (expressions only).
    fn exact_sum(&self, dims: &[GeneratorId], points: &[Vec<BigRational>]) -> Result<BigRational> {
        let c = match self {
            CertFunction::Expr { expr } => expr.compile(dims)?,
            CertFunction::AbsProduct { expr, .. } => expr.compile(dims)?,
            CertFunction::Pl { .. } => {
                return Err(Error::Unsupported("rational replay of PL certificates".into()));
            }
        };
        let weight = match self {
            CertFunction::AbsProduct { generator, .. } => Some(index_of(dims, generator)?),
            _ => None,
        };
        Ok(points.iter().fold(<BigRational as Scalar>::zero(), |acc, p| {
            let v = c.eval_scalar(p);
            let v = match weight {
                Some(a) => v * p[a].abs(),
                None => v,
            };
            acc + v.abs()
        }))
    }
}

impl Certificate {
    /// Lower-bound certificate; `value` is recomputed from the points.
    pub fn lower(space: AdmissibilitySpace, function: CertFunction, points: Vec<Vec<f64>>, claimed_norm: f64) -> Result<Self> {
        let f = function.evaluator(space.generators())?;
        let value = config_value(f.as_ref(), &points);
        Ok(Certificate {
            schema: CERT_SCHEMA,
            space,
            function,
            points,
            value,
            claimed_norm,
            mode: CertMode::Lower,
            arithmetic: Arithmetic::F64,
            exact_points: None,
            exact_value: None,
        })
    }

    /// Certificate for a norm bracket; exact brackets claim their upper bound.
    pub fn from_bracket(space: AdmissibilitySpace, function: CertFunction, b: &NormBracket) -> Result<Self> {
        let claimed = if b.exact { b.upper } else { b.lower };
        let mut c = Self::lower(space, function, b.certificate.points.clone(), claimed)?;
        if b.exact {
            c.mode = CertMode::Exact;
        }
        if b.arithmetic == Arithmetic::Rational {
            let texts = b
                .diagnostics
                .exact_points
                .clone()
                .ok_or_else(|| Error::Internal("rational bracket without exact points".into()))?;
            let pts = parse_points(&texts)?;
            let exact = c.function.exact_sum(c.space.generators(), &pts)?;
            c.arithmetic = Arithmetic::Rational;
            c.value = exact.to_f64();
            c.exact_value = Some(exact.to_text());
            c.exact_points = Some(texts);
        }
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s)?;
        match v.get("schema").and_then(serde_json::Value::as_u64) {
            Some(n) if n == u64::from(CERT_SCHEMA) => {}
            other => {
                return Err(Error::Unsupported(format!("certificate schema {other:?}, expected {CERT_SCHEMA}")));
            }
        }
        Ok(serde_json::from_value(v)?)
    }
}

fn parse_points(texts: &[Vec<String>]) -> Result<Vec<Vec<BigRational>>> {
    texts
        .iter()
        .map(|p| {
            p.iter()
                .map(|s| BigRational::from_text(s).ok_or_else(|| Error::Unsupported(format!("bad rational {s:?}"))))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub arithmetic: Arithmetic,
    pub mode: CertMode,
    pub admissible: bool,
    pub worst_sum: f64,
    pub stored_value: f64,
    pub recomputed_value: f64,
    /// Recomputed value has the same bits (same text in rational mode).
    pub bit_identical: bool,
    /// `value >= claimed_norm - 1e-9`.
    pub claim_consistent: bool,
    pub pass: bool,
}

/// Replays a certificate: admissibility, value recomputation and the claim.
pub fn replay(c: &Certificate) -> Result<ReplayReport> {
    let dims = c.space.generators();
    let f = c.function.evaluator(dims)?;
    let (admissible_ok, worst_sum, recomputed, identical) = match c.arithmetic {
        Arithmetic::F64 => {
            let a = admissible(&c.points, &c.space)?;
            let v = config_value(f.as_ref(), &c.points);
            (a.admissible, a.worst_sum, v, v.to_bits() == c.value.to_bits())
        }
        Arithmetic::Rational => {
            let texts = c
                .exact_points
                .as_ref()
                .ok_or_else(|| Error::Unsupported("rational certificate without exact points".into()))?;
            let pts = parse_points(texts)?;
            let a = admissible(&pts, &c.space)?;
            let exact = c.function.exact_sum(dims, &pts)?;
            let same = c.exact_value.as_deref() == Some(exact.to_text().as_str());
            let v = exact.to_f64();
            (a.admissible, a.worst_sum, v, same && v.to_bits() == c.value.to_bits())
        }
    };
    let claim_consistent = recomputed >= c.claimed_norm - CLAIM_TOL;
    Ok(ReplayReport {
        arithmetic: c.arithmetic,
        mode: c.mode,
        admissible: admissible_ok,
        worst_sum,
        stored_value: c.value,
        recomputed_value: recomputed,
        bit_identical: identical,
        claim_consistent,
        pass: admissible_ok && identical && claim_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{gid, gids, parse_expr};
    use crate::fblnorm::{exact_norm_of_expr, ExactOptions};

    fn roundtrip(c: &Certificate) -> Certificate {
        Certificate::from_json(&c.to_json()).unwrap()
    }

    #[test]
    fn exact_certificates_replay_in_both_modes() {
        let space = AdmissibilitySpace::l1(gids(&["a", "b"])).unwrap();
        let e = parse_expr("d(a) v d(b)").unwrap();
        for mode in [Arithmetic::F64, Arithmetic::Rational] {
            let b = exact_norm_of_expr(&e, &space, mode, &ExactOptions::default()).unwrap();
            let c = Certificate::from_bracket(space.clone(), CertFunction::Expr { expr: e.clone() }, &b).unwrap();
            assert_eq!(c.mode, CertMode::Exact);
            assert_eq!(c.arithmetic, mode);
            let r = replay(&roundtrip(&c)).unwrap();
            assert!(r.pass, "{r:?}");
            assert_eq!(r.recomputed_value, 2.0);
        }
    }

    #[test]
    fn tampered_certificates_fail() {
        let space = AdmissibilitySpace::l1(gids(&["a"])).unwrap();
        let f = CertFunction::Expr { expr: parse_expr("d(a)").unwrap() };
        let c = Certificate::lower(space, f, vec![vec![1.0]], 1.0).unwrap();
        assert!(replay(&c).unwrap().pass);

        let mut bad = c.clone();
        bad.points = vec![vec![0.75], vec![0.75]];
        let r = replay(&bad).unwrap();
        assert!(!r.admissible && !r.pass);

        let mut bad = c.clone();
        bad.value = f64::from_bits(c.value.to_bits() + 1);
        assert!(!replay(&bad).unwrap().bit_identical);

        let mut bad = c.clone();
        bad.claimed_norm = 1.5;
        assert!(!replay(&bad).unwrap().claim_consistent);

        let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        v["schema"] = 2.into();
        assert!(Certificate::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn abs_product_and_pl_certificates() {
        let space = AdmissibilitySpace::l1(gids(&["a", "b"])).unwrap();
        let f = CertFunction::AbsProduct {
            expr: parse_expr("d(b) - d(a)").unwrap(),
            generator: gid("a"),
        };
        let c = Certificate::lower(space.clone(), f, vec![vec![1.0, -1.0]], 2.0).unwrap();
        assert_eq!(c.value, 2.0);
        assert!(replay(&roundtrip(&c)).unwrap().pass);

        let e = parse_expr("|d(a)| ^ d(b)").unwrap();
        let m = e.to_maxmin_with(space.generators(), 100).unwrap();
        let pl: PLFunction<f64> =
            crate::plfan::pl_from_maxmin(&m, space.generators(), &Default::default()).unwrap();
        let b = crate::fblnorm::exact_fbl_norm(&pl, &space, &ExactOptions::default()).unwrap();
        let c = Certificate::from_bracket(space, CertFunction::Pl { pl: pl.to_json_repr() }, &b).unwrap();
        let r = replay(&roundtrip(&c)).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
