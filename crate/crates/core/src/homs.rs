//! Finite-rank lattice homomorphisms given by weighted point evaluations, and
//! the truncated quotient map onto `c_0` built from finite subsets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, GeneratorId, LatticeExpr};
use crate::scalar::Scalar;

/// `e ↦ (c_j · e(x_j*))_j` with `c_j >= 0` and every `x_j*` in the cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalHom {
    generators: Vec<GeneratorId>,
    targets: Vec<(f64, Vec<f64>)>,
    codomain: String,
}

impl EvalHom {
    pub fn new(generators: Vec<GeneratorId>, targets: Vec<(f64, Vec<f64>)>, codomain: impl Into<String>) -> Result<Self> {
        let d = generators.len();
        for (j, (c, p)) in targets.iter().enumerate() {
            if !(c.is_finite() && *c >= 0.0) {
                return Err(Error::InvalidHom(format!("weight {c} of target {j} is not nonnegative")));
            }
            if p.len() != d {
                return Err(Error::InvalidHom(format!("target {j} has width {} for {d} generators", p.len())));
            }
            if p.iter().any(|x| !(x.abs() <= 1.0)) {
                return Err(Error::InvalidHom(format!("target {j} leaves the cube")));
            }
        }
        Ok(EvalHom {
            generators,
            targets,
            codomain: codomain.into(),
        })
    }

    pub fn generators(&self) -> &[GeneratorId] {
        &self.generators
    }

    pub fn targets(&self) -> &[(f64, Vec<f64>)] {
        &self.targets
    }

    pub fn codomain(&self) -> &str {
        &self.codomain
    }

    pub fn rank(&self) -> usize {
        self.targets.len()
    }

    fn compile(&self, e: &LatticeExpr) -> Result<CompiledExpr> {
        if let Some(g) = e.support().iter().find(|g| !self.generators.contains(g)) {
            return Err(Error::InvalidHom(format!("generator {g} is outside the domain")));
        }
        e.compile(&self.generators)
    }

    pub fn apply(&self, e: &LatticeExpr) -> Result<Vec<f64>> {
        let c = self.compile(e)?;
        Ok(self.targets.iter().map(|(w, p)| w * c.eval(p)).collect())
    }

    /// Same as [`EvalHom::apply`] in the given arithmetic (exact for rationals).
    pub fn apply_scalar<S: Scalar>(&self, e: &LatticeExpr) -> Result<Vec<S>> {
        let c = self.compile(e)?;
        Ok(self
            .targets
            .iter()
            .map(|(w, p)| {
                let p: Vec<S> = p.iter().map(|&x| S::from_f64(x)).collect();
                S::from_f64(*w) * c.eval_scalar(&p)
            })
            .collect())
    }
}

pub fn apply_hom(h: &EvalHom, e: &LatticeExpr) -> Result<Vec<f64>> {
    h.apply(e)
}

pub const PHI_MAX_N: usize = 12;

/// Truncation of the quotient map at level `N`: generators are the nonempty
/// subsets `A` of `{1..N}` and component `n` evaluates at `(χ_A({n}))_A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiInstance {
    pub n: usize,
    /// Ordered by size, then lexicographically.
    pub subsets: Vec<Vec<usize>>,
    pub generators: Vec<GeneratorId>,
    pub chi_points: Vec<Vec<f64>>,
    pub hom: EvalHom,
}

/// Generator name of a subset, e.g. `{1, 3}` ↦ `s1_3`.
pub fn subset_generator(subset: &[usize]) -> GeneratorId {
    let name = format!(
        "s{}",
        subset.iter().map(usize::to_string).collect::<Vec<_>>().join("_")
    );
    GeneratorId::new(name).expect("valid generator name")
}

/// `χ_A(B) = 1` iff `B ⊆ A`.
pub fn chi(a: &[usize], b: &[usize]) -> bool {
    b.iter().all(|x| a.contains(x))
}

pub fn build_phi(n: usize) -> Result<PhiInstance> {
    if !(1..=PHI_MAX_N).contains(&n) {
        return Err(Error::OutOfRange(format!("N = {n} must lie in 1..={PHI_MAX_N}")));
    }
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (1..=n).filter(|k| mask & (1 << (k - 1)) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let generators: Vec<GeneratorId> = subsets.iter().map(|s| subset_generator(s)).collect();
    let chi_points: Vec<Vec<f64>> = (1..=n)
        .map(|m| {
            subsets
                .iter()
                .map(|a| if chi(a, &[m]) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let hom = EvalHom::new(
        generators.clone(),
        chi_points.iter().map(|p| (1.0, p.clone())).collect(),
        format!("c0-truncation(N={n})"),
    )?;
    Ok(PhiInstance {
        n,
        subsets,
        generators,
        chi_points,
        hom,
    })
}

impl PhiInstance {
    /// Lift `δ_{{n}}` of the `n`-th basis vector (1-based).
    pub fn lift(&self, n: usize) -> Result<LatticeExpr> {
        if !(1..=self.n).contains(&n) {
            return Err(Error::OutOfRange(format!("index {n} outside 1..={}", self.n)));
        }
        Ok(LatticeExpr::gen(subset_generator(&[n])))
    }

    /// `δ_A` for a subset `A`.
    pub fn delta(&self, subset: &[usize]) -> Result<LatticeExpr> {
        let mut s = subset.to_vec();
        s.sort();
        s.dedup();
        if !self.subsets.contains(&s) {
            return Err(Error::OutOfRange(format!("{subset:?} is not a nonempty subset of 1..={}", self.n)));
        }
        Ok(LatticeExpr::gen(subset_generator(&s)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    Join,
    Meet,
    Sum,
    Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawFailure {
    pub pair: usize,
    pub law: Law,
    pub component: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomLawReport {
    pub pairs: usize,
    pub checks: usize,
    pub max_deviation: f64,
    pub failures: Vec<LawFailure>,
    pub pass: bool,
}

pub const HOM_LAW_TOL: f64 = 1e-12;
/// Scalars used for the homogeneity law.
const LAW_SCALARS: [f64; 3] = [-1.5, 0.5, 2.0];

/// Checks that `h` commutes with `∨`, `∧`, `+` and scalar multiples on each pair.
pub fn check_hom_laws(h: &EvalHom, pairs: &[(LatticeExpr, LatticeExpr)]) -> Result<HomLawReport> {
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut max_dev: f64 = 0.0;
    for (idx, (e, g)) in pairs.iter().enumerate() {
        let he = h.apply(e)?;
        let hg = h.apply(g)?;
        let mut cases: Vec<(Law, Vec<f64>, Vec<f64>)> = vec![
            (
                Law::Join,
                h.apply(&LatticeExpr::join(e.clone(), g.clone()))?,
                he.iter().zip(&hg).map(|(a, b)| a.max(*b)).collect(),
            ),
            (
                Law::Meet,
                h.apply(&LatticeExpr::meet(e.clone(), g.clone()))?,
                he.iter().zip(&hg).map(|(a, b)| a.min(*b)).collect(),
            ),
            (
                Law::Sum,
                h.apply(&LatticeExpr::sum(e.clone(), g.clone()))?,
                he.iter().zip(&hg).map(|(a, b)| a + b).collect(),
            ),
        ];
        for lambda in LAW_SCALARS {
            cases.push((
                Law::Scale,
                h.apply(&LatticeExpr::scale(lambda, e.clone()))?,
                he.iter().map(|a| lambda * a).collect(),
            ));
        }
        for (law, got, want) in cases {
            for (component, (x, y)) in got.iter().zip(&want).enumerate() {
                checks += 1;
                let dev = (x - y).abs();
                max_dev = max_dev.max(dev);
                if !(dev <= HOM_LAW_TOL) {
                    failures.push(LawFailure {
                        pair: idx,
                        law,
                        component,
                        deviation: dev,
                    });
                }
            }
        }
    }
    Ok(HomLawReport {
        pairs: pairs.len(),
        checks,
        max_deviation: max_dev,
        pass: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{gids, parse_expr};
    use num_rational::BigRational;

    #[test]
    fn small_instances() {
        let p = build_phi(1).unwrap();
        assert_eq!(p.subsets, vec![vec![1]]);
        assert_eq!(p.chi_points, vec![vec![1.0]]);

        let p = build_phi(2).unwrap();
        assert_eq!(p.subsets, vec![vec![1], vec![2], vec![1, 2]]);
        assert_eq!(p.chi_points, vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]);
        assert_eq!(p.generators[2].as_str(), "s1_2");

        assert_eq!(build_phi(3).unwrap().generators.len(), 7);
        assert!(build_phi(0).is_err());
        assert!(build_phi(13).is_err());
    }

    #[test]
    fn lifts_map_to_basis_vectors() {
        let p = build_phi(4).unwrap();
        for n in 1..=4 {
            let img: Vec<BigRational> = p.hom.apply_scalar(&p.lift(n).unwrap()).unwrap();
            for (m, x) in img.iter().enumerate() {
                let want = if m + 1 == n { 1 } else { 0 };
                assert_eq!(*x, BigRational::from_integer(want.into()));
            }
        }
        let pair = p.hom.apply(&p.delta(&[1, 2]).unwrap()).unwrap();
        assert_eq!(pair, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn absolute_value_is_componentwise() {
        let p = build_phi(3).unwrap();
        let e = parse_expr("d(s1) - 2*d(s2_3) + 0.5*d(s1_2_3)").unwrap();
        let abs = p.hom.apply(&LatticeExpr::abs(e.clone())).unwrap();
        let plain = p.hom.apply(&e).unwrap();
        assert_eq!(abs, plain.iter().map(|x| x.abs()).collect::<Vec<_>>());
    }

    #[test]
    fn law_checks() {
        let p = build_phi(2).unwrap();
        let pairs = vec![(p.lift(1).unwrap(), p.lift(2).unwrap())];
        assert!(check_hom_laws(&p.hom, &pairs).unwrap().pass);
        let e = parse_expr("d(s1) ^ d(s1_2)").unwrap();
        let r = check_hom_laws(&p.hom, &[(e.clone(), e)]).unwrap();
        assert!(r.pass);
        assert_eq!(r.checks, 2 * 6);
    }

    #[test]
    fn invalid_homs_are_rejected() {
        let g = gids(&["a"]);
        assert!(EvalHom::new(g.clone(), vec![(-1.0, vec![0.5])], "R").is_err());
        assert!(EvalHom::new(g.clone(), vec![(1.0, vec![1.5])], "R").is_err());
        assert!(EvalHom::new(g.clone(), vec![(1.0, vec![0.5, 0.5])], "R").is_err());
        let h = EvalHom::new(g, vec![(2.0, vec![0.5])], "R").unwrap();
        assert_eq!(h.apply(&parse_expr("d(a)").unwrap()).unwrap(), vec![1.0]);
        assert!(h.apply(&parse_expr("d(b)").unwrap()).is_err());
    }
}
