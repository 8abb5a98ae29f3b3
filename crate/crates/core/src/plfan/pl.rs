use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fan::{canonical_hyperplanes, parse_sign_string, sign_string, Cone, Fan, FanOptions};
use crate::error::{Error, Result};
use crate::expr::{GeneratorId, LinearFunctional, MaxMinForm};
use crate::lp::{LinearProgram, LpOutcome, Relation, VarKind};
use crate::scalar::{dot, Scalar};

/// Positively homogeneous piecewise-linear function: one linear piece per
/// cell of a central fan.
#[derive(Debug, Clone)]
pub struct PLFunction<S> {
    pub fan: Fan<S>,
    pub pieces: Vec<Vec<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlOp {
    Sum,
    Join,
    Meet,
}

fn coeffs_close<S: Scalar>(a: &[S], b: &[S]) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        let diff = (x.clone() - y.clone()).abs();
        if S::EXACT {
            diff == S::zero()
        } else {
            diff.to_f64() <= 1e-9 * (1.0 + x.to_f64().abs().max(y.to_f64().abs()))
        }
    })
}

impl<S: Scalar> PLFunction<S> {
    pub fn dims(&self) -> &[GeneratorId] {
        &self.fan.dims
    }

    pub fn from_parts(fan: Fan<S>, pieces: Vec<Vec<S>>) -> Result<Self> {
        if pieces.len() != fan.cells.len() {
            return Err(Error::Dimension(format!(
                "{} pieces for {} cells",
                pieces.len(),
                fan.cells.len()
            )));
        }
        if pieces.iter().any(|p| p.len() != fan.dims.len()) {
            return Err(Error::Dimension("piece width".into()));
        }
        Ok(PLFunction { fan, pieces })
    }

    /// The linear function `coeffs` on the trivial one-cell fan.
    pub fn linear(dims: &[GeneratorId], coeffs: Vec<S>) -> Result<Self> {
        let fan = Fan::arrangement(&[], dims, &FanOptions::default())?;
        Self::from_parts(fan, vec![coeffs])
    }

    /// Value at a dense point ordered like [`PLFunction::dims`].
    pub fn eval(&self, p: &[S]) -> S {
        let i = self.fan.locate_nearest(p);
        dot(&self.pieces[i], p)
    }

    pub fn evaluate(&self, p: &BTreeMap<GeneratorId, f64>) -> Result<f64> {
        let x: Vec<S> = self
            .dims()
            .iter()
            .map(|g| {
                p.get(g)
                    .map(|&v| S::from_f64(v))
                    .ok_or_else(|| Error::MissingCoordinate(g.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(self.eval(&x).to_f64())
    }

    /// Piece on the cell containing `p`.
    pub fn piece_at(&self, p: &[S]) -> &[S] {
        &self.pieces[self.fan.locate_nearest(p)]
    }

    /// Maximum of `|f|` over `[-1,1]^dims`, from two LPs per cell.
    pub fn sup_norm_on_cube(&self) -> Result<S> {
        let d = self.dims().len();
        let per_cell: Vec<Result<S>> = (0..self.fan.cells.len())
            .into_par_iter()
            .map(|i| {
                let mut best = S::zero();
                for sign in [S::one(), -S::one()] {
                    let obj: Vec<S> = self.pieces[i]
                        .iter()
                        .map(|c| c.clone() * sign.clone())
                        .collect();
                    let mut lp = LinearProgram::new(obj, vec![VarKind::Free; d]);
                    for row in self.fan.cell_rows(i) {
                        lp.add(row.iter().map(|x| -x.clone()).collect(), Relation::Le, S::zero());
                    }
                    for k in 0..d {
                        let mut row = vec![S::zero(); d];
                        row[k] = S::one();
                        lp.add(row.clone(), Relation::Le, S::one());
                        row[k] = -S::one();
                        lp.add(row, Relation::Le, S::one());
                    }
                    match lp.solve()? {
                        LpOutcome::Optimal(sol) => best = S::max_of(best, sol.value),
                        other => {
                            return Err(Error::Internal(format!(
                                "sup-norm LP on cell {} was {}",
                                self.fan.cells[i].sign_string(),
                                other.status()
                            )))
                        }
                    }
                }
                Ok(best)
            })
            .collect();
        let mut best = S::zero();
        for r in per_cell {
            best = S::max_of(best, r?);
        }
        Ok(best)
    }

    /// Rebuilds `self` on the arrangement of `extra` together with its own
    /// hyperplanes. Pieces are carried over by locating each new witness.
    pub fn refine_with(&self, extra: &[Vec<S>], opts: &FanOptions) -> Result<Self> {
        let mut hs = self.fan.hyperplanes.clone();
        hs.extend(extra.iter().filter(|h| h.iter().any(|x| !x.is_zero_tol())).cloned());
        let hs = canonical_hyperplanes(&hs)?;
        if hs.len() == self.fan.hyperplanes.len() {
            return Ok(self.clone());
        }
        let fan = Fan::arrangement(&hs, self.dims(), opts)?;
        let pieces = fan
            .cells
            .iter()
            .map(|c| self.piece_at(&c.witness).to_vec())
            .collect();
        Ok(PLFunction { fan, pieces })
    }

    /// Adds every nonzero piece's zero set as a global hyperplane, so that
    /// `f` has constant sign on each output cell.
    pub fn refine_by_zero_set(&self, opts: &FanOptions) -> Result<Self> {
        let extra: Vec<Vec<S>> = self.pieces.clone();
        self.refine_with(&extra, opts)
    }

    /// Sign of `f` on cell `i` (evaluated at the witness).
    pub fn cell_sign(&self, i: usize) -> i8 {
        dot(&self.pieces[i], &self.fan.cells[i].witness).sign()
    }

    /// Reorders coordinates to `dims` (must be a permutation of ours).
    pub fn aligned_to(&self, dims: &[GeneratorId]) -> Result<Self> {
        if dims == self.dims() {
            return Ok(self.clone());
        }
        let perm: Vec<usize> = dims
            .iter()
            .map(|g| {
                self.dims()
                    .iter()
                    .position(|h| h == g)
                    .ok_or_else(|| Error::Dimension(format!("generator {g} not present")))
            })
            .collect::<Result<_>>()?;
        if perm.len() != self.dims().len() {
            return Err(Error::Dimension("generator sets differ".into()));
        }
        let permute = |v: &Vec<S>| perm.iter().map(|&j| v[j].clone()).collect::<Vec<S>>();
        let hyperplanes = self.fan.hyperplanes.iter().map(permute).collect();
        let cells = self
            .fan
            .cells
            .iter()
            .map(|c| Cone {
                signs: c.signs.clone(),
                witness: permute(&c.witness),
            })
            .collect();
        let fan = Fan::from_parts(dims.to_vec(), hyperplanes, cells)?;
        Ok(PLFunction {
            fan,
            pieces: self.pieces.iter().map(permute).collect(),
        })
    }

    /// Pointwise `f op g` on the common refinement (plus the pairwise
    /// switching hyperplanes for joins and meets).
    pub fn combine(&self, other: &Self, op: PlOp, opts: &FanOptions) -> Result<Self> {
        let g = other.aligned_to(self.dims())?;
        let mut extra = g.fan.hyperplanes.clone();
        if op != PlOp::Sum {
            for p in &self.pieces {
                for q in &g.pieces {
                    extra.push(p.iter().zip(q).map(|(a, b)| a.clone() - b.clone()).collect());
                }
            }
        }
        let base = self.refine_with(&extra, opts)?;
        let pieces = base
            .fan
            .cells
            .iter()
            .zip(&base.pieces)
            .map(|(c, p)| {
                let q = g.piece_at(&c.witness);
                match op {
                    PlOp::Sum => p.iter().zip(q).map(|(a, b)| a.clone() + b.clone()).collect(),
                    PlOp::Join | PlOp::Meet => {
                        let vp = dot(p, &c.witness);
                        let vq = dot(q, &c.witness);
                        let take_p = if op == PlOp::Join { vp >= vq } else { vp <= vq };
                        if take_p {
                            p.clone()
                        } else {
                            q.to_vec()
                        }
                    }
                }
            })
            .collect();
        Ok(PLFunction {
            fan: base.fan,
            pieces,
        })
    }

    pub fn scale(&self, c: S) -> Self {
        PLFunction {
            fan: self.fan.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|x| x.clone() * c.clone()).collect())
                .collect(),
        }
    }

    /// Equality as functions: pieces agree on every cell of the common refinement.
    pub fn equals(&self, other: &Self, opts: &FanOptions) -> Result<bool> {
        let mut a: Vec<&GeneratorId> = self.dims().iter().collect();
        let mut b: Vec<&GeneratorId> = other.dims().iter().collect();
        a.sort();
        b.sort();
        if a != b {
            return Ok(false);
        }
        let g = other.aligned_to(self.dims())?;
        let common = self.refine_with(&g.fan.hyperplanes, opts)?;
        Ok(common
            .fan
            .cells
            .iter()
            .zip(&common.pieces)
            .all(|(c, p)| coeffs_close(p, g.piece_at(&c.witness))))
    }
}

/// Builds the PL function of a max-min form over `dims`. The fan uses every
/// pairwise difference of distinct functionals, so the active selection is
/// constant on each cell.
pub fn pl_from_maxmin<S: Scalar>(m: &MaxMinForm, dims: &[GeneratorId], opts: &FanOptions) -> Result<PLFunction<S>> {
    for f in m.groups.iter().flatten() {
        if let Some(g) = f.coeffs.keys().find(|g| !dims.contains(g)) {
            return Err(Error::Dimension(format!("functional uses {g} outside the dimension list")));
        }
    }
    if m.groups.is_empty() || m.groups.iter().any(Vec::is_empty) {
        return Err(Error::Internal("empty max-min group".into()));
    }
    let groups: Vec<Vec<Vec<S>>> = m
        .groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|f| f.dense(dims).iter().map(|&x| S::from_f64(x)).collect())
                .collect()
        })
        .collect();
    let mut distinct: Vec<Vec<S>> = Vec::new();
    for f in groups.iter().flatten() {
        if !distinct.contains(f) {
            distinct.push(f.clone());
        }
    }
    let mut hs = Vec::new();
    for i in 0..distinct.len() {
        for j in i + 1..distinct.len() {
            let diff: Vec<S> = distinct[i]
                .iter()
                .zip(&distinct[j])
                .map(|(a, b)| a.clone() - b.clone())
                .collect();
            if diff.iter().any(|x| !x.is_zero_tol()) {
                hs.push(diff);
            }
        }
    }
    let fan = Fan::arrangement(&hs, dims, opts)?;
    let pieces = fan
        .cells
        .iter()
        .map(|c| select_piece(&groups, &c.witness))
        .collect();
    Ok(PLFunction { fan, pieces })
}

fn select_piece<S: Scalar>(groups: &[Vec<Vec<S>>], w: &[S]) -> Vec<S> {
    let mut best: Option<(S, &Vec<S>)> = None;
    for g in groups {
        let mut low: Option<(S, &Vec<S>)> = None;
        for f in g {
            let v = dot(f, w);
            if low.as_ref().map_or(true, |(lv, _)| v < *lv) {
                low = Some((v, f));
            }
        }
        let low = low.expect("nonempty group");
        if best.as_ref().map_or(true, |(bv, _)| low.0 > *bv) {
            best = Some(low);
        }
    }
    best.expect("nonempty form").1.clone()
}

/// Serialized form of a floating PL function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLFunctionJson {
    pub generators: Vec<GeneratorId>,
    pub hyperplanes: Vec<LinearFunctional>,
    pub cells: Vec<String>,
    pub pieces: Vec<LinearFunctional>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<Vec<f64>>>,
}

impl PLFunction<f64> {
    pub fn to_json_repr(&self) -> PLFunctionJson {
        let dims = self.dims();
        PLFunctionJson {
            generators: dims.to_vec(),
            hyperplanes: self
                .fan
                .hyperplanes
                .iter()
                .map(|h| LinearFunctional::from_dense(dims, h))
                .collect(),
            cells: self.fan.cells.iter().map(|c| sign_string(&c.signs)).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| LinearFunctional::from_dense(dims, p))
                .collect(),
            witnesses: Some(self.fan.cells.iter().map(|c| c.witness.clone()).collect()),
        }
    }

    /// Loads a stored function. Missing witnesses are recomputed by LP.
    pub fn from_json_repr(j: &PLFunctionJson) -> Result<Self> {
        let dims = &j.generators;
        let hyperplanes: Vec<Vec<f64>> = j.hyperplanes.iter().map(|h| h.dense(dims)).collect();
        if j.cells.len() != j.pieces.len() {
            return Err(Error::Dimension("cells and pieces differ in length".into()));
        }
        let signs: Vec<Vec<bool>> = j
            .cells
            .iter()
            .map(|s| parse_sign_string(s).ok_or_else(|| Error::Unsupported(format!("bad sign string {s:?}"))))
            .collect::<Result<_>>()?;
        let witnesses = match &j.witnesses {
            Some(w) => w.clone(),
            None => {
                let fan = Fan::arrangement(&hyperplanes, dims, &FanOptions::default())?;
                signs
                    .iter()
                    .map(|s| {
                        fan.cell_index(s)
                            .map(|i| fan.cells[i].witness.clone())
                            .ok_or_else(|| Error::Unsupported(format!("empty cell {}", sign_string(s))))
                    })
                    .collect::<Result<_>>()?
            }
        };
        if witnesses.len() != signs.len() {
            return Err(Error::Dimension("witness count".into()));
        }
        let cells = signs
            .into_iter()
            .zip(witnesses)
            .map(|(signs, witness)| Cone { signs, witness })
            .collect();
        let fan = Fan::from_parts(dims.clone(), hyperplanes, cells)?;
        let pieces = j.pieces.iter().map(|p| p.dense(dims)).collect();
        PLFunction::from_parts(fan, pieces)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_repr()).expect("serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_json_repr(&serde_json::from_str(s)?)
    }
}

/// Free-standing forms of the main operations.
pub fn sup_norm_on_cube<S: Scalar>(f: &PLFunction<S>) -> Result<S> {
    f.sup_norm_on_cube()
}

pub fn refine_by_zero_set<S: Scalar>(f: &PLFunction<S>) -> Result<PLFunction<S>> {
    f.refine_by_zero_set(&FanOptions::default())
}

pub fn pl_equal<S: Scalar>(f: &PLFunction<S>, g: &PLFunction<S>) -> Result<bool> {
    f.equals(g, &FanOptions::default())
}
