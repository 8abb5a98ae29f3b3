//! Max-min normal form: every lattice expression equals
//! `max_i min_j l_ij` for finitely many linear functionals `l_ij`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{GeneratorId, LatticeExpr};
use crate::error::{Error, Result};

pub const DEFAULT_MAXMIN_CAP: usize = 10_000;

/// Finitely supported linear functional `p -> Σ coeff(a) p(a)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinearFunctional {
    pub coeffs: BTreeMap<GeneratorId, f64>,
}

impl LinearFunctional {
    pub fn unit(g: GeneratorId) -> Self {
        LinearFunctional {
            coeffs: [(g, 1.0)].into_iter().collect(),
        }
    }

    /// Drops zero coefficients.
    pub fn from_dense(dims: &[GeneratorId], v: &[f64]) -> Self {
        LinearFunctional {
            coeffs: dims
                .iter()
                .zip(v)
                .filter(|(_, &c)| c != 0.0)
                .map(|(g, &c)| (g.clone(), c))
                .collect(),
        }
    }

    pub fn dense(&self, dims: &[GeneratorId]) -> Vec<f64> {
        dims.iter()
            .map(|g| self.coeffs.get(g).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn eval(&self, p: &BTreeMap<GeneratorId, f64>) -> Result<f64> {
        self.coeffs.iter().try_fold(0.0, |acc, (g, c)| {
            p.get(g)
                .map(|x| acc + c * x)
                .ok_or_else(|| Error::MissingCoordinate(g.to_string()))
        })
    }
}

/// `max` over groups of `min` over each group's functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMinForm {
    pub generators: Vec<GeneratorId>,
    pub groups: Vec<Vec<LinearFunctional>>,
}

impl MaxMinForm {
    /// Total number of functionals over all groups.
    pub fn size(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Distinct functionals as dense vectors over `generators`, in first-seen order.
    pub fn distinct_functionals(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for f in self.groups.iter().flatten() {
            let v = f.dense(&self.generators);
            if !out.iter().any(|w| cmp_vec(w, &v) == Ordering::Equal) {
                out.push(v);
            }
        }
        out
    }

    pub fn evaluate(&self, p: &BTreeMap<GeneratorId, f64>) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        for g in &self.groups {
            let mut m = f64::INFINITY;
            for f in g {
                m = m.min(f.eval(p)?);
            }
            best = best.max(m);
        }
        Ok(best)
    }

    pub fn eval_dense(&self, x: &[f64]) -> f64 {
        let dense: Vec<Vec<Vec<f64>>> = self
            .groups
            .iter()
            .map(|g| g.iter().map(|f| f.dense(&self.generators)).collect())
            .collect();
        eval_form(&dense, x)
    }
}

type Func = Vec<f64>;
type Form = Vec<Vec<Func>>;

fn eval_form(form: &Form, x: &[f64]) -> f64 {
    form.iter()
        .map(|g| {
            g.iter()
                .map(|f| f.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn canon(x: f64) -> f64 {
    // folds -0.0 into 0.0
    x + 0.0
}

fn cmp_vec(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match canon(*x).total_cmp(&canon(*y)) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn cmp_group(a: &[Func], b: &[Func]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match cmp_vec(x, y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn is_subset(small: &[Func], big: &[Func]) -> bool {
    // both sorted
    let mut j = 0;
    for f in small {
        while j < big.len() && cmp_vec(&big[j], f) == Ordering::Less {
            j += 1;
        }
        if j == big.len() || cmp_vec(&big[j], f) != Ordering::Equal {
            return false;
        }
        j += 1;
    }
    true
}

/// Sorts and dedups within groups, dedups groups, and drops any group that
/// is a superset of another (its min is pointwise dominated).
fn normalize(mut form: Form) -> Form {
    for g in form.iter_mut() {
        for f in g.iter_mut() {
            for c in f.iter_mut() {
                *c = canon(*c);
            }
        }
        g.sort_by(|a, b| cmp_vec(a, b));
        g.dedup_by(|a, b| cmp_vec(a, b) == Ordering::Equal);
    }
    form.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| cmp_group(a, b)));
    form.dedup_by(|a, b| cmp_group(a, b) == Ordering::Equal);
    let mut kept: Form = Vec::with_capacity(form.len());
    for g in form {
        if !kept.iter().any(|k| is_subset(k, &g)) {
            kept.push(g);
        }
    }
    kept
}

fn size_of(form: &Form) -> usize {
    form.iter().map(Vec::len).sum()
}

struct Converter {
    dim: usize,
    index: BTreeMap<GeneratorId, usize>,
    cap: usize,
    memo: HashMap<String, Rc<Form>>,
}

impl Converter {
    fn check(&self, projected: usize) -> Result<()> {
        if projected > self.cap {
            Err(Error::MaxMinCap {
                size: projected,
                cap: self.cap,
            })
        } else {
            Ok(())
        }
    }

    fn convert(&mut self, e: &LatticeExpr) -> Result<Rc<Form>> {
        let key = e.to_string();
        if let Some(f) = self.memo.get(&key) {
            return Ok(Rc::clone(f));
        }
        let form = match e {
            LatticeExpr::Gen { id } => {
                let mut f = vec![0.0; self.dim];
                f[self.index[id]] = 1.0;
                vec![vec![f]]
            }
            LatticeExpr::Scale { c, child } => {
                let inner = self.convert(child)?;
                self.scale(*c, &inner)?
            }
            LatticeExpr::Sum { left, right } => {
                let (l, r) = (self.convert(left)?, self.convert(right)?);
                let mut projected = 0usize;
                for g in l.iter() {
                    for h in r.iter() {
                        projected = projected.saturating_add(g.len().saturating_mul(h.len()));
                    }
                }
                self.check(projected)?;
                let mut out = Vec::with_capacity(l.len() * r.len());
                for g in l.iter() {
                    for h in r.iter() {
                        let mut grp = Vec::with_capacity(g.len() * h.len());
                        for f in g {
                            for k in h {
                                grp.push(f.iter().zip(k).map(|(a, b)| a + b).collect());
                            }
                        }
                        out.push(grp);
                    }
                }
                out
            }
            LatticeExpr::Join { left, right } => {
                let (l, r) = (self.convert(left)?, self.convert(right)?);
                self.check(size_of(&l) + size_of(&r))?;
                l.iter().chain(r.iter()).cloned().collect()
            }
            LatticeExpr::Meet { left, right } => {
                let (l, r) = (self.convert(left)?, self.convert(right)?);
                let mut projected = 0usize;
                for g in l.iter() {
                    for h in r.iter() {
                        projected = projected.saturating_add(g.len() + h.len());
                    }
                }
                self.check(projected)?;
                let mut out = Vec::with_capacity(l.len() * r.len());
                for g in l.iter() {
                    for h in r.iter() {
                        out.push(g.iter().chain(h.iter()).cloned().collect());
                    }
                }
                out
            }
        };
        let form = normalize(form);
        self.check(size_of(&form))?;
        let form = Rc::new(form);
        self.memo.insert(key, Rc::clone(&form));
        Ok(form)
    }

    fn scale(&self, c: f64, inner: &Form) -> Result<Form> {
        if c == 0.0 {
            return Ok(vec![vec![vec![0.0; self.dim]]]);
        }
        let scaled = |f: &Func, s: f64| -> Func { f.iter().map(|x| x * s).collect() };
        if c > 0.0 {
            return Ok(inner
                .iter()
                .map(|g| g.iter().map(|f| scaled(f, c)).collect())
                .collect());
        }
        // c < 0: -max_i min_j f_ij = min_i max_j (c f_ij), redistributed over
        // every choice of one functional per group
        let groups = inner.len();
        let mut projected: usize = 1;
        for g in inner {
            projected = projected.saturating_mul(g.len());
        }
        self.check(projected.saturating_mul(groups))?;
        let mut out = Vec::with_capacity(projected);
        let mut choice = vec![0usize; groups];
        loop {
            out.push(
                choice
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| scaled(&inner[i][j], c))
                    .collect(),
            );
            let mut k = 0;
            loop {
                if k == groups {
                    return Ok(out);
                }
                choice[k] += 1;
                if choice[k] < inner[k].len() {
                    break;
                }
                choice[k] = 0;
                k += 1;
            }
        }
    }
}

impl LatticeExpr {
    /// Max-min normal form over the expression's support, with the default cap.
    pub fn to_maxmin(&self) -> Result<MaxMinForm> {
        self.to_maxmin_with(&self.dims(), DEFAULT_MAXMIN_CAP)
    }

    /// Max-min normal form over `dims`, which must contain the support.
    /// Fails with [`Error::MaxMinCap`] when any intermediate form would hold
    /// more than `cap` functionals.
    pub fn to_maxmin_with(&self, dims: &[GeneratorId], cap: usize) -> Result<MaxMinForm> {
        let index: BTreeMap<GeneratorId, usize> =
            dims.iter().cloned().enumerate().map(|(i, g)| (g, i)).collect();
        if let Some(g) = self.support().into_iter().find(|g| !index.contains_key(g)) {
            return Err(Error::MissingCoordinate(g.to_string()));
        }
        let mut conv = Converter {
            dim: dims.len(),
            index,
            cap,
            memo: HashMap::new(),
        };
        let form = conv.convert(self)?;
        Ok(MaxMinForm {
            generators: dims.to_vec(),
            groups: form
                .iter()
                .map(|g| g.iter().map(|f| LinearFunctional::from_dense(dims, f)).collect())
                .collect(),
        })
    }
}
