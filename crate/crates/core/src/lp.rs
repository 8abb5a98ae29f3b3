//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Generic over [`Scalar`], so the same code runs in floating and exact
//! rational arithmetic. Problems are always maximizations.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Free,
    NonNeg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint<S> {
    pub coeffs: Vec<S>,
    pub rel: Relation,
    pub rhs: S,
}

#[derive(Debug, Clone)]
pub struct LinearProgram<S> {
    pub objective: Vec<S>,
    pub kinds: Vec<VarKind>,
    pub constraints: Vec<Constraint<S>>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<S> {
    pub x: Vec<S>,
    pub value: S,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
pub enum LpOutcome<S> {
    Optimal(LpSolution<S>),
    Infeasible,
    Unbounded,
}

impl<S> LpOutcome<S> {
    pub fn status(&self) -> &'static str {
        match self {
            LpOutcome::Optimal(_) => "optimal",
            LpOutcome::Infeasible => "infeasible",
            LpOutcome::Unbounded => "unbounded",
        }
    }
}

impl<S: Scalar> LinearProgram<S> {
    pub fn new(objective: Vec<S>, kinds: Vec<VarKind>) -> Self {
        assert_eq!(objective.len(), kinds.len());
        LinearProgram {
            objective,
            kinds,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<S>, rel: Relation, rhs: S) {
        assert_eq!(coeffs.len(), self.num_vars(), "constraint width");
        self.constraints.push(Constraint { coeffs, rel, rhs });
    }

    pub fn solve(&self) -> Result<LpOutcome<S>> {
        Tableau::build(self).run(self)
    }
}

struct Tableau<S> {
    /// rows x (cols + 1); last column is the right-hand side
    rows: Vec<Vec<S>>,
    /// reduced-cost row in `z - c.x = value` form
    obj: Vec<S>,
    basis: Vec<usize>,
    cols: usize,
    artificial_from: usize,
    /// structural column(s) for each original variable: (plus, minus)
    var_cols: Vec<(usize, Option<usize>)>,
    pivots: usize,
}

fn is_zero<S: Scalar>(x: &S) -> bool {
    *x == S::zero()
}

fn clean<S: Scalar>(x: S) -> S {
    if !S::EXACT && x.abs() < S::from_f64(1e-14) {
        S::zero()
    } else {
        x
    }
}

impl<S: Scalar> Tableau<S> {
    fn build(lp: &LinearProgram<S>) -> Self {
        let mut var_cols = Vec::with_capacity(lp.num_vars());
        let mut next = 0usize;
        for kind in &lp.kinds {
            match kind {
                VarKind::NonNeg => {
                    var_cols.push((next, None));
                    next += 1;
                }
                VarKind::Free => {
                    var_cols.push((next, Some(next + 1)));
                    next += 2;
                }
            }
        }
        let structural = next;

        // normalize so every right-hand side is nonnegative
        let mut normalized: Vec<(Vec<S>, Relation, S)> = Vec::with_capacity(lp.constraints.len());
        for c in &lp.constraints {
            if c.rhs < S::zero() {
                let rel = match c.rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                normalized.push((c.coeffs.iter().map(|x| -x.clone()).collect(), rel, -c.rhs.clone()));
            } else {
                normalized.push((c.coeffs.clone(), c.rel, c.rhs.clone()));
            }
        }

        let n_slack = normalized
            .iter()
            .filter(|(_, rel, _)| *rel != Relation::Eq)
            .count();
        let n_art = normalized
            .iter()
            .filter(|(_, rel, _)| *rel != Relation::Le)
            .count();
        let artificial_from = structural + n_slack;
        let cols = artificial_from + n_art;

        let mut rows = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        let mut slack = structural;
        let mut art = artificial_from;
        for (coeffs, rel, rhs) in normalized {
            let mut row = vec![S::zero(); cols + 1];
            for (v, a) in coeffs.into_iter().enumerate() {
                let (p, m) = var_cols[v];
                if let Some(m) = m {
                    row[m] = -a.clone();
                }
                row[p] = a;
            }
            match rel {
                Relation::Le => {
                    row[slack] = S::one();
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -S::one();
                    slack += 1;
                    row[art] = S::one();
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = S::one();
                    basis.push(art);
                    art += 1;
                }
            }
            row[cols] = rhs;
            rows.push(row);
        }

        Tableau {
            rows,
            obj: vec![S::zero(); cols + 1],
            basis,
            cols,
            artificial_from,
            var_cols,
            pivots: 0,
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if !(S::EXACT && p == S::one()) {
            for x in self.rows[r].iter_mut() {
                if !is_zero(x) {
                    *x = x.clone() / p.clone();
                }
            }
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<S>| {
            let f = row[c].clone();
            if is_zero(&f) {
                return;
            }
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                if !is_zero(y) {
                    *x = clean(x.clone() - f.clone() * y.clone());
                }
            }
            row[c] = S::zero();
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.obj);
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn set_objective(&mut self, costs: &[S]) {
        self.obj = costs.iter().map(|c| -c.clone()).collect();
        self.obj.push(S::zero());
        for r in 0..self.rows.len() {
            let b = self.basis[r];
            let f = self.obj[b].clone();
            if is_zero(&f) {
                continue;
            }
            for j in 0..=self.cols {
                let y = &self.rows[r][j];
                if !is_zero(y) {
                    self.obj[j] = clean(self.obj[j].clone() - f.clone() * y.clone());
                }
            }
        }
    }

    /// Iterates Bland's rule over the columns `< limit`. Returns false when unbounded.
    fn optimize(&mut self, limit: usize) -> Result<bool> {
        let tol = S::pivot_tol();
        let max_pivots = 100_000 + 50 * (self.rows.len() + self.cols);
        loop {
            let entering = (0..limit).find(|&j| self.obj[j] < -tol.clone());
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, S)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = &row[c];
                if *a <= tol {
                    continue;
                }
                let ratio = row[self.cols].clone() / a.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, best)) => {
                        if ratio < best.clone() - tol.clone() {
                            Some((i, ratio))
                        } else if ratio <= best.clone() + tol.clone()
                            && self.basis[i] < self.basis[bi]
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, c);
            if self.pivots > max_pivots {
                return Err(Error::Lp(format!("exceeded {max_pivots} pivots")));
            }
        }
    }

    fn run(mut self, lp: &LinearProgram<S>) -> Result<LpOutcome<S>> {
        if self.cols > self.artificial_from {
            let mut costs = vec![S::zero(); self.cols];
            for c in costs.iter_mut().skip(self.artificial_from) {
                *c = -S::one();
            }
            self.set_objective(&costs);
            self.optimize(self.cols)?;
            if self.obj[self.cols] < -S::sign_tol() {
                return Ok(LpOutcome::Infeasible);
            }
            // drive remaining artificials out of the basis
            let mut r = 0;
            while r < self.rows.len() {
                if self.basis[r] >= self.artificial_from {
                    let tol = S::pivot_tol();
                    let col = (0..self.artificial_from).find(|&j| self.rows[r][j].abs() > tol);
                    match col {
                        Some(c) => {
                            self.pivot(r, c);
                            r += 1;
                        }
                        None => {
                            self.rows.remove(r);
                            self.basis.remove(r);
                        }
                    }
                } else {
                    r += 1;
                }
            }
        }

        let mut costs = vec![S::zero(); self.cols];
        for (v, c) in lp.objective.iter().enumerate() {
            let (p, m) = self.var_cols[v];
            costs[p] = c.clone();
            if let Some(m) = m {
                costs[m] = -c.clone();
            }
        }
        self.set_objective(&costs);
        if !self.optimize(self.artificial_from)? {
            return Ok(LpOutcome::Unbounded);
        }

        let mut col_value = vec![S::zero(); self.cols];
        for (r, &b) in self.basis.iter().enumerate() {
            col_value[b] = self.rows[r][self.cols].clone();
        }
        let x: Vec<S> = self
            .var_cols
            .iter()
            .map(|&(p, m)| match m {
                Some(m) => col_value[p].clone() - col_value[m].clone(),
                None => col_value[p].clone(),
            })
            .collect();
        let value = lp
            .objective
            .iter()
            .zip(&x)
            .fold(S::zero(), |acc, (c, xi)| acc + c.clone() * xi.clone());
        Ok(LpOutcome::Optimal(LpSolution {
            x,
            value,
            pivots: self.pivots,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn optimal<S: Scalar>(o: LpOutcome<S>) -> LpSolution<S> {
        match o {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimum, got {}", other.status()),
        }
    }

    #[test]
    fn textbook_max() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  -> 36 at (2, 6)
        let mut lp = LinearProgram::new(vec![3.0, 5.0], vec![VarKind::NonNeg; 2]);
        lp.add(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = optimal(lp.solve().unwrap());
        assert!((s.value - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn exact_rational_optimum() {
        // max x + y, 3x + y <= 1, x + 3y <= 1 -> 1/2 at (1/4, 1/4)
        let mut lp = LinearProgram::new(vec![r(1, 1), r(1, 1)], vec![VarKind::NonNeg; 2]);
        lp.add(vec![r(3, 1), r(1, 1)], Relation::Le, r(1, 1));
        lp.add(vec![r(1, 1), r(3, 1)], Relation::Le, r(1, 1));
        let s = optimal(lp.solve().unwrap());
        assert_eq!(s.value, r(1, 2));
        assert_eq!(s.x, vec![r(1, 4), r(1, 4)]);
    }

    #[test]
    fn free_variables_and_ge_rows() {
        // max -x, x >= -3 (free x) -> x = -3, value 3
        let mut lp = LinearProgram::new(vec![-1.0], vec![VarKind::Free]);
        lp.add(vec![1.0], Relation::Ge, -3.0);
        let s = optimal(lp.solve().unwrap());
        assert!((s.x[0] + 3.0).abs() < 1e-12);
        assert!((s.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn equality_rows_phase_one() {
        // max x - y, x + y = 2, x - 2y >= -1, x <= 1.5 (x, y >= 0)
        let mut lp = LinearProgram::new(vec![r(1, 1), r(-1, 1)], vec![VarKind::NonNeg; 2]);
        lp.add(vec![r(1, 1), r(1, 1)], Relation::Eq, r(2, 1));
        lp.add(vec![r(1, 1), r(-2, 1)], Relation::Ge, r(-1, 1));
        lp.add(vec![r(1, 1), r(0, 1)], Relation::Le, r(3, 2));
        let s = optimal(lp.solve().unwrap());
        assert_eq!(s.x, vec![r(3, 2), r(1, 2)]);
        assert_eq!(s.value, r(1, 1));
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0], vec![VarKind::NonNeg]);
        lp.add(vec![1.0], Relation::Ge, 2.0);
        lp.add(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Infeasible));

        let mut lp = LinearProgram::new(vec![1.0, 0.0], vec![VarKind::Free; 2]);
        lp.add(vec![0.0, 1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Unbounded));
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0], vec![VarKind::NonNeg; 2]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add(vec![2.0, 2.0], Relation::Eq, 2.0);
        let s = optimal(lp.solve().unwrap());
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance; Bland's rule must terminate at 5/4.
        let mut lp = LinearProgram::new(
            vec![r(3, 4), r(-20, 1), r(1, 2), r(-6, 1)],
            vec![VarKind::NonNeg; 4],
        );
        lp.add(vec![r(1, 4), r(-8, 1), r(-1, 1), r(9, 1)], Relation::Le, r(0, 1));
        lp.add(vec![r(1, 2), r(-12, 1), r(-1, 2), r(3, 1)], Relation::Le, r(0, 1));
        lp.add(vec![r(0, 1), r(0, 1), r(1, 1), r(0, 1)], Relation::Le, r(1, 1));
        let s = optimal(lp.solve().unwrap());
        assert_eq!(s.value, r(5, 4));
    }
}
