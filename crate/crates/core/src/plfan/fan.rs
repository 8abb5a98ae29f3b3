use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::GeneratorId;
use crate::lp::{LinearProgram, LpOutcome, Relation, VarKind};
use crate::scalar::{dot, Scalar};

pub const DEFAULT_CELL_CAP: usize = 100_000;
pub const DEFAULT_SAMPLE_CAP: usize = 2_000;

#[derive(Debug, Clone, Copy)]
pub struct FanOptions {
    pub seed: u64,
    pub cell_cap: usize,
    /// Upper bound on the random coverage audit (`50 * 3^h` otherwise).
    pub sample_cap: usize,
}

impl Default for FanOptions {
    fn default() -> Self {
        FanOptions {
            seed: 0,
            cell_cap: DEFAULT_CELL_CAP,
            sample_cap: DEFAULT_SAMPLE_CAP,
        }
    }
}

/// Full-dimensional cell: one side (`true` = `+`) per hyperplane, plus an
/// interior witness inside the open cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone<S> {
    pub signs: Vec<bool>,
    pub witness: Vec<S>,
}

impl<S: Scalar> Cone<S> {
    pub fn sign_string(&self) -> String {
        sign_string(&self.signs)
    }
}

pub fn sign_string(signs: &[bool]) -> String {
    signs.iter().map(|&s| if s { '+' } else { '-' }).collect()
}

pub fn parse_sign_string(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '+' => Some(true),
            '-' => Some(false),
            _ => None,
        })
        .collect()
}

/// Central hyperplane arrangement together with all of its full-dimensional cells.
#[derive(Debug, Clone)]
pub struct Fan<S> {
    pub dims: Vec<GeneratorId>,
    pub hyperplanes: Vec<Vec<S>>,
    pub cells: Vec<Cone<S>>,
    index: HashMap<Vec<bool>, usize>,
}

/// Scales a normal so its first nonzero coefficient is `+1`; `None` for a zero normal.
pub fn normalize_hyperplane<S: Scalar>(v: &[S]) -> Option<Vec<S>> {
    let lead = v.iter().find(|x| !x.is_zero_tol())?.clone();
    Some(
        v.iter()
            .map(|x| {
                let y = x.clone() / lead.clone();
                if !S::EXACT && y.abs() < S::from_f64(1e-15) {
                    S::zero()
                } else {
                    y
                }
            })
            .collect(),
    )
}

fn same_vector<S: Scalar>(a: &[S], b: &[S]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x.clone() - y.clone()).is_zero_tol())
}

/// Normalizes and deduplicates (up to nonzero scaling), keeping first occurrences.
pub fn canonical_hyperplanes<S: Scalar>(hs: &[Vec<S>]) -> Result<Vec<Vec<S>>> {
    let mut out: Vec<Vec<S>> = Vec::new();
    for h in hs {
        let n = normalize_hyperplane(h).ok_or(Error::ZeroNormal)?;
        if !out.iter().any(|k| same_vector(k, &n)) {
            out.push(n);
        }
    }
    Ok(out)
}

/// Largest margin `t` with `side_i <h_i, x> >= t` inside the cube; returns
/// the witness `x / 2` when the margin is positive.
fn interior_point<S: Scalar>(constraints: &[(&[S], bool)], d: usize) -> Result<Option<Vec<S>>> {
    let mut kinds = vec![VarKind::Free; d];
    kinds.push(VarKind::NonNeg);
    let mut objective = vec![S::zero(); d];
    objective.push(S::one());
    let mut lp = LinearProgram::new(objective, kinds);
    for (h, side) in constraints {
        let mut row: Vec<S> = h
            .iter()
            .map(|x| if *side { -x.clone() } else { x.clone() })
            .collect();
        row.push(S::one());
        lp.add(row, Relation::Le, S::zero());
    }
    for k in 0..d {
        let mut row = vec![S::zero(); d + 1];
        row[k] = S::one();
        lp.add(row.clone(), Relation::Le, S::one());
        row[k] = -S::one();
        lp.add(row, Relation::Le, S::one());
    }
    let mut row = vec![S::zero(); d + 1];
    row[d] = S::one();
    lp.add(row, Relation::Le, S::one());
    match lp.solve()? {
        LpOutcome::Optimal(sol) => {
            if sol.value > S::sign_tol() {
                let half = S::one() / (S::one() + S::one());
                Ok(Some(sol.x[..d].iter().map(|x| x.clone() * half.clone()).collect()))
            } else {
                Ok(None)
            }
        }
        other => Err(Error::Internal(format!(
            "cell feasibility LP was {}",
            other.status()
        ))),
    }
}

/// Minimum side margin a kept witness must have on a newly added hyperplane
/// before it is reused instead of re-centred.
fn reuse_margin<S: Scalar>() -> S {
    if S::EXACT {
        S::zero()
    } else {
        S::from_f64(1e-7)
    }
}

impl<S: Scalar> Fan<S> {
    /// Every full-dimensional cell of the central arrangement of `hyperplanes`
    /// in `R^dims`, each exactly once.
    ///
    /// Cells are enumerated by incremental splitting (each new hyperplane is
    /// tested against every current cell by LP), which is exhaustive. A seeded
    /// random sample of `min(50 * 3^h, sample_cap)` points then audits coverage.
    pub fn arrangement(hyperplanes: &[Vec<S>], dims: &[GeneratorId], opts: &FanOptions) -> Result<Self> {
        let d = dims.len();
        if d == 0 {
            return Err(Error::Dimension("empty generator list".into()));
        }
        if let Some(h) = hyperplanes.iter().find(|h| h.len() != d) {
            return Err(Error::Dimension(format!(
                "hyperplane of width {} in dimension {d}",
                h.len()
            )));
        }
        let hs = canonical_hyperplanes(hyperplanes)?;

        let half = S::one() / (S::one() + S::one());
        let mut cells: Vec<Cone<S>> = vec![Cone {
            signs: Vec::new(),
            witness: vec![half; d],
        }];
        for (j, h) in hs.iter().enumerate() {
            let mut next = Vec::with_capacity(cells.len() * 2);
            for cell in cells {
                let v = dot(h, &cell.witness);
                let prior: Vec<(&[S], bool)> = hs[..j]
                    .iter()
                    .zip(&cell.signs)
                    .map(|(g, &s)| (g.as_slice(), s))
                    .collect();
                let kept_side = if v.abs() > reuse_margin::<S>() && !v.is_zero_tol() {
                    Some(v > S::zero())
                } else {
                    None
                };
                for side in [true, false] {
                    let witness = if kept_side == Some(side) {
                        Some(cell.witness.clone())
                    } else {
                        let mut cons = prior.clone();
                        cons.push((h.as_slice(), side));
                        interior_point(&cons, d)?
                    };
                    if let Some(w) = witness {
                        let mut signs = cell.signs.clone();
                        signs.push(side);
                        next.push(Cone { signs, witness: w });
                    }
                }
            }
            if next.len() > opts.cell_cap {
                return Err(Error::CellCap(opts.cell_cap));
            }
            cells = next;
        }
        cells.sort_by(|a, b| b.signs.cmp(&a.signs));
        let index = cells
            .iter()
            .enumerate()
            .map(|(i, c)| (c.signs.clone(), i))
            .collect();
        let fan = Fan {
            dims: dims.to_vec(),
            hyperplanes: hs,
            cells,
            index,
        };
        fan.audit_coverage(opts)?;
        Ok(fan)
    }

    /// Rebuilds a fan from stored cells (sign vectors over `hyperplanes`).
    pub fn from_parts(dims: Vec<GeneratorId>, hyperplanes: Vec<Vec<S>>, cells: Vec<Cone<S>>) -> Result<Self> {
        let d = dims.len();
        for h in &hyperplanes {
            if h.len() != d {
                return Err(Error::Dimension("hyperplane width".into()));
            }
        }
        let mut index = HashMap::new();
        for (i, c) in cells.iter().enumerate() {
            if c.signs.len() != hyperplanes.len() || c.witness.len() != d {
                return Err(Error::Dimension("cell sign vector or witness width".into()));
            }
            if index.insert(c.signs.clone(), i).is_some() {
                return Err(Error::Internal(format!(
                    "duplicate cell {}",
                    sign_string(&c.signs)
                )));
            }
        }
        Ok(Fan {
            dims,
            hyperplanes,
            cells,
            index,
        })
    }

    fn audit_coverage(&self, opts: &FanOptions) -> Result<()> {
        let h = self.hyperplanes.len();
        if h == 0 {
            return Ok(());
        }
        let budget = 3usize
            .checked_pow(h as u32)
            .and_then(|x| x.checked_mul(50))
            .unwrap_or(usize::MAX)
            .min(opts.sample_cap);
        let hf: Vec<Vec<f64>> = self
            .hyperplanes
            .iter()
            .map(|v| v.iter().map(Scalar::to_f64).collect())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_fa11);
        let d = self.dims.len();
        let mut p = vec![0.0; d];
        'sample: for _ in 0..budget {
            for x in p.iter_mut() {
                *x = rng.gen_range(-1.0..1.0);
            }
            let mut signs = Vec::with_capacity(h);
            for n in &hf {
                let v: f64 = n.iter().zip(&p).map(|(a, b)| a * b).sum();
                if v.abs() < 1e-7 {
                    continue 'sample;
                }
                signs.push(v > 0.0);
            }
            if !self.index.contains_key(&signs) {
                return Err(Error::Internal(format!(
                    "sampled sign vector {} missing from enumerated fan",
                    sign_string(&signs)
                )));
            }
        }
        Ok(())
    }

    pub fn cell_index(&self, signs: &[bool]) -> Option<usize> {
        self.index.get(signs).copied()
    }

    /// Sign of `p` against every hyperplane (`0` on the hyperplane).
    pub fn signs_of(&self, p: &[S]) -> Vec<i8> {
        self.hyperplanes.iter().map(|h| dot(h, p).sign()).collect()
    }

    /// Index of a cell whose closure contains `p`. Zero signs act as wildcards.
    pub fn locate(&self, p: &[S]) -> Option<usize> {
        let signs = self.signs_of(p);
        let zeros: Vec<usize> = signs
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0)
            .map(|(i, _)| i)
            .collect();
        let mut key: Vec<bool> = signs.iter().map(|&s| s > 0).collect();
        if zeros.is_empty() {
            return self.cell_index(&key);
        }
        if zeros.len() <= 12 {
            for mask in 0u32..(1u32 << zeros.len()) {
                for (b, &z) in zeros.iter().enumerate() {
                    key[z] = mask & (1 << b) != 0;
                }
                if let Some(i) = self.cell_index(&key) {
                    return Some(i);
                }
            }
            return None;
        }
        self.cells.iter().position(|c| {
            c.signs
                .iter()
                .zip(&signs)
                .all(|(&cs, &s)| s == 0 || (s > 0) == cs)
        })
    }

    /// Like [`Fan::locate`] but falls back to the cell with the smallest sign
    /// violation, for points whose rounding lands between cells.
    pub fn locate_nearest(&self, p: &[S]) -> usize {
        if let Some(i) = self.locate(p) {
            return i;
        }
        let vals: Vec<S> = self.hyperplanes.iter().map(|h| dot(h, p)).collect();
        let mut best = (0usize, f64::INFINITY);
        for (i, c) in self.cells.iter().enumerate() {
            let worst = c
                .signs
                .iter()
                .zip(&vals)
                .map(|(&s, v)| {
                    let v = v.to_f64();
                    if s {
                        (-v).max(0.0)
                    } else {
                        v.max(0.0)
                    }
                })
                .fold(0.0, f64::max);
            if worst < best.1 {
                best = (i, worst);
            }
        }
        best.0
    }

    /// Closed-cell membership rows `side * <h, x> >= 0` for cell `i`.
    pub fn cell_rows(&self, i: usize) -> impl Iterator<Item = Vec<S>> + '_ {
        self.hyperplanes
            .iter()
            .zip(&self.cells[i].signs)
            .map(|(h, &s)| {
                if s {
                    h.clone()
                } else {
                    h.iter().map(|x| -x.clone()).collect()
                }
            })
    }
}

/// Free-standing form of [`Fan::arrangement`].
pub fn arrangement_fan<S: Scalar>(
    hyperplanes: &[Vec<S>],
    dims: &[GeneratorId],
    opts: &FanOptions,
) -> Result<Fan<S>> {
    Fan::arrangement(hyperplanes, dims, opts)
}

/// Row-reduces and returns the rank and, when the nullity is exactly one, a
/// spanning vector of the null space.
fn null_line<S: Scalar>(rows: &[&[S]], d: usize) -> (usize, Option<Vec<S>>) {
    let mut m: Vec<Vec<S>> = rows.iter().map(|r| r.to_vec()).collect();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..d {
        if r == m.len() {
            break;
        }
        let pick = if S::EXACT {
            (r..m.len()).find(|&i| !m[i][c].is_zero_tol())
        } else {
            (r..m.len())
                .filter(|&i| m[i][c].abs() > S::from_f64(1e-10))
                .max_by(|&a, &b| m[a][c].abs().partial_cmp(&m[b][c].abs()).expect("finite"))
        };
        let Some(p) = pick else { continue };
        m.swap(r, p);
        let pv = m[r][c].clone();
        for x in m[r].iter_mut() {
            *x = x.clone() / pv.clone();
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero_tol() {
                let f = m[i][c].clone();
                let row_r = m[r].clone();
                for (x, y) in m[i].iter_mut().zip(row_r) {
                    *x = x.clone() - f.clone() * y;
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    let rank = pivot_cols.len();
    if rank + 1 != d {
        return (rank, None);
    }
    let free = (0..d).find(|c| !pivot_cols.contains(c)).expect("one free column");
    let mut v = vec![S::zero(); d];
    v[free] = S::one();
    for (row, &pc) in pivot_cols.iter().enumerate() {
        v[pc] = -m[row][free].clone();
    }
    (rank, Some(v))
}

fn ray_key<S: Scalar>(v: &[S]) -> String {
    if S::EXACT {
        v.iter().map(Scalar::to_text).collect::<Vec<_>>().join(",")
    } else {
        v.iter()
            .map(|x| format!("{}", (x.to_f64() * 1e8).round() as i64))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Both directions of every one-dimensional flat of an essential central
/// arrangement, i.e. the extreme rays of all of its (pointed) cells. Each ray
/// is scaled to max-norm one.
pub fn arrangement_rays<S: Scalar>(hyperplanes: &[Vec<S>], d: usize) -> Result<Vec<Vec<S>>> {
    if d == 0 {
        return Err(Error::Dimension("empty generator list".into()));
    }
    if d == 1 {
        return Ok(vec![vec![S::one()], vec![-S::one()]]);
    }
    let hs = canonical_hyperplanes(hyperplanes)?;
    let all: Vec<&[S]> = hs.iter().map(|h| h.as_slice()).collect();
    let (rank, _) = null_line(&all, d);
    if rank < d {
        return Err(Error::Internal(format!(
            "arrangement of rank {rank} in dimension {d} has unpointed cells"
        )));
    }
    let k = d - 1;
    let mut seen = std::collections::HashSet::new();
    let mut rays = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let rows: Vec<&[S]> = idx.iter().map(|&i| hs[i].as_slice()).collect();
        if let (_, Some(v)) = null_line(&rows, d) {
            let scale = v
                .iter()
                .map(Scalar::abs)
                .fold(S::zero(), S::max_of);
            let lead = v.iter().find(|x| !x.is_zero_tol()).expect("nonzero ray").clone();
            let s = if lead > S::zero() { scale } else { -scale };
            let unit: Vec<S> = v.into_iter().map(|x| x / s.clone()).collect();
            if seen.insert(ray_key(&unit)) {
                rays.push(unit.iter().map(|x| -x.clone()).collect());
                rays.push(unit);
            }
        }
        // next k-combination of 0..hs.len()
        let n = hs.len();
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(rays);
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}
