//! Extraction of a subsequence with an `ℓ_1` lower bound, together with the
//! disjointly supported dual certificate that proves it.
//!
//! Pass (a) picks indices `m_k` whose points vanish on the previous finite
//! coordinate set and grows `F_{m_k}` until the truncated point `y*_{m_k}`
//! keeps `f_{m_k}` within `ε_kk` of one. Pass (b) thins that sequence so all
//! cross evaluations are below the schedule. Pointwise decay cannot be
//! checked on a finite truncation, so both passes ask a [`DecayOracle`].

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{CompiledExpr, GeneratorId, LatticeExpr};
use crate::fblnorm::{admissible, AdmissibilitySpace};
use crate::homs::{build_phi, subset_generator, PhiInstance};

/// Tolerance on the normalization `f_n(x_n*) = 1`.
pub const HYPOTHESIS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub epsilon: f64,
}

/// `ε_ij = ε·2^{-(i+j)}` for `i, j >= 1`, which sums to exactly `ε`.
pub fn schedule(epsilon: f64) -> Result<EpsilonSchedule> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::OutOfRange(format!("ε = {epsilon} must lie in (0, 1)")));
    }
    Ok(EpsilonSchedule { epsilon })
}

impl EpsilonSchedule {
    /// 1-based entry `ε_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(i >= 1 && j >= 1, "schedule indices start at 1");
        self.epsilon * 0.5f64.powi((i + j) as i32)
    }

    pub fn partial_sum(&self, n: usize) -> f64 {
        let mut s = 0.0;
        for i in 1..=n {
            for j in 1..=n {
                s += self.entry(i, j);
            }
        }
        s
    }
}

/// Indexed families `(f_n, x_n*)` for `n = 1..=n_max` over a finite generator list.
pub trait SequenceFamily: Sync {
    fn generators(&self) -> &[GeneratorId];
    fn n_max(&self) -> usize;
    /// `f_n` at a dense point.
    fn eval(&self, n: usize, p: &[f64]) -> f64;
    fn point(&self, n: usize) -> Vec<f64>;
    fn expr(&self, _n: usize) -> Option<LatticeExpr> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    /// `f_n = δ_{{n}}`.
    Disjoint,
    /// `f_n = (δ_{{n}} + 2^{-n} δ_{{1..n}}) / (1 + 2^{-n})`.
    Perturbed,
}

/// Demo families over the subset generators of [`build_phi`], with
/// `x_n* = (χ_A({n}))_A`.
pub struct DemoFamily {
    pub kind: InstanceKind,
    pub phi: PhiInstance,
    exprs: Vec<LatticeExpr>,
    compiled: Vec<CompiledExpr>,
}

impl DemoFamily {
    pub fn new(kind: InstanceKind, n: usize) -> Result<Self> {
        let phi = build_phi(n)?;
        let exprs: Vec<LatticeExpr> = (1..=n)
            .map(|k| {
                let single = LatticeExpr::gen(subset_generator(&[k]));
                match kind {
                    InstanceKind::Disjoint => single,
                    InstanceKind::Perturbed => {
                        let w = 0.5f64.powi(k as i32);
                        let prefix: Vec<usize> = (1..=k).collect();
                        LatticeExpr::scale(
                            1.0 / (1.0 + w),
                            LatticeExpr::sum(single, LatticeExpr::scale(w, LatticeExpr::gen(subset_generator(&prefix)))),
                        )
                    }
                }
            })
            .collect();
        let compiled = exprs
            .iter()
            .map(|e| e.compile(&phi.generators))
            .collect::<Result<_>>()?;
        Ok(DemoFamily {
            kind,
            phi,
            exprs,
            compiled,
        })
    }
}

impl SequenceFamily for DemoFamily {
    fn generators(&self) -> &[GeneratorId] {
        &self.phi.generators
    }
    fn n_max(&self) -> usize {
        self.phi.n
    }
    fn eval(&self, n: usize, p: &[f64]) -> f64 {
        self.compiled[n - 1].eval(p)
    }
    fn point(&self, n: usize) -> Vec<f64> {
        self.phi.chi_points[n - 1].clone()
    }
    fn expr(&self, n: usize) -> Option<LatticeExpr> {
        Some(self.exprs[n - 1].clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCall {
    /// `"exists"` or `"tail"`.
    pub query: String,
    pub stage: usize,
    pub after: usize,
    pub result: Option<usize>,
    pub scanned: usize,
}

/// Finite stand-in for hypotheses (1) and (3): answers index queries over
/// the truncation `1..=n_max`.
pub trait DecayOracle {
    /// Smallest `n > after` whose point vanishes on `coords`.
    fn first_vanishing(&mut self, fam: &dyn SequenceFamily, stage: usize, after: usize, coords: &[usize]) -> Option<usize>;
    /// Smallest `ν` in `(after, limit]` with `ok(n)` for every `n` in `[ν, limit]`.
    fn tail_start(&mut self, stage: usize, after: usize, limit: usize, ok: &dyn Fn(usize) -> bool) -> Option<usize>;
    fn transcript(&self) -> Vec<OracleCall>;
}

/// Exhaustive scan of the truncation.
#[derive(Debug, Default)]
pub struct ScanOracle {
    calls: Vec<OracleCall>,
}

impl DecayOracle for ScanOracle {
    fn first_vanishing(&mut self, fam: &dyn SequenceFamily, stage: usize, after: usize, coords: &[usize]) -> Option<usize> {
        let mut scanned = 0;
        let mut found = None;
        for n in after + 1..=fam.n_max() {
            scanned += 1;
            let x = fam.point(n);
            if coords.iter().all(|&c| x[c] == 0.0) {
                found = Some(n);
                break;
            }
        }
        self.calls.push(OracleCall {
            query: "exists".into(),
            stage,
            after,
            result: found,
            scanned,
        });
        found
    }

    fn tail_start(&mut self, stage: usize, after: usize, limit: usize, ok: &dyn Fn(usize) -> bool) -> Option<usize> {
        let mut scanned = 0;
        let mut start = after + 1;
        for n in (after + 1..=limit).rev() {
            scanned += 1;
            if !ok(n) {
                start = n + 1;
                break;
            }
        }
        let found = (start <= limit).then_some(start);
        self.calls.push(OracleCall {
            query: "tail".into(),
            stage,
            after,
            result: found,
            scanned,
        });
        found
    }

    fn transcript(&self) -> Vec<OracleCall> {
        self.calls.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exhaustion {
    /// `"a"` (no vanishing index left) or `"b"` (no tail satisfies the schedule).
    pub stage: String,
    pub reached: usize,
    pub requested: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub epsilon: f64,
    /// First pass indices `m_1 < m_2 < ...`.
    pub m: Vec<usize>,
    /// Positions `ν_p` (1-based) into `m`.
    pub nu: Vec<usize>,
    /// Selected indices `n_k = m_{ν_k}`.
    pub selected: Vec<usize>,
    /// `F_{n_k}` for each selected index.
    pub f_sets: Vec<Vec<GeneratorId>>,
    /// Nonzero entries of `y*_{n_k}`.
    pub y_star: Vec<BTreeMap<GeneratorId, f64>>,
    /// `|f_{n_k}(y*_{n_k}) - 1|`.
    pub diagonal_deviation: Vec<f64>,
    /// How each `F` was found.
    pub f_search: String,
    pub transcript: Vec<OracleCall>,
    pub exhausted: Option<Exhaustion>,
}

impl ExtractionResult {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn dense_y(&self, gens: &[GeneratorId]) -> Vec<Vec<f64>> {
        self.y_star
            .iter()
            .map(|y| gens.iter().map(|g| y.get(g).copied().unwrap_or(0.0)).collect())
            .collect()
    }

    /// No coordinate is used by two different `y*`.
    pub fn is_disjoint(&self) -> bool {
        for i in 0..self.y_star.len() {
            for j in i + 1..self.y_star.len() {
                if self.y_star[i].keys().any(|g| self.y_star[j].contains_key(g)) {
                    return false;
                }
            }
        }
        true
    }

    /// The certificate family is admissible in the free lattice over `gens`.
    pub fn is_admissible(&self, gens: &[GeneratorId]) -> Result<bool> {
        let space = AdmissibilitySpace::l1(gens.to_vec())?;
        Ok(admissible(&self.dense_y(gens), &space)?.admissible)
    }
}

fn truncate(x: &[f64], coords: &[usize]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for &c in coords {
        y[c] = x[c];
    }
    y
}

/// Grows `base` by the nonzero coordinates of `x` in order of decreasing
/// `|x|` (ties by generator order) until `|f(y) - 1| <= tol`, then prunes
/// added coordinates (latest first) whose removal keeps the bound. Pruning
/// keeps `F` small so later points can still vanish on it.
fn grow_f(f: impl Fn(&[f64]) -> f64, x: &[f64], base: &[usize], tol: f64) -> Option<(Vec<usize>, Vec<f64>, f64)> {
    let dev = |coords: &[usize]| (f(&truncate(x, coords)) - 1.0).abs();
    let mut coords = base.to_vec();
    let mut rank: Vec<usize> = (0..x.len())
        .filter(|&c| x[c] != 0.0 && !base.contains(&c))
        .collect();
    rank.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut next = rank.into_iter();
    while dev(&coords) > tol {
        coords.push(next.next()?);
    }
    let mut i = coords.len();
    while i > base.len() {
        i -= 1;
        let mut trial = coords.clone();
        trial.remove(i);
        if dev(&trial) <= tol {
            coords = trial;
        }
    }
    let y = truncate(x, &coords);
    let d = dev(&coords);
    Some((coords, y, d))
}

/// Runs both passes and returns as many terms as the truncation permits.
/// `requested` only decides whether an exhaustion report is attached.
pub fn extract(
    fam: &dyn SequenceFamily,
    sched: &EpsilonSchedule,
    requested: usize,
    oracle: &mut dyn DecayOracle,
) -> Result<ExtractionResult> {
    schedule(sched.epsilon)?;
    let gens = fam.generators();
    let n_max = fam.n_max();
    for n in 1..=n_max {
        let x = fam.point(n);
        if x.len() != gens.len() || x.iter().any(|v| !(v.abs() <= 1.0)) {
            return Err(Error::Hypothesis(format!("x_{n}* is not a point of the cube")));
        }
        let v = fam.eval(n, &x);
        if (v - 1.0).abs() > HYPOTHESIS_TOL {
            return Err(Error::Hypothesis(format!("f_{n}(x_{n}*) = {v}, expected 1")));
        }
    }

    // pass (a)
    let mut m: Vec<usize> = Vec::new();
    let mut f_sets: Vec<Vec<usize>> = Vec::new();
    let mut ys: Vec<Vec<f64>> = Vec::new();
    let mut devs: Vec<f64> = Vec::new();
    let mut stage_a_exhausted = false;
    while m.len() < n_max {
        let k = m.len() + 1;
        let prev: &[usize] = f_sets.last().map_or(&[], |f| f.as_slice());
        let mk = if k == 1 {
            1
        } else {
            match oracle.first_vanishing(fam, k, *m.last().expect("k > 1"), prev) {
                Some(n) => n,
                None => {
                    stage_a_exhausted = true;
                    break;
                }
            }
        };
        let x = fam.point(mk);
        let (coords, y, dev) = grow_f(|p| fam.eval(mk, p), &x, prev, sched.entry(k, k)).ok_or_else(|| {
            Error::Hypothesis(format!("no finite coordinate set brings f_{mk} within ε_{k}{k} of one"))
        })?;
        m.push(mk);
        f_sets.push(coords);
        ys.push(y);
        devs.push(dev);
    }

    // pass (b)
    let kk = m.len();
    let mut nu: Vec<usize> = Vec::new();
    let mut stage_b_exhausted = false;
    if kk > 0 {
        nu.push(1);
    }
    while !nu.is_empty() && nu.len() < kk {
        let p = nu.len();
        let chosen = nu.clone();
        let ok = |n: usize| {
            chosen.iter().enumerate().all(|(jj, &vj)| {
                let eps = sched.entry(jj + 1, p + 1);
                let a = fam.eval(m[n - 1], &ys[vj - 1]).abs();
                let b = fam.eval(m[vj - 1], &ys[n - 1]).abs();
                a <= eps && b <= eps
            })
        };
        match oracle.tail_start(p + 1, *nu.last().expect("nonempty"), kk, &ok) {
            Some(v) => nu.push(v),
            None => {
                stage_b_exhausted = true;
                break;
            }
        }
    }

    let exhausted = if nu.len() >= requested {
        None
    } else {
        Some(Exhaustion {
            stage: if stage_b_exhausted || (!stage_a_exhausted && kk >= requested) {
                "b".into()
            } else {
                "a".into()
            },
            reached: nu.len(),
            requested,
        })
    };
    let pick = |v: &usize| v - 1;
    Ok(ExtractionResult {
        epsilon: sched.epsilon,
        selected: nu.iter().map(|v| m[pick(v)]).collect(),
        f_sets: nu
            .iter()
            .map(|v| f_sets[pick(v)].iter().map(|&c| gens[c].clone()).collect())
            .collect(),
        y_star: nu
            .iter()
            .map(|v| {
                ys[pick(v)]
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(c, &x)| (gens[c].clone(), x))
                    .collect()
            })
            .collect(),
        diagonal_deviation: nu.iter().map(|v| devs[pick(v)]).collect(),
        m,
        nu,
        f_search: "greedy+prune".into(),
        transcript: oracle.transcript(),
        exhausted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub certified_value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `Σ_i |Σ_k λ_k f_{n_k}(y*_i)|` over the first `len(λ)` certificate points,
/// compared with `(1 - ε) Σ |λ_k|`.
pub fn verify_lower_bound(res: &ExtractionResult, fam: &dyn SequenceFamily, lambdas: &[f64]) -> Result<LowerBoundReport> {
    if lambdas.len() > res.len() {
        return Err(Error::OutOfRange(format!(
            "{} coefficients for {} extracted terms",
            lambdas.len(),
            res.len()
        )));
    }
    let ys = res.dense_y(fam.generators());
    let certified_value: f64 = ys[..lambdas.len()]
        .iter()
        .map(|y| {
            lambdas
                .iter()
                .zip(&res.selected)
                .map(|(l, &n)| l * fam.eval(n, y))
                .sum::<f64>()
                .abs()
        })
        .sum();
    let bound = (1.0 - res.epsilon) * lambdas.iter().map(|l| l.abs()).sum::<f64>();
    Ok(LowerBoundReport {
        certified_value,
        bound,
        pass: certified_value >= bound - 1e-9,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    pub count: usize,
    pub length: usize,
    /// Smallest `certified_value - bound` over all vectors.
    pub worst_margin: f64,
    pub failures: usize,
    pub pass: bool,
}

/// [`verify_lower_bound`] on `count` seeded random `λ ∈ [-2, 2]^len`.
pub fn verify_random_lambdas(res: &ExtractionResult, fam: &dyn SequenceFamily, len: usize, count: usize, seed: u64) -> Result<LambdaSweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambdas: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..len).map(|_| rng.gen_range(-2.0..=2.0)).collect())
        .collect();
    let reports = lambdas
        .iter()
        .map(|l| verify_lower_bound(res, fam, l))
        .collect::<Result<Vec<_>>>()?;
    let failures = reports.iter().filter(|r| !r.pass).count();
    Ok(LambdaSweep {
        count,
        length: len,
        worst_margin: reports
            .iter()
            .map(|r| r.certified_value - r.bound)
            .fold(f64::INFINITY, f64::min),
        failures,
        pass: failures == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::gids;

    fn run(kind: InstanceKind, n: usize, eps: f64, len: usize) -> (DemoFamily, ExtractionResult) {
        let fam = DemoFamily::new(kind, n).unwrap();
        let res = extract(&fam, &schedule(eps).unwrap(), len, &mut ScanOracle::default()).unwrap();
        (fam, res)
    }

    #[test]
    fn schedule_examples() {
        let s = schedule(0.5).unwrap();
        assert_eq!(s.entry(1, 1), 0.125);
        assert_eq!(s.entry(1, 2), s.entry(2, 1));
        assert!(s.partial_sum(30) >= 0.5 - 1e-8);
        assert!(s.partial_sum(20) <= 0.5);
        assert!(schedule(0.0).is_err());
        assert!(schedule(1.0).is_err());
    }

    #[test]
    fn disjoint_instance_gives_unit_vectors() {
        let (fam, res) = run(InstanceKind::Disjoint, 8, 0.1, 4);
        assert!(res.exhausted.is_none());
        assert!(res.len() >= 4);
        for (k, y) in res.y_star.iter().enumerate() {
            let g = subset_generator(&[res.selected[k]]);
            assert_eq!(y.len(), 1);
            assert_eq!(y.get(&g), Some(&1.0));
            assert_eq!(res.diagonal_deviation[k], 0.0);
        }
        assert!(res.is_disjoint());
        assert!(res.is_admissible(fam.generators()).unwrap());
        let r = verify_lower_bound(&res, &fam, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.certified_value, 4.0);
        assert!(r.pass);
        let r = verify_lower_bound(&res, &fam, &[1.0, -1.0, 2.0, -2.0]).unwrap();
        assert_eq!(r.certified_value, 6.0);
        let r = verify_lower_bound(&res, &fam, &[0.0; 4]).unwrap();
        assert!(r.pass && r.certified_value == 0.0);
    }

    /// Smallest `F ⊇ base` meeting the tolerance, by brute force over the
    /// coordinates `f_n` reads, to confirm that a valid set exists.
    fn brute_force_min_f(fam: &DemoFamily, n: usize, base: &[usize], tol: f64) -> Option<usize> {
        let x = fam.point(n);
        let used = fam.expr(n).unwrap().support();
        let gens = fam.generators();
        let support: Vec<usize> = (0..x.len())
            .filter(|&c| x[c] != 0.0 && !base.contains(&c) && used.contains(&gens[c]))
            .collect();
        assert!(support.len() <= 16);
        (0u32..(1 << support.len()))
            .filter(|mask| {
                let mut coords = base.to_vec();
                coords.extend(support.iter().enumerate().filter(|(b, _)| mask & (1 << b) != 0).map(|(_, &c)| c));
                (fam.eval(n, &truncate(&x, &coords)) - 1.0).abs() <= tol
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
    }

    #[test]
    fn perturbed_instance_meets_tolerances() {
        let (fam, res) = run(InstanceKind::Perturbed, 10, 0.2, 3);
        assert!(res.exhausted.is_none());
        let s = schedule(0.2).unwrap();
        for (k, &dev) in res.diagonal_deviation.iter().enumerate() {
            assert!(dev <= s.entry(k + 1, k + 1));
        }
        assert!(res.is_disjoint());
        assert!(res.is_admissible(fam.generators()).unwrap());
        // a valid F exists for the first few stages
        let gens = fam.generators();
        for k in 0..3 {
            let base: Vec<usize> = if k == 0 {
                vec![]
            } else {
                res.f_sets[k - 1].iter().map(|g| gens.iter().position(|h| h == g).unwrap()).collect()
            };
            assert!(brute_force_min_f(&fam, res.selected[k], &base, s.entry(k + 1, k + 1)).is_some());
        }
        assert!(verify_lower_bound(&res, &fam, &[1.0, -0.5, 2.0]).unwrap().pass);
        let sweep = verify_random_lambdas(&res, &fam, 3, 100, 7).unwrap();
        assert!(sweep.pass && sweep.worst_margin >= -1e-9);
    }

    #[test]
    fn perturbed_instance_reaches_four_terms_at_every_epsilon() {
        for eps in [0.05, 0.1, 0.2] {
            let (fam, res) = run(InstanceKind::Perturbed, 8, eps, 4);
            assert!(res.exhausted.is_none(), "eps {eps}: {:?}", res.exhausted);
            assert!(res.len() >= 4, "eps {eps}: {:?}", res.selected);
            assert!(res.is_disjoint());
            assert!(res.is_admissible(fam.generators()).unwrap());
            let sweep = verify_random_lambdas(&res, &fam, 4, 100, 11).unwrap();
            assert!(sweep.pass, "eps {eps}: {sweep:?}");
        }
    }

    /// Family with slowly decaying cross terms so that pass (b) must skip.
    struct Leaky {
        gens: Vec<GeneratorId>,
    }

    impl SequenceFamily for Leaky {
        fn generators(&self) -> &[GeneratorId] {
            &self.gens
        }
        fn n_max(&self) -> usize {
            self.gens.len()
        }
        fn eval(&self, n: usize, p: &[f64]) -> f64 {
            // coordinate n plus a leak onto coordinate 1
            let leak = if n == 1 { 0.0 } else { 1.0 / n as f64 };
            p[n - 1] + leak * p[0]
        }
        fn point(&self, n: usize) -> Vec<f64> {
            let mut x = vec![0.0; self.gens.len()];
            x[n - 1] = 1.0;
            x
        }
    }

    #[test]
    fn second_pass_skips_leaky_indices() {
        let names: Vec<String> = (1..=40).map(|k| format!("g{k}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let fam = Leaky { gens: gids(&refs) };
        let sched = schedule(0.5).unwrap();
        let mut oracle = ScanOracle::default();
        let res = extract(&fam, &sched, 2, &mut oracle).unwrap();
        assert_eq!(res.m, (1..=40).collect::<Vec<_>>());
        // |f_n(y_1)| = 1/n <= ε_12 = 0.0625 first holds for n >= 16
        assert_eq!(res.selected[..2], [1, 16]);
        assert!(res.transcript.iter().any(|c| c.query == "tail"));
        assert!(verify_lower_bound(&res, &fam, &[1.0, -1.0]).unwrap().pass);
    }

    #[test]
    fn exhaustion_is_reported() {
        let (_, res) = run(InstanceKind::Disjoint, 3, 0.1, 5);
        let ex = res.exhausted.unwrap();
        assert_eq!(ex.reached, 3);
        assert_eq!(ex.stage, "a");
    }

    #[test]
    fn hypothesis_violation_is_detected() {
        struct Bad(Vec<GeneratorId>);
        impl SequenceFamily for Bad {
            fn generators(&self) -> &[GeneratorId] {
                &self.0
            }
            fn n_max(&self) -> usize {
                1
            }
            fn eval(&self, _: usize, p: &[f64]) -> f64 {
                2.0 * p[0]
            }
            fn point(&self, _: usize) -> Vec<f64> {
                vec![1.0]
            }
        }
        let r = extract(&Bad(gids(&["a"])), &schedule(0.1).unwrap(), 1, &mut ScanOracle::default());
        assert!(matches!(r, Err(Error::Hypothesis(_))));
    }
}
