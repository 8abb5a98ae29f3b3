//! Lattice section `S: C(K) -> FBL({1̄, id})` for finite unions of closed
//! intervals `K ⊆ [0,1]`.
//!
//! Coordinates are `s = x_{1̄}` and `t = x_{id}`. With `v(s,t) = (1, clip(t/s))`,
//! a neighbourhood weight `u` and a retraction `φ` onto `K`, the section is
//! `Sh(s,t) = h(φ(v)) · u(v) · |s|`. On the slice `s = 1` the factor
//! `g(r) = h(φ(1,r)) · u(1,r)` is piecewise linear in `r`, so `Sh` is linear
//! on every cone between consecutive rays `t = b·s`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::GeneratorId;
use crate::fblnorm::{exact_fbl_norm, AdmissibilitySpace, Evaluator, ExactOptions, NormBracket};
use crate::plfan::{Cone, Fan, FanOptions, PLFunction, PLFunctionJson, PlOp};

/// Tolerance for the section identity on intervals (exact for two points).
pub const SECTION_TOL: f64 = 1e-12;
/// Widest grid table accepted by [`finite_coordinate_approximant`].
pub const APPROX_MAX_ENTRIES: usize = 1 << 22;

pub const ONE: &str = "one";
pub const ID: &str = "id";

/// The generators `1̄` and `id`, in that order.
pub fn section_generators() -> Vec<GeneratorId> {
    vec![
        GeneratorId::new(ONE).expect("valid name"),
        GeneratorId::new(ID).expect("valid name"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "intervals")]
pub enum KSpec {
    Interval01,
    TwoPoints,
    /// Disjoint, ordered closed intervals `[a, b]` in `[0,1]`; `a = b` allowed.
    UnionOfIntervals(Vec<(f64, f64)>),
}

impl KSpec {
    /// Components as closed intervals.
    pub fn components(&self) -> Vec<(f64, f64)> {
        match self {
            KSpec::Interval01 => vec![(0.0, 1.0)],
            KSpec::TwoPoints => vec![(0.0, 0.0), (1.0, 1.0)],
            KSpec::UnionOfIntervals(v) => v.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.components();
        if c.is_empty() {
            return Err(Error::Unsupported("K must be nonempty".into()));
        }
        for (i, &(a, b)) in c.iter().enumerate() {
            if !(0.0 <= a && a <= b && b <= 1.0) {
                return Err(Error::Unsupported(format!("[{a}, {b}] is not a subinterval of [0,1]")));
            }
            if i > 0 && !(c[i - 1].1 < a) {
                return Err(Error::Unsupported("intervals must be disjoint and ordered".into()));
            }
        }
        Ok(())
    }

    pub fn contains(&self, k: f64) -> bool {
        self.components().iter().any(|&(a, b)| a <= k && k <= b)
    }

    /// Gaps `(b_i, a_{i+1})` as `(midpoint, half-width, left end, right end)`.
    fn gaps(&self) -> Vec<(f64, f64, f64, f64)> {
        self.components()
            .windows(2)
            .map(|w| {
                let (l, r) = (w[0].1, w[1].0);
                ((l + r) / 2.0, (r - l) / 2.0, l, r)
            })
            .collect()
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let c = self.components();
        let (a, b) = c[rng.gen_range(0..c.len())];
        if a == b {
            a
        } else {
            rng.gen_range(a..=b)
        }
    }
}

/// Continuous piecewise-linear `h` on `K`: linear interpolation through the
/// points, constant beyond the first and last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFunction {
    pub points: Vec<(f64, f64)>,
}

impl TargetFunction {
    pub fn new(mut points: Vec<(f64, f64)>, k: &KSpec) -> Result<Self> {
        k.validate()?;
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.is_empty() {
            return Err(Error::OutOfRange("h needs at least one breakpoint".into()));
        }
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::OutOfRange(format!("breakpoint {} repeated", w[0].0)));
            }
        }
        for &(x, y) in &points {
            if !k.contains(x) {
                return Err(Error::OutOfRange(format!("breakpoint {x} lies outside K")));
            }
            if !y.is_finite() {
                return Err(Error::OutOfRange(format!("h({x}) is not finite")));
            }
        }
        Ok(TargetFunction { points })
    }

    pub fn zero(k: &KSpec) -> Result<Self> {
        Self::new(vec![(k.components()[0].0, 0.0)], k)
    }

    pub fn value(&self, k: f64) -> f64 {
        let p = &self.points;
        if k <= p[0].0 {
            return p[0].1;
        }
        if k >= p[p.len() - 1].0 {
            return p[p.len() - 1].1;
        }
        let j = p.partition_point(|q| q.0 <= k);
        let ((x0, y0), (x1, y1)) = (p[j - 1], p[j]);
        if k == x0 {
            return y0;
        }
        y0 + (k - x0) * (y1 - y0) / (x1 - x0)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    /// `‖h‖_∞` over `K`.
    pub fn sup_norm(&self, k: &KSpec) -> f64 {
        let mut xs = self.breakpoints();
        for (a, b) in k.components() {
            xs.push(a);
            xs.push(b);
        }
        xs.into_iter()
            .filter(|&x| k.contains(x))
            .map(|x| self.value(x).abs())
            .fold(0.0, f64::max)
    }

    /// Pointwise `h op other` on `K`, with crossings added for joins and meets.
    pub fn pointwise(&self, other: &TargetFunction, op: PlOp, k: &KSpec) -> Result<Self> {
        let apply = |a: f64, b: f64| match op {
            PlOp::Sum => a + b,
            PlOp::Join => a.max(b),
            PlOp::Meet => a.min(b),
        };
        let mut xs: Vec<f64> = Vec::new();
        for (a, b) in k.components() {
            let mut local: Vec<f64> = self
                .breakpoints()
                .into_iter()
                .chain(other.breakpoints())
                .filter(|&x| a <= x && x <= b)
                .chain([a, b])
                .collect();
            local.sort_by(f64::total_cmp);
            local.dedup();
            let mut with_cross = Vec::new();
            for w in local.windows(2) {
                with_cross.push(w[0]);
                let d0 = self.value(w[0]) - other.value(w[0]);
                let d1 = self.value(w[1]) - other.value(w[1]);
                if op != PlOp::Sum && d0 * d1 < 0.0 {
                    let x = w[0] + (w[1] - w[0]) * d0 / (d0 - d1);
                    if x > w[0] && x < w[1] {
                        with_cross.push(x);
                    }
                }
            }
            with_cross.push(*local.last().expect("nonempty"));
            xs.extend(with_cross);
        }
        xs.dedup();
        let points = xs
            .into_iter()
            .map(|x| (x, apply(self.value(x), other.value(x))))
            .collect();
        Self::new(points, k)
    }

    pub fn scaled(&self, c: f64) -> Self {
        TargetFunction {
            points: self.points.iter().map(|&(x, y)| (x, c * y)).collect(),
        }
    }
}

fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Neighbourhood weight on the slice: 1 on `K`, scaled distance to the gap
/// midpoint inside each gap.
pub fn u_slice(k: &KSpec, t: f64) -> f64 {
    let c = clip(t, 0.0, 1.0);
    for (m, w, l, r) in k.gaps() {
        if l < c && c < r {
            return ((c - m).abs() / w).min(1.0);
        }
    }
    1.0
}

/// Retraction onto `K` on the slice (nearest point); `None` at gap midpoints.
pub fn phi_slice(k: &KSpec, t: f64) -> Option<f64> {
    let c = clip(t, 0.0, 1.0);
    let comps = k.components();
    if c < comps[0].0 {
        return Some(comps[0].0);
    }
    if c > comps[comps.len() - 1].1 {
        return Some(comps[comps.len() - 1].1);
    }
    for (m, _, l, r) in k.gaps() {
        if l < c && c < r {
            return match c.total_cmp(&m) {
                std::cmp::Ordering::Less => Some(l),
                std::cmp::Ordering::Greater => Some(r),
                std::cmp::Ordering::Equal => None,
            };
        }
    }
    Some(c)
}

/// `v(s,t) = (1, clip(t/s, -1, 1))`, undefined at `s = 0`.
pub fn v_map(s: f64, t: f64) -> Option<[f64; 2]> {
    (s != 0.0).then(|| [1.0, clip(t / s, -1.0, 1.0)])
}

#[derive(Debug, Clone)]
pub struct SectionBundle {
    pub k: KSpec,
    pub h: TargetFunction,
    pub generators: Vec<GeneratorId>,
    /// Breakpoints of `g` in `[-1, 1]`.
    pub knots: Vec<f64>,
    /// `g` at each knot.
    pub knot_values: Vec<f64>,
    pub sh: PLFunction<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionSummary {
    pub k: KSpec,
    pub h: TargetFunction,
    pub generators: Vec<GeneratorId>,
    pub knots: Vec<f64>,
    pub knot_values: Vec<f64>,
    pub cells: usize,
    pub sh: PLFunctionJson,
}

impl SectionBundle {
    /// `u(v(x))` evaluated on a slice point.
    pub fn u_eval(&self, y: [f64; 2]) -> f64 {
        u_slice(&self.k, y[1])
    }

    pub fn phi_eval(&self, y: [f64; 2]) -> Option<f64> {
        phi_slice(&self.k, y[1])
    }

    pub fn v_eval(&self, s: f64, t: f64) -> Option<[f64; 2]> {
        v_map(s, t)
    }

    /// `f = (h∘φ∘v)·(u∘v)`, zero where `s = 0` or `u(v) = 0`.
    pub fn f_eval(&self, s: f64, t: f64) -> f64 {
        let Some(y) = self.v_eval(s, t) else {
            return 0.0;
        };
        let u = self.u_eval(y);
        if u == 0.0 {
            return 0.0;
        }
        match self.phi_eval(y) {
            Some(k) => self.h.value(k) * u,
            None => 0.0,
        }
    }

    /// `Sh` by composing the maps pointwise.
    pub fn sh_pipeline(&self, s: f64, t: f64) -> f64 {
        self.f_eval(s, t) * s.abs()
    }

    /// `f` on the slice `{s = 1}`.
    pub fn f_slice(&self, t: f64) -> f64 {
        self.f_eval(1.0, t)
    }

    pub fn sh_eval(&self, s: f64, t: f64) -> f64 {
        self.sh.eval(&[s, t])
    }

    pub fn summary(&self) -> SectionSummary {
        SectionSummary {
            k: self.k.clone(),
            h: self.h.clone(),
            generators: self.generators.clone(),
            knots: self.knots.clone(),
            knot_values: self.knot_values.clone(),
            cells: self.sh.fan.cells.len(),
            sh: self.sh.to_json_repr(),
        }
    }
}

/// `g(r)` from the knot table, linear between knots and constant beyond `±1`.
fn knot_piece(knots: &[f64], vals: &[f64], r: f64) -> (f64, f64) {
    let n = knots.len();
    if r >= knots[n - 1] {
        return (vals[n - 1], 0.0);
    }
    if r <= knots[0] {
        return (vals[0], 0.0);
    }
    let j = knots.partition_point(|&k| k <= r).clamp(1, n - 1);
    let beta = (vals[j] - vals[j - 1]) / (knots[j] - knots[j - 1]);
    (vals[j - 1] - beta * knots[j - 1], beta)
}

pub fn build_section(k: &KSpec, h: &TargetFunction) -> Result<SectionBundle> {
    k.validate()?;
    let h = TargetFunction::new(h.points.clone(), k)?;
    let mut knots: Vec<f64> = vec![-1.0, 0.0, 1.0];
    for (a, b) in k.components() {
        knots.extend([a, b]);
    }
    knots.extend(k.gaps().iter().map(|g| g.0));
    knots.extend(h.breakpoints());
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let generators = section_generators();
    let mut bundle = SectionBundle {
        k: k.clone(),
        h,
        generators: generators.clone(),
        knots: knots.clone(),
        knot_values: Vec::new(),
        sh: PLFunction::linear(&generators, vec![0.0, 0.0])?,
    };
    bundle.knot_values = knots.iter().map(|&r| bundle.f_slice(r)).collect();

    // rays t = b·s for every knot, plus s = 0
    let mut hyperplanes: Vec<Vec<f64>> = vec![vec![1.0, 0.0]];
    hyperplanes.extend(knots.iter().map(|&b| vec![-b, 1.0]));
    let fan = Fan::arrangement(&hyperplanes, &generators, &FanOptions::default())?;
    let pieces = fan
        .cells
        .iter()
        .map(|c: &Cone<f64>| {
            let (s, t) = (c.witness[0], c.witness[1]);
            let sigma = s.signum();
            let (alpha, beta) = knot_piece(&bundle.knots, &bundle.knot_values, t / s);
            vec![sigma * alpha, sigma * beta]
        })
        .collect();
    bundle.sh = PLFunction::from_parts(fan, pieces)?;
    Ok(bundle)
}

/// Largest `|Sh_PL - Sh_pipeline|` over a `grid × grid` lattice of `[-1,1]^2`.
pub fn pipeline_deviation(b: &SectionBundle, grid: usize) -> f64 {
    let step = 2.0 / (grid.max(2) - 1) as f64;
    (0..grid)
        .into_par_iter()
        .map(|i| {
            let s = -1.0 + i as f64 * step;
            (0..grid)
                .map(|j| {
                    let t = -1.0 + j as f64 * step;
                    (b.sh_eval(s, t) - b.sh_pipeline(s, t)).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionReport {
    pub checked: usize,
    pub max_residual: f64,
    pub worst_k: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// `Sh(1, k) = h(k)` at all breakpoints, component ends and `samples` random `k ∈ K`.
pub fn verify_section(b: &SectionBundle, samples: usize, seed: u64) -> SectionReport {
    let mut ks = b.h.breakpoints();
    for (lo, hi) in b.k.components() {
        ks.extend([lo, hi]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ks.extend((0..samples).map(|_| b.k.sample(&mut rng)));
    let tolerance = if b.k == KSpec::TwoPoints { 0.0 } else { SECTION_TOL };
    let mut worst: Option<(f64, f64)> = None;
    for &k in &ks {
        let r = (b.sh_eval(1.0, k) - b.h.value(k)).abs();
        if worst.map_or(true, |(w, _)| r > w) {
            worst = Some((r, k));
        }
    }
    let max_residual = worst.map_or(0.0, |w| w.0);
    SectionReport {
        checked: ks.len(),
        max_residual,
        worst_k: worst.map(|w| w.1),
        tolerance,
        pass: max_residual <= tolerance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBoundReport {
    /// Always `"two-generator"`: the norm is taken over `{1̄, id}` only and
    /// says nothing about richer generator sets.
    pub scope: String,
    pub generators: Vec<GeneratorId>,
    pub norm: f64,
    pub h_sup: f64,
    /// `max |f|` over sampled slice points.
    pub f_sup_sampled: f64,
    pub pass: bool,
    pub bracket: NormBracket,
}

/// `‖Sh‖ <= ‖h‖_∞` in the free lattice over `{1̄, id}`.
pub fn verify_norm_bound(b: &SectionBundle) -> Result<NormBoundReport> {
    let space = AdmissibilitySpace::l1(b.generators.clone())?;
    let bracket = exact_fbl_norm(&b.sh, &space, &ExactOptions::default())?;
    let h_sup = b.h.sup_norm(&b.k);
    let f_sup_sampled = (0..=2000)
        .map(|i| b.f_slice(-1.0 + i as f64 / 1000.0).abs())
        .chain(b.knots.iter().map(|&r| b.f_slice(r).abs()))
        .fold(0.0, f64::max);
    Ok(NormBoundReport {
        scope: "two-generator".into(),
        generators: b.generators.clone(),
        norm: bracket.upper,
        h_sup,
        f_sup_sampled,
        pass: bracket.upper <= h_sup + 1e-9,
        bracket,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub samples: usize,
    pub max_homogeneity_deviation: f64,
    /// Largest `|Sh(s,t)| - ‖h‖_∞·|s|`, nonpositive when the bound holds.
    pub max_continuity_excess: f64,
    pub pass: bool,
}

/// `Sh(λx) = λ·Sh(x)` and `|Sh(s,t)| <= ‖h‖_∞·|s|` on random points.
pub fn verify_homogeneity(b: &SectionBundle, samples: usize, seed: u64) -> HomogeneityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hs = b.h.sup_norm(&b.k);
    let mut hom: f64 = 0.0;
    let mut cont = f64::NEG_INFINITY;
    for _ in 0..samples {
        let s: f64 = rng.gen_range(-1.0..=1.0);
        let t: f64 = rng.gen_range(-1.0..=1.0);
        let lambda: f64 = 1.0 - rng.gen::<f64>();
        let v = b.sh_eval(s, t);
        hom = hom.max((b.sh_eval(lambda * s, lambda * t) - lambda * v).abs());
        cont = cont.max(v.abs() - hs * s.abs());
    }
    HomogeneityReport {
        samples,
        max_homogeneity_deviation: hom,
        max_continuity_excess: cont.max(0.0),
        pass: hom <= SECTION_TOL && cont <= SECTION_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawCheck {
    pub pair: usize,
    /// `"join"`, `"meet"`, `"sum"`, `"scale"` or `"idempotent"`.
    pub law: String,
    pub pl_equal: bool,
    pub sampled_deviation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionLawReport {
    pub checks: Vec<LawCheck>,
    pub samples: usize,
    pub pass: bool,
}

fn sampled_gap(f: &PLFunction<f64>, g: &PLFunction<f64>, pts: &[[f64; 2]]) -> f64 {
    pts.par_iter()
        .map(|p| (f.eval(p) - g.eval(p)).abs())
        .reduce(|| 0.0, f64::max)
}

/// Compares `S(h₁ op h₂)` with `S(h₁) op S(h₂)` and `S(λh)` with `λS(h)`,
/// first as PL functions, then on `samples` random points of `[-1,1]^2`.
pub fn verify_hom_laws(k: &KSpec, pairs: &[(TargetFunction, TargetFunction)], samples: usize, seed: u64) -> Result<SectionLawReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 2]> = (0..samples)
        .map(|_| [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)])
        .collect();
    let opts = FanOptions::default();
    let mut checks = Vec::new();
    for (idx, (h1, h2)) in pairs.iter().enumerate() {
        let s1 = build_section(k, h1)?;
        let s2 = build_section(k, h2)?;
        let mut cases: Vec<(&str, PLFunction<f64>, PLFunction<f64>)> = Vec::new();
        for (name, op) in [("join", PlOp::Join), ("meet", PlOp::Meet), ("sum", PlOp::Sum)] {
            let direct = build_section(k, &h1.pointwise(h2, op, k)?)?.sh;
            cases.push((name, direct, s1.sh.combine(&s2.sh, op, &opts)?));
        }
        cases.push(("scale", build_section(k, &h1.scaled(-1.5))?.sh, s1.sh.scale(-1.5)));
        cases.push((
            "idempotent",
            build_section(k, &h1.pointwise(h1, PlOp::Join, k)?)?.sh,
            s1.sh.clone(),
        ));
        for (law, a, b) in cases {
            let pl_equal = a.equals(&b, &opts)?;
            let sampled_deviation = sampled_gap(&a, &b, &pts);
            checks.push(LawCheck {
                pair: idx,
                law: law.into(),
                pl_equal,
                sampled_deviation,
                pass: pl_equal || sampled_deviation <= SECTION_TOL,
            });
        }
    }
    Ok(SectionLawReport {
        pass: checks.iter().all(|c| c.pass),
        checks,
        samples,
    })
}

/// Multilinear interpolation of a slice function on a grid over finitely many
/// coordinates, pulled back along `v`.
#[derive(Debug, Clone)]
pub struct SliceApproximant {
    pub dims: Vec<GeneratorId>,
    pub one: usize,
    pub coords: Vec<usize>,
    pub grid: usize,
    values: Vec<f64>,
    /// `max |f_slice - f⁺|` over the sample points.
    pub deviation: f64,
    pub samples: usize,
}

/// Sample points used for the deviation estimate.
pub const APPROX_SAMPLES: usize = 4096;

fn grid_node(grid: usize, i: usize) -> f64 {
    -1.0 + 2.0 * i as f64 / (grid - 1) as f64
}

impl SliceApproximant {
    /// `f⁺(y)`, reading only the chosen coordinates of `y`.
    pub fn f_plus(&self, y: &[f64]) -> f64 {
        let m = self.coords.len();
        let mut base = Vec::with_capacity(m);
        let mut frac = Vec::with_capacity(m);
        for &c in &self.coords {
            let x = (clip(y[c], -1.0, 1.0) + 1.0) / 2.0 * (self.grid - 1) as f64;
            let i = (x.floor() as usize).min(self.grid - 2);
            base.push(i);
            frac.push(x - i as f64);
        }
        let mut total = 0.0;
        for corner in 0..(1usize << m) {
            let mut w = 1.0;
            let mut idx = 0;
            for j in 0..m {
                let up = corner >> j & 1 == 1;
                w *= if up { frac[j] } else { 1.0 - frac[j] };
                idx = idx * self.grid + base[j] + usize::from(up);
            }
            if w != 0.0 {
                total += w * self.values[idx];
            }
        }
        total
    }

    /// `f_n(x) = f⁺(v(x))`, zero where `x_{1̄} = 0`.
    pub fn f_n(&self, x: &[f64]) -> f64 {
        let s = x[self.one];
        if s == 0.0 {
            return 0.0;
        }
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| if i == self.one { 1.0 } else { clip(xi / s, -1.0, 1.0) })
            .collect();
        self.f_plus(&y)
    }
}

/// Builds `f⁺` from `f_slice` (an evaluator whose `1̄` coordinate is held at 1)
/// on a `grid`-point lattice over `coords`, all other coordinates at 0.
pub fn finite_coordinate_approximant(
    f_slice: &dyn Evaluator,
    one: &GeneratorId,
    coords: &[GeneratorId],
    grid: usize,
    seed: u64,
) -> Result<SliceApproximant> {
    let dims = f_slice.dims().to_vec();
    let pos = |g: &GeneratorId| {
        dims.iter()
            .position(|h| h == g)
            .ok_or_else(|| Error::MissingCoordinate(g.to_string()))
    };
    let one_idx = pos(one)?;
    let coord_idx: Vec<usize> = coords.iter().map(pos).collect::<Result<_>>()?;
    if coord_idx.contains(&one_idx) {
        return Err(Error::OutOfRange(format!("{one} is fixed on the slice")));
    }
    if grid < 2 {
        return Err(Error::OutOfRange(format!("grid {grid} must be at least 2")));
    }
    let entries = grid
        .checked_pow(coord_idx.len() as u32)
        .filter(|&e| e <= APPROX_MAX_ENTRIES)
        .ok_or_else(|| Error::OutOfRange(format!("grid {grid} over {} coordinates is too large", coord_idx.len())))?;
    let values: Vec<f64> = (0..entries)
        .into_par_iter()
        .map(|mut flat| {
            let mut p = vec![0.0; dims.len()];
            p[one_idx] = 1.0;
            for &c in coord_idx.iter().rev() {
                p[c] = grid_node(grid, flat % grid);
                flat /= grid;
            }
            f_slice.eval(&p)
        })
        .collect();
    let mut approx = SliceApproximant {
        dims: dims.clone(),
        one: one_idx,
        coords: coord_idx,
        grid,
        values,
        deviation: 0.0,
        samples: APPROX_SAMPLES,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..APPROX_SAMPLES)
        .map(|_| {
            (0..dims.len())
                .map(|i| if i == one_idx { 1.0 } else { rng.gen_range(-1.0..=1.0) })
                .collect()
        })
        .collect();
    approx.deviation = pts
        .par_iter()
        .map(|p| (f_slice.eval(p) - approx.f_plus(p)).abs())
        .reduce(|| 0.0, f64::max);
    Ok(approx)
}

/// The bundle's `f` on the slice as an evaluator over `{1̄, id}`.
pub struct SliceEvaluator<'a>(pub &'a SectionBundle);

impl Evaluator for SliceEvaluator<'_> {
    fn dims(&self) -> &[GeneratorId] {
        &self.0.generators
    }
    fn eval(&self, p: &[f64]) -> f64 {
        self.0.f_eval(p[0], p[1])
    }
    fn degree(&self) -> u32 {
        0
    }
}

/// Parses `interval`, `twopoints` or `union:a1,b1;a2,b2` (fractions allowed).
pub fn parse_kspec(text: &str) -> Result<KSpec> {
    let k = match text.trim() {
        "interval" => KSpec::Interval01,
        "twopoints" => KSpec::TwoPoints,
        other => {
            let body = other
                .strip_prefix("union:")
                .ok_or_else(|| Error::Unsupported(format!("unknown K {other:?}")))?;
            let intervals = body
                .split(';')
                .map(|iv| {
                    let ends: Vec<f64> = iv.split(',').map(parse_number).collect::<Result<_>>()?;
                    match ends[..] {
                        [a, b] => Ok((a, b)),
                        _ => Err(Error::Unsupported(format!("interval {iv:?} needs two ends"))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            KSpec::UnionOfIntervals(intervals)
        }
    };
    k.validate()?;
    Ok(k)
}

/// Parses `k:v,k:v,...`; for two points also `h0,h1`.
pub fn parse_target(text: &str, k: &KSpec) -> Result<TargetFunction> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let points = if !text.contains(':') && *k == KSpec::TwoPoints && parts.len() == 2 {
        vec![(0.0, parse_number(parts[0])?), (1.0, parse_number(parts[1])?)]
    } else {
        parts
            .iter()
            .map(|p| {
                let (x, y) = p
                    .split_once(':')
                    .ok_or_else(|| Error::OutOfRange(format!("breakpoint {p:?} is not k:value")))?;
                Ok((parse_number(x)?, parse_number(y)?))
            })
            .collect::<Result<Vec<_>>>()?
    };
    TargetFunction::new(points, k)
}

fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::OutOfRange(format!("{s:?} is not a number"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            Ok(p / q)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

/// Random PL target on `K` with dyadic breakpoints and values in `[-2, 2]`.
pub fn random_target(rng: &mut impl Rng, k: &KSpec) -> Result<TargetFunction> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let val = |rng: &mut dyn rand::RngCore| rng.gen_range(-16i32..=16) as f64 / 8.0;
    for (a, b) in k.components() {
        pts.push((a, val(rng)));
        if b > a {
            let extra = rng.gen_range(0..=3);
            for _ in 0..extra {
                let x = a + (b - a) * rng.gen_range(1..64) as f64 / 64.0;
                pts.push((x, val(rng)));
            }
            pts.push((b, val(rng)));
        }
    }
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    pts.dedup_by(|p, q| p.0 == q.0);
    TargetFunction::new(pts, k)
}
