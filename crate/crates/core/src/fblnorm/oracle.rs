//! Randomized lower bounds for black-box evaluators.
//!
//! Each restart draws a configuration of `1..=d+1` points, rescales it onto
//! the constraint boundary and hill-climbs with adaptive step size. Every
//! candidate is rescaled before scoring, so the homogeneity degree only
//! affects how the value responds to that rescaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bracket::{Diagnostics, DualConfig, NormBracket};
use super::eval::{config_value, Evaluator};
use super::space::{AdmissibilitySpace, ADMISSIBLE_TOL};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation, VarKind};
use crate::scalar::Arithmetic;

/// Iterations per restart before another restart is added.
const ITERATIONS_PER_RESTART: u64 = 1_000;
const MAX_RESTARTS: u64 = 64;
const HOMOGENEITY_TOL: f64 = 1e-9;

fn restart_seed(seed: u64, restart: u64) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(restart.wrapping_mul(0xbf58_476d_1ce4_e5b9))
        ^ 0x94d0_49bb_1331_11eb
}

/// Rejects evaluators that are visibly not homogeneous of their declared degree.
pub fn check_homogeneity(f: &dyn Evaluator, seed: u64) -> Result<()> {
    let d = f.dims().len();
    let k = f.degree() as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0d0e_c0de);
    for _ in 0..32 {
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lambda: f64 = rng.gen_range(0.05..1.0);
        let q: Vec<f64> = p.iter().map(|x| x * lambda).collect();
        let (fp, fq) = (f.eval(&p), f.eval(&q));
        let want = lambda.powi(k) * fp;
        if !fq.is_finite() || (fq - want).abs() > HOMOGENEITY_TOL * (1.0 + fp.abs()) {
            return Err(Error::NotHomogeneous {
                degree: f.degree(),
                detail: format!("f(λp) = {fq} but λ^{k} f(p) = {want} at λ = {lambda}"),
            });
        }
    }
    Ok(())
}

/// Scales the configuration so its largest vertex sum is at most one.
/// Returns `false` for the zero configuration.
fn to_boundary(points: &mut [Vec<f64>], space: &AdmissibilitySpace) -> bool {
    let worst = space
        .vertex_sums(points)
        .expect("widths checked")
        .into_iter()
        .fold(0.0f64, f64::max);
    if worst <= 0.0 || !worst.is_finite() {
        return false;
    }
    for p in points.iter_mut() {
        for x in p.iter_mut() {
            *x /= worst;
        }
    }
    // rounding can leave the sum a hair above one
    let mut again = space
        .vertex_sums(points)
        .expect("widths checked")
        .into_iter()
        .fold(0.0f64, f64::max);
    while again > 1.0 + ADMISSIBLE_TOL / 4.0 {
        for p in points.iter_mut() {
            for x in p.iter_mut() {
                *x *= 1.0 - 1e-15;
            }
        }
        again = space
            .vertex_sums(points)
            .expect("widths checked")
            .into_iter()
            .fold(0.0f64, f64::max);
    }
    true
}

struct Restart {
    value: f64,
    points: Vec<Vec<f64>>,
    evaluations: u64,
    /// Points of recently accepted configurations.
    pool: Vec<Vec<f64>>,
}

/// Per-restart cap on remembered points.
const POOL_PER_RESTART: usize = 256;

fn initial(rng: &mut ChaCha8Rng, d: usize, space: &AdmissibilitySpace) -> Vec<Vec<f64>> {
    loop {
        let n = rng.gen_range(1..=d + 1);
        let rounded = rng.gen_bool(0.5);
        let mut pts: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        if rounded {
                            rng.gen_range(-1i32..=1) as f64
                        } else {
                            rng.gen_range(-1.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        if to_boundary(&mut pts, space) {
            return pts;
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn climb(
    f: &dyn Evaluator,
    space: &AdmissibilitySpace,
    iterations: u64,
    seed: u64,
    start: Option<(Vec<Vec<f64>>, f64)>,
) -> Restart {
    let d = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut best, mut sigma) = match start {
        Some((pts, sigma)) => (pts, sigma),
        None => (initial(&mut rng, d, space), 0.3),
    };
    let mut best_val = config_value(f, &best);
    let mut evaluations = 1;
    let mut pool: Vec<Vec<f64>> = best.clone();
    for _ in 0..iterations {
        let mut cand = best.clone();
        let i = rng.gen_range(0..cand.len());
        match rng.gen_range(0..14) {
            0..=4 => {
                let k = rng.gen_range(0..d);
                cand[i][k] += sigma * gaussian(&mut rng);
            }
            5..=6 => {
                for x in cand[i].iter_mut() {
                    *x += sigma * gaussian(&mut rng);
                }
            }
            7..=8 => {
                // shift weight of one coordinate between two points
                let j = rng.gen_range(0..cand.len());
                let k = rng.gen_range(0..d);
                let delta = sigma * gaussian(&mut rng);
                cand[i][k] += delta;
                if j != i {
                    cand[j][k] -= delta;
                }
            }
            9 => {
                let k = rng.gen_range(0..d);
                cand[i][k] = -cand[i][k];
            }
            10 => {
                let k = rng.gen_range(0..d);
                cand[i][k] = 0.0;
            }
            11 => {
                if cand.len() > 1 {
                    cand.remove(i);
                } else {
                    cand[i] = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                }
            }
            12 => {
                if cand.len() <= d + 1 {
                    cand.push((0..d).map(|_| sigma * gaussian(&mut rng)).collect());
                }
            }
            _ => {
                if cand.len() <= d + 1 {
                    let t: f64 = rng.gen_range(0.0..1.0);
                    let jitter: Vec<f64> = (0..d).map(|_| sigma * gaussian(&mut rng)).collect();
                    let a: Vec<f64> = cand[i].iter().zip(&jitter).map(|(x, e)| t * x + e).collect();
                    let b: Vec<f64> = cand[i].iter().zip(&jitter).map(|(x, e)| (1.0 - t) * x - e).collect();
                    cand[i] = a;
                    cand.push(b);
                }
            }
        }
        if !to_boundary(&mut cand, space) {
            continue;
        }
        let v = config_value(f, &cand);
        evaluations += 1;
        if v > best_val {
            if pool.len() + cand.len() > POOL_PER_RESTART {
                pool.drain(..cand.len().min(pool.len()));
            }
            pool.extend(cand.iter().cloned());
            best = cand;
            best_val = v;
            sigma = (sigma * 1.5).min(1.0);
        } else {
            if v == best_val {
                best = cand;
            }
            sigma = (sigma * 0.97).max(1e-7);
        }
    }
    pool.extend(best.iter().cloned());
    Restart {
        value: best_val,
        points: best,
        evaluations,
        pool,
    }
}

/// Nonzero directions in `{-1, 0, 1}^d`, or the signed unit vectors when
/// that cube is too large.
fn cube_directions(d: usize) -> Vec<Vec<f64>> {
    const CAP: usize = 1024;
    if 3usize.checked_pow(d as u32).map_or(true, |n| n > CAP) {
        return (0..d)
            .flat_map(|i| {
                [1.0, -1.0].map(|s| {
                    let mut e = vec![0.0; d];
                    e[i] = s;
                    e
                })
            })
            .collect();
    }
    (0..3usize.pow(d as u32))
        .map(|code| {
            let mut c = code;
            (0..d)
                .map(|_| {
                    let x = (c % 3) as f64 - 1.0;
                    c /= 3;
                    x
                })
                .collect::<Vec<f64>>()
        })
        .filter(|p| p.iter().any(|&x| x != 0.0))
        .collect()
}

/// Half-width of a kink scan and its bisection depth.
const SCAN_RADIUS: f64 = 2.0;
const SCAN_DEPTH: u32 = 24;

/// Breakpoints of `t -> f(p + t e_k)` on `[-R, R]`. An interval whose
/// one-sided end slopes meet at a point on both lines holds one kink there;
/// otherwise it is halved.
fn line_kinks(f: &dyn Evaluator, p: &[f64], k: usize, out: &mut Vec<Vec<f64>>) -> u64 {
    let scale = p.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let delta = 1e-7 * scale;
    let at = |t: f64| {
        let mut q = p.to_vec();
        q[k] += t;
        q
    };
    let mut evaluations = 0u64;
    let mut g = |t: f64| {
        evaluations += 1;
        f.eval(&at(t))
    };
    let r = SCAN_RADIUS * scale;
    let gscale = g(-r).abs().max(g(r).abs()).max(g(0.0).abs()).max(1.0);
    let tol = 1e-9 * gscale;
    let mut stack = vec![(-r, r, 0u32)];
    while let Some((l, r, depth)) = stack.pop() {
        let (gl, gr) = (g(l), g(r));
        let sl = (g(l + delta) - gl) / delta;
        let sr = (gr - g(r - delta)) / delta;
        let mid = 0.5 * (l + r);
        if (sl - sr).abs() * (r - l) <= tol {
            // straight unless an interior bend is hidden by matching end slopes
            if (g(mid) - 0.5 * (gl + gr)).abs() <= tol {
                continue;
            }
        } else {
            let t = (gr - gl + sl * l - sr * r) / (sl - sr);
            if t > l && t < r && (g(t) - (gl + sl * (t - l))).abs() <= tol {
                out.push(at(t));
                continue;
            }
        }
        if depth < SCAN_DEPTH && r - l > 4.0 * delta {
            stack.push((l, mid, depth + 1));
            stack.push((mid, r, depth + 1));
        }
    }
    evaluations
}

/// Kink points on every coordinate line through each seed point.
fn kink_points(f: &dyn Evaluator, seeds: &[Vec<f64>]) -> (Vec<Vec<f64>>, u64) {
    let mut out = Vec::new();
    let mut evaluations = 0;
    for p in seeds {
        for k in 0..p.len() {
            evaluations += line_kinks(f, p, k, &mut out);
        }
    }
    (out, evaluations)
}

/// Best nonnegative combination of remembered points: an LP over their
/// weights, valid for degree-one evaluators where the objective and every
/// vertex sum are linear in the weights.
fn recombine(f: &dyn Evaluator, space: &AdmissibilitySpace, pool: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, f64)> {
    let mut cols: Vec<&Vec<f64>> = Vec::new();
    let mut gains = Vec::new();
    for p in pool {
        let g = f.eval(p).abs();
        if g > 0.0 && g.is_finite() && !cols.contains(&p) {
            cols.push(p);
            gains.push(g);
        }
    }
    if cols.is_empty() {
        return None;
    }
    let mut lp = LinearProgram::new(gains, vec![VarKind::NonNeg; cols.len()]);
    for v in space.vertex_pairs() {
        let row = cols
            .iter()
            .map(|p| p.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs())
            .collect();
        lp.add(row, Relation::Le, 1.0);
    }
    let LpOutcome::Optimal(sol) = lp.solve().ok()? else {
        return None;
    };
    let mut points: Vec<Vec<f64>> = cols
        .iter()
        .zip(&sol.x)
        .filter(|(_, &mu)| mu > 0.0)
        .map(|(p, &mu)| p.iter().map(|x| x * mu).collect())
        .collect();
    if points.is_empty() || !to_boundary(&mut points, space) {
        return None;
    }
    let v = config_value(f, &points);
    Some((points, v))
}

/// Best admissible configuration found within `budget` iterations.
/// Deterministic in `(f, space, budget, seed)` regardless of thread count.
pub fn oracle_lower_bound(f: &dyn Evaluator, space: &AdmissibilitySpace, budget: u64, seed: u64) -> Result<NormBracket> {
    if f.dims() != space.generators() {
        return Err(Error::Dimension(
            "evaluator and space use different generator lists".into(),
        ));
    }
    check_homogeneity(f, seed)?;
    // a quarter of the budget refines the recombined optimum (degree one only)
    let refine_budget = if f.degree() == 1 { budget / 4 } else { 0 };
    let explore = budget - refine_budget;
    let restarts = (explore / ITERATIONS_PER_RESTART).clamp(1, MAX_RESTARTS);
    let per = explore / restarts;
    let runs: Vec<Restart> = (0..restarts)
        .into_par_iter()
        .map(|r| climb(f, space, per, restart_seed(seed, r), None))
        .collect();
    let mut evaluations: u64 = runs.iter().map(|r| r.evaluations).sum();
    let mut pool: Vec<Vec<f64>> = runs.iter().flat_map(|r| r.pool.iter().cloned()).collect();
    // first index wins ties
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .expect("at least one restart");
    let mut points = best.points;
    let mut value = best.value;
    if f.degree() == 1 {
        // maxima sit on kink rays, which random moves rarely hit exactly;
        // scan lines through cube directions, then through the recombined support
        let mut seeds = cube_directions(f.dims().len());
        seeds.extend(points.iter().cloned());
        for pass in 0..2 {
            let (kinks, n) = kink_points(f, &seeds);
            evaluations += n;
            pool.extend(seeds);
            pool.extend(kinks);
            seeds = Vec::new();
            if pass == 0 {
                if let Some((combo, _)) = recombine(f, space, &pool) {
                    evaluations += pool.len() as u64;
                    seeds = combo;
                }
            }
        }
        let rounds = (refine_budget / ITERATIONS_PER_RESTART).max(1);
        for round in 0..=rounds {
            if let Some((combo, v)) = recombine(f, space, &pool) {
                evaluations += pool.len() as u64;
                if v > value {
                    points = combo;
                    value = v;
                }
            }
            if round == rounds || refine_budget == 0 {
                break;
            }
            let start = Some((points.clone(), 0.05 / (round + 1) as f64));
            let r = climb(f, space, refine_budget / rounds, restart_seed(seed, restarts + round), start);
            evaluations += r.evaluations;
            pool.extend(r.pool);
            if r.value > value {
                points = r.points;
                value = r.value;
            }
        }
    }
    points.retain(|p| f.eval(p) != 0.0);
    Ok(NormBracket {
        lower: config_value(f, &points),
        certificate: DualConfig { points },
        upper: f64::INFINITY,
        exact: false,
        arithmetic: Arithmetic::F64,
        diagnostics: Diagnostics {
            method: "oracle".into(),
            restarts: Some(restarts as usize),
            evaluations: Some(evaluations),
            ..Diagnostics::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{gids, parse_expr};
    use crate::fblnorm::eval::{AbsProduct, ExprEvaluator, FnEvaluator};
    use crate::fblnorm::space::admissible;

    fn ev(text: &str, gens: &[&str]) -> (ExprEvaluator, AdmissibilitySpace) {
        let g = gids(gens);
        (
            ExprEvaluator::new(&parse_expr(text).unwrap(), &g).unwrap(),
            AdmissibilitySpace::l1(g).unwrap(),
        )
    }

    #[test]
    fn single_generator_saturates() {
        let (f, s) = ev("d(a)", &["a"]);
        let b = oracle_lower_bound(&f, &s, 10_000, 0).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-6);
        assert!(b.upper.is_infinite());
        assert!(!b.exact);
    }

    #[test]
    fn join_reaches_two() {
        let (f, s) = ev("d(a) v d(b)", &["a", "b"]);
        let b = oracle_lower_bound(&f, &s, 10_000, 7).unwrap();
        assert!(b.lower >= 2.0 - 1e-6, "{b:?}");
        assert!(admissible(&b.certificate.points, &s).unwrap().admissible);
        assert_eq!(config_value(&f, &b.certificate.points), b.lower);
    }

    #[test]
    fn product_respects_sup_norm_bound() {
        let (f, s) = ev("d(b)", &["a", "b"]);
        let p = AbsProduct::new(&f, &gids(&["a"])[0]).unwrap();
        for budget in [1_000, 5_000, 20_000] {
            let b = oracle_lower_bound(&p, &s, budget, 3).unwrap();
            assert!(b.lower <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn non_homogeneous_input_is_rejected() {
        let f = FnEvaluator::new(gids(&["a"]), 1, |p: &[f64]| p[0] * p[0]);
        let s = AdmissibilitySpace::l1(gids(&["a"])).unwrap();
        assert!(matches!(
            oracle_lower_bound(&f, &s, 100, 0),
            Err(Error::NotHomogeneous { .. })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let (f, s) = ev("(d(a) ^ d(b)) + |d(c)|", &["a", "b", "c"]);
        let x = oracle_lower_bound(&f, &s, 5_000, 11).unwrap();
        let y = oracle_lower_bound(&f, &s, 5_000, 11).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn kink_scan_finds_breakpoints_between_grid_cells() {
        let (f, _) = ev("(d(c) * 3.5) v (d(a) * -0.25)", &["a", "c"]);
        let mut out = Vec::new();
        line_kinks(&f, &[1.0, 0.0], 1, &mut out);
        assert_eq!(out.len(), 1);
        assert!((out[0][1] + 1.0 / 14.0).abs() < 1e-9, "{out:?}");
    }

    #[test]
    fn maximum_on_a_kink_ray_is_found() {
        let (f, s) = ev(
            "(((1.75*d(c) ^ d(b)) + (0.75*d(c) + d(c))) v ((d(c) ^ -1.5*d(a)) v (d(a) ^ -0.25*d(a))))",
            &["a", "b", "c"],
        );
        for seed in [14, 100] {
            let b = oracle_lower_bound(&f, &s, 20_000, seed).unwrap();
            assert!(b.lower >= 2.875 - 1e-6 && b.lower <= 2.875 + 1e-9, "{}", b.lower);
        }
    }
}
