//! Seeded random lattice expressions for tests and benchmarks.

use rand::Rng;

use crate::expr::{GeneratorId, LatticeExpr, DEFAULT_MAXMIN_CAP};

#[derive(Debug, Clone, Copy)]
pub struct RandomExprOptions {
    pub max_depth: usize,
    /// Reject forms with more functionals than this.
    pub max_maxmin_size: usize,
    /// Reject forms with more distinct functionals than this (bounds fan size).
    pub max_distinct: usize,
}

impl Default for RandomExprOptions {
    fn default() -> Self {
        RandomExprOptions {
            max_depth: 3,
            max_maxmin_size: 40,
            max_distinct: 8,
        }
    }
}

/// Nonzero dyadic coefficient in `[-2, 2]` with denominator 4, exact in
/// both arithmetic modes.
pub fn dyadic(rng: &mut impl Rng) -> f64 {
    loop {
        let k = rng.gen_range(-8i32..=8);
        if k != 0 {
            return k as f64 / 4.0;
        }
    }
}

fn grow(rng: &mut impl Rng, gens: &[GeneratorId], depth: usize) -> LatticeExpr {
    if depth == 0 || rng.gen_bool(0.25) {
        let g = gens[rng.gen_range(0..gens.len())].clone();
        return if rng.gen_bool(0.5) {
            LatticeExpr::gen(g)
        } else {
            LatticeExpr::scale(dyadic(rng), LatticeExpr::gen(g))
        };
    }
    match rng.gen_range(0..4) {
        0 => LatticeExpr::scale(dyadic(rng), grow(rng, gens, depth - 1)),
        1 => LatticeExpr::sum(grow(rng, gens, depth - 1), grow(rng, gens, depth - 1)),
        2 => LatticeExpr::join(grow(rng, gens, depth - 1), grow(rng, gens, depth - 1)),
        _ => LatticeExpr::meet(grow(rng, gens, depth - 1), grow(rng, gens, depth - 1)),
    }
}

/// Random expression of bounded depth whose max-min form stays small. The
/// support is a subset of `gens`.
pub fn random_expr(rng: &mut impl Rng, gens: &[GeneratorId], opts: &RandomExprOptions) -> LatticeExpr {
    assert!(!gens.is_empty(), "need at least one generator");
    loop {
        let e = grow(rng, gens, opts.max_depth);
        let Ok(m) = e.to_maxmin_with(gens, DEFAULT_MAXMIN_CAP) else {
            continue;
        };
        if m.size() <= opts.max_maxmin_size && m.distinct_functionals().len() <= opts.max_distinct {
            return e;
        }
    }
}

/// `Σ λ_i δ_{a_i}` with λ uniform in `[-scale, scale]`.
pub fn random_linear(rng: &mut impl Rng, gens: &[GeneratorId], scale: f64) -> (Vec<f64>, LatticeExpr) {
    let lambda: Vec<f64> = gens.iter().map(|_| rng.gen_range(-scale..scale)).collect();
    let terms: Vec<(f64, GeneratorId)> = lambda.iter().cloned().zip(gens.iter().cloned()).collect();
    (lambda, LatticeExpr::linear(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::gids;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_expressions_respect_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gens = gids(&["a", "b", "c"]);
        let opts = RandomExprOptions::default();
        for _ in 0..50 {
            let e = random_expr(&mut rng, &gens, &opts);
            let m = e.to_maxmin_with(&gens, DEFAULT_MAXMIN_CAP).unwrap();
            assert!(m.size() <= 40);
            assert!(e.support().iter().all(|g| gens.contains(g)));
        }
    }
}
