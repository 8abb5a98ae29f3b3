use criterion::{black_box, criterion_group, criterion_main, Criterion};
use fblab_core::ckretract::{build_section, random_target, verify_section, KSpec};
use fblab_core::ellone::{extract, schedule, DemoFamily, InstanceKind, ScanOracle};
use fblab_core::expr::{gids, LatticeExpr};
use fblab_core::fblnorm::{exact_norm_of_expr, oracle_lower_bound, AdmissibilitySpace, ExactOptions, ExprEvaluator};
use fblab_core::plfan::{pl_from_maxmin, PLFunction};
use fblab_core::random::{random_expr, RandomExprOptions};
use fblab_core::scalar::Arithmetic;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exprs(n: usize, gens: &[&str], seed: u64) -> Vec<LatticeExpr> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gids(gens);
    (0..n).map(|_| random_expr(&mut rng, &g, &RandomExprOptions::default())).collect()
}

fn fan_construction(c: &mut Criterion) {
    let es = exprs(10, &["a", "b", "c"], 1);
    let g = gids(&["a", "b", "c"]);
    c.bench_function("fan/10 random exprs over 3 generators", |b| {
        b.iter(|| {
            for e in &es {
                let m = e.to_maxmin_with(&g, 10_000).unwrap();
                let f: PLFunction<f64> = pl_from_maxmin(&m, &g, &Default::default()).unwrap();
                black_box(f);
            }
        })
    });
}

fn exact_norms(c: &mut Criterion) {
    let es = exprs(10, &["a", "b", "c"], 2);
    for (name, mode) in [("f64", Arithmetic::F64), ("rational", Arithmetic::Rational)] {
        c.bench_function(&format!("exact/{name}/10 exprs over 3 generators"), |b| {
            b.iter(|| {
                for e in &es {
                    let s = AdmissibilitySpace::l1(e.dims()).unwrap();
                    black_box(exact_norm_of_expr(e, &s, mode, &ExactOptions::default()).unwrap());
                }
            })
        });
    }
}

fn oracle(c: &mut Criterion) {
    let es = exprs(3, &["a", "b", "c"], 3);
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    for budget in [2_000u64, 20_000] {
        group.bench_function(format!("budget {budget}/3 exprs"), |b| {
            b.iter(|| {
                for (i, e) in es.iter().enumerate() {
                    let s = AdmissibilitySpace::l1(e.dims()).unwrap();
                    let f = ExprEvaluator::new(e, s.generators()).unwrap();
                    black_box(oracle_lower_bound(&f, &s, budget, i as u64).unwrap());
                }
            })
        });
    }
    group.finish();
}

fn extraction(c: &mut Criterion) {
    let fam = DemoFamily::new(InstanceKind::Perturbed, 8).unwrap();
    let sched = schedule(0.1).unwrap();
    c.bench_function("extract/perturbed N=8 len 4", |b| {
        b.iter(|| black_box(extract(&fam, &sched, 4, &mut ScanOracle::default()).unwrap()))
    });
}

fn section(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let k = KSpec::Interval01;
    let h = random_target(&mut rng, &k).unwrap();
    c.bench_function("section/build interval", |b| b.iter(|| black_box(build_section(&k, &h).unwrap())));
    let bundle = build_section(&k, &h).unwrap();
    c.bench_function("section/verify 1000 samples", |b| {
        b.iter(|| black_box(verify_section(&bundle, 1_000, 5)))
    });
}

criterion_group!(benches, fan_construction, exact_norms, oracle, extraction, section);
criterion_main!(benches);
