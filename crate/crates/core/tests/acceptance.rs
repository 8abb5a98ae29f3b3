//! Acceptance suite: one PASS/FAIL line per criterion at the pinned tolerances.

use std::time::Instant;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fblab_core::cert::{replay, CertFunction, Certificate};
use fblab_core::ckretract::{
    build_section, random_target, verify_hom_laws, verify_homogeneity, verify_norm_bound, verify_section, KSpec,
};
use fblab_core::ellone::{extract, schedule, verify_random_lambdas, DemoFamily, InstanceKind, ScanOracle, SequenceFamily};
use fblab_core::expr::{gids, GeneratorId, LatticeExpr};
use fblab_core::fblnorm::{
    check_lemma34, exact_norm_of_expr, oracle_lower_bound, AdmissibilitySpace, ExactOptions, ExprEvaluator,
};
use fblab_core::homs::build_phi;
use fblab_core::random::{random_expr, random_linear, RandomExprOptions};
use fblab_core::scalar::Arithmetic;
use fblab_core::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

struct Line {
    n: usize,
    title: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

fn line(n: usize, title: &'static str, r: Result<Outcome>, secs: f64) -> Line {
    let (pass, detail) = match r {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    Line {
        n,
        title,
        pass,
        detail,
        secs,
    }
}

fn expr_space(e: &LatticeExpr) -> Result<AdmissibilitySpace> {
    AdmissibilitySpace::l1(e.dims())
}

/// Criterion 1: `‖Σ λ_i δ_{a_i}‖ = Σ |λ_i|`.
fn generator_isometry(certs: &mut Vec<Certificate>) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let names = ["a", "b", "c", "d"];
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let n = 1 + i % 4;
        let gens = gids(&names[..n]);
        let (lambda, e) = random_linear(&mut rng, &gens, 3.0);
        let space = AdmissibilitySpace::l1(gens)?;
        let b = exact_norm_of_expr(&e, &space, Arithmetic::F64, &ExactOptions::default())?;
        let want: f64 = lambda.iter().map(|x| x.abs()).sum();
        worst = worst.max((b.upper - want).abs());
        certs.push(Certificate::from_bracket(space, CertFunction::Expr { expr: e }, &b)?);
    }
    Ok(Outcome {
        pass: worst <= 1e-9,
        detail: format!("50 vectors, worst |norm - Σ|λ|| = {worst:.2e}"),
    })
}

/// Criterion 2: oracle within `[exact - 1e-3, exact + 1e-9]`.
fn oracle_agreement(certs: &mut Vec<Certificate>) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2000);
    let gens = gids(&["a", "b", "c"]);
    let opts = RandomExprOptions::default();
    let (mut worst_gap, mut worst_excess) = (0.0f64, f64::NEG_INFINITY);
    let mut failures = 0;
    for i in 0..50 {
        let e = random_expr(&mut rng, &gens, &opts);
        let space = expr_space(&e)?;
        let exact = exact_norm_of_expr(&e, &space, Arithmetic::F64, &ExactOptions::default())?;
        let ev = ExprEvaluator::new(&e, space.generators())?;
        let o = oracle_lower_bound(&ev, &space, 20_000, i)?;
        let gap = exact.upper - o.lower;
        worst_gap = worst_gap.max(gap);
        worst_excess = worst_excess.max(-gap);
        if !(o.lower >= exact.upper - 1e-3 && o.lower <= exact.upper + 1e-9) {
            failures += 1;
        }
        certs.push(Certificate::from_bracket(space.clone(), CertFunction::Expr { expr: e.clone() }, &exact)?);
        certs.push(Certificate::from_bracket(space, CertFunction::Expr { expr: e }, &o)?);
    }
    Ok(Outcome {
        pass: failures == 0,
        detail: format!("50 expressions, {failures} outside, worst gap {worst_gap:.2e}, worst excess {worst_excess:.2e}"),
    })
}

/// Criterion 3: oracle for `‖f·|δ_a|‖` never exceeds `‖f‖_∞ + 1e-9`.
fn product_inequality(certs: &mut Vec<Certificate>) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(3000);
    let gens = gids(&["a", "b", "c"]);
    let opts = RandomExprOptions::default();
    let mut failures = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..100 {
        let f = random_expr(&mut rng, &gens, &opts);
        let a = gens[rng.gen_range(0..gens.len())].clone();
        let space = AdmissibilitySpace::l1(gens.clone())?;
        let r = check_lemma34(&f, &a, &space, 5_000, i)?;
        worst = worst.max(r.best_lower - r.sup_norm);
        if !r.pass {
            failures += 1;
        }
        certs.push(Certificate::from_bracket(
            space,
            CertFunction::AbsProduct { expr: f, generator: a },
            &r.bracket,
        )?);
    }
    Ok(Outcome {
        pass: failures == 0,
        detail: format!("100 pairs, {failures} violations, max lower - sup = {worst:.2e}"),
    })
}

/// Criterion 4: lifts of basis vectors map to basis vectors exactly.
fn basis_lift() -> Result<Outcome> {
    let zero = BigRational::from_integer(0.into());
    let one = BigRational::from_integer(1.into());
    let mut checked = 0;
    let mut bad = 0;
    for n in 1..=8 {
        let phi = build_phi(n)?;
        for m in 1..=n {
            let image: Vec<BigRational> = phi.hom.apply_scalar(&phi.lift(m)?)?;
            checked += 1;
            let ok = image
                .iter()
                .enumerate()
                .all(|(j, x)| *x == if j + 1 == m { one.clone() } else { zero.clone() });
            if !ok {
                bad += 1;
            }
        }
    }
    Ok(Outcome {
        pass: bad == 0,
        detail: format!("{checked} lifts for N <= 8, {bad} mismatches"),
    })
}

/// Criterion 5: `(1-ε) Σ|λ_k|` lower bound with admissible disjoint certificates.
fn ell_one_bound(certs: &mut Vec<Certificate>) -> Result<Outcome> {
    let mut failures = 0;
    let mut runs = 0;
    let mut worst_margin = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    for kind in [InstanceKind::Disjoint, InstanceKind::Perturbed] {
        let fam = DemoFamily::new(kind, 8)?;
        let gens = fam.generators().to_vec();
        for eps in [0.05, 0.1, 0.2] {
            runs += 1;
            let res = extract(&fam, &schedule(eps)?, 4, &mut ScanOracle::default())?;
            let len = 4.min(res.len());
            let sweep = verify_random_lambdas(&res, &fam, len, 100, rng.gen())?;
            worst_margin = worst_margin.min(sweep.worst_margin);
            let ok = res.exhausted.is_none() && sweep.pass && res.is_disjoint() && res.is_admissible(&gens)?;
            if !ok {
                failures += 1;
            }

            // certificate for one coefficient vector
            let lambda: Vec<f64> = (0..len).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let sum = lambda
                .iter()
                .zip(&res.selected)
                .map(|(&l, &n)| LatticeExpr::scale(l, fam.expr(n).expect("demo families are expressions")))
                .reduce(LatticeExpr::sum)
                .expect("nonempty");
            let bound = (1.0 - eps) * lambda.iter().map(|l| l.abs()).sum::<f64>();
            let ys = res.dense_y(&gens)[..len].to_vec();
            certs.push(Certificate::lower(
                AdmissibilitySpace::l1(gens.clone())?,
                CertFunction::Expr { expr: sum },
                ys,
                bound,
            )?);
        }
    }

    // on three effective generators the exact norm dominates the certified value
    let fam = DemoFamily::new(InstanceKind::Disjoint, 8)?;
    let res = extract(&fam, &schedule(0.1)?, 3, &mut ScanOracle::default())?;
    let lambda = [1.5, -0.5, 2.0];
    let certified = fblab_core::ellone::verify_lower_bound(&res, &fam, &lambda)?.certified_value;
    let terms: Vec<(f64, GeneratorId)> = lambda
        .iter()
        .zip(&res.selected)
        .map(|(&l, &n)| (l, fblab_core::homs::subset_generator(&[n])))
        .collect();
    let e = LatticeExpr::linear(&terms);
    let exact = exact_norm_of_expr(&e, &expr_space(&e)?, Arithmetic::F64, &ExactOptions::default())?;
    let cross = exact.upper >= certified - 1e-9;
    Ok(Outcome {
        pass: failures == 0 && cross,
        detail: format!(
            "{runs} extractions x 100 λ, {failures} failing, worst margin {worst_margin:.2e}, exact cross-check {cross}"
        ),
    })
}

/// Criteria 6 and 7 share the random targets.
fn sections(certs: &mut Vec<Certificate>) -> Result<(Outcome, Outcome)> {
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let mut sec_fail = 0;
    let mut norm_fail = 0;
    let mut law_fail = 0;
    let mut homog_fail = 0;
    let mut worst_residual: f64 = 0.0;
    let mut worst_homog: f64 = 0.0;
    for k in [KSpec::Interval01, KSpec::TwoPoints] {
        let hs = (0..20).map(|_| random_target(&mut rng, &k)).collect::<Result<Vec<_>>>()?;
        for (i, h) in hs.iter().enumerate() {
            let b = build_section(&k, h)?;
            let s = verify_section(&b, 1000, i as u64);
            worst_residual = worst_residual.max(s.max_residual);
            sec_fail += usize::from(!s.pass);
            let nb = verify_norm_bound(&b)?;
            norm_fail += usize::from(!nb.pass);
            certs.push(Certificate::from_bracket(
                AdmissibilitySpace::l1(b.generators.clone())?,
                CertFunction::Pl { pl: b.sh.to_json_repr() },
                &nb.bracket,
            )?);
            let hr = verify_homogeneity(&b, 1000, i as u64);
            worst_homog = worst_homog.max(hr.max_homogeneity_deviation.max(hr.max_continuity_excess));
            homog_fail += usize::from(!hr.pass);
        }
        let pairs: Vec<_> = (0..10).map(|i| (hs[2 * i].clone(), hs[2 * i + 1].clone())).collect();
        let laws = verify_hom_laws(&k, &pairs, 10_000, 6)?;
        law_fail += laws.checks.iter().filter(|c| !c.pass).count();
    }
    Ok((
        Outcome {
            pass: sec_fail + norm_fail + law_fail == 0,
            detail: format!(
                "2 x 20 targets, section failures {sec_fail} (worst {worst_residual:.1e}), norm-bound failures {norm_fail}, law failures {law_fail}"
            ),
        },
        Outcome {
            pass: homog_fail == 0,
            detail: format!("40 targets x 1000 samples, {homog_fail} failing, worst deviation {worst_homog:.1e}"),
        },
    ))
}

/// Criterion 9: rational and floating exact norms agree.
fn exact_referee(certs: &mut Vec<Certificate>) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(9000);
    let gens = gids(&["a", "b"]);
    let opts = RandomExprOptions::default();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let e = random_expr(&mut rng, &gens, &opts);
        let space = AdmissibilitySpace::l1(gens.clone())?;
        let f = exact_norm_of_expr(&e, &space, Arithmetic::F64, &ExactOptions::default())?;
        let q = exact_norm_of_expr(&e, &space, Arithmetic::Rational, &ExactOptions::default())?;
        worst = worst.max((f.upper - q.upper).abs());
        certs.push(Certificate::from_bracket(space, CertFunction::Expr { expr: e }, &q)?);
    }
    Ok(Outcome {
        pass: worst <= 1e-9,
        detail: format!("10 expressions, worst |f64 - rational| = {worst:.2e}"),
    })
}

fn replay_all(certs: &[Certificate]) -> Result<Outcome> {
    let mut failures = 0;
    let mut rational = 0;
    for c in certs {
        let loaded = Certificate::from_json(&c.to_json())?;
        let r = replay(&loaded)?;
        if !(r.pass && r.bit_identical && loaded.value.to_bits() == c.value.to_bits()) {
            failures += 1;
        }
        rational += usize::from(c.arithmetic == Arithmetic::Rational);
    }
    Ok(Outcome {
        pass: failures == 0 && !certs.is_empty(),
        detail: format!("{} certificates ({rational} rational), {failures} failing", certs.len()),
    })
}

fn main() {
    let mut certs = Vec::new();
    let mut lines = Vec::new();

    let (r, t) = timed(|| generator_isometry(&mut certs));
    lines.push(line(1, "generator isometry", r, t));
    let (r, t) = timed(|| oracle_agreement(&mut certs));
    lines.push(line(2, "oracle/exact agreement", r, t));
    let (r, t) = timed(|| product_inequality(&mut certs));
    lines.push(line(3, "product inequality", r, t));
    let (r, t) = timed(basis_lift);
    lines.push(line(4, "basis lift", r, t));
    let (r, t) = timed(|| ell_one_bound(&mut certs));
    lines.push(line(5, "l1 lower bound", r, t));
    let (r, t) = timed(|| sections(&mut certs));
    let (c6, c7) = match r {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => (Err(fblab_core::Error::Internal(e.to_string())), Err(e)),
    };
    lines.push(line(6, "section identity, norm bound, lattice laws", c6, t));
    lines.push(line(7, "homogeneity and continuity at s = 0", c7, t));

    // the referee's rational certificates join the replay set
    let emitted = certs.len();
    let (r, t) = timed(|| exact_referee(&mut certs));
    lines.push(line(9, "exact-mode referee", r, t));
    let (r, t) = timed(|| {
        replay_all(&certs).map(|mut o| {
            o.detail = format!("{}; {emitted} from criteria 1-6", o.detail);
            o
        })
    });
    lines.push(line(8, "certificate replay", r, t));

    lines.sort_by_key(|l| l.n);
    for l in &lines {
        println!(
            "criterion {}: {} {} ({}; {:.2}s)",
            l.n,
            if l.pass { "PASS" } else { "FAIL" },
            l.title,
            l.detail,
            l.secs
        );
    }
    if lines.iter().any(|l| !l.pass) {
        std::process::exit(1);
    }
}
