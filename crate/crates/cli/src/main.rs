//! `fblab`: batch front end. Every subcommand prints one JSON run report on
//! stdout and a short human summary on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use fblab_core::cert::{replay, CertFunction, Certificate};
use fblab_core::ckretract::{
    build_section, parse_kspec, parse_target, pipeline_deviation, verify_homogeneity, verify_norm_bound, verify_section,
};
use fblab_core::ellone::{extract, schedule, verify_random_lambdas, DemoFamily, InstanceKind, ScanOracle, SequenceFamily};
use fblab_core::expr::{parse_expr, GeneratorId, LatticeExpr};
use fblab_core::fblnorm::{
    check_lemma34, exact_norm_of_expr, oracle_lower_bound, AdmissibilitySpace, ExactOptions, ExprEvaluator, NormMethod,
};
use fblab_core::homs::{build_phi, check_hom_laws};
use fblab_core::scalar::Arithmetic;
use fblab_core::Error;

const SCHEMA: u32 = 1;
const DEFAULT_BUDGET: u64 = 20_000;

#[derive(Parser, Serialize)]
#[command(name = "fblab", version, about = "Free Banach lattice workbench")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Serialize)]
struct Common {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Evaluation budget for the oracle.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Display tolerance only; internal tolerances are fixed.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Exact rational arithmetic where supported.
    #[arg(long, global = true)]
    exact: bool,
    /// Suppress the human summary on stderr.
    #[arg(long, global = true)]
    json_only: bool,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Cmd {
    /// Exact free lattice norm of an expression.
    Norm(NormArgs),
    /// Randomized lower bound with an admissible certificate.
    Oracle(NormArgs),
    /// Checks that the norm of f·|δ_a| stays below the sup norm of f.
    #[command(name = "lemma34-check")]
    Lemma34Check {
        #[command(flatten)]
        norm: NormArgs,
        /// The generator a.
        #[arg(long = "gen")]
        generator: String,
    },
    /// Truncated quotient map onto c0 built from finite subsets.
    PhiDemo {
        #[arg(long)]
        n: usize,
    },
    /// Subsequence extraction with the (1-ε) ℓ1 lower bound.
    #[command(name = "extract-l1")]
    ExtractL1 {
        #[arg(long, value_parser = ["disjoint", "perturbed"])]
        instance: String,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 4)]
        len: usize,
        /// Random coefficient vectors to verify.
        #[arg(long, default_value_t = 100)]
        lambdas: usize,
    },
    /// Lattice section of C(K) for a finite union of intervals.
    CkSection {
        /// interval | twopoints | union:a1,b1;a2,b2
        #[arg(long)]
        k: String,
        /// k:value,k:value,... (two points also accept h0,h1)
        #[arg(long)]
        h: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        cert_out: Option<PathBuf>,
    },
    /// Replays a certificate file.
    ReplayCert { file: PathBuf },
}

#[derive(Args, Serialize)]
struct NormArgs {
    #[arg(long)]
    expr: String,
    /// l1 | linf | vertices:<json list> | path to a space JSON file
    #[arg(long, default_value = "l1")]
    space: String,
    /// Comma separated generators (default: those of the expression).
    #[arg(long)]
    gens: Option<String>,
    #[arg(long, default_value = "rays", value_parser = ["rays", "cells"])]
    method: String,
    #[arg(long)]
    cert_out: Option<PathBuf>,
}

struct Outcome {
    results: Value,
    pass: bool,
    summary: String,
    arithmetic: Arithmetic,
}

#[derive(Serialize)]
struct RunReport<'a> {
    schema: u32,
    subcommand: &'a str,
    config: Value,
    seed: u64,
    arithmetic: Arithmetic,
    results: Value,
    pass: bool,
    wall_time_ms: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let start = Instant::now();
    let name = subcommand_name(&cli.cmd);
    match run(&cli) {
        Ok(out) => {
            let report = RunReport {
                schema: SCHEMA,
                subcommand: name,
                config: serde_json::to_value(&cli).expect("config serializes"),
                seed: cli.common.seed,
                arithmetic: out.arithmetic,
                results: out.results,
                pass: out.pass,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if !cli.common.json_only {
                eprintln!("{}", out.summary);
                eprintln!("{name}: {}", if out.pass { "PASS" } else { "FAIL" });
            }
            ExitCode::from(if out.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Input errors are usage errors (2); anything else is a failed run (1).
fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Syntax { .. }
            | Error::UnknownToken { .. }
            | Error::InvalidGenerator(_)
            | Error::MissingCoordinate(_)
            | Error::InvalidSpace(_)
            | Error::OutOfRange(_)
            | Error::Unsupported(_)
            | Error::RationalDimension { .. }
            | Error::Dimension(_)
            | Error::Json(_),
        ) => 2,
        Some(_) => 1,
        None => 2,
    }
}

fn subcommand_name(c: &Cmd) -> &'static str {
    match c {
        Cmd::Norm(_) => "norm",
        Cmd::Oracle(_) => "oracle",
        Cmd::Lemma34Check { .. } => "lemma34-check",
        Cmd::PhiDemo { .. } => "phi-demo",
        Cmd::ExtractL1 { .. } => "extract-l1",
        Cmd::CkSection { .. } => "ck-section",
        Cmd::ReplayCert { .. } => "replay-cert",
    }
}

fn arithmetic(c: &Common) -> Arithmetic {
    if c.exact {
        Arithmetic::Rational
    } else {
        Arithmetic::F64
    }
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let c = &cli.common;
    match &cli.cmd {
        Cmd::Norm(a) => run_norm(a, c),
        Cmd::Oracle(a) => run_oracle(a, c),
        Cmd::Lemma34Check { norm, generator } => run_lemma34(norm, generator, c),
        Cmd::PhiDemo { n } => run_phi(*n),
        Cmd::ExtractL1 {
            instance,
            n,
            eps,
            len,
            lambdas,
        } => run_extract(instance, *n, *eps, *len, *lambdas, c.seed),
        Cmd::CkSection { k, h, samples, cert_out } => run_section(k, h, *samples, cert_out.as_deref(), c.seed),
        Cmd::ReplayCert { file } => run_replay(file),
    }
}

fn generators(a: &NormArgs, e: &LatticeExpr, extra: Option<&GeneratorId>) -> anyhow::Result<Vec<GeneratorId>> {
    let mut gens = match &a.gens {
        Some(list) => list
            .split(',')
            .map(|g| GeneratorId::new(g.trim()))
            .collect::<Result<Vec<_>, _>>()?,
        None => e.dims(),
    };
    if let Some(g) = extra {
        if !gens.contains(g) {
            gens.push(g.clone());
        }
    }
    Ok(gens)
}

fn parse_space(spec: &str, gens: Vec<GeneratorId>) -> anyhow::Result<AdmissibilitySpace> {
    Ok(match spec {
        "l1" => AdmissibilitySpace::l1(gens)?,
        "linf" => AdmissibilitySpace::linf(gens)?,
        s if s.starts_with("vertices:") => {
            let v: Vec<Vec<f64>> = serde_json::from_str(&s["vertices:".len()..]).map_err(Error::from)?;
            AdmissibilitySpace::from_vertices(gens, v)?
        }
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading space file {path}"))?;
            serde_json::from_str(&text).map_err(Error::from)?
        }
    })
}

fn write_cert(path: Option<&Path>, cert: &Certificate) -> anyhow::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, cert.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn run_norm(a: &NormArgs, c: &Common) -> anyhow::Result<Outcome> {
    let e = parse_expr(&a.expr)?;
    let space = parse_space(&a.space, generators(a, &e, None)?)?;
    let opts = ExactOptions {
        method: if a.method == "cells" { NormMethod::Cells } else { NormMethod::Rays },
        ..ExactOptions::default()
    };
    let mode = arithmetic(c);
    let bracket = exact_norm_of_expr(&e, &space, mode, &opts)?;
    let cert = Certificate::from_bracket(space, CertFunction::Expr { expr: e }, &bracket)?;
    write_cert(a.cert_out.as_deref(), &cert)?;
    let r = replay(&cert)?;
    let pass = bracket.exact && r.pass && bracket.lower <= bracket.upper + 1e-9;
    Ok(Outcome {
        summary: format!(
            "norm = {}{}  (lower {}, certificate of {} points)",
            display(bracket.upper, c.tol),
            bracket
                .diagnostics
                .exact_value
                .as_ref()
                .map(|v| format!(" = {v}"))
                .unwrap_or_default(),
            display(bracket.lower, c.tol),
            bracket.certificate.points.len()
        ),
        results: json!({ "bracket": bracket, "certificate": cert, "replay": r }),
        pass,
        arithmetic: mode,
    })
}

fn run_oracle(a: &NormArgs, c: &Common) -> anyhow::Result<Outcome> {
    let e = parse_expr(&a.expr)?;
    let space = parse_space(&a.space, generators(a, &e, None)?)?;
    let ev = ExprEvaluator::new(&e, space.generators())?;
    let bracket = oracle_lower_bound(&ev, &space, c.budget.unwrap_or(DEFAULT_BUDGET), c.seed)?;
    let cert = Certificate::from_bracket(space, CertFunction::Expr { expr: e }, &bracket)?;
    write_cert(a.cert_out.as_deref(), &cert)?;
    let r = replay(&cert)?;
    Ok(Outcome {
        summary: format!(
            "lower bound = {} from {} points",
            display(bracket.lower, c.tol),
            bracket.certificate.points.len()
        ),
        results: json!({ "bracket": bracket, "certificate": cert, "replay": r }),
        pass: r.pass,
        arithmetic: Arithmetic::F64,
    })
}

fn run_lemma34(a: &NormArgs, generator: &str, c: &Common) -> anyhow::Result<Outcome> {
    let e = parse_expr(&a.expr)?;
    let g = GeneratorId::new(generator)?;
    let space = parse_space(&a.space, generators(a, &e, Some(&g))?)?;
    let report = check_lemma34(&e, &g, &space, c.budget.unwrap_or(DEFAULT_BUDGET), c.seed)?;
    let cert = Certificate::from_bracket(
        space,
        CertFunction::AbsProduct {
            expr: e,
            generator: g.clone(),
        },
        &report.bracket,
    )?;
    write_cert(a.cert_out.as_deref(), &cert)?;
    let r = replay(&cert)?;
    Ok(Outcome {
        summary: format!(
            "oracle lower bound of ‖f·|δ_{g}|‖ = {}  vs  ‖f‖_∞ = {}",
            display(report.best_lower, c.tol),
            display(report.sup_norm, c.tol)
        ),
        pass: report.pass && r.pass,
        results: json!({ "report": report, "certificate": cert, "replay": r }),
        arithmetic: Arithmetic::F64,
    })
}

fn run_phi(n: usize) -> anyhow::Result<Outcome> {
    let phi = build_phi(n)?;
    let mut lifts = Vec::new();
    let mut all_basis = true;
    for m in 1..=n {
        let image = phi.hom.apply(&phi.lift(m)?)?;
        let basis = image
            .iter()
            .enumerate()
            .all(|(j, &x)| x == if j + 1 == m { 1.0 } else { 0.0 });
        all_basis &= basis;
        lifts.push(json!({ "n": m, "image": image, "basis_vector": basis }));
    }
    let pairs: Vec<(LatticeExpr, LatticeExpr)> = (1..=n)
        .map(|m| Ok((phi.lift(m)?, phi.delta(&(1..=m).collect::<Vec<_>>())?)))
        .collect::<Result<_, Error>>()?;
    let laws = check_hom_laws(&phi.hom, &pairs)?;
    let mut summary = String::from("subset");
    for m in 1..=n {
        summary.push_str(&format!("\tχ·{m}"));
    }
    if n <= 4 {
        for (j, g) in phi.generators.iter().enumerate() {
            summary.push_str(&format!("\n{g}"));
            for p in &phi.chi_points {
                summary.push_str(&format!("\t{}", p[j]));
            }
        }
    } else {
        summary.push_str(&format!("\n({} subsets; table omitted)", phi.generators.len()));
    }
    Ok(Outcome {
        summary,
        pass: all_basis && laws.pass,
        results: json!({
            "n": n,
            "generators": phi.generators,
            "chi_points": phi.chi_points,
            "lifts": lifts,
            "laws": laws,
        }),
        arithmetic: Arithmetic::F64,
    })
}

fn run_extract(instance: &str, n: usize, eps: f64, len: usize, lambdas: usize, seed: u64) -> anyhow::Result<Outcome> {
    let kind = match instance {
        "disjoint" => InstanceKind::Disjoint,
        "perturbed" => InstanceKind::Perturbed,
        other => bail!(Error::Unsupported(format!("unknown instance {other}"))),
    };
    let fam = DemoFamily::new(kind, n)?;
    let sched = schedule(eps)?;
    let res = extract(&fam, &sched, len, &mut ScanOracle::default())?;
    let used = len.min(res.len());
    let sweep = verify_random_lambdas(&res, &fam, used, lambdas, seed)?;
    let disjoint = res.is_disjoint();
    let admissible = res.is_admissible(fam.generators())?;
    let mut summary = format!("selected indices {:?}\nk\tn_k\t|F|\t|f(y*)-1|", res.selected);
    for (k, &nk) in res.selected.iter().enumerate() {
        summary.push_str(&format!(
            "\n{}\t{nk}\t{}\t{:.3e}",
            k + 1,
            res.f_sets[k].len(),
            res.diagonal_deviation[k]
        ));
    }
    summary.push_str(&format!(
        "\n{} random λ: worst margin {:.3e}, {} failures; disjoint {disjoint}, admissible {admissible}",
        sweep.count, sweep.worst_margin, sweep.failures
    ));
    if let Some(x) = &res.exhausted {
        summary.push_str(&format!(
            "\nexhausted at stage ({}) with {} of {} terms",
            x.stage, x.reached, x.requested
        ));
    }
    Ok(Outcome {
        summary,
        pass: res.exhausted.is_none() && sweep.pass && disjoint && admissible,
        results: json!({
            "extraction": res,
            "verification": sweep,
            "disjoint": disjoint,
            "admissible": admissible,
        }),
        arithmetic: Arithmetic::F64,
    })
}

fn run_section(k: &str, h: &str, samples: usize, cert_out: Option<&Path>, seed: u64) -> anyhow::Result<Outcome> {
    let kspec = parse_kspec(k)?;
    let target = parse_target(h, &kspec)?;
    let b = build_section(&kspec, &target)?;
    let section = verify_section(&b, samples, seed);
    let homog = verify_homogeneity(&b, samples, seed);
    let pipeline = pipeline_deviation(&b, 101);
    let norm = verify_norm_bound(&b)?;
    let cert = Certificate::from_bracket(
        AdmissibilitySpace::l1(b.generators.clone())?,
        CertFunction::Pl { pl: b.sh.to_json_repr() },
        &norm.bracket,
    )?;
    write_cert(cert_out, &cert)?;
    let r = replay(&cert)?;
    let pass = section.pass && homog.pass && norm.pass && r.pass && pipeline <= 1e-12;
    Ok(Outcome {
        summary: format!(
            "check\tvalue\nsection residual\t{:.3e}\nhomogeneity\t{:.3e}\ncontinuity excess\t{:.3e}\npipeline gap\t{:.3e}\n‖Sh‖ (two generators)\t{}\n‖h‖_∞\t{}",
            section.max_residual,
            homog.max_homogeneity_deviation,
            homog.max_continuity_excess,
            pipeline,
            norm.norm,
            norm.h_sup
        ),
        results: json!({
            "bundle": b.summary(),
            "section": section,
            "homogeneity": homog,
            "pipeline_deviation": pipeline,
            "norm_bound": norm,
            "certificate": cert,
            "replay": r,
        }),
        pass,
        arithmetic: Arithmetic::F64,
    })
}

fn run_replay(file: &Path) -> anyhow::Result<Outcome> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let cert = Certificate::from_json(&text)?;
    let r = replay(&cert)?;
    Ok(Outcome {
        summary: format!(
            "admissible {} (worst sum {}), value {} recomputed {}, bit-identical {}",
            r.admissible, r.worst_sum, r.stored_value, r.recomputed_value, r.bit_identical
        ),
        pass: r.pass,
        arithmetic: cert.arithmetic,
        results: serde_json::to_value(&r).map_err(|e| anyhow!(e))?,
    })
}

fn display(x: f64, tol: Option<f64>) -> String {
    match tol {
        Some(t) if t > 0.0 => {
            let digits = (-t.log10()).ceil().clamp(0.0, 17.0) as usize;
            format!("{x:.digits$}")
        }
        _ => format!("{x}"),
    }
}
