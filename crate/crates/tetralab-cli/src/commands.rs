//! Command implementations: each builds its context, runs the check, and
//! returns a deterministic report plus any artifact files.

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tetralab_core::report::{fmt_sig17, to_json_deterministic, write_json_file};
use tetralab_core::{
    build_ladder_basis, check_tuple_relations, compactness_probe, ladder_shift_check,
    sample_boundary_r, symbol_pullback, symbol_recovery, toeplitz_window, GradedBasis,
    MeasureContext, MeasureInfo, OperatorWindow, ProfilePoint, QuadratureSpec, RecoveredTerm,
    Report, SymbolExpr,
};

use crate::cli::{
    BasisArgs, BhCheckArgs, CoeSampleArgs, LadderArgs, MomentsArgs, ProbeArgs, RecoverArgs,
    RelationsArgs,
};

/// Hard ceiling on quadrature degrees reachable through the CLI; commands
/// validate against it before any grid is built.
const MAX_QUAD_DEGREE: u32 = 64;

pub struct CommandOutput {
    pub report: Report,
}

fn echo_command(report: &mut Report) {
    report.command = std::env::args().skip(1).collect();
}

/// Builds or loads the measure context, honoring `--cache` and the optional
/// `--quad-degree` override. Degree requirements are validated before the
/// grid is touched.
fn prepare_context(
    required_degree: u32,
    quad_override: Option<u32>,
    cache: Option<&Path>,
) -> Result<MeasureContext> {
    let target = match quad_override {
        Some(d) => {
            if d < required_degree {
                bail!("--quad-degree {d} is below the required combined degree {required_degree}");
            }
            d
        }
        None => required_degree.max(2),
    };
    if target > MAX_QUAD_DEGREE {
        bail!(
            "required quadrature degree {target} exceeds the supported maximum {MAX_QUAD_DEGREE}"
        );
    }
    if let Some(path) = cache {
        if path.exists() {
            let ctx = MeasureContext::load_cache(path)
                .with_context(|| format!("loading moment cache {}", path.display()))?;
            if ctx.max_degree() < target {
                bail!(
                    "moment cache {} has max_degree {}, but this command needs {}",
                    path.display(),
                    ctx.max_degree(),
                    target
                );
            }
            return Ok(ctx);
        }
    }
    Ok(MeasureContext::new(QuadratureSpec::for_degree(target))?)
}

fn finish_cache(ctx: &MeasureContext, cache: Option<&Path>) -> Result<()> {
    if let Some(path) = cache {
        ctx.save_cache(path)
            .with_context(|| format!("saving moment cache {}", path.display()))?;
    }
    Ok(())
}

/// Builds the basis, or loads and validates it when `--basis` names a file.
fn prepare_basis(
    n: u32,
    basis_path: Option<&Path>,
    ctx: &MeasureContext,
) -> Result<(GradedBasis, Option<String>)> {
    match basis_path {
        Some(path) if path.exists() => {
            let basis = GradedBasis::load(path, ctx)
                .with_context(|| format!("loading basis {}", path.display()))?;
            if basis.max_degree() < n {
                bail!(
                    "basis file {} covers degrees up to {}, but this command needs {}",
                    path.display(),
                    basis.max_degree(),
                    n
                );
            }
            Ok((basis, Some(path.display().to_string())))
        }
        Some(path) => bail!("basis file {} does not exist", path.display()),
        None => Ok((build_ladder_basis(n, ctx)?, None)),
    }
}

/// Largest combined moment degree a square symbol window at `n` requests.
fn window_required_degree(s: &SymbolExpr, n: u32) -> u32 {
    let u = symbol_pullback(s);
    let mut required = 2 * n;
    for ((gamma, delta), _) in u.terms() {
        let gd = gamma.degree() as i64;
        let dd = delta.degree() as i64;
        let raise = gd - dd;
        for q in 1..=n as i64 {
            let p = q + raise;
            if p < 1 || p > n as i64 {
                continue;
            }
            required = required.max(((q + gd) + (p + dd)) as u32);
        }
    }
    required
}

pub fn run_moments(args: &MomentsArgs) -> Result<CommandOutput> {
    let ctx = prepare_context(
        args.max_degree,
        args.io.quad_degree,
        args.io.cache.as_deref(),
    )?;
    let pairs = ctx.prefill()?;
    ctx.save_cache(&args.out)?;
    finish_cache(&ctx, args.io.cache.as_deref())?;

    let mut report = Report::new(
        "moments",
        args.max_degree,
        0.0,
        MeasureInfo::new(ctx.spec(), ctx.normalization_c()),
    );
    echo_command(&mut report);
    let mut counts = BTreeMap::new();
    counts.insert("cache_entries".to_string(), pairs as u64);
    report.counts = Some(counts);
    report
        .residuals
        .insert("normalization_c".to_string(), ctx.normalization_c());
    report.pass = true;
    Ok(CommandOutput { report })
}

pub fn run_basis(args: &BasisArgs) -> Result<CommandOutput> {
    let n = args.max_degree;
    let ctx = prepare_context(2 * n, args.io.quad_degree, args.io.cache.as_deref())?;
    let basis = build_ladder_basis(n, &ctx)?;
    basis.save(&args.out)?;
    finish_cache(&ctx, args.io.cache.as_deref())?;

    let mut dev: f64 = 0.0;
    let mut links = 0u64;
    for m in 1..=n {
        dev = dev.max(tetralab_core::hardy::max_gram_deviation_at(
            &basis, m, &ctx,
        )?);
        links += basis.block(m).ladder_from_prev as u64;
    }

    let mut report = Report::new(
        "basis",
        n,
        args.tol,
        MeasureInfo::new(ctx.spec(), ctx.normalization_c()),
    );
    echo_command(&mut report);
    report
        .residuals
        .insert("max_gram_deviation".to_string(), dev);
    let mut counts = BTreeMap::new();
    counts.insert("ladder_links".to_string(), links);
    counts.insert("total_dim".to_string(), basis.total_dim(n) as u64);
    report.counts = Some(counts);
    report.pass = dev <= args.tol;
    Ok(CommandOutput { report })
}

pub fn run_relations(args: &RelationsArgs) -> Result<CommandOutput> {
    let n = args.max_degree;
    let ctx = prepare_context(2 * n + 4, args.io.quad_degree, args.io.cache.as_deref())?;
    let (basis, basis_file) = prepare_basis(n, args.basis.as_deref(), &ctx)?;
    let residuals = check_tuple_relations(&basis, &ctx, n, args.tol)?;
    finish_cache(&ctx, args.io.cache.as_deref())?;

    let mut report = Report::new(
        "relations",
        n,
        args.tol,
        MeasureInfo::new(ctx.spec(), ctx.normalization_c()),
    );
    echo_command(&mut report);
    report.basis_file = basis_file;
    report
        .residuals
        .insert("phi1_vs_phi2_adj_phi3".to_string(), residuals.r1);
    report
        .residuals
        .insert("phi2_vs_phi1_adj_phi3".to_string(), residuals.r2);
    report
        .residuals
        .insert("phi3_isometry".to_string(), residuals.r3);
    report.pass = residuals.pass(args.tol);
    Ok(CommandOutput { report })
}

pub fn run_bh_check(args: &BhCheckArgs) -> Result<CommandOutput> {
    let n = args.max_degree;
    let m = n + 2;
    let (symbol, symbol_echo) = match (&args.symbol, &args.matrix) {
        (Some(text), None) => (Some(crate::symbol::parse_symbol(text)?), Some(text.clone())),
        (None, Some(_)) => (None, None),
        _ => bail!("exactly one of --symbol or --matrix is required"),
    };
    let required = match &symbol {
        Some(s) => window_required_degree(s, m).max(2 * m),
        None => 2 * m,
    };
    let ctx = prepare_context(required, args.io.quad_degree, args.io.cache.as_deref())?;
    let (basis, basis_file) = prepare_basis(m, args.basis.as_deref(), &ctx)?;

    let window = match (&symbol, &args.matrix) {
        (Some(s), None) => toeplitz_window(s, &basis, &ctx, m)?,
        (None, Some(path)) => OperatorWindow::load(path, &basis)
            .with_context(|| format!("loading window {}", path.display()))?,
        _ => unreachable!(),
    };
    let residuals = tetralab_core::brown_halmos_residual(&window, &basis, &ctx, n)?;
    finish_cache(&ctx, args.io.cache.as_deref())?;

    let mut report = Report::new(
        "bh-check",
        n,
        args.tol,
        MeasureInfo::new(ctx.spec(), ctx.normalization_c()),
    );
    echo_command(&mut report);
    report.basis_file = basis_file;
    report.symbol = symbol_echo;
    report.residuals.insert("t_z1".to_string(), residuals.r1);
    report.residuals.insert("t_z2".to_string(), residuals.r2);
    report.residuals.insert("t_z3".to_string(), residuals.r3);
    report.pass = residuals.pass(args.tol);
    Ok(CommandOutput { report })
}

pub fn run_ladder(args: &LadderArgs) -> Result<CommandOutput> {
    let n = args.max_degree;
    let symbol = crate::symbol::parse_symbol(&args.symbol)?;
    let u = symbol_pullback(&symbol);
    let (hd, ad) = u.degrees();
    let required = ((n + hd) + (n + ad)).max(2 * n);
    let ctx = prepare_context(required, args.io.quad_degree, args.io.cache.as_deref())?;
    let (basis, basis_file) = prepare_basis(n, args.basis.as_deref(), &ctx)?;

    let mut report = Report::new(
        "ladder",
        n,
        args.tol,
        MeasureInfo::new(ctx.spec(), ctx.normalization_c()),
    );
    echo_command(&mut report);
    report.basis_file = basis_file;
    report.symbol = Some(args.symbol.clone());
    let mut max_dev: f64 = 0.0;
    for r in 0..=args.r {
        let dev = ladder_shift_check(&symbol, &basis, &ctx, n, r)?;
        report.residuals.insert(format!("dev_r{r}"), dev);
        max_dev = max_dev.max(dev);
    }
    report.residuals.insert("max_dev".to_string(), max_dev);
    report.pass = max_dev <= args.tol;
    finish_cache(&ctx, args.io.cache.as_deref())?;
    Ok(CommandOutput { report })
}

pub fn run_probe(args: &ProbeArgs) -> Result<CommandOutput> {
    let n = args.max_degree;
    let symbol = crate::symbol::parse_symbol(&args.symbol)?;
    let u = symbol_pullback(&symbol);
    let (hd, ad) = u.degrees();
    let required = ((n + hd) + (n + ad)).max(2 * n);
    let ctx = prepare_context(required, args.io.quad_degree, args.io.cache.as_deref())?;
    let (basis, basis_file) = prepare_basis(n, args.basis.as_deref(), &ctx)?;

    let profile = compactness_probe(&symbol, &basis, &ctx, n)?;
    write_decay_csv(&args.out, &profile)?;
    finish_cache(&ctx, args.io.cache.as_deref())?;

    let r0 = profile.first().map(|p| p.max_abs_entry).unwrap_or(0.0);
    let pmin = profile
        .iter()
        .map(|p| p.max_abs_entry)
        .fold(f64::INFINITY, f64::min);
    let ratio = if r0 > 0.0 { pmin / r0 } else { 0.0 };
    // A Toeplitz window's entries are ladder-constant: a nonzero symbol must
    // keep at least this fraction of its r=0 magnitude at every shift.
    let pass = if symbol.is_zero() {
        profile.iter().all(|p| p.max_abs_entry == 0.0)
    } else {
        r0 > 0.0 && ratio >= args.min_ratio
    };

    let mut report = Report::new(
        "probe",
        n,
        args.min_ratio,
        MeasureInfo::new(ctx.spec(), ctx.normalization_c()),
    );
    echo_command(&mut report);
    report.basis_file = basis_file;
    report.symbol = Some(args.symbol.clone());
    report.residuals.insert("profile_r0".to_string(), r0);
    report.residuals.insert("profile_min".to_string(), pmin);
    report.residuals.insert("min_over_r0".to_string(), ratio);
    report.profile = Some(profile);
    report.pass = pass;
    Ok(CommandOutput { report })
}

pub fn run_recover(args: &RecoverArgs) -> Result<CommandOutput> {
    let n = args.max_degree;
    let m = n + 2;
    let dict = tetralab_core::canonical_dictionary(args.dict_degree, m);
    let mut required = 2 * m;
    for &(a, b, k) in &dict {
        required = required.max(window_required_degree(
            &SymbolExpr::term(a, b, k, Complex64::new(1.0, 0.0)),
            m,
        ));
    }
    let (symbol, symbol_echo) = match (&args.symbol, &args.matrix) {
        (Some(text), None) => (Some(crate::symbol::parse_symbol(text)?), Some(text.clone())),
        (None, Some(_)) => (None, None),
        _ => bail!("exactly one of --symbol or --matrix is required"),
    };
    if let Some(s) = &symbol {
        required = required.max(window_required_degree(s, m));
    }
    let ctx = prepare_context(required, args.io.quad_degree, args.io.cache.as_deref())?;
    let (basis, basis_file) = prepare_basis(m, args.basis.as_deref(), &ctx)?;

    let window = match (&symbol, &args.matrix) {
        (Some(s), None) => toeplitz_window(s, &basis, &ctx, m)?,
        (None, Some(path)) => OperatorWindow::load(path, &basis)
            .with_context(|| format!("loading window {}", path.display()))?,
        _ => unreachable!(),
    };
    let (recovered, residual) = symbol_recovery(&window, &basis, &ctx, n, args.dict_degree)?;
    finish_cache(&ctx, args.io.cache.as_deref())?;

    let mut report = Report::new(
        "recover",
        n,
        args.tol,
        MeasureInfo::new(ctx.spec(), ctx.normalization_c()),
    );
    echo_command(&mut report);
    report.basis_file = basis_file;
    report.symbol = symbol_echo;
    report
        .residuals
        .insert("recovery_rel_residual".to_string(), residual);
    let terms: Vec<RecoveredTerm> = recovered
        .terms()
        .filter(|(_, c)| c.norm() > 1e-9)
        .map(|(&(a, b, k), c)| RecoveredTerm {
            a,
            b,
            k,
            re: c.re,
            im: c.im,
        })
        .collect();
    report.recovered = Some(terms);
    report.pass = residual <= args.tol;
    Ok(CommandOutput { report })
}

pub fn run_coe_sample(args: &CoeSampleArgs) -> Result<CommandOutput> {
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    if args.count > 10_000_000 {
        bail!(
            "--count {} exceeds the supported maximum 10000000",
            args.count
        );
    }
    let samples = sample_boundary_r(args.count, args.seed);
    let mut csv = String::from("w11_re,w11_im,w22_re,w22_im,w12_re,w12_im\n");
    let mut max_unitarity: f64 = 0.0;
    let mut max_det_defect: f64 = 0.0;
    let mut mean_w12_sq = 0.0;
    for p in &samples {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_sig17(p.w11.re),
            fmt_sig17(p.w11.im),
            fmt_sig17(p.w22.re),
            fmt_sig17(p.w22.im),
            fmt_sig17(p.w12.re),
            fmt_sig17(p.w12.im)
        ));
        max_unitarity = max_unitarity.max(p.unitarity_defect());
        max_det_defect = max_det_defect.max((p.det().norm() - 1.0).abs());
        mean_w12_sq += p.w12.norm_sqr();
    }
    mean_w12_sq /= args.count as f64;
    std::fs::write(&args.out, csv)?;

    let spec = QuadratureSpec::for_degree(2);
    let ctx = MeasureContext::new(spec)?;
    let mut report = Report::new(
        "coe-sample",
        2,
        1e-12,
        MeasureInfo::new(ctx.spec(), ctx.normalization_c()),
    );
    echo_command(&mut report);
    report.seed = Some(args.seed);
    report
        .residuals
        .insert("max_unitarity_defect".to_string(), max_unitarity);
    report
        .residuals
        .insert("max_det_defect".to_string(), max_det_defect);
    report
        .residuals
        .insert("mean_abs_w12_sq".to_string(), mean_w12_sq);
    let mut counts = BTreeMap::new();
    counts.insert("samples".to_string(), args.count as u64);
    report.counts = Some(counts);
    report.pass = max_unitarity <= 1e-12 && max_det_defect <= 1e-12;
    Ok(CommandOutput { report })
}

fn write_decay_csv(path: &Path, profile: &[ProfilePoint]) -> Result<()> {
    let mut out = String::from("r,max_abs_entry\n");
    for p in profile {
        out.push_str(&format!("{},{}\n", p.r, fmt_sig17(p.max_abs_entry)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Prints the report to stdout and optionally to a file; returns the exit
/// status (0 pass, 1 numeric failure).
pub fn emit_report(report: &Report, report_path: Option<&PathBuf>) -> Result<i32> {
    let json = to_json_deterministic(report)?;
    print!("{json}");
    if let Some(path) = report_path {
        write_json_file(path, report)?;
    }
    Ok(if report.pass { 0 } else { 1 })
}

/// Error report for validation failures, printed on stdout so every run
/// leaves machine-readable output.
pub fn emit_error(err: &anyhow::Error) -> i32 {
    let payload = serde_error_json(err);
    println!("{payload}");
    eprintln!("error: {err:#}");
    2
}

fn serde_error_json(err: &anyhow::Error) -> String {
    // Minimal hand-rolled JSON to avoid escaping surprises.
    let msg = format!("{err:#}")
        .replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', " ");
    format!(
        "{{\"schema\":\"{}\",\"error\":\"{}\"}}",
        tetralab_core::report::REPORT_SCHEMA,
        msg
    )
}
