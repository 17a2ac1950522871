use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use widthlab_core::content::verify_cover;
use widthlab_core::decompose::{ball_neighborhoods, check_hypothesis_with};
use widthlab_core::planar::{random_drawing, verify_witness, TreesDiagnostic, DEFAULT_SNAP};
use widthlab_core::separator::MinimalSeparator;
use widthlab_core::{
    audit_drawing, check_boundary_condition, coarea_check, content, decompose, decompose_chunked, is_separating, k5_trees_construction,
    minimal_separator, verify_certificate, AuditOptions, AuditReport, ContentMode, DecomposeConfig, Decomposition, Drawing, EpsilonTable, Error,
    FiniteMetricSpace, HypothesisReport, PointSet, SeparatorParams, VerifyReport, WidthCertificate,
};

use crate::io::{parse_space, Run, SpaceFile};
use crate::settings::{parse_list, parse_zeta, Settings};
use crate::{Cli, Command, Common, DecomposeArgs};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 2;

/// Common parameters after merging flags over the config file.
struct Ctx {
    settings: Settings,
    common: Common,
}

impl Ctx {
    fn f64(&self, flag: Option<f64>, key: &str) -> Result<Option<f64>> {
        self.settings.f64(flag, key)
    }

    fn require_f64(&self, flag: Option<f64>, key: &str) -> Result<f64> {
        self.f64(flag, key)?.ok_or_else(|| anyhow!("missing parameter `{key}` (flag --{key} or config key {key})"))
    }

    fn u64(&self, flag: Option<u64>, key: &str) -> Result<Option<u64>> {
        self.settings.u64(flag, key)
    }

    fn n(&self) -> Result<u32> {
        let n = self.u64(self.common.n, "n")?.ok_or_else(|| anyhow!("missing parameter `n` (flag --n or config key n)"))?;
        u32::try_from(n).ok().filter(|&n| n >= 1).ok_or_else(|| anyhow!("n: must be a positive dimension, got {n}"))
    }

    fn r(&self) -> Result<f64> {
        positive("R", self.require_f64(self.common.r, "R")?)
    }

    fn zeta(&self) -> Result<Option<f64>> {
        parse_zeta(self.settings.string(self.common.zeta.clone(), "zeta")?.as_deref())
    }

    fn input(&self) -> Result<Option<PathBuf>> {
        Ok(self.settings.string(self.common.input.as_ref().map(|p| p.display().to_string()), "input")?.map(PathBuf::from))
    }

    fn require_input(&self) -> Result<PathBuf> {
        self.input()?.ok_or_else(|| anyhow!("missing parameter `input` (flag --input or config key input)"))
    }

    fn force(&self) -> Result<bool> {
        self.settings.flag(self.common.force, "force")
    }

    fn out_dir(&self) -> Result<PathBuf> {
        if let Some(dir) = std::env::var_os("WIDTHLAB_OUT").filter(|v| !v.is_empty()) {
            return Ok(PathBuf::from(dir));
        }
        let flag = self.common.out_dir.as_ref().map(|p| p.display().to_string());
        Ok(self.settings.string(flag, "out_dir")?.map(PathBuf::from).unwrap_or_else(|| PathBuf::from("widthlab-out")))
    }

    /// Loads the input space and records its digest.
    fn space(&self, run: &mut Run) -> Result<FiniteMetricSpace> {
        let path = self.require_input()?;
        let bytes = run.read_input("input", &path)?;
        let mesh_h = self.f64(self.common.mesh_h, "mesh_h")?;
        let space = parse_space(&path, &bytes, mesh_h)?;
        run.param("points", space.len());
        run.param("mesh_h", space.mesh_h());
        Ok(space)
    }

    fn scale_s(&self, space: &FiniteMetricSpace) -> Result<f64> {
        positive("scale_s", self.f64(self.common.scale_s, "scale_s")?.unwrap_or(2.0 * space.mesh_h()))
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        bail!("{key}: must be positive and finite, got {v}")
    }
}

fn mode(raw: Option<String>) -> Result<ContentMode> {
    match raw.as_deref().unwrap_or("auto") {
        "exact" => Ok(ContentMode::Exact),
        "greedy" => Ok(ContentMode::Greedy),
        "auto" => Ok(ContentMode::Auto),
        other => bail!("mode: expected exact, greedy or auto, got `{other}`"),
    }
}

fn target(space: &FiniteMetricSpace, raw: Option<String>) -> Result<PointSet> {
    let Some(raw) = raw else { return Ok(space.all_points()) };
    let ids: Vec<usize> = parse_list("target", &raw)?;
    let set: PointSet = ids.into_iter().collect();
    space.check_set(&set).context("target")?;
    Ok(set)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

pub fn run(cli: Cli) -> Result<i32> {
    let settings = Settings::load(cli.common.config.as_deref())?;
    let ctx = Ctx { settings, common: cli.common };
    if let Some(threads) = ctx.u64(ctx.common.threads, "threads")? {
        rayon::ThreadPoolBuilder::new().num_threads(threads as usize).build_global().context("configuring the thread pool")?;
    }
    let out = ctx.out_dir()?;
    match cli.command {
        Command::Gen => gen(&ctx, out),
        Command::Content { target, mode } => content_cmd(&ctx, out, target, mode),
        Command::CoareaCheck { x, r1, r2, shell_width, mode, target } => coarea(&ctx, out, x, r1, r2, shell_width, mode, target),
        Command::Separate { d, move_budget } => separate(&ctx, out, d, move_budget),
        Command::Decompose(args) => decompose_cmd(&ctx, out, &args, false),
        Command::DecomposeChunked(args) => decompose_cmd(&ctx, out, &args, true),
        Command::BoundaryCheck { radius, neighborhoods } => boundary(&ctx, out, radius, neighborhoods),
        Command::Verify { certificate } => verify(&ctx, out, certificate),
        Command::K5Audit { collision_tol, density, snap, bends } => k5_audit(&ctx, out, collision_tol, density, snap, bends),
        Command::Sweep { multipliers, chunked } => sweep(&ctx, out, multipliers, chunked),
    }
}

fn gen(ctx: &Ctx, out: PathBuf) -> Result<i32> {
    let mut run = Run::new("gen", out)?;
    let space = ctx.space(&mut run)?;
    let matrix = space.to_matrix();
    let csv: String = matrix.iter().map(|row| row.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",") + "\n").collect();
    run.write_json("space.json", &SpaceFile { mesh_h: space.mesh_h(), matrix })?;
    run.write_text("space.csv", &csv)?;
    let diameter = space.diameter(&space.all_points());
    run.write_metrics(&[("points", space.len().to_string()), ("mesh_h", fmt(space.mesh_h())), ("diameter", fmt(diameter))])?;
    for w in space.warnings() {
        eprintln!("warning: {w}");
    }
    run.finish(EXIT_PASS, "pass")
}

fn content_cmd(ctx: &Ctx, out: PathBuf, target_ids: Option<String>, mode_raw: Option<String>) -> Result<i32> {
    let mut run = Run::new("content", out)?;
    let space = ctx.space(&mut run)?;
    let n = ctx.n()?;
    let zeta = ctx.zeta()?;
    let mode = mode(ctx.settings.string(mode_raw, "mode")?)?;
    let target = target(&space, ctx.settings.string(target_ids, "target")?)?;
    run.param("n", n);
    run.param("zeta", zeta);
    run.param("mode", mode);
    run.param("target_size", target.len());
    let est = content(&space, &target, n, zeta, mode)?;
    let covers = verify_cover(&space, &target, &est);
    #[derive(Serialize)]
    struct Out<'a> {
        schema: &'static str,
        target: &'a PointSet,
        cover_verified: bool,
        #[serde(flatten)]
        estimate: &'a widthlab_core::ContentEstimate,
    }
    run.write_json("content.json", &Out { schema: "widthlab.content/1", target: &target, cover_verified: covers, estimate: &est })?;
    run.write_metrics(&[("value", fmt(est.value)), ("balls", est.cover.len().to_string()), ("cover_verified", covers.to_string())])?;
    let code = if covers { EXIT_PASS } else { EXIT_FAIL };
    run.finish(code, if covers { "pass" } else { "cover_rejected" })
}

#[allow(clippy::too_many_arguments)]
fn coarea(
    ctx: &Ctx,
    out: PathBuf,
    x: Option<u64>,
    r1: Option<f64>,
    r2: Option<f64>,
    shell_width: Option<f64>,
    mode_raw: Option<String>,
    target_ids: Option<String>,
) -> Result<i32> {
    let mut run = Run::new("coarea-check", out)?;
    let space = ctx.space(&mut run)?;
    let n = ctx.n()?;
    let zeta = ctx.zeta()?;
    let x = ctx.u64(x, "x")?.unwrap_or(0) as usize;
    let r1 = ctx.require_f64(r1, "r1")?;
    let r2 = ctx.require_f64(r2, "r2")?;
    let width = positive("shell_width", ctx.f64(shell_width, "shell_width")?.unwrap_or(space.mesh_h()))?;
    let mode = mode(ctx.settings.string(mode_raw, "mode")?)?;
    let u = target(&space, ctx.settings.string(target_ids, "target")?)?;
    for (k, v) in [("x", x as f64), ("r1", r1), ("r2", r2), ("shell_width", width)] {
        run.param(k, v);
    }
    run.param("n", n);
    run.param("zeta", zeta);
    run.param("mode", mode);
    let rep = coarea_check(&space, &u, x, r1, r2, n, zeta, width, mode)?;
    let pass = rep.pass && rep.windows_ok;
    run.write_json("coarea.json", &rep)?;
    run.write_metrics(&[
        ("lhs", fmt(rep.lhs)),
        ("rhs", fmt(rep.rhs)),
        ("slack", fmt(rep.slack)),
        ("pass", rep.pass.to_string()),
        ("windows_ok", rep.windows_ok.to_string()),
    ])?;
    run.finish(if pass { EXIT_PASS } else { EXIT_FAIL }, if pass { "pass" } else { "inequality_failed" })
}

fn separate(ctx: &Ctx, out: PathBuf, d: Option<f64>, budget: Option<u64>) -> Result<i32> {
    let mut run = Run::new("separate", out)?;
    let space = ctx.space(&mut run)?;
    let n = ctx.n()?;
    let zeta = ctx.zeta()?;
    let d = positive("D", ctx.require_f64(d, "D")?)?;
    let s = ctx.scale_s(&space)?;
    let delta = positive("delta", ctx.f64(ctx.common.delta, "delta")?.unwrap_or(1e-6 * d.powi(n as i32 - 1)))?;
    let budget = ctx.u64(budget, "move_budget")?.unwrap_or(100_000) as usize;
    run.param("n", n);
    run.param("zeta", zeta);
    run.param("D", d);
    run.param("scale_s", s);
    run.param("delta", delta);
    run.param("move_budget", budget);
    let params = SeparatorParams::for_space(&space).with_scale(s);
    let sep: MinimalSeparator = minimal_separator(&space, d, n, zeta, delta, budget, &params)?;
    let recheck = is_separating(&space, &sep.result.z, d, s);
    let ok = recheck.is_ok();
    #[derive(Serialize)]
    struct Out<'a> {
        schema: &'static str,
        separating: bool,
        #[serde(flatten)]
        sep: &'a MinimalSeparator,
    }
    run.write_json("separator.json", &Out { schema: "widthlab.separator/1", separating: ok, sep: &sep })?;
    run.write_metrics(&[
        ("separator_points", sep.result.z.len().to_string()),
        ("pieces", sep.result.pieces.len().to_string()),
        ("content", fmt(sep.result.content.value)),
        ("initial_content", fmt(sep.initial_content)),
        ("moves", sep.moves.len().to_string()),
        ("separating", ok.to_string()),
    ])?;
    run.finish(if ok { EXIT_PASS } else { EXIT_FAIL }, if ok { "pass" } else { "not_separating" })
}

/// Verified failure carried out of the library, if the error is one.
enum Failure {
    Hypothesis(Box<HypothesisReport>, usize),
    Rejected(Box<VerifyReport>, usize),
    /// A forced run on a violating input that could not finish.
    Incomplete(Box<HypothesisReport>, String),
}

fn failure(err: Error) -> std::result::Result<Failure, Error> {
    let mut level = 0;
    let mut cur = err;
    loop {
        match cur {
            Error::HypothesisFailed(h) => return Ok(Failure::Hypothesis(h, level)),
            Error::CertificateRejected(v) => return Ok(Failure::Rejected(v, level)),
            Error::RecursionFailed { level: l, source, .. } if matches!(*source, Error::HypothesisFailed(_) | Error::RecursionFailed { .. } | Error::CertificateRejected(_)) => {
                level = l + 1;
                cur = *source;
            }
            other => return Err(other),
        }
    }
}

#[derive(Serialize)]
struct DecomposeOut<'a> {
    schema: &'static str,
    status: &'a str,
    input_sha256: Option<&'a str>,
    #[serde(rename = "R")]
    r: f64,
    n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_level: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hypothesis: Option<&'a HypothesisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verify: Option<&'a VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a Decomposition>,
}

struct DecomposeRun {
    status: &'static str,
    code: i32,
    result: std::result::Result<Decomposition, Failure>,
}

fn config(ctx: &Ctx, args: &DecomposeArgs, n: u32, chunked: bool) -> Result<DecomposeConfig> {
    let mut cfg = DecomposeConfig { force: ctx.force()?, ..DecomposeConfig::default() };
    cfg.scale_s = ctx.f64(ctx.common.scale_s, "scale_s")?.map(|s| positive("scale_s", s)).transpose()?;
    cfg.delta = ctx.f64(ctx.common.delta, "delta")?.map(|d| positive("delta", d)).transpose()?;
    if let Some(b) = ctx.u64(args.move_budget, "move_budget")? {
        cfg.move_budget = b as usize;
    }
    if let Some(b) = ctx.u64(args.base_point, "base_point")? {
        cfg.base_point = b as usize;
    }
    if let Some(m) = ctx.f64(args.eps_multiplier, "eps_multiplier")? {
        let base = if chunked { EpsilonTable::chunked(n) } else { EpsilonTable::standard(n) };
        cfg.eps = Some(base.scaled(positive("eps_multiplier", m)?)?);
    }
    Ok(cfg)
}

fn run_decompose(space: &FiniteMetricSpace, r: f64, n: u32, cfg: &DecomposeConfig, chunked: bool) -> Result<DecomposeRun> {
    let res = if chunked { decompose_chunked(space, r, n, cfg) } else { decompose(space, r, n, cfg) };
    let res = match res {
        Err(e) if cfg.force && !matches!(e, Error::HypothesisFailed(_) | Error::CertificateRejected(_)) => {
            let table = cfg.eps.clone().unwrap_or_else(|| if chunked && n > 1 { EpsilonTable::chunked(n) } else { EpsilonTable::standard(n) });
            match check_hypothesis_with(space, r, n, &table) {
                Ok(h) if !h.pass => {
                    return Ok(DecomposeRun { status: "forced_incomplete", code: EXIT_FAIL, result: Err(Failure::Incomplete(Box::new(h), format!("{e}"))) })
                }
                _ => Err(e),
            }
        }
        other => other,
    };
    Ok(match res {
        Ok(dec) if dec.forced || !dec.hypotheses_ok => DecomposeRun { status: "forced", code: EXIT_FAIL, result: Ok(dec) },
        Ok(dec) => DecomposeRun { status: "pass", code: EXIT_PASS, result: Ok(dec) },
        Err(e) => match failure(e)? {
            f @ Failure::Hypothesis(..) => DecomposeRun { status: "hypothesis_failed", code: EXIT_FAIL, result: Err(f) },
            f @ Failure::Rejected(..) => DecomposeRun { status: "certificate_rejected", code: EXIT_FAIL, result: Err(f) },
            f @ Failure::Incomplete(..) => DecomposeRun { status: "forced_incomplete", code: EXIT_FAIL, result: Err(f) },
        },
    })
}

fn decompose_cmd(ctx: &Ctx, out: PathBuf, args: &DecomposeArgs, chunked: bool) -> Result<i32> {
    let name = if chunked { "decompose-chunked" } else { "decompose" };
    let mut run = Run::new(name, out)?;
    let space = ctx.space(&mut run)?;
    let r = ctx.r()?;
    let n = ctx.n()?;
    let cfg = config(ctx, args, n, chunked)?;
    run.param("R", r);
    run.param("n", n);
    run.param("force", cfg.force);
    run.param("scale_s", cfg.scale_s.unwrap_or(2.0 * space.mesh_h()));
    run.param("delta", cfg.delta);
    run.param("move_budget", cfg.move_budget);
    run.param("base_point", cfg.base_point);
    run.param("eps_multiplier", ctx.f64(args.eps_multiplier, "eps_multiplier")?);
    let outcome = run_decompose(&space, r, n, &cfg, chunked)?;
    let digest = run.input_digest("input").map(str::to_string);
    let mut rec = DecomposeOut {
        schema: "widthlab.decompose/1",
        status: outcome.status,
        input_sha256: digest.as_deref(),
        r,
        n,
        failed_level: None,
        error: None,
        hypothesis: None,
        verify: None,
        result: None,
    };
    let mut metrics = vec![("status", outcome.status.to_string())];
    match &outcome.result {
        Ok(dec) => {
            rec.result = Some(dec);
            run.write_json("certificate.json", &dec.certificate)?;
            run.write_text("complex.dot", &dec.certificate.complex.to_dot())?;
            metrics.extend([
                ("max_fiber", fmt(dec.certificate.max_fiber)),
                ("dim", dec.certificate.dim().to_string()),
                ("simplices", dec.certificate.complex.num_simplices().to_string()),
                ("verify_pass", dec.verify.pass.to_string()),
                ("hypotheses_ok", dec.hypotheses_ok.to_string()),
                ("fiber_arithmetic_ok", dec.fiber_arithmetic_ok.to_string()),
                ("levels", dec.levels.len().to_string()),
            ]);
            if let Some(ch) = &dec.chunks {
                metrics.push(("union_separating", ch.union_separating.to_string()));
            }
        }
        Err(Failure::Hypothesis(h, level)) => {
            rec.hypothesis = Some(h);
            rec.failed_level = Some(*level);
            metrics.extend([("hypothesis_worst", fmt(h.worst_value)), ("hypothesis_threshold", fmt(h.threshold))]);
        }
        Err(Failure::Rejected(v, level)) => {
            rec.verify = Some(v);
            rec.failed_level = Some(*level);
            metrics.push(("max_fiber", fmt(v.max_fiber)));
        }
        Err(Failure::Incomplete(h, msg)) => {
            rec.hypothesis = Some(h);
            rec.error = Some(msg);
            metrics.extend([("hypothesis_worst", fmt(h.worst_value)), ("hypothesis_threshold", fmt(h.threshold))]);
        }
    }
    run.write_json(if chunked { "decompose_chunked.json" } else { "decompose.json" }, &rec)?;
    run.write_metrics(&metrics)?;
    run.finish(outcome.code, outcome.status)
}

fn boundary(ctx: &Ctx, out: PathBuf, radius: Option<f64>, hoods: Option<PathBuf>) -> Result<i32> {
    let mut run = Run::new("boundary-check", out)?;
    let space = ctx.space(&mut run)?;
    let r = ctx.r()?;
    let n = ctx.n()?;
    let s = ctx.scale_s(&space)?;
    let hoods_path = ctx.settings.string(hoods.map(|p| p.display().to_string()), "neighborhoods")?.map(PathBuf::from);
    let neighborhoods: BTreeMap<usize, PointSet> = match &hoods_path {
        Some(path) => {
            let bytes = run.read_input("neighborhoods", path)?;
            let raw: BTreeMap<String, Vec<usize>> =
                serde_json::from_slice(&bytes).with_context(|| format!("{}: expected an object from point id to id lists", path.display()))?;
            raw.into_iter()
                .map(|(k, v)| {
                    let x: usize = k.parse().map_err(|_| anyhow!("{}: key `{k}` is not a point id", path.display()))?;
                    Ok((x, v.into_iter().collect()))
                })
                .collect::<Result<_>>()?
        }
        None => {
            let radius = positive("radius", ctx.f64(radius, "radius")?.unwrap_or(r))?;
            run.param("radius", radius);
            ball_neighborhoods(&space, radius)
        }
    };
    run.param("R", r);
    run.param("n", n);
    run.param("scale_s", s);
    let eps = EpsilonTable::standard(n.max(1));
    let rep = check_boundary_condition(&space, r, n, &neighborhoods, s, &eps)?;
    run.write_json("boundary.json", &rep)?;
    run.write_metrics(&[
        ("pass", rep.pass.to_string()),
        ("worst_value", fmt(rep.worst_value)),
        ("threshold", fmt(rep.threshold)),
        ("violations", rep.violations.to_string()),
        ("containment_failures", rep.containment_failures.len().to_string()),
    ])?;
    run.finish(if rep.pass { EXIT_PASS } else { EXIT_FAIL }, if rep.pass { "pass" } else { "condition_failed" })
}

fn verify(ctx: &Ctx, out: PathBuf, certificate: Option<PathBuf>) -> Result<i32> {
    let mut run = Run::new("verify", out)?;
    let space = ctx.space(&mut run)?;
    let path = ctx
        .settings
        .string(certificate.map(|p| p.display().to_string()), "certificate")?
        .map(PathBuf::from)
        .ok_or_else(|| anyhow!("missing parameter `certificate` (flag --certificate or config key certificate)"))?;
    let bytes = run.read_input("certificate", &path)?;
    let cert: WidthCertificate = serde_json::from_slice(&bytes).with_context(|| format!("{}: invalid certificate", path.display()))?;
    let rep = verify_certificate(&space, &cert).with_context(|| format!("{}: field `assignment`", path.display()))?;
    run.param("R", cert.r);
    run.param("n", cert.n);
    run.write_json("verify.json", &rep)?;
    run.write_metrics(&[
        ("pass", rep.pass.to_string()),
        ("max_fiber", fmt(rep.max_fiber)),
        ("mismatches", rep.mismatches.len().to_string()),
        ("offending", rep.offending.len().to_string()),
    ])?;
    run.finish(if rep.pass { EXIT_PASS } else { EXIT_FAIL }, if rep.pass { "pass" } else { "rejected" })
}

fn read_drawing(run: &mut Run, path: &Path) -> Result<Drawing> {
    let bytes = run.read_input("input", path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("{}: invalid drawing", path.display()))
}

fn k5_audit(ctx: &Ctx, out: PathBuf, tol: Option<f64>, density: Option<f64>, snap: Option<f64>, bends: Option<u64>) -> Result<i32> {
    let mut run = Run::new("k5-audit", out)?;
    let drawing = match ctx.input()? {
        Some(path) => read_drawing(&mut run, &path)?,
        None => {
            let seed = ctx.u64(ctx.common.seed, "seed")?.ok_or_else(|| anyhow!("k5-audit needs --input or --seed"))?;
            let r = ctx.f64(ctx.common.r, "R")?.unwrap_or(1.0);
            let bends = ctx.u64(bends, "bends")?.unwrap_or(4) as usize;
            run.param("seed", seed);
            run.param("bends", bends);
            random_drawing(positive("R", r)?, seed, bends)
        }
    };
    let opts = AuditOptions {
        collision_tol: positive("collision_tol", ctx.f64(tol, "collision_tol")?.unwrap_or(1e-6))?,
        density: positive("density", ctx.f64(density, "density")?.unwrap_or(4.0))?,
        snap: positive("snap", ctx.f64(snap, "snap")?.unwrap_or(DEFAULT_SNAP))?,
    };
    run.param("R", drawing.r);
    run.param("collision_tol", opts.collision_tol);
    run.param("density", opts.density);
    run.param("snap", opts.snap);
    let report = audit_drawing(&drawing, &opts)?;
    let verified = match &report.witness {
        Some(w) => verify_witness(&drawing, w, opts.collision_tol)?,
        None => false,
    };
    let trees = k5_trees_construction(&drawing)?;
    #[derive(Serialize)]
    struct Out<'a> {
        schema: &'static str,
        witness_verified: bool,
        #[serde(flatten)]
        report: &'a AuditReport,
        trees: &'a TreesDiagnostic,
    }
    run.write_json("drawing.json", &drawing)?;
    run.write_json("k5_audit.json", &Out { schema: "widthlab.k5_audit/1", witness_verified: verified, report: &report, trees: &trees })?;
    let mut metrics = vec![
        ("exceeds_r", report.exceeds_r.to_string()),
        ("witness_verified", verified.to_string()),
        ("samples", report.samples.to_string()),
        ("crossings", report.crossings.to_string()),
        ("tree_intersections", trees.intersections.len().to_string()),
    ];
    if let Some(w) = &report.witness {
        metrics.push(("graph_dist", fmt(w.graph_dist)));
        metrics.push(("image_dist", fmt(w.image_dist)));
    }
    run.write_metrics(&metrics)?;
    let pass = report.exceeds_r && verified;
    run.finish(if pass { EXIT_PASS } else { EXIT_FAIL }, if pass { "pass" } else { "no_witness" })
}

fn sweep(ctx: &Ctx, out: PathBuf, multipliers: Option<String>, chunked_flag: bool) -> Result<i32> {
    let mut run = Run::new("sweep", out)?;
    let space = ctx.space(&mut run)?;
    let r = ctx.r()?;
    let n = ctx.n()?;
    let chunked = ctx.settings.flag(chunked_flag, "chunked")?;
    let raw = ctx.settings.string(multipliers, "multipliers")?.unwrap_or_else(|| "0.5,1,2,4".into());
    let ms: Vec<f64> = parse_list("multipliers", &raw)?;
    if ms.is_empty() {
        bail!("multipliers: empty list");
    }
    run.param("R", r);
    run.param("n", n);
    run.param("chunked", chunked);
    run.param("multipliers", &ms);
    #[derive(Serialize)]
    struct Cell {
        multiplier: f64,
        status: String,
        exit_code: i32,
        hypothesis_pass: bool,
        hypothesis_worst: f64,
        hypothesis_threshold: f64,
        max_fiber: Option<f64>,
        dim: Option<isize>,
        verify_pass: Option<bool>,
    }
    let mut cells = Vec::new();
    for &m in &ms {
        let args = DecomposeArgs { eps_multiplier: Some(m), ..DecomposeArgs::default() };
        let cfg = config(ctx, &args, n, chunked)?;
        let outcome = run_decompose(&space, r, n, &cfg, chunked)?;
        let cell = match &outcome.result {
            Ok(dec) => Cell {
                multiplier: m,
                status: outcome.status.into(),
                exit_code: outcome.code,
                hypothesis_pass: dec.hypothesis.pass,
                hypothesis_worst: dec.hypothesis.worst_value,
                hypothesis_threshold: dec.hypothesis.threshold,
                max_fiber: Some(dec.certificate.max_fiber),
                dim: Some(dec.certificate.dim()),
                verify_pass: Some(dec.verify.pass),
            },
            Err(Failure::Hypothesis(h, _) | Failure::Incomplete(h, _)) => Cell {
                multiplier: m,
                status: outcome.status.into(),
                exit_code: outcome.code,
                hypothesis_pass: false,
                hypothesis_worst: h.worst_value,
                hypothesis_threshold: h.threshold,
                max_fiber: None,
                dim: None,
                verify_pass: None,
            },
            Err(Failure::Rejected(v, _)) => Cell {
                multiplier: m,
                status: outcome.status.into(),
                exit_code: outcome.code,
                hypothesis_pass: true,
                hypothesis_worst: f64::NAN,
                hypothesis_threshold: f64::NAN,
                max_fiber: Some(v.max_fiber),
                dim: Some(v.dim),
                verify_pass: Some(false),
            },
        };
        cells.push(cell);
    }
    let rows: Vec<Vec<String>> = cells
        .iter()
        .map(|c| {
            vec![
                fmt(c.multiplier),
                c.status.clone(),
                (c.exit_code == EXIT_PASS).to_string(),
                c.hypothesis_pass.to_string(),
                fmt(c.hypothesis_worst),
                fmt(c.hypothesis_threshold),
                c.max_fiber.map(fmt).unwrap_or_default(),
            ]
        })
        .collect();
    run.write_json("sweep.json", &serde_json::json!({ "schema": "widthlab.sweep/1", "R": r, "n": n, "chunked": chunked, "cells": cells }))?;
    run.write_csv("sweep.csv", &["multiplier", "status", "pass", "hypothesis_pass", "hypothesis_worst", "hypothesis_threshold", "max_fiber"], &rows)?;
    let rejected = cells.iter().any(|c| c.status == "certificate_rejected");
    run.write_metrics(&[("cells", cells.len().to_string()), ("passing", cells.iter().filter(|c| c.exit_code == EXIT_PASS).count().to_string())])?;
    run.finish(if rejected { EXIT_FAIL } else { EXIT_PASS }, if rejected { "certificate_rejected" } else { "complete" })
}
