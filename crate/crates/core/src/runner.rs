//! Task execution for the `mforge` binary: builds suites of checks, writes
//! the JSON report (and the flow CSV) atomically into the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{coincident_point, ExperimentConfig, Task, Tolerances};
use crate::convex::{gradient_inverse, legendre_value, verify_invariance_identities, ConvexInvariantFunction};
use crate::critical::{
    calabi_decomposition, critical_check, extremal_field, mu_invariant, mu_invariant_constancy,
    p1_configuration, CRITICAL_TOL,
};
use crate::error::{Error, Result};
use crate::flow::{group_flow, kempf_ness_monitor, max_energy_increase, FlowTrace};
use crate::lie::{c, pair, random_complex_element, random_lie_element, ComplexLieElement, LieElement};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::measure::{
    d_functional, legendre_brute, legendre_functional, normalize_phi, soliton_pair, tian_zhu_check,
    DiscreteMeasure, ScalarConvex,
};
use crate::phase::{random_group_element, verify_coadjoint_hessian_identities, verify_moment_axioms, PhasePoint, PhaseSpace, SpaceSpec};
use crate::report::{Check, Report, Suite};

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Replaces the config seed.
    pub seed: Option<u64>,
    /// Replaces `tolerances.grad`.
    pub tol: Option<f64>,
}

impl RunOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunOptions { out_dir: out_dir.into(), seed: None, tol: None }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub written: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            2
        }
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut fh = fs::File::create(&tmp)?;
        fh.write_all(bytes)?;
        fh.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

struct Ctx<'a> {
    space: PhaseSpace,
    f: Box<dyn ConvexInvariantFunction>,
    cfg: &'a ExperimentConfig,
    tol: Tolerances,
}

pub fn run(task: Task, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    if let Some(t) = cfg.task {
        if t != task {
            return Err(Error::Config(format!("config is for task `{}`, not `{}`", t.name(), task.name())));
        }
    }
    let seed = opts.seed.unwrap_or(cfg.seed);
    let mut tol = cfg.tolerances;
    if let Some(t) = opts.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {t}")));
        }
        tol.grad = t;
    }
    let space = cfg.build_space()?;
    let f = cfg.build_function(&space)?;
    let ctx = Ctx { space, f, cfg, tol };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut csv = None;
    let suites = match task {
        Task::Flow => {
            let z0 = cfg.initial_point(&ctx.space, &mut rng)?;
            let (suite, traces) = suite_flow(&ctx, &[z0]);
            csv = traces.first().map(|t| t.to_csv());
            vec![suite]
        }
        Task::Decompose => {
            let z0 = cfg.initial_point(&ctx.space, &mut rng)?;
            let (flow, traces) = suite_flow(&ctx, &[z0]);
            let ends: Vec<PhasePoint> = traces.iter().map(|t| t.last().z.clone()).collect();
            vec![flow, suite_calabi(&ctx, &ends, &[])]
        }
        Task::Invariant => {
            let z = cfg.initial_point(&ctx.space, &mut rng)?;
            vec![suite_mu_invariant(&ctx, &z, &mut rng)]
        }
        Task::Extremal => {
            let z = cfg.initial_point(&ctx.space, &mut rng)?;
            vec![suite_extremal(&ctx, &z, &mut rng)]
        }
        Task::Legendre => vec![suite_legendre(&ctx, &mut rng), suite_tian_zhu(&ctx, &mut rng)],
        Task::VerifyAll => verify_all(&ctx, &mut rng)?,
    };

    let mut report = Report::new(task.name(), seed, cfg.space.clone(), &cfg.function, suites);
    fs::create_dir_all(&opts.out_dir)?;
    let mut written = Vec::new();
    if let Some(text) = csv {
        let p = opts.out_dir.join("flow.csv");
        write_atomic(&p, text.as_bytes())?;
        report.artifacts.push("flow.csv".into());
        written.push(p);
    }
    let p = opts.out_dir.join(format!("{}.json", task.name()));
    write_atomic(&p, report.to_json()?.as_bytes())?;
    written.push(p);
    Ok(RunOutcome { report, written })
}

fn verify_all(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<Vec<Suite>> {
    let mut suites = vec![suite_moment(ctx, rng), suite_invariance(ctx, rng), suite_coadjoint(ctx, rng)];
    let mut starts = vec![ctx.cfg.initial_point(&ctx.space, rng)?];
    while starts.len() < ctx.cfg.samples.flow_starts.max(1) {
        starts.push(ctx.space.random_point(rng));
    }
    let (flow, traces) = suite_flow(ctx, &starts);
    suites.push(flow);
    let ends: Vec<PhasePoint> = traces.iter().map(|t| t.last().z.clone()).collect();
    let special = special_points(&ctx.space)?;
    suites.push(suite_calabi(ctx, &ends, &special));
    let z = special.first().cloned().unwrap_or_else(|| starts[0].clone());
    suites.push(suite_mu_invariant(ctx, &z, rng));
    suites.push(suite_extremal(ctx, &z, rng));
    suites.push(suite_legendre(ctx, rng));
    suites.push(suite_tian_zhu(ctx, rng));
    Ok(suites)
}

/// Configurations with a known closed form: all-coincident points on `(P^1)^d`.
fn special_points(space: &PhaseSpace) -> Result<Vec<PhasePoint>> {
    Ok(match space.spec() {
        SpaceSpec::P1Power { .. } => vec![coincident_point(space)?],
        _ => vec![],
    })
}

fn suite_moment(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Suite {
    let mut s = Suite::new("moment_axioms");
    match verify_moment_axioms(&ctx.space, ctx.cfg.samples.moment, rng) {
        Ok(r) => {
            s.value("samples", r.samples as f64);
            s.check(Check::at_most("equivariance", r.equivariance_defect, ctx.tol.moment_equivariance));
            s.check(Check::at_most("moment_condition", r.moment_condition_defect, ctx.tol.moment_fd));
            s.check(Check::at_most("infinitesimal_equivariance", r.infinitesimal_defect, ctx.tol.moment_fd));
        }
        Err(e) => s.fail("moment axioms", &e),
    }
    s
}

fn suite_invariance(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Suite {
    let mut s = Suite::new("invariance_identities");
    match verify_invariance_identities(ctx.f.as_ref(), ctx.space.algebra(), ctx.cfg.samples.identity_trials, rng) {
        Ok(r) => {
            s.value("trials", r.trials as f64);
            for c in r.checks {
                s.check(Check::at_most(&c.identity, c.defect, c.tol));
            }
        }
        Err(e) => s.fail("invariance identities", &e),
    }
    s
}

fn suite_coadjoint(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Suite {
    let mut s = Suite::new("coadjoint_hessian");
    match verify_coadjoint_hessian_identities(&ctx.space, ctx.f.as_ref(), ctx.cfg.samples.hessian_points, rng) {
        Ok((r, literal)) => {
            for c in r.checks {
                s.check(Check::at_most(&c.identity, c.defect, ctx.tol.self_adjoint));
            }
            s.value("literal_symmetry_defect", literal);
            s.note("literal_symmetry_defect is the plain symmetric defect of the real form; informational");
        }
        Err(e) => s.fail("coadjoint identities", &e),
    }
    s
}

fn suite_flow(ctx: &Ctx, starts: &[PhasePoint]) -> (Suite, Vec<FlowTrace>) {
    let mut s = Suite::new("flow");
    let (mut rise, mut grad, mut excess, mut eq, mut steps) = (f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY, 0.0f64, 0usize);
    let mut traces = Vec::new();
    let strict = ctx.f.is_strict();
    for z0 in starts {
        match group_flow(&ctx.space, ctx.f.as_ref(), z0, &ctx.cfg.flow.step, ctx.tol.grad, ctx.cfg.flow.t_max) {
            Ok((trace, _)) => {
                rise = rise.max(max_energy_increase(&trace));
                grad = grad.max(trace.last().grad_norm);
                steps += trace.samples.len().saturating_sub(1);
                if let Some(w) = &trace.warning {
                    if !s.notes.contains(w) {
                        s.note(w.clone());
                    }
                }
                match kempf_ness_monitor(&ctx.space, &trace, ctx.f.as_ref()) {
                    Ok(k) => {
                        excess = excess.max(k.max_bound_excess);
                        eq = eq.max(k.max_equality_defect);
                    }
                    Err(Error::TraceTooShort(_)) => {}
                    Err(e) => s.fail("kempf-ness monitor", &e),
                }
                traces.push(trace);
            }
            Err(e) => s.fail("flow", &e),
        }
    }
    s.value("starts", starts.len() as f64);
    s.value("accepted_steps", steps as f64);
    s.check(Check::at_most("max_energy_increase", rise.max(0.0), ctx.tol.energy_slack));
    if strict {
        s.check(Check::at_most("terminal_grad_norm", grad, ctx.tol.grad));
    } else {
        s.value("terminal_grad_norm", grad);
    }
    if excess > f64::NEG_INFINITY {
        s.check(Check::at_most("kempf_ness_bound_excess", excess.max(0.0), ctx.tol.kn_slack));
        s.check(Check::at_most("kempf_ness_rate_defect", eq, ctx.tol.kn_equality));
    }
    (s, traces)
}

fn suite_calabi(ctx: &Ctx, ends: &[PhasePoint], special: &[PhasePoint]) -> Suite {
    let mut s = Suite::new("calabi_decomposition");
    let strict = ctx.f.is_strict();
    let (mut max_eig, mut sine, mut herm, mut used) = (f64::NEG_INFINITY, 0.0f64, 0.0f64, 0usize);
    let points: Vec<(&str, &PhasePoint)> =
        special.iter().map(|z| ("special", z)).chain(ends.iter().map(|z| ("terminus", z))).collect();
    for (kind, z) in points {
        match critical_check(&ctx.space, ctx.f.as_ref(), z, CRITICAL_TOL) {
            Ok(cc) if !cc.critical => {
                if kind == "special" {
                    s.note(format!("special point is not critical (residual {:.3e})", cc.residual));
                } else {
                    s.fail("terminus", &Error::NotCritical { residual: cc.residual, tol: CRITICAL_TOL });
                }
                continue;
            }
            Err(e) => {
                s.fail("critical check", &e);
                continue;
            }
            Ok(_) => {}
        }
        match calabi_decomposition(&ctx.space, ctx.f.as_ref(), z) {
            Ok(d) => {
                used += 1;
                if !d.eigenvalues.is_empty() {
                    max_eig = max_eig.max(d.max_eigenvalue());
                }
                sine = sine.max(d.zero_space_sine);
                herm = herm.max(d.hermitian_defect);
                if !s.series.contains_key("eigenvalues") {
                    s.series("eigenvalues", d.eigenvalues.clone());
                    s.value("zero_block_dim", d.zero_block_dim as f64);
                }
                if kind == "special" && !s.series.contains_key("special_eigenvalues") {
                    s.series("special_eigenvalues", d.eigenvalues.clone());
                    s.value("special_negative_count", d.negative_count() as f64);
                    s.value("special_gz_dim", d.gz_dim as f64);
                    s.value("special_kz_dim", d.kz_dim as f64);
                }
            }
            Err(e) => s.fail("decomposition", &e),
        }
    }
    s.value("points", used as f64);
    let max_eig = if max_eig == f64::NEG_INFINITY { 0.0 } else { max_eig };
    if strict {
        s.check(Check::at_most("max_eigenvalue", max_eig, ctx.tol.eigen));
        s.check(Check::at_most("zero_space_sine", sine, ctx.tol.angle));
    } else {
        s.value("max_eigenvalue", max_eig);
        s.value("zero_space_sine", sine);
        s.note("function is not strictly convex: spectrum sign and zero-space match are not asserted");
    }
    s.check(Check::at_most("hermitian_defect", herm, ctx.tol.eigen));
    s
}

fn random_combination(elems: &[ComplexLieElement], rng: &mut ChaCha8Rng) -> Result<ComplexLieElement> {
    let mut acc = elems[0].scale(0.0);
    for e in elems {
        acc = acc.add(&e.scale_complex(c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))?;
    }
    Ok(acc)
}

fn suite_mu_invariant(ctx: &Ctx, z: &PhasePoint, rng: &mut ChaCha8Rng) -> Suite {
    let mut s = Suite::new("mu_invariant");
    let run = |s: &mut Suite, rng: &mut ChaCha8Rng| -> Result<()> {
        let space = &ctx.space;
        let gz = space.stabilizer_g(z, DEFAULT_RANK_TOL);
        s.value("gz_dim", gz.len() as f64);
        if gz.is_empty() {
            s.note("g_z is trivial: nothing to test");
            return Ok(());
        }
        let xi = match extremal_field(space, ctx.f.as_ref(), z, ctx.tol.extremal, None) {
            Ok(ef) => ef.xi,
            Err(_) => LieElement::zero(space.algebra()),
        };
        let eta = random_combination(&gz, rng)?;
        let radius = ctx.cfg.measure.group_radius;
        let gs: Vec<_> = (0..ctx.cfg.samples.constancy).map(|_| random_group_element(space.basis(), rng, radius)).collect();
        let rep = mu_invariant_constancy(space, ctx.f.as_ref(), z, &xi, &eta, &gs)?;
        s.series("value", rep.value.to_vec());
        s.check(Check::at_most("relative_deviation", rep.relative_deviation, ctx.tol.constancy));
        let v = mu_invariant(space, ctx.f.as_ref(), z, &xi, &eta)?;
        s.value("mu_invariant_abs", v.norm());

        let control = random_complex_element(space.basis(), rng, 1.0);
        let rep = mu_invariant_constancy(space, ctx.f.as_ref(), z, &xi, &control, &gs)?;
        s.value("control_membership_defect", rep.eta_membership_defect);
        if rep.eta_membership_defect > ctx.tol.control {
            s.check(Check::at_least("control_deviation", rep.max_deviation, ctx.tol.control));
        } else {
            s.note("random control element happened to lie in g_z; control skipped");
        }
        Ok(())
    };
    if let Err(e) = run(&mut s, rng) {
        s.fail("mu-invariant", &e);
    }
    s
}

fn quadratic_closed_form(space: &PhaseSpace, d_prime: usize) -> Result<LieElement> {
    let d = space.num_components() as f64;
    let h = (2 * d_prime) as f64 - d;
    let m = crate::lie::CMatrix::from_diagonal(&crate::phase::CVector::from_row_slice(&[c(0.0, h), c(0.0, -h)]));
    LieElement::new(space.algebra(), vec![m])
}

fn suite_extremal(ctx: &Ctx, z: &PhasePoint, rng: &mut ChaCha8Rng) -> Suite {
    let mut s = Suite::new("extremal_field");
    let space = &ctx.space;
    let f = ctx.f.as_ref();
    if !f.is_strict() {
        s.note("function is not strictly convex: extremal field undefined");
        return s;
    }
    match extremal_field(space, f, z, ctx.tol.extremal, None) {
        Ok(ef) => {
            s.value("kz_dim", ef.kz_dim as f64);
            s.value("center_dim", ef.center_dim as f64);
            s.value("xi_norm", ef.xi.norm());
            s.check(Check::at_most("residual", ef.residual, ctx.tol.extremal));
            let init = random_lie_element(space.basis(), rng, 1.0);
            match extremal_field(space, f, z, ctx.tol.extremal, Some(&init)) {
                Ok(other) => s.check(Check::at_most(
                    "uniqueness",
                    other.xi.sub(&ef.xi).map(|d| d.norm()).unwrap_or(f64::INFINITY),
                    ctx.tol.extremal,
                )),
                Err(e) => s.fail("second solve", &e),
            }
        }
        Err(Error::EmptyStabilizer) => {
            s.value("kz_dim", 0.0);
            s.note("k_z is trivial: no extremal field");
        }
        Err(e) => s.fail("extremal field", &e),
    }
    if let (SpaceSpec::P1Power { d }, "quadratic") = (space.spec(), ctx.cfg.function.as_str()) {
        let mut worst: f64 = 0.0;
        let mut empty_ok = true;
        for dp in 0..=*d {
            let res = p1_configuration(space, dp, 0.0)
                .and_then(|z0| extremal_field(space, f, &z0, ctx.tol.extremal, None))
                .and_then(|ef| Ok(ef.xi.sub(&quadratic_closed_form(space, dp)?)?.norm()));
            match res {
                Ok(v) => worst = worst.max(v),
                Err(e) => s.fail(&format!("configuration d'={dp}"), &e),
            }
            if dp > 0 && dp < *d {
                let zt = p1_configuration(space, dp, 0.5);
                empty_ok &= matches!(zt.and_then(|zt| extremal_field(space, f, &zt, ctx.tol.extremal, None)), Err(Error::EmptyStabilizer));
            }
        }
        s.check(Check::at_most("closed_form_defect", worst, ctx.tol.extremal));
        s.check(Check::at_least("deformations_have_empty_stabilizer", if empty_ok { 1.0 } else { 0.0 }, 1.0));
    }
    s
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize, uniform: bool) -> Result<DiscreteMeasure> {
    if uniform {
        DiscreteMeasure::uniform(n, 1.0 / n as f64)
    } else {
        DiscreteMeasure::new((0..n).map(|_| rng.gen_range(0.05..2.0)).collect())
    }
}

fn suite_legendre(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Suite {
    let mut s = Suite::new("legendre");
    let run = |s: &mut Suite, rng: &mut ChaCha8Rng| -> Result<()> {
        let f = ctx.f.as_ref();
        if f.is_strict() {
            let basis = ctx.space.basis();
            let (mut trip, mut fy) = (0.0f64, 0.0f64);
            for _ in 0..ctx.cfg.samples.legendre_trials {
                let alpha = random_lie_element(basis, rng, 0.6).flat();
                let xi = f.gradient(&alpha)?;
                let back = gradient_inverse(f, &xi, 1e-13)?;
                trip = trip.max(back.sub(&alpha)?.norm() / (1.0 + alpha.norm()));
                let lhs = f.value(&alpha)? + legendre_value(f, &xi, 1e-13)?;
                fy = fy.max((lhs - pair(&alpha, &xi)?).abs() / (1.0 + lhs.abs()));
            }
            s.check(Check::at_most("gradient_inverse_round_trip", trip, ctx.tol.round_trip));
            s.check(Check::at_most("fenchel_young", fy, ctx.tol.fenchel_young));
        } else {
            s.note("function is not strictly convex: algebra Legendre checks skipped");
        }

        let n = ctx.cfg.measure.legendre_points;
        let m = random_measure(rng, n, false)?;
        let pair_s = soliton_pair(m.total())?;
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5 / m.total()..2.0)).collect();
        let psi: Vec<f64> = u.iter().map(|&t| pair_s.f.d1(t)).collect::<Result<_>>()?;
        let dual = legendre_functional(&pair_s, &m, &psi)?;
        let brute = legendre_brute(&pair_s.f, &m, &psi, (-10.0, 50.0))?;
        s.check(Check::at_most("brute_force_conjugate", (dual - brute).abs(), ctx.tol.brute));
        let uv = m.integrate(&u.iter().zip(&psi).map(|(a, b)| a * b).collect::<Vec<_>>())?;
        let fy = (d_functional(&pair_s.f, &m, &u)? + dual - uv).abs();
        s.check(Check::at_most("discrete_fenchel_young", fy, ctx.tol.fenchel_young));
        let grid: Vec<f64> = (0..100).map(|k| -8.0 + 16.0 * k as f64 / 99.0).collect();
        let us: Vec<f64> = (0..100).map(|k| 10f64.powf(-6.0 + 8.0 * k as f64 / 99.0)).collect();
        s.check(Check::at_most("soliton_pair_inverse", pair_s.inverse_defect(&grid, &us)?, ctx.tol.pair_inverse));
        Ok(())
    };
    if let Err(e) = run(&mut s, rng) {
        s.fail("legendre", &e);
    }
    s
}

fn suite_tian_zhu(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Suite {
    let mut s = Suite::new("tian_zhu");
    let (mut worst, mut chain) = (0.0f64, 0.0f64);
    let count = ctx.cfg.samples.tian_zhu_instances;
    for k in 0..count {
        let n = rng.gen_range(3..=ctx.cfg.measure.max_points);
        let res = random_measure(rng, n, k % 2 == 0).and_then(|m| {
            let raw = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
            let phi = normalize_phi(&m, &raw(rng))?;
            let (a, b) = (raw(rng), raw(rng));
            tian_zhu_check(&m, &phi, &a, &b)
        });
        match res {
            Ok(r) => {
                worst = worst.max(r.defect);
                chain = chain.max(r.chain_defect_corrected);
            }
            Err(e) => s.fail("instance", &e),
        }
    }
    s.value("instances", count as f64);
    s.value("chain_defect_corrected", chain);
    s.check(Check::at_most("defect", worst, ctx.tol.tian_zhu));
    s
}
