//! Command implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use quantumness::extremal::{
    default_grid_size, design_check, find_king, find_queen, king_design_probe, maximize_wehrl, minimize_m_infinity,
    search_queen, tammes, thomson, PointConfig, SearchResult,
};
use quantumness::husimi::{PlaneGrid, SphereGrid};
use quantumness::io::{to_csv, to_json, MeasureOutput, RunManifest, StateFile};
use quantumness::measures::{
    a_m_coherent_max, cumulative_a, cv_multipole_indicator, ipr_cv, m2_cv_closed, m2_cv_quadrature, m2_spin_multipole,
    m2_spin_quadrature, m_infinity_cv, m_infinity_spin, multipoles_spin, partial_q, wehrl_cv, wehrl_spin,
};
use quantumness::metrology::{
    avg_crb_cv, avg_crb_spin, avg_qfi_cv, avg_qfi_spin, qfi_displacement, qfi_rotation, CovMatrix2, CovMatrix3,
};
use quantumness::specfun::HalfInt;
use quantumness::states::{
    make_cat, make_coherent_cv, make_dicke, make_fock, make_gaussian_fock, make_photon_added, make_spin_coherent,
    random_spin_state, CatPhase, GaussianPure, SphereVec,
};
use quantumness::stellar::{reconstruct_state, Constellation};

use crate::args::{
    parse_range, Cli, Command, Family, FamilyArgs, MeasureArgs, MeasureKind, MetrologyArgs, MetrologyKind, SearchCmd,
    SeedArgs, SphereCmd, StateCmd,
};
use crate::Failure;

type Outcome = Result<(), Failure>;

/// A result with the run manifest attached.
#[derive(Serialize)]
struct WithManifest<'a, T: Serialize> {
    #[serde(flatten)]
    result: &'a T,
    manifest: &'a RunManifest,
}

struct Ctx {
    manifest: RunManifest,
    start: Instant,
}

impl Ctx {
    fn emit<T: Serialize>(&mut self, value: &T, out: Option<&Path>) -> Outcome {
        self.manifest.wall_time_s = self.start.elapsed().as_secs_f64();
        let text = to_json(&WithManifest { result: value, manifest: &self.manifest })?;
        write_text(&text, out)
    }
}

fn write_text(text: &str, out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => fs::write(p, format!("{text}\n"))?,
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        },
    }
    Ok(())
}

/// Reads a state file, or the `state` field of a search output.
fn read_state(path: &Path) -> Result<StateFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let inner = match value.get("state") {
        Some(state) if value.get("system").is_none() => state.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn read_points(path: &Path) -> Result<PointConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let raw: PointConfig = serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Ok(PointConfig::new(raw.points)?)
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::usage(format!("missing --{flag}")))
}

fn require_seed(run: &SeedArgs) -> Result<u64, Failure> {
    run.seed.ok_or_else(|| Failure::usage("stochastic commands require --seed"))
}

pub fn run(cli: &Cli, start: Instant) -> Outcome {
    let seed = match &cli.command {
        Command::Search(
            SearchCmd::Kings { run, .. }
            | SearchCmd::Queens { run, .. }
            | SearchCmd::WehrlMax { run, .. }
            | SearchCmd::MinfMin { run, .. }
            | SearchCmd::Probe { run, .. },
        ) => run.seed,
        Command::Sphere(SphereCmd::Thomson { run, .. } | SphereCmd::Tammes { run, .. }) => run.seed,
        Command::State(StateCmd::Make { family, .. }) => family.seed,
        _ => None,
    };
    let mut ctx = Ctx { manifest: RunManifest::new(std::env::args().collect(), seed), start };
    match &cli.command {
        Command::State(StateCmd::Make { family, out }) => {
            let state = build_state(family)?;
            ctx.manifest.tolerances.insert("cutoff_tol".into(), family.cutoff_tol);
            ctx.emit(&state, out.as_deref())
        }
        Command::Measure(args) => measure(&mut ctx, args),
        Command::Search(cmd) => search(&mut ctx, cmd),
        Command::Sphere(cmd) => sphere(&mut ctx, cmd),
        Command::Metrology(args) => metrology(&mut ctx, args),
    }
}

/// Builds the state described by the family flags.
pub fn build_state(f: &FamilyArgs) -> Result<StateFile, Failure> {
    let family = need(f.family, "family")?;
    let tol = f.cutoff_tol;
    let beta = || need(f.beta, "beta");
    let two_s = || need(f.two_s, "two-s");
    let state = match family {
        Family::Coherent => StateFile::Cv(make_coherent_cv(beta()?, tol)?),
        Family::Fock => StateFile::Cv(make_fock(need(f.n, "n")?)),
        Family::Squeezed => {
            let g = GaussianPure::new(f.beta.unwrap_or_default(), need(f.r, "r")?, f.theta_sq)?;
            StateFile::Cv(make_gaussian_fock(g, tol)?)
        }
        Family::Cat => {
            let phase = match (f.cat_angle, f.sign.as_deref()) {
                (Some(a), _) => CatPhase::Angle(a),
                (None, Some("+")) => CatPhase::Even,
                (None, Some("-")) => CatPhase::Odd,
                (None, Some(s)) => return Err(Failure::usage(format!("--sign must be + or -, got {s:?}"))),
                (None, None) => return Err(Failure::usage("cat needs --sign or --cat-angle")),
            };
            StateFile::Cv(make_cat(beta()?, phase, tol)?)
        }
        Family::Padd => StateFile::Cv(make_photon_added(beta()?, need(f.m, "m")?, tol)?),
        Family::Dicke => StateFile::Spin(make_dicke(two_s()?, need(f.two_m, "two-m")?)?),
        Family::SpinCoherent => {
            let n = SphereVec::new(need(f.theta, "theta")?, need(f.phi, "phi")?);
            StateFile::Spin(make_spin_coherent(two_s()?, n))
        }
        Family::RandomSpin => {
            let seed = f.seed.ok_or_else(|| Failure::usage("random states require --seed"))?;
            let mut rng = quantumness::extremal::restart_rng(seed, 0);
            StateFile::Spin(random_spin_state(two_s()?, &mut rng))
        }
        Family::Stars => {
            let cfg = read_points(&need(f.points.clone(), "points")?)?;
            let pts: Vec<SphereVec> = cfg.points.iter().map(|p| SphereVec::from_cartesian(*p)).collect();
            StateFile::Spin(reconstruct_state(&Constellation::from_points(&pts))?)
        }
    };
    Ok(state)
}

/// Sets a numeric family parameter by its flag name.
fn set_param(f: &mut FamilyArgs, name: &str, x: f64) -> Result<(), Failure> {
    let count = |x: f64| -> Result<usize, Failure> {
        if x >= 0.0 && x.fract() == 0.0 {
            Ok(x as usize)
        } else {
            Err(Failure::usage(format!("--{name} must be a non-negative integer, got {x}")))
        }
    };
    match name {
        "beta" => f.beta = Some(Complex64::new(x, 0.0)),
        "r" => f.r = Some(x),
        "theta-sq" => f.theta_sq = x,
        "cat-angle" => f.cat_angle = Some(x),
        "theta" => f.theta = Some(x),
        "phi" => f.phi = Some(x),
        "n" => f.n = Some(count(x)?),
        "m" => f.m = Some(count(x)?),
        "two-s" => f.two_s = Some(count(x)? as u32),
        other => return Err(Failure::usage(format!("cannot sweep {other:?}"))),
    }
    Ok(())
}

fn measure(ctx: &mut Ctx, args: &MeasureArgs) -> Outcome {
    if let Some(sweep) = &args.sweep {
        if args.state.is_some() {
            return Err(Failure::usage("--sweep builds states from family flags; drop --state"));
        }
        let (param, range) = (&sweep[0], &sweep[1]);
        let xs = parse_range(range).map_err(Failure::usage)?;
        let mut rows = Vec::with_capacity(xs.len());
        for x in xs {
            let mut f = args.family.clone();
            set_param(&mut f, param, x)?;
            let out = evaluate(args, &build_state(&f)?)?;
            rows.push(vec![x, out.value]);
        }
        let name = format!("{:?}", args.kind).to_lowercase();
        return write_text(to_csv(&[param.as_str(), &name], &rows).trim_end(), args.out.as_deref());
    }
    let state = match &args.state {
        Some(p) => read_state(p)?,
        None => build_state(&args.family)?,
    };
    let out = evaluate(args, &state)?;
    ctx.emit(&out, args.out.as_deref())
}

fn mismatch(kind: MeasureKind, system: &str) -> Failure {
    Failure::usage(format!("measure {kind:?} is not defined for {system} states"))
}

fn evaluate(args: &MeasureArgs, state: &StateFile) -> Result<MeasureOutput, Failure> {
    let kind = args.kind;
    let out = match state {
        StateFile::Cv(psi) => match kind {
            MeasureKind::Wehrl => {
                let grid = PlaneGrid::for_state(psi);
                MeasureOutput::new("wehrl", wehrl_cv(psi, &grid)?)
                    .with_detail("grid_radius", &grid.radius())?
                    .with_detail("grid_nodes", &grid.len())?
            }
            MeasureKind::M2 => {
                let grid = PlaneGrid::for_state(psi);
                MeasureOutput::new("m2", m2_cv_closed(psi)).with_detail("quadrature", &m2_cv_quadrature(psi, &grid)?)?
            }
            MeasureKind::Ipr => MeasureOutput::new("ipr", ipr_cv(psi)),
            MeasureKind::Minf => {
                let m = m_infinity_cv(psi)?;
                MeasureOutput::new("minf", m.value).with_argmax(&m.argmax)?
            }
            MeasureKind::Multipoles => {
                let order = need(args.order, "order")?;
                let mut entries = Vec::new();
                let mut largest: f64 = 0.0;
                // K and q in half-integer steps, q ≡ K mod 1
                for k in 1..=2 * order as i32 {
                    for q in (-k..=k).step_by(2) {
                        let (kh, qh) = (HalfInt::from_twice(k), HalfInt::from_twice(q));
                        let v = cv_multipole_indicator(psi, kh, qh)?;
                        largest = largest.max(v.norm());
                        entries.push((kh.value(), qh.value(), v));
                    }
                }
                MeasureOutput::new("multipoles", largest).with_detail("entries", &entries)?
            }
            MeasureKind::Am | MeasureKind::Partial => return Err(mismatch(kind, "oscillator")),
        },
        StateFile::Spin(psi) => {
            let two_s = psi.two_s();
            match kind {
                MeasureKind::Wehrl => MeasureOutput::new("wehrl", wehrl_spin(psi, &SphereGrid::for_spin(two_s))?)
                    .with_detail("lieb_bound", &(two_s as f64 / (two_s as f64 + 1.0)))?,
                MeasureKind::M2 => {
                    let table = multipoles_spin(&psi.to_density());
                    MeasureOutput::new("m2", m2_spin_multipole(&table, two_s))
                        .with_detail("quadrature", &m2_spin_quadrature(psi, &SphereGrid::for_spin(two_s))?)?
                }
                MeasureKind::Minf => {
                    let m = m_infinity_spin(psi)?;
                    MeasureOutput::new("minf", m.value).with_argmax(&m.argmax)?
                }
                MeasureKind::Am => {
                    let order = need(args.order, "order")?;
                    MeasureOutput::new("am", cumulative_a(&psi.to_density(), order)?)
                        .with_detail("order", &order)?
                        .with_detail("coherent_max", &a_m_coherent_max(two_s, order))?
                }
                MeasureKind::Multipoles => {
                    let table = multipoles_spin(&psi.to_density());
                    let total = cumulative_a(&psi.to_density(), two_s.max(1)).unwrap_or(0.0);
                    MeasureOutput::new("multipoles", total).with_detail("table", &table)?
                }
                MeasureKind::Partial => {
                    let k = need(args.order, "order")?;
                    let n = SphereVec::new(args.at_theta, args.at_phi);
                    MeasureOutput::new("partial", partial_q(&psi.to_density(), k, n)?)
                        .with_detail("rank", &k)?
                        .with_argmax(&n)?
                }
                MeasureKind::Ipr => return Err(mismatch(kind, "spin")),
            }
        }
    };
    Ok(out)
}

/// Emits a search result; a non-converged search exits with code 1.
fn emit_search(ctx: &mut Ctx, r: &SearchResult, out: Option<&PathBuf>) -> Outcome {
    ctx.emit(r, out.map(|p| p.as_path()))?;
    if r.converged {
        Ok(())
    } else {
        Err(Failure { code: 1, message: format!("search did not converge (objective {:e})", r.objective), diagnostic: None })
    }
}

fn search(ctx: &mut Ctx, cmd: &SearchCmd) -> Outcome {
    match cmd {
        SearchCmd::Kings { two_s, order, run } => {
            let seed = require_seed(run)?;
            ctx.manifest.tolerances.insert("king".into(), quantumness::extremal::KING_TOL);
            let r = find_king(*two_s, *order, run.restarts, seed)?;
            emit_search(ctx, &r, run.out.as_ref())
        }
        SearchCmd::Queens { two_s, state, grid_n, run } => match state {
            Some(path) => {
                let StateFile::Spin(psi) = read_state(path)? else {
                    return Err(Failure::usage("queens needs a spin state"));
                };
                let fit = find_queen(&psi, grid_n.unwrap_or_else(|| default_grid_size(psi.two_s())))?;
                ctx.emit(&fit, run.out.as_deref())
            }
            None => {
                let seed = require_seed(run)?;
                let two_s = need(*two_s, "two-s")?;
                let r = search_queen(two_s, grid_n.unwrap_or_else(|| default_grid_size(two_s)), run.restarts, seed)?;
                emit_search(ctx, &r, run.out.as_ref())
            }
        },
        SearchCmd::WehrlMax { two_s, run } => {
            let r = maximize_wehrl(*two_s, run.restarts, require_seed(run)?)?;
            emit_search(ctx, &r, run.out.as_ref())
        }
        SearchCmd::MinfMin { two_s, run } => {
            let r = minimize_m_infinity(*two_s, run.restarts, require_seed(run)?)?;
            emit_search(ctx, &r, run.out.as_ref())
        }
        SearchCmd::Probe { two_s, run } => {
            let r = king_design_probe(*two_s, run.restarts, require_seed(run)?)?;
            ctx.emit(&r, run.out.as_deref())
        }
    }
}

fn sphere(ctx: &mut Ctx, cmd: &SphereCmd) -> Outcome {
    match cmd {
        SphereCmd::DesignCheck { points, t } => {
            let report = design_check(&read_points(points)?, *t);
            ctx.emit(&report, None)
        }
        SphereCmd::Thomson { n, d, run } => {
            let c = thomson(*n, *d, run.restarts, require_seed(run)?)?;
            ctx.emit(&c, run.out.as_deref())
        }
        SphereCmd::Tammes { n, run } => {
            let c = tammes(*n, run.restarts, require_seed(run)?)?;
            ctx.emit(&c, run.out.as_deref())
        }
    }
}

#[derive(Serialize)]
struct IsotropyReport<C: Serialize> {
    covariance: C,
    eigenvalues: Vec<f64>,
    isotropy_defect: f64,
}

fn metrology(ctx: &mut Ctx, args: &MetrologyArgs) -> Outcome {
    let state = read_state(&args.state)?;
    let out = args.out.as_deref();
    if let (MetrologyKind::Qfi, Some(count)) = (args.kind, args.sweep) {
        if count == 0 {
            return Err(Failure::usage("--sweep needs at least one angle"));
        }
        let rows: Vec<Vec<f64>> = match &state {
            StateFile::Cv(psi) => (0..count)
                .map(|j| {
                    let t = std::f64::consts::PI * j as f64 / count as f64;
                    vec![t, qfi_displacement(psi, t)]
                })
                .collect(),
            StateFile::Spin(psi) => (0..count)
                .map(|j| {
                    let t = std::f64::consts::PI * j as f64 / (count.max(2) - 1) as f64;
                    vec![t, qfi_rotation(psi, SphereVec::new(t, args.phi))]
                })
                .collect(),
        };
        return write_text(to_csv(&["theta", "qfi"], &rows).trim_end(), out);
    }
    let result = match (&state, args.kind) {
        (StateFile::Cv(psi), MetrologyKind::Qfi) => MeasureOutput::new("qfi", qfi_displacement(psi, args.theta)),
        (StateFile::Spin(psi), MetrologyKind::Qfi) => {
            MeasureOutput::new("qfi", qfi_rotation(psi, SphereVec::new(args.theta, args.phi)))
        }
        (StateFile::Cv(psi), MetrologyKind::AvgQfi) => MeasureOutput::new("avg_qfi", avg_qfi_cv(psi)),
        (StateFile::Spin(psi), MetrologyKind::AvgQfi) => MeasureOutput::new("avg_qfi", avg_qfi_spin(psi)),
        (StateFile::Cv(psi), MetrologyKind::AvgCrb) => crb_output(avg_crb_cv(psi))?,
        (StateFile::Spin(psi), MetrologyKind::AvgCrb) => {
            crb_output(avg_crb_spin(psi, &SphereGrid::for_spin(psi.two_s().max(8)))?)?
        }
        (StateFile::Cv(psi), MetrologyKind::Isotropy) => {
            let c = CovMatrix2::of(psi);
            let r = IsotropyReport { covariance: c, eigenvalues: c.eigenvalues().to_vec(), isotropy_defect: c.isotropy_defect() };
            return ctx.emit(&r, out);
        }
        (StateFile::Spin(psi), MetrologyKind::Isotropy) => {
            let c = CovMatrix3::of(psi);
            let r = IsotropyReport { covariance: c, eigenvalues: c.eigenvalues().to_vec(), isotropy_defect: c.isotropy_defect() };
            return ctx.emit(&r, out);
        }
    };
    ctx.emit(&result, out)
}

/// An infinite bound is written as `null` with `diverges: true`.
fn crb_output(v: f64) -> Result<MeasureOutput, Failure> {
    Ok(MeasureOutput::new("avg_crb", v).with_detail("diverges", &v.is_infinite())?)
}
