//! The four subcommands. Each writes its CSV outputs and a manifest into the output
//! directory and maps its verdict to an exit code.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use mskinetic::boltzmann::max_moment;
use mskinetic::fisher::{estimate_lambda_b, monotonicity_audit, SphereGrid, SphereKernel};
use mskinetic::generic::{fitted_order, BuildingBlocks, DegeneracyReport, PhaseField, PhaseGrid};
use mskinetic::grazing::{
    default_battery, grazing_lemma_check, grazing_sweep, lemma_constant, perp_identity_check, GrazingSetup, LemmaPoint,
    TestFunction,
};
use mskinetic::grid::write_field;
use mskinetic::kernel::{assumption_check, AssumptionReport, GrazingFamily};
use mskinetic::reference::{boltzmann_direct, boltzmann_direct_weak, landau_direct, landau_direct_weak};
use mskinetic::solver::{h_theorem_audit, simulate, Diagnostics};
use mskinetic::{Field, Flavor, Operator, VelocityGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{angular, Config, InitialSection, Tolerances};
use crate::manifest::RunManifest;
use crate::{CliError, EXIT_FAIL, EXIT_PASS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    VerifyGeneric,
    Grazing,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::VerifyGeneric => "verify-generic",
            Command::Grazing => "grazing",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub eps: Option<Vec<f64>>,
    pub tol_overrides: Vec<(String, f64)>,
    /// Test hook: negate the mobility in `verify-generic`.
    pub flip_mobility: bool,
    pub threads: Option<usize>,
}

/// Run `cmd`, always writing the manifest, and return the process exit code.
pub fn execute(cmd: Command, opts: &Options) -> i32 {
    if let Err(e) = std::fs::create_dir_all(&opts.out) {
        eprintln!("error: cannot create output directory {}: {e}", opts.out.display());
        return EXIT_FAIL;
    }
    let mut manifest = RunManifest::new(cmd.name(), Some(&opts.config));
    if let Some(t) = opts.threads {
        manifest.set("threads", t);
    }
    let result = match cmd {
        Command::Simulate => cmd_simulate(opts, &mut manifest),
        Command::VerifyGeneric => cmd_verify_generic(opts, &mut manifest),
        Command::Grazing => cmd_grazing(opts, &mut manifest),
        Command::Oracle => cmd_oracle(opts, &mut manifest),
    };
    let code = match result {
        Ok(()) if manifest.passed() => EXIT_PASS,
        Ok(()) => {
            let failed: Vec<&str> = manifest.suites.iter().filter(|s| !s.1).map(|s| s.0.as_str()).collect();
            eprintln!("{}: failed suites: {}", cmd.name(), failed.join(", "));
            EXIT_FAIL
        }
        Err(e) => {
            eprintln!("error: {e}");
            manifest.error = Some(e.to_string());
            e.exit_code()
        }
    };
    if let Err(e) = manifest.write(&opts.out, code) {
        eprintln!("error: {e}");
    }
    code
}

struct Loaded {
    cfg: Config,
    base: PathBuf,
    tol: Tolerances,
    seed: u64,
}

fn load(opts: &Options, manifest: &mut RunManifest) -> Result<Loaded, CliError> {
    let (cfg, base) = Config::load(&opts.config)?;
    cfg.velocity_grid()?;
    let tol = Tolerances::new(&cfg.checks.tolerances, &opts.tol_overrides)?;
    let seed = opts.seed.unwrap_or(cfg.checks.seed);
    manifest.set("seed", seed);
    for (k, v) in cfg.echo() {
        manifest.set(k, v);
    }
    for (k, v) in tol.iter() {
        manifest.set(format!("tolerance.{k}"), format!("{v:e}"));
    }
    Ok(Loaded { cfg, base, tol, seed })
}

fn kinetic(context: &str) -> impl Fn(mskinetic::KineticError) -> CliError + '_ {
    move |e| CliError::Kinetic {
        context: context.to_string(),
        source: e,
    }
}

// ---------------------------------------------------------------- simulate

fn cmd_simulate(opts: &Options, manifest: &mut RunManifest) -> Result<(), CliError> {
    let Loaded { cfg, base, tol, seed } = load(opts, manifest)?;
    let grid = cfg.velocity_grid()?;
    let flavor = cfg.flavor();
    let op = cfg.operator(flavor, &grid, &base)?;
    let initial = cfg.initial_fields(&grid)?;
    let sim = cfg.sim_config()?;
    manifest.set("steps", sim.steps());
    info!("simulate: {flavor}, n = {}, {} steps", grid.n(), sim.steps());

    let traj = simulate(&op, initial, &sim).map_err(kinetic("simulate"))?;
    manifest.write_output(&opts.out, "diagnostics.csv", traj.to_csv(grid.dim()).as_bytes())?;
    match cfg.run.snapshots.as_str() {
        "all" => {
            for (k, (_, fields)) in traj.snapshots.iter().enumerate() {
                write_snapshots(manifest, &opts.out, &format!("snapshot_{k:05}"), fields)?;
            }
        }
        "final" => {
            if let Some(fields) = traj.final_state() {
                write_snapshots(manifest, &opts.out, "snapshot_final", fields)?;
            }
        }
        _ => {}
    }
    let last_t = traj.rows.last().map_or(0.0, |r| r.t);
    manifest.set("final_time", format!("{last_t:e}"));

    let audit = h_theorem_audit(&traj);
    manifest.write_output(&opts.out, "h_theorem.csv", audit.to_csv().as_bytes())?;
    manifest.set("h_theorem.non_increasing", audit.non_increasing);
    manifest.set("h_theorem.max_increase", format!("{:e}", audit.max_increase));
    manifest.set("h_theorem.max_relative_mismatch", format!("{:e}", audit.max_relative_mismatch));

    let hypothesis = fisher_hypothesis(&cfg, &op, seed, manifest)?;
    let times: Vec<f64> = traj.rows.iter().map(|r| r.t).collect();
    let fisher: Vec<f64> = traj.rows.iter().map(|r| r.fisher).collect();
    let report = monotonicity_audit(&times, &fisher, grid.spacing(), &hypothesis).map_err(kinetic("fisher"))?;
    manifest.write_output(&opts.out, "fisher.csv", report.to_csv().as_bytes())?;
    manifest.set("fisher.status", report.status());
    manifest.set("fisher.violations", report.violations);
    manifest.set("fisher.tolerance", format!("{:e}", report.tolerance));
    manifest.set("fisher.max_increase", format!("{:e}", report.max_violation));

    if let Some(e) = traj.abort {
        return Err(CliError::Kinetic {
            context: format!("simulate (aborted after t = {last_t:e})"),
            source: e,
        });
    }
    manifest.suite(
        "h_theorem",
        audit.non_increasing && audit.max_relative_mismatch <= tol.get("h_mismatch"),
    );
    manifest.suite("fisher", report.passes());
    if sim.projection {
        let drift = conservation_drift(&traj.rows, sim.dt);
        manifest.set("conservation.mass_per_step", format!("{:e}", drift.mass_per_step));
        manifest.set("conservation.raw_mass_per_step", format!("{:e}", drift.raw_mass_per_step));
        manifest.set("conservation.momentum_per_time", format!("{:e}", drift.momentum_per_time));
        manifest.set("conservation.energy_per_time", format!("{:e}", drift.energy_per_time));
        manifest.suite(
            "conservation",
            drift.mass_per_step <= tol.get("mass_drift")
                && drift.momentum_per_time <= tol.get("moment_drift")
                && drift.energy_per_time <= tol.get("moment_drift"),
        );
    } else {
        manifest.set("conservation", "skipped (projection off)");
    }
    Ok(())
}

fn write_snapshots(manifest: &mut RunManifest, dir: &Path, stem: &str, fields: &[Field]) -> Result<(), CliError> {
    for (s, f) in fields.iter().enumerate() {
        let mut buf = Vec::new();
        write_field(&mut buf, f, s).map_err(kinetic("snapshot"))?;
        manifest.write_output(dir, &format!("{stem}_species{}.field", s + 1), &buf)?;
    }
    Ok(())
}

/// Kernel hypothesis for Fisher monotonicity over every species pair, with the sphere
/// constant estimated per angular kernel (and halved for safety).
fn fisher_hypothesis(cfg: &Config, op: &Operator, seed: u64, manifest: &mut RunManifest) -> Result<AssumptionReport, CliError> {
    let dim = cfg.grid.dim;
    let k = cfg.checks.fisher_sphere_nodes;
    let sphere = Arc::new(if dim == 2 { SphereGrid::circle(k) } else { SphereGrid::lat_long(k) }.map_err(kinetic("checks.fisher_sphere_nodes"))?);
    let r_max = 2.0 * cfg.grid.half_width * (dim as f64).sqrt();
    let radii: Vec<f64> = (1..=64).map(|q| r_max * q as f64 / 64.0).collect();
    let kernels = match op {
        Operator::Boltzmann { op, .. } => op.kernels().clone(),
        Operator::Landau { op, .. } => op.kernels().clone(),
    };
    let ns = cfg.species.len();
    let mut combined = AssumptionReport {
        holds: true,
        worst_ratio: 0.0,
        threshold: f64::INFINITY,
        indeterminate: Vec::new(),
    };
    // The monotonicity theorem is for the classical Boltzmann flow only.
    let classical = matches!(op, Operator::Boltzmann { .. }) && cfg.species
        .iter()
        .all(|s| crate::config::parse_statistics(&s.statistics) == Ok(mskinetic::Statistics::Maxwell));
    manifest.set("fisher.classical_boltzmann", classical);
    combined.holds = classical;
    for i in 0..ns {
        for j in i..ns {
            let pair = kernels.pair(i, j);
            let b = pair.angular.clone();
            let sk = SphereKernel::new(sphere.clone(), move |t| b.eval(t));
            let est = estimate_lambda_b(&sk, cfg.checks.fisher_samples, seed).map_err(kinetic("fisher"))?;
            let rep = assumption_check(pair, est.safe(), &radii).map_err(kinetic("fisher"))?;
            manifest.set(format!("fisher.lambda_b.{}{}", i + 1, j + 1), format!("{:e}", est.value));
            manifest.set(format!("fisher.hypothesis.{}{}", i + 1, j + 1), rep.holds);
            combined.holds &= rep.holds;
            combined.worst_ratio = combined.worst_ratio.max(rep.worst_ratio);
            combined.threshold = combined.threshold.min(rep.threshold);
            combined.indeterminate.extend(rep.indeterminate);
        }
    }
    Ok(combined)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    /// Largest per-species relative mass change per step, net of the mass added by clipping.
    pub mass_per_step: f64,
    /// Same without removing the clipping contribution.
    pub raw_mass_per_step: f64,
    /// Largest `|P(t) - P(0)| / (P_th t)`, `P_th = sqrt(2 M E(0))`.
    pub momentum_per_time: f64,
    /// Largest `|E(t) - E(0)| / (E(0) t)`.
    pub energy_per_time: f64,
}

pub fn conservation_drift(rows: &[Diagnostics], dt: f64) -> Drift {
    let mut out = Drift {
        mass_per_step: 0.0,
        raw_mass_per_step: 0.0,
        momentum_per_time: 0.0,
        energy_per_time: 0.0,
    };
    let Some(first) = rows.first() else { return out };
    for w in rows.windows(2) {
        let steps = ((w[1].t - w[0].t) / dt).round().max(1.0);
        for (s, (a, b)) in w[0].mass.iter().zip(&w[1].mass).enumerate() {
            let scale = first.mass[s].abs().max(f64::MIN_POSITIVE);
            let raw = b - a;
            let net = raw - (w[1].clip_added[s] - w[0].clip_added[s]);
            out.raw_mass_per_step = out.raw_mass_per_step.max(raw.abs() / scale / steps);
            out.mass_per_step = out.mass_per_step.max(net.abs() / scale / steps);
        }
    }
    let total_mass: f64 = first.mass.iter().sum();
    let p_scale = (2.0 * total_mass * first.energy).sqrt().max(f64::MIN_POSITIVE);
    let e_scale = first.energy.abs().max(f64::MIN_POSITIVE);
    for r in rows.iter().skip(1).filter(|r| r.t > 0.0) {
        let dp = r
            .momentum
            .iter()
            .zip(&first.momentum)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        out.momentum_per_time = out.momentum_per_time.max(dp / p_scale / r.t);
        out.energy_per_time = out.energy_per_time.max((r.energy - first.energy).abs() / e_scale / r.t);
    }
    out
}

// ---------------------------------------------------------- verify-generic

/// Phase-space state built from the configured initial conditions, with an
/// `x`-dependent drift and temperature so that transport is nontrivial.
fn phase_state(cfg: &Config, pg: &PhaseGrid) -> Result<Vec<PhaseField>, CliError> {
    let vg = pg.velocity();
    let species = cfg.species_set()?;
    let mut values = vec![Vec::with_capacity(pg.len()); cfg.species.len()];
    for k in 0..pg.nx() {
        let x = pg.x(k);
        let mut local = cfg.clone();
        for sp in &mut local.species {
            let (du, scale) = (0.3 * (2.0 * PI * x).sin(), 1.0 + 0.2 * (2.0 * PI * x).cos());
            match &mut sp.initial {
                InitialSection::Gaussians { bumps } => {
                    for b in bumps {
                        b.mean[0] += du;
                        b.temperature *= scale;
                    }
                }
                InitialSection::Equilibrium { mean, temperature, .. } => {
                    mean[0] += du;
                    *temperature *= scale;
                }
            }
        }
        for (s, f) in local.initial_fields(vg)?.into_iter().enumerate() {
            values[s].extend_from_slice(f.values());
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(s, v)| PhaseField::new(pg, v, species.statistics(s)).map_err(kinetic("verify-generic state")))
        .collect()
}

fn blocks(cfg: &Config, base: &Path, flavor: Flavor, nx: usize, n: usize) -> Result<BuildingBlocks, CliError> {
    let vg = cfg.velocity_grid_with(n)?;
    let op = cfg.operator(flavor, &vg, base)?;
    let pg = PhaseGrid::new(nx, vg).map_err(kinetic("checks.generic_nx"))?;
    BuildingBlocks::new(pg, op).map_err(kinetic("verify-generic"))
}

fn generic_passes(r: &DegeneracyReport, tol: &Tolerances) -> bool {
    r.r2 <= tol.get("generic_r2")
        && r.antisymmetry <= tol.get("generic_antisymmetry")
        && r.symmetry <= tol.get("generic_symmetry")
        && r.psd_min >= -tol.get("generic_psd")
}

fn cmd_verify_generic(opts: &Options, manifest: &mut RunManifest) -> Result<(), CliError> {
    let Loaded { cfg, base, tol, seed } = load(opts, manifest)?;
    let checks = &cfg.checks;
    let mut csv = String::from("flavor,nx,n,r1,r2,r2_relative,antisymmetry,symmetry,psd_min,pairs,pass\n");
    let mut text = String::new();
    for flavor in Flavor::ALL {
        let mut b = blocks(&cfg, &base, flavor, checks.generic_nx, checks.generic_n)?;
        if opts.flip_mobility {
            b = b.with_flipped_mobility();
        }
        let state = phase_state(&cfg, b.grid())?;
        let r = b.degeneracy_report(&state, checks.generic_pairs, seed).map_err(kinetic(flavor.name()))?;
        let pass = generic_passes(&r, &tol);
        info!("verify-generic: {flavor} {}", if pass { "pass" } else { "fail" });
        let _ = writeln!(
            csv,
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            flavor, r.nx, r.n, r.r1, r.r2, r.r2_relative, r.antisymmetry, r.symmetry, r.psd_min, r.pairs, u8::from(pass)
        );
        text.push_str(&r.to_text());
        manifest.suite(&format!("generic.{flavor}"), pass);
    }

    // L is the same for every flavor; refine the velocity grid at fixed nx.
    let mut h = Vec::new();
    let mut r1 = Vec::new();
    let mut refine = String::from("n,h,r1\n");
    for &n in &checks.generic_refinement {
        let b = blocks(&cfg, &base, Flavor::Landau, checks.generic_refinement_nx, n)?;
        let state = phase_state(&cfg, b.grid())?;
        let r = b.degeneracy_report(&state, 0, seed).map_err(kinetic("refinement"))?;
        let spacing = b.grid().velocity().spacing();
        let _ = writeln!(refine, "{n},{spacing:e},{:e}", r.r1);
        h.push(spacing);
        r1.push(r.r1);
    }
    if h.len() >= 2 {
        let order = fitted_order(&h, &r1);
        let _ = writeln!(text, "l_ds.order: {order:.6}");
        manifest.set("l_ds.order", format!("{order:.6}"));
        manifest.suite("l_ds_refinement", order >= tol.get("generic_order"));
    } else {
        manifest.set("l_ds.order", "skipped (fewer than two refinement levels)");
    }
    manifest.write_output(&opts.out, "generic.csv", csv.as_bytes())?;
    manifest.write_output(&opts.out, "generic_refinement.csv", refine.as_bytes())?;
    manifest.write_output(&opts.out, "generic_report.txt", text.as_bytes())?;
    Ok(())
}

// ----------------------------------------------------------------- grazing

fn cmd_grazing(opts: &Options, manifest: &mut RunManifest) -> Result<(), CliError> {
    let Loaded { cfg, base, tol, .. } = load(opts, manifest)?;
    let eps = opts.eps.clone().unwrap_or_else(|| cfg.checks.grazing_eps.clone());
    if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
        return Err(CliError::Config(format!("--eps: grazing parameters must lie in (0, 1), got {bad}")));
    }
    manifest.set("grazing.eps", eps.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","));
    let species = cfg.species_set()?;
    let grid = cfg.velocity_grid()?;
    let base_angular = angular(&cfg.checks.grazing_base).map_err(|m| CliError::Config(format!("checks.grazing_base: {m}")))?;
    let family = GrazingFamily::new(base_angular, cfg.grid.dim, species.masses()).map_err(kinetic("checks.grazing_base"))?;
    let setup = GrazingSetup {
        species: species.clone(),
        radial: cfg.kernels(&base)?,
        family,
        state: cfg.initial_fields(&grid)?,
        grid,
        battery: default_battery(species.len()),
        k_per_eps: cfg.checks.grazing_k_per_eps,
    };
    let sweep = grazing_sweep(&setup, &eps).map_err(kinetic("grazing sweep"))?;
    manifest.write_output(&opts.out, "grazing_sweep.csv", sweep.to_csv().as_bytes())?;
    let rates: Vec<String> = sweep.rates().iter().map(|r| format!("{r:.3}")).collect();
    manifest.set("grazing.rates", rates.join(","));
    manifest.set("grazing.strictly_decreasing", sweep.strictly_decreasing());
    manifest.set("grazing.final_relative_gap", format!("{:e}", sweep.final_relative_gap()));
    manifest.suite(
        "grazing_sweep",
        sweep.strictly_decreasing() && sweep.final_relative_gap() <= tol.get("grazing_final"),
    );

    let thetas = &cfg.checks.lemma_thetas;
    let (i, j) = (0, 1.min(species.len() - 1));
    let battery = &setup.battery[0];
    let point = LemmaPoint {
        vi: vec![0.7, -0.3],
        vj: vec![-0.4, 0.5],
        mi: species.mass(i),
        mj: species.mass(j),
        stats: (species.statistics(i), species.statistics(j)),
        densities: (
            TestFunction::gaussian(0.4, vec![0.1, 0.0], 1.0),
            TestFunction::gaussian(0.3, vec![0.0, 0.2], 0.8),
        ),
        phi: (battery[i].clone(), battery[j].clone()),
    };
    let lemma = grazing_lemma_check(thetas, &point).map_err(kinetic("grazing lemma"))?;
    manifest.write_output(&opts.out, "grazing_lemma.csv", lemma.to_csv().as_bytes())?;
    let constant_err = (lemma.fitted_constant / lemma_constant(2) - 1.0).abs();
    manifest.set("lemma.order", format!("{:.4}", lemma.order));
    manifest.set("lemma.fitted_constant", format!("{:e}", lemma.fitted_constant));
    manifest.set("lemma.expected_constant", format!("{:e}", lemma_constant(2)));
    manifest.suite(
        "grazing_lemma",
        lemma.order >= tol.get("grazing_order") && constant_err <= tol.get("lemma_constant"),
    );

    let mut perp_ok = true;
    for (name, k) in [("x", [1.0, 0.0]), ("oblique", [0.6, 0.8])] {
        let rep = perp_identity_check(thetas, &k).map_err(kinetic("perp identity"))?;
        manifest.write_output(&opts.out, &format!("perp_{name}.csv"), rep.to_csv().as_bytes())?;
        let coef = *rep.coefficients.last().unwrap_or(&f64::NAN);
        manifest.set(format!("perp.{name}.order"), format!("{:.4}", rep.order));
        manifest.set(format!("perp.{name}.coefficient"), format!("{coef:e}"));
        perp_ok &= rep.order >= tol.get("grazing_order") && (coef / rep.expected - 1.0).abs() <= tol.get("perp_coefficient");
    }
    manifest.suite("perp_identity", perp_ok);
    Ok(())
}

// ------------------------------------------------------------------ oracle

fn test_functions(grid: &VelocityGrid, species: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..species)
        .map(|_| {
            let d = grid.dim();
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let phase = rng.gen_range(0.0..2.0 * PI);
            let decay = rng.gen_range(0.02..0.2);
            grid.sample(|v| {
                let arg: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
                let r2: f64 = v.iter().map(|c| c * c).sum();
                (arg + phase).sin() * (-decay * r2).exp()
            })
        })
        .collect()
}

fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn pairing(grid: &VelocityGrid, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    grid.cell_volume() * a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).sum::<f64>()
}

fn rel(a: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        a / scale
    } else {
        a
    }
}

fn cmd_oracle(opts: &Options, manifest: &mut RunManifest) -> Result<(), CliError> {
    let Loaded { cfg, base, tol, seed } = load(opts, manifest)?;
    if let Some(n) = cfg.checks.oracle_n.iter().find(|n| **n > 16) {
        return Err(CliError::Config(format!("checks.oracle_n: direct sums are capped at n <= 16, got {n}")));
    }
    let mut csv = String::from("operator,n,check,value,tolerance,pass\n");
    let mut all = true;
    let mut row = |csv: &mut String, op: &str, n: usize, check: &str, value: f64, t: f64| {
        let pass = value <= t;
        all &= pass;
        let _ = writeln!(csv, "{op},{n},{check},{value:e},{t:e},{}", u8::from(pass));
    };
    let (t_oracle, t_weak) = (tol.get("oracle"), tol.get("weak_strong"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &n in &cfg.checks.oracle_n {
        let grid = cfg.velocity_grid_with(n)?;
        let fields = cfg.initial_fields(&grid)?;
        let masses: Vec<f64> = cfg.species.iter().map(|s| s.mass).collect();
        let phi = test_functions(&grid, fields.len(), &mut rng);
        for flavor in [Flavor::Boltzmann, Flavor::Landau] {
            let name = flavor.name();
            let op = cfg.operator(flavor, &grid, &base)?;
            let (q, direct, weak, direct_weak) = match &op {
                Operator::Boltzmann { op, .. } => (
                    op.q_total(&fields).map_err(kinetic(name))?,
                    boltzmann_direct(op, &fields).map_err(kinetic(name))?,
                    op.weak_form(&fields, &phi).map_err(kinetic(name))?,
                    boltzmann_direct_weak(op, &fields, &phi).map_err(kinetic(name))?,
                ),
                Operator::Landau { op, .. } => (
                    op.q_total(&fields).map_err(kinetic(name))?,
                    landau_direct(op, &fields).map_err(kinetic(name))?,
                    op.weak_form(&fields, &phi).map_err(kinetic(name))?,
                    landau_direct_weak(op, &fields, &phi).map_err(kinetic(name))?,
                ),
            };
            let scale = max_abs(&q.values);
            let d = q.dissipation.unwrap_or(f64::NAN);
            let strong = pairing(&grid, &phi, &q.values);
            row(&mut csv, name, n, "direct_vs_optimized", rel(max_diff(&q.values, &direct.values), scale), t_oracle);
            row(&mut csv, name, n, "dissipation", rel((direct.dissipation - d).abs(), d.abs()), t_oracle);
            row(&mut csv, name, n, "direct_weak", rel((direct_weak - weak).abs(), weak.abs().max(1.0)), t_oracle);
            row(&mut csv, name, n, "weak_vs_strong", rel((weak - strong).abs(), strong.abs().max(1.0)), t_weak);
            let moments = max_moment(&q.values, &grid, &masses).map_err(kinetic(name))?;
            row(&mut csv, name, n, "invariants", rel(moments, scale.max(1.0)), t_oracle);
        }
    }
    manifest.write_output(&opts.out, "oracle.csv", csv.as_bytes())?;
    manifest.suite("oracle", all);
    Ok(())
}
