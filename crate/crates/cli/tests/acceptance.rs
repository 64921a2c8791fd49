//! Acceptance suite: one `PASS`/`FAIL` line per criterion, non-zero exit if any fails.
//!
//! Runs the release-style reference experiments, so it takes several minutes.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use mskinetic::fisher::{estimate_lambda_b, even_density, lsi_gap, SphereGrid, SphereKernel};
use mskinetic::generic::fitted_order;
use mskinetic::kernel::post_collision;
use mskinetic::{Field, Flavor};
use mskinetic_cli::config::Config;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn mskinetic(config: &Path, out: &Path, args: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_mskinetic"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .status()
        .expect("mskinetic binary runs");
    status.code().unwrap_or(-1)
}

fn manifest_value(out: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(out.join("manifest.txt")).unwrap_or_default();
    let prefix = format!("{key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or("missing")
        .to_string()
}

fn suite(out: &Path, name: &str) -> bool {
    manifest_value(out, &format!("suite.{name}")) == "pass"
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let d = if rng.gen_bool(0.5) { 2 } else { 3 };
        let vi: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let vj: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let raw: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
        let omega: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        let (mi, mj) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        let (a, b) = post_collision(&vi, &vj, &omega, mi, mj).expect("post_collision");
        let p = |x: &[f64], y: &[f64], k: usize| mi * x[k] + mj * y[k];
        let e = |x: &[f64], y: &[f64]| {
            0.5 * mi * x.iter().map(|c| c * c).sum::<f64>() + 0.5 * mj * y.iter().map(|c| c * c).sum::<f64>()
        };
        let e0 = e(&vi, &vj);
        let pscale = (2.0 * (mi + mj) * e0).sqrt();
        for k in 0..d {
            worst = worst.max((p(&a, &b, k) - p(&vi, &vj, k)).abs() / pscale);
        }
        worst = worst.max((e(&a, &b) - e0).abs() / e0);
    }
    outcome(worst <= 1e-12, format!("10^4 post-collision evaluations, max relative residual {worst:.2e} (<= 1e-12)"))
}

fn criterion_2(work: &Path) -> Outcome {
    let out = work.join("oracle");
    let code = mskinetic(&configs().join("reference.toml"), &out, &["oracle"]);
    let csv = std::fs::read_to_string(out.join("oracle.csv")).unwrap_or_default();
    let worst = |check: &str| {
        csv.lines()
            .skip(1)
            .filter(|l| l.split(',').nth(2) == Some(check))
            .filter_map(|l| l.split(',').nth(3)?.parse::<f64>().ok())
            .fold(0.0f64, f64::max)
    };
    let direct = worst("direct_vs_optimized").max(worst("dissipation")).max(worst("direct_weak"));
    let weak = worst("weak_vs_strong");
    outcome(
        code == 0 && suite(&out, "oracle"),
        format!("oracle n = 8, 12: direct-sum max {direct:.2e} (<= 1e-9), weak/strong max {weak:.2e} (<= 1e-8), exit {code}"),
    )
}

fn equilibrium_config(statistics: &str, mus: [f64; 2]) -> Config {
    let text = format!(
        r#"
[grid]
dim = 2
n = 16
half_width = 6.0
sphere_nodes = 16

[[species]]
mass = 1.0
statistics = "{statistics}"
initial = {{ kind = "equilibrium", mu = {}, mean = [0.3, -0.2], temperature = 1.0 }}

[[species]]
mass = 2.0
statistics = "{statistics}"
initial = {{ kind = "equilibrium", mu = {}, mean = [0.3, -0.2], temperature = 1.0 }}

[kernel]
kind = "maxwell"
c = 1.0
angular = {{ kind = "constant", c = 0.15915494309189535 }}
"#,
        mus[0], mus[1]
    );
    Config::from_toml(&text).expect("equilibrium config")
}

fn criterion_3() -> Outcome {
    // Relative to the size of Q for the same grid and a non-equilibrium state.
    let mut lines = Vec::new();
    let mut pass = true;
    let base = Path::new(".");
    for (stats, mus) in [("fermi", [0.5, 0.2]), ("maxwell", [-1.0, -0.5]), ("bose", [-0.5, -0.8])] {
        let cfg = equilibrium_config(stats, mus);
        for flavor in [Flavor::Boltzmann, Flavor::Landau] {
            let (mut hs, mut res) = (Vec::new(), Vec::new());
            for n in [16, 24, 32] {
                let grid = cfg.velocity_grid_with(n).unwrap();
                let op = cfg.operator(flavor, &grid, base).unwrap();
                let eq = cfg.initial_fields(&grid).unwrap();
                let q = op.evaluate(&eq).unwrap();
                let mut off = eq.clone();
                off[1] = Field::from_fn(&grid, |v| 0.3 * (-((v[0] + 0.8).powi(2) + v[1] * v[1]) / 0.5).exp()).unwrap();
                let scale = op.evaluate(&off).unwrap().values.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
                let err = q.values.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
                hs.push(grid.spacing());
                res.push(err / scale);
            }
            let roundoff = res.iter().all(|r| *r <= 1e-12);
            let order = fitted_order(&hs, &res);
            let ok = roundoff || (order >= 2.0 && res.windows(2).all(|w| w[1] < w[0]));
            pass &= ok;
            lines.push(format!(
                "{stats}/{}: [{}] {}",
                flavor.name(),
                res.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>().join(", "),
                if roundoff { "exact to roundoff".to_string() } else { format!("order {order:.2}") }
            ));
        }
    }
    outcome(pass, format!("||Q(F_eq)||/||Q|| at n = 16, 24, 32: {}", lines.join("; ")))
}

fn reference_run(work: &Path) -> (i32, PathBuf) {
    let out = work.join("reference");
    let code = mskinetic(&configs().join("reference.toml"), &out, &["simulate"]);
    (code, out)
}

fn criterion_4(code: i32, out: &Path) -> Outcome {
    let pass = code != 2
        && suite(out, "h_theorem")
        && manifest_value(out, "h_theorem.non_increasing") == "true"
        && manifest_value(out, "final_time") == "1e0";
    outcome(
        pass,
        format!(
            "reference run: H non-increasing = {}, max |dH/dt + D|/D = {} (<= 5e-2)",
            manifest_value(out, "h_theorem.non_increasing"),
            manifest_value(out, "h_theorem.max_relative_mismatch")
        ),
    )
}

fn criterion_5(work: &Path) -> Outcome {
    let out = work.join("generic");
    let code = mskinetic(&configs().join("reference.toml"), &out, &["verify-generic"]);
    let csv = std::fs::read_to_string(out.join("generic.csv")).unwrap_or_default();
    let rows: Vec<String> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            format!("{} r2 {} anti {} sym {} psd {}", c[0], c[4], c[6], c[7], c[8])
        })
        .collect();
    let flavors = ["boltzmann", "landau", "boltzmann-linear", "landau-linear"];
    let pass = code == 0 && flavors.iter().all(|f| suite(&out, &format!("generic.{f}"))) && suite(&out, "l_ds_refinement");
    outcome(
        pass,
        format!("{}; L dS order {} (>= 2); exit {code}", rows.join("; "), manifest_value(&out, "l_ds.order")),
    )
}

fn criterion_6(code: i32, out: &Path) -> Outcome {
    let pass = code != 2
        && suite(out, "fisher")
        && manifest_value(out, "fisher.classical_boltzmann") == "true"
        && manifest_value(out, "fisher.violations") == "0";
    outcome(
        pass,
        format!(
            "reference run: {} ({} violations, max increase {}, tol_mono {})",
            manifest_value(out, "fisher.status"),
            manifest_value(out, "fisher.violations"),
            manifest_value(out, "fisher.max_increase"),
            manifest_value(out, "fisher.tolerance")
        ),
    )
}

fn criterion_7() -> Outcome {
    let grid = Arc::new(SphereGrid::circle(128).unwrap());
    let kernel = SphereKernel::new(grid.clone(), |_| 1.0);
    let est = estimate_lambda_b(&kernel, 200, 7).unwrap();
    let lambda = est.safe();
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let modes = rng.gen_range(1..=4);
        let coeffs: Vec<f64> = (0..modes).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let f = even_density(&grid, &coeffs);
        worst = worst.min(lsi_gap(&f, &kernel, lambda).unwrap());
    }
    outcome(
        worst >= -1e-8,
        format!("b = 1, K = 128: estimate {:.4}, safe constant {lambda:.4}, min gap over 200 densities {worst:.3e} (>= -1e-8)", est.value),
    )
}

fn criterion_8(work: &Path) -> Outcome {
    let out = work.join("grazing");
    let code = mskinetic(&configs().join("grazing.toml"), &out, &["grazing"]);
    let csv = std::fs::read_to_string(out.join("grazing_sweep.csv")).unwrap_or_default();
    // eps,K,support_nodes,test,boltzmann,landau,abs_gap,rel_gap; the "all" rows carry the sweep max
    let gaps: Vec<String> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|c| c.len() == 8 && c[3] == "all")
        .map(|c| format!("eps {}: {:.2e}", c[0], c[7].parse::<f64>().unwrap_or(f64::NAN)))
        .collect();
    outcome(
        code == 0 && suite(&out, "grazing_sweep") && suite(&out, "grazing_lemma") && suite(&out, "perp_identity"),
        format!(
            "gaps [{}], final relative {}; lemma order {} constant {} (expected {}); perp orders {} / {}; exit {code}",
            gaps.join(", "),
            manifest_value(&out, "grazing.final_relative_gap"),
            manifest_value(&out, "lemma.order"),
            manifest_value(&out, "lemma.fitted_constant"),
            manifest_value(&out, "lemma.expected_constant"),
            manifest_value(&out, "perp.x.order"),
            manifest_value(&out, "perp.oblique.order"),
        ),
    )
}

fn criterion_9(code: i32, out: &Path) -> Outcome {
    let num = |k: &str| manifest_value(out, k).parse::<f64>().unwrap_or(f64::INFINITY);
    let (mass, raw) = (num("conservation.mass_per_step"), num("conservation.raw_mass_per_step"));
    let (p, e) = (num("conservation.momentum_per_time"), num("conservation.energy_per_time"));
    outcome(
        code != 2 && suite(out, "conservation") && mass <= 1e-12 && p <= 1e-8 && e <= 1e-8,
        format!("mass drift/step {mass:.2e} (raw {raw:.2e}) <= 1e-12; momentum {p:.2e}, energy {e:.2e} per unit time <= 1e-8"),
    )
}

fn criterion_10(work: &Path) -> Outcome {
    let mut identical = true;
    let mut compared = 0;
    let runs: [(&str, &str, &[&str]); 2] = [
        ("reference.toml", "oracle", &["oracle.csv"]),
        ("quantum.toml", "simulate", &["diagnostics.csv", "h_theorem.csv", "fisher.csv"]),
    ];
    for (config, cmd, files) in runs {
        let (a, b) = (work.join(format!("{cmd}_a")), work.join(format!("{cmd}_b")));
        let config = configs().join(config);
        mskinetic(&config, &a, &["--seed", "99", cmd]);
        mskinetic(&config, &b, &["--seed", "99", cmd]);
        for f in files {
            let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
            identical &= matches!((&x, &y), (Ok(x), Ok(y)) if x == y && !x.is_empty());
            compared += 1;
        }
    }
    outcome(identical, format!("{compared} CSV files from repeated oracle and simulate runs compared byte for byte"))
}

fn report(id: usize, name: &str, started: Instant, o: &Outcome) {
    println!(
        "criterion {id:>2} [{}] {name}: {} ({:.1} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
}

fn main() {
    // `cargo test -- --list` and filters are passed through; this target has no sub-tests.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let work = TempDir::new().expect("scratch directory");
    let work = work.path();
    let mut results = Vec::new();
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        report(id, name, t, &o);
        results.push(o.pass);
    };

    run(1, "collision geometry", &mut criterion_1);
    run(2, "oracle equivalence", &mut || criterion_2(work));
    run(3, "equilibrium annihilation", &mut criterion_3);
    let t = Instant::now();
    let (code, out) = reference_run(work);
    println!("reference run finished with exit code {code} ({:.1} s)", t.elapsed().as_secs_f64());
    run(4, "H-theorem", &mut || criterion_4(code, &out));
    run(5, "GENERIC degeneracies", &mut || criterion_5(work));
    run(6, "Fisher monotonicity", &mut || criterion_6(code, &out));
    run(7, "sphere inequality", &mut criterion_7);
    run(8, "grazing limit", &mut || criterion_8(work));
    run(9, "conservation bookkeeping", &mut || criterion_9(code, &out));
    run(10, "determinism", &mut || criterion_10(work));

    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
