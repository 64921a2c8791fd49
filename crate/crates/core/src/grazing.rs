//! Grazing limit: Boltzmann with concentrating angular kernels against Landau.
//!
//! Three experiments live here: the weak-form sweep over the grazing parameter,
//! the pointwise small-angle lemma for one collision, and the perpendicular
//! second-moment identity behind it.

use std::fmt::Write as _;

use crate::boltzmann::BoltzmannOperator;
use crate::error::{precondition, KineticError, Result};
use crate::generic::fitted_order;
use crate::grid::{Field, VelocityGrid};
use crate::kernel::{post_collision, GrazingFamily, KernelSet};
use crate::landau::{pi_projection, LandauOperator};
use crate::species::{SpeciesSet, Statistics};
use crate::sphere::{sphere_measure, SphereQuadrature};

/// Smooth closed-form test function with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `(a + l.(v - c)) exp(-|v - c|^2 / (2 s^2))`.
    GaussPoly {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
        linear: Vec<f64>,
    },
    /// `c0 + l.v + q |v|^2`; collision invariants are of this form.
    Quadratic { constant: f64, linear: Vec<f64>, quadratic: f64 },
}

impl TestFunction {
    pub fn gaussian(amplitude: f64, center: Vec<f64>, width: f64) -> Self {
        let linear = vec![0.0; center.len()];
        TestFunction::GaussPoly {
            amplitude,
            center,
            width,
            linear,
        }
    }

    pub fn value(&self, v: &[f64]) -> f64 {
        match self {
            TestFunction::GaussPoly {
                amplitude,
                center,
                width,
                linear,
            } => {
                let (p, g, _) = gauss_parts(*amplitude, center, *width, linear, v);
                p * g
            }
            TestFunction::Quadratic {
                constant,
                linear,
                quadratic,
            } => constant + dot(linear, v) + quadratic * dot(v, v),
        }
    }

    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        match self {
            TestFunction::GaussPoly {
                amplitude,
                center,
                width,
                linear,
            } => {
                let (p, g, w) = gauss_parts(*amplitude, center, *width, linear, v);
                let s2 = width * width;
                (0..v.len()).map(|b| (linear[b] - p * w[b] / s2) * g).collect()
            }
            TestFunction::Quadratic { linear, quadratic, .. } => {
                (0..v.len()).map(|b| linear[b] + 2.0 * quadratic * v[b]).collect()
            }
        }
    }

    /// Row-major Hessian.
    pub fn hessian(&self, v: &[f64]) -> Vec<f64> {
        let d = v.len();
        let mut h = vec![0.0; d * d];
        match self {
            TestFunction::GaussPoly {
                amplitude,
                center,
                width,
                linear,
            } => {
                let (p, g, w) = gauss_parts(*amplitude, center, *width, linear, v);
                let s2 = width * width;
                for b in 0..d {
                    for c in 0..d {
                        let delta = if b == c { 1.0 } else { 0.0 };
                        h[b * d + c] = g
                            * (-(linear[b] * w[c] + linear[c] * w[b]) / s2 - p * delta / s2
                                + p * w[b] * w[c] / (s2 * s2));
                    }
                }
            }
            TestFunction::Quadratic { quadratic, .. } => {
                for b in 0..d {
                    h[b * d + b] = 2.0 * quadratic;
                }
            }
        }
        h
    }
}

fn gauss_parts(a: f64, center: &[f64], width: f64, linear: &[f64], v: &[f64]) -> (f64, f64, Vec<f64>) {
    let w: Vec<f64> = v.iter().zip(center).map(|(x, c)| x - c).collect();
    let p = a + dot(linear, &w);
    let g = (-dot(&w, &w) / (2.0 * width * width)).exp();
    (p, g, w)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One test function per species.
pub type TestFamily = Vec<TestFunction>;

/// Fixed battery of Gaussian-times-polynomial test families for `species` species in `d = 2`.
pub fn default_battery(species: usize) -> Vec<TestFamily> {
    let per = |s: usize| s as f64;
    vec![
        (0..species)
            .map(|_| TestFunction::GaussPoly {
                amplitude: 1.0,
                center: vec![0.3, -0.2],
                width: 1.5,
                linear: vec![0.5, 0.0],
            })
            .collect(),
        (0..species)
            .map(|s| TestFunction::GaussPoly {
                amplitude: 0.2 * per(s),
                center: vec![-0.5 + 0.5 * per(s), 0.4],
                width: 1.2 + 0.4 * per(s),
                linear: vec![-0.3, 1.0 - 0.5 * per(s)],
            })
            .collect(),
        (0..species)
            .map(|s| TestFunction::gaussian(1.0 + per(s), vec![0.8, 0.8 - 0.6 * per(s)], 1.0))
            .collect(),
    ]
}

/// Collision invariant `m_i (a + b.v + c|v|^2 / 2)`, the same for every species up to the mass.
pub fn collision_invariant(species: &SpeciesSet, a: f64, b: &[f64], c: f64) -> TestFamily {
    (0..species.len())
        .map(|s| {
            let m = species.mass(s);
            TestFunction::Quadratic {
                constant: m * a,
                linear: b.iter().map(|x| m * x).collect(),
                quadratic: 0.5 * m * c,
            }
        })
        .collect()
}

/// Smallest admissible sphere resolution multiplier: `K >= 64 / eps`.
pub const MIN_K_PER_EPS: f64 = 64.0;

/// Nodes that must fall inside `[0, eps/2]`.
pub const MIN_SUPPORT_NODES: usize = 16;

/// Default grazing parameters.
pub const DEFAULT_EPS: [f64; 4] = [0.8, 0.4, 0.2, 0.1];

/// Sphere resolution used for `eps`: the even integer at or above `k_per_eps / eps`.
pub fn sphere_resolution(eps: f64, k_per_eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return precondition(format!("grazing parameter must lie in (0, 1), got {eps}"));
    }
    if !(k_per_eps >= MIN_K_PER_EPS) {
        return precondition(format!("angular resolution must satisfy K >= 64/eps, got {k_per_eps}/eps"));
    }
    let k = (k_per_eps / eps).ceil() as usize;
    Ok(k + k % 2)
}

/// Weak-form values for one grazing parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GrazingRow {
    pub eps: f64,
    pub resolution: usize,
    pub support_nodes: usize,
    /// `<Q^{B,eps}, Phi>` per test family.
    pub boltzmann: Vec<f64>,
    /// `<Q^L, Phi>` per test family (independent of `eps`).
    pub landau: Vec<f64>,
    /// `sum_t |B_t - L_t|`.
    pub gap: f64,
    /// `gap / sum_t |L_t|`.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrazingSweep {
    pub rows: Vec<GrazingRow>,
}

impl GrazingSweep {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].gap < w[0].gap)
    }

    pub fn final_relative_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.relative_gap)
    }

    /// Observed `log(gap)` slopes against `log(eps)`, descriptive only.
    pub fn rates(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[1].gap / w[0].gap).ln() / (w[1].eps / w[0].eps).ln())
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,K,support_nodes,test,boltzmann,landau,abs_gap,rel_gap\n");
        for r in &self.rows {
            for (t, (b, l)) in r.boltzmann.iter().zip(&r.landau).enumerate() {
                let gap = (b - l).abs();
                let rel = if *l != 0.0 { gap / l.abs() } else { f64::NAN };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{:e},{:e},{:e},{:e}",
                    r.eps, r.resolution, r.support_nodes, t, b, l, gap, rel
                );
            }
            let _ = writeln!(
                s,
                "{},{},{},all,,,{:e},{:e}",
                r.eps, r.resolution, r.support_nodes, r.gap, r.relative_gap
            );
        }
        s
    }
}

/// Inputs of the weak-form sweep. Only the angular quadrature changes with `eps`.
#[derive(Debug, Clone)]
pub struct GrazingSetup {
    pub species: SpeciesSet,
    /// Radial factors; their angular parts are replaced by the grazing family.
    pub radial: KernelSet,
    pub family: GrazingFamily,
    pub grid: VelocityGrid,
    pub state: Vec<Field>,
    pub battery: Vec<TestFamily>,
    /// `K = k_per_eps / eps`, at least [`MIN_K_PER_EPS`].
    pub k_per_eps: f64,
}

/// Compare `<Q^{B,eps}(F,F), Phi>` with `<Q^L(F,F), Phi>` over `eps_list`.
///
/// The Boltzmann side evaluates the test functions exactly at post-collision
/// velocities; the Landau side uses their exact gradients at the nodes.
pub fn grazing_sweep(setup: &GrazingSetup, eps_list: &[f64]) -> Result<GrazingSweep> {
    if eps_list.is_empty() {
        return precondition("at least one grazing parameter is required");
    }
    let ns = setup.species.len();
    if setup.battery.iter().any(|fam| fam.len() != ns) {
        return precondition("each test family needs one function per species");
    }
    let grid = &setup.grid;
    let d = grid.dim();
    let landau_op = LandauOperator::new(setup.species.clone(), setup.radial.clone(), grid.clone())?;
    let velocities = grid.velocities();
    let landau: Vec<f64> = setup
        .battery
        .iter()
        .map(|fam| {
            let grads: Vec<Vec<Vec<f64>>> = fam
                .iter()
                .map(|phi| {
                    let mut comps = vec![vec![0.0; grid.len()]; d];
                    for (idx, v) in velocities.chunks_exact(d).enumerate() {
                        for (c, g) in phi.gradient(v).into_iter().enumerate() {
                            comps[c][idx] = g;
                        }
                    }
                    comps
                })
                .collect();
            landau_op.weak_form_gradients(&setup.state, &grads)
        })
        .collect::<Result<_>>()?;
    let landau_scale: f64 = landau.iter().map(|x| x.abs()).sum();

    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let k = sphere_resolution(eps, setup.k_per_eps)?;
        let sphere = SphereQuadrature::new(d, k)?;
        let nodes = sphere.nodes_within(0.5 * eps);
        if nodes < MIN_SUPPORT_NODES {
            return Err(KineticError::UnresolvedAngularQuadrature { nodes });
        }
        let kernels = setup.family.kernels(&setup.radial, eps)?;
        let op = BoltzmannOperator::new(setup.species.clone(), kernels, grid.clone(), sphere)?;
        let boltzmann: Vec<f64> = setup
            .battery
            .iter()
            .map(|fam| op.weak_form_analytic(&setup.state, &|s: usize, v: &[f64]| fam[s].value(v)))
            .collect::<Result<_>>()?;
        let gap: f64 = boltzmann.iter().zip(&landau).map(|(b, l)| (b - l).abs()).sum();
        rows.push(GrazingRow {
            eps,
            resolution: k,
            support_nodes: nodes,
            boltzmann,
            landau: landau.clone(),
            gap,
            relative_gap: gap / landau_scale,
        });
    }
    Ok(GrazingSweep { rows })
}

/// A single collision configuration for the small-angle lemma (`d = 2`).
#[derive(Debug, Clone)]
pub struct LemmaPoint {
    pub vi: Vec<f64>,
    pub vj: Vec<f64>,
    pub mi: f64,
    pub mj: f64,
    pub stats: (Statistics, Statistics),
    /// Densities entering `tau_i = 1 + alpha_i f_i`.
    pub densities: (TestFunction, TestFunction),
    pub phi: (TestFunction, TestFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub thetas: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: f64,
    pub residuals: Vec<f64>,
    pub order: f64,
    /// `lhs / shape` at the smallest angle, where `shape` is the limit without its
    /// leading constant; should match [`lemma_constant`].
    pub fitted_constant: f64,
}

impl LemmaReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,lhs,rhs,residual\n");
        for ((t, l), r) in self.thetas.iter().zip(&self.lhs).zip(&self.residuals) {
            let _ = writeln!(s, "{t:e},{l:e},{:e},{r:e}", self.rhs);
        }
        s
    }
}

/// Leading constant `|S^{d-2}| / (2(d-1))` of the limit, without the mass factor.
pub fn lemma_constant(dim: usize) -> f64 {
    sphere_measure(dim - 2) / (2.0 * (dim as f64 - 1.0))
}

fn tau_of(stats: Statistics, f: &TestFunction, v: &[f64]) -> f64 {
    1.0 + stats.alpha() * f.value(v)
}

/// `theta^{-2} sum_{gamma = +-} tau_i' tau_j' grad_bar(Phi)` against its small-angle limit.
pub fn grazing_lemma_check(thetas: &[f64], point: &LemmaPoint) -> Result<LemmaReport> {
    let d = point.vi.len();
    if d != 2 || point.vj.len() != 2 {
        return precondition("the small-angle lemma check is implemented for d = 2");
    }
    if thetas.iter().any(|t| !(*t > 0.0 && *t < std::f64::consts::FRAC_PI_2)) {
        return precondition("angles must lie in (0, pi/2)");
    }
    let (vi, vj) = (&point.vi, &point.vj);
    let z = [vi[0] - vj[0], vi[1] - vj[1]];
    let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
    if r == 0.0 {
        return Err(KineticError::UndefinedDeviationAngle);
    }
    let k = [z[0] / r, z[1] / r];
    let gamma = [-k[1], k[0]];
    let (mi, mj) = (point.mi, point.mj);
    let (si, sj) = point.stats;
    let (fi, fj) = (&point.densities.0, &point.densities.1);
    let (phi_i, phi_j) = (&point.phi.0, &point.phi.1);

    let mut lhs = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let (s, c) = theta.sin_cos();
        let mut acc = 0.0;
        for sign in [1.0, -1.0] {
            let omega = [k[0] * c + sign * s * gamma[0], k[1] * c + sign * s * gamma[1]];
            let (pi, pj) = post_collision(vi, vj, &omega, mi, mj)?;
            let grad_bar = (phi_i.value(&pi) - phi_i.value(vi)) + (phi_j.value(&pj) - phi_j.value(vj));
            acc += tau_of(si, fi, &pi) * tau_of(sj, fj, &pj) * grad_bar;
        }
        lhs.push(acc / (theta * theta));
    }

    let shape = lemma_shape(point, &z)?;
    let mass_factor = (mi * mj).powi(2) / (mi + mj).powi(2);
    let rhs = lemma_constant(d) * mass_factor * shape;
    let residuals: Vec<f64> = lhs.iter().map(|l| (l - rhs).abs()).collect();
    let order = fitted_order(thetas, &residuals);
    let smallest = thetas
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(q, _)| q)
        .expect("non-empty");
    let fitted_constant = lhs[smallest] / (mass_factor * shape);
    Ok(LemmaReport {
        thetas: thetas.to_vec(),
        lhs,
        rhs,
        residuals,
        order,
        fitted_constant,
    })
}

/// `2 r^2 D(tau_i tau_j) . Pi g + tau_i tau_j D.(r^2 Pi g)` with
/// `D = m_i^{-1} grad_i - m_j^{-1} grad_j` and `g = D Phi`.
fn lemma_shape(point: &LemmaPoint, z: &[f64; 2]) -> Result<f64> {
    let (vi, vj) = (&point.vi, &point.vj);
    let (mi, mj) = (point.mi, point.mj);
    let (si, sj) = point.stats;
    let (fi, fj) = (&point.densities.0, &point.densities.1);
    let (phi_i, phi_j) = (&point.phi.0, &point.phi.1);
    let d = 2;
    let r2 = z[0] * z[0] + z[1] * z[1];
    let pi = pi_projection(vi, vj)?;

    let (ti, tj) = (tau_of(si, fi, vi), tau_of(sj, fj, vj));
    let (gfi, gfj) = (fi.gradient(vi), fj.gradient(vj));
    let (gpi, gpj) = (phi_i.gradient(vi), phi_j.gradient(vj));
    let (hpi, hpj) = (phi_i.hessian(vi), phi_j.hessian(vj));
    let dtau: Vec<f64> = (0..d)
        .map(|a| si.alpha() * gfi[a] * tj / mi - sj.alpha() * gfj[a] * ti / mj)
        .collect();
    let g: Vec<f64> = (0..d).map(|a| gpi[a] / mi - gpj[a] / mj).collect();

    let mut first = 0.0;
    for a in 0..d {
        for b in 0..d {
            first += dtau[a] * pi[a][b] * g[b];
        }
    }
    // D.(r^2 Pi g) = (1/mi + 1/mj) div_z(r^2 Pi) . g + r^2 Pi : (D^2 phi_i / mi^2 + D^2 phi_j / mj^2),
    // with div_z(r^2 Pi) = -(d-1) z
    let mut second = -(d as f64 - 1.0) * (1.0 / mi + 1.0 / mj) * (z[0] * g[0] + z[1] * g[1]);
    for a in 0..d {
        for b in 0..d {
            second += r2 * pi[a][b] * (hpi[a * d + b] / (mi * mi) + hpj[a * d + b] / (mj * mj));
        }
    }
    Ok(2.0 * r2 * first + ti * tj * second)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerpReport {
    pub thetas: Vec<f64>,
    /// `theta^{-2} sum_{gamma=+-} (omega-k)(omega-k)^T`, row-major.
    pub tensors: Vec<[f64; 4]>,
    /// Coefficient of `Pi_{k-perp}` in each tensor.
    pub coefficients: Vec<f64>,
    /// Frobenius distance to `expected Pi_{k-perp}`.
    pub residuals: Vec<f64>,
    pub expected: f64,
    pub order: f64,
}

impl PerpReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,t00,t01,t10,t11,coefficient,residual\n");
        for (q, t) in self.thetas.iter().enumerate() {
            let m = self.tensors[q];
            let _ = writeln!(
                s,
                "{t:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                m[0], m[1], m[2], m[3], self.coefficients[q], self.residuals[q]
            );
        }
        s
    }
}

/// Small-angle second moment of `omega - k` over the two-point sphere `S^0` (`d = 2`).
///
/// The leading term is `theta^2 |S^0|/(d-1) Pi_{k-perp} = 2 theta^2 Pi_{k-perp}`.
pub fn perp_identity_check(thetas: &[f64], k: &[f64]) -> Result<PerpReport> {
    if k.len() != 2 {
        return precondition("the perpendicular identity check is implemented for d = 2");
    }
    let norm = (k[0] * k[0] + k[1] * k[1]).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return precondition(format!("k must be a unit vector, |k| = {norm}"));
    }
    if thetas.iter().any(|t| !(*t > 0.0)) {
        return precondition("angles must be positive");
    }
    let gamma = [-k[1], k[0]];
    let perp = [gamma[0] * gamma[0], gamma[0] * gamma[1], gamma[1] * gamma[0], gamma[1] * gamma[1]];
    let expected = sphere_measure(0) / (2.0 - 1.0);
    let mut tensors = Vec::new();
    let mut coefficients = Vec::new();
    let mut residuals = Vec::new();
    for &theta in thetas {
        let (s, c) = theta.sin_cos();
        let mut t = [0.0; 4];
        for sign in [1.0, -1.0] {
            // omega - k = k (cos - 1) + gamma sin, with cos - 1 = -2 sin^2(theta/2)
            let cm1 = -2.0 * (0.5 * theta).sin().powi(2);
            let e = [k[0] * cm1 + sign * s * gamma[0], k[1] * cm1 + sign * s * gamma[1]];
            debug_assert!(((k[0] * c + sign * s * gamma[0]) - k[0] - e[0]).abs() < 1e-12);
            for a in 0..2 {
                for b in 0..2 {
                    t[2 * a + b] += e[a] * e[b] / (theta * theta);
                }
            }
        }
        let coef: f64 = t.iter().zip(&perp).map(|(x, p)| x * p).sum();
        let res = t
            .iter()
            .zip(&perp)
            .map(|(x, p)| (x - expected * p).powi(2))
            .sum::<f64>()
            .sqrt();
        tensors.push(t);
        coefficients.push(coef);
        residuals.push(res);
    }
    let order = fitted_order(thetas, &residuals);
    Ok(PerpReport {
        thetas: thetas.to_vec(),
        tensors,
        coefficients,
        residuals,
        expected,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Angular, PairKernel};
    use crate::solver::{Bump, InitialCondition};

    fn numeric_gradient(f: &TestFunction, v: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..v.len())
            .map(|a| {
                let mut p = v.to_vec();
                let mut m = v.to_vec();
                p[a] += h;
                m[a] -= h;
                (f.value(&p) - f.value(&m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn test_function_derivatives() {
        let fs = [
            TestFunction::GaussPoly {
                amplitude: 0.7,
                center: vec![0.3, -0.4],
                width: 1.3,
                linear: vec![0.5, -0.2],
            },
            TestFunction::Quadratic {
                constant: 1.0,
                linear: vec![0.1, 0.2],
                quadratic: -0.3,
            },
        ];
        let v = [0.9, 0.2];
        for f in &fs {
            let g = f.gradient(&v);
            let gn = numeric_gradient(f, &v);
            for a in 0..2 {
                assert!((g[a] - gn[a]).abs() < 1e-8);
            }
            let h = f.hessian(&v);
            for a in 0..2 {
                let mut p = v.to_vec();
                let mut m = v.to_vec();
                p[a] += 1e-5;
                m[a] -= 1e-5;
                for b in 0..2 {
                    let fd = (f.gradient(&p)[b] - f.gradient(&m)[b]) / 2e-5;
                    assert!((h[a * 2 + b] - fd).abs() < 1e-7, "{a}{b}");
                }
            }
        }
    }

    #[test]
    fn perp_identity_constant_and_geometry() {
        let thetas = [1e-1, 1e-2, 1e-3];
        let rep = perp_identity_check(&thetas, &[1.0, 0.0]).unwrap();
        assert_eq!(rep.expected, 2.0);
        let t = rep.tensors[2];
        // k = e_x: limit tensor is 2 e_y e_y
        assert!(t[0].abs() < 1e-5 && t[1] == 0.0 && t[2] == 0.0);
        assert!(((rep.coefficients[2] - 2.0) / 2.0).abs() < 0.01);
        assert!(rep.order >= 1.0, "{rep:?}");
        // off-diagonal in the (k, gamma) frame vanishes by symmetry
        let (k, g) = ([0.6, 0.8], [-0.8, 0.6]);
        let oblique = perp_identity_check(&thetas, &k).unwrap();
        let t = oblique.tensors[2];
        let cross: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| k[a] * t[2 * a + b] * g[b]).sum();
        assert!(cross.abs() < 1e-12, "{cross}");
        assert!(((oblique.coefficients[2] - 2.0) / 2.0).abs() < 0.01);
    }

    fn lemma_point(stats: (Statistics, Statistics), phi: (TestFunction, TestFunction)) -> LemmaPoint {
        LemmaPoint {
            vi: vec![0.7, -0.3],
            vj: vec![-0.4, 0.5],
            mi: 1.0,
            mj: 2.5,
            stats,
            densities: (
                TestFunction::gaussian(0.4, vec![0.1, 0.0], 1.0),
                TestFunction::gaussian(0.3, vec![0.0, 0.2], 0.8),
            ),
            phi,
        }
    }

    #[test]
    fn lemma_converges_for_each_statistics() {
        let thetas = [1e-1, 1e-2, 1e-3];
        let phi = (
            TestFunction::GaussPoly {
                amplitude: 1.0,
                center: vec![0.2, 0.1],
                width: 1.1,
                linear: vec![0.4, -0.6],
            },
            TestFunction::gaussian(0.8, vec![-0.3, 0.4], 0.9),
        );
        for s in [Statistics::Maxwell, Statistics::Bose, Statistics::Fermi] {
            let rep = grazing_lemma_check(&thetas, &lemma_point((s, Statistics::Fermi), phi.clone())).unwrap();
            assert!(rep.rhs.abs() > 1e-3, "{rep:?}");
            assert!(rep.order >= 1.0, "{rep:?}");
            assert!(rep.residuals[2] < 1e-5 * rep.rhs.abs().max(1.0), "{rep:?}");
            assert!((rep.fitted_constant / lemma_constant(2) - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn lemma_vanishes_on_invariants() {
        let species = SpeciesSet::new(vec![1.0, 2.5], vec![Statistics::Maxwell; 2]).unwrap();
        let inv = collision_invariant(&species, 0.7, &[0.3, -1.1], 0.9);
        let point = lemma_point(
            (Statistics::Maxwell, Statistics::Maxwell),
            (inv[0].clone(), inv[1].clone()),
        );
        let rep = grazing_lemma_check(&[1e-1, 1e-2], &point).unwrap();
        assert!(rep.rhs.abs() < 1e-12);
        assert!(rep.lhs.iter().all(|l| l.abs() < 1e-8), "{rep:?}");
        let mut bad = point;
        bad.vj = bad.vi.clone();
        assert!(matches!(
            grazing_lemma_check(&[0.1], &bad),
            Err(KineticError::UndefinedDeviationAngle)
        ));
    }

    fn small_setup(battery: Vec<TestFamily>) -> GrazingSetup {
        let species = SpeciesSet::new(vec![1.0, 2.0], vec![Statistics::Maxwell; 2]).unwrap();
        let grid = VelocityGrid::new(2, 16, 5.0).unwrap();
        let radial = KernelSet::uniform(2, PairKernel::maxwell(1.0, 1.0));
        let family = GrazingFamily::new(Angular::CosPower { c: 1.0, p: 4.0 }, 2, species.masses()).unwrap();
        let ic = [
            InitialCondition::Gaussians(vec![Bump {
                weight: 1.0,
                mean: vec![0.4, 0.0],
                temperature: 1.0,
            }]),
            InitialCondition::Gaussians(vec![Bump {
                weight: 1.0,
                mean: vec![-0.2, 0.3],
                temperature: 0.8,
            }]),
        ];
        let state = (0..2)
            .map(|s| ic[s].build(Statistics::Maxwell, species.mass(s), &grid, s).unwrap())
            .collect();
        GrazingSetup {
            species,
            radial,
            family,
            grid,
            state,
            battery,
            k_per_eps: 128.0,
        }
    }

    #[test]
    fn sweep_invariants_and_errors() {
        let species = SpeciesSet::new(vec![1.0, 2.0], vec![Statistics::Maxwell; 2]).unwrap();
        let setup = small_setup(vec![collision_invariant(&species, 1.0, &[0.5, -0.5], 1.0)]);
        let sweep = grazing_sweep(&setup, &[0.4]).unwrap();
        assert_eq!(sweep.rows.len(), 1);
        let row = &sweep.rows[0];
        assert!(row.support_nodes >= MIN_SUPPORT_NODES);
        assert!(row.boltzmann[0].abs() < 1e-12 && row.landau[0].abs() < 1e-12, "{row:?}");
        assert!(grazing_sweep(&setup, &[1.0]).is_err());
        let mut coarse = setup;
        coarse.k_per_eps = MIN_K_PER_EPS;
        assert!(matches!(
            grazing_sweep(&coarse, &[0.4]),
            Err(KineticError::UnresolvedAngularQuadrature { .. })
        ));
    }

    #[test]
    fn sweep_gap_shrinks() {
        let setup = small_setup(default_battery(2));
        let sweep = grazing_sweep(&setup, &[0.8, 0.4, 0.2]).unwrap();
        assert!(sweep.strictly_decreasing(), "{}", sweep.to_csv());
        assert!(sweep.final_relative_gap() < 0.05, "{}", sweep.to_csv());
    }
}
