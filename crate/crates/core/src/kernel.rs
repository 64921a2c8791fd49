//! Collision geometry and collision kernels.
//!
//! A pair kernel factorizes as `B_ij(r, theta) = alpha_ij(r) b_ij(theta)`, with the
//! angular factor supported in `[0, pi/2]`. Kernels are stored per unordered
//! species pair so `B_ij = B_ji` holds structurally.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use log::warn;

use crate::error::{precondition, KineticError, Result};
use crate::sphere::{integrate, sphere_measure};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Post-collision velocities for masses `mi`, `mj` and collision direction `omega`.
///
/// Returns the inputs unchanged when `vi == vj`.
pub fn post_collision(
    vi: &[f64],
    vj: &[f64],
    omega: &[f64],
    mi: f64,
    mj: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if vi.len() != vj.len() || vi.len() != omega.len() {
        return precondition("velocity and direction dimensions differ");
    }
    let norm_w = omega.iter().map(|c| c * c).sum::<f64>().sqrt();
    if (norm_w - 1.0).abs() > 1e-12 {
        return precondition(format!("collision direction must be a unit vector, |omega| = {norm_w}"));
    }
    if !(mi > 0.0 && mj > 0.0) {
        return precondition("masses must be positive");
    }
    let r = vi
        .iter()
        .zip(vj)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if r == 0.0 {
        return Ok((vi.to_vec(), vj.to_vec()));
    }
    let total = mi + mj;
    let mut pi = Vec::with_capacity(vi.len());
    let mut pj = Vec::with_capacity(vi.len());
    for c in 0..vi.len() {
        let momentum = mi * vi[c] + mj * vj[c];
        pi.push((momentum + mj * r * omega[c]) / total);
        pj.push((momentum - mi * r * omega[c]) / total);
    }
    Ok((pi, pj))
}

/// Angle between the relative velocity `vi - vj` and `omega`.
pub fn deviation_angle(vi: &[f64], vj: &[f64], omega: &[f64]) -> Result<f64> {
    let rel: Vec<f64> = vi.iter().zip(vj).map(|(a, b)| a - b).collect();
    let r = rel.iter().map(|c| c * c).sum::<f64>().sqrt();
    if r == 0.0 {
        return Err(KineticError::UndefinedDeviationAngle);
    }
    let cos = rel.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>() / r;
    Ok(cos.clamp(-1.0, 1.0).acos())
}

/// Radial factor `alpha_ij(r)`.
#[derive(Clone)]
pub enum Radial {
    /// Maxwell molecules, `alpha = c`.
    Maxwell { c: f64 },
    /// `alpha = c r^gamma`.
    PowerLaw { c: f64, gamma: f64 },
    /// `alpha = c exp(rate r)`.
    Exponential { c: f64, rate: f64 },
    /// Piecewise-linear table, constant extrapolation.
    Tabulated { r: Vec<f64>, values: Vec<f64> },
    /// User supplied function with optional analytic derivative.
    Custom {
        value: ScalarFn,
        derivative: Option<ScalarFn>,
    },
}

impl fmt::Debug for Radial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radial::Maxwell { c } => write!(f, "Maxwell {{ c: {c} }}"),
            Radial::PowerLaw { c, gamma } => write!(f, "PowerLaw {{ c: {c}, gamma: {gamma} }}"),
            Radial::Exponential { c, rate } => write!(f, "Exponential {{ c: {c}, rate: {rate} }}"),
            Radial::Tabulated { r, .. } => write!(f, "Tabulated {{ {} rows }}", r.len()),
            Radial::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Radial {
    /// Parse a two-column `r alpha` table; `#` starts a comment.
    pub fn tabulated_from_str(text: &str) -> Result<Self> {
        let mut r = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            if cols.len() != 2 {
                return Err(KineticError::Format(format!(
                    "radial table line {}: expected two columns",
                    lineno + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    KineticError::Format(format!("radial table line {}: bad number `{s}`", lineno + 1))
                })
            };
            r.push(parse(cols[0])?);
            values.push(parse(cols[1])?);
        }
        Self::tabulated(r, values)
    }

    pub fn tabulated(r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if r.len() < 2 || r.len() != values.len() {
            return precondition("a radial table needs at least two rows");
        }
        if r.windows(2).any(|w| w[1] <= w[0]) {
            return precondition("radial table abscissae must be strictly increasing");
        }
        if values.iter().any(|v| *v < 0.0) {
            return precondition("radial table values must be nonnegative");
        }
        Ok(Radial::Tabulated { r, values })
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Radial::Maxwell { c } => *c,
            Radial::PowerLaw { c, gamma } => c * r.powf(*gamma),
            Radial::Exponential { c, rate } => c * (rate * r).exp(),
            Radial::Tabulated { r: xs, values } => {
                if r <= xs[0] {
                    return values[0];
                }
                let last = xs.len() - 1;
                if r >= xs[last] {
                    return values[last];
                }
                let k = xs.partition_point(|x| *x <= r) - 1;
                let t = (r - xs[k]) / (xs[k + 1] - xs[k]);
                values[k] * (1.0 - t) + values[k + 1] * t
            }
            Radial::Custom { value, .. } => value(r),
        }
    }

    /// Analytic derivative when one is known.
    pub fn analytic_derivative(&self, r: f64) -> Option<f64> {
        match self {
            Radial::Maxwell { .. } => Some(0.0),
            Radial::PowerLaw { c, gamma } => Some(c * gamma * r.powf(gamma - 1.0)),
            Radial::Exponential { c, rate } => Some(c * rate * (rate * r).exp()),
            Radial::Tabulated { .. } => None,
            Radial::Custom { derivative, .. } => derivative.as_ref().map(|d| d(r)),
        }
    }

    /// Derivative by central differences with step `1e-6 max(r, 1)`.
    pub fn central_derivative(&self, r: f64) -> f64 {
        let h = 1e-6 * r.max(1.0);
        (self.eval(r + h) - self.eval(r - h)) / (2.0 * h)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Radial::Maxwell { .. })
    }
}

/// Angular factor `b_ij(theta)`, supported in `[0, pi/2]`.
#[derive(Clone)]
pub enum Angular {
    /// `b = c` on `[0, pi/2]`.
    Constant { c: f64 },
    /// `b = c cos(theta)^p` on `[0, pi/2]`.
    CosPower { c: f64, p: f64 },
    /// Arbitrary nonnegative function; values beyond `pi/2` are discarded.
    Custom(ScalarFn),
    /// Member of a grazing family: `sin^{2-d}(theta) (pi/eps)^3 beta(pi theta / eps)`
    /// where `beta = norm sin^{d-2} b_base` is the normalized base density.
    Grazing {
        base: Arc<Angular>,
        dim: usize,
        norm: f64,
        eps: f64,
    },
}

impl fmt::Debug for Angular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angular::Constant { c } => write!(f, "Constant {{ c: {c} }}"),
            Angular::CosPower { c, p } => write!(f, "CosPower {{ c: {c}, p: {p} }}"),
            Angular::Custom(_) => write!(f, "Custom"),
            Angular::Grazing { base, norm, eps, .. } => {
                write!(f, "Grazing {{ base: {base:?}, norm: {norm}, eps: {eps} }}")
            }
        }
    }
}

impl Angular {
    /// Wrap a user function, warning if it has mass beyond `pi/2` (which is discarded).
    pub fn custom(f: ScalarFn) -> Self {
        let leaks = (1..=64).any(|k| {
            let theta = FRAC_PI_2 + k as f64 * (PI - FRAC_PI_2) / 64.0;
            f(theta) != 0.0
        });
        if leaks {
            warn!("angular kernel is nonzero beyond pi/2; those values are treated as 0");
        }
        Angular::Custom(f)
    }

    /// Largest deviation angle in the support.
    pub fn support_max(&self) -> f64 {
        match self {
            Angular::Grazing { eps, .. } => 0.5 * eps,
            _ => FRAC_PI_2,
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        if !(0.0..=self.support_max()).contains(&theta) {
            return 0.0;
        }
        match self {
            Angular::Constant { c } => *c,
            Angular::CosPower { c, p } => c * theta.cos().max(0.0).powf(*p),
            Angular::Custom(f) => f(theta).max(0.0),
            Angular::Grazing {
                base,
                dim,
                norm,
                eps,
            } => {
                let beta = scaled_density(base, *dim, *norm, *eps, theta);
                if *dim == 2 {
                    beta
                } else {
                    let s = theta.sin();
                    if s == 0.0 {
                        // limit sin(pi t/eps)/sin(t) -> pi/eps
                        (PI / eps).powi(3) * norm * base.eval(0.0) * (PI / eps)
                    } else {
                        beta / s.powi(*dim as i32 - 2)
                    }
                }
            }
        }
    }
}

/// Scaled density `beta^eps(theta) = (pi/eps)^3 beta(pi theta/eps)`, `beta = norm sin^{d-2} b`.
fn scaled_density(base: &Angular, dim: usize, norm: f64, eps: f64, theta: f64) -> f64 {
    let u = PI * theta / eps;
    (PI / eps).powi(3) * base_density(base, dim, norm, u)
}

fn base_density(base: &Angular, dim: usize, norm: f64, theta: f64) -> f64 {
    norm * theta.sin().powi(dim as i32 - 2) * base.eval(theta)
}

/// Collision kernel of one unordered species pair.
#[derive(Debug, Clone)]
pub struct PairKernel {
    pub radial: Radial,
    pub angular: Angular,
}

impl PairKernel {
    pub fn new(radial: Radial, angular: Angular) -> Self {
        Self { radial, angular }
    }

    /// Maxwell molecules with constant angular factor.
    pub fn maxwell(alpha: f64, b: f64) -> Self {
        Self::new(Radial::Maxwell { c: alpha }, Angular::Constant { c: b })
    }

    /// `B(r, theta) = alpha(r) b(theta)`; zero outside the angular support.
    pub fn kernel_b(&self, r: f64, theta: f64) -> Result<f64> {
        if r < 0.0 {
            return precondition(format!("relative speed must be nonnegative, got {r}"));
        }
        let b = self.angular.eval(theta);
        if b == 0.0 {
            return Ok(0.0);
        }
        Ok(self.radial.eval(r) * b)
    }

    /// Landau kernel `A_ij(r) = r^2 alpha_ij(r) / m_i`.
    pub fn kernel_a(&self, r: f64, mi: f64) -> Result<f64> {
        if r < 0.0 {
            return precondition(format!("relative speed must be nonnegative, got {r}"));
        }
        if mi <= 0.0 {
            return precondition("mass must be positive");
        }
        Ok(r * r * self.radial.eval(r) / mi)
    }
}

/// Kernels for every unordered pair of `N` species.
#[derive(Debug, Clone)]
pub struct KernelSet {
    species: usize,
    pairs: Vec<PairKernel>,
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

impl KernelSet {
    /// The same kernel for every pair.
    pub fn uniform(species: usize, kernel: PairKernel) -> Self {
        let count = species * (species + 1) / 2;
        Self {
            species,
            pairs: vec![kernel; count],
        }
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn pair(&self, i: usize, j: usize) -> &PairKernel {
        &self.pairs[pair_index(self.species, i, j)]
    }

    pub fn set_pair(&mut self, i: usize, j: usize, kernel: PairKernel) {
        let idx = pair_index(self.species, i, j);
        self.pairs[idx] = kernel;
    }

    /// The same set with every angular factor replaced by `f(i, j)`.
    pub fn with_angular(&self, f: impl Fn(usize, usize) -> Angular) -> Self {
        let mut out = self.clone();
        for i in 0..self.species {
            for j in i..self.species {
                let radial = self.pair(i, j).radial.clone();
                out.set_pair(i, j, PairKernel::new(radial, f(i, j)));
            }
        }
        out
    }
}

/// Target second angular moment `2(d-1)/|S^{d-2}| (m_i+m_j)^2/(m_i m_j)^2`.
pub fn target_second_moment(dim: usize, mi: f64, mj: f64) -> f64 {
    2.0 * (dim as f64 - 1.0) / sphere_measure(dim - 2) * (mi + mj).powi(2) / (mi * mj).powi(2)
}

const MOMENT_PANELS: usize = 256;
const MOMENT_ORDER: usize = 8;

/// Grazing-scaled angular family built from a base angular factor.
///
/// At construction each pair's base density is rescaled so that its second angular
/// moment equals [`target_second_moment`].
#[derive(Debug, Clone)]
pub struct GrazingFamily {
    base: Arc<Angular>,
    dim: usize,
    masses: Vec<f64>,
    norms: Vec<f64>,
}

impl GrazingFamily {
    pub fn new(base: Angular, dim: usize, masses: &[f64]) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return precondition(format!("dimension must be 2 or 3, got {dim}"));
        }
        if matches!(base, Angular::Grazing { .. }) {
            return precondition("grazing families must be built from an unscaled base kernel");
        }
        let raw = integrate(
            |t| t * t * base_density(&base, dim, 1.0, t),
            0.0,
            FRAC_PI_2,
            MOMENT_PANELS,
            MOMENT_ORDER,
        );
        if !(raw > 0.0) {
            return precondition("base angular density has a vanishing second moment");
        }
        let n = masses.len();
        let mut norms = vec![0.0; n * (n + 1) / 2];
        for i in 0..n {
            for j in i..n {
                norms[pair_index(n, i, j)] = target_second_moment(dim, masses[i], masses[j]) / raw;
            }
        }
        Ok(Self {
            base: Arc::new(base),
            dim,
            masses: masses.to_vec(),
            norms,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self, i: usize, j: usize) -> f64 {
        self.norms[pair_index(self.masses.len(), i, j)]
    }

    /// Normalized base density `beta_ij(theta)`.
    pub fn base_density(&self, i: usize, j: usize, theta: f64) -> f64 {
        if !(0.0..=FRAC_PI_2).contains(&theta) {
            return 0.0;
        }
        base_density(&self.base, self.dim, self.norm(i, j), theta)
    }

    /// Scaled density `beta^eps_ij(theta)`, supported in `[0, eps/2]`.
    pub fn scaled_angular(&self, i: usize, j: usize, eps: f64, theta: f64) -> Result<f64> {
        check_eps(eps)?;
        if !(0.0..=0.5 * eps).contains(&theta) {
            return Ok(0.0);
        }
        Ok(scaled_density(&self.base, self.dim, self.norm(i, j), eps, theta))
    }

    /// `int theta^2 beta^eps(theta) d theta` by composite quadrature (`eps = None` for the base).
    pub fn second_moment(&self, i: usize, j: usize, eps: Option<f64>) -> Result<f64> {
        match eps {
            None => Ok(integrate(
                |t| t * t * self.base_density(i, j, t),
                0.0,
                FRAC_PI_2,
                MOMENT_PANELS,
                MOMENT_ORDER,
            )),
            Some(e) => {
                check_eps(e)?;
                let norm = self.norm(i, j);
                Ok(integrate(
                    |t| t * t * scaled_density(&self.base, self.dim, norm, e, t),
                    0.0,
                    0.5 * e,
                    MOMENT_PANELS,
                    MOMENT_ORDER,
                ))
            }
        }
    }

    /// Collision angular factor `b^eps_ij = sin^{2-d} beta^eps_ij` for the pair.
    pub fn angular(&self, i: usize, j: usize, eps: f64) -> Result<Angular> {
        check_eps(eps)?;
        Ok(Angular::Grazing {
            base: self.base.clone(),
            dim: self.dim,
            norm: self.norm(i, j),
            eps,
        })
    }

    /// Kernel set with radial factors from `radial` and grazing angular factors at `eps`.
    pub fn kernels(&self, radial: &KernelSet, eps: f64) -> Result<KernelSet> {
        check_eps(eps)?;
        Ok(radial.with_angular(|i, j| self.angular(i, j, eps).expect("eps checked")))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return precondition(format!("grazing parameter must lie in (0, 1), got {eps}"));
    }
    Ok(())
}

/// Outcome of checking `r |alpha'(r)| / alpha(r) <= 2 sqrt(Lambda_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub holds: bool,
    pub worst_ratio: f64,
    pub threshold: f64,
    /// Samples where `alpha(r) = 0`, excluded from the ratio.
    pub indeterminate: Vec<f64>,
}

/// Check the kernel hypothesis of Fisher-information monotonicity at sample radii.
pub fn assumption_check(pair: &PairKernel, lambda_b: f64, r_samples: &[f64]) -> Result<AssumptionReport> {
    if !(lambda_b > 0.0) {
        return precondition(format!("Lambda_b must be positive, got {lambda_b}"));
    }
    let threshold = 2.0 * lambda_b.sqrt();
    let mut worst: f64 = 0.0;
    let mut indeterminate = Vec::new();
    for &r in r_samples {
        if r < 0.0 {
            return precondition(format!("sample radius must be nonnegative, got {r}"));
        }
        let a = pair.radial.eval(r);
        if a == 0.0 {
            warn!("alpha({r}) = 0: sample excluded from the assumption check");
            indeterminate.push(r);
            continue;
        }
        let da = pair
            .radial
            .analytic_derivative(r)
            .unwrap_or_else(|| pair.radial.central_derivative(r));
        worst = worst.max(r * da.abs() / a);
    }
    Ok(AssumptionReport {
        holds: worst <= threshold,
        worst_ratio: worst,
        threshold,
        indeterminate,
    })
}
