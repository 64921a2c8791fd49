//! Discrete multi-species quantum Boltzmann operator.
//!
//! The operator is assembled as the adjoint of a discrete Boltzmann gradient. For
//! species `i` at node `a`, species `j` at node `b` and a sphere node `q`, the
//! post-collision values of the entropy variables `psi = log(f/tau)` are obtained
//! by Catmull-Rom interpolation. The flux
//!
//! ```text
//! g = kappa * tau_i tau_j tau_i' tau_j' (exp(psi_i' + psi_j') - exp(psi_i + psi_j))
//! ```
//!
//! is added at `a`, `b` and subtracted from the interpolation stencils of the
//! post-collision points. The discrete weak form, conservation of the collision
//! invariants (which interpolation reproduces exactly), `dH/dt = -D` and the
//! annihilation of equilibria (quadratic `psi`) hold to rounding error.

use rayon::prelude::*;

use crate::error::{precondition, KineticError, Result};
use crate::grid::{catmull_rom_weights, moments_of, Field, VelocityGrid};
use crate::kernel::{post_collision, KernelSet};
use crate::species::{SpeciesSet, Statistics};
use crate::sphere::{frame, rotate, SphereQuadrature};

/// Branch threshold on `|log s - log t|` for the log-mean series.
pub const LOG_MEAN_THRESHOLD: f64 = 1e-8;

/// Relative positivity floor: cells with `f <= FLOOR_FACTOR * max f` are inactive.
pub const FLOOR_FACTOR: f64 = 1e-12;

/// Relative clamp keeping `log f` finite. Far below [`FLOOR_FACTOR`] so that the
/// entropy variables of resolved states stay exact wherever interpolation reads them.
pub const LOG_CLAMP_FACTOR: f64 = 1e-30;

const FERMI_CAP: f64 = 1.0 - 1e-12;
const BOSE_MIN_GAP: f64 = 1e-12;
const CHUNKS: usize = 32;

/// Logarithmic mean `(s - t)/(log s - log t)`.
pub fn log_mean(s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0 && t > 0.0) {
        return precondition(format!("log mean needs positive arguments, got ({s}, {t})"));
    }
    let d = s.ln() - t.ln();
    if d.abs() < LOG_MEAN_THRESHOLD {
        // symmetric expansion about the geometric midpoint
        let d2 = d * d;
        return Ok((s * t).sqrt() * (1.0 + d2 / 24.0 + d2 * d2 / 1920.0));
    }
    Ok((s - t) / d)
}

/// Log mean of `exp(x)` and `exp(y)`, evaluated from the logarithms.
#[inline]
pub(crate) fn log_mean_exp(x: f64, y: f64) -> f64 {
    let half = 0.5 * (x - y);
    let shc = if half.abs() < 1e-4 {
        let h2 = half * half;
        1.0 + h2 / 6.0 + h2 * h2 / 120.0
    } else {
        half.sinh() / half
    };
    (0.5 * (x + y)).exp() * shc
}

/// Branch-free `exp` (Cody-Waite reduction, degree-13 Taylor polynomial) that the
/// compiler can vectorize; within a few ulp of `f64::exp` on `[-708, 709]`.
#[inline(always)]
pub(crate) fn fast_exp(x: f64) -> f64 {
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let x = x.max(-708.0).min(709.0);
    let t = x * std::f64::consts::LOG2_E + SHIFTER;
    let n = t - SHIFTER;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    let mut p = INV_FACTORIAL[13];
    for c in INV_FACTORIAL[..13].iter().rev() {
        p = p * r + c;
    }
    let bits = (t.to_bits().wrapping_sub(SHIFTER.to_bits()).wrapping_add(1023)) << 52;
    p * f64::from_bits(bits)
}

const INV_FACTORIAL: [f64; 14] = {
    let mut out = [1.0; 14];
    let mut k = 1;
    while k < 14 {
        out[k] = out[k - 1] / k as f64;
        k += 1;
    }
    out
};

/// Deterministic dot product with four interleaved accumulators.
#[inline(always)]
pub(crate) fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Boltzmann gradient `phi_j(v_j') + phi_i(v_i') - phi_j(v_j) - phi_i(v_i)`.
pub fn grad_bar(
    phi_i: impl Fn(&[f64]) -> f64,
    phi_j: impl Fn(&[f64]) -> f64,
    vi: &[f64],
    vj: &[f64],
    omega: &[f64],
    mi: f64,
    mj: f64,
) -> Result<f64> {
    let (pi, pj) = post_collision(vi, vj, omega, mi, mj)?;
    Ok(phi_j(&pj) + phi_i(&pi) - phi_j(vj) - phi_i(vi))
}

/// Entropy variable `log(f/tau(f))` with the density clamped to `[floor, cap]`.
pub fn entropy_variable(stats: Statistics, f: f64, floor: f64) -> f64 {
    let fc = clamp_density(stats, f, floor);
    (fc / (1.0 + stats.alpha() * fc)).ln()
}

#[inline]
fn clamp_density(stats: Statistics, f: f64, floor: f64) -> f64 {
    let lo = floor.max(f64::MIN_POSITIVE);
    let fc = f.max(lo);
    if stats == Statistics::Fermi {
        fc.min(FERMI_CAP)
    } else {
        fc
    }
}

/// `tau` recovered from `e = f/tau`: `1/(1 - alpha e)`.
#[inline]
fn tau_from_ratio(alpha: f64, e: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        1.0 / (1.0 - alpha * e).max(BOSE_MIN_GAP)
    }
}

/// Per-species arrays derived from a state.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub psi: Vec<Vec<f64>>,
    /// `f/tau` of the clamped density.
    pub ratio: Vec<Vec<f64>>,
    pub tau: Vec<Vec<f64>>,
    /// 1 where the density exceeds the floor, else 0.
    pub mask: Vec<Vec<f64>>,
}

pub(crate) fn prepare(species: &SpeciesSet, grid: &VelocityGrid, fields: &[Field]) -> Result<Prepared> {
    if fields.len() != species.len() {
        return precondition(format!(
            "{} fields given for {} species",
            fields.len(),
            species.len()
        ));
    }
    let mut out = Prepared {
        psi: Vec::new(),
        ratio: Vec::new(),
        tau: Vec::new(),
        mask: Vec::new(),
    };
    for (s, field) in fields.iter().enumerate() {
        if field.grid() != grid {
            return Err(KineticError::GridMismatch);
        }
        let stats = species.statistics(s);
        let values = field.values();
        if stats == Statistics::Fermi {
            if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| **v > 1.0) {
                return Err(KineticError::FermiOverflow {
                    species: s,
                    node,
                    value,
                });
            }
        }
        let floor = FLOOR_FACTOR * field.max();
        let clamp = LOG_CLAMP_FACTOR * field.max();
        let alpha = stats.alpha();
        let n = values.len();
        let (mut psi, mut ratio, mut tau, mut mask) =
            (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for &f in values {
            let fc = clamp_density(stats, f, clamp);
            let t = 1.0 + alpha * fc;
            let r = fc / t;
            psi.push(r.ln());
            ratio.push(r);
            tau.push(t);
            mask.push(if f > floor && f > 0.0 { 1.0 } else { 0.0 });
        }
        out.psi.push(psi);
        out.ratio.push(ratio);
        out.tau.push(tau);
        out.mask.push(mask);
    }
    Ok(out)
}

/// Collision output with bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionResult {
    /// One nodal array per species.
    pub values: Vec<Vec<f64>>,
    /// `((i, j), ||contribution||_2)` per unordered pair, `h^d`-weighted.
    pub pair_norms: Vec<((usize, usize), f64)>,
    /// Entropy dissipation computed in the same pass, when available.
    pub dissipation: Option<f64>,
    /// `h^d`-weighted norm of the conservative correction, when one was applied.
    pub correction_norm: Option<f64>,
}

impl CollisionResult {
    pub fn species(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// Apply [`conservative_projection`] in place.
    pub fn project(&mut self, grid: &VelocityGrid, masses: &[f64]) -> Result<()> {
        let norm = conservative_projection(&mut self.values, grid, masses)?;
        self.correction_norm = Some(norm);
        Ok(())
    }
}

/// Minimal Euclidean correction making the per-species mass, total momentum and
/// total energy moments of `q` vanish. Returns the `h^d`-weighted correction norm.
pub fn conservative_projection(q: &mut [Vec<f64>], grid: &VelocityGrid, masses: &[f64]) -> Result<f64> {
    use nalgebra::{DMatrix, DVector};
    let ns = q.len();
    if masses.len() != ns {
        return precondition("one mass per species is required");
    }
    let d = grid.dim();
    let nn = grid.len();
    let rows = ns + d + 1;
    // constraint rows, each of length ns * nn, stored blockwise per species
    let vel = grid.velocities();
    let row = |r: usize, s: usize, k: usize| -> f64 {
        if r < ns {
            if r == s {
                1.0
            } else {
                0.0
            }
        } else if r < ns + d {
            masses[s] * vel[k * d + (r - ns)]
        } else {
            let v2: f64 = vel[k * d..k * d + d].iter().map(|c| c * c).sum();
            0.5 * masses[s] * v2
        }
    };
    let mut gram = DMatrix::<f64>::zeros(rows, rows);
    let mut rhs = DVector::<f64>::zeros(rows);
    for s in 0..ns {
        if q[s].len() != nn {
            return Err(KineticError::GridMismatch);
        }
        for k in 0..nn {
            let c: Vec<f64> = (0..rows).map(|r| row(r, s, k)).collect();
            for r1 in 0..rows {
                rhs[r1] += c[r1] * q[s][k];
                for r2 in r1..rows {
                    gram[(r1, r2)] += c[r1] * c[r2];
                }
            }
        }
    }
    for r1 in 0..rows {
        for r2 in 0..r1 {
            gram[(r1, r2)] = gram[(r2, r1)];
        }
    }
    let chol = gram.cholesky().ok_or(KineticError::SingularProjection)?;
    let lambda = chol.solve(&rhs);
    if lambda.iter().any(|x| !x.is_finite()) {
        return Err(KineticError::SingularProjection);
    }
    let mut norm2 = 0.0;
    for s in 0..ns {
        for k in 0..nn {
            let corr: f64 = (0..rows).map(|r| lambda[r] * row(r, s, k)).sum();
            q[s][k] -= corr;
            norm2 += corr * corr;
        }
    }
    Ok((norm2 * grid.cell_volume()).sqrt())
}

/// Interpolation stencil of one post-collision point relative to the pre-collision
/// node `b`, factored into outer rows (all axes but the last) and four inner taps.
#[derive(Clone, Copy)]
struct Taps {
    /// Offset of the first inner tap of each outer row.
    row_offset: [isize; 16],
    row_weight: [f64; 16],
    rows: usize,
    inner: [f64; 4],
}

impl Taps {
    fn build(grid: &VelocityGrid, floor: &[isize; 3], frac: &[f64; 3]) -> Self {
        let d = grid.dim();
        let mut w = [[0.0; 4]; 3];
        for a in 0..d {
            w[a] = catmull_rom_weights(frac[a]);
        }
        let mut taps = Taps {
            row_offset: [0; 16],
            row_weight: [0.0; 16],
            rows: 0,
            inner: w[d - 1],
        };
        let last = (floor[d - 1] - 1) * grid.stride(d - 1) as isize;
        for t in 0..4usize.pow(d as u32 - 1) {
            let mut rem = t;
            let mut off = last;
            let mut wt = 1.0;
            for a in (0..d - 1).rev() {
                let o = rem % 4;
                rem /= 4;
                off += (floor[a] + o as isize - 1) * grid.stride(a) as isize;
                wt *= w[a][o];
            }
            if wt != 0.0 {
                taps.row_offset[taps.rows] = off;
                taps.row_weight[taps.rows] = wt;
                taps.rows += 1;
            }
        }
        taps
    }

    /// `dst[e] = sum_taps w src[start + offset + e]`; `work` needs `dst.len() + 3` entries.
    #[inline(always)]
    fn gather(&self, dst: &mut [f64], src: &[f64], start: usize, work: &mut [f64]) {
        let len = dst.len();
        let work = &mut work[..len + 3];
        work.iter_mut().for_each(|x| *x = 0.0);
        for r in 0..self.rows {
            let s = (start as isize + self.row_offset[r]) as usize;
            let w = self.row_weight[r];
            for (acc, x) in work.iter_mut().zip(&src[s..s + len + 3]) {
                *acc += w * x;
            }
        }
        let [c0, c1, c2, c3] = self.inner;
        let (w0, w1, w2, w3) = (&work[..len], &work[1..len + 1], &work[2..len + 2], &work[3..len + 3]);
        for ((((d, x0), x1), x2), x3) in dst.iter_mut().zip(w0).zip(w1).zip(w2).zip(w3) {
            *d = c0 * x0 + c1 * x1 + c2 * x2 + c3 * x3;
        }
    }

    /// Transpose of [`Taps::gather`] scaled by `sign`: `dst[stencil] += sign * w * g`.
    /// `padded` holds `g` with three zeros on both sides; `work` needs `len + 3` entries.
    #[inline(always)]
    fn scatter(&self, dst: &mut [f64], padded: &[f64], start: usize, sign: f64, work: &mut [f64]) {
        let len = padded.len() - 6;
        let work = &mut work[..len + 3];
        let [c0, c1, c2, c3] = self.inner;
        let (p3, p2, p1, p0) = (
            &padded[3..len + 6],
            &padded[2..len + 5],
            &padded[1..len + 4],
            &padded[..len + 3],
        );
        for ((((h, x0), x1), x2), x3) in work.iter_mut().zip(p3).zip(p2).zip(p1).zip(p0) {
            *h = c0 * x0 + c1 * x1 + c2 * x2 + c3 * x3;
        }
        for r in 0..self.rows {
            let s = (start as isize + self.row_offset[r]) as usize;
            let w = sign * self.row_weight[r];
            for (d, x) in dst[s..s + len + 3].iter_mut().zip(work.iter()) {
                *d += w * x;
            }
        }
    }
}

/// Geometry of one (displacement, sphere node) combination.
struct Cell {
    /// Flat offset from `b` to `a`.
    doff: isize,
    lo: [usize; 3],
    hi: [usize; 3],
    taps_i: Taps,
    taps_j: Taps,
    kappa: f64,
    /// Post-collision displacements from `v_b` in velocity units.
    shift_i: [f64; 3],
    shift_j: [f64; 3],
}

/// Test functions `phi(species, v)` evaluated at arbitrary velocities.
pub type TestFn<'a> = &'a (dyn Fn(usize, &[f64]) -> f64 + Sync);

#[derive(Clone, Copy)]
enum Mode<'a> {
    Collision,
    Mobility(&'a [Vec<f64>]),
    Linear(&'a [Vec<f64>]),
    WeakNodal(&'a [Vec<f64>]),
    WeakAnalytic(TestFn<'a>),
}

impl Mode<'_> {
    fn scatters(&self) -> bool {
        matches!(self, Mode::Collision | Mode::Mobility(_) | Mode::Linear(_))
    }

    fn needs_state(&self) -> bool {
        !matches!(self, Mode::Linear(_))
    }
}

struct PairOutput {
    out_i: Vec<f64>,
    out_j: Vec<f64>,
    scalar: f64,
}

/// Discrete Boltzmann operator for a species set, kernel set, grid and sphere rule.
#[derive(Debug, Clone)]
pub struct BoltzmannOperator {
    species: SpeciesSet,
    kernels: KernelSet,
    grid: VelocityGrid,
    sphere: SphereQuadrature,
    deltas: Vec<[isize; 3]>,
    /// Displacements whose first nonzero component is positive.
    half_deltas: Vec<[isize; 3]>,
}

impl BoltzmannOperator {
    pub fn new(
        species: SpeciesSet,
        kernels: KernelSet,
        grid: VelocityGrid,
        sphere: SphereQuadrature,
    ) -> Result<Self> {
        if kernels.species() != species.len() {
            return precondition("kernel set and species set sizes differ");
        }
        if sphere.dim() != grid.dim() {
            return precondition("sphere rule and velocity grid dimensions differ");
        }
        let n = grid.n() as isize;
        let d = grid.dim();
        let span = 2 * n - 1;
        let mut deltas = Vec::new();
        for t in 0..span.pow(d as u32) {
            let mut rem = t;
            let mut delta = [0isize; 3];
            for a in (0..d).rev() {
                delta[a] = rem % span - (n - 1);
                rem /= span;
            }
            if delta != [0; 3] {
                deltas.push(delta);
            }
        }
        let half_deltas = deltas
            .iter()
            .copied()
            .filter(|d| d.iter().find(|c| **c != 0).is_some_and(|c| *c > 0))
            .collect();
        Ok(Self {
            species,
            kernels,
            grid,
            sphere,
            deltas,
            half_deltas,
        })
    }

    pub fn species(&self) -> &SpeciesSet {
        &self.species
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn sphere(&self) -> &SphereQuadrature {
        &self.sphere
    }

    /// Same discretization with a different kernel set.
    pub fn with_kernels(&self, kernels: KernelSet) -> Result<Self> {
        if kernels.species() != self.species.len() {
            return precondition("kernel set and species set sizes differ");
        }
        let mut out = self.clone();
        out.kernels = kernels;
        Ok(out)
    }

    /// Same discretization with a different sphere rule.
    pub fn with_sphere(&self, sphere: SphereQuadrature) -> Result<Self> {
        if sphere.dim() != self.grid.dim() {
            return precondition("sphere rule and velocity grid dimensions differ");
        }
        let mut out = self.clone();
        out.sphere = sphere;
        Ok(out)
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.species.len();
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
    }

    /// Contribution `Q_ij` of the pair `{i, j}` to species `i`.
    pub fn q_pair(&self, fields: &[Field], i: usize, j: usize) -> Result<Vec<f64>> {
        self.check_pair(i, j)?;
        let prep = prepare(&self.species, &self.grid, fields)?;
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let out = self.sweep_pair(a, b, Some(&prep), Mode::Collision);
        Ok(if i == a { out.out_i } else { out.out_j })
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.species.len() || j >= self.species.len() {
            return precondition(format!("species pair ({i}, {j}) out of range"));
        }
        Ok(())
    }

    /// Full collision operator `Q_i = sum_j Q_ij`, with dissipation and pair norms.
    pub fn q_total(&self, fields: &[Field]) -> Result<CollisionResult> {
        let prep = prepare(&self.species, &self.grid, fields)?;
        Ok(self.assemble(Some(&prep), Mode::Collision, 1.0))
    }

    /// [`BoltzmannOperator::q_total`] followed by the conservative projection.
    pub fn q_total_projected(&self, fields: &[Field]) -> Result<CollisionResult> {
        let mut res = self.q_total(fields)?;
        res.project(&self.grid, self.species.masses())?;
        Ok(res)
    }

    /// Entropy dissipation `D >= 0`.
    pub fn entropy_dissipation(&self, fields: &[Field]) -> Result<f64> {
        Ok(self.q_total(fields)?.dissipation.unwrap_or(0.0))
    }

    /// Weak form `-1/4 sum int B Lambda grad_bar(Phi) grad_bar(dH)` with nodal test
    /// functions interpolated like the entropy variables.
    pub fn weak_form(&self, fields: &[Field], phi: &[Vec<f64>]) -> Result<f64> {
        self.check_test_arrays(phi)?;
        let prep = prepare(&self.species, &self.grid, fields)?;
        Ok(self.assemble(Some(&prep), Mode::WeakNodal(phi), 1.0).dissipation.unwrap_or(0.0))
    }

    /// Weak form with test functions evaluated exactly at post-collision velocities.
    pub fn weak_form_analytic(&self, fields: &[Field], phi: TestFn<'_>) -> Result<f64> {
        let prep = prepare(&self.species, &self.grid, fields)?;
        Ok(self
            .assemble(Some(&prep), Mode::WeakAnalytic(phi), 1.0)
            .dissipation
            .unwrap_or(0.0))
    }

    /// Mobility `M(F) xi = 1/4 grad_bar^T (B Lambda(F) grad_bar xi)`, so `Q = -M dH`.
    pub fn mobility_apply(&self, fields: &[Field], xi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_test_arrays(xi)?;
        let prep = prepare(&self.species, &self.grid, fields)?;
        Ok(self.assemble(Some(&prep), Mode::Mobility(xi), 1.0).values)
    }

    /// Linearized mobility `1/4 grad_bar^T (B grad_bar xi)`.
    pub fn linear_mobility_apply(&self, xi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_test_arrays(xi)?;
        Ok(self.assemble(None, Mode::Linear(xi), 1.0).values)
    }

    /// Linearized operator `Q_lin(F) = 1/4 div_bar(B grad_bar F)`.
    pub fn q_linear(&self, fields: &[Field]) -> Result<CollisionResult> {
        let arrays: Vec<Vec<f64>> = fields.iter().map(|f| f.values().to_vec()).collect();
        self.check_test_arrays(&arrays)?;
        let mut res = self.assemble(None, Mode::Linear(&arrays), -1.0);
        // <Q_lin F, F> = -D_linear
        let hd = self.grid.cell_volume();
        let pairing: f64 = res
            .values
            .iter()
            .zip(&arrays)
            .map(|(q, f)| q.iter().zip(f).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        res.dissipation = Some(-hd * pairing);
        Ok(res)
    }

    fn check_test_arrays(&self, xi: &[Vec<f64>]) -> Result<()> {
        if xi.len() != self.species.len() || xi.iter().any(|x| x.len() != self.grid.len()) {
            return precondition("one nodal array per species on the operator grid is required");
        }
        Ok(())
    }

    /// Sum pair sweeps; `sign` scales the nodal output.
    fn assemble(&self, prep: Option<&Prepared>, mode: Mode<'_>, sign: f64) -> CollisionResult {
        let ns = self.species.len();
        let nn = self.grid.len();
        let hd = self.grid.cell_volume();
        let mut values = vec![vec![0.0; nn]; ns];
        let mut pair_norms = Vec::new();
        let mut scalar = 0.0;
        for (i, j) in self.pairs() {
            let out = self.sweep_pair(i, j, prep, mode);
            scalar += out.scalar;
            if mode.scatters() {
                let mut norm2 = 0.0;
                for (v, o) in values[i].iter_mut().zip(&out.out_i) {
                    *v += sign * o;
                    norm2 += o * o;
                }
                if i != j {
                    for (v, o) in values[j].iter_mut().zip(&out.out_j) {
                        *v += sign * o;
                        norm2 += o * o;
                    }
                }
                pair_norms.push(((i, j), (norm2 * hd).sqrt()));
            }
        }
        let dissipation = match mode {
            Mode::Collision => Some(hd * scalar),
            Mode::WeakNodal(_) | Mode::WeakAnalytic(_) => Some(-hd * scalar),
            _ => None,
        };
        CollisionResult {
            values,
            pair_norms,
            dissipation,
            correction_norm: None,
        }
    }

    fn sweep_pair(&self, i: usize, j: usize, prep: Option<&Prepared>, mode: Mode<'_>) -> PairOutput {
        // For a self-pair, (a, b, q) and (b, a, q) describe the same collision with the
        // post-collision points exchanged, so half of the displacements suffice.
        let deltas = if i == j { &self.half_deltas } else { &self.deltas };
        let nd = deltas.len();
        let chunk = nd.div_ceil(CHUNKS).max(1);
        let ranges: Vec<(usize, usize)> = (0..nd)
            .step_by(chunk)
            .map(|s| (s, (s + chunk).min(nd)))
            .collect();
        let partials: Vec<PairOutput> = ranges
            .par_iter()
            .map(|&(s, e)| self.sweep_chunk(i, j, prep, mode, &deltas[s..e]))
            .collect();
        let mut iter = partials.into_iter();
        let mut acc = iter.next().expect("at least one displacement");
        for p in iter {
            acc.scalar += p.scalar;
            if mode.scatters() {
                for (a, b) in acc.out_i.iter_mut().zip(&p.out_i) {
                    *a += b;
                }
                for (a, b) in acc.out_j.iter_mut().zip(&p.out_j) {
                    *a += b;
                }
            }
        }
        acc
    }

    fn cell(&self, i: usize, j: usize, delta: &[isize; 3], q: usize, kappa: f64) -> Option<Cell> {
        let g = &self.grid;
        let d = g.dim();
        let n = g.n() as isize;
        let (mi, mj) = (self.species.mass(i), self.species.mass(j));
        let total = mi + mj;
        let len = (0..d).map(|a| (delta[a] * delta[a]) as f64).sum::<f64>().sqrt();
        let mut k = [0.0; 3];
        for a in 0..d {
            k[a] = delta[a] as f64 / len;
        }
        let fr = frame(&k[..d]);
        let mut omega = [0.0; 3];
        rotate(self.sphere.node(q), &fr, d, &mut omega[..d]);
        let (mut fl_i, mut fl_j) = ([0isize; 3], [0isize; 3]);
        let (mut t_i, mut t_j) = ([0.0; 3], [0.0; 3]);
        let (mut sh_i, mut sh_j) = ([0.0; 3], [0.0; 3]);
        let (mut lo, mut hi) = ([0usize; 3], [0usize; 3]);
        for a in 0..d {
            let del = delta[a] as f64;
            let s1 = (mi * del + mj * len * omega[a]) / total;
            let s2 = mi * (del - len * omega[a]) / total;
            sh_i[a] = s1 * g.spacing();
            sh_j[a] = s2 * g.spacing();
            let f1 = s1.floor();
            let f2 = s2.floor();
            fl_i[a] = f1 as isize;
            fl_j[a] = f2 as isize;
            t_i[a] = s1 - f1;
            t_j[a] = s2 - f2;
            let low = 0.max(-delta[a]).max(1 - fl_i[a]).max(1 - fl_j[a]);
            let high = (n - 1)
                .min(n - 1 - delta[a])
                .min(n - 3 - fl_i[a])
                .min(n - 3 - fl_j[a]);
            if low > high {
                return None;
            }
            lo[a] = low as usize;
            hi[a] = high as usize;
        }
        let doff = (0..d).map(|a| delta[a] * g.stride(a) as isize).sum();
        Some(Cell {
            doff,
            lo,
            hi,
            taps_i: Taps::build(g, &fl_i, &t_i),
            taps_j: Taps::build(g, &fl_j, &t_j),
            kappa,
            shift_i: sh_i,
            shift_j: sh_j,
        })
    }

    fn sweep_chunk(
        &self,
        i: usize,
        j: usize,
        prep: Option<&Prepared>,
        mode: Mode<'_>,
        deltas: &[[isize; 3]],
    ) -> PairOutput {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the feature required by the callee was detected at runtime.
                return unsafe { self.sweep_chunk_avx2(i, j, prep, mode, deltas) };
            }
        }
        self.sweep_chunk_generic(i, j, prep, mode, deltas)
    }

    /// Same code compiled with 256-bit vectors. No floating-point contraction is
    /// enabled, so results are bitwise identical to the generic path.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn sweep_chunk_avx2(
        &self,
        i: usize,
        j: usize,
        prep: Option<&Prepared>,
        mode: Mode<'_>,
        deltas: &[[isize; 3]],
    ) -> PairOutput {
        self.sweep_chunk_generic(i, j, prep, mode, deltas)
    }

    #[inline(always)]
    fn sweep_chunk_generic(
        &self,
        i: usize,
        j: usize,
        prep: Option<&Prepared>,
        mode: Mode<'_>,
        deltas: &[[isize; 3]],
    ) -> PairOutput {
        let g = &self.grid;
        let d = g.dim();
        let n = g.n();
        let nn = g.len();
        let hd = g.cell_volume();
        let scatters = mode.scatters();
        let mut out = PairOutput {
            out_i: if scatters { vec![0.0; nn] } else { Vec::new() },
            out_j: if scatters && i != j { vec![0.0; nn] } else { Vec::new() },
            scalar: 0.0,
        };
        let pair = self.kernels.pair(i, j);
        // 1/4 of the symmetric sum, doubled for the half-sweep (self-pairs) or the
        // single ordering (cross pairs)
        let pair_factor = 0.5;
        // angular factor times sphere weight, per node
        let ang: Vec<(usize, f64)> = (0..self.sphere.len())
            .filter_map(|q| {
                let b = pair.angular.eval(self.sphere.polar_angle(q));
                (b > 0.0).then(|| (q, b * self.sphere.weight(q)))
            })
            .collect();
        if ang.is_empty() {
            return out;
        }
        let mut bufs = RowBuffers::new(n);
        for delta in deltas {
            let r = (0..d).map(|a| (delta[a] * delta[a]) as f64).sum::<f64>().sqrt() * g.spacing();
            let radial = pair.radial.eval(r);
            if radial == 0.0 {
                continue;
            }
            for &(q, wb) in &ang {
                let kappa = pair_factor * wb * radial * hd;
                let Some(cell) = self.cell(i, j, delta, q, kappa) else {
                    continue;
                };
                let outer_a = if d == 3 { cell.lo[0]..=cell.hi[0] } else { 0..=0 };
                for k0 in outer_a {
                    for k1 in cell.lo[d - 2]..=cell.hi[d - 2] {
                        let mut idx = [0usize; 3];
                        if d == 3 {
                            idx = [k0, k1, cell.lo[2]];
                        } else {
                            idx[0] = k1;
                            idx[1] = cell.lo[1];
                        }
                        let b0 = g.flat_index(&idx);
                        let len = cell.hi[d - 1] - cell.lo[d - 1] + 1;
                        out.scalar += self.row(i, j, prep, mode, &cell, b0, len, &idx, &mut bufs, &mut out.out_i, &mut out.out_j);
                    }
                }
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    #[inline(always)]
    fn row(
        &self,
        i: usize,
        j: usize,
        prep: Option<&Prepared>,
        mode: Mode<'_>,
        cell: &Cell,
        b0: usize,
        len: usize,
        idx: &[usize; 3],
        bufs: &mut RowBuffers,
        out_i: &mut Vec<f64>,
        out_j: &mut Vec<f64>,
    ) -> f64 {
        let a0 = (b0 as isize + cell.doff) as usize;
        let si = &mut bufs.si[..len];
        let sj = &mut bufs.sj[..len];
        let flux = &mut bufs.g[..len];
        let tmp = &mut bufs.t[..len];
        let work = &mut bufs.work[..];
        let mut scalar = 0.0;
        if mode.needs_state() {
            let p = prep.expect("state prepared for nonlinear modes");
            let (psi_i, psi_j) = (&p.psi[i], &p.psi[j]);
            cell.taps_i.gather(si, psi_i, b0, work);
            cell.taps_j.gather(sj, psi_j, b0, work);
            let (ai, aj) = (self.species.alpha(i), self.species.alpha(j));
            let classical = ai == 0.0 && aj == 0.0;
            let (ri, rj) = (&p.ratio[i][a0..a0 + len], &p.ratio[j][b0..b0 + len]);
            let (ti, tj) = (&p.tau[i][a0..a0 + len], &p.tau[j][b0..b0 + len]);
            let (mki, mkj) = (&p.mask[i][a0..a0 + len], &p.mask[j][b0..b0 + len]);
            let (pa, pb) = (&psi_i[a0..a0 + len], &psi_j[b0..b0 + len]);
            let kappa = cell.kappa;
            if matches!(mode, Mode::Mobility(_)) {
                for e in 0..len {
                    let c = ti[e] * tj[e] * tau_from_ratio(ai, si[e].exp()) * tau_from_ratio(aj, sj[e].exp());
                    let s = pa[e] + pb[e];
                    // Lambda; the grad_bar(xi) factor is applied below
                    flux[e] = kappa * mki[e] * mkj[e] * c * log_mean_exp(si[e] + sj[e], s);
                }
            } else {
                if classical {
                    for e in 0..len {
                        let sp = si[e] + sj[e];
                        flux[e] = kappa * mki[e] * mkj[e] * (fast_exp(sp) - ri[e] * rj[e]);
                        tmp[e] = sp - pa[e] - pb[e];
                    }
                } else {
                    for e in 0..len {
                        let ei = fast_exp(si[e]);
                        let ej = fast_exp(sj[e]);
                        let gap = (1.0 - ai * ei).max(BOSE_MIN_GAP) * (1.0 - aj * ej).max(BOSE_MIN_GAP);
                        let c = ti[e] * tj[e] / gap;
                        flux[e] = kappa * mki[e] * mkj[e] * c * (ei * ej - ri[e] * rj[e]);
                        tmp[e] = si[e] + sj[e] - pa[e] - pb[e];
                    }
                }
                if matches!(mode, Mode::Collision) {
                    scalar += dot_lanes(flux, tmp);
                }
            }
        }
        match mode {
            Mode::Collision => {}
            Mode::Mobility(xi) | Mode::Linear(xi) => {
                let (xa, xb) = (&xi[i][a0..a0 + len], &xi[j][b0..b0 + len]);
                cell.taps_i.gather(si, &xi[i], b0, work);
                cell.taps_j.gather(sj, &xi[j], b0, work);
                let linear = matches!(mode, Mode::Linear(_));
                for e in 0..len {
                    let grad = si[e] + sj[e] - xa[e] - xb[e];
                    flux[e] = if linear { cell.kappa * grad } else { flux[e] * grad };
                }
            }
            Mode::WeakNodal(phi) => {
                let (xa, xb) = (&phi[i][a0..a0 + len], &phi[j][b0..b0 + len]);
                cell.taps_i.gather(si, &phi[i], b0, work);
                cell.taps_j.gather(sj, &phi[j], b0, work);
                for e in 0..len {
                    scalar += flux[e] * (si[e] + sj[e] - xa[e] - xb[e]);
                }
            }
            Mode::WeakAnalytic(phi) => {
                let g = &self.grid;
                let d = g.dim();
                let mut vb = [0.0; 3];
                for a in 0..d - 1 {
                    vb[a] = g.coord(idx[a]);
                }
                let mut vi = [0.0; 3];
                let mut vj = [0.0; 3];
                let mut va = [0.0; 3];
                for e in 0..len {
                    if flux[e] == 0.0 {
                        continue;
                    }
                    vb[d - 1] = g.coord(idx[d - 1] + e);
                    let ka = g.multi_index(a0 + e);
                    for c in 0..d {
                        va[c] = g.coord(ka[c]);
                        vi[c] = vb[c] + cell.shift_i[c];
                        vj[c] = vb[c] + cell.shift_j[c];
                    }
                    let grad = phi(i, &vi[..d]) + phi(j, &vj[..d]) - phi(i, &va[..d]) - phi(j, &vb[..d]);
                    scalar += flux[e] * grad;
                }
            }
        }
        if mode.scatters() {
            // collision: +g at pre-collision nodes, -g on post-collision stencils;
            // mobility-type modes carry the opposite sign
            let sign = if matches!(mode, Mode::Collision) { 1.0 } else { -1.0 };
            let flux = &bufs.g[..len];
            let padded = &mut bufs.padded[..len + 6];
            padded[..3].iter_mut().for_each(|x| *x = 0.0);
            padded[len + 3..].iter_mut().for_each(|x| *x = 0.0);
            padded[3..len + 3].copy_from_slice(flux);
            for (o, x) in out_i[a0..a0 + len].iter_mut().zip(flux) {
                *o += sign * x;
            }
            cell.taps_i.scatter(out_i, padded, b0, -sign, work);
            let target = if i == j { out_i } else { out_j };
            for (o, x) in target[b0..b0 + len].iter_mut().zip(flux) {
                *o += sign * x;
            }
            cell.taps_j.scatter(target, padded, b0, -sign, work);
        }
        scalar
    }
}

struct RowBuffers {
    si: Vec<f64>,
    sj: Vec<f64>,
    g: Vec<f64>,
    t: Vec<f64>,
    work: Vec<f64>,
    padded: Vec<f64>,
}

impl RowBuffers {
    fn new(n: usize) -> Self {
        Self {
            si: vec![0.0; n],
            sj: vec![0.0; n],
            g: vec![0.0; n],
            t: vec![0.0; n],
            work: vec![0.0; n + 3],
            padded: vec![0.0; n + 6],
        }
    }
}

/// Moments `(mass_i, momentum, energy)` of raw collision outputs.
pub fn collision_moments(values: &[Vec<f64>], grid: &VelocityGrid, masses: &[f64]) -> Result<crate::grid::Moments> {
    let arrays: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
    moments_of(grid, &arrays, masses)
}

/// Largest absolute moment of a collision output.
pub fn max_moment(values: &[Vec<f64>], grid: &VelocityGrid, masses: &[f64]) -> Result<f64> {
    let m = collision_moments(values, grid, masses)?;
    Ok(m
        .mass
        .iter()
        .chain(m.momentum.iter())
        .chain(std::iter::once(&m.energy))
        .fold(0.0f64, |acc, x| acc.max(x.abs())))
}
