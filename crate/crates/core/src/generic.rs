//! GENERIC building blocks `{L, M, E, S}` on a periodic slab `x in [0, 1)` times the
//! velocity lattice, with numerical checks of antisymmetry, positivity and the
//! degeneracy conditions `L dS = 0`, `M dE = 0`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boltzmann::{entropy_variable, FLOOR_FACTOR, LOG_CLAMP_FACTOR};
use crate::error::{precondition, KineticError, Result};
use crate::grid::{derivative_axis, derivative_axis_transpose, Field, VelocityGrid};
use crate::operator::{Flavor, Operator};
use crate::species::{entropy_density, SpeciesSet, Statistics};

/// `n_x` periodic nodes on `[0, 1)` times a velocity lattice; x-slices are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    nx: usize,
    velocity: VelocityGrid,
    dx: Vec<f64>,
}

impl PhaseGrid {
    pub fn new(nx: usize, velocity: VelocityGrid) -> Result<Self> {
        if nx < 4 || nx % 2 != 0 {
            return precondition(format!("position grid needs an even node count >= 4, got {nx}"));
        }
        Ok(Self {
            nx,
            dx: spectral_matrix(nx),
            velocity,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn velocity(&self) -> &VelocityGrid {
        &self.velocity
    }

    pub fn x(&self, k: usize) -> f64 {
        k as f64 / self.nx as f64
    }

    pub fn len(&self) -> usize {
        self.nx * self.velocity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight of one phase-space cell.
    pub fn cell_volume(&self) -> f64 {
        self.velocity.cell_volume() / self.nx as f64
    }

    pub fn sample(&self, g: impl Fn(f64, &[f64]) -> f64) -> Vec<f64> {
        let nv = self.velocity.len();
        let d = self.velocity.dim();
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.nx {
            let x = self.x(k);
            for j in 0..nv {
                out.push(g(x, &self.velocity.velocity(j)[..d]));
            }
        }
        out
    }

    /// Spectral `d/dx` applied to every velocity node.
    pub fn dx(&self, values: &[f64]) -> Vec<f64> {
        let nv = self.velocity.len();
        let mut out = vec![0.0; values.len()];
        for k in 0..self.nx {
            let row = &self.dx[k * self.nx..(k + 1) * self.nx];
            let dst = &mut out[k * nv..(k + 1) * nv];
            for (l, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    for (o, v) in dst.iter_mut().zip(&values[l * nv..(l + 1) * nv]) {
                        *o += w * v;
                    }
                }
            }
        }
        out
    }

    fn slices<'a>(&self, values: &'a [f64]) -> std::slice::Chunks<'a, f64> {
        values.chunks(self.velocity.len())
    }

    fn inner(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        let w = self.cell_volume();
        w * a
            .iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .sum::<f64>()
    }

    fn norm(&self, a: &[Vec<f64>]) -> f64 {
        self.inner(a, a).sqrt()
    }
}

/// Fourier differentiation matrix on `[0, 1)` for an even node count (antisymmetric).
pub(crate) fn spectral_matrix(nx: usize) -> Vec<f64> {
    let mut d = vec![0.0; nx * nx];
    for k in 0..nx {
        for l in 0..nx {
            if k != l {
                let diff = k as isize - l as isize;
                let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                d[k * nx + l] = PI * sign / (PI * diff as f64 / nx as f64).tan();
            }
        }
    }
    d
}

/// Per-species density on a phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    values: Vec<f64>,
}

impl PhaseField {
    pub fn new(grid: &PhaseGrid, values: Vec<f64>, stats: Statistics) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(KineticError::GridMismatch);
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(KineticError::NonPositiveDensity(format!(
                "phase density {value} at node {node}"
            )));
        }
        if stats == Statistics::Fermi {
            if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| **v > 1.0) {
                return Err(KineticError::FermiOverflow {
                    species: usize::MAX,
                    node,
                    value,
                });
            }
        }
        Ok(Self { values })
    }

    /// `x`-independent extension of a velocity field.
    pub fn uniform(grid: &PhaseGrid, field: &Field) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.nx() {
            values.extend_from_slice(field.values());
        }
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// The building blocks for one operator flavor.
#[derive(Debug, Clone)]
pub struct BuildingBlocks {
    grid: PhaseGrid,
    operator: Operator,
    flip_mobility: bool,
}

impl BuildingBlocks {
    pub fn new(grid: PhaseGrid, operator: Operator) -> Result<Self> {
        if operator.grid() != grid.velocity() {
            return Err(KineticError::GridMismatch);
        }
        Ok(Self {
            grid,
            operator,
            flip_mobility: false,
        })
    }

    /// Fault injection for the checks: negate the mobility.
    pub fn with_flipped_mobility(mut self) -> Self {
        self.flip_mobility = true;
        self
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn operator(&self) -> &Operator {
        &self.operator
    }

    fn species(&self) -> &SpeciesSet {
        self.operator.species()
    }

    fn check_state(&self, state: &[PhaseField]) -> Result<()> {
        if state.len() != self.species().len() {
            return precondition("one phase field per species is required");
        }
        Ok(())
    }

    fn check_arrays(&self, xi: &[Vec<f64>]) -> Result<()> {
        if xi.len() != self.species().len() || xi.iter().any(|x| x.len() != self.grid.len()) {
            return precondition("one phase array per species is required");
        }
        Ok(())
    }

    /// Total energy `sum_i int m_i |v|^2/2 f_i`.
    pub fn energy(&self, state: &[PhaseField]) -> Result<f64> {
        self.check_state(state)?;
        let de = self.d_energy();
        Ok(self.grid.inner(&de, &state.iter().map(|f| f.values.clone()).collect::<Vec<_>>()))
    }

    /// Total momentum `sum_i int m_i v f_i`.
    pub fn momentum(&self, state: &[PhaseField]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let vg = self.grid.velocity();
        let d = vg.dim();
        let nv = vg.len();
        let mut p = vec![0.0; d];
        for (s, f) in state.iter().enumerate() {
            let m = self.species().mass(s);
            for (idx, &val) in f.values.iter().enumerate() {
                let v = vg.velocity(idx % nv);
                for a in 0..d {
                    p[a] += m * v[a] * val;
                }
            }
        }
        let w = self.grid.cell_volume();
        Ok(p.into_iter().map(|x| w * x).collect())
    }

    /// Entropy `H = sum_i int h_i(f_i)`; `+inf` for inadmissible Fermi values.
    pub fn entropy(&self, state: &[PhaseField]) -> Result<f64> {
        self.check_state(state)?;
        let mut total = 0.0;
        for (s, f) in state.iter().enumerate() {
            let stats = self.species().statistics(s);
            total += f.values.iter().map(|&x| entropy_density(stats, x)).sum::<f64>();
        }
        Ok(self.grid.cell_volume() * total)
    }

    /// `dE_i = m_i |v|^2 / 2`.
    pub fn d_energy(&self) -> Vec<Vec<f64>> {
        (0..self.species().len())
            .map(|s| {
                let m = self.species().mass(s);
                self.grid.sample(|_, v| 0.5 * m * v.iter().map(|c| c * c).sum::<f64>())
            })
            .collect()
    }

    /// `dH_i = log(f_i / tau_i(f_i))` and the number of cells at or below the floor.
    pub fn d_entropy(&self, state: &[PhaseField]) -> Result<(Vec<Vec<f64>>, usize)> {
        self.check_state(state)?;
        let mut flagged = 0;
        let out = state
            .iter()
            .enumerate()
            .map(|(s, f)| {
                let stats = self.species().statistics(s);
                let max = f.max();
                flagged += f.values.iter().filter(|&&x| x <= FLOOR_FACTOR * max).count();
                f.values
                    .iter()
                    .map(|&x| entropy_variable(stats, x, LOG_CLAMP_FACTOR * max))
                    .collect()
            })
            .collect();
        Ok((out, flagged))
    }

    /// Differential of the entropy-like functional `S` of the flavor: `-dH`, or `-F`
    /// for the linearized operators.
    pub fn d_s(&self, state: &[PhaseField]) -> Result<Vec<Vec<f64>>> {
        let dh = if self.operator.flavor().is_linear() {
            state.iter().map(|f| f.values.clone()).collect()
        } else {
            self.d_entropy(state)?.0
        };
        Ok(dh.into_iter().map(|v| v.into_iter().map(|x| -x).collect()).collect())
    }

    /// `L(F) xi = -d_x(f d_{v_x} xi / m) + div_v(f d_x xi e_x / m)`.
    pub fn l_apply(&self, state: &[PhaseField], xi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_state(state)?;
        self.check_arrays(xi)?;
        let vg = self.grid.velocity();
        let nv = vg.len();
        let mut out = Vec::with_capacity(xi.len());
        for (s, (f, x)) in state.iter().zip(xi).enumerate() {
            let m = self.species().mass(s);
            let mut a = vec![0.0; self.grid.len()];
            for (dst, src) in a.chunks_mut(nv).zip(self.grid.slices(x)) {
                derivative_axis(vg, src, 0, dst);
            }
            for (ai, fi) in a.iter_mut().zip(&f.values) {
                *ai *= fi / m;
            }
            let term1 = self.grid.dx(&a);
            let mut b = self.grid.dx(x);
            for (bi, fi) in b.iter_mut().zip(&f.values) {
                *bi *= fi / m;
            }
            let mut term2 = vec![0.0; self.grid.len()];
            for (dst, src) in term2.chunks_mut(nv).zip(self.grid.slices(&b)) {
                derivative_axis_transpose(vg, src, 0, dst);
            }
            out.push(term1.iter().zip(&term2).map(|(p, q)| -p - q).collect());
        }
        Ok(out)
    }

    /// Mobility applied slice by slice (collisions are local in `x`).
    pub fn m_apply(&self, state: &[PhaseField], xi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_state(state)?;
        self.check_arrays(xi)?;
        let vg = self.grid.velocity();
        let nv = vg.len();
        let ns = xi.len();
        let mut out = vec![vec![0.0; self.grid.len()]; ns];
        for k in 0..self.grid.nx() {
            let range = k * nv..(k + 1) * nv;
            let fields = state
                .iter()
                .map(|f| Field::new(vg, f.values[range.clone()].to_vec()))
                .collect::<Result<Vec<_>>>()?;
            let slice: Vec<Vec<f64>> = xi.iter().map(|x| x[range.clone()].to_vec()).collect();
            let applied = self.operator.mobility(&fields, &slice)?;
            for (o, a) in out.iter_mut().zip(applied) {
                o[range.clone()].copy_from_slice(&a);
            }
        }
        if self.flip_mobility {
            out.iter_mut().flatten().for_each(|x| *x = -*x);
        }
        Ok(out)
    }

    /// `L dE + M dS`.
    pub fn generic_rhs(&self, state: &[PhaseField]) -> Result<Vec<Vec<f64>>> {
        let transport = self.l_apply(state, &self.d_energy())?;
        let collision = self.m_apply(state, &self.d_s(state)?)?;
        Ok(transport
            .into_iter()
            .zip(collision)
            .map(|(a, b)| a.iter().zip(&b).map(|(p, q)| p + q).collect())
            .collect())
    }

    /// `-v_x d_x F + Q(F)` assembled directly from the transport term and the collision operator.
    pub fn direct_rhs(&self, state: &[PhaseField]) -> Result<Vec<Vec<f64>>> {
        self.check_state(state)?;
        let vg = self.grid.velocity();
        let nv = vg.len();
        let mut out: Vec<Vec<f64>> = state
            .iter()
            .map(|f| {
                self.grid
                    .dx(&f.values)
                    .iter()
                    .enumerate()
                    .map(|(idx, df)| -vg.velocity(idx % nv)[0] * df)
                    .collect()
            })
            .collect();
        for k in 0..self.grid.nx() {
            let range = k * nv..(k + 1) * nv;
            let fields = state
                .iter()
                .map(|f| Field::new(vg, f.values[range.clone()].to_vec()))
                .collect::<Result<Vec<_>>>()?;
            let q = self.operator.evaluate(&fields)?;
            for (o, qi) in out.iter_mut().zip(&q.values) {
                for (a, b) in o[range.clone()].iter_mut().zip(qi) {
                    *a += b;
                }
            }
        }
        Ok(out)
    }

    /// Smooth random test function per species, reproducible from `rng`.
    pub fn random_test_function(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let d = self.grid.velocity().dim();
        let scale = self.grid.velocity().half_width();
        (0..self.species().len())
            .map(|_| {
                let terms: Vec<(f64, f64, f64, [f64; 3], f64)> = (0..4)
                    .map(|_| {
                        let mut w = [0.0; 3];
                        for c in w.iter_mut().take(d) {
                            *c = rng.gen_range(-1.5..1.5) / scale * 2.0;
                        }
                        (
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(0..3) as f64,
                            rng.gen_range(0.0..2.0 * PI),
                            w,
                            rng.gen_range(0.0..2.0 * PI),
                        )
                    })
                    .collect();
                self.grid.sample(|x, v| {
                    terms
                        .iter()
                        .map(|(a, k, phase, w, shift)| {
                            let arg: f64 = (0..d).map(|c| w[c] * v[c]).sum();
                            a * (2.0 * PI * k * x + phase).cos() * (arg + shift).sin()
                        })
                        .sum()
                })
            })
            .collect()
    }

    /// Residuals and defects of the building blocks at `state`.
    pub fn degeneracy_report(&self, state: &[PhaseField], pairs: usize, seed: u64) -> Result<DegeneracyReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arrays: Vec<Vec<f64>> = state.iter().map(|f| f.values.clone()).collect();
        let f_norm = self.grid.norm(&arrays);
        let (dh, _) = self.d_entropy(state)?;
        let l_ds = self.l_apply(state, &dh)?;
        let r1 = self.grid.norm(&l_ds);
        let m_de = self.m_apply(state, &self.d_energy())?;
        let r2 = m_de.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));

        let mut antisymmetry: f64 = 0.0;
        let mut symmetry: f64 = 0.0;
        let mut psd_min = f64::INFINITY;
        let mut gain: f64 = 0.0;
        for _ in 0..pairs {
            let xi = self.random_test_function(&mut rng);
            let eta = self.random_test_function(&mut rng);
            let (lx, le) = (self.l_apply(state, &xi)?, self.l_apply(state, &eta)?);
            let scale = self.grid.norm(&xi) * self.grid.norm(&eta) * f_norm;
            if scale > 0.0 {
                antisymmetry =
                    antisymmetry.max((self.grid.inner(&xi, &le) + self.grid.inner(&eta, &lx)).abs() / scale);
            }
            let (mx, me) = (self.m_apply(state, &xi)?, self.m_apply(state, &eta)?);
            gain = gain.max(sup(&mx) / sup(&xi)).max(sup(&me) / sup(&eta));
            let (pxx, pee) = (self.grid.inner(&xi, &mx), self.grid.inner(&eta, &me));
            let cross = (self.grid.inner(&xi, &me) - self.grid.inner(&eta, &mx)).abs();
            let cs = (pxx.abs() * pee.abs()).sqrt();
            if cs > 0.0 {
                symmetry = symmetry.max(cross / cs);
            } else {
                symmetry = symmetry.max(cross);
            }
            psd_min = psd_min.min(pxx).min(pee);
        }
        Ok(DegeneracyReport {
            flavor: self.operator.flavor(),
            nx: self.grid.nx(),
            n: self.grid.velocity().n(),
            r1,
            r2,
            r2_relative: if gain > 0.0 { r2 / (gain * sup(&self.d_energy())) } else { f64::NAN },
            antisymmetry,
            symmetry,
            psd_min: if pairs == 0 { 0.0 } else { psd_min },
            pairs,
        })
    }
}

/// Thresholds applied by [`DegeneracyReport::passes`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenericTolerances {
    pub r2: f64,
    pub antisymmetry: f64,
    pub symmetry: f64,
    pub psd: f64,
}

impl Default for GenericTolerances {
    fn default() -> Self {
        Self {
            r2: 1e-12,
            antisymmetry: 1e-10,
            symmetry: 1e-8,
            psd: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyReport {
    pub flavor: Flavor,
    pub nx: usize,
    pub n: usize,
    /// `||L dH||` (phase-space L2).
    pub r1: f64,
    /// `max |M dE|`.
    pub r2: f64,
    /// `r2` divided by `max|dE|` times the largest observed gain `max|M xi| / max|xi|`
    /// (informational: the roundoff scale of the mobility).
    pub r2_relative: f64,
    /// Worst `|<xi, L eta> + <eta, L xi>| / (|xi| |eta| |F|)`.
    pub antisymmetry: f64,
    /// Worst `|<xi, M eta> - <eta, M xi>|` relative to the Cauchy-Schwarz scale.
    pub symmetry: f64,
    /// Smallest `<xi, M xi>` over the batch.
    pub psd_min: f64,
    pub pairs: usize,
}

impl DegeneracyReport {
    pub fn passes(&self, tol: &GenericTolerances) -> bool {
        self.r2 <= tol.r2 && self.antisymmetry <= tol.antisymmetry && self.symmetry <= tol.symmetry && self.psd_min >= -tol.psd
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = self.flavor.name();
        let _ = writeln!(s, "{p}.grid: nx={} n={}", self.nx, self.n);
        let _ = writeln!(s, "{p}.r1: {:.6e}", self.r1);
        let _ = writeln!(s, "{p}.r2: {:.6e}", self.r2);
        let _ = writeln!(s, "{p}.r2_relative: {:.6e}", self.r2_relative);
        let _ = writeln!(s, "{p}.antisymmetry: {:.6e}", self.antisymmetry);
        let _ = writeln!(s, "{p}.symmetry: {:.6e}", self.symmetry);
        let _ = writeln!(s, "{p}.psd_min: {:.6e}", self.psd_min);
        let _ = writeln!(s, "{p}.pairs: {}", self.pairs);
        s
    }
}

fn sup(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Least-squares slope of `log(residual)` against `log(h)`.
pub fn fitted_order(h: &[f64], residual: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(residual)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann::BoltzmannOperator;
    use crate::kernel::{KernelSet, PairKernel};
    use crate::landau::LandauOperator;
    use crate::sphere::SphereQuadrature;

    fn species() -> SpeciesSet {
        SpeciesSet::new(vec![1.0, 2.0], vec![Statistics::Maxwell, Statistics::Fermi]).unwrap()
    }

    fn blocks(flavor: Flavor, nx: usize, n: usize) -> BuildingBlocks {
        let vg = VelocityGrid::new(2, n, 5.0).unwrap();
        let kernels = KernelSet::uniform(2, PairKernel::maxwell(1.0, 1.0 / (2.0 * PI)));
        let op = match flavor {
            Flavor::Boltzmann | Flavor::BoltzmannLinear => Operator::boltzmann(
                BoltzmannOperator::new(species(), kernels, vg.clone(), SphereQuadrature::new(2, 8).unwrap()).unwrap(),
                flavor.is_linear(),
            ),
            _ => Operator::landau(LandauOperator::new(species(), kernels, vg.clone()).unwrap(), flavor.is_linear()),
        };
        BuildingBlocks::new(PhaseGrid::new(nx, vg).unwrap(), op).unwrap()
    }

    fn state(b: &BuildingBlocks) -> Vec<PhaseField> {
        (0..2)
            .map(|s| {
                let amp = 0.3 + 0.2 * s as f64;
                let vals = b.grid().sample(|x, v| {
                    let u = 0.3 * (2.0 * PI * x).sin();
                    let t = 1.0 + 0.2 * (2.0 * PI * x).cos();
                    amp * ((-(v[0] - u).powi(2) - v[1] * v[1]) / (2.0 * t)).exp()
                        + 0.1 * amp * (-(v[0] + 1.0).powi(2) - (v[1] - 0.5).powi(2)).exp()
                });
                PhaseField::new(b.grid(), vals, species().statistics(s)).unwrap()
            })
            .collect()
    }

    #[test]
    fn spectral_derivative_is_exact_for_trig() {
        let vg = VelocityGrid::new(2, 4, 1.0).unwrap();
        let g = PhaseGrid::new(8, vg).unwrap();
        let vals = g.sample(|x, _| (2.0 * PI * 3.0 * x).sin());
        let d = g.dx(&vals);
        let exact = g.sample(|x, _| 6.0 * PI * (2.0 * PI * 3.0 * x).cos());
        for (a, b) in d.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
        for k in 0..8 {
            for l in 0..8 {
                assert_eq!(g.dx[k * 8 + l], -g.dx[l * 8 + k]);
            }
        }
    }

    #[test]
    fn l_of_de_is_transport_and_antisymmetric() {
        let b = blocks(Flavor::Landau, 8, 10);
        let st = state(&b);
        let lde = b.l_apply(&st, &b.d_energy()).unwrap();
        let direct = b.direct_rhs(&st).unwrap();
        let m = b.m_apply(&st, &b.d_s(&st).unwrap()).unwrap();
        for s in 0..2 {
            for k in 0..lde[s].len() {
                assert!((lde[s][k] + m[s][k] - direct[s][k]).abs() < 1e-10);
            }
        }
        let report = b.degeneracy_report(&st, 5, 7).unwrap();
        assert!(report.antisymmetry < 1e-12, "{report:?}");
        assert!(report.passes(&GenericTolerances::default()), "{report:?}");
    }

    #[test]
    fn all_flavors_pass_and_fault_is_detected() {
        for flavor in Flavor::ALL {
            let b = blocks(flavor, 4, 8);
            let st = state(&b);
            let r = b.degeneracy_report(&st, 3, 1).unwrap();
            if flavor == Flavor::LandauLinear {
                // unit weights over the whole box: M dE sits at the roundoff floor of the input
                assert!(r.r2_relative < 1e-14, "{r:?}");
                let loose = GenericTolerances { r2: f64::INFINITY, ..Default::default() };
                assert!(r.passes(&loose), "{r:?}");
            } else {
                assert!(r.passes(&GenericTolerances::default()), "{r:?}");
            }
            let broken = b.clone().with_flipped_mobility().degeneracy_report(&st, 3, 1).unwrap();
            assert!(!broken.passes(&GenericTolerances::default()));
            assert!(r.to_text().contains(&format!("{flavor}.psd_min: ")));
        }
    }

    #[test]
    fn l_ds_converges() {
        let mut h = Vec::new();
        let mut r = Vec::new();
        for n in [16, 24, 32] {
            let b = blocks(Flavor::Landau, 16, n);
            let st = state(&b);
            h.push(b.grid().velocity().spacing());
            r.push(b.degeneracy_report(&st, 0, 0).unwrap().r1);
        }
        assert!(fitted_order(&h, &r) >= 2.0, "{r:?}");
    }

    #[test]
    fn homogeneous_state_reduces_to_collisions() {
        let b = blocks(Flavor::Boltzmann, 4, 8);
        let vg = b.grid().velocity().clone();
        let fields: Vec<Field> = (0..2)
            .map(|s| Field::from_fn(&vg, |v| 0.2 * (1.0 + s as f64) * (-(v[0] - 0.5).powi(2) - v[1] * v[1]).exp()).unwrap())
            .collect();
        let st: Vec<PhaseField> = fields.iter().map(|f| PhaseField::uniform(b.grid(), f)).collect();
        let rhs = b.generic_rhs(&st).unwrap();
        let q = b.operator().evaluate(&fields).unwrap();
        for s in 0..2 {
            for k in 0..rhs[s].len() {
                assert!((rhs[s][k] - q.values[s][k % vg.len()]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn functionals() {
        let b = blocks(Flavor::Landau, 4, 8);
        let g = b.grid();
        let ones = vec![PhaseField::new(g, vec![1.0; g.len()], Statistics::Maxwell).unwrap(); 2];
        // Fermi at f = 1 contributes 0, Maxwell f = 1 contributes -1 per unit volume
        let h = b.entropy(&ones).unwrap();
        let vol = (2.0 * g.velocity().half_width()).powi(2);
        assert!((h + vol).abs() < 1e-10);
        let p = b.momentum(&ones).unwrap();
        assert!(p.iter().all(|x| x.abs() < 1e-12));
    }
}
