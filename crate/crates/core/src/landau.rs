//! Discrete multi-species Landau operator in flux form.
//!
//! With `u = f tau`, `X_i = grad_v(psi_i)/m_i` and `K_ij(r) = m_i A_ij(r) = r^2 alpha_ij(r)`,
//!
//! ```text
//! flux_i(a) = h^d sum_j sum_{b != a} K_ij u_i(a) u_j(b) Pi(v_a - v_b) (X_i(a) - X_j(b))
//! Q_i       = div(flux_i) / m_i
//! ```
//!
//! where `div` is the negative adjoint of `grad_v`. Pairing with test functions
//! therefore reproduces the symmetric weak form exactly, and a quadratic `psi`
//! (an equilibrium) gives `Pi (X_i - X_j) = 0` node by node.

use crate::boltzmann::{prepare, CollisionResult};
use crate::error::{precondition, Result};
use crate::grid::{divergence, grad_v_values, Field, VelocityGrid};
use crate::kernel::KernelSet;
use crate::species::SpeciesSet;

/// `Pi = I - k k^T / |k|^2` for `k = v_i - v_j`; only the leading `d x d` block is used.
pub fn pi_projection(vi: &[f64], vj: &[f64]) -> Result<[[f64; 3]; 3]> {
    let d = vi.len();
    if vj.len() != d {
        return precondition("velocity dimensions differ");
    }
    let k: Vec<f64> = vi.iter().zip(vj).map(|(a, b)| a - b).collect();
    let k2: f64 = k.iter().map(|c| c * c).sum();
    if k2 == 0.0 {
        return precondition("projection undefined for coincident velocities");
    }
    let mut p = [[0.0; 3]; 3];
    for r in 0..d {
        for c in 0..d {
            p[r][c] = if r == c { 1.0 } else { 0.0 } - k[r] * k[c] / k2;
        }
    }
    Ok(p)
}

/// Landau gradient `Pi (grad phi_i / m_i - grad phi_j / m_j)`.
pub fn grad_tilde(grad_i: &[f64], grad_j: &[f64], pi: &[[f64; 3]; 3], mi: f64, mj: f64) -> Vec<f64> {
    let d = grad_i.len();
    let diff: Vec<f64> = (0..d).map(|c| grad_i[c] / mi - grad_j[c] / mj).collect();
    (0..d)
        .map(|r| (0..d).map(|c| pi[r][c] * diff[c]).sum())
        .collect()
}

/// Per-species weights and scaled gradients entering the flux.
struct FluxInput {
    /// `u_i`, zero below the density floor (or 1 for the linearized operator).
    u: Vec<Vec<f64>>,
    /// `grad(xi_i) / m_i`, one array per component.
    x: Vec<Vec<Vec<f64>>>,
}

/// Lattice displacement `delta` with its kernel weight `|delta h|^2 alpha(|delta h|)`.
struct Displacement {
    weight: f64,
    delta: [f64; 3],
    /// `|delta|^2`, an exact integer.
    r2: f64,
}

impl Displacement {
    /// `Pi(delta) x = x - delta (delta . x) / |delta|^2`.
    ///
    /// Applied in vector form rather than through a rounded matrix, so `x` parallel
    /// to `delta` (e.g. gradients of collision invariants) is annihilated exactly.
    fn project(&self, x: &[f64; 3], d: usize) -> [f64; 3] {
        let dot: f64 = (0..d).map(|c| self.delta[c] * x[c]).sum();
        let s = dot / self.r2;
        let mut out = [0.0; 3];
        for c in 0..d {
            out[c] = x[c] - self.delta[c] * s;
        }
        out
    }
}

/// Discrete Landau operator.
#[derive(Debug, Clone)]
pub struct LandauOperator {
    species: SpeciesSet,
    kernels: KernelSet,
    grid: VelocityGrid,
}

impl LandauOperator {
    pub fn new(species: SpeciesSet, kernels: KernelSet, grid: VelocityGrid) -> Result<Self> {
        if kernels.species() != species.len() {
            return precondition("kernel set and species set sizes differ");
        }
        Ok(Self {
            species,
            kernels,
            grid,
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

    pub fn with_kernels(&self, kernels: KernelSet) -> Result<Self> {
        Self::new(self.species.clone(), kernels, self.grid.clone())
    }

    fn scaled_gradients(&self, xi: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
        xi.iter()
            .enumerate()
            .map(|(s, x)| {
                let m = self.species.mass(s);
                grad_v_values(&self.grid, x)
                    .into_iter()
                    .map(|c| c.into_iter().map(|v| v / m).collect())
                    .collect()
            })
            .collect()
    }

    fn state_weights(&self, fields: &[Field]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let prep = prepare(&self.species, &self.grid, fields)?;
        let u = (0..self.species.len())
            .map(|s| {
                fields[s]
                    .values()
                    .iter()
                    .zip(&prep.tau[s])
                    .zip(&prep.mask[s])
                    .map(|((f, t), m)| f * t * m)
                    .collect()
            })
            .collect();
        Ok((u, prep.psi))
    }

    fn check_arrays(&self, xi: &[Vec<f64>]) -> Result<()> {
        if xi.len() != self.species.len() || xi.iter().any(|x| x.len() != self.grid.len()) {
            return precondition("one nodal array per species on the operator grid is required");
        }
        Ok(())
    }

    /// Visit every displacement `delta != 0` with its [`Displacement`] and the flat row
    /// ranges `(a_start, b_start, len)` with `a = b + delta`.
    fn for_each_displacement(&self, i: usize, j: usize, mut visit: impl FnMut(&Displacement, &[(usize, usize, usize)])) {
        let g = &self.grid;
        let d = g.dim();
        let n = g.n() as isize;
        let h = g.spacing();
        let pair = self.kernels.pair(i, j);
        let span = 2 * n - 1;
        let mut rows = Vec::with_capacity(g.n() * g.n());
        for t in 0..span.pow(d as u32) {
            let mut rem = t;
            let mut delta = [0isize; 3];
            for a in (0..d).rev() {
                delta[a] = rem % span - (n - 1);
                rem /= span;
            }
            if delta == [0; 3] {
                continue;
            }
            let r2: f64 = (0..d).map(|a| (delta[a] * delta[a]) as f64).sum::<f64>();
            let r = r2.sqrt() * h;
            let weight = r * r * pair.radial.eval(r);
            if weight == 0.0 {
                continue;
            }
            let mut lattice = [0.0; 3];
            for a in 0..d {
                lattice[a] = delta[a] as f64;
            }
            let disp = Displacement { weight, delta: lattice, r2 };
            // b ranges: 0 <= b, b + delta < n per axis
            let mut lo = [0usize; 3];
            let mut hi = [0usize; 3];
            for a in 0..d {
                lo[a] = 0.max(-delta[a]) as usize;
                hi[a] = (n - 1).min(n - 1 - delta[a]) as usize;
            }
            rows.clear();
            let doff: isize = (0..d).map(|a| delta[a] * g.stride(a) as isize).sum();
            let len = hi[d - 1] - lo[d - 1] + 1;
            let outer = if d == 3 { lo[0]..=hi[0] } else { 0..=0 };
            for k0 in outer {
                for k1 in lo[d - 2]..=hi[d - 2] {
                    let idx = if d == 3 { [k0, k1, lo[2]] } else { [k1, lo[1], 0] };
                    let b0 = g.flat_index(&idx);
                    rows.push(((b0 as isize + doff) as usize, b0, len));
                }
            }
            visit(&disp, &rows);
        }
    }

    /// Flux arrays `flux_i` (without the `1/m_i` of the divergence).
    fn flux(&self, input: &FluxInput, only: Option<(usize, usize)>) -> Vec<Vec<Vec<f64>>> {
        let g = &self.grid;
        let d = g.dim();
        let nn = g.len();
        let hd = g.cell_volume();
        let ns = self.species.len();
        let mut flux = vec![vec![vec![0.0; nn]; d]; ns];
        for i in 0..ns {
            for j in 0..ns {
                if only.is_some_and(|p| p != (i, j)) {
                    continue;
                }
                let (ui, uj) = (&input.u[i], &input.u[j]);
                let (xi, xj) = (&input.x[i], &input.x[j]);
                let fi = &mut flux[i];
                self.for_each_displacement(i, j, |k, rows| {
                    for &(a0, b0, len) in rows {
                        for e in 0..len {
                            let (a, b) = (a0 + e, b0 + e);
                            let w = hd * ui[a] * uj[b];
                            if w == 0.0 {
                                continue;
                            }
                            let mut diff = [0.0; 3];
                            for c in 0..d {
                                diff[c] = xi[c][a] - xj[c][b];
                            }
                            let pd = k.project(&diff, d);
                            for p in 0..d {
                                fi[p][a] += w * k.weight * pd[p];
                            }
                        }
                    }
                });
            }
        }
        flux
    }

    /// `D^T(flux_i)/m_i` per species: the mobility applied to the gradients in `input`.
    fn apply(&self, input: &FluxInput) -> Vec<Vec<f64>> {
        let flux = self.flux(input, None);
        flux.iter()
            .enumerate()
            .map(|(s, fl)| {
                let m = self.species.mass(s);
                divergence(&self.grid, fl).into_iter().map(|v| -v / m).collect()
            })
            .collect()
    }

    /// Collision operator `Q^L(F)`, with the dissipation computed as a sum of squares.
    pub fn q_total(&self, fields: &[Field]) -> Result<CollisionResult> {
        let (u, psi) = self.state_weights(fields)?;
        let input = FluxInput {
            u,
            x: self.scaled_gradients(&psi),
        };
        let values: Vec<Vec<f64>> = self.apply(&input).into_iter().map(|v| v.into_iter().map(|x| -x).collect()).collect();
        let dissipation = self.dirichlet(&input);
        Ok(CollisionResult {
            values,
            pair_norms: Vec::new(),
            dissipation: Some(dissipation),
            correction_norm: None,
        })
    }

    /// Contribution of species `j` to the collision operator of species `i`.
    pub fn q_pair(&self, fields: &[Field], i: usize, j: usize) -> Result<Vec<f64>> {
        if i >= self.species.len() || j >= self.species.len() {
            return precondition(format!("species pair ({i}, {j}) out of range"));
        }
        let (u, psi) = self.state_weights(fields)?;
        let input = FluxInput {
            u,
            x: self.scaled_gradients(&psi),
        };
        let flux = self.flux(&input, Some((i, j)));
        let m = self.species.mass(i);
        Ok(divergence(&self.grid, &flux[i]).into_iter().map(|v| v / m).collect())
    }

    /// Entropy dissipation `D^L >= 0`.
    pub fn entropy_dissipation(&self, fields: &[Field]) -> Result<f64> {
        let (u, psi) = self.state_weights(fields)?;
        Ok(self.dirichlet(&FluxInput {
            u,
            x: self.scaled_gradients(&psi),
        }))
    }

    /// `1/2 h^{2d} sum K u_i u_j |Pi (X_i(a) - X_j(b))|^2`, summed as squares.
    fn dirichlet(&self, input: &FluxInput) -> f64 {
        let g = &self.grid;
        let d = g.dim();
        let hd = g.cell_volume();
        let ns = self.species.len();
        let mut total = 0.0;
        for i in 0..ns {
            for j in 0..ns {
                let (ui, uj) = (&input.u[i], &input.u[j]);
                let (xi, xj) = (&input.x[i], &input.x[j]);
                self.for_each_displacement(i, j, |k, rows| {
                    for &(a0, b0, len) in rows {
                        for e in 0..len {
                            let (a, b) = (a0 + e, b0 + e);
                            let w = ui[a] * uj[b];
                            if w == 0.0 {
                                continue;
                            }
                            let mut diff = [0.0; 3];
                            for c in 0..d {
                                diff[c] = xi[c][a] - xj[c][b];
                            }
                            // Pi is an orthogonal projection: diff.K.diff = weight |Pi diff|^2
                            let pd = k.project(&diff, d);
                            let quad: f64 = pd[..d].iter().map(|x| x * x).sum();
                            total += w * k.weight * quad;
                        }
                    }
                });
            }
        }
        0.5 * hd * hd * total
    }

    /// Weak form `-1/2 sum int K u u grad_tilde(Phi) . grad_tilde(dH)` with nodal test
    /// functions differentiated by `grad_v`.
    pub fn weak_form(&self, fields: &[Field], phi: &[Vec<f64>]) -> Result<f64> {
        self.check_arrays(phi)?;
        let grads: Vec<Vec<Vec<f64>>> = phi.iter().map(|p| grad_v_values(&self.grid, p)).collect();
        self.weak_form_gradients(fields, &grads)
    }

    /// Weak form with caller-supplied nodal gradients of the test functions.
    pub fn weak_form_gradients(&self, fields: &[Field], grads: &[Vec<Vec<f64>>]) -> Result<f64> {
        if grads.len() != self.species.len() {
            return precondition("one gradient per species is required");
        }
        let (u, psi) = self.state_weights(fields)?;
        let flux = self.flux(
            &FluxInput {
                u,
                x: self.scaled_gradients(&psi),
            },
            None,
        );
        let hd = self.grid.cell_volume();
        let mut acc = 0.0;
        for (s, fl) in flux.iter().enumerate() {
            let m = self.species.mass(s);
            for (c, comp) in fl.iter().enumerate() {
                acc += comp.iter().zip(&grads[s][c]).map(|(f, g)| f * g).sum::<f64>() / m;
            }
        }
        Ok(-hd * acc)
    }

    /// Mobility `M^L(F) xi`, so that `Q^L = -M^L dH`.
    pub fn mobility_apply(&self, fields: &[Field], xi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_arrays(xi)?;
        let (u, _) = self.state_weights(fields)?;
        Ok(self.apply(&FluxInput {
            u,
            x: self.scaled_gradients(xi),
        }))
    }

    /// Linearized mobility (state-independent weights `u = 1`).
    pub fn linear_mobility_apply(&self, xi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.check_arrays(xi)?;
        Ok(self.apply(&FluxInput {
            u: vec![vec![1.0; self.grid.len()]; self.species.len()],
            x: self.scaled_gradients(xi),
        }))
    }

    /// Linearized operator `Q_lin(F) = -M_lin F` with its Dirichlet form.
    pub fn q_linear(&self, fields: &[Field]) -> Result<CollisionResult> {
        let arrays: Vec<Vec<f64>> = fields.iter().map(|f| f.values().to_vec()).collect();
        self.check_arrays(&arrays)?;
        let input = FluxInput {
            u: vec![vec![1.0; self.grid.len()]; self.species.len()],
            x: self.scaled_gradients(&arrays),
        };
        let values = self.apply(&input).into_iter().map(|v| v.into_iter().map(|x| -x).collect()).collect();
        Ok(CollisionResult {
            values,
            pair_norms: Vec::new(),
            dissipation: Some(self.dirichlet(&input)),
            correction_norm: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann::max_moment;
    use crate::grid::equilibrium;
    use crate::kernel::{Angular, PairKernel, Radial};
    use crate::species::Statistics;

    fn blob(grid: &VelocityGrid, c: f64, w: f64) -> Field {
        Field::from_fn(grid, |v| w * ((-(v[0] - c).powi(2) - v[1] * v[1]).exp() + 0.5 * (-(v[0] + 1.0).powi(2) - (v[1] - 0.5).powi(2)).exp()))
            .unwrap()
    }

    fn operator(species: SpeciesSet, n: usize) -> LandauOperator {
        let grid = VelocityGrid::new(2, n, 4.5).unwrap();
        let kernels = KernelSet::uniform(species.len(), PairKernel::new(Radial::PowerLaw { c: 1.0, gamma: -1.0 }, Angular::Constant { c: 1.0 }));
        LandauOperator::new(species, kernels, grid).unwrap()
    }

    #[test]
    fn projection_properties() {
        let p = pi_projection(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(p[0][0], 0.0);
        assert_eq!(p[1][1], 1.0);
        let p = pi_projection(&[0.3, -1.0, 2.0], &[1.0, 0.5, -0.2]).unwrap();
        let tr: f64 = (0..3).map(|k| p[k][k]).sum();
        assert!((tr - 2.0).abs() < 1e-14);
        for r in 0..3 {
            for c in 0..3 {
                let sq: f64 = (0..3).map(|k| p[r][k] * p[k][c]).sum();
                assert!((sq - p[r][c]).abs() < 1e-14);
                assert!((p[r][c] - p[c][r]).abs() < 1e-15);
            }
        }
        assert!(pi_projection(&[1.0, 1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn grad_tilde_invariants() {
        let p = pi_projection(&[0.3, 0.8], &[-0.5, 0.1]).unwrap();
        let (mi, mj) = (2.0, 0.5);
        let g = grad_tilde(&[mi, 0.0], &[mj, 0.0], &p, mi, mj);
        assert!(g.iter().all(|x| x.abs() < 1e-15));
        // energy: grad = m v
        let g = grad_tilde(&[mi * 0.3, mi * 0.8], &[mj * -0.5, mj * 0.1], &p, mi, mj);
        assert!(g.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn conservation_and_entropy_identity() {
        let species = SpeciesSet::new(vec![1.0, 3.0], vec![Statistics::Maxwell, Statistics::Fermi]).unwrap();
        let op = operator(species, 12);
        let fields = vec![blob(op.grid(), 1.0, 0.5), blob(op.grid(), -0.5, 0.3)];
        let res = op.q_total(&fields).unwrap();
        let scale = res.values.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        let mom = max_moment(&res.values, op.grid(), op.species().masses()).unwrap();
        assert!(mom < 1e-13 * scale.max(1.0), "{mom}");
        let prep = prepare(op.species(), op.grid(), &fields).unwrap();
        let hd = op.grid().cell_volume();
        let dh: f64 = (0..2)
            .map(|s| hd * prep.psi[s].iter().zip(&res.values[s]).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let d = res.dissipation.unwrap();
        assert!(d > 0.0);
        assert!((dh + d).abs() < 1e-10 * d, "{dh} vs {d}");
        let weak = op.weak_form(&fields, &prep.psi).unwrap();
        assert!((weak + d).abs() < 1e-10 * d);
    }

    #[test]
    fn equilibrium_is_annihilated() {
        let species = SpeciesSet::new(vec![1.0, 2.0], vec![Statistics::Bose, Statistics::Fermi]).unwrap();
        let op = operator(species, 12);
        let u = [0.1, 0.2];
        let f0 = equilibrium(Statistics::Bose, 1.0, -0.3, &u, 0.8, op.grid()).unwrap();
        let f1 = equilibrium(Statistics::Fermi, 2.0, 0.4, &u, 0.8, op.grid()).unwrap();
        let res = op.q_total(&[f0, f1]).unwrap();
        let worst = res.values.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        assert!(worst < 1e-13, "{worst}");
    }

    #[test]
    fn mobility_symmetric_and_pairs_sum() {
        let species = SpeciesSet::classical(2);
        let op = operator(species, 10);
        let fields = vec![blob(op.grid(), 1.0, 0.5), blob(op.grid(), -0.5, 0.3)];
        let xi: Vec<Vec<f64>> = (0..2).map(|s| op.grid().sample(|v| (v[0] + s as f64 * v[1]).sin())).collect();
        let eta: Vec<Vec<f64>> = (0..2).map(|s| op.grid().sample(|v| v[0] * v[1] * (1.0 + s as f64))).collect();
        let dot = |a: &[Vec<f64>], b: &[Vec<f64>]| -> f64 {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()).sum()
        };
        let mx = op.mobility_apply(&fields, &xi).unwrap();
        let me = op.mobility_apply(&fields, &eta).unwrap();
        assert!((dot(&eta, &mx) - dot(&xi, &me)).abs() < 1e-12);
        assert!(dot(&xi, &mx) > 0.0);
        let total = op.q_total(&fields).unwrap();
        for i in 0..2 {
            let sum: Vec<f64> = (0..op.grid().len())
                .map(|k| (0..2).map(|j| op.q_pair(&fields, i, j).unwrap()[k]).sum())
                .collect();
            for (a, b) in sum.iter().zip(&total.values[i]) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let species = SpeciesSet::classical(1);
        let op = operator(species, 8)
            .with_kernels(KernelSet::uniform(1, PairKernel::maxwell(0.0, 1.0)))
            .unwrap();
        let res = op.q_total(&[blob(op.grid(), 0.0, 1.0)]).unwrap();
        assert!(res.values[0].iter().all(|&x| x == 0.0));
    }
}
