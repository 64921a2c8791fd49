//! Direct-sum reference implementations of the discrete operators.
//!
//! These loop over every collision `(i, j, a, b, q)` (Boltzmann) or every node
//! pair (Landau) in the symmetric ordered-pair form, with per-point interpolation
//! stencils and a dense finite-difference matrix built from Fornberg weights.
//! They are slow and only meant for small grids, to cross-check the optimized
//! operators.

use crate::boltzmann::{BoltzmannOperator, FLOOR_FACTOR, LOG_CLAMP_FACTOR};
use crate::error::{precondition, KineticError, Result};
use crate::grid::{Field, VelocityGrid};
use crate::landau::LandauOperator;
use crate::species::{SpeciesSet, Statistics};
use crate::sphere::{frame, rotate};

/// Output of a direct evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectResult {
    pub values: Vec<Vec<f64>>,
    pub dissipation: f64,
}

struct State {
    psi: Vec<Vec<f64>>,
    tau: Vec<Vec<f64>>,
    /// `f/tau`.
    ratio: Vec<Vec<f64>>,
    active: Vec<Vec<bool>>,
    f: Vec<Vec<f64>>,
}

fn state(species: &SpeciesSet, grid: &VelocityGrid, fields: &[Field]) -> Result<State> {
    if fields.len() != species.len() {
        return precondition("one field per species is required");
    }
    let mut st = State {
        psi: Vec::new(),
        tau: Vec::new(),
        ratio: Vec::new(),
        active: Vec::new(),
        f: Vec::new(),
    };
    for (s, field) in fields.iter().enumerate() {
        if field.grid() != grid {
            return Err(KineticError::GridMismatch);
        }
        let alpha = species.alpha(s);
        let fmax = field.max();
        let (mut psi, mut tau, mut ratio, mut active) = (vec![], vec![], vec![], vec![]);
        for &f in field.values() {
            if species.statistics(s) == Statistics::Fermi && f > 1.0 {
                return precondition(format!("Fermi density above 1 for species {s}"));
            }
            let mut fc = f.max(LOG_CLAMP_FACTOR * fmax).max(f64::MIN_POSITIVE);
            if species.statistics(s) == Statistics::Fermi {
                fc = fc.min(1.0 - 1e-12);
            }
            let t = 1.0 + alpha * fc;
            tau.push(t);
            ratio.push(fc / t);
            psi.push((fc / t).ln());
            active.push(f > FLOOR_FACTOR * fmax && f > 0.0);
        }
        st.psi.push(psi);
        st.tau.push(tau);
        st.ratio.push(ratio);
        st.active.push(active);
        st.f.push(field.values().to_vec());
    }
    Ok(st)
}

/// Catmull-Rom tensor stencil at `v`, or `None` if any tap leaves the lattice.
pub fn catmull_rom_stencil(grid: &VelocityGrid, v: &[f64]) -> Option<Vec<(usize, f64)>> {
    let d = grid.dim();
    let mut base = [0isize; 3];
    let mut frac = [0.0; 3];
    for a in 0..d {
        let x = (v[a] + grid.half_width()) / grid.spacing() - 0.5;
        base[a] = x.floor() as isize;
        frac[a] = x - x.floor();
    }
    lattice_stencil(grid, &base[..d], &frac[..d])
}

/// Stencil at lattice coordinate `base + frac` (per axis, `0 <= frac < 1`).
fn lattice_stencil(grid: &VelocityGrid, base: &[isize], frac: &[f64]) -> Option<Vec<(usize, f64)>> {
    let d = grid.dim();
    let n = grid.n() as isize;
    let mut w = [[0.0; 4]; 3];
    for a in 0..d {
        if base[a] - 1 < 0 || base[a] + 2 > n - 1 {
            return None;
        }
        let t = frac[a];
        // cubic Hermite with central-difference slopes
        let (h00, h10, h01, h11) = (
            2.0 * t.powi(3) - 3.0 * t * t + 1.0,
            t.powi(3) - 2.0 * t * t + t,
            -2.0 * t.powi(3) + 3.0 * t * t,
            t.powi(3) - t * t,
        );
        w[a] = [-0.5 * h10, h00 - 0.5 * h11, h01 + 0.5 * h10, 0.5 * h11];
    }
    let mut taps = Vec::with_capacity(1 << (2 * d));
    let mut k = [0usize; 3];
    for t in 0..4usize.pow(d as u32) {
        let mut rem = t;
        let mut weight = 1.0;
        for a in 0..d {
            let o = rem % 4;
            rem /= 4;
            k[a] = (base[a] - 1 + o as isize) as usize;
            weight *= w[a][o];
        }
        taps.push((grid.flat_index(&k[..d]), weight));
    }
    Some(taps)
}

/// Stencil of the post-collision point `b + shift` (lattice units). Points are
/// located relative to the partner node so that ties on lattice lines are
/// resolved the same way for every collision sharing a displacement.
fn shifted_stencil(grid: &VelocityGrid, b: usize, shift: &[f64]) -> Option<Vec<(usize, f64)>> {
    let d = grid.dim();
    let kb = grid.multi_index(b);
    let mut base = [0isize; 3];
    let mut frac = [0.0; 3];
    for a in 0..d {
        let fl = shift[a].floor();
        base[a] = kb[a] as isize + fl as isize;
        frac[a] = shift[a] - fl;
    }
    lattice_stencil(grid, &base[..d], &frac[..d])
}

fn gather(taps: &[(usize, f64)], values: &[f64]) -> f64 {
    taps.iter().map(|(k, w)| w * values[*k]).sum()
}

/// Visit every collision of the ordered-pair sum with its weight
/// `1/4 h^{2d} w_q B`, the pre-collision nodes and the post-collision stencils.
fn for_each_collision(
    op: &BoltzmannOperator,
    mut visit: impl FnMut(usize, usize, usize, usize, f64, &[(usize, f64)], &[(usize, f64)], &[f64], &[f64]),
) -> Result<()> {
    let grid = op.grid();
    let sphere = op.sphere();
    let species = op.species();
    let d = grid.dim();
    let h = grid.spacing();
    let hd = grid.cell_volume();
    let mut omega = vec![0.0; d];
    let mut shift_i = vec![0.0; d];
    let mut shift_j = vec![0.0; d];
    let mut vi = vec![0.0; d];
    let mut vj = vec![0.0; d];
    for i in 0..species.len() {
        for j in 0..species.len() {
            let pair = op.kernels().pair(i, j);
            let (mi, mj) = (species.mass(i), species.mass(j));
            for a in 0..grid.len() {
                let ka = grid.multi_index(a);
                for b in 0..grid.len() {
                    let kb = grid.multi_index(b);
                    // displacement a - b in lattice units
                    let delta: Vec<f64> = (0..d).map(|c| ka[c] as f64 - kb[c] as f64).collect();
                    let len = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if len == 0.0 {
                        continue;
                    }
                    let k: Vec<f64> = delta.iter().map(|x| x / len).collect();
                    let fr = frame(&k);
                    for q in 0..sphere.len() {
                        let kernel = pair.kernel_b(len * h, sphere.polar_angle(q))?;
                        if kernel == 0.0 {
                            continue;
                        }
                        rotate(sphere.node(q), &fr, d, &mut omega);
                        // v_i' - v_b and v_j' - v_b, from momentum and energy conservation
                        for c in 0..d {
                            shift_i[c] = (mi * delta[c] + mj * len * omega[c]) / (mi + mj);
                            shift_j[c] = mi * (delta[c] - len * omega[c]) / (mi + mj);
                            let vb = grid.coord(kb[c]);
                            vi[c] = vb + shift_i[c] * h;
                            vj[c] = vb + shift_j[c] * h;
                        }
                        let (Some(si), Some(sj)) = (shifted_stencil(grid, b, &shift_i), shifted_stencil(grid, b, &shift_j))
                        else {
                            continue;
                        };
                        let weight = 0.25 * hd * hd * sphere.weight(q) * kernel;
                        visit(i, j, a, b, weight, &si, &sj, &vi, &vj);
                    }
                }
            }
        }
    }
    Ok(())
}

fn tau_post(alpha: f64, e: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        1.0 / (1.0 - alpha * e).max(1e-12)
    }
}

/// `f_i' f_j' tau_i tau_j - f_i f_j tau_i' tau_j'` for one collision, with the
/// post-collision state recovered from interpolated entropy variables.
fn collision_flux(species: &SpeciesSet, st: &State, i: usize, j: usize, a: usize, b: usize, psi_i: f64, psi_j: f64) -> f64 {
    if !(st.active[i][a] && st.active[j][b]) {
        return 0.0;
    }
    let (ei, ej) = (psi_i.exp(), psi_j.exp());
    let post = tau_post(species.alpha(i), ei) * tau_post(species.alpha(j), ej);
    st.tau[i][a] * st.tau[j][b] * post * (ei * ej - st.ratio[i][a] * st.ratio[j][b])
}

/// Direct-sum Boltzmann operator and entropy dissipation.
pub fn boltzmann_direct(op: &BoltzmannOperator, fields: &[Field]) -> Result<DirectResult> {
    let grid = op.grid();
    let species = op.species();
    let st = state(species, grid, fields)?;
    let hd = grid.cell_volume();
    let mut values = vec![vec![0.0; grid.len()]; species.len()];
    let mut dissipation = 0.0;
    for_each_collision(op, |i, j, a, b, weight, si, sj, _, _| {
        let (pi, pj) = (gather(si, &st.psi[i]), gather(sj, &st.psi[j]));
        let g = weight * collision_flux(species, &st, i, j, a, b, pi, pj);
        if g == 0.0 {
            return;
        }
        dissipation += g * (pi + pj - st.psi[i][a] - st.psi[j][b]);
        // gain minus loss at the pre-collision nodes, the negative on the post-collision stencils
        values[i][a] += g / hd;
        values[j][b] += g / hd;
        for (k, w) in si {
            values[i][*k] -= w * g / hd;
        }
        for (k, w) in sj {
            values[j][*k] -= w * g / hd;
        }
    })?;
    Ok(DirectResult { values, dissipation })
}

/// Direct-sum weak form `<Q, Phi>` for nodal test functions, interpolated like `psi`.
pub fn boltzmann_direct_weak(op: &BoltzmannOperator, fields: &[Field], phi: &[Vec<f64>]) -> Result<f64> {
    let species = op.species();
    let st = state(species, op.grid(), fields)?;
    if phi.len() != species.len() {
        return precondition("one test array per species is required");
    }
    let mut acc = 0.0;
    for_each_collision(op, |i, j, a, b, weight, si, sj, _, _| {
        let (pi, pj) = (gather(si, &st.psi[i]), gather(sj, &st.psi[j]));
        let g = weight * collision_flux(species, &st, i, j, a, b, pi, pj);
        let grad = gather(si, &phi[i]) + gather(sj, &phi[j]) - phi[i][a] - phi[j][b];
        acc -= g * grad;
    })?;
    Ok(acc)
}

/// Direct-sum weak form with test functions evaluated at the exact post-collision velocities.
pub fn boltzmann_direct_weak_analytic(
    op: &BoltzmannOperator,
    fields: &[Field],
    phi: &dyn Fn(usize, &[f64]) -> f64,
) -> Result<f64> {
    let grid = op.grid();
    let d = grid.dim();
    let species = op.species();
    let st = state(species, grid, fields)?;
    let vel = grid.velocities();
    let mut acc = 0.0;
    for_each_collision(op, |i, j, a, b, weight, si, sj, vi, vj| {
        let (pi, pj) = (gather(si, &st.psi[i]), gather(sj, &st.psi[j]));
        let g = weight * collision_flux(species, &st, i, j, a, b, pi, pj);
        if g == 0.0 {
            return;
        }
        let grad = phi(i, vi) + phi(j, vj) - phi(i, &vel[a * d..(a + 1) * d]) - phi(j, &vel[b * d..(b + 1) * d]);
        acc -= g * grad;
    })?;
    Ok(acc)
}

/// Finite-difference weights for the `order`-th derivative at `x0` over `nodes`
/// (Fornberg's recursion).
pub fn fornberg_weights(x0: f64, nodes: &[f64], order: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Dense one-dimensional first-derivative matrix on `n` nodes of spacing `h`:
/// five-point stencils, centered in the interior and shifted to stay inside the
/// lattice in the two outer layers (three points when `n = 4`).
pub fn derivative_matrix(n: usize, h: f64) -> Vec<Vec<f64>> {
    let width = if n >= 5 { 5 } else { 3 };
    let half = width / 2;
    (0..n)
        .map(|k| {
            let first = k.saturating_sub(half).min(n - width);
            let nodes: Vec<f64> = (first..first + width).map(|t| t as f64 * h).collect();
            let w = fornberg_weights(k as f64 * h, &nodes, 1);
            let mut row = vec![0.0; n];
            row[first..first + width].copy_from_slice(&w);
            row
        })
        .collect()
}

/// Gradient of nodal values via [`derivative_matrix`], one array per axis.
pub fn dense_gradient(grid: &VelocityGrid, values: &[f64]) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let dm = derivative_matrix(grid.n(), grid.spacing());
    (0..d)
        .map(|axis| {
            let stride = grid.stride(axis);
            (0..grid.len())
                .map(|idx| {
                    let k = grid.multi_index(idx)[axis];
                    let base = idx - k * stride;
                    (0..grid.n()).map(|t| dm[k][t] * values[base + t * stride]).sum()
                })
                .collect()
        })
        .collect()
}

fn projected(va: &[f64], vb: &[f64], x: &[f64]) -> Vec<f64> {
    let z: Vec<f64> = va.iter().zip(vb).map(|(p, q)| p - q).collect();
    let r2: f64 = z.iter().map(|c| c * c).sum();
    let zx: f64 = z.iter().zip(x).map(|(p, q)| p * q).sum();
    x.iter().zip(&z).map(|(xc, zc)| xc - zc * zx / r2).collect()
}

struct LandauState {
    u: Vec<Vec<f64>>,
    x: Vec<Vec<Vec<f64>>>,
}

fn landau_state(op: &LandauOperator, fields: &[Field]) -> Result<LandauState> {
    let species = op.species();
    let grid = op.grid();
    let st = state(species, grid, fields)?;
    let mut u = Vec::new();
    let mut x = Vec::new();
    for s in 0..species.len() {
        let m = species.mass(s);
        u.push(
            (0..grid.len())
                .map(|k| if st.active[s][k] { st.f[s][k] * st.tau[s][k] } else { 0.0 })
                .collect(),
        );
        x.push(
            dense_gradient(grid, &st.psi[s])
                .into_iter()
                .map(|c| c.into_iter().map(|g| g / m).collect())
                .collect(),
        );
    }
    Ok(LandauState { u, x })
}

/// Visit every ordered node pair `(a, b)`, `v_a != v_b`, with `h^{2d} r^2 alpha(r)`.
fn for_each_node_pair(op: &LandauOperator, i: usize, j: usize, mut visit: impl FnMut(usize, usize, f64, &[f64], &[f64])) {
    let grid = op.grid();
    let d = grid.dim();
    let hd = grid.cell_volume();
    let vel = grid.velocities();
    let pair = op.kernels().pair(i, j);
    for a in 0..grid.len() {
        let va = &vel[a * d..(a + 1) * d];
        for b in 0..grid.len() {
            let vb = &vel[b * d..(b + 1) * d];
            let r2: f64 = va.iter().zip(vb).map(|(p, q)| (p - q).powi(2)).sum();
            if r2 == 0.0 {
                continue;
            }
            let w = hd * hd * r2 * pair.radial.eval(r2.sqrt());
            if w != 0.0 {
                visit(a, b, w, va, vb);
            }
        }
    }
}

/// Direct-sum Landau operator `Q_i = -D^T flux_i / m_i` and its Dirichlet dissipation.
pub fn landau_direct(op: &LandauOperator, fields: &[Field]) -> Result<DirectResult> {
    let grid = op.grid();
    let d = grid.dim();
    let species = op.species();
    let ls = landau_state(op, fields)?;
    let hd = grid.cell_volume();
    let ns = species.len();
    let mut flux = vec![vec![vec![0.0; grid.len()]; d]; ns];
    let mut dissipation = 0.0;
    for i in 0..ns {
        for j in 0..ns {
            for_each_node_pair(op, i, j, |a, b, w, va, vb| {
                let uu = ls.u[i][a] * ls.u[j][b];
                if uu == 0.0 {
                    return;
                }
                let diff: Vec<f64> = (0..d).map(|c| ls.x[i][c][a] - ls.x[j][c][b]).collect();
                let p = projected(va, vb, &diff);
                for c in 0..d {
                    flux[i][c][a] += w / hd * uu * p[c];
                }
                dissipation += 0.5 * w * uu * p.iter().map(|c| c * c).sum::<f64>();
            });
        }
    }
    let dm = derivative_matrix(grid.n(), grid.spacing());
    let mut values = vec![vec![0.0; grid.len()]; ns];
    for s in 0..ns {
        let m = species.mass(s);
        for axis in 0..d {
            let stride = grid.stride(axis);
            for idx in 0..grid.len() {
                let k = grid.multi_index(idx)[axis];
                let base = idx - k * stride;
                // (D^T flux)(node) = sum over rows of D that tap this node
                for t in 0..grid.n() {
                    values[s][base + t * stride] -= dm[k][t] * flux[s][axis][idx] / m;
                }
            }
        }
    }
    Ok(DirectResult { values, dissipation })
}

/// Direct weak form `-1/2 sum h^{2d} r^2 alpha u_i u_j grad_tilde(Phi) . Pi grad_tilde(psi)`
/// with `grad_tilde(xi) = grad xi_i(a)/m_i - grad xi_j(b)/m_j`.
pub fn landau_direct_weak(op: &LandauOperator, fields: &[Field], phi: &[Vec<f64>]) -> Result<f64> {
    let grid = op.grid();
    let d = grid.dim();
    let species = op.species();
    if phi.len() != species.len() {
        return precondition("one test array per species is required");
    }
    let ls = landau_state(op, fields)?;
    let gphi: Vec<Vec<Vec<f64>>> = phi
        .iter()
        .enumerate()
        .map(|(s, p)| {
            dense_gradient(grid, p)
                .into_iter()
                .map(|c| c.into_iter().map(|g| g / species.mass(s)).collect())
                .collect()
        })
        .collect();
    let mut acc = 0.0;
    for i in 0..species.len() {
        for j in 0..species.len() {
            for_each_node_pair(op, i, j, |a, b, w, va, vb| {
                let uu = ls.u[i][a] * ls.u[j][b];
                if uu == 0.0 {
                    return;
                }
                let dpsi: Vec<f64> = (0..d).map(|c| ls.x[i][c][a] - ls.x[j][c][b]).collect();
                let dphi: Vec<f64> = (0..d).map(|c| gphi[i][c][a] - gphi[j][c][b]).collect();
                let p = projected(va, vb, &dpsi);
                acc -= 0.5 * w * uu * dphi.iter().zip(&p).map(|(x, y)| x * y).sum::<f64>();
            });
        }
    }
    Ok(acc)
}
