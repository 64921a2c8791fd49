//! Quadrature on the unit sphere `S^{d-1}` and one-dimensional Gauss-Legendre rules.

use std::f64::consts::PI;

use crate::error::{precondition, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton iteration on `P_n`).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * x * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (x * p1 - p2) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let panel: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| wi * f(mid + 0.5 * width * xi))
            .sum();
        total += 0.5 * width * panel;
    }
    total
}

/// Surface measure `|S^{k}|` of the unit `k`-sphere, with `|S^0| = 2`.
pub fn sphere_measure(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        _ => {
            // |S^k| = 2 pi^{(k+1)/2} / Gamma((k+1)/2), recursion |S^k| = 2 pi / (k-1) |S^{k-2}|
            2.0 * PI / (k as f64 - 1.0) * sphere_measure(k - 2)
        }
    }
}

/// A quadrature rule on `S^{d-1}`.
///
/// Nodes are stored pole-first: component 0 is the cosine of the polar angle
/// measured from the first coordinate axis. The node set is symmetric under
/// `omega -> -omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    dim: usize,
    resolution: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    /// `d = 2`: `k` equispaced angles at half-integer offsets, weight `2 pi / k`.
    /// `d = 3`: `k` Gauss-Legendre nodes in `cos(theta)` times `2k` equispaced azimuths.
    pub fn new(dim: usize, k: usize) -> Result<Self> {
        if k < 8 {
            return precondition(format!("sphere quadrature needs K >= 8, got {k}"));
        }
        if k % 2 == 1 {
            return precondition(format!(
                "sphere quadrature needs an even K so that the node set is symmetric, got {k}"
            ));
        }
        match dim {
            2 => {
                let mut nodes = Vec::with_capacity(k);
                let half = k / 2;
                for q in 0..half {
                    let phi = 2.0 * PI * (q as f64 + 0.5) / k as f64;
                    nodes.push([phi.cos(), phi.sin(), 0.0]);
                }
                // exact antipodes
                for q in 0..half {
                    let [c, s, _] = nodes[q];
                    nodes.push([-c, -s, 0.0]);
                }
                let weights = vec![2.0 * PI / k as f64; k];
                Ok(Self {
                    dim,
                    resolution: k,
                    nodes,
                    weights,
                })
            }
            3 => {
                let (mu, wmu) = gauss_legendre(k);
                let naz = 2 * k;
                let dphi = 2.0 * PI / naz as f64;
                let mut nodes = Vec::with_capacity(k * naz);
                let mut weights = Vec::with_capacity(k * naz);
                for (c, wc) in mu.iter().zip(&wmu) {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    for l in 0..naz {
                        let phi = dphi * (l as f64 + 0.5);
                        nodes.push([*c, s * phi.cos(), s * phi.sin()]);
                        weights.push(wc * dphi);
                    }
                }
                Ok(Self {
                    dim,
                    resolution: k,
                    nodes,
                    weights,
                })
            }
            other => precondition(format!("dimension must be 2 or 3, got {other}")),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node `q` in pole-first coordinates (only the first `dim` entries are meaningful).
    pub fn node(&self, q: usize) -> &[f64] {
        &self.nodes[q][..self.dim]
    }

    pub fn weight(&self, q: usize) -> f64 {
        self.weights[q]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Polar angle of node `q` measured from the pole.
    pub fn polar_angle(&self, q: usize) -> f64 {
        self.nodes[q][0].clamp(-1.0, 1.0).acos()
    }

    /// Integrate `f(omega)` over the sphere.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(n, w)| w * f(&n[..self.dim]))
            .sum()
    }

    /// Number of nodes whose polar angle lies in `[0, max_angle]`.
    pub fn nodes_within(&self, max_angle: f64) -> usize {
        (0..self.len())
            .filter(|&q| self.polar_angle(q) <= max_angle)
            .count()
    }
}

/// Orthonormal frame `[k, e1, e2]` with `k` the given unit vector.
///
/// `frame(-k)` is the componentwise negation of `frame(k)` in `d = 2`.
pub(crate) fn frame(k: &[f64]) -> [[f64; 3]; 3] {
    match k.len() {
        2 => [[k[0], k[1], 0.0], [-k[1], k[0], 0.0], [0.0, 0.0, 0.0]],
        _ => {
            let kk = [k[0], k[1], k[2]];
            // axis least aligned with k
            let mut a = [0.0; 3];
            let (mut best, mut idx) = (f64::INFINITY, 0);
            for (i, c) in kk.iter().enumerate() {
                if c.abs() < best {
                    best = c.abs();
                    idx = i;
                }
            }
            a[idx] = 1.0;
            let mut e1 = cross(kk, a);
            let n1 = norm3(e1);
            for c in &mut e1 {
                *c /= n1;
            }
            let e2 = cross(kk, e1);
            [kk, e1, e2]
        }
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Map a pole-first node into the frame whose pole is `frame[0]`.
pub(crate) fn rotate(node: &[f64], frame: &[[f64; 3]; 3], dim: usize, out: &mut [f64]) {
    for c in 0..dim {
        out[c] = 0.0;
        for (a, f) in node.iter().zip(frame.iter()).take(dim) {
            out[c] += a * f[c];
        }
    }
}
