//! Quadrature on `[-π, π]` for even integrands that may carry an integrable
//! singularity `|ω|^{-a}`, `a < 1`, at the origin.
//!
//! [`EvenRule`] integrates `f` over `[-π, π]` as `2 ∫_0^π f`, using the
//! substitution `ω = π s^m` so that `|ω|^{-a}` becomes `s^{m(1-a)-1}`, which
//! is bounded for `m(1-a) ≥ 1`.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Nodes in `(0, π]` and weights such that `Σ w_i f(ω_i) ≈ ∫_{-π}^{π} f`
/// for even `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvenRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Panels × Gauss order × grading power used when nothing else is asked for.
pub const DEFAULT_PANELS: usize = 256;
pub const DEFAULT_ORDER: usize = 16;
pub const DEFAULT_GRADING: u32 = 8;

impl EvenRule {
    /// Composite Gauss–Legendre in `s ∈ [0, 1]` after `ω = π s^grading`.
    pub fn graded_gauss(panels: usize, order: usize, grading: u32) -> Self {
        assert!(panels > 0 && grading >= 1);
        let (gx, gw) = gauss_legendre(order);
        let m = grading as f64;
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let a = p as f64 * h;
            for (x, w) in gx.iter().zip(&gw) {
                let s = a + 0.5 * h * (x + 1.0);
                let jac = m * PI * s.powi(grading as i32 - 1);
                nodes.push(PI * s.powi(grading as i32));
                weights.push(2.0 * 0.5 * h * w * jac);
            }
        }
        EvenRule { nodes, weights }
    }

    /// Composite midpoint rule on the mesh `ω_i = π ((i - ½)/N)^grading`.
    ///
    /// With `grading = 2` the node density is proportional to `|ω|^{-1/2}`.
    pub fn graded_midpoint(nodes: usize, grading: u32) -> Self {
        assert!(nodes > 0 && grading >= 1);
        let m = grading as f64;
        let h = 1.0 / nodes as f64;
        let (ns, ws) = (0..nodes)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                let jac = m * PI * s.powi(grading as i32 - 1);
                (PI * s.powi(grading as i32), 2.0 * h * jac)
            })
            .unzip();
        EvenRule {
            nodes: ns,
            weights: ws,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

impl Default for EvenRule {
    fn default() -> Self {
        EvenRule::graded_gauss(DEFAULT_PANELS, DEFAULT_ORDER, DEFAULT_GRADING)
    }
}
