use std::sync::OnceLock;

use super::mixture::SymmetricNormalMixture;
use crate::error::{Error, Result};

pub const DEFAULT_NODES_PER_UNIT: usize = 64;

/// Largest tolerated probability mass outside a grid.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Half-width multiplier (in scale units) used when sizing grids.
const WIDTH_SIGMAS: f64 = 8.0;

const PANEL_NODES: usize = 16;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_NODES))
}

/// Composite Gauss-Legendre rule on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Equal-width 16-node panels with roughly `nodes_per_unit` nodes per
    /// unit length.
    pub fn composite(lo: f64, hi: f64, nodes_per_unit: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || nodes_per_unit == 0 {
            return Err(Error::InvalidConfig(format!(
                "bad quadrature interval [{lo}, {hi}]"
            )));
        }
        let (gx, gw) = panel_rule();
        let panels = (((hi - lo) * nodes_per_unit as f64) / PANEL_NODES as f64)
            .ceil()
            .max(1.0) as usize;
        let h = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * PANEL_NODES);
        let mut weights = Vec::with_capacity(panels * PANEL_NODES);
        for k in 0..panels {
            let a = lo + k as f64 * h;
            let mid = a + 0.5 * h;
            for (x, w) in gx.iter().zip(gw) {
                nodes.push(mid + 0.5 * h * x);
                weights.push(0.5 * h * w);
            }
        }
        Ok(Self {
            lo,
            hi,
            nodes,
            weights,
        })
    }

    /// Symmetric grid covering every mixture, widened by `|shift|`.
    pub fn covering(mixtures: &[&SymmetricNormalMixture], shift: f64) -> Self {
        let half = mixtures
            .iter()
            .map(|m| m.extent(WIDTH_SIGMAS))
            .fold(0.0, f64::max)
            + shift.abs();
        Self::composite(-half, half, DEFAULT_NODES_PER_UNIT).expect("positive width")
    }

    /// Symmetric grid for the atom box `[-m, m] x [., sigma2]`.
    pub fn for_box(m: f64, sigma2: f64, shift: f64) -> Result<Self> {
        let half = m + WIDTH_SIGMAS * sigma2 + shift.abs();
        Self::composite(-half, half, DEFAULT_NODES_PER_UNIT)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nodes_per_unit(&self) -> f64 {
        self.nodes.len() as f64 / (self.hi - self.lo)
    }

    /// The same node density on `[lo + a, hi + b]`.
    pub fn widened(&self, a: f64, b: f64) -> Self {
        let npu = self.nodes_per_unit().round().max(1.0) as usize;
        Self::composite(self.lo + a, self.hi + b, npu).expect("widened grid is valid")
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Errors when `eta(. - shift)` puts more than [`TAIL_TOLERANCE`] outside.
    pub fn check_covers(&self, eta: &SymmetricNormalMixture, shift: f64) -> Result<()> {
        let tail = eta.tail_mass_outside(self.lo - shift, self.hi - shift);
        if tail > TAIL_TOLERANCE {
            return Err(Error::GridTooNarrow {
                lo: self.lo,
                hi: self.hi,
                tail_mass: tail,
            });
        }
        Ok(())
    }
}
