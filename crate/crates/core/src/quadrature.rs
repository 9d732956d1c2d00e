//! Tensor-product Gauss–Legendre rules on the unit cube.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre rule mapped to `[0, 1]`, weights summing to one.
#[derive(Clone, Debug)]
pub struct UnitRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl UnitRule {
    pub fn gauss(order: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(order.max(1)).unwrap());
        let nodes = rule.nodes().map(|x| 0.5 * (x + 1.0)).collect();
        let weights = rule.weights().map(|w| 0.5 * w).collect();
        Self { nodes, weights }
    }

    /// Composite rule: `panels` equal subintervals of `[0, 1]`, `order`
    /// points each.
    pub fn composite(order: usize, panels: usize) -> Self {
        let base = Self::gauss(order);
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(order * panels);
        let mut weights = Vec::with_capacity(order * panels);
        for k in 0..panels {
            for (x, w) in base.nodes.iter().zip(&base.weights) {
                nodes.push((k as f64 + x) * h);
                weights.push(w * h);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integral of `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(a + h * x))
            .sum::<f64>()
            * h
    }
}

/// Tensor product of a unit rule over `[0, 1]^d`: yields (reduced point,
/// weight) pairs whose weights sum to one.
#[derive(Clone, Debug)]
pub struct CubeRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl CubeRule {
    pub fn new(dim: usize, rule: &UnitRule) -> Self {
        let n = rule.len();
        let total = n.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for flat in 0..total {
            let mut idx = flat;
            let mut s = vec![0.0; dim];
            let mut w = 1.0;
            for r in (0..dim).rev() {
                let k = idx % n;
                idx /= n;
                s[r] = rule.nodes[k];
                w *= rule.weights[k];
            }
            points.push(s);
            weights.push(w);
        }
        Self { points, weights }
    }

    pub fn gauss(dim: usize, order: usize) -> Self {
        Self::new(dim, &UnitRule::gauss(order))
    }
}
