use crate::channel::Position3;

/// Gaussian-kernel proximity graph over the UAVs.
///
/// Off-diagonal entries are `exp(-|q_u - q_v|^2 / (2 rho^2))`; each diagonal
/// entry holds the degree of its node, the row sum of the off-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub n: usize,
    /// Row-major `n x n` entries.
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n + col]
    }
}

pub fn similarity(positions: &[Position3], kernel_width_sq: f64) -> SimilarityMatrix {
    let n = positions.len();
    let mut values = vec![0.0; n * n];
    for u in 0..n {
        for v in (u + 1)..n {
            let dx = positions[u].x - positions[v].x;
            let dy = positions[u].y - positions[v].y;
            let dz = positions[u].z - positions[v].z;
            let z = (-(dx * dx + dy * dy + dz * dz) / (2.0 * kernel_width_sq)).exp();
            values[u * n + v] = z;
            values[v * n + u] = z;
        }
    }
    for u in 0..n {
        let degree: f64 = (0..n).filter(|&v| v != u).map(|v| values[u * n + v]).sum();
        values[u * n + u] = degree;
    }
    SimilarityMatrix { n, values }
}
