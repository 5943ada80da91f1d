//! Bilinear rectangle: shape-function gradients and the unit-modulus stiffness.

// natural coordinates of the four nodes, counterclockwise from bottom-left
const CORNERS: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];

/// Strain-displacement matrix at natural point `(xi, eta)`.
fn b_matrix(hx: f64, hy: f64, xi: f64, eta: f64) -> [[f64; 8]; 3] {
    let mut b = [[0.0; 8]; 3];
    for (a, &(xa, ya)) in CORNERS.iter().enumerate() {
        let dx = 0.25 * xa * (1.0 + ya * eta) * 2.0 / hx;
        let dy = 0.25 * ya * (1.0 + xa * xi) * 2.0 / hy;
        b[0][2 * a] = dx;
        b[1][2 * a + 1] = dy;
        b[2][2 * a] = dy;
        b[2][2 * a + 1] = dx;
    }
    b
}

pub(super) fn centroid_b(hx: f64, hy: f64) -> [[f64; 8]; 3] {
    b_matrix(hx, hy, 0.0, 0.0)
}

/// Element stiffness for `E = 1`, by 2 x 2 Gauss quadrature.
pub(super) fn stiffness(hx: f64, hy: f64, nu: f64, thickness: f64) -> [[f64; 8]; 8] {
    let c = 1.0 / (1.0 - nu * nu);
    let d = [
        [c, c * nu, 0.0],
        [c * nu, c, 0.0],
        [0.0, 0.0, c * 0.5 * (1.0 - nu)],
    ];
    let gp = 1.0 / 3f64.sqrt();
    let det = 0.25 * hx * hy * thickness;
    let mut k = [[0.0; 8]; 8];
    for xi in [-gp, gp] {
        for eta in [-gp, gp] {
            let b = b_matrix(hx, hy, xi, eta);
            let mut db = [[0.0; 8]; 3];
            for r in 0..3 {
                for col in 0..8 {
                    db[r][col] = (0..3).map(|m| d[r][m] * b[m][col]).sum();
                }
            }
            for (i, row) in k.iter_mut().enumerate() {
                for (j, kij) in row.iter_mut().enumerate() {
                    *kij += det * (0..3).map(|r| b[r][i] * db[r][j]).sum::<f64>();
                }
            }
        }
    }
    k
}
