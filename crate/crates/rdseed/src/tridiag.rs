//! Tridiagonal direct solvers: Thomas algorithm and its cyclic variant
//! (Sherman-Morrison) for the periodic problems.

/// Scratch buffers so the per-step solves allocate nothing.
#[derive(Debug, Default, Clone)]
pub struct TriScratch {
    gam: Vec<f64>,
    z: Vec<f64>,
}

impl TriScratch {
    pub fn with_capacity(n: usize) -> Self {
        TriScratch {
            gam: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
        }
    }
}

/// Solve `A x = rhs` for tridiagonal `A` with sub/main/super diagonals
/// `(sub, diag, sup)`; `sub[i]` couples row `i` to `i-1` (sub[0] unused),
/// `sup[i]` couples row `i` to `i+1` (sup[n-1] unused). Overwrites `rhs`
/// with the solution.
pub fn solve_tridiagonal(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &mut [f64],
    scratch: &mut TriScratch,
) {
    let n = diag.len();
    assert!(n >= 2 && sub.len() == n && sup.len() == n && rhs.len() == n);
    let gam = &mut scratch.gam;
    gam.clear();
    gam.resize(n, 0.0);

    let mut bet = diag[0];
    assert!(bet != 0.0, "tridiagonal solve: zero pivot at row 0");
    rhs[0] /= bet;
    for i in 1..n {
        gam[i] = sup[i - 1] / bet;
        bet = diag[i] - sub[i] * gam[i];
        assert!(bet != 0.0, "tridiagonal solve: zero pivot at row {i}");
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / bet;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= gam[i + 1] * rhs[i + 1];
    }
}

/// Solve the cyclic system where row 0 additionally couples to row n-1
/// with coefficient `corner_top` and row n-1 to row 0 with `corner_bottom`.
/// Sherman-Morrison against the two plain Thomas solves.
pub fn solve_cyclic(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    corner_top: f64,
    corner_bottom: f64,
    rhs: &mut [f64],
    scratch: &mut TriScratch,
) {
    let n = diag.len();
    assert!(n >= 3);
    let gamma = -diag[0];
    // B = A - u v^T with u = gamma e0 + corner_bottom e_{n-1},
    // v = e0 + (corner_top / gamma) e_{n-1}
    let mut dmod = diag.to_vec();
    dmod[0] -= gamma;
    dmod[n - 1] -= corner_top * corner_bottom / gamma;

    let mut scratch2 = TriScratch::with_capacity(n);
    solve_tridiagonal(sub, &dmod, sup, rhs, &mut scratch2);

    let z = &mut scratch.z;
    z.clear();
    z.resize(n, 0.0);
    z[0] = gamma;
    z[n - 1] = corner_bottom;
    solve_tridiagonal(sub, &dmod, sup, z, &mut scratch2);

    let num = rhs[0] + corner_top * rhs[n - 1] / gamma;
    let den = 1.0 + z[0] + corner_top * z[n - 1] / gamma;
    let factor = num / den;
    for i in 0..n {
        rhs[i] -= factor * z[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_vec(sub: &[f64], diag: &[f64], sup: &[f64], x: &[f64]) -> Vec<f64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn thomas_recovers_known_solution() {
        let n = 64;
        let sub = vec![-1.0; n];
        let sup = vec![-1.0; n];
        let diag = vec![2.5; n];
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut rhs = mat_vec(&sub, &diag, &sup, &x_true);
        let mut scratch = TriScratch::default();
        solve_tridiagonal(&sub, &diag, &sup, &mut rhs, &mut scratch);
        for (a, b) in rhs.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cyclic_recovers_known_solution() {
        let n = 65;
        let sub = vec![-0.7; n];
        let sup = vec![-0.7; n];
        let diag = vec![3.1; n];
        let (ct, cb) = (-0.7, -0.7);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.61).cos()).collect();
        let mut rhs = mat_vec(&sub, &diag, &sup, &x_true);
        rhs[0] += ct * x_true[n - 1];
        rhs[n - 1] += cb * x_true[0];
        let mut scratch = TriScratch::default();
        solve_cyclic(&sub, &diag, &sup, ct, cb, &mut rhs, &mut scratch);
        for (a, b) in rhs.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-11);
        }
    }
}
