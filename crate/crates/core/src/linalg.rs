//! Small shared linear-algebra helpers.

use nalgebra::DMatrix;

/// Reduced-rank factor `A` of a symmetric PSD matrix (`C = A A*`), keeping
/// eigenvalues above `1e-12` of the largest. Rows listed in `zero_rows` are
/// pinned to exactly zero so degenerate components stay identically zero
/// rather than numerically small.
pub(crate) fn psd_factor(c: &DMatrix<f64>, zero_rows: Option<&[bool]>) -> DMatrix<f64> {
    let n = c.nrows();
    let eigen = c.clone().symmetric_eigen();
    let max = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = 1e-12 * max.max(f64::MIN_POSITIVE);
    let kept: Vec<usize> = (0..n).filter(|&i| eigen.eigenvalues[i] > cutoff).collect();
    let mut a = DMatrix::zeros(n, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let scale = eigen.eigenvalues[i].sqrt();
        for r in 0..n {
            a[(r, col)] = eigen.eigenvectors[(r, i)] * scale;
        }
    }
    if let Some(flags) = zero_rows {
        for (r, &z) in flags.iter().enumerate() {
            if z {
                for col in 0..a.ncols() {
                    a[(r, col)] = 0.0;
                }
            }
        }
    }
    a
}
