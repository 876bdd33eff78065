//! Small dense linear-algebra helpers: eigenpairs of general real matrices
//! (eigenvalues from the characteristic polynomial machinery in nalgebra,
//! eigenvectors by shifted inverse iteration) and condition numbers.

use nalgebra::{Complex, DMatrix, DVector};

use crate::{Error, Result};

/// Eigenvalue with an eigenvector, complex in general.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex<f64>,
    pub vector: DVector<Complex<f64>>,
}

/// Eigenpairs of a general real matrix. Eigenvectors come from inverse
/// iteration with a slightly shifted LU solve; defective matrices surface as
/// a degenerate-spectrum error.
pub fn eigen_pairs(m: &DMatrix<f64>) -> Result<Vec<EigenPair>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Invalid("eigenpairs of a non-square matrix".into()));
    }
    let values = m.clone().complex_eigenvalues();
    let mc = m.map(|x| Complex::new(x, 0.0));
    let scale = m.amax().max(1.0);
    let mut pairs = Vec::with_capacity(n);
    for value in values.iter() {
        let vector = inverse_iteration(&mc, *value, scale)?;
        pairs.push(EigenPair {
            value: *value,
            vector,
        });
    }
    Ok(pairs)
}

fn inverse_iteration(
    mc: &DMatrix<Complex<f64>>,
    value: Complex<f64>,
    scale: f64,
) -> Result<DVector<Complex<f64>>> {
    let n = mc.nrows();
    // Shift slightly off the eigenvalue so the solve stays regular.
    let mut shift = 1e-10 * scale;
    for _ in 0..4 {
        let shifted = mc - DMatrix::from_diagonal_element(n, n, value + Complex::new(shift, shift));
        let lu = shifted.lu();
        let mut v = DVector::from_fn(n, |i, _| Complex::new(1.0 + i as f64 * 0.318, 0.071 * i as f64));
        v /= Complex::new(v.norm(), 0.0);
        let mut ok = true;
        for _ in 0..8 {
            match lu.solve(&v) {
                Some(w) => {
                    let norm = w.norm();
                    if !norm.is_finite() || norm == 0.0 {
                        ok = false;
                        break;
                    }
                    v = w / Complex::new(norm, 0.0);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let residual = (mc * &v - v.map(|c| c * value)).norm();
            if residual <= 1e-6 * scale {
                return Ok(v);
            }
        }
        shift *= 100.0;
    }
    Err(Error::DegenerateSpectrum {
        reason: format!("inverse iteration failed for eigenvalue {}", value),
    })
}

/// 2-norm condition number via singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_eigenpairs() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let pairs = eigen_pairs(&m).unwrap();
        let mut values: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((values[0] - 0.5).abs() < 1e-12);
        assert!((values[1] - 2.0).abs() < 1e-12);
        for p in &pairs {
            let r = (m.map(|x| Complex::new(x, 0.0)) * &p.vector
                - p.vector.map(|c| c * p.value))
            .norm();
            assert!(r < 1e-9, "residual {}", r);
        }
    }

    #[test]
    fn shear_matrix_eigenvector() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 0.0, 2.0]);
        let pairs = eigen_pairs(&m).unwrap();
        let unstable = pairs
            .iter()
            .find(|p| (p.value.re - 2.0).abs() < 1e-9)
            .unwrap();
        // Eigenvector for 2 is parallel to (1, 1.5).
        let v = &unstable.vector;
        let ratio = (v[1] / v[0]).re;
        assert!((ratio - 1.5).abs() < 1e-8);
    }

    #[test]
    fn rotation_matrix_complex_spectrum() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let pairs = eigen_pairs(&m).unwrap();
        for p in &pairs {
            assert!((p.value.norm() - 1.0).abs() < 1e-10);
            assert!(p.value.im.abs() > 0.9);
        }
    }

    #[test]
    fn condition_of_identity_is_one() {
        let m = DMatrix::identity(3, 3);
        assert!((condition_number(&m) - 1.0).abs() < 1e-12);
    }
}
