//! Real polynomial root finding via companion-matrix eigendecomposition.
//!
//! Roots come out of a Schur decomposition and are then polished with a few
//! Newton steps. Every root must pass a relative-residual certificate; the
//! tolerance is a contract, not a hope, so failures surface as errors instead
//! of silently bad poles.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Relative residual bound every reported root must satisfy.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("polynomial must have a nonzero leading coefficient")]
    ZeroLeadingCoefficient,
    #[error("polynomial has no roots to find (degree 0)")]
    DegreeZero,
    #[error("eigenvalue iteration failed to converge for coefficients {coeffs:?}")]
    NoConvergence { coeffs: Vec<f64> },
    #[error(
        "root {root} fails the residual certificate ({residual:.3e} > {tolerance:.3e}) for coefficients {coeffs:?}"
    )]
    ResidualCertificate {
        root: Complex64,
        residual: f64,
        tolerance: f64,
        coeffs: Vec<f64>,
    },
}

/// Evaluate a polynomial with coefficients in descending powers at `z`.
pub fn eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Horner evaluation of the polynomial and its derivative.
fn eval_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Residual |p(z)| scaled by the rounding magnitude of the Horner evaluation,
/// `sum_k |c_k| |z|^k`. Small values certify `z` as a backward-stable root.
pub fn relative_residual(coeffs: &[f64], z: Complex64) -> f64 {
    let r = z.norm();
    let mut scale = 0.0;
    for &c in coeffs {
        scale = scale * r + c.abs();
    }
    if scale == 0.0 {
        return 0.0;
    }
    eval(coeffs, z).norm() / scale
}

fn newton_polish(coeffs: &[f64], start: Complex64) -> Complex64 {
    let mut best = start;
    let mut best_res = relative_residual(coeffs, start);
    let mut z = start;
    for _ in 0..4 {
        let (p, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        z -= p / dp;
        let res = relative_residual(coeffs, z);
        if res < best_res {
            best = z;
            best_res = res;
        }
    }
    best
}

/// All complex roots of a real polynomial (descending-power coefficients).
///
/// The returned roots are exactly closed under conjugation: for every root
/// with positive imaginary part its mirror image is emitted, real roots are
/// snapped onto the axis. Order follows the eigenvalue computation.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>, PolyError> {
    if coeffs.is_empty() || coeffs[0] == 0.0 {
        return Err(PolyError::ZeroLeadingCoefficient);
    }
    if coeffs.len() == 1 {
        return Err(PolyError::DegreeZero);
    }
    // normalize to monic
    let lead = coeffs[0];
    let monic: Vec<f64> = coeffs.iter().map(|&c| c / lead).collect();
    let degree = monic.len() - 1;

    if degree == 1 {
        let root = Complex64::new(-monic[1], 0.0);
        certify(&monic, &[root])?;
        return Ok(vec![root]);
    }

    // Companion matrix: ones on the subdiagonal, negated coefficients in the
    // last column, characteristic polynomial z^p + c_1 z^{p-1} + ... + c_p.
    let companion = DMatrix::<f64>::from_fn(degree, degree, |r, c| {
        if c == degree - 1 {
            -monic[degree - r]
        } else if r == c + 1 {
            1.0
        } else {
            0.0
        }
    });

    let schur =
        nalgebra::linalg::Schur::try_new(companion, f64::EPSILON, 10_000).ok_or_else(|| {
            PolyError::NoConvergence {
                coeffs: coeffs.to_vec(),
            }
        })?;
    let eigen = schur.complex_eigenvalues();

    // Polish each upper-half representative, then mirror so the output is
    // conjugate-closed bit for bit. The Schur form of a real matrix already
    // yields exact pairs; polishing must not break that.
    let real_tol = 1e-12;
    let mut out: Vec<Complex64> = Vec::with_capacity(degree);
    for ev in eigen.iter() {
        if ev.im.abs() <= real_tol * ev.norm().max(1.0) {
            // real root: polish along the real axis
            let z = newton_polish(&monic, Complex64::new(ev.re, 0.0));
            out.push(Complex64::new(z.re, 0.0));
        } else if ev.im > 0.0 {
            let z = newton_polish(&monic, *ev);
            let z = if z.im <= 0.0 { *ev } else { z };
            out.push(z);
            out.push(z.conj());
        }
    }
    if out.len() != degree {
        // conjugate bookkeeping went wrong; fall back to raw eigenvalues
        out = eigen.iter().copied().collect();
    }
    certify(&monic, &out)?;
    Ok(out)
}

fn certify(monic: &[f64], roots: &[Complex64]) -> Result<(), PolyError> {
    for &root in roots {
        let residual = relative_residual(monic, root);
        if residual.is_nan() || residual > RESIDUAL_TOLERANCE {
            return Err(PolyError::ResidualCertificate {
                root,
                residual,
                tolerance: RESIDUAL_TOLERANCE,
                coeffs: monic.to_vec(),
            });
        }
    }
    Ok(())
}
