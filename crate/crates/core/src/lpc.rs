//! Linear-prediction numerics: autocorrelation, Levinson-Durbin, residual
//! extraction, all-pole resynthesis, and conversion between prediction
//! coefficients and pole positions.
//!
//! Coefficient convention: `coeffs[k]` is the predictor weight `a_{k+1}` in
//! `A(z) = 1 - sum_k a_k z^{-k}`, i.e. the one-step predictor is
//! `x_hat[n] = sum_k a_k x[n-k]`.

use num_complex::Complex64;
use thiserror::Error;

use crate::poly;

/// Frames with `r[0]` below this are treated as silent/degenerate and passed
/// through the anonymization pipeline unmodified.
pub const SILENT_FRAME_ENERGY: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LpcError {
    #[error("autocorrelation sequence too short: need {needed} lags, got {got}")]
    AutocorrTooShort { needed: usize, got: usize },
    #[error("autocorrelation sequence is not positive definite (stage {stage})")]
    NotPositiveDefinite { stage: usize },
    #[error("model order must be >= 1")]
    OrderZero,
    #[error("LPC order {order} must be smaller than the frame length {frame_len}")]
    OrderTooLarge { order: usize, frame_len: usize },
    #[error("initial state has length {got}, model order is {expected}")]
    BadStateLength { got: usize, expected: usize },
    #[error("synthesis filter is unstable (reflection coefficient {value:.6} at stage {stage})")]
    Unstable { stage: usize, value: f64 },
    #[error("pole set is not closed under conjugation near {pole}")]
    ConjugateClosure { pole: Complex64 },
    #[error(transparent)]
    Roots(#[from] poly::PolyError),
}

/// All-pole model: prediction coefficients and the residual RMS gain.
#[derive(Debug, Clone, PartialEq)]
pub struct LpcModel {
    coeffs: Vec<f64>,
    gain: f64,
}

impl LpcModel {
    pub fn new(coeffs: Vec<f64>, gain: f64) -> Self {
        Self { coeffs, gain }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Predictor coefficients `a_1 .. a_p`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// `A(z)` as a monic polynomial in descending powers of `z`:
    /// `[1, -a_1, ..., -a_p]`.
    pub fn polynomial(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.coeffs.len() + 1);
        p.push(1.0);
        p.extend(self.coeffs.iter().map(|&a| -a));
        p
    }

    /// Schur-Cohn stability test via the step-down recursion: the model is
    /// stable iff every reflection coefficient has magnitude < 1.
    pub fn check_stable(&self) -> Result<(), LpcError> {
        let mut b = self.polynomial();
        for m in (1..b.len()).rev() {
            let k = b[m];
            if k.abs() >= 1.0 {
                return Err(LpcError::Unstable { stage: m, value: k });
            }
            let denom = 1.0 - k * k;
            let prev: Vec<f64> = (0..m).map(|j| (b[j] - k * b[m - j]) / denom).collect();
            b = prev;
        }
        Ok(())
    }
}

/// Levinson-Durbin solution of the order-`p` normal equations.
#[derive(Debug, Clone)]
pub struct Levinson {
    /// Predictor coefficients `a_1 .. a_p` (empty when degenerate).
    pub coeffs: Vec<f64>,
    /// Reflection coefficients `k_1 .. k_p`, all strictly inside (-1, 1).
    pub reflection: Vec<f64>,
    /// Final prediction-error energy.
    pub error_energy: f64,
    /// Set when `r[0]` is below [`SILENT_FRAME_ENERGY`]; downstream passes
    /// such frames through unmodified.
    pub degenerate: bool,
}

/// Biased autocorrelation `r[k] = sum_n x[n] x[n+k]` for `k = 0..=max_lag`.
pub fn autocorrelate(frame: &[f64], max_lag: usize) -> Vec<f64> {
    let mut r = vec![0.0; max_lag + 1];
    for (k, rk) in r.iter_mut().enumerate() {
        if k >= frame.len() {
            break;
        }
        *rk = frame[k..]
            .iter()
            .zip(frame.iter())
            .map(|(&a, &b)| a * b)
            .sum();
    }
    r
}

/// Solve the Toeplitz normal equations for the given order.
pub fn levinson_durbin(autocorr: &[f64], order: usize) -> Result<Levinson, LpcError> {
    if autocorr.len() < order + 1 {
        return Err(LpcError::AutocorrTooShort {
            needed: order + 1,
            got: autocorr.len(),
        });
    }
    let r0 = autocorr[0];
    if r0 < SILENT_FRAME_ENERGY {
        return Ok(Levinson {
            coeffs: vec![0.0; order],
            reflection: vec![0.0; order],
            error_energy: 0.0,
            degenerate: true,
        });
    }
    let mut coeffs = vec![0.0; order];
    let mut reflection = Vec::with_capacity(order);
    let mut energy = r0;
    for i in 1..=order {
        let mut acc = autocorr[i];
        for j in 1..i {
            acc -= coeffs[j - 1] * autocorr[i - j];
        }
        if energy <= 0.0 {
            return Err(LpcError::NotPositiveDefinite { stage: i });
        }
        let k = acc / energy;
        if !k.is_finite() || k.abs() >= 1.0 {
            return Err(LpcError::NotPositiveDefinite { stage: i });
        }
        reflection.push(k);
        let half = i / 2;
        for j in 1..=half {
            let lo = coeffs[j - 1];
            let hi = coeffs[i - 1 - j];
            coeffs[j - 1] = lo - k * hi;
            if j != i - j {
                coeffs[i - 1 - j] = hi - k * lo;
            }
        }
        coeffs[i - 1] = k;
        energy *= 1.0 - k * k;
    }
    Ok(Levinson {
        coeffs,
        reflection,
        error_energy: energy,
        degenerate: false,
    })
}

/// Outcome of analyzing one frame.
#[derive(Debug, Clone)]
pub enum LpcAnalysis {
    Model(LpcModel),
    /// Frame energy below the silence threshold; nothing to model.
    Degenerate,
}

/// Autocorrelation-method LPC of a frame. Gain is the residual RMS,
/// `sqrt(error_energy / frame_len)`.
pub fn lpc_analyze(frame: &[f64], order: usize) -> Result<LpcAnalysis, LpcError> {
    if order == 0 {
        let r0: f64 = frame.iter().map(|x| x * x).sum();
        if r0 < SILENT_FRAME_ENERGY {
            return Ok(LpcAnalysis::Degenerate);
        }
        return Ok(LpcAnalysis::Model(LpcModel::new(
            vec![],
            (r0 / frame.len().max(1) as f64).sqrt(),
        )));
    }
    if order >= frame.len() {
        return Err(LpcError::OrderTooLarge {
            order,
            frame_len: frame.len(),
        });
    }
    let r = autocorrelate(frame, order);
    let sol = levinson_durbin(&r, order)?;
    if sol.degenerate {
        return Ok(LpcAnalysis::Degenerate);
    }
    let gain = (sol.error_energy.max(0.0) / frame.len() as f64).sqrt();
    Ok(LpcAnalysis::Model(LpcModel::new(sol.coeffs, gain)))
}

/// Prediction error `e[n] = x[n] - sum_k a_k x[n-k]` with zero initial state.
pub fn inverse_filter(frame: &[f64], model: &LpcModel) -> Vec<f64> {
    let a = model.coeffs();
    let mut out = Vec::with_capacity(frame.len());
    for n in 0..frame.len() {
        let mut e = frame[n];
        for (k, &ak) in a.iter().enumerate() {
            if n > k {
                e -= ak * frame[n - 1 - k];
            }
        }
        out.push(e);
    }
    out
}

/// All-pole resynthesis `y[n] = e[n] + sum_k a_k y[n-k]`.
///
/// `initial_state[k]` holds `y[-1-k]`; pass an empty slice for zero state.
/// The model must be stable (checked via Schur-Cohn), otherwise recursion
/// output grows without bound.
pub fn synthesis_filter(
    residual: &[f64],
    model: &LpcModel,
    initial_state: &[f64],
) -> Result<Vec<f64>, LpcError> {
    if !initial_state.is_empty() && initial_state.len() != model.order() {
        return Err(LpcError::BadStateLength {
            got: initial_state.len(),
            expected: model.order(),
        });
    }
    model.check_stable()?;
    let a = model.coeffs();
    let mut out = Vec::with_capacity(residual.len());
    for n in 0..residual.len() {
        let mut y = residual[n];
        for (k, &ak) in a.iter().enumerate() {
            let past = if n > k {
                out[n - 1 - k]
            } else if !initial_state.is_empty() {
                initial_state[k - n]
            } else {
                0.0
            };
            y += ak * past;
        }
        out.push(y);
    }
    Ok(out)
}

/// Multiset of filter poles, closed under complex conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    poles: Vec<Complex64>,
}

impl PoleSet {
    /// Validate conjugate closure and build the set. Real poles are stored
    /// with an exactly-zero imaginary part.
    pub fn new(poles: Vec<Complex64>) -> Result<Self, LpcError> {
        let mut canonical: Vec<Complex64> = Vec::with_capacity(poles.len());
        let mut upper: Vec<Complex64> = Vec::new();
        let mut lower: Vec<Complex64> = Vec::new();
        for p in poles {
            let tol = 1e-9 * p.norm().max(1.0);
            if p.im.abs() <= tol {
                canonical.push(Complex64::new(p.re, 0.0));
            } else if p.im > 0.0 {
                upper.push(p);
            } else {
                lower.push(p);
            }
        }
        // pair every upper-half pole with its mirror image
        for u in &upper {
            let want = u.conj();
            let tol = 1e-8 * u.norm().max(1.0);
            match lower.iter().position(|l| (l - want).norm() <= tol) {
                Some(idx) => {
                    lower.swap_remove(idx);
                    canonical.push(*u);
                    canonical.push(u.conj());
                }
                None => return Err(LpcError::ConjugateClosure { pole: *u }),
            }
        }
        if let Some(orphan) = lower.first() {
            return Err(LpcError::ConjugateClosure { pole: *orphan });
        }
        Ok(Self { poles: canonical })
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// One entry per real pole plus one per conjugate pair (the upper-half
    /// representative).
    pub fn representatives(&self) -> Vec<Complex64> {
        self.poles.iter().copied().filter(|p| p.im >= 0.0).collect()
    }
}

/// Roots of `z^p - a_1 z^{p-1} - ... - a_p`, the poles of `1/A(z)`.
///
/// Every returned pole carries a residual certificate from the root finder.
pub fn find_poles(model: &LpcModel) -> Result<PoleSet, LpcError> {
    if model.order() == 0 {
        return Err(LpcError::OrderZero);
    }
    let roots = poly::roots(&model.polynomial())?;
    PoleSet::new(roots)
}

/// Expand a conjugate-closed pole set back into prediction coefficients.
///
/// Conjugate pairs are multiplied out as real quadratics, so the resulting
/// coefficients are exactly real by construction. Gain is not represented in
/// a pole set; the returned model carries a nominal gain of 1.
pub fn poles_to_coeffs(poles: &PoleSet) -> LpcModel {
    let mut b = vec![1.0];
    for rep in poles.representatives() {
        if rep.im == 0.0 {
            b = mul(&b, &[1.0, -rep.re]);
        } else {
            b = mul(&b, &[1.0, -2.0 * rep.re, rep.norm_sqr()]);
        }
    }
    let coeffs = b[1..].iter().map(|&c| -c).collect();
    LpcModel::new(coeffs, 1.0)
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
