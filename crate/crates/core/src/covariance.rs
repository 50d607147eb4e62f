//! Closed-form evaluation of the fractional Brownian covariance kernel, its
//! partial derivatives, the pair-law determinant and the auxiliary scalar
//! functions used by the regression coefficients.
//!
//! Everything here is a pure function of (H, s, t); all state lives in the
//! caller.

use crate::model::{Error, HurstModel, Result, DIAGONAL_REL_TOL};

/// |x|^e with an explicit zero branch.
///
/// Evaluated as exp(e·ln|x|) so sub-normal inputs go through the log instead
/// of feeding garbage into a pow kernel.
#[inline]
pub fn abs_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        (e * x.abs().ln()).exp()
    }
}

/// |1+x|^e − 1, kept accurate for |x| ≪ 1 through ln_1p/exp_m1. The naive
/// route loses the entire small-x information to rounding in 1+x.
#[inline]
fn pow1p_m1(x: f64, e: f64) -> f64 {
    if x > -1.0 {
        (e * x.ln_1p()).exp_m1()
    } else {
        abs_pow(1.0 + x, e) - 1.0
    }
}

#[inline]
fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[inline]
fn check_off_diagonal(s: f64, t: f64) -> Result<()> {
    if (t - s).abs() < DIAGONAL_REL_TOL * s.abs().max(t.abs()) {
        return Err(Error::DiagonalPair { s, t });
    }
    Ok(())
}

#[inline]
fn check_ordered(s: f64, t: f64) -> Result<()> {
    if !(s > 0.0 && s < t) {
        return Err(Error::NotOrdered { s, t });
    }
    Ok(())
}

/// Covariance kernel: ½(t^{2H} + s^{2H} − |t−s|^{2H}). Total on s,t ≥ 0.
pub fn cov_r(m: &HurstModel, s: f64, t: f64) -> f64 {
    let e = m.two_h();
    0.5 * (abs_pow(t, e) + abs_pow(s, e) - abs_pow(t - s, e))
}

/// Marginal variance v(s) = s^{2H}.
pub fn variance(m: &HurstModel, s: f64) -> f64 {
    abs_pow(s, m.two_h())
}

/// v'(s) = 2H s^{2H−1}.
pub fn variance_deriv(m: &HurstModel, s: f64) -> f64 {
    m.two_h() * abs_pow(s, m.two_h() - 1.0)
}

/// φ(s,t) = R(s,t) − v(s), defined on the ordered simplex 0 < s < t where it
/// is strictly positive for H > 1/2.
pub fn phi(m: &HurstModel, s: f64, t: f64) -> Result<f64> {
    check_ordered(s, t)?;
    Ok(cov_r(m, s, t) - variance(m, s))
}

/// ∂R/∂s at (s,t): H s^{2H−1} + H sgn(t−s)|t−s|^{2H−1}. Off-diagonal only.
pub fn dr_ds(m: &HurstModel, s: f64, t: f64) -> Result<f64> {
    check_off_diagonal(s, t)?;
    let h = m.h();
    let e = m.two_h() - 1.0;
    Ok(h * abs_pow(s, e) + h * sgn(t - s) * abs_pow(t - s, e))
}

/// ∂R/∂t at (s,t); equals `dr_ds` with the roles of s and t exchanged.
pub fn dr_dt(m: &HurstModel, s: f64, t: f64) -> Result<f64> {
    dr_ds(m, t, s)
}

/// Mixed second partial ∂²R/∂t∂s = H(2H−1)|t−s|^{2H−2}.
///
/// Positive, diverges at the diagonal, integrable there since 2H−2 > −1.
pub fn d2r_dsdt(m: &HurstModel, s: f64, t: f64) -> Result<f64> {
    check_off_diagonal(s, t)?;
    Ok(m.h() * (m.two_h() - 1.0) * abs_pow(t - s, m.two_h() - 2.0))
}

/// Determinant Θ(s,t) = v(s)v(t) − R(s,t)² of the per-coordinate pair law.
pub fn theta_det(m: &HurstModel, s: f64, t: f64) -> Result<f64> {
    check_off_diagonal(s, t)?;
    if s <= 0.0 || t <= 0.0 {
        return Err(Error::DiagonalPair { s, t });
    }
    let r = cov_r(m, s, t);
    Ok(variance(m, s) * variance(m, t) - r * r)
}

/// The factor A(s,t) in the identity Θ = |t−s|^{2H} A(s,t):
/// A = ¼{2s^{2H} + 2t^{2H} − |t−s|^{2H} − (t^{2H}−s^{2H})²/|t−s|^{2H}}.
pub fn a_factor(m: &HurstModel, s: f64, t: f64) -> Result<f64> {
    check_off_diagonal(s, t)?;
    if s <= 0.0 || t <= 0.0 {
        return Err(Error::DiagonalPair { s, t });
    }
    let e = m.two_h();
    let vs = abs_pow(s, e);
    let vt = abs_pow(t, e);
    let gap = abs_pow(t - s, e);
    let diff = vt - vs;
    Ok(0.25 * (2.0 * vs + 2.0 * vt - gap - diff * diff / gap))
}

/// ϑ₁(x) = |1+x|^{2H} − 1 − |x|^{2H}.
pub fn vartheta1(m: &HurstModel, x: f64) -> f64 {
    pow1p_m1(x, m.two_h()) - abs_pow(x, m.two_h())
}

/// ϑ₂(x) = |1+x|^{2H} − 1 = ϑ₁(x) + |x|^{2H}.
pub fn vartheta2(m: &HurstModel, x: f64) -> f64 {
    pow1p_m1(x, m.two_h())
}

/// Φ(x,y) = |1+x|^{2H} − |1+(x−y)|^{2H} − 1 + |1−y|^{2H}.
///
/// Rescaled cross-moment of two disjoint increments; vanishes identically on
/// both axes. Grouped as ϑ₂(x) − ϑ₂(x−y) + ϑ₂(−y) so the first-order parts
/// cancel in the small terms rather than in the O(1) powers.
pub fn phi_det(m: &HurstModel, x: f64, y: f64) -> f64 {
    let e = m.two_h();
    pow1p_m1(x, e) - pow1p_m1(x - y, e) + pow1p_m1(-y, e)
}

/// d(δ,s,t) = (t^{2H}/2)ϑ₁(δ/t) − (|t−s|^{2H}/2)ϑ₁(δ/(t−s)) on 0 < s < t.
pub fn d_func(m: &HurstModel, delta: f64, s: f64, t: f64) -> Result<f64> {
    check_ordered(s, t)?;
    if delta <= 0.0 {
        return Err(Error::InvalidScale(delta));
    }
    let e = m.two_h();
    Ok(0.5 * abs_pow(t, e) * vartheta1(m, delta / t)
        - 0.5 * abs_pow(t - s, e) * vartheta1(m, delta / (t - s)))
}
