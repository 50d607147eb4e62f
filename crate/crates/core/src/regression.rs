//! Gaussian linear-regression coefficients for the conditional law of the
//! rescaled increments given (B_s, B_t): the value-basis weights λᵢⱼ, the
//! increment-basis weights ηᵢⱼ, both at finite scale and in the vanishing
//! scale limit.

use crate::covariance::{
    a_factor, abs_pow, cov_r, d_func, dr_ds, dr_dt, phi, theta_det, variance, variance_deriv,
    vartheta1,
};
use crate::model::{CoeffQuad, Error, HurstModel, Result};

/// Covariances of the two increments against the conditioning values:
/// entries (11,12) pair B_{s,s+ε} against (B_s, B_t), entries (21,22) pair
/// B_{t,t+δ} against them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementCovs {
    pub n11: f64,
    pub n12: f64,
    pub n21: f64,
    pub n22: f64,
}

fn check_scales(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidScale(eps));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidScale(delta));
    }
    Ok(())
}

/// Increment/value covariances in the (B_s, B_t) basis, as plain kernel
/// differences. Total on s,t ≥ 0.
pub fn n_entries(m: &HurstModel, eps: f64, delta: f64, s: f64, t: f64) -> Result<IncrementCovs> {
    check_scales(eps, delta)?;
    Ok(IncrementCovs {
        n11: cov_r(m, s, s + eps) - variance(m, s),
        n12: cov_r(m, s + eps, t) - cov_r(m, s, t),
        n21: cov_r(m, s, t + delta) - cov_r(m, s, t),
        n22: cov_r(m, t + delta, t) - variance(m, t),
    })
}

/// Increment/increment covariances in the (B_s, B_{s,t}) basis, evaluated
/// through ϑ₁ only. Ordered simplex 0 < s < t.
///
/// The ϑ₁-only route avoids the cancellation the ϑ₂ difference suffers when
/// s approaches t.
pub fn o_entries(m: &HurstModel, eps: f64, delta: f64, s: f64, t: f64) -> Result<IncrementCovs> {
    check_scales(eps, delta)?;
    if !(s > 0.0 && s < t) {
        return Err(Error::NotOrdered { s, t });
    }
    let e = m.two_h();
    let gap = abs_pow(t - s, e);
    Ok(IncrementCovs {
        n11: 0.5 * abs_pow(s, e) * vartheta1(m, eps / s),
        n12: -0.5 * gap * vartheta1(m, -eps / (t - s)),
        n21: d_func(m, delta, s, t)?,
        n22: 0.5 * gap * vartheta1(m, delta / (t - s)),
    })
}

/// Finite-scale regression weights in the value basis:
/// Z¹ = λ₁₁(ε)B_s + λ₁₂(ε)B_t and Z² = λ₂₁(δ)B_s + λ₂₂(δ)B_t.
pub fn lambda_finite(m: &HurstModel, eps: f64, delta: f64, s: f64, t: f64) -> Result<CoeffQuad> {
    let n = n_entries(m, eps, delta, s, t)?;
    let theta = theta_det(m, s, t)?;
    let r = cov_r(m, s, t);
    let vs = variance(m, s);
    let vt = variance(m, t);
    Ok(CoeffQuad {
        c11: (n.n11 * vt - n.n12 * r) / theta,
        c12: (n.n12 * vs - n.n11 * r) / theta,
        c21: (n.n21 * vt - n.n22 * r) / theta,
        c22: (n.n22 * vs - n.n21 * r) / theta,
    })
}

/// Vanishing-scale limits λᵢⱼ(s,t) = lim (1/ε)λᵢⱼ(ε,s,t), in closed form via
/// the kernel derivatives.
pub fn lambda_limit(m: &HurstModel, s: f64, t: f64) -> Result<CoeffQuad> {
    let theta = theta_det(m, s, t)?;
    let r = cov_r(m, s, t);
    let vs = variance(m, s);
    let vt = variance(m, t);
    let half_dvs = 0.5 * variance_deriv(m, s);
    let half_dvt = 0.5 * variance_deriv(m, t);
    let rs = dr_ds(m, s, t)?;
    let rt = dr_dt(m, s, t)?;
    Ok(CoeffQuad {
        c11: (half_dvs * vt - rs * r) / theta,
        c12: (rs * vs - half_dvs * r) / theta,
        c21: (rt * vt - half_dvt * r) / theta,
        c22: (half_dvt * vs - rt * r) / theta,
    })
}

/// Θ·η at finite scale: the increment-basis weights before dividing by the
/// pair determinant. Exposed separately because the envelope bounds work
/// with Θ² in the denominator.
pub fn eta_finite_theta_scaled(
    m: &HurstModel,
    eps: f64,
    delta: f64,
    s: f64,
    t: f64,
) -> Result<CoeffQuad> {
    let o = o_entries(m, eps, delta, s, t)?;
    let gap = abs_pow(t - s, m.two_h());
    let vs = variance(m, s);
    let ph = phi(m, s, t)?;
    Ok(CoeffQuad {
        c11: o.n11 * gap - o.n12 * ph,
        c12: o.n12 * vs - o.n11 * ph,
        c21: o.n21 * gap - o.n22 * ph,
        c22: o.n22 * vs - o.n21 * ph,
    })
}

/// Finite-scale regression weights in the increment basis:
/// Z¹ = η₁₁(ε)B_s + η₁₂(ε)B_{s,t} and Z² = η₂₁(δ)B_s + η₂₂(δ)B_{s,t}.
/// Ordered simplex only; the other simplex is reached by exchanging roles.
pub fn eta_finite(m: &HurstModel, eps: f64, delta: f64, s: f64, t: f64) -> Result<CoeffQuad> {
    let theta = theta_det(m, s, t)?;
    Ok(eta_finite_theta_scaled(m, eps, delta, s, t)?.scale(1.0 / theta))
}

/// Vanishing-scale limits of the increment-basis weights, closed form with
/// prefactor H/Θ.
pub fn eta_limit(m: &HurstModel, s: f64, t: f64) -> Result<CoeffQuad> {
    if !(s > 0.0 && s < t) {
        return Err(Error::NotOrdered { s, t });
    }
    let theta = theta_det(m, s, t)?;
    let e = m.two_h();
    let h = m.h();
    let u = t - s;
    let gap = abs_pow(u, e);
    let gap1 = abs_pow(u, e - 1.0);
    let vs = variance(m, s);
    let s1 = abs_pow(s, e - 1.0);
    let t1 = abs_pow(t, e - 1.0);
    let ph = phi(m, s, t)?;
    let pre = h / theta;
    Ok(CoeffQuad {
        c11: pre * (s1 * gap - ph * gap1),
        c12: pre * (vs * gap1 - s1 * ph),
        c21: pre * ((t1 - gap1) * gap - ph * gap1),
        c22: pre * (vs * gap1 - ph * (t1 - gap1)),
    })
}

/// The ratio (s^{2H} ∧ t^{2H}) / A(s,t); bounded by 2^{2−2H}/(4−2^{2H}).
pub fn fh_ratio(m: &HurstModel, s: f64, t: f64) -> Result<f64> {
    let a = a_factor(m, s, t)?;
    Ok(variance(m, s).min(variance(m, t)) / a.abs())
}
