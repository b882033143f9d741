//! Matrix Chernoff constants and sample-size calculators.
//!
//! All logarithms are natural.

use crate::basis::FeatureBasis;
use crate::error::{Error, Result};
use crate::sampler::WeightFunction;

/// Default number of grid points for [`k_constant`].
pub const DEFAULT_K_GRID: usize = 100_000;

/// `c_δ = δ + (1−δ) ln(1−δ)` and `d_δ = −δ + (1+δ) ln(1+δ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffConstants {
    pub delta: f64,
    pub c_delta: f64,
    pub d_delta: f64,
}

impl ChernoffConstants {
    pub fn new(delta: f64) -> Result<Self> {
        check_open_unit("δ", delta)?;
        // ln_1p keeps both constants accurate for small δ.
        let c_delta = delta + (1.0 - delta) * (-delta).ln_1p();
        let d_delta = -delta + (1.0 + delta) * delta.ln_1p();
        Ok(Self {
            delta,
            c_delta,
            d_delta,
        })
    }
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("α must lie in (0, 1], got {alpha}")))
    }
}

fn ceil_count(v: f64) -> Result<u128> {
    if !v.is_finite() || v >= u128::MAX as f64 {
        return Err(Error::Numeric(format!(
            "sample size {v} does not fit a 128-bit count"
        )));
    }
    Ok(v.ceil().max(0.0) as u128)
}

/// `⌈c_δ⁻¹ α⁻¹ m ln(m/η)⌉`: i.i.d. samples from `ν = (α w_m + (1−α) h) μ`
/// that give `P(λ_min(Gʷ) < 1 − δ) ≤ η`.
pub fn iid_sample_size(m: usize, delta: f64, eta: f64, alpha: f64) -> Result<u128> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    check_open_unit("η", eta)?;
    check_alpha(alpha)?;
    let c = ChernoffConstants::new(delta)?.c_delta;
    let m = m as f64;
    ceil_count(m * (m / eta).ln() / (c * alpha))
}

/// `m + iid_sample_size(m, δ, η, α)`: the corresponding size for volume
/// sampling `γ_n^ν`.
pub fn volume_sample_size(m: usize, delta: f64, eta: f64, alpha: f64) -> Result<u128> {
    let iid = iid_sample_size(m, delta, eta, alpha)?;
    iid.checked_add(m as u128)
        .ok_or_else(|| Error::Numeric("sample size overflow".into()))
}

/// Grid estimate of `K_{w,m} = sup_x w(x)⁻¹ ‖φ(x)‖²` over the effective
/// support. Being a maximum over finitely many points it is a lower bound on
/// the true supremum.
pub fn k_constant(basis: &FeatureBasis, w: &WeightFunction, grid: usize) -> Result<f64> {
    if grid < 2 {
        return Err(Error::Domain("k_constant needs at least two grid points".into()));
    }
    let (lo, hi) = basis.effective_support();
    let mut phi = vec![0.0; basis.dim()];
    let mut k: f64 = 0.0;
    for i in 0..grid {
        let x = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        basis.eval_into(x, &mut phi);
        let wx = w.eval(basis, x);
        if wx > 0.0 {
            k = k.max(crate::basis::squared_norm(&phi) / wx);
        }
    }
    Ok(k)
}

/// `m exp(−c_δ n / m)`: bound on `P(λ_min(G^{w_m}) < 1 − δ)` for repeated
/// DPP. Only valid if the DPP tail-dominance conjecture holds.
pub fn dpp_chernoff_failure(m: usize, n: usize, delta: f64) -> Result<f64> {
    if m == 0 || n < m {
        return Err(Error::Domain(format!("need 1 ≤ m ≤ n, got m = {m}, n = {n}")));
    }
    let c = ChernoffConstants::new(delta)?.c_delta;
    Ok(m as f64 * (-c * n as f64 / m as f64).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundScheme {
    IidOptimal,
    VolumeSampling,
    /// Conditional on the DPP tail-dominance conjecture.
    RepeatedDpp,
}

impl BoundScheme {
    pub fn name(&self) -> &'static str {
        match self {
            Self::IidOptimal => "iid-optimal",
            Self::VolumeSampling => "volume",
            Self::RepeatedDpp => "repeated-dpp",
        }
    }
}

/// Raw Chernoff failure bound for one scheme; may exceed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryBound {
    pub scheme: BoundScheme,
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    pub eta: f64,
    pub delta: f64,
    /// `1 + (α⁻¹ − 1) m / n`.
    pub beta: f64,
    pub predicted_failure_prob: f64,
}

impl TheoryBound {
    pub fn new(scheme: BoundScheme, m: usize, n: usize, alpha: f64, delta: f64, eta: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Domain("m and n must be positive".into()));
        }
        check_alpha(alpha)?;
        check_open_unit("η", eta)?;
        let c = ChernoffConstants::new(delta)?.c_delta;
        let (mf, nf) = (m as f64, n as f64);
        let predicted_failure_prob = match scheme {
            BoundScheme::IidOptimal => mf * (-c * nf * alpha / mf).exp(),
            BoundScheme::VolumeSampling => {
                if n < m {
                    return Err(Error::Underdetermined { n, m });
                }
                mf * (-c * (nf - mf) * alpha / mf).exp()
            }
            BoundScheme::RepeatedDpp => dpp_chernoff_failure(m, n, delta)?,
        };
        Ok(Self {
            scheme,
            m,
            n,
            alpha,
            eta,
            delta,
            beta: 1.0 + (1.0 / alpha - 1.0) * mf / nf,
            predicted_failure_prob,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn c_delta_values() {
        let c = ChernoffConstants::new(0.5).unwrap().c_delta;
        assert!((c - (0.5 + 0.5 * 0.5f64.ln())).abs() < 1e-15);
        assert!((c - 0.153_426).abs() < 5e-7);
        let c = ChernoffConstants::new(0.75).unwrap().c_delta;
        assert!((c - 0.403_426).abs() < 5e-7);
        let c = ChernoffConstants::new(0.3).unwrap().c_delta;
        assert!((c - 0.050_327_5).abs() < 5e-7);
        assert!((0.045..=0.09).contains(&c));
    }

    #[test]
    fn delta_domain() {
        assert!(ChernoffConstants::new(0.0).is_err());
        assert!(ChernoffConstants::new(1.0).is_err());
        assert!(ChernoffConstants::new(f64::NAN).is_err());
    }

    #[test]
    fn iid_size_example() {
        // 20 ln 40 / 0.403426 = 182.88…
        assert_eq!(iid_sample_size(20, 0.75, 0.5, 1.0).unwrap(), 183);
        assert_eq!(volume_sample_size(20, 0.75, 0.5, 1.0).unwrap(), 203);
    }

    #[test]
    fn alpha_half_doubles() {
        let a = iid_sample_size(20, 0.75, 0.5, 1.0).unwrap() as i128;
        let b = iid_sample_size(20, 0.75, 0.5, 0.5).unwrap() as i128;
        assert!((b - 2 * a).abs() <= 1);
    }

    #[test]
    fn volume_size_is_additive() {
        for m in [1usize, 3, 17] {
            assert_eq!(
                volume_sample_size(m, 0.4, 0.1, 0.7).unwrap(),
                m as u128 + iid_sample_size(m, 0.4, 0.1, 0.7).unwrap()
            );
        }
    }

    #[test]
    fn tiny_delta_gives_huge_count() {
        let n = volume_sample_size(20, 1e-6, 0.5, 1.0).unwrap();
        assert!(n > 1_000_000_000);
    }

    #[test]
    fn k_constant_examples() {
        let b = FeatureBasis::hermite(7).unwrap();
        let k = k_constant(&b, &WeightFunction::Christoffel, 1000).unwrap();
        assert!((k - 7.0).abs() < 1e-10);
        let b = FeatureBasis::legendre(2).unwrap();
        let k = k_constant(&b, &WeightFunction::Unit, 1001).unwrap();
        assert!((k - 4.0).abs() < 1e-12);
        let b = FeatureBasis::legendre(6).unwrap();
        let w = WeightFunction::mixture(0.25).unwrap();
        let k = k_constant(&b, &w, 10_000).unwrap();
        assert!(k <= 6.0 / 0.25 + 1e-9);
        assert!(k >= 6.0);
    }

    #[test]
    fn christoffel_k_is_pointwise() {
        let b = FeatureBasis::legendre(9).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.71, 1.0] {
            let r = crate::basis::squared_norm(&b.eval(x)) / b.christoffel_density(x);
            assert!((r - 9.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dpp_failure_example() {
        let v = dpp_chernoff_failure(10, 10, 0.75).unwrap();
        assert!((v - 10.0 * (-0.403_426_4f64).exp()).abs() < 1e-5);
        assert!((v - 6.680).abs() < 1e-3);
        assert!(dpp_chernoff_failure(10, 9, 0.75).is_err());
        let one = dpp_chernoff_failure(1, 1, 0.5).unwrap();
        assert!(one > 0.0 && one <= 1.0);
    }

    #[test]
    fn theory_bound_beta() {
        let tb = TheoryBound::new(BoundScheme::VolumeSampling, 10, 40, 0.5, 0.75, 0.1).unwrap();
        assert!((tb.beta - 1.25).abs() < 1e-15);
        assert!(tb.predicted_failure_prob >= 0.0 && tb.predicted_failure_prob <= 10.0);
    }

    proptest! {
        #[test]
        fn chernoff_chain(delta in 1e-6f64..0.999_999) {
            let c = ChernoffConstants::new(delta).unwrap();
            let d2 = delta * delta;
            prop_assert!(5.0 / 13.0 * d2 <= c.d_delta * (1.0 + 1e-12));
            prop_assert!(c.d_delta <= d2 / 2.0 * (1.0 + 1e-12));
            prop_assert!(d2 / 2.0 <= c.c_delta * (1.0 + 1e-12));
            prop_assert!(c.c_delta <= d2 * (1.0 + 1e-12));
        }

        #[test]
        fn sizes_monotone(m in 1usize..60, delta in 0.05f64..0.95, eta in 0.01f64..0.9, alpha in 0.05f64..1.0) {
            let base = iid_sample_size(m, delta, eta, alpha).unwrap();
            prop_assert!(iid_sample_size(m + 1, delta, eta, alpha).unwrap() >= base);
            prop_assert!(iid_sample_size(m, delta, (eta * 1.05).min(0.99), alpha).unwrap() <= base);
            prop_assert!(iid_sample_size(m, delta, eta, (alpha * 1.05).min(1.0)).unwrap() <= base);
            prop_assert!(iid_sample_size(m, delta, eta / 2.0, alpha).unwrap() >= base);
            let vbase = volume_sample_size(m, delta, eta, alpha).unwrap();
            prop_assert!(volume_sample_size(m + 1, delta, eta, alpha).unwrap() >= vbase);
            prop_assert!(volume_sample_size(m, delta, eta, (alpha * 1.05).min(1.0)).unwrap() <= vbase);
        }

        #[test]
        fn dpp_failure_decreasing(m in 1usize..30, extra in 0usize..200, delta in 0.05f64..0.95) {
            let a = dpp_chernoff_failure(m, m + extra, delta).unwrap();
            let b = dpp_chernoff_failure(m, m + extra + 1, delta).unwrap();
            prop_assert!(b < a);
            prop_assert!(a > 0.0);
        }
    }
}
