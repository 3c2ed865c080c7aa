//! Rate constants `sigma_1 .. sigma_8` and the envelope `Delta^r <= (c/sigma)/(r - offset)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::certificate::RateCertificate;
use crate::error::{BsumError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// BSUM, G-S.
    Sigma1,
    /// BSUM, essentially cyclic with period T.
    Sigma2,
    /// BSUM, G-So(q) or MBI.
    Sigma3,
    /// Single-block SUM.
    Sigma4,
    /// BCM / BCPG, G-S, Lipschitz `g`.
    Sigma5,
    /// BCM / BCPG, essentially cyclic.
    Sigma6,
    /// BCM, G-S, composite least squares.
    Sigma7,
    /// BCM, G-S, L2-SVM.
    Sigma8,
}

impl Theorem {
    pub const ALL: [Theorem; 8] = [
        Theorem::Sigma1,
        Theorem::Sigma2,
        Theorem::Sigma3,
        Theorem::Sigma4,
        Theorem::Sigma5,
        Theorem::Sigma6,
        Theorem::Sigma7,
        Theorem::Sigma8,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Theorem::Sigma1 => "sigma1",
            Theorem::Sigma2 => "sigma2",
            Theorem::Sigma3 => "sigma3",
            Theorem::Sigma4 => "sigma4",
            Theorem::Sigma5 => "sigma5",
            Theorem::Sigma6 => "sigma6",
            Theorem::Sigma7 => "sigma7",
            Theorem::Sigma8 => "sigma8",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Theorem {
    type Err = BsumError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace(['_', '-'], "");
        Theorem::ALL
            .into_iter()
            .find(|th| th.id() == t)
            .ok_or_else(|| BsumError::Parameter(format!("unknown rate constant '{s}' (expected sigma1..sigma8)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConstant<F> {
    pub sigma: F,
    pub c: F,
    /// The envelope applies for `r > offset`.
    pub offset: usize,
}

impl<F: Scalar> RateConstant<F> {
    /// Envelope value at `r`, or `None` where the bound does not apply.
    pub fn envelope(&self, r: usize) -> Option<F> {
        (r > self.offset).then(|| self.c / self.sigma / F::of_usize(r - self.offset))
    }
}

/// `c = max{4 sigma - 2, f(x^1) - f*, 2}`.
pub fn c_constant<F: Scalar>(sigma: F, f_first: F, f_star: F) -> F {
    (F::of(4.0) * sigma - F::two()).max(f_first - f_star).max(F::two())
}

fn positive<F: Scalar>(sigma: F, what: &str) -> Result<F> {
    if sigma.is_finite() && sigma > F::zero() {
        Ok(sigma)
    } else {
        Err(BsumError::Parameter(format!("{what}: rate constant is not positive ({})", sigma.to_f64_lossy())))
    }
}

pub fn sigma_for<F: Scalar>(theorem: Theorem, cert: &RateCertificate<F>) -> Result<RateConstant<F>> {
    let k = F::of_usize(cert.blocks);
    let t = F::of_usize(cert.period);
    let r2 = cert.r.value * cert.r.value;
    let gamma = cert.gamma.value;
    let g2 = cert.g_max.value * cert.g_max.value;
    let m = cert.m.value;
    let (sigma, offset) = match theorem {
        Theorem::Sigma1 => (gamma / (k * g2 * r2), 0),
        Theorem::Sigma2 => (gamma / (k * t * r2 * g2), cert.period),
        Theorem::Sigma3 => {
            let q = F::of(cert.q.unwrap_or(1.0));
            let a = cert.q_grad.value + cert.l_h.value;
            let l = cert.l_max.value;
            (gamma * q / (F::two() * k * (a * a + l * l * k * r2)), 0)
        }
        Theorem::Sigma4 => {
            let l = cert
                .sum_lipschitz
                .map(|t| t.value)
                .ok_or_else(|| BsumError::MissingInput("sigma4 needs a single-block surrogate constant L".into()))?;
            (F::one() / (F::of(32.0) * r2 * l), 1)
        }
        Theorem::Sigma5 => (F::one() / (F::two() * m * k * k * r2), 0),
        Theorem::Sigma6 => (F::one() / (F::two() * k * k * t * r2 * m), cert.period),
        Theorem::Sigma7 => {
            let c = cert
                .composite
                .ok_or_else(|| BsumError::MissingInput("sigma7 needs composite least-squares structure".into()))?;
            (c.eta_min / (F::two() * k * F::of_usize(c.terms) * r2 * c.coupling_max), 0)
        }
        Theorem::Sigma8 => {
            let s = cert.svm.ok_or_else(|| BsumError::MissingInput("sigma8 needs L2-SVM structure".into()))?;
            let b = s.block_norm_sum;
            (F::one() / (F::of(8.0) * b * b * k * F::of_usize(s.rows) * r2), 0)
        }
    };
    let sigma = positive(sigma, theorem.id())?;
    Ok(RateConstant { sigma, c: c_constant(sigma, cert.f_first, cert.f_star), offset })
}
