//! Bootstrap engines, second-order bootstrap draws and critical values.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::derivative::{numerical_deriv_ch, DerivEstimator, DerivKind, QuadDirection, StructuralCh};
use crate::error::{validation, Error, Result};
use crate::moments::QuadMomentModel;
use crate::sphereopt::IdentifiedSetEstimate;

/// Number of bootstrap replicates used unless a caller says otherwise.
pub const DEFAULT_B: usize = 200;

/// How bootstrap samples are drawn from the aligned rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BootstrapScheme {
    /// Efron's multinomial resampling of rows.
    #[default]
    Iid,
    /// Overlapping blocks of `block_len` consecutive rows, starts drawn
    /// uniformly, concatenated and truncated to `T`.
    MovingBlock { block_len: usize },
}

impl BootstrapScheme {
    /// Moving-block scheme with the default length `⌈T^{1/3}⌉`.
    pub fn moving_block_default(t: usize) -> Self {
        BootstrapScheme::MovingBlock {
            block_len: ((t as f64).cbrt().ceil() as usize).max(1),
        }
    }
}

impl fmt::Display for BootstrapScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BootstrapScheme::Iid => write!(f, "iid"),
            BootstrapScheme::MovingBlock { block_len } => write!(f, "mbb:{block_len}"),
        }
    }
}

impl FromStr for BootstrapScheme {
    type Err = Error;

    /// Accepts `iid` or `mbb:<block_len>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "iid" {
            return Ok(BootstrapScheme::Iid);
        }
        if let Some(rest) = s.strip_prefix("mbb:").or_else(|| s.strip_prefix("moving_block:")) {
            let block_len: usize = rest
                .parse()
                .map_err(|_| Error::Parse(format!("bad block length in '{s}'")))?;
            if block_len == 0 {
                return Err(Error::Parse("block length must be >= 1".into()));
            }
            return Ok(BootstrapScheme::MovingBlock { block_len });
        }
        Err(Error::Parse(format!("unknown bootstrap scheme '{s}' (iid | mbb:<len>)")))
    }
}

/// Row indices of one bootstrap sample of size `t`.
pub fn resample_indices<R: Rng + ?Sized>(
    scheme: &BootstrapScheme,
    t: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if t == 0 {
        return validation("cannot resample an empty sample");
    }
    match *scheme {
        BootstrapScheme::Iid => Ok((0..t).map(|_| rng.random_range(0..t)).collect()),
        BootstrapScheme::MovingBlock { block_len } => {
            if block_len == 0 || block_len > t {
                return validation(format!(
                    "block length {block_len} must lie in 1..={t}"
                ));
            }
            let n_starts = t - block_len + 1;
            let mut out = Vec::with_capacity(t);
            while out.len() < t {
                let start = rng.random_range(0..n_starts);
                let take = block_len.min(t - out.len());
                out.extend(start..start + take);
            }
            Ok(out)
        }
    }
}

/// Sorted bootstrap replicates of a statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    values: Vec<f64>,
    scheme: BootstrapScheme,
}

impl BootstrapDraws {
    pub fn new(mut values: Vec<f64>, scheme: BootstrapScheme) -> Result<Self> {
        if values.is_empty() {
            return validation("need at least one bootstrap draw");
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Numerical("bootstrap draw is NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values, scheme })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn b(&self) -> usize {
        self.values.len()
    }
    pub fn scheme(&self) -> BootstrapScheme {
        self.scheme
    }
}

/// Smallest `c` whose empirical CDF reaches `1 − α`: the `⌈(1−α)B⌉`-th
/// order statistic.
pub fn critical_value(draws: &BootstrapDraws, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return validation(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    let b = draws.b();
    // (1 − α)B carries representation error for α like 0.05; snap it.
    let target = (1.0 - alpha) * b as f64;
    let rank = ((target - 1e-9 * b as f64).ceil() as usize).clamp(1, b);
    Ok(draws.values[rank - 1])
}

/// `r_n² {φ(θ̂*) − φ(θ̂)}`.
pub fn standard_second_order_draw(phi_star: f64, phi_hat: f64, r_sq: f64) -> f64 {
    r_sq * (phi_star - phi_hat)
}

/// Babu-corrected draw for `φ(θ) = θ²`: subtracting `φ'_{θ̂}(θ̂* − θ̂) = 2θ̂(θ̂* − θ̂)`
/// leaves `n (θ̂* − θ̂)²`, computed as `(√n (θ̂* − θ̂))²`.
pub fn babu_corrected_draw_squared_mean(theta_star: f64, theta_hat: f64, n: usize) -> f64 {
    let z = (n as f64).sqrt() * (theta_star - theta_hat);
    z * z
}

/// `φ̂''(√T {θ̂* − θ̂})` for the common-feature criterion.
///
/// Builds the quadratic direction from the two models and dispatches on the
/// estimator kind. Callers evaluating many draws against the same data should
/// build a [`StructuralCh`] once instead.
pub fn modified_draw_ch(
    model: &QuadMomentModel,
    model_star: &QuadMomentModel,
    gamma_set: &IdentifiedSetEstimate,
    est: &DerivEstimator,
) -> Result<f64> {
    let h = QuadDirection::bootstrap(model, model_star)?;
    match est.kind {
        DerivKind::StructuralCh => {
            let s = StructuralCh::new(model, gamma_set, est, crate::derivative::DEFAULT_INNER_STARTS)?;
            s.eval(&h)
        }
        DerivKind::Numerical => {
            let step = est.step_value()?;
            numerical_deriv_ch(model, gamma_set.phi_min, gamma_set.minimizer(), &h, step, &Default::default())
        }
        other => validation(format!(
            "estimator kind {other:?} does not apply to the common-feature criterion"
        )),
    }
}
