//! End-to-end tests built from the pieces in the other modules.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{
    babu_corrected_draw_squared_mean, critical_value, resample_indices, standard_second_order_draw,
    BootstrapDraws, BootstrapScheme,
};
use crate::derivative::{
    closed_form_deriv_squared_mean, gms_deriv_moment_ineq, numerical_deriv_ch, DerivEstimator, DerivKind,
    NumericalOptions, QuadDirection, StructuralCh, DEFAULT_INNER_STARTS,
};
use crate::error::{validation, Error, Result};
use crate::moments::{fit_from_indices, fit_quadratic_moments, QuadMomentModel, SphereVec, Weight};
use crate::rng::stream_rng;
use crate::simulate::PanelData;
use crate::sphereopt::{
    default_resolution, estimate_identified_set_from, minimize_on_sphere, SphereMinResult, DEFAULT_STARTS,
    DEFAULT_TOL,
};

/// Shrinking tuning sequence `T^{-e}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaRule {
    /// `T^{-1/4}`
    Quarter,
    /// `T^{-1/3}`
    Third,
    /// `T^{-2/5}`
    TwoFifths,
    /// `T^{-e}` with `e ∈ (0, 1/2)`.
    Exponent(f64),
}

impl KappaRule {
    pub const PRESETS: [KappaRule; 3] = [KappaRule::Quarter, KappaRule::Third, KappaRule::TwoFifths];

    pub fn exponent(&self) -> f64 {
        match *self {
            KappaRule::Quarter => 0.25,
            KappaRule::Third => 1.0 / 3.0,
            KappaRule::TwoFifths => 0.4,
            KappaRule::Exponent(e) => e,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.exponent();
        if !(e > 0.0 && e < 0.5) {
            return validation(format!("kappa exponent must lie in (0, 1/2), got {e}"));
        }
        Ok(())
    }

    pub fn value(&self, t: usize) -> f64 {
        (t as f64).powf(-self.exponent())
    }
}

impl fmt::Display for KappaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KappaRule::Quarter => write!(f, "T^-1/4"),
            KappaRule::Third => write!(f, "T^-1/3"),
            KappaRule::TwoFifths => write!(f, "T^-2/5"),
            KappaRule::Exponent(e) => write!(f, "T^-{e}"),
        }
    }
}

impl FromStr for KappaRule {
    type Err = Error;

    /// Accepts `T^-1/4`, `1/4`, `quarter`, a bare exponent like `0.3`, and
    /// the same forms for the other presets.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let body = t.strip_prefix("t^-").unwrap_or(&t);
        let rule = match body {
            "1/4" | "quarter" => KappaRule::Quarter,
            "1/3" | "third" => KappaRule::Third,
            "2/5" | "two_fifths" => KappaRule::TwoFifths,
            other => {
                let e = match other.split_once('/') {
                    Some((a, b)) => {
                        let (a, b): (f64, f64) = (
                            a.parse().map_err(|_| Error::Parse(format!("bad kappa rule '{s}'")))?,
                            b.parse().map_err(|_| Error::Parse(format!("bad kappa rule '{s}'")))?,
                        );
                        a / b
                    }
                    None => other.parse().map_err(|_| Error::Parse(format!("bad kappa rule '{s}'")))?,
                };
                KappaRule::Exponent(e)
            }
        };
        rule.validate().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(rule)
    }
}

impl Serialize for KappaRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KappaRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the critical value was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRecord {
    pub method: String,
    pub kappa_rule: Option<String>,
    pub kappa: Option<f64>,
    pub scheme: BootstrapScheme,
    /// Number of points in `Γ̂_T`, for the structural estimator.
    pub set_size: Option<usize>,
    /// Whether the minimization behind the statistic converged.
    pub converged: bool,
}

/// Result of one hypothesis test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub crit_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub b: usize,
    pub tuning: TuningRecord,
    pub minimizer: Option<SphereVec>,
    pub draws: BootstrapDraws,
}

impl TestOutcome {
    fn new(
        statistic: f64,
        draws: BootstrapDraws,
        alpha: f64,
        tuning: TuningRecord,
        minimizer: Option<SphereVec>,
    ) -> Result<Self> {
        let crit_value = critical_value(&draws, alpha)?;
        Ok(Self {
            statistic,
            crit_value,
            reject: statistic > crit_value,
            alpha,
            b: draws.b(),
            tuning,
            minimizer,
            draws,
        })
    }

    /// `RESULT stat=<v> crit=<v> reject=<0|1>`.
    pub fn result_line(&self) -> String {
        format!(
            "RESULT stat={} crit={} reject={}",
            self.statistic,
            self.crit_value,
            u8::from(self.reject)
        )
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return validation(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

fn check_b(b: usize) -> Result<()> {
    if b == 0 {
        return validation("B must be >= 1");
    }
    Ok(())
}

/// Numerical knobs of the common-feature test.
#[derive(Debug, Clone)]
pub struct ChTestOptions {
    pub weight: Weight,
    /// Multistart count for the statistic.
    pub n_starts: usize,
    /// Grid resolution behind `Γ̂_T`; `None` picks a default for `k`.
    pub set_resolution: Option<usize>,
    pub inner_starts: usize,
    pub numerical: NumericalOptions,
}

impl Default for ChTestOptions {
    fn default() -> Self {
        Self {
            weight: Weight::Identity,
            n_starts: DEFAULT_STARTS,
            set_resolution: None,
            inner_starts: DEFAULT_INNER_STARTS,
            numerical: NumericalOptions::default(),
        }
    }
}

/// Fitted model, statistic and bootstrap models for one panel. Outcomes for
/// several tuning rules and estimators share the same bootstrap resamples.
pub struct ChTestSession {
    model: QuadMomentModel,
    min: SphereMinResult,
    boot: Vec<QuadMomentModel>,
    scheme: BootstrapScheme,
    opts: ChTestOptions,
}

impl ChTestSession {
    /// Fits the panel and draws `b` bootstrap models. Replicate `i` uses
    /// stream `i` of a seed taken from `rng`.
    pub fn new<R: Rng + ?Sized>(
        panel: &PanelData,
        b: usize,
        scheme: BootstrapScheme,
        rng: &mut R,
        opts: ChTestOptions,
    ) -> Result<Self> {
        check_b(b)?;
        let model = fit_quadratic_moments(panel, Some(opts.weight.clone()))?;
        let min = minimize_on_sphere(&model, opts.n_starts, DEFAULT_TOL);
        let seed: u64 = rng.random();
        let boot = (0..b as u64)
            .into_par_iter()
            .map(|i| {
                let mut r = stream_rng(seed, i);
                let idx = resample_indices(&scheme, panel.rows(), &mut r)?;
                fit_from_indices(panel, &idx, opts.weight.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            min,
            boot,
            scheme,
            opts,
        })
    }

    pub fn model(&self) -> &QuadMomentModel {
        &self.model
    }

    pub fn minimum(&self) -> &SphereMinResult {
        &self.min
    }

    /// `T · min_γ ‖θ̂_T(γ)‖²_W`.
    pub fn statistic(&self) -> f64 {
        self.model.sample_size() as f64 * self.min.value
    }

    /// Bootstrap draws `φ̂''(√T (θ̂* − θ̂))` for one tuning choice.
    pub fn draws(&self, rule: KappaRule, kind: DerivKind) -> Result<(Vec<f64>, Option<usize>)> {
        rule.validate()?;
        let kappa = rule.value(self.model.sample_size());
        let est = DerivEstimator::for_kind(kind, kappa)?;
        match kind {
            DerivKind::StructuralCh => {
                let res = self.opts.set_resolution.unwrap_or_else(|| default_resolution(self.model.k()));
                let set = estimate_identified_set_from(&self.model, &self.min, kappa, res)?;
                let s = StructuralCh::new(&self.model, &set, &est, self.opts.inner_starts)?;
                let v = self
                    .boot
                    .par_iter()
                    .map(|bm| s.eval(&QuadDirection::bootstrap(&self.model, bm)?))
                    .collect::<Result<Vec<_>>>()?;
                Ok((v, Some(set.len())))
            }
            DerivKind::Numerical => {
                let v = self
                    .boot
                    .par_iter()
                    .map(|bm| {
                        let h = QuadDirection::bootstrap(&self.model, bm)?;
                        numerical_deriv_ch(
                            &self.model,
                            self.min.value,
                            &self.min.minimizer,
                            &h,
                            kappa,
                            &self.opts.numerical,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((v, None))
            }
            other => validation(format!("estimator {other} does not apply to the common-feature test")),
        }
    }

    pub fn outcome(&self, rule: KappaRule, kind: DerivKind, alpha: f64) -> Result<TestOutcome> {
        check_alpha(alpha)?;
        let (values, set_size) = self.draws(rule, kind)?;
        let draws = BootstrapDraws::new(values, self.scheme)?;
        let tuning = TuningRecord {
            method: kind.to_string(),
            kappa_rule: Some(rule.to_string()),
            kappa: Some(rule.value(self.model.sample_size())),
            scheme: self.scheme,
            set_size,
            converged: self.min.converged,
        };
        TestOutcome::new(self.statistic(), draws, alpha, tuning, Some(self.min.minimizer.clone()))
    }
}

/// Modified J-test of `H₀`: a common CH feature exists. Rejects when
/// `T · φ(θ̂_T)` exceeds the bootstrap critical value.
pub fn ch_feature_test<R: Rng + ?Sized>(
    panel: &PanelData,
    kappa_rule: KappaRule,
    est_kind: DerivKind,
    b: usize,
    alpha: f64,
    scheme: BootstrapScheme,
    rng: &mut R,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    ChTestSession::new(panel, b, scheme, rng, ChTestOptions::default())?.outcome(kappa_rule, est_kind, alpha)
}

/// Bootstrap scheme for the squared-mean example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SquaredMeanMethod {
    Standard,
    Babu,
    Modified,
}

impl SquaredMeanMethod {
    pub const ALL: [SquaredMeanMethod; 3] =
        [SquaredMeanMethod::Standard, SquaredMeanMethod::Babu, SquaredMeanMethod::Modified];
}

impl fmt::Display for SquaredMeanMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SquaredMeanMethod::Standard => "standard",
            SquaredMeanMethod::Babu => "babu",
            SquaredMeanMethod::Modified => "modified",
        })
    }
}

impl FromStr for SquaredMeanMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(SquaredMeanMethod::Standard),
            "babu" => Ok(SquaredMeanMethod::Babu),
            "modified" => Ok(SquaredMeanMethod::Modified),
            other => Err(Error::Parse(format!("unknown squared-mean method '{other}'"))),
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Bootstrap means `X̄*` on iid resamples; replicate `i` uses stream `i` of `seed`.
fn bootstrap_means(sample: &[f64], b: usize, seed: u64) -> Result<Vec<f64>> {
    (0..b as u64)
        .map(|i| {
            let mut r = stream_rng(seed, i);
            let idx = resample_indices(&BootstrapScheme::Iid, sample.len(), &mut r)?;
            Ok(idx.iter().map(|&j| sample[j]).sum::<f64>() / sample.len() as f64)
        })
        .collect()
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.len() < 2 {
        return validation("sample needs at least two observations");
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return validation("sample contains non-finite values");
    }
    Ok(())
}

/// Draws of all three squared-mean bootstrap statistics on the same resamples,
/// in the order of [`SquaredMeanMethod::ALL`].
pub fn squared_mean_draws(sample: &[f64], b: usize, seed: u64) -> Result<[Vec<f64>; 3]> {
    check_sample(sample)?;
    check_b(b)?;
    let n = sample.len();
    let xbar = mean(sample);
    let root_n = (n as f64).sqrt();
    let means = bootstrap_means(sample, b, seed)?;
    let standard = means
        .iter()
        .map(|&m| standard_second_order_draw(m * m, xbar * xbar, n as f64))
        .collect();
    let babu = means.iter().map(|&m| babu_corrected_draw_squared_mean(m, xbar, n)).collect();
    let modified = means
        .iter()
        .map(|&m| closed_form_deriv_squared_mean(root_n * (m - xbar)))
        .collect();
    Ok([standard, babu, modified])
}

/// Tests `θ² = null_value` with statistic `n (X̄² − null_value)`.
pub fn squared_mean_test<R: Rng + ?Sized>(
    sample: &[f64],
    null_value: f64,
    method: SquaredMeanMethod,
    b: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<TestOutcome> {
    let all = squared_mean_tests(sample, null_value, b, alpha, rng)?;
    let i = SquaredMeanMethod::ALL.iter().position(|&m| m == method).unwrap_or(0);
    Ok(all.into_iter().nth(i).expect("three outcomes"))
}

/// All three squared-mean tests on shared resamples, ordered as
/// [`SquaredMeanMethod::ALL`].
pub fn squared_mean_tests<R: Rng + ?Sized>(
    sample: &[f64],
    null_value: f64,
    b: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<TestOutcome>> {
    check_alpha(alpha)?;
    let seed: u64 = rng.random();
    let draws = squared_mean_draws(sample, b, seed)?;
    let xbar = mean(sample);
    let stat = sample.len() as f64 * (xbar * xbar - null_value);
    SquaredMeanMethod::ALL
        .iter()
        .zip(draws)
        .map(|(method, d)| {
            let tuning = TuningRecord {
                method: method.to_string(),
                kappa_rule: None,
                kappa: None,
                scheme: BootstrapScheme::Iid,
                set_size: None,
                converged: true,
            };
            TestOutcome::new(stat, BootstrapDraws::new(d, BootstrapScheme::Iid)?, alpha, tuning, None)
        })
        .collect()
}

/// Tests `H₀: E X ≤ 0` with statistic `n max(X̄, 0)²` and the GMS-modified
/// bootstrap.
pub fn moment_ineq_test<R: Rng + ?Sized>(
    sample: &[f64],
    kappa_rule: KappaRule,
    b: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<TestOutcome> {
    check_sample(sample)?;
    check_alpha(alpha)?;
    check_b(b)?;
    kappa_rule.validate()?;
    let n = sample.len();
    let xbar = mean(sample);
    let kappa = kappa_rule.value(n);
    let root_n = (n as f64).sqrt();
    let seed: u64 = rng.random();
    let values = bootstrap_means(sample, b, seed)?
        .into_iter()
        .map(|m| gms_deriv_moment_ineq(xbar, kappa, root_n * (m - xbar)))
        .collect::<Result<Vec<_>>>()?;
    let pos = xbar.max(0.0);
    let stat = n as f64 * pos * pos;
    let tuning = TuningRecord {
        method: DerivKind::GmsMomentIneq.to_string(),
        kappa_rule: Some(kappa_rule.to_string()),
        kappa: Some(kappa),
        scheme: BootstrapScheme::Iid,
        set_size: None,
        converged: true,
    };
    TestOutcome::new(stat, BootstrapDraws::new(values, BootstrapScheme::Iid)?, alpha, tuning, None)
}

/// Which scaling the adaptive statistic selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FirstOrder,
    SecondOrder,
}

/// `r φ̂` when `r φ̂ / κ > 1`, otherwise `r² φ̂`.
pub fn adaptive_statistic(phi_hat: f64, r_n: f64, kappa_n: f64) -> Result<(f64, Regime)> {
    if !(kappa_n.is_finite() && kappa_n > 0.0) {
        return validation(format!("kappa_n must be positive, got {kappa_n}"));
    }
    if r_n * phi_hat / kappa_n > 1.0 {
        Ok((r_n * phi_hat, Regime::FirstOrder))
    } else {
        Ok((r_n * r_n * phi_hat, Regime::SecondOrder))
    }
}
