//! Online one-step-ahead temperature predictors: moving average,
//! autoregressive, ARMA, and least-mean-squares filters with optional
//! normalization and variable step size.
//!
//! States are plain values. `predict` borrows the state and `observe`
//! consumes it and returns the successor, so two clones fed the same
//! observation sequence stay bit-identical — the property the dual
//! prediction scheme relies on to keep node and sink in lock-step.

mod arma;

pub use arma::{fit_arma, ArmaFit};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularizer added to the input power in the normalized LMS update.
pub const NLMS_EPSILON: f64 = 1e-6;

/// Spread below which a fit window is treated as constant.
pub const DEGENERATE_SPREAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PredictorKind {
    #[serde(rename = "MA")]
    Ma,
    #[serde(rename = "AR")]
    Ar,
    #[serde(rename = "ARMA")]
    Arma,
    #[serde(rename = "LMS")]
    Lms,
    #[serde(rename = "LMS_VSS")]
    LmsVss,
}

/// Full description of a predictor. All fields are plain data so a spec can
/// be written in a config file, hashed, or compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub kind: PredictorKind,
    /// Window length for MA, tap count for LMS/LMS-VSS.
    pub order: usize,
    pub arma_p: usize,
    pub arma_q: usize,
    /// Number of trailing observations an AR/ARMA refit uses.
    pub train_window: usize,
    /// Initial step size for the LMS family.
    pub mu0: f64,
    pub vss_alpha: f64,
    pub vss_gamma: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Normalize the LMS step by the input power (NLMS).
    pub normalize: bool,
}

impl PredictorSpec {
    pub fn ma(order: usize) -> Self {
        Self {
            kind: PredictorKind::Ma,
            order,
            arma_p: 0,
            arma_q: 0,
            train_window: 1,
            ..Self::lms_defaults()
        }
    }

    pub fn ar(p: usize) -> Self {
        Self {
            kind: PredictorKind::Ar,
            order: 1,
            arma_p: p,
            arma_q: 0,
            train_window: 20,
            ..Self::lms_defaults()
        }
    }

    pub fn arma(p: usize, q: usize) -> Self {
        Self {
            kind: PredictorKind::Arma,
            order: 1,
            arma_p: p,
            arma_q: q,
            train_window: 20,
            ..Self::lms_defaults()
        }
    }

    pub fn lms(order: usize) -> Self {
        Self {
            kind: PredictorKind::Lms,
            order,
            arma_p: 0,
            arma_q: 0,
            train_window: 1,
            ..Self::lms_defaults()
        }
    }

    pub fn lms_vss(order: usize) -> Self {
        Self {
            kind: PredictorKind::LmsVss,
            order,
            arma_p: 0,
            arma_q: 0,
            train_window: 1,
            ..Self::lms_defaults()
        }
    }

    fn lms_defaults() -> Self {
        Self {
            kind: PredictorKind::Lms,
            order: 4,
            arma_p: 0,
            arma_q: 0,
            train_window: 1,
            mu0: 0.5,
            vss_alpha: 0.97,
            vss_gamma: 4.8e-4,
            mu_min: 1e-4,
            mu_max: 1.0,
            normalize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::InvalidSpec {
                field: "order",
                message: "must be at least 1".into(),
            });
        }
        if self.train_window < 1 {
            return Err(Error::InvalidSpec {
                field: "train_window",
                message: "must be at least 1".into(),
            });
        }
        if !(self.mu_min.is_finite() && self.mu_max.is_finite() && self.mu_min > 0.0) {
            return Err(Error::InvalidSpec {
                field: "mu_min",
                message: "step-size bounds must be finite with mu_min > 0".into(),
            });
        }
        if self.mu_min > self.mu_max {
            return Err(Error::InvalidSpec {
                field: "mu_max",
                message: format!("mu_min ({}) exceeds mu_max ({})", self.mu_min, self.mu_max),
            });
        }
        match self.kind {
            PredictorKind::Ar | PredictorKind::Arma => {
                if self.kind == PredictorKind::Ar && self.arma_q != 0 {
                    return Err(Error::InvalidSpec {
                        field: "arma_q",
                        message: "must be 0 for an AR predictor".into(),
                    });
                }
                let min = self.arma_p + self.arma_q + 1;
                if self.train_window < min {
                    return Err(Error::InvalidSpec {
                        field: "train_window",
                        message: format!(
                            "must be at least arma_p + arma_q + 1 = {} (got {})",
                            min, self.train_window
                        ),
                    });
                }
            }
            PredictorKind::Lms | PredictorKind::LmsVss => {
                if !self.mu0.is_finite() || self.mu0 < self.mu_min || self.mu0 > self.mu_max {
                    return Err(Error::InvalidSpec {
                        field: "mu0",
                        message: format!(
                            "must lie in [mu_min, mu_max] = [{}, {}] (got {})",
                            self.mu_min, self.mu_max, self.mu0
                        ),
                    });
                }
                if !self.vss_alpha.is_finite() || !self.vss_gamma.is_finite() {
                    return Err(Error::InvalidSpec {
                        field: "vss_alpha",
                        message: "step-size adaptation parameters must be finite".into(),
                    });
                }
            }
            PredictorKind::Ma => {}
        }
        Ok(())
    }

    /// Short human label used in sweep output, e.g. `MA(2)` or `LMS-VSS`.
    pub fn label(&self) -> String {
        match self.kind {
            PredictorKind::Ma => format!("MA({})", self.order),
            PredictorKind::Ar => format!("AR({})", self.arma_p),
            PredictorKind::Arma => format!("ARMA({},{})", self.arma_p, self.arma_q),
            PredictorKind::Lms => {
                if self.order == 4 {
                    "LMS".into()
                } else {
                    format!("LMS({})", self.order)
                }
            }
            PredictorKind::LmsVss => {
                if self.order == 4 {
                    "LMS-VSS".into()
                } else {
                    format!("LMS-VSS({})", self.order)
                }
            }
        }
    }

    fn history_capacity(&self) -> usize {
        self.order.max(self.train_window)
    }
}

impl std::str::FromStr for PredictorSpec {
    type Err = Error;

    /// Parse the label forms: `MA(2)`, `AR(2)`, `ARMA(2,2)`, `LMS`,
    /// `LMS-VSS`, `LMS(8)`, `LMS-VSS(8)`. Anything else is an error.
    fn from_str(s: &str) -> Result<Self> {
        fn args(s: &str, name: &str) -> Option<Vec<usize>> {
            let inner = s
                .strip_prefix(name)?
                .strip_prefix('(')?
                .strip_suffix(')')?;
            inner
                .split(',')
                .map(|part| part.trim().parse().ok())
                .collect()
        }
        let bad = || Error::InvalidSpec {
            field: "kind",
            message: format!("unrecognized predictor `{s}`"),
        };
        let spec = match s.trim() {
            "LMS" => PredictorSpec::lms(4),
            "LMS-VSS" => PredictorSpec::lms_vss(4),
            trimmed => {
                if let Some(a) = args(trimmed, "LMS-VSS") {
                    match a[..] {
                        [order] => PredictorSpec::lms_vss(order),
                        _ => return Err(bad()),
                    }
                } else if let Some(a) = args(trimmed, "LMS") {
                    match a[..] {
                        [order] => PredictorSpec::lms(order),
                        _ => return Err(bad()),
                    }
                } else if let Some(a) = args(trimmed, "ARMA") {
                    match a[..] {
                        [p, q] => PredictorSpec::arma(p, q),
                        _ => return Err(bad()),
                    }
                } else if let Some(a) = args(trimmed, "AR") {
                    match a[..] {
                        [p] => PredictorSpec::ar(p),
                        _ => return Err(bad()),
                    }
                } else if let Some(a) = args(trimmed, "MA") {
                    match a[..] {
                        [order] => PredictorSpec::ma(order),
                        _ => return Err(bad()),
                    }
                } else {
                    return Err(bad());
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Serializable state of one predictor instance.
///
/// `history` keeps the oldest value at the front. LMS weights pair with the
/// input vector taken most-recent-first, so `weights[j]` multiplies the
/// j-th most recent observation. AR/ARMA coefficients are stored as
/// `[window mean, ar_1..ar_p, ma_1..ma_q]` and `residuals` holds the most
/// recent one-step residuals, newest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorState {
    spec: PredictorSpec,
    history: VecDeque<f64>,
    weights: Vec<f64>,
    residuals: VecDeque<f64>,
    mu: f64,
    samples_seen: u64,
}

pub fn new_predictor(spec: PredictorSpec) -> Result<PredictorState> {
    PredictorState::new(spec)
}

impl PredictorState {
    pub fn new(spec: PredictorSpec) -> Result<Self> {
        spec.validate()?;
        let weights = match spec.kind {
            PredictorKind::Lms | PredictorKind::LmsVss => vec![0.0; spec.order],
            _ => Vec::new(),
        };
        Ok(Self {
            mu: spec.mu0,
            history: VecDeque::with_capacity(spec.history_capacity()),
            weights,
            residuals: VecDeque::new(),
            samples_seen: 0,
            spec,
        })
    }

    pub fn spec(&self) -> &PredictorSpec {
        &self.spec
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn samples_seen(&self) -> u64 {
        self.samples_seen
    }

    /// Observations still required before `predict` is defined.
    pub fn warmup_needed(&self) -> usize {
        let required = match self.spec.kind {
            PredictorKind::Ma | PredictorKind::Lms | PredictorKind::LmsVss => self.spec.order,
            PredictorKind::Ar | PredictorKind::Arma => self.spec.train_window,
        };
        required.saturating_sub(self.samples_seen.min(usize::MAX as u64) as usize)
    }

    /// One-step-ahead prediction. Pure: the state is not touched.
    pub fn predict(&self) -> Result<f64> {
        let needed = self.warmup_needed();
        if needed > 0 {
            return Err(Error::NotWarmedUp { needed });
        }
        Ok(self.predict_unchecked())
    }

    fn predict_unchecked(&self) -> f64 {
        let len = self.history.len();
        match self.spec.kind {
            PredictorKind::Ma => {
                let k = self.spec.order;
                let mut sum = 0.0;
                for &v in self.history.iter().skip(len - k) {
                    sum += v;
                }
                sum / k as f64
            }
            PredictorKind::Lms | PredictorKind::LmsVss => {
                let mut acc = 0.0;
                for (j, &w) in self.weights.iter().enumerate() {
                    acc += w * self.history[len - 1 - j];
                }
                acc
            }
            PredictorKind::Ar | PredictorKind::Arma => {
                let mean = self.weights[0];
                let p = self.spec.arma_p;
                let q = self.spec.arma_q;
                let mut acc = mean;
                for i in 0..p {
                    acc += self.weights[1 + i] * (self.history[len - 1 - i] - mean);
                }
                for j in 0..q {
                    let residual = self.residuals.get(j).copied().unwrap_or(0.0);
                    acc += self.weights[1 + p + j] * residual;
                }
                acc
            }
        }
    }

    /// Feed one observation and return the successor state.
    ///
    /// During warm-up only the history and the sample counter change. Once
    /// warmed up, the LMS family updates its taps from the pre-observation
    /// prediction error and AR/ARMA refit on the trailing train window.
    pub fn observe(mut self, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFiniteInput { value });
        }
        let warmed = self.warmup_needed() == 0;
        if warmed {
            match self.spec.kind {
                PredictorKind::Lms | PredictorKind::LmsVss => self.update_lms(value),
                PredictorKind::Ar | PredictorKind::Arma => {
                    let error = value - self.predict_unchecked();
                    self.residuals.push_front(error);
                    self.residuals.truncate(self.spec.arma_q);
                }
                PredictorKind::Ma => {}
            }
        }
        self.history.push_back(value);
        while self.history.len() > self.spec.history_capacity() {
            self.history.pop_front();
        }
        self.samples_seen += 1;
        if matches!(self.spec.kind, PredictorKind::Ar | PredictorKind::Arma)
            && self.samples_seen >= self.spec.train_window as u64
        {
            self.refit_arma();
        }
        Ok(self)
    }

    fn update_lms(&mut self, value: f64) {
        let len = self.history.len();
        let order = self.spec.order;
        let error = value - self.predict_unchecked();
        let step = if self.spec.normalize {
            let mut power = 0.0;
            for j in 0..order {
                let x = self.history[len - 1 - j];
                power += x * x;
            }
            self.mu / (power + NLMS_EPSILON)
        } else {
            self.mu
        };
        for j in 0..order {
            let x = self.history[len - 1 - j];
            self.weights[j] += step * error * x;
        }
        if self.spec.kind == PredictorKind::LmsVss {
            let raw = self.spec.vss_alpha * self.mu + self.spec.vss_gamma * error * error;
            self.mu = raw.clamp(self.spec.mu_min, self.spec.mu_max);
        }
    }

    fn refit_arma(&mut self) {
        let tw = self.spec.train_window;
        let len = self.history.len();
        let window: Vec<f64> = self.history.iter().skip(len - tw).copied().collect();
        let p = self.spec.arma_p;
        let q = self.spec.arma_q;
        match fit_arma(&window, p, q) {
            Ok(fit) => {
                let mut w = Vec::with_capacity(1 + p + q);
                w.push(fit.mean);
                w.extend_from_slice(&fit.ar);
                w.extend_from_slice(&fit.ma);
                self.weights = w;
            }
            Err(_) => {
                // Constant (or otherwise unfittable) window: predict its mean.
                let mean = window.iter().sum::<f64>() / tw as f64;
                let mut w = vec![0.0; 1 + p + q];
                w[0] = mean;
                self.weights = w;
            }
        }
    }

    /// Bit-level equality, including NaN payloads. Used by the lock-step
    /// assertions where `PartialEq` on floats would reject equal NaNs.
    pub fn bits_eq(&self, other: &Self) -> bool {
        fn eq_bits<'a>(
            a: impl ExactSizeIterator<Item = &'a f64>,
            b: impl ExactSizeIterator<Item = &'a f64>,
        ) -> bool {
            a.len() == b.len() && a.zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        self.spec == other.spec
            && self.samples_seen == other.samples_seen
            && self.mu.to_bits() == other.mu.to_bits()
            && eq_bits(self.history.iter(), other.history.iter())
            && eq_bits(self.weights.iter(), other.weights.iter())
            && eq_bits(self.residuals.iter(), other.residuals.iter())
    }
}
