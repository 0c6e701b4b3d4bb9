//! Frequency sweeps, discrete relative L-infinity errors and MORscores.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{spectral_norm, CMat, C64};
use crate::reduce::ReducedModel;
use crate::system::StructuredSystem;

/// Anything with a transfer function.
pub trait TransferModel: Sync {
    fn transfer(&self, s: C64) -> Result<CMat>;
}

impl TransferModel for StructuredSystem {
    fn transfer(&self, s: C64) -> Result<CMat> {
        self.eval_transfer(s)
    }
}

impl TransferModel for ReducedModel {
    fn transfer(&self, s: C64) -> Result<CMat> {
        self.system.eval_transfer(s)
    }
}

/// Angular frequencies (rad/s), strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    omega: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidConfig("frequency grid is empty".into()));
        }
        if omega.iter().any(|w| !w.is_finite()) || omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "frequency grid must be finite and strictly increasing".into(),
            ));
        }
        Ok(FrequencyGrid { omega })
    }

    /// `points` equidistant frequencies in `[fmin, fmax]` Hz.
    pub fn linspace_hz(fmin: f64, fmax: f64, points: usize) -> Result<Self> {
        let hz = linspace(fmin, fmax, points);
        Self::new(hz.into_iter().map(|f| 2.0 * PI * f).collect())
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn hz(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w / (2.0 * PI)).collect()
    }

    pub fn points(&self) -> Vec<C64> {
        self.omega.iter().map(|&w| C64::new(0.0, w)).collect()
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn check_poles(&self, sys: &StructuredSystem) -> Result<()> {
        for s in self.points() {
            sys.check_not_pole(s)?;
        }
        Ok(())
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Transfer values on a grid; failed points hold the error instead.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub values: Vec<std::result::Result<CMat, Error>>,
}

impl Sweep {
    pub fn flagged(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_err())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| v.as_ref().map_or(f64::NAN, spectral_norm))
            .collect()
    }
}

pub fn sweep<T: TransferModel + ?Sized>(model: &T, grid: &FrequencyGrid) -> Sweep {
    sweep_with(model, grid, Execution::default())
}

pub fn sweep_with<T: TransferModel + ?Sized>(model: &T, grid: &FrequencyGrid, exec: Execution) -> Sweep {
    let pts = grid.points();
    Sweep {
        values: exec.map(&pts, |&s| model.transfer(s)),
    }
}

/// Pointwise `||H - H^||_2`; points where the FOM failed are NaN, points
/// where only the ROM failed are infinite.
pub fn pointwise_errors(fom: &Sweep, rom: &Sweep) -> Result<Vec<f64>> {
    if fom.values.len() != rom.values.len() {
        return Err(Error::DimensionMismatch(format!(
            "sweeps of length {} and {}",
            fom.values.len(),
            rom.values.len()
        )));
    }
    fom.values
        .iter()
        .zip(&rom.values)
        .map(|(h, hr)| match (h, hr) {
            (Ok(h), Ok(hr)) => {
                if h.shape() != hr.shape() {
                    return Err(Error::DimensionMismatch(format!(
                        "transfer values {:?} and {:?}",
                        h.shape(),
                        hr.shape()
                    )));
                }
                let e = spectral_norm(&(h - hr));
                Ok(if e.is_nan() { f64::INFINITY } else { e })
            }
            (Ok(_), Err(_)) => Ok(f64::INFINITY),
            (Err(_), _) => Ok(f64::NAN),
        })
        .collect()
}

/// `max_i ||H(w_i) - H^(w_i)||_2 / max_i ||H(w_i)||_2`.
pub fn linf_rel_error(fom: &Sweep, rom: &Sweep) -> Result<f64> {
    let errs = pointwise_errors(fom, rom)?;
    let reference = fom
        .norms()
        .into_iter()
        .filter(|x| !x.is_nan())
        .fold(0.0f64, f64::max);
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    let num = errs.into_iter().filter(|x| !x.is_nan()).fold(0.0f64, f64::max);
    Ok(num / reference)
}

/// Index of the largest pointwise error; the lowest frequency wins ties.
pub fn argmax_error(errs: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &e) in errs.iter().enumerate() {
        if e.is_nan() {
            continue;
        }
        if best.map_or(true, |(_, b)| e > b) {
            best = Some((i, e));
        }
    }
    best.map(|(i, _)| i)
}

/// Error-per-order samples, stored clamped to `[eps, 1]` at scoring time.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub samples: Vec<CurveSample>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub r: usize,
    pub eps: f64,
    pub seconds: Option<f64>,
}

impl ErrorCurve {
    /// Appends a sample; orders must increase strictly.
    pub fn push(&mut self, r: usize, eps: f64, seconds: Option<f64>) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if r <= last.r {
                return Err(Error::InvalidConfig(format!(
                    "curve orders must increase (got {r} after {})",
                    last.r
                )));
            }
        }
        self.samples.push(CurveSample { r, eps, seconds });
        Ok(())
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        let mut c = ErrorCurve::default();
        for &(r, e) in pairs {
            c.push(r, e, None)?;
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV with header `r,eps,seconds`; `seconds` is left empty when absent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,eps,seconds\n");
        for s in &self.samples {
            let secs = s.seconds.map(|t| format!("{t:e}")).unwrap_or_default();
            out.push_str(&format!("{},{:e},{}\n", s.r, s.eps, secs));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorScore {
    pub score: f64,
    pub eps: f64,
    pub r_max: usize,
}

pub fn clamp_error(e: f64, eps: f64) -> f64 {
    if e.is_nan() || e > 1.0 {
        1.0
    } else if e < eps {
        eps
    } else {
        e
    }
}

/// `phi_eps = log10(eps_r) / floor(log10(eps))` after clamping.
pub fn normalized_error(e: f64, eps: f64) -> f64 {
    clamp_error(e, eps).log10() / eps.log10().floor()
}

/// Area under `(r / r_max, phi_eps(r))`, integrated with the trapezoidal
/// rule from the anchor `(0, 0)` over the available samples.
pub fn morscore(curve: &ErrorCurve, eps: f64, r_max: usize) -> Result<MorScore> {
    if curve.is_empty() {
        return Err(Error::EmptyCurve);
    }
    if !(eps > 0.0 && eps < 1.0) || r_max == 0 {
        return Err(Error::InvalidConfig(format!(
            "MORscore needs 0 < eps < 1 and r_max > 0 (got {eps}, {r_max})"
        )));
    }
    let mut area = 0.0;
    let (mut x0, mut y0) = (0.0, 0.0);
    for s in &curve.samples {
        if s.r > r_max {
            return Err(Error::InvalidConfig(format!("curve order {} exceeds r_max {r_max}", s.r)));
        }
        let x = s.r as f64 / r_max as f64;
        let y = normalized_error(s.eps, eps);
        area += 0.5 * (x - x0) * (y + y0);
        x0 = x;
        y0 = y;
    }
    Ok(MorScore {
        score: area.clamp(0.0, 1.0),
        eps,
        r_max,
    })
}
