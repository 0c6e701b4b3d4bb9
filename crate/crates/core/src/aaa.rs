//! AAA rational approximation of scalar frequency-dependent functions and
//! its shifted matrix realization
//!
//! ```text
//! r(s) = a (I_q - (s - s0) D~)^{-1} b~,   D~ = -(D + s0 E)^{-1} E,   b~ = (D + s0 E)^{-1} b
//! ```
//!
//! whose Neumann series yields Taylor coefficients `a D~^j b~` that embed
//! nonlinear coefficient functions into polynomial reduction schemes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svd, CMat, Lu, C64};
use crate::system::{Coefficient, Operator, ScalarFunction, StructuredSystem};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ORDER: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarycentricApproximant {
    pub support: Vec<C64>,
    pub values: Vec<C64>,
    pub weights: Vec<C64>,
    /// Max absolute residual over the non-support samples at the end of the fit.
    pub max_error: f64,
    pub converged: bool,
}

impl BarycentricApproximant {
    pub fn order(&self) -> usize {
        self.support.len()
    }

    fn support_scale(&self) -> f64 {
        let s = self.support.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if s > 0.0 {
            s
        } else {
            1.0
        }
    }

    /// Barycentric evaluation; returns the data value at (or within
    /// `1e-13 * scale` of) a support point.
    pub fn eval(&self, s: C64) -> C64 {
        if self.order() == 1 {
            return self.values[0];
        }
        let tol = 1e-13 * self.support_scale();
        let mut num = ZERO;
        let mut den = ZERO;
        for ((&z, &f), &w) in self.support.iter().zip(&self.values).zip(&self.weights) {
            let d = s - z;
            if d.norm() <= tol {
                return f;
            }
            let c = w / d;
            num += c * f;
            den += c;
        }
        num / den
    }

    /// `r(s) = a (D + s E)^{-1} b`.
    pub fn matrix_form(&self) -> (Vec<C64>, CMat, CMat) {
        let q = self.order();
        let a = self
            .weights
            .iter()
            .zip(&self.values)
            .map(|(w, f)| w * f)
            .collect();
        let mut d = CMat::zeros(q, q);
        let mut e = CMat::zeros(q, q);
        for j in 0..q {
            d[(0, j)] = self.weights[j];
        }
        for i in 1..q {
            d[(i, i - 1)] = -self.support[i - 1];
            d[(i, i)] = self.support[i];
            e[(i, i - 1)] = ONE;
            e[(i, i)] = -ONE;
        }
        (a, d, e)
    }

    pub fn to_matrix_realization(&self, s0: C64) -> Result<MatrixRealization> {
        let q = self.order();
        let (a, d, e) = self.matrix_form();
        let shifted = &d + &e * s0;
        let lu = Lu::new(&shifted).map_err(|_| Error::SingularShift)?;
        let mut b = CMat::zeros(q, 1);
        b[(0, 0)] = ONE;
        let bt = lu.solve(&b);
        let dt = -lu.solve(&e);
        Ok(MatrixRealization {
            a,
            b: bt.column(0).iter().copied().collect(),
            d: dt,
            s0,
        })
    }

    /// Poles `s0 + 1/lambda` from the nonzero eigenvalues of `D~`.
    pub fn poles(&self) -> Result<Vec<C64>> {
        if self.order() < 2 {
            return Ok(Vec::new());
        }
        let s0 = self.support.iter().fold(ZERO, |acc, z| acc + z) / self.order() as f64
            + C64::new(0.0, 1e-3 * self.support_scale());
        let real = self.to_matrix_realization(s0)?;
        let eig = nalgebra::Schur::new(real.d.clone()).unpack().1;
        let dmax = (0..eig.nrows()).fold(0.0f64, |m, i| m.max(eig[(i, i)].norm()));
        Ok((0..eig.nrows())
            .map(|i| eig[(i, i)])
            .filter(|l| l.norm() > 1e-12 * dmax)
            .map(|l| s0 + ONE / l)
            .collect())
    }

    /// Poles whose residue is below `tol * max |f_j|` (spurious pole/zero
    /// pairs). They are reported only; the approximant is left unchanged.
    pub fn froissart_doublets(&self, tol: f64) -> Result<Vec<(C64, f64)>> {
        let fmax = self.values.iter().fold(0.0f64, |m, f| m.max(f.norm()));
        let mut out = Vec::new();
        for p in self.poles()? {
            let nearest = self
                .support
                .iter()
                .fold(f64::INFINITY, |m, z| m.min((z - p).norm()));
            let rho = 1e-4 * nearest.min(p.norm().max(1.0));
            let k = 16;
            let mut res = ZERO;
            for j in 0..k {
                let e = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / k as f64);
                res += self.eval(p + e * rho) * e * rho;
            }
            let res = (res / k as f64).norm();
            if res < tol * fmax {
                out.push((p, res));
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("approximant serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixRealization {
    /// Row vector `a`.
    pub a: Vec<C64>,
    /// Column vector `b~`.
    pub b: Vec<C64>,
    /// `D~`, q x q.
    pub d: CMat,
    pub s0: C64,
}

impl MatrixRealization {
    pub fn eval(&self, s: C64) -> Result<C64> {
        let q = self.a.len();
        let m = CMat::identity(q, q) - &self.d * (s - self.s0);
        let rhs = CMat::from_column_slice(q, 1, &self.b);
        let x = Lu::new(&m)?.solve(&rhs);
        Ok(self.a.iter().zip(x.iter()).map(|(a, x)| a * x).sum())
    }

    /// `c_j = a D~^j b~` for `j = 0..=order`.
    pub fn series_coefficients(&self, order: usize) -> Vec<C64> {
        let q = self.a.len();
        let mut v = nalgebra::DVector::from_column_slice(&self.b);
        let mut out = Vec::with_capacity(order + 1);
        for j in 0..=order {
            if j > 0 {
                v = &self.d * v;
            }
            out.push((0..q).map(|i| self.a[i] * v[i]).sum());
        }
        out
    }
}

/// Fits `r` to `samples` with the AAA greedy loop. Support points are taken
/// at the largest residual (lowest index on ties); weights come from the
/// smallest right singular vector of the Loewner matrix over the remaining
/// samples. Stops at `max |f - r| <= tol * max |f|` or at `q_max` support
/// points, in which case the best approximant seen is returned with
/// `converged = false`.
pub fn aaa_fit(samples: &[(C64, C64)], tol: f64, q_max: usize) -> Result<BarycentricApproximant> {
    let mut z: Vec<C64> = Vec::with_capacity(samples.len());
    let mut f: Vec<C64> = Vec::with_capacity(samples.len());
    for &(s, v) in samples {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::DegenerateSamples(format!("non-finite value at {s}")));
        }
        if !z.contains(&s) {
            z.push(s);
            f.push(v);
        }
    }
    if z.len() < 2 {
        return Err(Error::DegenerateSamples(
            "need at least two distinct sample points".into(),
        ));
    }
    let n = z.len();
    let q_max = q_max.max(1).min(n);
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let mean = f.iter().fold(ZERO, |acc, v| acc + v) / n as f64;
    let mut r = vec![mean; n];
    let mut in_support = vec![false; n];
    let mut support: Vec<usize> = Vec::new();
    let mut best: Option<BarycentricApproximant> = None;

    loop {
        let mut j = usize::MAX;
        let mut worst = -1.0;
        for i in 0..n {
            if in_support[i] {
                continue;
            }
            let e = (f[i] - r[i]).norm();
            if e > worst {
                worst = e;
                j = i;
            }
        }
        if j == usize::MAX {
            break;
        }
        in_support[j] = true;
        support.push(j);
        let q = support.len();
        let rest: Vec<usize> = (0..n).filter(|&i| !in_support[i]).collect();

        let weights = if rest.is_empty() {
            vec![ONE; q]
        } else {
            let rows = rest.len().max(q);
            let mut loewner = CMat::zeros(rows, q);
            for (ri, &i) in rest.iter().enumerate() {
                for (k, &sk) in support.iter().enumerate() {
                    loewner[(ri, k)] = (f[i] - f[sk]) / (z[i] - z[sk]);
                }
            }
            let sv = svd(&loewner);
            sv.t.column(q - 1).iter().copied().collect()
        };

        let mut err = 0.0f64;
        for &i in &rest {
            if q == 1 {
                r[i] = f[support[0]];
                err = err.max((f[i] - r[i]).norm());
                continue;
            }
            let mut num = ZERO;
            let mut den = ZERO;
            for (k, &sk) in support.iter().enumerate() {
                let c = weights[k] / (z[i] - z[sk]);
                num += c * f[sk];
                den += c;
            }
            r[i] = num / den;
            let e = (f[i] - r[i]).norm();
            err = if e.is_nan() { f64::INFINITY } else { err.max(e) };
        }
        for &sk in &support {
            r[sk] = f[sk];
        }
        let converged = err <= tol * scale;
        let apx = BarycentricApproximant {
            support: support.iter().map(|&i| z[i]).collect(),
            values: support.iter().map(|&i| f[i]).collect(),
            weights,
            max_error: err,
            converged,
        };
        let improves = best.as_ref().map_or(true, |b| err < b.max_error);
        if converged {
            return Ok(apx);
        }
        if improves {
            best = Some(apx);
        }
        if q >= q_max || rest.is_empty() {
            break;
        }
    }
    let best = best.expect("at least one AAA iteration runs");
    log::warn!(
        "AAA stopped at q = {} with max residual {:.3e} (tolerance {:.3e})",
        best.order(),
        best.max_error,
        tol * scale
    );
    Ok(best)
}

/// Series coefficients of `phi(s0 + d)` up to `order`.
pub fn series_coefficients(apx: &BarycentricApproximant, s0: C64, order: usize) -> Result<Vec<C64>> {
    Ok(apx.to_matrix_realization(s0)?.series_coefficients(order))
}

/// Taylor coefficient matrices of the operator, input and output of a
/// system about `s0`, with every named function expanded through its
/// matrix realization.
#[derive(Clone, Debug)]
pub struct SeriesExpansion {
    pub s0: C64,
    pub k: Vec<CMat>,
    pub f: Vec<CMat>,
    pub g: Vec<CMat>,
}

/// Builds `K_0 .. K_order`, `F_l`, `G_l`. Closed-form coefficient tags are
/// expanded analytically; `Function` coefficients use `realizations`.
pub fn case_c_expansion(
    sys: &StructuredSystem,
    realizations: &BTreeMap<String, MatrixRealization>,
    s0: C64,
    order: usize,
) -> Result<SeriesExpansion> {
    let series = |coeff: &Coefficient| -> Result<Vec<C64>> {
        match coeff {
            Coefficient::Function { id } => {
                let real = realizations
                    .get(id)
                    .ok_or_else(|| Error::MissingRealization(id.clone()))?;
                if (real.s0 - s0).norm() > 1e-12 * s0.norm().max(1.0) {
                    return Err(Error::MissingRealization(format!(
                        "{id} (realized about {}, requested {s0})",
                        real.s0
                    )));
                }
                Ok(real.series_coefficients(order))
            }
            other => sys.coeff_taylor(other, s0, order),
        }
    };
    let mut k = vec![CMat::zeros(sys.n, sys.n); order + 1];
    for op in Operator::ALL {
        for t in sys.terms(op) {
            let g = series(&t.coeff)?;
            let w = crate::system::weight_series(op, &g, s0, order);
            for (kl, wl) in k.iter_mut().zip(w) {
                if wl != ZERO {
                    *kl += &t.matrix * wl;
                }
            }
        }
    }
    let mut f = vec![CMat::zeros(sys.n, sys.m); order + 1];
    for t in &sys.input {
        for (fl, wl) in f.iter_mut().zip(series(&t.coeff)?) {
            if wl != ZERO {
                *fl += &t.matrix * wl;
            }
        }
    }
    let mut g = vec![CMat::zeros(sys.p, sys.n); order + 1];
    g[0] = sys.output.clone();
    Ok(SeriesExpansion { s0, k, f, g })
}

/// Fits every named function of `sys` on the sample points `s`.
pub fn fit_functions(
    sys: &StructuredSystem,
    s: &[C64],
    tol: f64,
    q_max: usize,
) -> Result<BTreeMap<String, BarycentricApproximant>> {
    let mut out = BTreeMap::new();
    for (id, func) in &sys.functions {
        let apx = match func {
            ScalarFunction::Barycentric(apx) => apx.clone(),
            other => {
                let samples: Vec<(C64, C64)> = s.iter().map(|&x| (x, other.eval(x))).collect();
                aaa_fit(&samples, tol, q_max)?
            }
        };
        out.insert(id.clone(), apx);
    }
    Ok(out)
}

pub fn realize_all(
    fits: &BTreeMap<String, BarycentricApproximant>,
    s0: C64,
) -> Result<BTreeMap<String, MatrixRealization>> {
    fits.iter()
        .map(|(id, apx)| Ok((id.clone(), apx.to_matrix_realization(s0)?)))
        .collect()
}

/// Copy of `sys` with its named functions replaced by fitted approximants.
pub fn rationalize(sys: &StructuredSystem, fits: &BTreeMap<String, BarycentricApproximant>) -> StructuredSystem {
    let mut out = sys.clone();
    for (id, apx) in fits {
        out.functions
            .insert(id.clone(), ScalarFunction::Barycentric(apx.clone()));
    }
    out
}
