//! Frequency-affine second-order systems
//!
//! ```text
//! H(s) = G (s^2 M(s) + s C(s) + K(s) + sum_i phi_i(s) C_i)^{-1} F(s)
//! ```
//!
//! where every operator is a list of [`AffineTerm`]s, i.e. a scalar
//! coefficient function of `s` times a constant matrix.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::aaa::BarycentricApproximant;
use crate::error::{Error, Result};
use crate::linalg::{CMat, Lu, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Scalar coefficient of one affine term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant { value: C64 },
    S,
    S2,
    /// `s / c^2`
    SOverC2 { c: f64 },
    /// Structural damping `eta * i / s`. Pole at `s = 0`.
    Hysteretic { eta: f64 },
    /// A named entry of [`StructuredSystem::functions`].
    Function { id: String },
}

impl Coefficient {
    pub fn one() -> Self {
        Coefficient::Constant { value: ONE }
    }

    pub fn constant(value: f64) -> Self {
        Coefficient::Constant {
            value: C64::new(value, 0.0),
        }
    }

    pub fn function(id: impl Into<String>) -> Self {
        Coefficient::Function { id: id.into() }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant { .. })
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant { value } => write!(f, "{value}"),
            Coefficient::S => f.write_str("s"),
            Coefficient::S2 => f.write_str("s^2"),
            Coefficient::SOverC2 { c } => write!(f, "s/{c}^2"),
            Coefficient::Hysteretic { eta } => write!(f, "{eta}i/s"),
            Coefficient::Function { id } => write!(f, "{id}(s)"),
        }
    }
}

/// Closed-form scalar functions for nonlinear frequency dependencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFunction {
    /// `scale * (1 + s / corner)^exponent`, principal branch; branch point at `-corner`.
    PowerLaw {
        scale: C64,
        corner: C64,
        exponent: f64,
    },
    /// A fitted rational function in barycentric form.
    Barycentric(BarycentricApproximant),
}

impl ScalarFunction {
    pub fn eval(&self, s: C64) -> C64 {
        match self {
            ScalarFunction::PowerLaw {
                scale,
                corner,
                exponent,
            } => scale * (ONE + s / corner).powf(*exponent),
            ScalarFunction::Barycentric(apx) => apx.eval(s),
        }
    }

    /// Taylor coefficients `c_j` with `phi(s0 + d) = sum_j c_j d^j`.
    pub fn taylor(&self, s0: C64, order: usize) -> Result<Vec<C64>> {
        match self {
            ScalarFunction::PowerLaw {
                scale,
                corner,
                exponent,
            } => {
                let base = ONE + s0 / corner;
                let step = ONE / (corner * base);
                let mut out = Vec::with_capacity(order + 1);
                let mut coef = scale * base.powf(*exponent);
                for j in 0..=order {
                    out.push(coef);
                    // binom(g, j+1) = binom(g, j) * (g - j) / (j + 1)
                    coef *= step * ((exponent - j as f64) / (j as f64 + 1.0));
                }
                Ok(out)
            }
            ScalarFunction::Barycentric(apx) => {
                Ok(apx.to_matrix_realization(s0)?.series_coefficients(order))
            }
        }
    }

    pub fn poles(&self) -> Vec<C64> {
        match self {
            ScalarFunction::PowerLaw { corner, .. } => vec![-corner],
            ScalarFunction::Barycentric(_) => Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AffineTerm {
    pub coeff: Coefficient,
    pub matrix: CMat,
}

impl AffineTerm {
    pub fn new(coeff: Coefficient, matrix: CMat) -> Self {
        AffineTerm { coeff, matrix }
    }

    pub fn constant(matrix: CMat) -> Self {
        AffineTerm::new(Coefficient::one(), matrix)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseTag {
    A,
    B,
    C,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::A => "A",
            CaseTag::B => "B",
            CaseTag::C => "C",
        };
        f.write_str(s)
    }
}

/// Which operator block a term list belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Operator {
    Mass,
    Damping,
    Stiffness,
    Nonlinear,
}

impl Operator {
    /// Power of `s` multiplying the operator in the assembled pencil.
    pub fn s_power(self) -> usize {
        match self {
            Operator::Mass => 2,
            Operator::Damping => 1,
            Operator::Stiffness | Operator::Nonlinear => 0,
        }
    }

    pub const ALL: [Operator; 4] = [
        Operator::Mass,
        Operator::Damping,
        Operator::Stiffness,
        Operator::Nonlinear,
    ];
}

/// Everything needed to build a [`StructuredSystem`].
#[derive(Clone, Debug, Default)]
pub struct SystemParts {
    pub mass: Vec<AffineTerm>,
    pub damping: Vec<AffineTerm>,
    pub stiffness: Vec<AffineTerm>,
    pub nonlinear: Vec<AffineTerm>,
    pub input: Vec<AffineTerm>,
    pub output: CMat,
    pub functions: BTreeMap<String, ScalarFunction>,
    pub case: Option<CaseTag>,
    pub test_frequency: Option<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredSystem {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub mass: Vec<AffineTerm>,
    pub damping: Vec<AffineTerm>,
    pub stiffness: Vec<AffineTerm>,
    pub nonlinear: Vec<AffineTerm>,
    pub input: Vec<AffineTerm>,
    pub output: CMat,
    pub functions: BTreeMap<String, ScalarFunction>,
    pub case: CaseTag,
    /// A frequency at which the assembled operator is invertible.
    pub test_frequency: C64,
}

fn poly_mul(a: &[C64], b: &[C64], order: usize) -> Vec<C64> {
    let mut out = vec![ZERO; order + 1];
    for (i, &ai) in a.iter().enumerate().take(order + 1) {
        if ai == ZERO {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Taylor coefficients of `s^k` about `s0`.
fn monomial_taylor(k: usize, s0: C64, order: usize) -> Vec<C64> {
    let mut out = vec![ZERO; order + 1];
    match k {
        0 => out[0] = ONE,
        1 => {
            out[0] = s0;
            if order >= 1 {
                out[1] = ONE;
            }
        }
        2 => {
            out[0] = s0 * s0;
            if order >= 1 {
                out[1] = s0 * 2.0;
            }
            if order >= 2 {
                out[2] = ONE;
            }
        }
        _ => unreachable!("pencil powers are at most two"),
    }
    out
}

/// Taylor coefficients of `s^k g(s)` about `s0` given the series of `g`,
/// where `k` is the pencil power of `op`.
pub fn weight_series(op: Operator, g: &[C64], s0: C64, order: usize) -> Vec<C64> {
    poly_mul(&monomial_taylor(op.s_power(), s0, order), g, order)
}

impl StructuredSystem {
    pub fn from_parts(parts: SystemParts) -> Result<Self> {
        let n = parts
            .stiffness
            .first()
            .or(parts.mass.first())
            .or(parts.damping.first())
            .map(|t| t.matrix.nrows())
            .ok_or_else(|| Error::DimensionMismatch("system has no operator terms".into()))?;
        let m = parts
            .input
            .first()
            .map(|t| t.matrix.ncols())
            .ok_or_else(|| Error::DimensionMismatch("system has no input terms".into()))?;
        let p = parts.output.nrows();
        let case = parts.case.unwrap_or(if !parts.nonlinear.is_empty() {
            CaseTag::C
        } else if parts.input.iter().all(|t| t.coeff.is_constant()) {
            CaseTag::A
        } else {
            CaseTag::B
        });
        let sys = StructuredSystem {
            n,
            m,
            p,
            mass: parts.mass,
            damping: parts.damping,
            stiffness: parts.stiffness,
            nonlinear: parts.nonlinear,
            input: parts.input,
            output: parts.output,
            functions: parts.functions,
            case,
            test_frequency: parts.test_frequency.unwrap_or(C64::new(0.0, 1.0)),
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Constant-coefficient `G (s^2 M + s C + K)^{-1} F`.
    pub fn second_order(m: CMat, c: CMat, k: CMat, f: CMat, g: CMat) -> Result<Self> {
        Self::from_parts(SystemParts {
            mass: vec![AffineTerm::constant(m)],
            damping: vec![AffineTerm::constant(c)],
            stiffness: vec![AffineTerm::constant(k)],
            input: vec![AffineTerm::constant(f)],
            output: g,
            case: Some(CaseTag::A),
            ..Default::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        for op in Operator::ALL {
            for (i, t) in self.terms(op).iter().enumerate() {
                if t.matrix.shape() != (self.n, self.n) {
                    return Err(Error::DimensionMismatch(format!(
                        "{op:?} term {i} is {:?}, expected ({}, {})",
                        t.matrix.shape(),
                        self.n,
                        self.n
                    )));
                }
            }
        }
        for (i, t) in self.input.iter().enumerate() {
            if t.matrix.shape() != (self.n, self.m) {
                return Err(Error::DimensionMismatch(format!(
                    "input term {i} is {:?}, expected ({}, {})",
                    t.matrix.shape(),
                    self.n,
                    self.m
                )));
            }
        }
        if self.output.ncols() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "output matrix is {:?}, expected p x {}",
                self.output.shape(),
                self.n
            )));
        }
        for op in Operator::ALL {
            for t in self.terms(op) {
                self.check_function(&t.coeff)?;
            }
        }
        for t in &self.input {
            self.check_function(&t.coeff)?;
        }
        if self.case == CaseTag::A && !self.nonlinear.is_empty() {
            return Err(Error::DimensionMismatch(
                "Case A systems cannot carry nonlinear terms".into(),
            ));
        }
        Ok(())
    }

    fn check_function(&self, coeff: &Coefficient) -> Result<()> {
        if let Coefficient::Function { id } = coeff {
            if !self.functions.contains_key(id) {
                return Err(Error::UnknownFunction(id.clone()));
            }
        }
        Ok(())
    }

    pub fn terms(&self, op: Operator) -> &[AffineTerm] {
        match op {
            Operator::Mass => &self.mass,
            Operator::Damping => &self.damping,
            Operator::Stiffness => &self.stiffness,
            Operator::Nonlinear => &self.nonlinear,
        }
    }

    pub fn terms_mut(&mut self, op: Operator) -> &mut Vec<AffineTerm> {
        match op {
            Operator::Mass => &mut self.mass,
            Operator::Damping => &mut self.damping,
            Operator::Stiffness => &mut self.stiffness,
            Operator::Nonlinear => &mut self.nonlinear,
        }
    }

    /// All declared poles of the coefficient functions.
    pub fn poles(&self) -> Vec<C64> {
        let mut out = Vec::new();
        let all = Operator::ALL
            .iter()
            .flat_map(|&op| self.terms(op).iter())
            .chain(self.input.iter());
        for t in all {
            match &t.coeff {
                Coefficient::Hysteretic { .. } => out.push(ZERO),
                Coefficient::Function { id } => {
                    if let Some(f) = self.functions.get(id) {
                        out.extend(f.poles());
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn check_not_pole(&self, s: C64) -> Result<()> {
        for p in self.poles() {
            if (s - p).norm() <= 1e-14 * p.norm().max(1.0) {
                return Err(Error::PoleAtFrequency(s));
            }
        }
        Ok(())
    }

    fn function(&self, id: &str) -> Result<&ScalarFunction> {
        self.functions
            .get(id)
            .ok_or_else(|| Error::UnknownFunction(id.to_string()))
    }

    pub fn coeff_value(&self, coeff: &Coefficient, s: C64) -> Result<C64> {
        Ok(match coeff {
            Coefficient::Constant { value } => *value,
            Coefficient::S => s,
            Coefficient::S2 => s * s,
            Coefficient::SOverC2 { c } => s / (c * c),
            Coefficient::Hysteretic { eta } => {
                if s == ZERO {
                    return Err(Error::PoleAtFrequency(s));
                }
                C64::new(0.0, *eta) / s
            }
            Coefficient::Function { id } => self.function(id)?.eval(s),
        })
    }

    /// Taylor coefficients of a coefficient function about `s0`.
    pub fn coeff_taylor(&self, coeff: &Coefficient, s0: C64, order: usize) -> Result<Vec<C64>> {
        let mut out = vec![ZERO; order + 1];
        match coeff {
            Coefficient::Constant { value } => out[0] = *value,
            Coefficient::S => return Ok(monomial_taylor(1, s0, order)),
            Coefficient::S2 => return Ok(monomial_taylor(2, s0, order)),
            Coefficient::SOverC2 { c } => {
                let scale = 1.0 / (c * c);
                return Ok(monomial_taylor(1, s0, order)
                    .into_iter()
                    .map(|x| x * scale)
                    .collect());
            }
            Coefficient::Hysteretic { eta } => {
                if s0 == ZERO {
                    return Err(Error::PoleAtFrequency(s0));
                }
                // i*eta/(s0 + d) = i*eta * sum_j (-1)^j d^j / s0^(j+1)
                let inv = ONE / s0;
                let mut term = C64::new(0.0, *eta) * inv;
                for o in out.iter_mut() {
                    *o = term;
                    term *= -inv;
                }
            }
            Coefficient::Function { id } => return self.function(id)?.taylor(s0, order),
        }
        Ok(out)
    }

    /// Scalar weight of a term of `op` at `s`, including the pencil power of `s`.
    pub fn term_weight(&self, op: Operator, coeff: &Coefficient, s: C64) -> Result<C64> {
        let g = self.coeff_value(coeff, s)?;
        Ok(match op.s_power() {
            0 => g,
            1 => s * g,
            _ => s * s * g,
        })
    }

    /// Taylor coefficients of the weight `s^k g(s)` of a term about `s0`.
    pub fn term_weight_taylor(
        &self,
        op: Operator,
        coeff: &Coefficient,
        s0: C64,
        order: usize,
    ) -> Result<Vec<C64>> {
        let g = self.coeff_taylor(coeff, s0, order)?;
        Ok(weight_series(op, &g, s0, order))
    }

    /// `s^2 M(s) + s C(s) + K(s) + sum_i phi_i(s) C_i`.
    pub fn assemble_operator(&self, s: C64) -> Result<CMat> {
        self.check_not_pole(s)?;
        let mut out = CMat::zeros(self.n, self.n);
        for op in Operator::ALL {
            for t in self.terms(op) {
                let w = self.term_weight(op, &t.coeff, s)?;
                if w != ZERO {
                    out += &t.matrix * w;
                }
            }
        }
        Ok(out)
    }

    pub fn assemble_input(&self, s: C64) -> Result<CMat> {
        let mut out = CMat::zeros(self.n, self.m);
        for t in &self.input {
            let w = self.coeff_value(&t.coeff, s)?;
            if w != ZERO {
                out += &t.matrix * w;
            }
        }
        Ok(out)
    }

    /// `G K(s)^{-1} F(s)` via one LU factorization.
    pub fn eval_transfer(&self, s: C64) -> Result<CMat> {
        let op = self.assemble_operator(s)?;
        let f = self.assemble_input(s)?;
        let x = Lu::new(&op)?.solve(&f);
        Ok(&self.output * x)
    }

    /// Taylor coefficient matrices `K_0, ..., K_order` of the assembled
    /// operator about `s0`.
    pub fn operator_taylor(&self, s0: C64, order: usize) -> Result<Vec<CMat>> {
        self.check_not_pole(s0)?;
        let mut out = vec![CMat::zeros(self.n, self.n); order + 1];
        for op in Operator::ALL {
            for t in self.terms(op) {
                let w = self.term_weight_taylor(op, &t.coeff, s0, order)?;
                for (o, wj) in out.iter_mut().zip(w) {
                    if wj != ZERO {
                        *o += &t.matrix * wj;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn input_taylor(&self, s0: C64, order: usize) -> Result<Vec<CMat>> {
        let mut out = vec![CMat::zeros(self.n, self.m); order + 1];
        for t in &self.input {
            let w = self.coeff_taylor(&t.coeff, s0, order)?;
            for (o, wj) in out.iter_mut().zip(w) {
                if wj != ZERO {
                    *o += &t.matrix * wj;
                }
            }
        }
        Ok(out)
    }

    /// True when every matrix has zero imaginary part and every coefficient is
    /// real on the real axis (so `H(conj s) = conj H(s)`).
    pub fn is_real(&self) -> bool {
        let real_mat = |m: &CMat| m.iter().all(|x| x.im == 0.0);
        let real_coeff = |c: &Coefficient| match c {
            Coefficient::Constant { value } => value.im == 0.0,
            Coefficient::S | Coefficient::S2 | Coefficient::SOverC2 { .. } => true,
            Coefficient::Hysteretic { .. } => false,
            Coefficient::Function { id } => match self.functions.get(id) {
                Some(ScalarFunction::PowerLaw { scale, corner, .. }) => {
                    scale.im == 0.0 && corner.im == 0.0
                }
                _ => false,
            },
        };
        Operator::ALL
            .iter()
            .flat_map(|&op| self.terms(op).iter())
            .chain(self.input.iter())
            .all(|t| real_mat(&t.matrix) && real_coeff(&t.coeff))
            && real_mat(&self.output)
    }

    /// Sum of the constant-coefficient terms of `op`; errors if any term has
    /// a frequency-dependent coefficient.
    pub fn constant_operator(&self, op: Operator) -> Result<CMat> {
        let mut out = CMat::zeros(self.n, self.n);
        for t in self.terms(op) {
            match &t.coeff {
                Coefficient::Constant { value } => out += &t.matrix * *value,
                other => {
                    return Err(Error::NotConstantCoefficient(format!(
                        "{op:?} term with coefficient {other}"
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn constant_input(&self) -> Result<CMat> {
        let mut out = CMat::zeros(self.n, self.m);
        for t in &self.input {
            match &t.coeff {
                Coefficient::Constant { value } => out += &t.matrix * *value,
                other => {
                    return Err(Error::NotConstantCoefficient(format!(
                        "input term with coefficient {other}"
                    )))
                }
            }
        }
        Ok(out)
    }
}
