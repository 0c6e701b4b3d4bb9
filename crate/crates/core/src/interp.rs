//! Projection bases from structured Hermite interpolation, the second-order
//! Arnoldi process (SOAR) and the presampling strategies built on them.
//!
//! Taylor directions about a shift `s0` follow from differentiating
//! `K(s) X(s) = F(s)`:
//!
//! ```text
//! K_0 X_j = F_j - sum_{l=1..j} K_l X_{j-l}
//! K_0^H Z_j = G_j^H - sum_{l=1..j} K_l^H Z_{j-l}
//! ```
//!
//! with one LU factorization of `K_0` per shift.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{orthonormal_basis, CMat, Lu, C64, RANK_TOL};
use crate::system::StructuredSystem;


/// Relative threshold below which an orthogonalized SOAR direction is
/// treated as dependent.
pub const DEFLATION_TOL: f64 = 1e-10;

/// `sigma = 2 pi f i`.
pub fn hz_to_shift(f: f64) -> C64 {
    C64::new(0.0, 2.0 * PI * f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSide {
    Input,
    Output,
    Both,
}

/// Which basis a presample belongs to: `Right` spans input-side
/// directions (V), `Left` output-side directions (W).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisSide {
    Right,
    Left,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftPlan {
    pub shifts: Vec<C64>,
    pub orders: Vec<usize>,
    pub side: PlanSide,
}

impl ShiftPlan {
    pub fn new(shifts: Vec<C64>, orders: Vec<usize>, side: PlanSide) -> Result<Self> {
        if shifts.len() != orders.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} shifts but {} orders",
                shifts.len(),
                orders.len()
            )));
        }
        Ok(ShiftPlan { shifts, orders, side })
    }

    /// Shifts given in Hz, converted once to `2 pi f i`.
    pub fn from_hz(freqs: &[f64], order: usize, side: PlanSide) -> Self {
        ShiftPlan {
            shifts: freqs.iter().map(|&f| hz_to_shift(f)).collect(),
            orders: vec![order; freqs.len()],
            side,
        }
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    pub fn check(&self, sys: &StructuredSystem) -> Result<()> {
        for &s in &self.shifts {
            sys.check_not_pole(s)?;
        }
        Ok(())
    }
}

/// Taylor coefficients `X_0..X_order` of `K(s)^{-1} F(s)` about `s0`.
pub fn right_taylor(sys: &StructuredSystem, s0: C64, order: usize) -> Result<Vec<CMat>> {
    let k = sys.operator_taylor(s0, order)?;
    let f = sys.input_taylor(s0, order)?;
    let lu = Lu::new(&k[0])?;
    let mut x: Vec<CMat> = Vec::with_capacity(order + 1);
    for j in 0..=order {
        let mut rhs = f[j].clone();
        for l in 1..=j {
            rhs -= &k[l] * &x[j - l];
        }
        x.push(lu.solve(&rhs));
    }
    Ok(x)
}

/// Taylor coefficients `Z_0..Z_order` of `K(s)^{-H} G^H` about `s0`.
pub fn left_taylor(sys: &StructuredSystem, s0: C64, order: usize) -> Result<Vec<CMat>> {
    let k = sys.operator_taylor(s0, order)?;
    let lu = Lu::new(&k[0])?;
    let gh = sys.output.adjoint();
    let mut z: Vec<CMat> = Vec::with_capacity(order + 1);
    for j in 0..=order {
        let mut rhs = if j == 0 {
            gh.clone()
        } else {
            CMat::zeros(sys.n, sys.p)
        };
        for l in 1..=j {
            rhs -= k[l].adjoint() * &z[j - l];
        }
        z.push(lu.solve_adjoint(&rhs));
    }
    Ok(z)
}

/// Taylor coefficients `H_0..H_order` of the transfer function about `s0`.
pub fn transfer_moments(sys: &StructuredSystem, s0: C64, order: usize) -> Result<Vec<CMat>> {
    Ok(right_taylor(sys, s0, order)?
        .iter()
        .map(|x| &sys.output * x)
        .collect())
}

fn hermite_blocks(sys: &StructuredSystem, plan: &ShiftPlan, side: BasisSide, exec: Execution) -> Result<CMat> {
    plan.check(sys)?;
    let blocks = exec.map_range(plan.len(), |i| {
        let (s, l) = (plan.shifts[i], plan.orders[i]);
        match side {
            BasisSide::Right => right_taylor(sys, s, l),
            BasisSide::Left => left_taylor(sys, s, l),
        }
    });
    let mut cols: Vec<CMat> = Vec::new();
    for b in blocks {
        cols.extend(b?);
    }
    Ok(hcat(&cols, sys.n))
}

/// Orthonormal `V` with `d^j/ds^j (K^{-1} F)(sigma_i)` in its span for
/// `j <= l_i`.
pub fn interp_basis_right(sys: &StructuredSystem, plan: &ShiftPlan) -> Result<CMat> {
    let raw = hermite_blocks(sys, plan, BasisSide::Right, Execution::default())?;
    Ok(orthonormal_basis(&normalize_columns(raw), RANK_TOL))
}

/// Orthonormal `W` with `d^j/ds^j (K^{-H} G^H)(sigma_i)` in its span.
pub fn interp_basis_left(sys: &StructuredSystem, plan: &ShiftPlan) -> Result<CMat> {
    let raw = hermite_blocks(sys, plan, BasisSide::Left, Execution::default())?;
    Ok(orthonormal_basis(&normalize_columns(raw), RANK_TOL))
}

pub(crate) fn hcat(blocks: &[CMat], n: usize) -> CMat {
    let q: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(n, q);
    let mut col = 0;
    for b in blocks {
        out.columns_mut(col, b.ncols()).copy_from(b);
        col += b.ncols();
    }
    out
}

fn normalize_columns(mut a: CMat) -> CMat {
    for mut col in a.column_iter_mut() {
        let nrm = col.norm();
        if nrm > 0.0 {
            col /= C64::new(nrm, 0.0);
        }
    }
    a
}

/// Output of one SOAR run: orthonormal columns and the number of deflated
/// steps encountered.
#[derive(Clone, Debug)]
pub struct SoarBasis {
    pub basis: CMat,
    pub deflations: usize,
}

/// Second-order Arnoldi with modified Gram-Schmidt (two passes) and
/// deflation. `k0 = K~`, `k1 = C~`, `k2 = M` of the shifted quadratic
/// `K~ + d C~ + d^2 M`. For `adjoint` the recurrence runs on the
/// conjugate-transposed operators.
pub fn soar_core(k0: &Lu, k1: &CMat, k2: &CMat, start: &CMat, r: usize, adjoint: bool) -> Result<SoarBasis> {
    let n = k0.dim();
    let solve = |b: &CMat| if adjoint { k0.solve_adjoint(b) } else { k0.solve(b) };
    let (k1, k2) = if adjoint {
        (k1.adjoint(), k2.adjoint())
    } else {
        (k1.clone(), k2.clone())
    };
    let v0 = solve(start);
    let nv = v0.norm();
    if nv == 0.0 || !nv.is_finite() {
        return Err(Error::Breakdown);
    }
    let mut q: Vec<Option<CMat>> = vec![Some(&v0 / C64::new(nv, 0.0))];
    let mut p: Vec<CMat> = vec![CMat::zeros(n, 1)];
    let mut kept = 1;
    let mut deflations = 0;
    let max_steps = 4 * r + 4;
    let mut step = 0;
    while kept < r && step < max_steps {
        step += 1;
        let j = q.len() - 1;
        let qj = q[j].clone().unwrap_or_else(|| CMat::zeros(n, 1));
        // A q + B p with A = -K~^{-1} C~, B = -K~^{-1} M
        let mut w = -solve(&(&k1 * &qj + &k2 * &p[j]));
        let mut s = qj;
        let before = w.norm();
        for _ in 0..2 {
            for i in 0..=j {
                if let Some(qi) = &q[i] {
                    let t = qi.dotc(&w);
                    w -= qi * t;
                    s -= &p[i] * t;
                }
            }
        }
        let t = w.norm();
        if t <= DEFLATION_TOL * before.max(f64::MIN_POSITIVE) || t == 0.0 {
            deflations += 1;
            log::warn!("SOAR deflation at step {step}");
            if s.norm() <= DEFLATION_TOL {
                break;
            }
            q.push(None);
            p.push(s);
        } else {
            let tc = C64::new(t, 0.0);
            q.push(Some(w / tc));
            p.push(s / tc);
            kept += 1;
        }
    }
    let cols: Vec<CMat> = q.into_iter().flatten().collect();
    Ok(SoarBasis {
        basis: hcat(&cols, n),
        deflations,
    })
}

/// Orthonormal basis of the second-order Krylov subspace
/// `S_r(A, B; v0)` with `A = -K~^{-1} C~`, `B = -K~^{-1} M`, `v0 = K~^{-1} f`
/// at `s0`. Multiple inputs are processed column by column and merged.
pub fn soar_basis(sys: &StructuredSystem, s0: C64, r: usize) -> Result<SoarBasis> {
    soar_side(sys, s0, r, BasisSide::Right)
}

pub fn soar_basis_left(sys: &StructuredSystem, s0: C64, r: usize) -> Result<SoarBasis> {
    soar_side(sys, s0, r, BasisSide::Left)
}

fn soar_side(sys: &StructuredSystem, s0: C64, r: usize, side: BasisSide) -> Result<SoarBasis> {
    let k = sys.operator_taylor(s0, 2)?;
    let lu = Lu::new(&k[0])?;
    let start = match side {
        BasisSide::Right => sys.input_taylor(s0, 0)?.remove(0),
        BasisSide::Left => sys.output.adjoint(),
    };
    let mut cols = Vec::new();
    let mut deflations = 0;
    for j in 0..start.ncols() {
        let b = start.columns(j, 1).into_owned();
        let out = soar_core(&lu, &k[1], &k[2], &b, r, side == BasisSide::Left)?;
        deflations += out.deflations;
        cols.push(out.basis);
    }
    let basis = if cols.len() == 1 {
        cols.pop().expect("one block")
    } else {
        orthonormal_basis(&hcat(&cols, sys.n), RANK_TOL)
    };
    Ok(SoarBasis { basis, deflations })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Strategy {
    /// Transfer-function samples only.
    Standard,
    /// Hermite interpolation up to derivative `order` per shift.
    Sp { order: usize },
    /// `k` SOAR directions per shift and input column.
    Soa { k: usize },
}

impl Strategy {
    pub fn tag(&self) -> &'static str {
        match self {
            Strategy::Standard => "standard",
            Strategy::Sp { .. } => "sp",
            Strategy::Soa { .. } => "soa",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSource {
    pub shift: usize,
    /// Derivative order (sp/standard) or Krylov index (soa).
    pub order: usize,
    /// Input (right) or output (left) column index.
    pub io: usize,
}

/// Oversized candidate basis with per-column provenance. `blocks[i]` is the
/// column range generated at shift `i`.
#[derive(Clone, Debug)]
pub struct PresampleBasis {
    pub columns: CMat,
    pub provenance: Vec<ColumnSource>,
    pub blocks: Vec<std::ops::Range<usize>>,
    pub shifts: Vec<C64>,
    pub strategy: Strategy,
    pub side: BasisSide,
    pub deflations: usize,
}

impl PresampleBasis {
    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }

    pub fn block(&self, i: usize) -> CMat {
        let r = self.blocks[i].clone();
        self.columns.columns(r.start, r.len()).into_owned()
    }
}

struct ShiftBlock {
    cols: Vec<(CMat, ColumnSource)>,
    deflations: usize,
}

fn presample_one(sys: &StructuredSystem, strategy: Strategy, side: BasisSide, i: usize, s: C64) -> Result<ShiftBlock> {
    let mut cols = Vec::new();
    let mut deflations = 0;
    match strategy {
        Strategy::Standard | Strategy::Sp { .. } => {
            let order = match strategy {
                Strategy::Sp { order } => order,
                _ => 0,
            };
            let xs = match side {
                BasisSide::Right => right_taylor(sys, s, order)?,
                BasisSide::Left => left_taylor(sys, s, order)?,
            };
            for (j, x) in xs.iter().enumerate() {
                for io in 0..x.ncols() {
                    cols.push((x.columns(io, 1).into_owned(), ColumnSource { shift: i, order: j, io }));
                }
            }
        }
        Strategy::Soa { k } => {
            if k == 0 {
                return Err(Error::InvalidConfig("soa requires k >= 1".into()));
            }
            let kt = sys.operator_taylor(s, 2)?;
            let lu = Lu::new(&kt[0])?;
            let start = match side {
                BasisSide::Right => sys.input_taylor(s, 0)?.remove(0),
                BasisSide::Left => sys.output.adjoint(),
            };
            for io in 0..start.ncols() {
                let b = start.columns(io, 1).into_owned();
                let out = soar_core(&lu, &kt[1], &kt[2], &b, k, side == BasisSide::Left)?;
                deflations += out.deflations;
                for j in 0..out.basis.ncols() {
                    cols.push((out.basis.columns(j, 1).into_owned(), ColumnSource { shift: i, order: j, io }));
                }
            }
        }
    }
    for (c, _) in cols.iter_mut() {
        let nrm = c.norm();
        if nrm > 0.0 {
            *c /= C64::new(nrm, 0.0);
        }
    }
    Ok(ShiftBlock { cols, deflations })
}

/// Candidate basis from `shifts` (rad/s, on the imaginary axis). `standard`
/// yields `m` (right) or `p` (left) unit columns per shift, `sp` yields
/// `(order + 1)` blocks of those, `soa` up to `k` orthonormal SOAR directions
/// per shift and input column. Shifts are processed independently and
/// concatenated in shift order.
pub fn presample(
    sys: &StructuredSystem,
    strategy: Strategy,
    shifts: &[C64],
    side: BasisSide,
    exec: Execution,
) -> Result<PresampleBasis> {
    if shifts.is_empty() {
        return Err(Error::InvalidConfig("presample needs at least one shift".into()));
    }
    for &s in shifts {
        sys.check_not_pole(s)?;
    }
    let blocks = exec.map_range(shifts.len(), |i| presample_one(sys, strategy, side, i, shifts[i]));
    let mut cols = Vec::new();
    let mut provenance = Vec::new();
    let mut ranges = Vec::with_capacity(shifts.len());
    let mut deflations = 0;
    for b in blocks {
        let b = b?;
        let start = cols.len();
        deflations += b.deflations;
        for (c, src) in b.cols {
            cols.push(c);
            provenance.push(src);
        }
        ranges.push(start..cols.len());
    }
    if deflations > 0 {
        log::warn!("presample: {deflations} SOAR deflations");
    }
    Ok(PresampleBasis {
        columns: hcat(&cols, sys.n),
        provenance,
        blocks: ranges,
        shifts: shifts.to_vec(),
        strategy,
        side,
        deflations,
    })
}
