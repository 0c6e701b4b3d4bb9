//! Expansion-point selection and basis compression: equidistant shifts,
//! pivoted-QR averaging (`avg`), dominant left singular vectors (`minrel`)
//! and greedy discrete L-infinity selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::interp::{hcat, PlanSide, PresampleBasis, ShiftPlan};
use crate::linalg::{complexify, imag_part, qr_pivoted, real_part, svd, svd_truncate, CMat, RANK_TOL};
use crate::metrics::{argmax_error, linf_rel_error, pointwise_errors, sweep_with, FrequencyGrid, Sweep};
use crate::reduce::{project, ProjectionPair, ProjectionVariant, ReducedModel};
use crate::system::StructuredSystem;

/// Greedy candidates tried after the nearest one raised the error.
pub const MAX_REJECTIONS: usize = 5;

/// Orthonormal real basis of `span[Re V, Im V]`, stored as a complex
/// matrix with zero imaginary part.
pub fn realify(v: &CMat) -> CMat {
    let (n, r) = v.shape();
    let mut stacked = CMat::zeros(n, 2 * r);
    stacked.columns_mut(0, r).copy_from(&complexify(&real_part(v)));
    stacked.columns_mut(r, r).copy_from(&complexify(&imag_part(v)));
    let mut q = qr_pivoted(&stacked, RANK_TOL).range_basis();
    for x in q.iter_mut() {
        x.im = 0.0;
    }
    q
}

/// `count` equidistant frequencies in `[fmin, fmax]` Hz preceded by `extra`.
pub fn equi_frequencies(fmin: f64, fmax: f64, count: usize, extra: &[f64]) -> Result<Vec<f64>> {
    if !(fmin < fmax) || count == 0 {
        return Err(Error::InvalidConfig(format!(
            "equidistant shifts need fmin < fmax and count >= 1 (got {fmin}, {fmax}, {count})"
        )));
    }
    let mut out = extra.to_vec();
    out.extend(crate::metrics::linspace(fmin, fmax, count));
    Ok(out)
}

pub fn equi_shifts(fmin: f64, fmax: f64, count: usize, extra: &[f64]) -> Result<ShiftPlan> {
    Ok(ShiftPlan::from_hz(&equi_frequencies(fmin, fmax, count, extra)?, 0, PlanSide::Both))
}

/// Frequencies for a total of `total` shifts: the first `total` extras when
/// `total` does not exceed their number, otherwise all extras plus an
/// equidistant fill.
pub fn equi_frequencies_total(fmin: f64, fmax: f64, total: usize, extra: &[f64]) -> Result<Vec<f64>> {
    if total == 0 {
        return Err(Error::InvalidConfig("need at least one shift".into()));
    }
    if total <= extra.len() {
        return Ok(extra[..total].to_vec());
    }
    equi_frequencies(fmin, fmax, total - extra.len(), extra)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    TargetOrder,
    Exhausted,
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub shift: usize,
    pub r: usize,
    pub error: f64,
    /// Nearer candidates that were tried first and rejected.
    pub rejected: Vec<usize>,
    /// Chosen as the best remaining candidate after every near one was rejected.
    pub fallback: bool,
}

#[derive(Clone, Debug)]
pub struct SelectionResult {
    pub v: CMat,
    pub w: Option<CMat>,
    pub method: String,
    /// Chosen presample columns (avg), or chosen shift indices (greedy).
    pub selected: Vec<usize>,
    pub history: Vec<GreedyStep>,
    pub stop: Option<StopReason>,
}

impl SelectionResult {
    pub fn order(&self) -> usize {
        self.v.ncols()
    }
}

/// Leading `r` columns of the pivoted QR of the presample matrix.
pub fn avg_compress(pre: &PresampleBasis, r: usize) -> Result<SelectionResult> {
    let qr = qr_pivoted(&pre.columns, RANK_TOL);
    if r == 0 || r > qr.rank {
        return Err(Error::RankDeficient { requested: r, rank: qr.rank });
    }
    Ok(SelectionResult {
        v: qr.q.columns(0, r).into_owned(),
        w: None,
        method: "avg".into(),
        selected: qr.perm[..r].to_vec(),
        history: Vec::new(),
        stop: None,
    })
}

/// Leading `r` left singular vectors of the presample matrix.
pub fn minrel_compress(pre: &PresampleBasis, r: usize) -> Result<SelectionResult> {
    let f = svd(&pre.columns);
    if r == 0 {
        return Err(Error::RankDeficient { requested: 0, rank: f.numerical_rank(RANK_TOL) });
    }
    let (u, _, _) = svd_truncate(&f, r, RANK_TOL)?;
    Ok(SelectionResult {
        v: u,
        w: None,
        method: "minrel".into(),
        selected: Vec::new(),
        history: Vec::new(),
        stop: None,
    })
}

/// Greedy settings.
#[derive(Clone, Copy, Debug)]
pub struct GreedyOptions {
    pub variant: ProjectionVariant,
    pub r_target: usize,
    pub tol: f64,
    pub exec: Execution,
}

fn block_basis(pre: &PresampleBasis, chosen: &[usize], n: usize) -> CMat {
    let blocks: Vec<CMat> = chosen.iter().map(|&i| pre.block(i)).collect();
    hcat(&blocks, n)
}

fn nearest_candidates(pre: &PresampleBasis, omega: f64, taken: &[bool]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pre.shifts.len()).filter(|&i| !taken[i]).collect();
    idx.sort_by(|&a, &b| {
        let da = (pre.shifts[a].im - omega).abs();
        let db = (pre.shifts[b].im - omega).abs();
        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    idx
}

struct Trial {
    rom: ReducedModel,
    pair: ProjectionPair,
    errors: Vec<f64>,
    linf: f64,
}

fn trial(
    sys: &StructuredSystem,
    grid: &FrequencyGrid,
    fom: &Sweep,
    right: &PresampleBasis,
    left: Option<&PresampleBasis>,
    chosen: &[usize],
    opts: &GreedyOptions,
) -> Result<Trial> {
    let v = opts.variant.needs_right().then(|| block_basis(right, chosen, sys.n));
    let w = if opts.variant.needs_left() {
        Some(block_basis(left.unwrap_or(right), chosen, sys.n))
    } else {
        None
    };
    let pair = ProjectionPair::from_variant(opts.variant, v.as_ref(), w.as_ref())?;
    let rom = project(sys, &pair)?;
    let rs = sweep_with(&rom, grid, opts.exec);
    let errors = pointwise_errors(fom, &rs)?;
    let linf = linf_rel_error(fom, &rs)?;
    Ok(Trial { rom, pair, errors, linf })
}

/// Greedy discrete L-infinity selection over presampled blocks (one block
/// per shift). Seeds with the shift nearest the grid point of largest
/// `||H||`, then repeatedly appends the block of the unselected shift
/// nearest the current error maximum. A block that would raise the grid
/// error is rejected and the next-nearest shift tried. After
/// [`MAX_REJECTIONS`] rejections the remaining candidate with the lowest
/// error is taken if it does not raise the error, otherwise the loop stops
/// as `Stalled`.
pub fn greedy_linf(
    sys: &StructuredSystem,
    grid: &FrequencyGrid,
    fom: &Sweep,
    right: &PresampleBasis,
    left: Option<&PresampleBasis>,
    opts: GreedyOptions,
) -> Result<(SelectionResult, ReducedModel)> {
    if let Some(l) = left {
        if l.shifts != right.shifts {
            return Err(Error::DimensionMismatch("left and right presamples use different shifts".into()));
        }
    }
    if opts.variant.needs_left() && left.is_none() && opts.variant.needs_right() {
        return Err(Error::InvalidConfig(format!("{} needs a left presample", opts.variant)));
    }
    let basis_src = if opts.variant.needs_right() { right } else { left.unwrap_or(right) };
    let omega = grid.omega();
    let norms = fom.norms();
    let peak = argmax_error(&norms).ok_or(Error::ZeroReference)?;
    let mut taken = vec![false; basis_src.shifts.len()];
    let seed = nearest_candidates(basis_src, omega[peak], &taken)[0];
    taken[seed] = true;
    let mut chosen = vec![seed];
    let mut current = trial(sys, grid, fom, right, left, &chosen, &opts)?;
    let mut history = vec![GreedyStep {
        shift: seed,
        r: current.rom.order(),
        error: current.linf,
        rejected: Vec::new(),
        fallback: false,
    }];
    let stop = loop {
        if current.linf <= opts.tol {
            break StopReason::Tolerance;
        }
        if current.rom.order() >= opts.r_target {
            break StopReason::TargetOrder;
        }
        if taken.iter().all(|&t| t) {
            break StopReason::Exhausted;
        }
        let at = argmax_error(&current.errors).ok_or(Error::ZeroReference)?;
        let mut rejected = Vec::new();
        let mut accepted = None;
        let mut fallback: Option<(usize, Vec<usize>, Trial)> = None;
        for (k, cand) in nearest_candidates(basis_src, omega[at], &taken).into_iter().enumerate() {
            let mut next = chosen.clone();
            next.push(cand);
            let result = trial(sys, grid, fom, right, left, &next, &opts);
            if k <= MAX_REJECTIONS {
                match result {
                    Ok(t) if t.linf <= current.linf + 1e-12 => {
                        accepted = Some((cand, next, t));
                        break;
                    }
                    _ => rejected.push(cand),
                }
            } else if let Ok(t) = result {
                if t.linf <= current.linf + 1e-12 && fallback.as_ref().map_or(true, |b| t.linf < b.2.linf) {
                    fallback = Some((cand, next, t));
                }
            }
        }
        let used_fallback = accepted.is_none() && fallback.is_some();
        let accepted = accepted.or(fallback);
        match accepted {
            Some((cand, next, t)) => {
                taken[cand] = true;
                chosen = next;
                current = t;
                history.push(GreedyStep {
                    shift: cand,
                    r: current.rom.order(),
                    error: current.linf,
                    rejected,
                    fallback: used_fallback,
                });
            }
            None => break StopReason::Stalled,
        }
    };
    if stop == StopReason::Exhausted {
        log::warn!("greedy selection used every candidate block before reaching r = {}", opts.r_target);
    }
    let result = SelectionResult {
        v: current.pair.v.clone(),
        w: Some(current.pair.w.clone()),
        method: "linf".into(),
        selected: chosen,
        history,
        stop: Some(stop),
    };
    Ok((result, current.rom))
}
