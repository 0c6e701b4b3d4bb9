//! Second-order balanced truncation.
//!
//! The constant real system is lifted to
//!
//! ```text
//! E = [I 0; 0 M],  A = [0 I; -K -C],  B = [0; F],  D = [G 0]
//! ```
//!
//! and the Gramian factors `P = R R^T`, `Q = L L^T` of the dual Lyapunov
//! equations are split into position rows (`R_p`, `L_p`) and velocity rows
//! (`R_v`, `L_v`). Each variant builds `W`, `V` from SVDs of products of
//! these blocks and projects the second-order matrices directly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{
    complexify, lyapunov_solve, pencil_eigenvalues, qr_pivoted, real_part, svd, CMat, GramianSide, Lu, RMat,
    SvdFactors, RANK_TOL,
};
use crate::reduce::{project, ProjectionPair, Provenance, ReducedModel};
use crate::system::{AffineTerm, CaseTag, Operator, StructuredSystem};

#[derive(Clone, Debug)]
pub struct FirstOrderRealization {
    pub e: RMat,
    pub a: RMat,
    pub b: RMat,
    pub d: RMat,
    pub mass: RMat,
    pub damping: RMat,
    pub stiffness: RMat,
    pub input: RMat,
    pub output: RMat,
}

impl FirstOrderRealization {
    pub fn n(&self) -> usize {
        self.mass.nrows()
    }
}

fn real_constant(m: CMat, what: &str) -> Result<RMat> {
    if m.iter().any(|x| x.im != 0.0) {
        return Err(Error::NotApplicable(format!("{what} has complex entries")));
    }
    Ok(real_part(&m))
}

pub fn first_order_realize(sys: &StructuredSystem) -> Result<FirstOrderRealization> {
    if sys.case != CaseTag::A || !sys.nonlinear.is_empty() {
        return Err(Error::NotConstantCoefficient(format!("Case {:?} system", sys.case)));
    }
    let m = real_constant(sys.constant_operator(Operator::Mass)?, "M")?;
    let c = real_constant(sys.constant_operator(Operator::Damping)?, "C")?;
    let k = real_constant(sys.constant_operator(Operator::Stiffness)?, "K")?;
    let f = real_constant(sys.constant_input()?, "F")?;
    let g = real_constant(sys.output.clone(), "G")?;
    let n = sys.n;
    let mut e = RMat::zeros(2 * n, 2 * n);
    let mut a = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        e[(i, i)] = 1.0;
        a[(i, n + i)] = 1.0;
    }
    e.view_mut((n, n), (n, n)).copy_from(&m);
    a.view_mut((n, 0), (n, n)).copy_from(&(-&k));
    a.view_mut((n, n), (n, n)).copy_from(&(-&c));
    let mut b = RMat::zeros(2 * n, sys.m);
    b.view_mut((n, 0), (n, sys.m)).copy_from(&f);
    let mut d = RMat::zeros(sys.p, 2 * n);
    d.view_mut((0, 0), (sys.p, n)).copy_from(&g);
    Ok(FirstOrderRealization {
        e,
        a,
        b,
        d,
        mass: m,
        damping: c,
        stiffness: k,
        input: f,
        output: g,
    })
}

/// Reason code when balanced truncation cannot be applied to `sys`.
pub fn sobt_applicability(sys: &StructuredSystem) -> std::result::Result<(), &'static str> {
    if sys.case != CaseTag::A || !sys.nonlinear.is_empty() {
        return Err("sobt-requires-case-a");
    }
    if sys.constant_input().is_err() {
        return Err("sobt-frequency-dependent-input");
    }
    if sys.constant_operator(Operator::Mass).is_err() || sys.constant_operator(Operator::Stiffness).is_err() {
        return Err("sobt-requires-case-a");
    }
    match sys.constant_operator(Operator::Damping) {
        Err(_) => return Err("sobt-zero-damping"),
        Ok(c) if c.iter().all(|x| x.norm() == 0.0) => return Err("sobt-zero-damping"),
        Ok(_) => {}
    }
    if !sys.is_real() {
        return Err("sobt-complex-matrices");
    }
    let fo = first_order_realize(sys).map_err(|_| "sobt-requires-case-a")?;
    match pencil_eigenvalues(&fo.a, &fo.e) {
        Ok(ev) => {
            let scale = ev.iter().fold(0.0f64, |m, l| m.max(l.norm()));
            if ev.iter().any(|l| l.re >= -1e-13 * scale) {
                return Err("sobt-unstable-pencil");
            }
        }
        Err(_) => return Err("sobt-unstable-pencil"),
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct PartitionedGramianFactors {
    pub r_p: RMat,
    pub r_v: RMat,
    pub l_p: RMat,
    pub l_v: RMat,
}

impl PartitionedGramianFactors {
    pub fn controllability(&self) -> RMat {
        stack(&self.r_p, &self.r_v)
    }

    pub fn observability(&self) -> RMat {
        stack(&self.l_p, &self.l_v)
    }
}

fn stack(top: &RMat, bottom: &RMat) -> RMat {
    let mut out = RMat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

/// Solves both Lyapunov equations (concurrently when `exec` allows) and
/// splits the factors into position and velocity rows.
pub fn gramian_factors(fo: &FirstOrderRealization, exec: Execution) -> Result<PartitionedGramianFactors> {
    let n = fo.n();
    let ct = fo.d.transpose();
    let (r, l) = exec.join(
        || lyapunov_solve(&fo.a, &fo.e, &fo.b, GramianSide::Controllability),
        || lyapunov_solve(&fo.a, &fo.e, &ct, GramianSide::Observability),
    );
    let (r, l) = (r?, l?);
    Ok(PartitionedGramianFactors {
        r_p: r.rows(0, n).into_owned(),
        r_v: r.rows(n, n).into_owned(),
        l_p: l.rows(0, n).into_owned(),
        l_v: l.rows(n, n).into_owned(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SobtVariant {
    V,
    Fv,
    Vpm,
    Pm,
    Pv,
    Vp,
    P,
    So,
}

impl SobtVariant {
    pub const ALL: [SobtVariant; 8] = [
        SobtVariant::V,
        SobtVariant::Fv,
        SobtVariant::Vpm,
        SobtVariant::Pm,
        SobtVariant::Pv,
        SobtVariant::Vp,
        SobtVariant::P,
        SobtVariant::So,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SobtVariant::V => "v",
            SobtVariant::Fv => "fv",
            SobtVariant::Vpm => "vpm",
            SobtVariant::Pm => "pm",
            SobtVariant::Pv => "pv",
            SobtVariant::Vp => "vp",
            SobtVariant::P => "p",
            SobtVariant::So => "so",
        }
    }
}

impl fmt::Display for SobtVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SobtVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SobtVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown balanced truncation variant `{s}`")))
    }
}

/// Columns `0..r` of `x` scaled by `sigma^{-1/2}`.
fn scaled(x: &RMat, sigma: &[f64], r: usize) -> RMat {
    let mut out = x.columns(0, r).into_owned();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col /= sigma[j].sqrt();
    }
    out
}

fn effective(f: &SvdFactors<f64>, r: usize) -> Result<usize> {
    let rank = f.numerical_rank(RANK_TOL);
    if rank == 0 {
        return Err(Error::RankDeficient { requested: r, rank });
    }
    Ok(r.min(rank))
}

fn solve_mass_transpose(m: &RMat, x: &RMat) -> Result<RMat> {
    Ok(real_part(&Lu::new(&complexify(&m.transpose()))?.solve(&complexify(x))))
}

/// Truncation bases `(W, V)` of the seven single-projection variants.
pub fn sobt_bases(fo: &FirstOrderRealization, g: &PartitionedGramianFactors, variant: SobtVariant, r: usize) -> Result<(RMat, RMat, usize)> {
    let m = &fo.mass;
    let f = &g;
    let (w, v, r_eff) = match variant {
        SobtVariant::V => {
            let s = svd(&(f.l_v.transpose() * m * &f.r_v));
            let r = effective(&s, r)?;
            (&f.l_v * scaled(&s.u, &s.sigma, r), &f.r_v * scaled(&s.t, &s.sigma, r), r)
        }
        SobtVariant::Fv => {
            let s = svd(&(f.l_p.transpose() * &f.r_p));
            let r = effective(&s, r)?;
            let v = &f.r_p * scaled(&s.t, &s.sigma, r);
            (v.clone(), v, r)
        }
        SobtVariant::Vpm => {
            let s = svd(&(f.l_p.transpose() * &f.r_v));
            let r = effective(&s, r)?;
            let w = solve_mass_transpose(m, &(&f.l_p * scaled(&s.u, &s.sigma, r)))?;
            (w, &f.r_v * scaled(&s.t, &s.sigma, r), r)
        }
        SobtVariant::Pm => {
            let s = svd(&(f.l_p.transpose() * &f.r_p));
            let r = effective(&s, r)?;
            let w = solve_mass_transpose(m, &(&f.l_p * scaled(&s.u, &s.sigma, r)))?;
            (w, &f.r_p * scaled(&s.t, &s.sigma, r), r)
        }
        SobtVariant::Pv => {
            let s = svd(&(f.l_v.transpose() * m * &f.r_p));
            let r = effective(&s, r)?;
            (&f.l_v * scaled(&s.u, &s.sigma, r), &f.r_p * scaled(&s.t, &s.sigma, r), r)
        }
        SobtVariant::Vp => {
            let s = svd(&(f.l_p.transpose() * &f.r_v));
            let su = svd(&(f.l_v.transpose() * m * &f.r_p));
            let r = effective(&s, r)?.min(effective(&su, r)?);
            (&f.l_v * scaled(&su.u, &s.sigma, r), &f.r_v * scaled(&s.t, &s.sigma, r), r)
        }
        SobtVariant::P => {
            let s = svd(&(f.l_p.transpose() * &f.r_p));
            let su = svd(&(f.l_v.transpose() * m * &f.r_v));
            let r = effective(&s, r)?.min(effective(&su, r)?);
            (&f.l_v * scaled(&su.u, &s.sigma, r), &f.r_p * scaled(&s.t, &s.sigma, r), r)
        }
        SobtVariant::So => {
            return Err(Error::InvalidConfig("the so variant uses two coupled projections".into()))
        }
    };
    Ok((w, v, r_eff))
}

/// Balanced truncation ROM of order at most `r`. The order is lowered to
/// the number of singular values above `1e-12 sigma_1` when needed; the
/// effective order is recorded in the provenance.
pub fn sobt(sys: &StructuredSystem, fo: &FirstOrderRealization, g: &PartitionedGramianFactors, variant: SobtVariant, r: usize) -> Result<ReducedModel> {
    if r == 0 {
        return Err(Error::RankDeficient { requested: 0, rank: 0 });
    }
    let mut rom = if variant == SobtVariant::So {
        sobt_so(sys, fo, g, r)?
    } else {
        let (w, v, _) = sobt_bases(fo, g, variant, r)?;
        project(sys, &ProjectionPair::verbatim(complexify(&v), complexify(&w)))?
    };
    let r_eff = rom.order();
    rom.provenance = Provenance {
        method: "sobt".into(),
        strategy: None,
        variant: Some(variant.name().into()),
        shifts: Vec::new(),
        r: r_eff,
        deflations: 0,
        notes: if r_eff < r {
            vec![format!("order lowered from {r} to effective rank {r_eff}")]
        } else {
            Vec::new()
        },
    };
    Ok(rom)
}

/// Condition bound above which the coupling `S = W_p^T V_v` is rejected.
pub const MAX_COUPLING_CONDITION: f64 = 1e12;

fn sobt_so(sys: &StructuredSystem, fo: &FirstOrderRealization, f: &PartitionedGramianFactors, r: usize) -> Result<ReducedModel> {
    let m = &fo.mass;
    let sp = svd(&(f.l_p.transpose() * &f.r_p));
    let sv = svd(&(f.l_v.transpose() * m * &f.r_v));
    let r = effective(&sp, r)?.min(effective(&sv, r)?);
    let w_p = &f.l_p * scaled(&sp.u, &sp.sigma, r);
    let v_p = &f.r_p * scaled(&sp.t, &sp.sigma, r);
    let w_v = &f.l_v * scaled(&sv.u, &sv.sigma, r);
    let v_v = &f.r_v * scaled(&sv.t, &sv.sigma, r);
    let s = w_p.transpose() * &v_v;
    let ss = svd(&s);
    let cond = ss.sigma[0] / ss.sigma[r - 1];
    if !cond.is_finite() || cond > MAX_COUPLING_CONDITION {
        return Err(Error::SingularCoupling { condition: cond });
    }
    let s = complexify(&s);
    let (w_v, v_v, v_p) = (complexify(&w_v), complexify(&v_v), complexify(&v_p));
    let wvt = w_v.transpose();
    // X S^{-1} = (S^{-T} X^T)^T
    let s_t_lu = Lu::new(&s.transpose())?;
    let times_s_inv = |x: CMat| -> CMat { s_t_lu.solve(&x.transpose()).transpose() };
    let dyn_terms = |terms: &[AffineTerm]| -> Vec<AffineTerm> {
        terms
            .iter()
            .map(|t| AffineTerm::new(t.coeff.clone(), times_s_inv(&s * (&wvt * &t.matrix * &v_v))))
            .collect()
    };
    let system = StructuredSystem {
        n: r,
        m: sys.m,
        p: sys.p,
        mass: dyn_terms(&sys.mass),
        damping: dyn_terms(&sys.damping),
        stiffness: sys
            .stiffness
            .iter()
            .map(|t| AffineTerm::new(t.coeff.clone(), &s * (&wvt * &t.matrix * &v_p)))
            .collect(),
        nonlinear: Vec::new(),
        input: sys
            .input
            .iter()
            .map(|t| AffineTerm::new(t.coeff.clone(), &s * (&wvt * &t.matrix)))
            .collect(),
        output: &sys.output * &v_p,
        functions: sys.functions.clone(),
        case: sys.case,
        test_frequency: sys.test_frequency,
    };
    Ok(ReducedModel {
        system,
        provenance: Provenance::default(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantMethod {
    Svd,
    Qr,
}

/// One-sided projection `W = V` onto the dominant subspace of the position
/// rows of one Gramian factor. On the observability side these are the
/// rows `L_v`, which carry the position coordinates of the adjoint system.
pub fn dominant_onesided(g: &PartitionedGramianFactors, side: GramianSide, r: usize, method: DominantMethod) -> Result<ProjectionPair> {
    let rows = match side {
        GramianSide::Controllability => &g.r_p,
        GramianSide::Observability => &g.l_v,
    };
    let rows = complexify(rows);
    let v = match method {
        DominantMethod::Svd => {
            let f = svd(&rows);
            let rank = f.numerical_rank(RANK_TOL);
            if r == 0 || r > rank {
                return Err(Error::RankDeficient { requested: r, rank });
            }
            f.u.columns(0, r).into_owned()
        }
        DominantMethod::Qr => {
            let qr = qr_pivoted(&rows, RANK_TOL);
            if r == 0 || r > qr.rank {
                return Err(Error::RankDeficient { requested: r, rank: qr.rank });
            }
            qr.q.columns(0, r).into_owned()
        }
    };
    let mut v = v;
    for x in v.iter_mut() {
        x.im = 0.0;
    }
    Ok(ProjectionPair::verbatim(v.clone(), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::metrics::{linf_rel_error, sweep, FrequencyGrid};
    use crate::synthetic::{generate_synthetic, SyntheticKind, SyntheticModelSpec};

    fn scalar(x: f64) -> CMat {
        CMat::from_element(1, 1, c(x, 0.0))
    }

    fn oscillator() -> StructuredSystem {
        StructuredSystem::second_order(scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0)).unwrap()
    }

    fn chain(n: usize, seed: u64) -> StructuredSystem {
        let spec = SyntheticModelSpec::new(SyntheticKind::ChainARayleigh { alpha: 2.0, beta: 1e-4 }, n, seed);
        generate_synthetic(&spec).unwrap()
    }

    fn residual(a: &RMat, e: &RMat, r: &RMat, z: &RMat) -> f64 {
        let p = r * r.transpose();
        let res = a * &p * e.transpose() + e * &p * a.transpose() + z * z.transpose();
        res.norm() / (z * z.transpose()).norm()
    }

    #[test]
    fn scalar_realization_blocks() {
        let fo = first_order_realize(&oscillator()).unwrap();
        assert_eq!(fo.a, RMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]));
        assert_eq!(fo.e, RMat::identity(2, 2));
        assert_eq!(fo.b, RMat::from_row_slice(2, 1, &[0.0, 1.0]));
    }

    #[test]
    fn pencil_eigenvalues_match_quadratic_eigenvalues() {
        let sys = chain(3, 1);
        let fo = first_order_realize(&sys).unwrap();
        let ev = pencil_eigenvalues(&fo.a, &fo.e).unwrap();
        // companion oracle: M^{-1} applied to the monic linearization
        let n = 3;
        let minv = fo.mass.clone().try_inverse().unwrap();
        let mut comp = RMat::zeros(2 * n, 2 * n);
        comp.view_mut((0, n), (n, n)).copy_from(&RMat::identity(n, n));
        comp.view_mut((n, 0), (n, n)).copy_from(&(-&minv * &fo.stiffness));
        comp.view_mut((n, n), (n, n)).copy_from(&(-&minv * &fo.damping));
        let oracle = comp.complex_eigenvalues();
        for l in oracle.iter() {
            let det = (complexify(&fo.mass) * (l * l) + complexify(&fo.damping) * *l + complexify(&fo.stiffness)).determinant();
            assert!(det.norm() < 1e-6 * complexify(&fo.stiffness).determinant().norm());
            assert!(ev.iter().any(|e| (e - l).norm() < 1e-8 * l.norm()));
        }
    }

    #[test]
    fn scalar_gramians_solve_their_equations() {
        let fo = first_order_realize(&oscillator()).unwrap();
        let g = gramian_factors(&fo, Execution::default()).unwrap();
        assert!(residual(&fo.a, &fo.e, &g.controllability(), &fo.b) < 1e-10);
        assert!(residual(&fo.a.transpose(), &fo.e.transpose(), &g.observability(), &fo.d.transpose()) < 1e-10);
        // 3-unknown oracle: P = [[p1, p2], [p2, p3]]
        let p = g.controllability() * g.controllability().transpose();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-12 && p[(0, 1)].abs() < 1e-12 && (p[(1, 1)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_system_has_equal_gramians() {
        let sys = chain(6, 2);
        let f = sys.constant_input().unwrap();
        let sys = StructuredSystem { output: f.transpose(), p: 1, ..sys };
        let fo = first_order_realize(&sys).unwrap();
        let g = gramian_factors(&fo, Execution::default()).unwrap();
        // the adjoint state splits into (M q' + C q, q), so the velocity
        // block of Q is the position block of P
        let pp = &g.r_p * g.r_p.transpose();
        let qv = &g.l_v * g.l_v.transpose();
        assert!((&pp - &qv).norm() < 1e-10 * pp.norm());
        let d1 = dominant_onesided(&g, GramianSide::Controllability, 3, DominantMethod::Svd).unwrap();
        let d2 = dominant_onesided(&g, GramianSide::Observability, 3, DominantMethod::Svd).unwrap();
        let cos = svd(&(d1.v.adjoint() * &d2.v)).sigma;
        assert!(cos.iter().all(|s| (s - 1.0).abs() < 1e-8), "{cos:?}");
    }

    #[test]
    fn every_variant_is_exact_for_a_scalar_oscillator() {
        let sys = oscillator();
        let fo = first_order_realize(&sys).unwrap();
        let g = gramian_factors(&fo, Execution::default()).unwrap();
        let grid = FrequencyGrid::linspace_hz(0.01, 2.0, 50).unwrap();
        let fom = sweep(&sys, &grid);
        for v in SobtVariant::ALL {
            let rom = sobt(&sys, &fo, &g, v, 1).unwrap();
            let e = linf_rel_error(&fom, &sweep(&rom, &grid)).unwrap();
            assert!(e < 1e-10, "{v}: {e:e}");
        }
    }

    #[test]
    fn mass_identity_for_v_family() {
        let sys = chain(30, 4);
        let fo = first_order_realize(&sys).unwrap();
        let g = gramian_factors(&fo, Execution::default()).unwrap();
        for v in [SobtVariant::V, SobtVariant::Vpm, SobtVariant::Pm, SobtVariant::Pv] {
            let (w, vv, r) = sobt_bases(&fo, &g, v, 10).unwrap();
            let gram = w.transpose() * &fo.mass * vv;
            assert!((gram - RMat::identity(r, r)).norm() < 1e-10, "{v}");
        }
        let (w, v, _) = sobt_bases(&fo, &g, SobtVariant::Fv, 10).unwrap();
        assert_eq!(w, v);
    }

    #[test]
    fn so_variant_at_full_rank_reproduces_transfer() {
        let sys = chain(12, 5);
        let fo = first_order_realize(&sys).unwrap();
        let g = gramian_factors(&fo, Execution::default()).unwrap();
        let rom = sobt(&sys, &fo, &g, SobtVariant::So, 24).unwrap();
        let grid = FrequencyGrid::linspace_hz(1.0, 200.0, 100).unwrap();
        let e = linf_rel_error(&sweep(&sys, &grid), &sweep(&rom, &grid)).unwrap();
        assert!(e < 1e-8, "{e:e} at r = {}", rom.order());
        assert!(rom.imaginary_ratio() == 0.0);
    }

    #[test]
    fn applicability_codes() {
        assert_eq!(sobt_applicability(&chain(6, 1)), Ok(()));
        let hyst = generate_synthetic(&SyntheticModelSpec::new(SyntheticKind::ChainAHysteretic { eta: 0.01 }, 6, 1)).unwrap();
        assert_eq!(sobt_applicability(&hyst), Err("sobt-zero-damping"));
        let undamped = generate_synthetic(&SyntheticModelSpec::new(SyntheticKind::ChainARayleigh { alpha: 0.0, beta: 0.0 }, 6, 1)).unwrap();
        assert_eq!(sobt_applicability(&undamped), Err("sobt-zero-damping"));
        let cavity = generate_synthetic(&SyntheticModelSpec::new(SyntheticKind::CavityB { c: 343.0, admittance: 0.01 }, 8, 1)).unwrap();
        assert_eq!(sobt_applicability(&cavity), Err("sobt-requires-case-a"));
        let cc = generate_synthetic(&SyntheticModelSpec::new(SyntheticKind::ChainC { k: 2, alpha: 1.0, beta: 1e-5 }, 8, 1)).unwrap();
        assert_eq!(sobt_applicability(&cc), Err("sobt-requires-case-a"));
        let unstable = StructuredSystem::second_order(scalar(1.0), scalar(-0.1), scalar(1.0), scalar(1.0), scalar(1.0)).unwrap();
        assert_eq!(sobt_applicability(&unstable), Err("sobt-unstable-pencil"));
        assert!(matches!(first_order_realize(&hyst), Err(Error::NotConstantCoefficient(_))));
    }

    #[test]
    fn dominant_subspace_errors_shrink_with_order() {
        let sys = chain(20, 6);
        let fo = first_order_realize(&sys).unwrap();
        let g = gramian_factors(&fo, Execution::default()).unwrap();
        let grid = FrequencyGrid::linspace_hz(1.0, 100.0, 80).unwrap();
        let fom = sweep(&sys, &grid);
        let err = |r| {
            let pair = dominant_onesided(&g, GramianSide::Controllability, r, DominantMethod::Svd).unwrap();
            linf_rel_error(&fom, &sweep(&project(&sys, &pair).unwrap(), &grid)).unwrap()
        };
        let (e5, e10) = (err(5), err(10));
        assert!(e10.is_finite() && e10 <= e5, "{e5:e} {e10:e}");
        let full = g.r_p.ncols().min(20);
        assert!(dominant_onesided(&g, GramianSide::Controllability, full + 1, DominantMethod::Qr).is_err());
    }
}
