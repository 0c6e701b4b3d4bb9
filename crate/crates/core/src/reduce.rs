//! Structure-preserving projection. Every affine term is reduced on its own,
//! `M_k -> W^H M_k V`, `F_k -> W^H F_k`, `G -> G V`, so the reduced system
//! carries the same coefficient tags as its parent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_abs_imag, orthonormal_basis, CMat, C64, RANK_TOL};
use crate::select::realify;
use crate::system::{AffineTerm, Operator, StructuredSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionVariant {
    Tsimag,
    Tsreal,
    Osimaginput,
    Osrealinput,
    Osimagoutput,
    Osrealoutput,
}

impl ProjectionVariant {
    pub const ALL: [ProjectionVariant; 6] = [
        ProjectionVariant::Tsimag,
        ProjectionVariant::Tsreal,
        ProjectionVariant::Osimaginput,
        ProjectionVariant::Osrealinput,
        ProjectionVariant::Osimagoutput,
        ProjectionVariant::Osrealoutput,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProjectionVariant::Tsimag => "tsimag",
            ProjectionVariant::Tsreal => "tsreal",
            ProjectionVariant::Osimaginput => "osimaginput",
            ProjectionVariant::Osrealinput => "osrealinput",
            ProjectionVariant::Osimagoutput => "osimagoutput",
            ProjectionVariant::Osrealoutput => "osrealoutput",
        }
    }

    pub fn is_real(self) -> bool {
        matches!(
            self,
            ProjectionVariant::Tsreal | ProjectionVariant::Osrealinput | ProjectionVariant::Osrealoutput
        )
    }

    pub fn needs_right(self) -> bool {
        !matches!(self, ProjectionVariant::Osimagoutput | ProjectionVariant::Osrealoutput)
    }

    pub fn needs_left(self) -> bool {
        !matches!(self, ProjectionVariant::Osimaginput | ProjectionVariant::Osrealinput)
    }
}

impl fmt::Display for ProjectionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectionVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProjectionVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown projection variant `{s}`")))
    }
}

/// Right and left bases. `variant` is `None` for prescribed oblique pairs
/// (balanced truncation), which are used verbatim.
#[derive(Clone, Debug)]
pub struct ProjectionPair {
    pub v: CMat,
    pub w: CMat,
    pub variant: Option<ProjectionVariant>,
    pub real: bool,
    pub orthonormal: bool,
}

fn orthonormalize(a: &CMat, real: bool) -> CMat {
    if real {
        realify(a)
    } else {
        orthonormal_basis(a, RANK_TOL)
    }
}

impl ProjectionPair {
    /// Builds the pair for `variant` from whichever bases it uses. Real
    /// variants realify, every variant orthonormalizes. Two-sided bases of
    /// different numerical rank are cut to the smaller one.
    pub fn from_variant(variant: ProjectionVariant, v: Option<&CMat>, w: Option<&CMat>) -> Result<Self> {
        let real = variant.is_real();
        let need = |b: Option<&CMat>, what: &str| {
            b.cloned()
                .ok_or_else(|| Error::InvalidConfig(format!("{variant} needs a {what} basis")))
        };
        let (v, w) = match (variant.needs_right(), variant.needs_left()) {
            (true, true) => {
                let mut v = orthonormalize(&need(v, "right")?, real);
                let mut w = orthonormalize(&need(w, "left")?, real);
                let r = v.ncols().min(w.ncols());
                v = v.columns(0, r).into_owned();
                w = w.columns(0, r).into_owned();
                (v, w)
            }
            (true, false) => {
                let v = orthonormalize(&need(v, "right")?, real);
                (v.clone(), v)
            }
            _ => {
                let w = orthonormalize(&need(w, "left")?, real);
                (w.clone(), w)
            }
        };
        Ok(ProjectionPair {
            v,
            w,
            variant: Some(variant),
            real,
            orthonormal: true,
        })
    }

    /// Galerkin pair `W = V`, orthonormalized.
    pub fn galerkin(v: &CMat) -> Self {
        let v = orthonormal_basis(v, RANK_TOL);
        let real = max_abs_imag(&v) == 0.0;
        ProjectionPair {
            w: v.clone(),
            v,
            variant: None,
            real,
            orthonormal: true,
        }
    }

    /// Pair used exactly as given.
    pub fn verbatim(v: CMat, w: CMat) -> Self {
        let real = max_abs_imag(&v) == 0.0 && max_abs_imag(&w) == 0.0;
        ProjectionPair {
            v,
            w,
            variant: None,
            real,
            orthonormal: false,
        }
    }

    pub fn order(&self) -> usize {
        self.v.ncols()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub strategy: Option<String>,
    pub variant: Option<String>,
    pub shifts: Vec<C64>,
    pub r: usize,
    #[serde(default)]
    pub deflations: usize,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedModel {
    pub system: StructuredSystem,
    pub provenance: Provenance,
}

impl ReducedModel {
    pub fn order(&self) -> usize {
        self.system.n
    }

    pub fn eval(&self, s: C64) -> Result<CMat> {
        eval_reduced_transfer(self, s)
    }

    /// Largest imaginary entry over all reduced matrices relative to the
    /// largest entry.
    pub fn imaginary_ratio(&self) -> f64 {
        let sys = &self.system;
        let mats = Operator::ALL
            .iter()
            .flat_map(|&op| sys.terms(op).iter().map(|t| &t.matrix))
            .chain(sys.input.iter().map(|t| &t.matrix))
            .chain(std::iter::once(&sys.output));
        let (mut im, mut all) = (0.0f64, 0.0f64);
        for m in mats {
            im = im.max(max_abs_imag(m));
            all = all.max(max_abs(m));
        }
        if all == 0.0 {
            0.0
        } else {
            im / all
        }
    }
}

/// Reduces every term of `sys` with `pair`. Bases of a variant pair are
/// expected orthonormal already; raw bases should go through
/// [`ProjectionPair::from_variant`] or [`ProjectionPair::galerkin`].
pub fn project(sys: &StructuredSystem, pair: &ProjectionPair) -> Result<ReducedModel> {
    let (v, w) = (&pair.v, &pair.w);
    if v.nrows() != sys.n || w.nrows() != sys.n || v.ncols() != w.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "projection pair V {:?}, W {:?} for n = {}",
            v.shape(),
            w.shape(),
            sys.n
        )));
    }
    let r = v.ncols();
    if r == 0 {
        return Err(Error::DimensionMismatch("empty projection basis".into()));
    }
    let wh = w.adjoint();
    let reduce_terms = |terms: &[AffineTerm]| -> Vec<AffineTerm> {
        terms
            .iter()
            .map(|t| AffineTerm::new(t.coeff.clone(), &wh * &t.matrix * v))
            .collect()
    };
    let system = StructuredSystem {
        n: r,
        m: sys.m,
        p: sys.p,
        mass: reduce_terms(&sys.mass),
        damping: reduce_terms(&sys.damping),
        stiffness: reduce_terms(&sys.stiffness),
        nonlinear: reduce_terms(&sys.nonlinear),
        input: sys
            .input
            .iter()
            .map(|t| AffineTerm::new(t.coeff.clone(), &wh * &t.matrix))
            .collect(),
        output: &sys.output * v,
        functions: sys.functions.clone(),
        case: sys.case,
        test_frequency: sys.test_frequency,
    };
    Ok(ReducedModel {
        system,
        provenance: Provenance {
            variant: pair.variant.map(|v| v.name().to_string()),
            r,
            ..Default::default()
        },
    })
}

pub fn eval_reduced_transfer(rom: &ReducedModel, s: C64) -> Result<CMat> {
    rom.system.eval_transfer(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{hz_to_shift, interp_basis_left, interp_basis_right, PlanSide, ShiftPlan};
    use crate::linalg::c;
    use crate::synthetic::{generate_synthetic, SyntheticKind, SyntheticModelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(n: usize) -> StructuredSystem {
        generate_synthetic(&SyntheticModelSpec::new(
            SyntheticKind::ChainARayleigh { alpha: 0.5, beta: 1e-5 },
            n,
            3,
        ))
        .unwrap()
    }

    fn grid() -> Vec<C64> {
        (0..30).map(|i| hz_to_shift(1.0 + 4.0 * i as f64)).collect()
    }

    /// Max deviation over the grid relative to the largest reference value.
    fn grid_error(rom: &ReducedModel, reference: impl Fn(C64) -> CMat) -> f64 {
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for s in grid() {
            let h = reference(s);
            num = num.max((rom.eval(s).unwrap() - &h).norm());
            den = den.max(h.norm());
        }
        num / den
    }

    #[test]
    fn identity_projection_reproduces_system() {
        let sys = chain(8);
        let eye = CMat::identity(8, 8);
        let rom = project(&sys, &ProjectionPair::verbatim(eye.clone(), eye)).unwrap();
        assert_eq!(rom.system.stiffness, sys.stiffness);
        assert_eq!(rom.system.output, sys.output);
    }

    #[test]
    fn full_rank_similarity_keeps_transfer() {
        let sys = chain(10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = CMat::from_fn(10, 10, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rom = project(&sys, &ProjectionPair::verbatim(v.clone(), v)).unwrap();
        assert!(grid_error(&rom, |s| sys.eval_transfer(s).unwrap()) < 1e-10);
    }

    #[test]
    fn reduced_transfer_matches_full_matrix_formula() {
        let sys = chain(25);
        let plan = ShiftPlan::from_hz(&[10.0, 40.0, 90.0], 1, PlanSide::Both);
        let v = interp_basis_right(&sys, &plan).unwrap();
        let w = interp_basis_left(&sys, &plan).unwrap();
        let pair = ProjectionPair::from_variant(ProjectionVariant::Tsimag, Some(&v), Some(&w)).unwrap();
        let rom = project(&sys, &pair).unwrap();
        let direct = |s: C64| {
            let k = sys.assemble_operator(s).unwrap();
            let f = sys.assemble_input(s).unwrap();
            let kr = pair.w.adjoint() * k * &pair.v;
            &sys.output * &pair.v * kr.try_inverse().unwrap() * pair.w.adjoint() * f
        };
        assert!(grid_error(&rom, direct) < 1e-10);
    }

    #[test]
    fn redundant_columns_leave_rom_unchanged() {
        let sys = chain(20);
        let plan = ShiftPlan::from_hz(&[5.0, 50.0], 0, PlanSide::Input);
        let v = interp_basis_right(&sys, &plan).unwrap();
        let extra = &v.column(0) * c(2.0, -1.0) + &v.column(1) * c(0.5, 0.0);
        let mut wide = CMat::zeros(20, 3);
        wide.columns_mut(0, 2).copy_from(&v);
        wide.column_mut(2).copy_from(&extra);
        let a = project(&sys, &ProjectionPair::galerkin(&v)).unwrap();
        let b = project(&sys, &ProjectionPair::galerkin(&wide)).unwrap();
        assert_eq!(b.order(), 2);
        assert!(grid_error(&b, |s| a.eval(s).unwrap()) < 1e-10);
    }

    #[test]
    fn real_pair_gives_real_matrices() {
        let sys = chain(20);
        let plan = ShiftPlan::from_hz(&[5.0, 50.0], 1, PlanSide::Input);
        let v = interp_basis_right(&sys, &plan).unwrap();
        let pair = ProjectionPair::from_variant(ProjectionVariant::Osrealinput, Some(&v), None).unwrap();
        assert!(pair.real);
        let rom = project(&sys, &pair).unwrap();
        assert!(rom.imaginary_ratio() <= 1e-13);
        assert_eq!(rom.system.mass.len(), sys.mass.len());
        assert_eq!(rom.system.damping[0].coeff, sys.damping[0].coeff);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in ProjectionVariant::ALL {
            assert_eq!(v.name().parse::<ProjectionVariant>().unwrap(), v);
        }
        assert!("both".parse::<ProjectionVariant>().is_err());
    }

    #[test]
    fn shape_errors() {
        let sys = chain(6);
        let pair = ProjectionPair::verbatim(CMat::zeros(5, 2), CMat::zeros(5, 2));
        assert!(matches!(project(&sys, &pair), Err(Error::DimensionMismatch(_))));
    }
}
