//! Batch reduction campaigns: run configuration, validation and execution.
//!
//! A campaign reduces one system with every requested combination of
//! method, presampling strategy and projection variant over an order
//! schedule, and writes one error curve per combination, a score table and
//! a summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aaa::{fit_functions, rationalize, DEFAULT_MAX_ORDER, DEFAULT_TOL};
use crate::balance::{dominant_onesided, first_order_realize, gramian_factors, sobt, sobt_applicability, DominantMethod, SobtVariant};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::interp::{hz_to_shift, presample, BasisSide, PresampleBasis, Strategy};
use crate::io::{load_system, save_reduced, write_atomic};
use crate::linalg::{complexify, imag_part, real_part, CMat, GramianSide};
use crate::metrics::{linf_rel_error, linspace, morscore, sweep_with, ErrorCurve, FrequencyGrid, Sweep};
use crate::reduce::{project, ProjectionPair, ProjectionVariant, Provenance, ReducedModel};
use crate::select::{avg_compress, equi_frequencies, equi_frequencies_total, greedy_linf, minrel_compress, GreedyOptions, StopReason};
use crate::synthetic::{generate_synthetic, SyntheticModelSpec};
use crate::system::{CaseTag, ScalarFunction, StructuredSystem};

pub const METHODS: [&str; 5] = ["equi", "avg", "linf", "minrel", "sobt"];
pub const STRATEGIES: [&str; 3] = ["standard", "sp", "soa"];
pub const DOMINANT_VARIANTS: [&str; 2] = ["dominant_c", "dominant_o"];

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SystemSource {
    /// Manifest path, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticModelSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub fmin: f64,
    pub fmax: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderSchedule {
    List(Vec<usize>),
    Range { start: usize, stop: usize, step: usize },
}

impl OrderSchedule {
    pub fn orders(&self) -> Vec<usize> {
        match self {
            OrderSchedule::List(v) => v.clone(),
            OrderSchedule::Range { start, stop, step } => {
                if *step == 0 {
                    return Vec::new();
                }
                (*start..=*stop).step_by(*step).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub eps: f64,
    pub r_max: usize,
}

fn default_aaa_samples() -> usize {
    500
}

fn default_case_c_order() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseCConfig {
    /// Replace named functions by AAA fits before reduction.
    #[serde(default = "default_true")]
    pub rationalize: bool,
    #[serde(default = "default_aaa_tol")]
    pub aaa_tol: f64,
    #[serde(default = "default_aaa_max_order")]
    pub aaa_max_order: usize,
    #[serde(default = "default_aaa_samples")]
    pub aaa_samples: usize,
    /// Derivative order used by `sp` presampling on Case C systems.
    #[serde(default = "default_case_c_order")]
    pub sp_order: usize,
}

fn default_true() -> bool {
    true
}

fn default_aaa_tol() -> f64 {
    DEFAULT_TOL
}

fn default_aaa_max_order() -> usize {
    DEFAULT_MAX_ORDER
}

impl Default for CaseCConfig {
    fn default() -> Self {
        CaseCConfig {
            rationalize: true,
            aaa_tol: DEFAULT_TOL,
            aaa_max_order: DEFAULT_MAX_ORDER,
            aaa_samples: default_aaa_samples(),
            sp_order: default_case_c_order(),
        }
    }
}

fn default_shifts() -> usize {
    20
}

fn default_soa_k() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: String,
    #[serde(default)]
    pub strategies: Vec<String>,
    #[serde(default)]
    pub variants: Vec<String>,
    /// Presample shift count for avg, minrel and linf.
    #[serde(default = "default_shifts")]
    pub shifts: usize,
    /// Frequencies (Hz) placed before the equidistant ones.
    #[serde(default)]
    pub extra_hz: Vec<f64>,
    /// Derivative order for `sp`; defaults to 1, or to the Case C order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sp_order: Option<usize>,
    #[serde(default = "default_soa_k")]
    pub soa_k: usize,
    /// Greedy stopping tolerance on the discrete error.
    #[serde(default)]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub export_roms: bool,
    pub system: SystemSource,
    pub grid: GridConfig,
    pub orders: OrderSchedule,
    pub score: ScoreConfig,
    #[serde(default)]
    pub case_c: CaseCConfig,
    pub methods: Vec<MethodSpec>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(m) = &cfg.system.manifest {
            if m.is_relative() {
                cfg.system.manifest = Some(base.join(m));
            }
        }
        if let Some(o) = &cfg.out {
            if o.is_relative() {
                cfg.out = Some(base.join(o));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// The configuration cannot run.
    Error,
    /// One combination does not apply to the system and will be skipped.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combination: Option<String>,
    pub message: String,
}

impl Diagnostic {
    fn error(code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code: code.into(),
            combination: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::NotApplicable => "not-applicable",
        };
        match &self.combination {
            Some(c) => write!(f, "{sev} [{}] {c}: {}", self.code, self.message),
            None => write!(f, "{sev} [{}] {}", self.code, self.message),
        }
    }
}

/// One (method, strategy, variant) cell of the method matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Combination {
    pub tag: String,
    pub method: String,
    pub strategy: Option<Strategy>,
    pub variant: String,
    pub spec: MethodSpec,
}

fn parse_strategy(name: &str, spec: &MethodSpec, case: CaseTag, cc: &CaseCConfig) -> Option<Strategy> {
    match name {
        "standard" => Some(Strategy::Standard),
        "sp" => {
            let order = spec.sp_order.unwrap_or(if case == CaseTag::C { cc.sp_order } else { 1 });
            Some(Strategy::Sp { order })
        }
        "soa" => Some(Strategy::Soa { k: spec.soa_k }),
        _ => None,
    }
}

fn known_variant(method: &str, v: &str) -> bool {
    if method == "sobt" {
        v.parse::<SobtVariant>().is_ok() || DOMINANT_VARIANTS.contains(&v)
    } else {
        v.parse::<ProjectionVariant>().is_ok()
    }
}

/// Expands the method matrix. Unknown names become diagnostics.
pub fn combinations(cfg: &RunConfig, case: CaseTag) -> (Vec<Combination>, Vec<Diagnostic>) {
    let mut out = Vec::new();
    let mut diags = Vec::new();
    let mut seen = BTreeSet::new();
    for spec in &cfg.methods {
        let method = spec.method.as_str();
        if !METHODS.contains(&method) {
            diags.push(Diagnostic::error("unknown-method", format!("unknown method `{method}`")));
            continue;
        }
        let variants: Vec<String> = if spec.variants.is_empty() {
            vec![if method == "sobt" { "v" } else { "tsimag" }.to_string()]
        } else {
            spec.variants.clone()
        };
        let strategies: Vec<Option<Strategy>> = if method == "sobt" {
            if !spec.strategies.is_empty() {
                diags.push(Diagnostic::error("unknown-strategy", "sobt takes no presampling strategies"));
            }
            vec![None]
        } else {
            let names = if spec.strategies.is_empty() {
                vec!["standard".to_string()]
            } else {
                spec.strategies.clone()
            };
            let mut list = Vec::new();
            for name in &names {
                match parse_strategy(name, spec, case, &cfg.case_c) {
                    Some(s) => list.push(Some(s)),
                    None => diags.push(Diagnostic::error("unknown-strategy", format!("unknown strategy `{name}`"))),
                }
            }
            list
        };
        if spec.soa_k == 0 {
            diags.push(Diagnostic::error("invalid-method", format!("{method}: soa_k must be at least 1")));
        }
        if method != "sobt" && method != "equi" && spec.shifts == 0 {
            diags.push(Diagnostic::error("invalid-method", format!("{method}: shifts must be at least 1")));
        }
        for strategy in &strategies {
            for v in &variants {
                if !known_variant(method, v) {
                    diags.push(Diagnostic::error("unknown-variant", format!("{method}: unknown variant `{v}`")));
                    continue;
                }
                let tag = match strategy {
                    Some(s) => format!("{method}_{}_{v}", s.tag()),
                    None => format!("{method}_{v}"),
                };
                if !seen.insert(tag.clone()) {
                    diags.push(Diagnostic::error("duplicate-combination", format!("`{tag}` is requested twice")));
                    continue;
                }
                out.push(Combination {
                    tag,
                    method: method.to_string(),
                    strategy: *strategy,
                    variant: v.clone(),
                    spec: spec.clone(),
                });
            }
        }
    }
    (out, diags)
}

/// Loads or generates the system named by `cfg`; `seed` overrides the
/// synthetic seed.
pub fn load_source(cfg: &RunConfig, seed: Option<u64>) -> std::result::Result<StructuredSystem, Diagnostic> {
    match (&cfg.system.manifest, &cfg.system.synthetic) {
        (Some(path), None) => {
            if !path.exists() {
                return Err(Diagnostic::error("missing-manifest", format!("{} does not exist", path.display())));
            }
            load_system(path).map_err(|e| Diagnostic::error("manifest-error", e.to_string()))
        }
        (None, Some(spec)) => {
            let mut spec = spec.clone();
            if let Some(s) = seed.or(cfg.seed) {
                spec.seed = s;
            }
            generate_synthetic(&spec).map_err(|e| Diagnostic::error("synthetic-error", e.to_string()))
        }
        _ => Err(Diagnostic::error(
            "system-source",
            "exactly one of system.manifest and system.synthetic must be given",
        )),
    }
}

fn check_settings(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut d = Vec::new();
    let g = &cfg.grid;
    if !(g.fmin > 0.0 && g.fmin < g.fmax && g.fmax.is_finite()) || g.points < 2 {
        d.push(Diagnostic::error(
            "invalid-grid",
            format!("need 0 < fmin < fmax and points >= 2 (got {}, {}, {})", g.fmin, g.fmax, g.points),
        ));
    }
    let orders = cfg.orders.orders();
    if orders.is_empty() || orders.contains(&0) || orders.windows(2).any(|w| w[0] >= w[1]) {
        d.push(Diagnostic::error("invalid-orders", "orders must be a non-empty increasing list of positive integers"));
    }
    if !(cfg.score.eps > 0.0 && cfg.score.eps < 1.0) || cfg.score.r_max == 0 {
        d.push(Diagnostic::error("invalid-score", "score needs 0 < eps < 1 and r_max >= 1"));
    } else if orders.iter().any(|&r| r > cfg.score.r_max) {
        d.push(Diagnostic::error("invalid-score", "orders exceed score.r_max"));
    }
    if cfg.methods.is_empty() {
        d.push(Diagnostic::error("invalid-method", "no methods requested"));
    }
    if cfg.jobs == Some(0) {
        d.push(Diagnostic::error("invalid-jobs", "jobs must be at least 1"));
    }
    d
}

fn applicability(sys: &StructuredSystem, combos: &[Combination]) -> Vec<Diagnostic> {
    let sobt_status = combos.iter().any(|c| c.method == "sobt").then(|| sobt_applicability(sys));
    let mut d = Vec::new();
    for c in combos {
        if c.method == "sobt" {
            if let Some(Err(code)) = sobt_status {
                d.push(Diagnostic {
                    severity: Severity::NotApplicable,
                    code: code.to_string(),
                    combination: Some(c.tag.clone()),
                    message: format!("balanced truncation does not apply to this Case {:?} system", sys.case),
                });
            }
        }
    }
    d
}

/// All problems with `cfg`, found without reducing anything. An empty list
/// means every combination can run.
pub fn validate(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut d = check_settings(cfg);
    match load_source(cfg, None) {
        Ok(sys) => {
            let (combos, cd) = combinations(cfg, sys.case);
            d.extend(cd);
            d.extend(applicability(&sys, &combos));
        }
        Err(e) => {
            d.push(e);
            let (_, cd) = combinations(cfg, CaseTag::A);
            d.extend(cd);
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Some orders of the schedule could not be reached.
    Partial,
    NotApplicable,
    Failed,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Partial => "partial",
            Status::NotApplicable => "not_applicable",
            Status::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinationReport {
    pub tag: String,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    pub variant: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    pub orders: Vec<usize>,
    pub errors: Vec<f64>,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy_stop: Option<StopReason>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub greedy_shifts_hz: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip)]
    pub curve: ErrorCurve,
    #[serde(skip)]
    pub rom: Option<ReducedModel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemInfo {
    pub case: CaseTag,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub rationalized: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub somor_version: String,
    pub seed: u64,
    pub jobs: usize,
    pub fom_seconds: f64,
    pub total_seconds: f64,
    pub morscore_rule: String,
    pub system: SystemInfo,
    pub config: RunConfig,
    pub combinations: Vec<CombinationReport>,
}

/// Overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

pub const DEFAULT_OUT: &str = "somor-out";

struct Context<'a> {
    fom: &'a StructuredSystem,
    work: &'a StructuredSystem,
    grid: &'a FrequencyGrid,
    reference: &'a Sweep,
    orders: &'a [usize],
    cfg: &'a RunConfig,
}

fn evaluate(ctx: &Context, rom: &ReducedModel) -> Result<f64> {
    let rs = sweep_with(rom, ctx.grid, Execution::Parallel);
    linf_rel_error(ctx.reference, &rs)
}

fn cut(pair: ProjectionPair, r: usize) -> ProjectionPair {
    let k = r.min(pair.v.ncols());
    ProjectionPair {
        v: pair.v.columns(0, k).into_owned(),
        w: pair.w.columns(0, k).into_owned(),
        ..pair
    }
}

/// Presample with the columns of every shift block replaced by their real
/// and imaginary parts.
fn realified(pre: &PresampleBasis) -> PresampleBasis {
    let mut cols = Vec::new();
    let mut blocks = Vec::new();
    let mut provenance = Vec::new();
    for (i, range) in pre.blocks.iter().enumerate() {
        let b = pre.block(i);
        let start = cols.len();
        for part in [complexify(&real_part(&b)), complexify(&imag_part(&b))] {
            for (j, col) in part.column_iter().enumerate() {
                if col.norm() > 0.0 {
                    cols.push(col.into_owned());
                    provenance.push(pre.provenance[range.start + j]);
                }
            }
        }
        blocks.push(start..cols.len());
    }
    let n = pre.columns.nrows();
    let mut columns = CMat::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        columns.set_column(j, c);
    }
    PresampleBasis {
        columns,
        provenance,
        blocks,
        shifts: pre.shifts.clone(),
        strategy: pre.strategy,
        side: pre.side,
        deflations: pre.deflations,
    }
}

fn columns_per_shift(strategy: Strategy, ios: usize) -> usize {
    match strategy {
        Strategy::Standard => ios,
        Strategy::Sp { order } => ios * (order + 1),
        Strategy::Soa { k } => ios * k,
    }
}

struct Sides {
    right: Option<PresampleBasis>,
    left: Option<PresampleBasis>,
}

fn presample_sides(ctx: &Context, strategy: Strategy, variant: ProjectionVariant, shifts: &[f64]) -> Result<Sides> {
    let s: Vec<_> = shifts.iter().map(|&f| hz_to_shift(f)).collect();
    let right = if variant.needs_right() {
        Some(presample(ctx.work, strategy, &s, BasisSide::Right, Execution::Sequential)?)
    } else {
        None
    };
    let left = if variant.needs_left() {
        Some(presample(ctx.work, strategy, &s, BasisSide::Left, Execution::Sequential)?)
    } else {
        None
    };
    Ok(Sides { right, left })
}

fn stamp(mut rom: ReducedModel, combo: &Combination, shifts: &[f64], deflations: usize) -> ReducedModel {
    rom.provenance = Provenance {
        method: combo.method.clone(),
        strategy: combo.strategy.map(|s| s.tag().to_string()),
        variant: Some(combo.variant.clone()),
        shifts: shifts.iter().map(|&f| hz_to_shift(f)).collect(),
        r: rom.order(),
        deflations,
        notes: rom.provenance.notes,
    };
    rom
}

struct Outcome {
    curve: ErrorCurve,
    rom: Option<ReducedModel>,
    failure: Option<Error>,
    notes: Vec<String>,
    greedy_stop: Option<StopReason>,
    greedy_shifts_hz: Vec<f64>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            curve: ErrorCurve::default(),
            rom: None,
            failure: None,
            notes: Vec::new(),
            greedy_stop: None,
            greedy_shifts_hz: Vec::new(),
        }
    }

    /// Records a reduced model; orders that do not grow are skipped.
    fn record(&mut self, ctx: &Context, rom: ReducedModel) -> Result<()> {
        let r = rom.order();
        if self.curve.samples.last().is_some_and(|s| s.r >= r) {
            self.notes.push(format!("order {r} repeats a smaller requested order and is skipped"));
            return Ok(());
        }
        let eps = evaluate(ctx, &rom)?;
        self.curve.push(r, eps, None)?;
        self.rom = Some(rom);
        Ok(())
    }
}

fn run_interpolatory(ctx: &Context, combo: &Combination, out: &mut Outcome) -> Result<()> {
    let strategy = combo.strategy.ok_or_else(|| Error::InvalidConfig("missing strategy".into()))?;
    let variant: ProjectionVariant = combo.variant.parse()?;
    let g = &ctx.cfg.grid;
    let spec = &combo.spec;
    match combo.method.as_str() {
        "equi" => {
            let ios = if variant.needs_right() { ctx.work.m } else { ctx.work.p };
            let per = columns_per_shift(strategy, ios);
            for &r in ctx.orders {
                let complex_cols = if variant.is_real() { r.div_ceil(2) } else { r };
                let count = complex_cols.div_ceil(per);
                let freqs = equi_frequencies_total(g.fmin, g.fmax, count, &spec.extra_hz)?;
                let sides = presample_sides(ctx, strategy, variant, &freqs)?;
                let pair = ProjectionPair::from_variant(
                    variant,
                    sides.right.as_ref().map(|p| &p.columns),
                    sides.left.as_ref().map(|p| &p.columns),
                )?;
                let rom = project(ctx.work, &cut(pair, r))?;
                let defl = sides.right.iter().chain(&sides.left).map(|p| p.deflations).sum();
                out.record(ctx, stamp(rom, combo, &freqs, defl))?;
            }
        }
        "avg" | "minrel" => {
            let freqs = equi_frequencies(g.fmin, g.fmax, spec.shifts, &spec.extra_hz)?;
            let mut sides = presample_sides(ctx, strategy, variant, &freqs)?;
            if variant.is_real() {
                sides.right = sides.right.as_ref().map(realified);
                sides.left = sides.left.as_ref().map(realified);
            }
            let compress = |pre: &PresampleBasis, r: usize| -> Result<CMat> {
                let sel = if combo.method == "avg" { avg_compress(pre, r)? } else { minrel_compress(pre, r)? };
                Ok(sel.v)
            };
            let defl: usize = sides.right.iter().chain(&sides.left).map(|p| p.deflations).sum();
            for &r in ctx.orders {
                let v = sides.right.as_ref().map(|p| compress(p, r)).transpose()?;
                let w = sides.left.as_ref().map(|p| compress(p, r)).transpose()?;
                let pair = ProjectionPair::from_variant(variant, v.as_ref(), w.as_ref())?;
                let rom = project(ctx.work, &cut(pair, r))?;
                out.record(ctx, stamp(rom, combo, &freqs, defl))?;
            }
        }
        "linf" => {
            let freqs = equi_frequencies(g.fmin, g.fmax, spec.shifts, &spec.extra_hz)?;
            let sides = presample_sides(ctx, strategy, variant, &freqs)?;
            let right = sides.right.as_ref().or(sides.left.as_ref()).ok_or(Error::Exhausted)?;
            let r_target = *ctx.orders.last().ok_or(Error::EmptyCurve)?;
            let opts = GreedyOptions {
                variant,
                r_target,
                tol: spec.tol,
                exec: Execution::Parallel,
            };
            let (sel, rom) = greedy_linf(ctx.work, ctx.grid, ctx.reference, right, sides.left.as_ref(), opts)?;
            for step in &sel.history {
                if step.r > ctx.cfg.score.r_max {
                    out.notes.push(format!("greedy order {} beyond r_max is not scored", step.r));
                    break;
                }
                if out.curve.samples.last().is_some_and(|s| s.r >= step.r) {
                    continue;
                }
                out.curve.push(step.r, step.error, None)?;
            }
            out.greedy_stop = sel.stop;
            out.greedy_shifts_hz = sel.selected.iter().map(|&i| freqs[i]).collect();
            let chosen: Vec<f64> = out.greedy_shifts_hz.clone();
            let defl = sides.right.iter().chain(&sides.left).map(|p| p.deflations).sum();
            out.rom = Some(stamp(rom, combo, &chosen, defl));
        }
        other => return Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
    }
    Ok(())
}

fn run_balanced(ctx: &Context, combo: &Combination, out: &mut Outcome) -> Result<()> {
    if let Err(code) = sobt_applicability(ctx.fom) {
        return Err(Error::NotApplicable(code.into()));
    }
    let fo = first_order_realize(ctx.fom)?;
    let factors = gramian_factors(&fo, Execution::Sequential)?;
    for &r in ctx.orders {
        let rom = match combo.variant.as_str() {
            "dominant_c" | "dominant_o" => {
                let side = if combo.variant == "dominant_c" {
                    GramianSide::Controllability
                } else {
                    GramianSide::Observability
                };
                let pair = dominant_onesided(&factors, side, r, DominantMethod::Svd)?;
                project(ctx.fom, &pair)?
            }
            v => sobt(ctx.fom, &fo, &factors, v.parse()?, r)?,
        };
        let notes = rom.provenance.notes.clone();
        out.notes.extend(notes);
        out.record(ctx, stamp(rom, combo, &[], 0))?;
    }
    Ok(())
}

fn run_combination(ctx: &Context, combo: &Combination, skip: Option<&Diagnostic>) -> CombinationReport {
    let start = Instant::now();
    let mut out = Outcome::new();
    let mut status = Status::Ok;
    let mut reason = None;
    let mut message = None;
    if let Some(d) = skip {
        status = Status::NotApplicable;
        reason = Some(d.code.clone());
        message = Some(d.message.clone());
    } else {
        let res = if combo.method == "sobt" {
            run_balanced(ctx, combo, &mut out)
        } else {
            run_interpolatory(ctx, combo, &mut out)
        };
        if let Err(e) = res {
            out.failure = Some(e);
        }
        if let Some(e) = &out.failure {
            status = match e {
                Error::NotApplicable(_) => Status::NotApplicable,
                _ if out.curve.is_empty() => Status::Failed,
                _ => Status::Partial,
            };
            reason = Some(match e {
                Error::NotApplicable(code) => code.clone(),
                other => other.code().to_string(),
            });
            message = Some(e.to_string());
        }
    }
    let score = if out.curve.is_empty() {
        None
    } else {
        morscore(&out.curve, ctx.cfg.score.eps, ctx.cfg.score.r_max).ok().map(|s| s.score)
    };
    CombinationReport {
        tag: combo.tag.clone(),
        method: combo.method.clone(),
        strategy: combo.strategy.map(|s| s.tag().to_string()),
        variant: combo.variant.clone(),
        status,
        reason,
        message,
        score,
        orders: out.curve.samples.iter().map(|s| s.r).collect(),
        errors: out.curve.samples.iter().map(|s| s.eps).collect(),
        seconds: start.elapsed().as_secs_f64(),
        greedy_stop: out.greedy_stop,
        greedy_shifts_hz: out.greedy_shifts_hz,
        notes: out.notes,
        curve: out.curve,
        rom: out.rom,
    }
}

#[cfg(feature = "parallel")]
fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<T: Send>(_jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

/// Replaces every closed-form named function by its AAA fit over the
/// config's frequency band.
fn rationalized(sys: &StructuredSystem, cfg: &RunConfig) -> Result<(StructuredSystem, Vec<String>)> {
    let ids: Vec<String> = sys
        .functions
        .iter()
        .filter(|(_, f)| !matches!(f, ScalarFunction::Barycentric(_)))
        .map(|(id, _)| id.clone())
        .collect();
    if sys.case != CaseTag::C || !cfg.case_c.rationalize || ids.is_empty() {
        return Ok((sys.clone(), Vec::new()));
    }
    let cc = &cfg.case_c;
    let s: Vec<_> = linspace(cfg.grid.fmin, cfg.grid.fmax, cc.aaa_samples.max(2))
        .into_iter()
        .map(hz_to_shift)
        .collect();
    let fits = fit_functions(sys, &s, cc.aaa_tol, cc.aaa_max_order)?;
    Ok((rationalize(sys, &fits), ids))
}

/// Result of [`run`]: the report plus the directory it was written to.
#[derive(Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub summary: Summary,
}

/// Runs every combination and writes `curve_<tag>.csv`, `scores.csv` and
/// `summary.toml` into the output directory. Combinations that fail are
/// reported and do not stop the batch.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutput> {
    let total = Instant::now();
    let mut fatal: Vec<Diagnostic> = check_settings(cfg);
    let seed = opts.seed.or(cfg.seed);
    let sys = match load_source(cfg, opts.seed) {
        Ok(s) => Some(s),
        Err(d) => {
            fatal.push(d);
            None
        }
    };
    let case = sys.as_ref().map_or(CaseTag::A, |s| s.case);
    let (combos, cd) = combinations(cfg, case);
    fatal.extend(cd);
    if !fatal.is_empty() {
        let text: Vec<String> = fatal.iter().map(|d| d.to_string()).collect();
        return Err(Error::InvalidConfig(text.join("; ")));
    }
    let sys = sys.expect("system loaded when no diagnostics are fatal");
    let skips: BTreeMap<String, Diagnostic> = applicability(&sys, &combos)
        .into_iter()
        .filter_map(|d| d.combination.clone().map(|c| (c, d)))
        .collect();
    let jobs = opts.jobs.or(cfg.jobs).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let out_dir = opts
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));

    let grid = FrequencyGrid::linspace_hz(cfg.grid.fmin, cfg.grid.fmax, cfg.grid.points)?;
    let (work, rationalized_ids) = rationalized(&sys, cfg)?;
    let orders = cfg.orders.orders();

    let (fom_seconds, reports) = with_jobs(jobs, || {
        let t = Instant::now();
        let reference = sweep_with(&sys, &grid, Execution::Parallel);
        let fom_seconds = t.elapsed().as_secs_f64();
        let ctx = Context {
            fom: &sys,
            work: &work,
            grid: &grid,
            reference: &reference,
            orders: &orders,
            cfg,
        };
        let reports = Execution::Parallel.map(&combos, |c| run_combination(&ctx, c, skips.get(&c.tag)));
        (fom_seconds, reports)
    })?;

    std::fs::create_dir_all(&out_dir)?;
    let mut scores = String::from("tag,method,strategy,variant,status,score\n");
    for rep in &reports {
        write_atomic(&out_dir.join(format!("curve_{}.csv", rep.tag)), rep.curve.to_csv().as_bytes())?;
        scores.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rep.tag,
            rep.method,
            rep.strategy.as_deref().unwrap_or(""),
            rep.variant,
            rep.status.name(),
            rep.score.map(|s| format!("{s:e}")).unwrap_or_default()
        ));
        if cfg.export_roms {
            if let Some(rom) = &rep.rom {
                save_reduced(rom, &out_dir.join("roms").join(&rep.tag), "rom")?;
            }
        }
    }
    write_atomic(&out_dir.join("scores.csv"), scores.as_bytes())?;

    let mut echo = cfg.clone();
    echo.seed = seed;
    let summary = Summary {
        somor_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: seed.unwrap_or_else(|| cfg.system.synthetic.as_ref().map_or(0, |s| s.seed)),
        jobs,
        fom_seconds,
        total_seconds: total.elapsed().as_secs_f64(),
        morscore_rule: "trapezoid over the available orders, anchored at (0, 0)".into(),
        system: SystemInfo {
            case: sys.case,
            n: sys.n,
            m: sys.m,
            p: sys.p,
            rationalized: rationalized_ids,
        },
        config: echo,
        combinations: reports,
    };
    let text = toml::to_string(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&out_dir.join("summary.toml"), text.as_bytes())?;
    Ok(RunOutput { out_dir, summary })
}
