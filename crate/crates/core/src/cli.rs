//! Command implementations behind the `shadowspec` binary.
//!
//! Every command is a pure function of its [`RunConfig`]: reports carry the
//! config that produced them, contain no timestamps, and are written
//! atomically.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operators::{
    DenseOperator, Operator, ShiftOperator, SupportedVector, Vector, EXAMPLE_WEIGHT,
};
use crate::projector::{self, ContourConfig};
use crate::random;
use crate::shadowing::{
    self, BgainResult, DefectSampling, OracleResult, OrbitOptions, ProbeKind, ShadowResult,
    WindowProbe,
};
use crate::spectral::{self, DualityReport, ExpansivityWitness, SpectralReport, Verdicts};

/// Environment variable that caps the worker-thread count.
pub const THREADS_ENV: &str = "SHADOWSPEC_THREADS";

pub const EXAMPLE_WINDOWS: [usize; 4] = [8, 16, 32, 64];
pub const EXAMPLE_QS: [f64; 4] = [1.2, 1.1, 1.05, 1.01];
/// Cut of the fixed vector of `S`; its entries end below `1e-13`.
pub const EXAMPLE_VECTOR_HALF_WIDTH: usize = 31;

/// Largest dimension for which `analyze` adds the duality table and the
/// expansivity witness.
const ANALYZE_EXTRAS_MAX_DIM: usize = 16;
const WITNESS_N_MAX: u32 = 20;
const WITNESS_SAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Analyze,
    Shadow,
    Probe,
    Example17,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KindFilter {
    Dense,
    Shift,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub tol: f64,
    pub seed: u64,
    pub nodes: Option<usize>,
    pub window: Option<usize>,
    pub delta: f64,
    pub q: Option<f64>,
    pub kind: Option<KindFilter>,
    /// Materialization half-width for shift operators.
    pub half_width: usize,
    pub probe_kind: ProbeKind,
    /// Explicit splitting for `shadow`.
    pub projector: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            input: None,
            output: None,
            tol: spectral::DEFAULT_GAP_TOL,
            seed: 0,
            nodes: None,
            window: None,
            delta: 1e-3,
            q: None,
            kind: None,
            half_width: 16,
            probe_kind: ProbeKind::ScriptB,
            projector: None,
        }
    }

    /// Checks ranges and that every path resolves before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.validate_ranges()?;
        self.validate_paths()
    }

    pub fn validate_ranges(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "--tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "--delta must be >= 0, got {}",
                self.delta
            )));
        }
        if let Some(q) = self.q {
            if !(q > 1.0 && q.is_finite()) {
                return Err(Error::InvalidArgument(format!("--q must be > 1, got {q}")));
            }
        }
        if let Some(nodes) = self.nodes {
            ContourConfig::new(1.0, nodes)?;
        }
        if self.window == Some(0) {
            return Err(Error::InvalidArgument("--window must be >= 1".into()));
        }
        if self.half_width == 0 {
            return Err(Error::InvalidArgument("--half-width must be >= 1".into()));
        }
        Ok(())
    }

    pub fn validate_paths(&self) -> Result<()> {
        let needs_input = !matches!(self.command, Command::Example17);
        match (&self.input, needs_input) {
            (None, true) => return Err(Error::InvalidArgument("--input is required".into())),
            (Some(p), _) if !p.is_file() => {
                return Err(Error::InvalidArgument(format!(
                    "input file {} not found",
                    p.display()
                )))
            }
            _ => {}
        }
        if let Some(p) = &self.projector {
            if !p.is_file() {
                return Err(Error::InvalidArgument(format!(
                    "projector file {} not found",
                    p.display()
                )));
            }
        }
        if let Some(out) = &self.output {
            let parent = out
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(Error::InvalidArgument(format!(
                    "output directory {} does not exist",
                    parent.display()
                )));
            }
        }
        Ok(())
    }

    fn load_operator(&self) -> Result<Operator> {
        let path = self
            .input
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--input is required".into()))?;
        let op = Operator::from_json(&fs::read_to_string(path)?)?;
        match (self.kind, &op) {
            (Some(KindFilter::Dense), Operator::Shift(_))
            | (Some(KindFilter::Shift), Operator::Dense(_)) => Err(Error::KindMismatch(format!(
                "--kind asks for {:?} but the input is {}",
                self.kind.unwrap(),
                op.kind()
            ))),
            _ => Ok(op),
        }
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// A finished command: the machine-readable document plus a short table
/// for the terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub document: String,
    pub table: String,
    /// Extra sweep files, as `(suffix, csv)`.
    pub sweeps: Vec<(String, String)>,
}

impl Outcome {
    /// Writes the document to `--output` (or returns it for standard output)
    /// and any sweep CSVs beside it.
    pub fn emit(&self, cfg: &RunConfig) -> Result<Option<String>> {
        match &cfg.output {
            Some(path) => {
                write_atomic(path, &self.document)?;
                for (suffix, csv) in &self.sweeps {
                    let stem = path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    write_atomic(&path.with_file_name(format!("{stem}_{suffix}.csv")), csv)?;
                }
                Ok(None)
            }
            None => Ok(Some(self.document.clone())),
        }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.command {
        Command::Analyze => cmd_analyze(cfg),
        Command::Shadow => cmd_shadow(cfg),
        Command::Probe => cmd_probe(cfg),
        Command::Example17 => cmd_example17(cfg),
    }
}

fn verdict_table(rows: &[(&str, Verdicts)]) -> String {
    let mut out = format!(
        "{:<12} {:>10} {:>10} {:>10}\n",
        "operator", "hyperbolic", "expansive", "shadowing"
    );
    for (name, v) in rows {
        out.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>10}\n",
            name, v.hyperbolic, v.uniformly_expansive, v.shadowing
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeDocument {
    pub config: RunConfig,
    pub report: SpectralReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality: Option<DualityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expansivity_witness: Option<ExpansivityWitness>,
}

pub fn analyze(cfg: &RunConfig) -> Result<AnalyzeDocument> {
    analyze_operator(&cfg.load_operator()?, cfg)
}

pub fn analyze_operator(op: &Operator, cfg: &RunConfig) -> Result<AnalyzeDocument> {
    let (report, duality, witness) = match op {
        Operator::Dense(a) => {
            let report = spectral::classify_dense(a, cfg.tol)?;
            let (duality, witness) = if a.dim() <= ANALYZE_EXTRAS_MAX_DIM {
                (
                    Some(spectral::duality_check(a, cfg.tol)?),
                    Some(spectral::expansivity_witness(
                        a,
                        WITNESS_N_MAX,
                        WITNESS_SAMPLES,
                        cfg.seed,
                    )?),
                )
            } else {
                (None, None)
            };
            (report, duality, witness)
        }
        Operator::Shift(s) => (spectral::classify_shift(s, cfg.tol)?, None, None),
    };
    Ok(AnalyzeDocument {
        config: cfg.clone(),
        report,
        duality,
        expansivity_witness: witness,
    })
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<Outcome> {
    let doc = analyze(cfg)?;
    let table = format!(
        "{}gap to unit circle: {:.6e}\n",
        verdict_table(&[("input", doc.report.verdicts)]),
        doc.report.gap_sigma
    );
    Ok(Outcome {
        document: to_json(&doc),
        table,
        sweeps: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplittingSource {
    /// Riesz projector from contour quadrature.
    Riesz,
    /// Supplied with `--projector`.
    Explicit,
    /// No contour fits between the spectrum and the unit circle; `B = 0`.
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowChecks {
    pub within_bound: bool,
    pub oracle_not_worse: bool,
    pub recurrence_residual_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowDocument {
    pub config: RunConfig,
    pub window: [i64; 2],
    pub delta: f64,
    pub defect_norms: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splitting: Option<SplittingSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constructive: Option<ShadowResult>,
    pub oracle: OracleResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<ShadowChecks>,
    pub note: String,
}

fn seeded_unit_vector(op: &Operator, seed: u64, half_width: usize) -> Vector {
    // offset so the start vector and the defects use different streams
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    match op {
        Operator::Dense(a) => Vector::Dense(random::on_sphere(&mut rng, a.dim(), 1.0)),
        Operator::Shift(_) => {
            let values = random::on_sphere(&mut rng, 2 * half_width + 1, 1.0);
            Vector::Supported(SupportedVector::from_window(-(half_width as i64), &values))
        }
    }
}

fn splitting_for(
    cfg: &RunConfig,
    a: &DenseOperator,
) -> Result<(DenseOperator, SplittingSource, Option<ContourConfig>)> {
    if let Some(path) = &cfg.projector {
        let b = match Operator::from_json(&fs::read_to_string(path)?)? {
            Operator::Dense(b) => b,
            Operator::Shift(_) => {
                return Err(Error::KindMismatch(
                    "--projector must be a dense matrix".into(),
                ))
            }
        };
        return Ok((b, SplittingSource::Explicit, None));
    }
    let contour = match cfg.nodes {
        Some(nodes) => ContourConfig::new(1.0, nodes),
        None => ContourConfig::adapted(a, 1),
    };
    let attempt = contour.and_then(|c| projector::riesz_projector(a, &c).map(|b| (b, c)));
    match attempt {
        Ok((b, c)) => Ok((b, SplittingSource::Riesz, Some(c))),
        Err(Error::ContourThroughSpectrum { .. }) | Err(Error::NearSingularResolvent { .. }) => {
            Ok((DenseOperator::zero(a.dim()), SplittingSource::Trivial, None))
        }
        Err(e) => Err(e),
    }
}

pub fn shadow(cfg: &RunConfig) -> Result<ShadowDocument> {
    shadow_operator(&cfg.load_operator()?, cfg)
}

pub fn shadow_operator(op: &Operator, cfg: &RunConfig) -> Result<ShadowDocument> {
    let n = cfg.window.unwrap_or(30) as i64;
    let x0 = seeded_unit_vector(op, cfg.seed, cfg.half_width);
    let opts = OrbitOptions::symmetric(n, cfg.delta, cfg.seed).with_shift_support(cfg.half_width);
    let orbit = shadowing::generate_pseudo_orbit(op, &x0, &opts)?;
    let oracle = shadowing::shadow_oracle_lsq(op, &orbit)?;
    let base = ShadowDocument {
        config: cfg.clone(),
        window: [orbit.lo, orbit.hi],
        delta: cfg.delta,
        defect_norms: orbit.defect_norms(),
        splitting: None,
        contour: None,
        constructive: None,
        oracle,
        checks: None,
        note: String::new(),
    };
    match op {
        Operator::Dense(a) => {
            let (b, source, contour) = splitting_for(cfg, a)?;
            let result = shadowing::construct_shadow(a, &b, &orbit, None)?;
            let checks = ShadowChecks {
                within_bound: result.epsilon_achieved <= result.epsilon_bound + 1e-8,
                oracle_not_worse: base.oracle.epsilon_achieved <= result.epsilon_achieved + 1e-8,
                recurrence_residual_ok: result.recurrence_residual < 1e-9,
            };
            Ok(ShadowDocument {
                splitting: Some(source),
                contour,
                constructive: Some(result),
                checks: Some(checks),
                note: "constructive shadow from the spectral splitting; oracle is the least-squares seed".into(),
                ..base
            })
        }
        Operator::Shift(_) => Ok(ShadowDocument {
            note: "no constructive splitting is available for shifts; only the least-squares oracle is reported, \
                   as an empirical shadowing modulus without theoretical constants"
                .into(),
            ..base
        }),
    }
}

pub fn cmd_shadow(cfg: &RunConfig) -> Result<Outcome> {
    let doc = shadow(cfg)?;
    let mut table = format!(
        "window {}..={}, delta {:e}\n",
        doc.window[0], doc.window[1], doc.delta
    );
    if let Some(r) = &doc.constructive {
        table.push_str(&format!(
            "constructive epsilon {:.6e}  bound {:.6e}  (K = {:.4}, q = {:.4})\n",
            r.epsilon_achieved, r.epsilon_bound, r.k_used, r.q_used
        ));
    }
    table.push_str(&format!(
        "oracle epsilon       {:.6e}\n",
        doc.oracle.epsilon_achieved
    ));
    Ok(Outcome {
        document: to_json(&doc),
        table,
        sweeps: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeDocument {
    pub config: RunConfig,
    pub probes: Vec<WindowProbe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bgain: Option<BgainResult>,
}

/// Window half-widths `1, 2, 4, ...` up to and including `max`.
pub fn probe_windows(max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |n| Some(n * 2))
        .take_while(|&n| n < max)
        .collect();
    out.push(max);
    out
}

pub fn probe(cfg: &RunConfig) -> Result<ProbeDocument> {
    let op = cfg.load_operator()?;
    let probes = probe_windows(cfg.window.unwrap_or(16))
        .into_iter()
        .map(|n| shadowing::window_probe(&op, cfg.probe_kind, n, cfg.half_width))
        .collect::<Result<Vec<_>>>()?;
    let bgain = match cfg.q {
        Some(q) => {
            let x = seeded_unit_vector(&op, cfg.seed, cfg.half_width);
            Some(shadowing::bgain_test_sequence(&op, &x, q, None)?)
        }
        None => None,
    };
    Ok(ProbeDocument {
        config: cfg.clone(),
        probes,
        bgain,
    })
}

pub fn cmd_probe(cfg: &RunConfig) -> Result<Outcome> {
    let doc = probe(cfg)?;
    let csv = shadowing::probe_csv(&doc.probes);
    let wants_csv = cfg
        .output
        .as_ref()
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let document = if wants_csv {
        csv.clone()
    } else {
        to_json(&doc)
    };
    Ok(Outcome {
        document,
        table: csv,
        sweeps: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub n: usize,
    pub epsilon_s: f64,
    pub epsilon_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSummary {
    /// `max / min` of the S column.
    pub s_spread: f64,
    /// Last over first entry of the T column.
    pub t_growth: f64,
    pub t_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictRow {
    pub operator: String,
    #[serde(flatten)]
    pub verdicts: Verdicts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example17Report {
    pub config: RunConfig,
    pub radius_inner: f64,
    pub radius_outer: f64,
    pub spectra_t: SpectralReport,
    pub spectra_s: SpectralReport,
    /// Test-sequence gains of `T` at the fixed vector of `S`.
    pub bgain_t: Vec<BgainResult>,
    pub trend: Vec<TrendRow>,
    pub trend_summary: TrendSummary,
    pub verdicts: Vec<VerdictRow>,
    pub note: String,
}

/// Least-squares shadowing error of the pseudo-orbit driven by the constant
/// defect `delta * c / |c|`, `c` the fixed vector of `S`, on `-n..=n`.
pub fn example_trend_epsilon(op: &ShiftOperator, n: usize, delta: f64) -> Result<f64> {
    let c = Vector::Supported(ShiftOperator::example_fixed_vector(
        EXAMPLE_VECTOR_HALF_WIDTH,
    ));
    let opts =
        OrbitOptions::symmetric(n as i64, delta, 0).with_sampling(DefectSampling::Constant(c));
    let op = Operator::Shift(*op);
    let orbit =
        shadowing::generate_pseudo_orbit(&op, &Vector::Supported(SupportedVector::zero()), &opts)?;
    Ok(shadowing::shadow_oracle_lsq(&op, &orbit)?.epsilon_achieved)
}

pub fn example17(cfg: &RunConfig) -> Result<Example17Report> {
    let t = ShiftOperator::example_t();
    let s = ShiftOperator::example_s();
    let spectra_t = spectral::classify_shift(&t, cfg.tol)?;
    let spectra_s = spectral::classify_shift(&s, cfg.tol)?;
    let annulus = spectra_t
        .shift_spectra
        .as_ref()
        .expect("shift report has spectra");

    let c = Vector::Supported(ShiftOperator::example_fixed_vector(
        EXAMPLE_VECTOR_HALF_WIDTH,
    ));
    let mut qs = EXAMPLE_QS.to_vec();
    if let Some(q) = cfg.q {
        if !qs.contains(&q) {
            qs.push(q);
        }
    }
    let t_op = Operator::Shift(t);
    let bgain_t = qs
        .iter()
        .map(|&q| shadowing::bgain_test_sequence(&t_op, &c, q, None))
        .collect::<Result<Vec<_>>>()?;

    let windows: Vec<usize> = match cfg.window {
        Some(n) => vec![n],
        None => EXAMPLE_WINDOWS.to_vec(),
    };
    let trend = windows
        .iter()
        .map(|&n| {
            Ok(TrendRow {
                n,
                epsilon_s: example_trend_epsilon(&s, n, cfg.delta)?,
                epsilon_t: example_trend_epsilon(&t, n, cfg.delta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let s_col: Vec<f64> = trend.iter().map(|r| r.epsilon_s).collect();
    let t_col: Vec<f64> = trend.iter().map(|r| r.epsilon_t).collect();
    let s_max = s_col.iter().copied().fold(0.0, f64::max);
    let s_min = s_col.iter().copied().fold(f64::INFINITY, f64::min);
    let trend_summary = TrendSummary {
        s_spread: s_max / s_min,
        t_growth: t_col[t_col.len() - 1] / t_col[0],
        t_monotone: t_col.windows(2).all(|w| w[1] > w[0]),
    };

    Ok(Example17Report {
        config: cfg.clone(),
        radius_inner: annulus.annulus_inner,
        radius_outer: annulus.annulus_outer,
        verdicts: vec![
            VerdictRow {
                operator: "T".into(),
                verdicts: spectra_t.verdicts,
            },
            VerdictRow {
                operator: "S".into(),
                verdicts: spectra_s.verdicts,
            },
        ],
        spectra_t,
        spectra_s,
        bgain_t,
        trend,
        trend_summary,
        note: "The failure of shadowing for T is shown as a trend: the least-squares shadowing error at fixed \
               delta keeps growing with the window. No finite computation certifies it."
            .into(),
    })
}

pub fn cmd_example17(cfg: &RunConfig) -> Result<Outcome> {
    let report = example17(cfg)?;
    let mut table = verdict_table(
        &report
            .verdicts
            .iter()
            .map(|r| (r.operator.as_str(), r.verdicts))
            .collect::<Vec<_>>(),
    );
    table.push_str(&format!(
        "annulus radii: {:.7} .. {:.7} (1/(2 sqrt2) = {:.7})\n",
        report.radius_inner,
        report.radius_outer,
        1.0 / EXAMPLE_WEIGHT
    ));
    let mut bgain_csv = String::from("q,gain_measured,gain_identity\n");
    for g in &report.bgain_t {
        bgain_csv.push_str(&format!(
            "{},{:.17e},{:.17e}\n",
            g.q, g.gain_measured, g.gain_identity
        ));
    }
    let mut trend_csv = String::from("N,epsilon_s,epsilon_t\n");
    for r in &report.trend {
        trend_csv.push_str(&format!(
            "{},{:.17e},{:.17e}\n",
            r.n, r.epsilon_s, r.epsilon_t
        ));
    }
    table.push_str(&bgain_csv);
    table.push_str(&trend_csv);
    Ok(Outcome {
        document: to_json(&report),
        table,
        sweeps: vec![("bgain".into(), bgain_csv), ("trend".into(), trend_csv)],
    })
}
