//! Configuration, experiment drivers and artifact output for the `conelab`
//! binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::fields::snapshot::{read_snapshot, write_snapshot};
use crate::fields::{make_constant_data, make_gaussian_data, GridSpec, VectorField};
use crate::geometry::{CoeffKind, ConeChart};
use crate::kernels::{envelope_check, kernel_constants, large_time_envelope_integral, ConvolutionEngine};
use crate::limits::{
    blowup_fit, reconstruct_center_series, reconstruct_sweep, viscosity_sweep, ForcingAccumulator, ForcingReport,
};
use crate::scheme::{linear_reference, march, transform_audit, ConvectionVariant, SchemeConfig, TermToggles};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Verify,
    Run,
    Sweep,
    Diagnose,
    Audit,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Verify => "verify",
            Self::Run => "run",
            Self::Sweep => "sweep",
            Self::Diagnose => "diagnose",
            Self::Audit => "audit",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "verify" => Ok(Self::Verify),
            "run" => Ok(Self::Run),
            "sweep" => Ok(Self::Sweep),
            "diagnose" => Ok(Self::Diagnose),
            "audit" => Ok(Self::Audit),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataKind {
    /// The radial Gaussian `exp(−ρ³|x|²)/ρ`.
    Gaussian,
    /// `W ≡ value` on the cylinder.
    Constant { value: f64 },
}

/// Fully resolved configuration of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n: usize,
    pub rho: f64,
    pub nu: f64,
    pub points: usize,
    pub m: usize,
    pub ds: f64,
    /// The run stops at `t = ρ(1 − tip_fraction)` unless `s_max` is given.
    pub tip_fraction: f64,
    pub s_max: Option<f64>,
    pub k_max: usize,
    pub fp_tol: f64,
    pub max_fp_iters: usize,
    pub norm_every: usize,
    pub toggles: TermToggles,
    pub convection_variant: ConvectionVariant,
    pub data: DataKind,
    pub nus: Vec<f64>,
    pub rhos: Vec<f64>,
    pub audit_samples: usize,
    /// `ε/ρ` ladder for the forcing norms.
    pub eps_fractions: Vec<f64>,
    /// Directory read by `diagnose`; defaults to `output_dir`.
    pub input_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub emit_snapshots: bool,
    pub snapshot_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Verify,
            n: 3,
            rho: 0.05,
            nu: 1e-2,
            points: 16,
            m: 2,
            ds: 0.05,
            tip_fraction: 1e-3,
            s_max: None,
            k_max: 6,
            fp_tol: 1e-8,
            max_fp_iters: 30,
            norm_every: 10,
            toggles: TermToggles::all_on(),
            convection_variant: ConvectionVariant::ChainRule,
            data: DataKind::Gaussian,
            nus: vec![1e-1, 1e-2, 1e-3],
            rhos: vec![0.05, 0.02],
            audit_samples: 1000,
            eps_fractions: vec![1e-2, 1e-3, 1e-4],
            input_dir: None,
            output_dir: PathBuf::from("out"),
            seed: 0,
            emit_snapshots: false,
            snapshot_every: 10,
        }
    }
}

fn parse_value<V: FromStr>(section: &str, key: &str, raw: &str) -> Result<V> {
    raw.trim().parse().map_err(|_| Error::Config(format!("[{section}] {key} = '{raw}' is not valid")))
}

fn parse_bool(section: &str, key: &str, raw: &str) -> Result<bool> {
    match raw.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("[{section}] {key} = '{raw}': expected true or false"))),
    }
}

fn parse_list(section: &str, key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',').filter(|p| !p.trim().is_empty()).map(|p| parse_value(section, key, p)).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Parses `key = value` text with `[section]` headers. Unknown sections
    /// and keys are errors.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("config syntax: {e}")))?;
        let mut c = Self::default();
        for (section, props) in ini.iter() {
            let sec = section.unwrap_or("");
            for (key, raw) in props.iter() {
                match (sec, key) {
                    ("experiment", "kind") => c.experiment = raw.parse()?,
                    ("chart", "n") => c.n = parse_value(sec, key, raw)?,
                    ("chart", "rho") => c.rho = parse_value(sec, key, raw)?,
                    ("scheme", "nu") => c.nu = parse_value(sec, key, raw)?,
                    ("scheme", "points") => c.points = parse_value(sec, key, raw)?,
                    ("scheme", "m") => c.m = parse_value(sec, key, raw)?,
                    ("scheme", "ds") => c.ds = parse_value(sec, key, raw)?,
                    ("scheme", "tip_fraction") => c.tip_fraction = parse_value(sec, key, raw)?,
                    ("scheme", "s_max") => c.s_max = Some(parse_value(sec, key, raw)?),
                    ("scheme", "k_max") => c.k_max = parse_value(sec, key, raw)?,
                    ("scheme", "fp_tol") => c.fp_tol = parse_value(sec, key, raw)?,
                    ("scheme", "max_fp_iters") => c.max_fp_iters = parse_value(sec, key, raw)?,
                    ("scheme", "norm_every") => c.norm_every = parse_value(sec, key, raw)?,
                    ("scheme", "convection_variant") => c.convection_variant = raw.parse()?,
                    ("toggles", "burgers") => c.toggles.burgers = parse_bool(sec, key, raw)?,
                    ("toggles", "convection") => c.toggles.convection = parse_bool(sec, key, raw)?,
                    ("toggles", "damping") => c.toggles.damping = parse_bool(sec, key, raw)?,
                    ("toggles", "leray") => c.toggles.leray = parse_bool(sec, key, raw)?,
                    ("data", "kind") => {
                        c.data = match raw.trim() {
                            "gaussian" => DataKind::Gaussian,
                            "constant" => DataKind::Constant { value: 1.0 },
                            other => return Err(Error::Config(format!("[data] kind = '{other}': expected gaussian or constant"))),
                        }
                    }
                    ("data", "value") => {
                        let v = parse_value(sec, key, raw)?;
                        c.data = DataKind::Constant { value: v };
                    }
                    ("sweep", "nus") => c.nus = parse_list(sec, key, raw)?,
                    ("sweep", "rhos") => c.rhos = parse_list(sec, key, raw)?,
                    ("audit", "samples") => c.audit_samples = parse_value(sec, key, raw)?,
                    ("forcing", "eps_fractions") => c.eps_fractions = parse_list(sec, key, raw)?,
                    ("diagnose", "input") => c.input_dir = Some(PathBuf::from(raw.trim())),
                    ("output", "dir") => c.output_dir = PathBuf::from(raw.trim()),
                    ("output", "seed") => c.seed = parse_value(sec, key, raw)?,
                    ("output", "emit_snapshots") => c.emit_snapshots = parse_bool(sec, key, raw)?,
                    ("output", "snapshot_every") => c.snapshot_every = parse_value(sec, key, raw)?,
                    _ => {
                        let shown = if sec.is_empty() { key.to_string() } else { format!("[{sec}] {key}") };
                        return Err(Error::Config(format!("unknown setting {shown}")));
                    }
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ini_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Config(format!("n = {}: the construction works for dimension n >= 3", self.n)));
        }
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must be positive")))
            }
        };
        pos("rho", self.rho)?;
        pos("nu", self.nu)?;
        pos("ds", self.ds)?;
        pos("fp_tol", self.fp_tol)?;
        if let Some(s) = self.s_max {
            pos("s_max", s)?;
        }
        if !(self.tip_fraction > 0.0 && self.tip_fraction < 1.0) {
            return Err(Error::Config(format!("tip_fraction = {} must lie in (0, 1)", self.tip_fraction)));
        }
        if self.points < 16 || !self.points.is_power_of_two() {
            return Err(Error::Config(format!("points = {} must be a power of two, at least 16", self.points)));
        }
        if self.k_max == 0 || self.max_fp_iters == 0 || self.norm_every == 0 || self.snapshot_every == 0 {
            return Err(Error::Config("k_max, max_fp_iters, norm_every and snapshot_every must be positive".into()));
        }
        for &v in self.nus.iter().chain(&self.rhos) {
            pos("sweep entry", v)?;
        }
        for &e in &self.eps_fractions {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Config(format!("eps fraction {e} must lie in (0, 1)")));
            }
        }
        if self.audit_samples == 0 {
            return Err(Error::Config("audit samples must be positive".into()));
        }
        Ok(())
    }

    /// The resolved configuration in the input format.
    pub fn to_ini(&self) -> String {
        let mut o = String::new();
        let b = |v: bool| if v { "true" } else { "false" };
        let _ = writeln!(o, "[experiment]\nkind = {}\n", self.experiment.name());
        let _ = writeln!(o, "[chart]\nn = {}\nrho = {}\n", self.n, self.rho);
        let _ = writeln!(o, "[scheme]\nnu = {}\npoints = {}\nm = {}\nds = {}\ntip_fraction = {}", self.nu, self.points, self.m, self.ds, self.tip_fraction);
        if let Some(s) = self.s_max {
            let _ = writeln!(o, "s_max = {s}");
        }
        let _ = writeln!(
            o,
            "k_max = {}\nfp_tol = {}\nmax_fp_iters = {}\nnorm_every = {}\nconvection_variant = {}\n",
            self.k_max, self.fp_tol, self.max_fp_iters, self.norm_every, self.convection_variant
        );
        let t = self.toggles;
        let _ = writeln!(
            o,
            "[toggles]\nburgers = {}\nconvection = {}\ndamping = {}\nleray = {}\n",
            b(t.burgers),
            b(t.convection),
            b(t.damping),
            b(t.leray)
        );
        match self.data {
            DataKind::Gaussian => {
                let _ = writeln!(o, "[data]\nkind = gaussian\n");
            }
            DataKind::Constant { value } => {
                let _ = writeln!(o, "[data]\nkind = constant\nvalue = {value}\n");
            }
        }
        let _ = writeln!(o, "[sweep]\nnus = {}\nrhos = {}\n", join(&self.nus), join(&self.rhos));
        let _ = writeln!(o, "[audit]\nsamples = {}\n", self.audit_samples);
        let _ = writeln!(o, "[forcing]\neps_fractions = {}\n", join(&self.eps_fractions));
        if let Some(d) = &self.input_dir {
            let _ = writeln!(o, "[diagnose]\ninput = {}\n", d.display());
        }
        let _ = writeln!(
            o,
            "[output]\ndir = {}\nseed = {}\nemit_snapshots = {}\nsnapshot_every = {}",
            self.output_dir.display(),
            self.seed,
            b(self.emit_snapshots),
            self.snapshot_every
        );
        o
    }

    pub fn chart(&self) -> Result<ConeChart<f64>> {
        self.chart_at(self.rho)
    }

    fn chart_at(&self, rho: f64) -> Result<ConeChart<f64>> {
        ConeChart::new(self.n, rho).map_err(|e| Error::Config(e.to_string()))
    }

    /// Scheme parameters at horizon `rho` and viscosity `nu`.
    pub fn scheme(&self, rho: f64, nu: f64) -> Result<SchemeConfig<f64>> {
        let chart = self.chart_at(rho)?;
        let mut s = SchemeConfig::new(chart, nu, self.points)?;
        s.m = self.m;
        s.ds = self.ds;
        s.s_max = match self.s_max {
            Some(v) => v,
            None => chart.s_at_tip_fraction(self.tip_fraction)?,
        };
        s.k_max = self.k_max;
        s.fp_tol = self.fp_tol;
        s.max_fp_iters = self.max_fp_iters;
        s.norm_every = self.norm_every;
        s.toggles = self.toggles;
        s.convection_variant = self.convection_variant;
        s.validate()?;
        Ok(s)
    }

    fn data(&self, chart: &ConeChart<f64>) -> Result<VectorField<f64>> {
        match self.data {
            DataKind::Gaussian => Ok(make_gaussian_data(chart, self.points)?.h_rho),
            DataKind::Constant { value } => make_constant_data(chart, self.points, value),
        }
    }
}

/// Result of an experiment: whether every check passed and the files written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Out {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        self.files.push(p);
        Ok(())
    }

    fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
        body.push('\n');
        self.write(name, &body)
    }
}

/// Runs `cfg.experiment`, writing every artifact under `cfg.output_dir`
/// together with the resolved configuration.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let mut out = Out::new(&cfg.output_dir)?;
    out.write("config.ini", &cfg.to_ini())?;
    let (pass, summary) = match cfg.experiment {
        Experiment::Verify => verify(cfg, &mut out)?,
        Experiment::Run => run(cfg, &mut out)?,
        Experiment::Sweep => sweep(cfg, &mut out)?,
        Experiment::Diagnose => diagnose(cfg, &mut out)?,
        Experiment::Audit => audit(cfg, &mut out)?,
    };
    Ok(Outcome { pass, files: out.files, summary })
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn relative(name: &str, measured: f64, expected: f64, tol: f64) -> Self {
        let err = (measured - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        Self { name: name.into(), measured, expected, tolerance: tol, pass: err <= tol }
    }

    fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, expected: bound, tolerance: 0.0, pass: measured <= bound }
    }
}

/// A documented difference between a printed claim and the measured value.
#[derive(Debug, Clone, Serialize)]
pub struct Discrepancy {
    pub name: String,
    pub measured: Option<f64>,
    pub claimed: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyLedger {
    pub all_pass: bool,
    pub checks: Vec<Check>,
    pub discrepancies: Vec<Discrepancy>,
}

pub const VALUE_ENVELOPE_MU: [f64; 3] = [0.3, 0.5, 0.9];
/// The gradient envelope is only integrable for `μ > 1/2`.
pub const GRADIENT_ENVELOPE_MU: [f64; 3] = [0.6, 0.75, 0.9];
pub const ENVELOPE_TAUS: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];

/// Identity and bound checks of geometry, kernels and the transform audit.
pub fn verify_ledger(cfg: &RunConfig) -> Result<VerifyLedger> {
    let chart = cfg.chart()?;
    let rho = chart.rho();
    let n = chart.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    let (mut st, mut xy, mut jac, mut dsdt) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let t = rng.gen_range(0.0..0.999 * rho);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        st = st.max((chart.t_of_s(chart.s_of_t(t)?)? - t).abs() / rho);
        let back = chart.x_of_y(t, &chart.y_of_x(t, &x)?)?;
        xy = xy.max(back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let det: f64 = x.iter().map(|&xi| (Dual::variable(xi).atan() * (rho - t)).deriv).product();
        jac = jac.max((det / chart.measure_factor(t, &x)? - 1.0).abs());
        let s = chart.s_of_t(t)?;
        let dt_ds = {
            let sd = Dual::variable(s);
            (sd * rho / (sd * sd + 1.0).sqrt()).deriv
        };
        dsdt = dsdt.max((chart.ds_dt(t)? * dt_ds - 1.0).abs());
    }
    checks.push(Check::at_most("s/t round trip (relative to rho)", st, 1e-12));
    checks.push(Check::at_most("x/y round trip", xy, 1e-10));
    checks.push(Check::at_most("measure factor vs Jacobian (relative)", jac, 1e-10));
    checks.push(Check::at_most("ds/dt vs 1/(dt/ds) (relative)", dsdt, 1e-10));

    for (r, e) in [(0.1, 1e-3), (0.05, 1e-4), (rho, 1e-3 * rho)] {
        let c = cfg.chart_at(r)?;
        checks.push(Check::relative(&format!("damping integral rho={r} eps={e}"), c.damping_time_integral(e)?, (r / e).ln(), 1e-6));
    }
    for r in [0.2, 0.1, 0.05, 0.01] {
        let c = cfg.chart_at(r)?;
        checks.push(Check::relative(&format!("sup Burgers coefficient / rho at rho={r}"), c.coeff_sup(CoeffKind::Burgers).value / r, 1.0, 1e-6));
    }
    let damping_sup = chart.coeff_sup(CoeffKind::Damping);
    checks.push(Check::relative("sup damping coefficient", damping_sup.value, 27f64.sqrt() / 4.0, 1e-6));
    checks.push(Check::relative("damping coefficient at t=0", chart.coeff(CoeffKind::Damping, 0.0)?, 1.0, 1e-12));
    checks.push(Check::relative(
        "cylinder damping mass quadrature vs closed form",
        chart.cylinder_damping_mass(1.0)?,
        chart.cylinder_damping_mass_closed(1.0),
        1e-8,
    ));

    for mu in VALUE_ENVELOPE_MU {
        let env = envelope_check(&kernel_constants(n, mu)?, cfg.nu, &ENVELOPE_TAUS, 16, 4.0)?;
        checks.push(Check::at_most(&format!("heat kernel value envelope ratio mu={mu}"), env.value_ratio, 1.0 + 1e-9));
    }
    for mu in GRADIENT_ENVELOPE_MU {
        let env = envelope_check(&kernel_constants(n, mu)?, cfg.nu, &ENVELOPE_TAUS, 16, 4.0)?;
        checks.push(Check::at_most(&format!("heat kernel gradient envelope ratio mu={mu}"), env.grad_ratio, 1.0 + 1e-9));
    }
    let (num, closed) = large_time_envelope_integral(n, cfg.nu);
    checks.push(Check::relative("large-time heat envelope integral", num, closed, 1e-8));

    let spec = GridSpec::new(n, 16, 4.0)?;
    let eng = ConvolutionEngine::new(&spec);
    let len = spec.len();
    let v: Vec<Vec<f64>> = (0..n).map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let p1 = eng.leray(&v);
    let p2 = eng.leray(&p1);
    let idem = p1.iter().flatten().zip(p2.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("Leray projector idempotence", idem, 1e-10));

    let audit = transform_audit(cfg.audit_samples.min(1000), cfg.seed, &chart)?;
    for term in ["burgers", "damping", "leray", "jacobian"] {
        let e = audit.entry(term, None).expect("audited term");
        checks.push(Check::at_most(&format!("transform audit {term} (max relative error)"), e.max_rel_error, 1e-10));
    }
    let chain = audit.entry("convection", Some(ConvectionVariant::ChainRule)).expect("chain-rule entry");
    checks.push(Check::at_most("transform audit convection chain rule", chain.max_rel_error, 1e-10));

    let mut discrepancies = vec![Discrepancy {
        name: "sup damping coefficient".into(),
        measured: Some(damping_sup.value),
        claimed: Some(1.0),
        note: format!(
            "the supremum over [0, rho] is 3*sqrt(3)/4, attained at t = {:.6} rho; the claimed value is the t = 0 endpoint",
            damping_sup.argmax / rho
        ),
    }];
    for v in [ConvectionVariant::PrintedA, ConvectionVariant::PrintedB] {
        let e = audit.entry("convection", Some(v)).expect("variant entry");
        discrepancies.push(Discrepancy {
            name: format!("convection coefficient {v}"),
            measured: Some(e.factor_max),
            claimed: Some(1.0),
            note: format!(
                "chain-rule / printed ratio ranges over [{:.6}, {:.6}], i.e. 1/(rho - t); resolved variant: {}",
                e.factor_min, e.factor_max, audit.resolved_variant
            ),
        });
    }
    for note in &audit.notes {
        discrepancies.push(Discrepancy { name: "transform audit".into(), measured: None, claimed: None, note: note.clone() });
    }
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerifyLedger { all_pass, checks, discrepancies })
}

fn verify(cfg: &RunConfig, out: &mut Out) -> Result<(bool, String)> {
    let ledger = verify_ledger(cfg)?;
    out.json("ledger.json", &ledger)?;
    let failed: Vec<&str> = ledger.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("verify: {} checks passed, {} discrepancies recorded", ledger.checks.len(), ledger.discrepancies.len())
    } else {
        format!("verify: failed checks: {}", failed.join("; "))
    };
    Ok((ledger.all_pass, summary))
}

const TRAJECTORY_HEADER: &str =
    "# s: pseudo-time; t: physical time; lambda: rho - t; w_i: cone-frame velocity at the center; v_i = w_i/lambda; norm: H^m+C^m norm (empty when not evaluated); fp_iters; fp_defect: relative\n";

#[derive(Debug, Clone, Serialize)]
pub struct LinearCheck {
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub rho: f64,
    pub nu: f64,
    pub steps: usize,
    pub ds: f64,
    pub s_max: f64,
    pub sup_norm: f64,
    pub unconverged_steps: usize,
    pub final_center_w: Vec<f64>,
    pub forcing: ForcingReport,
    /// `None` when the run covers fewer than two decades of `ρ − t`.
    pub blowup: Option<crate::limits::BlowupReport>,
    /// Comparison with the exact linear solution when no nonlinear term is active.
    pub linear_check: Option<LinearCheck>,
}

/// Relative tolerance of the in-process linear check.
pub const LINEAR_CHECK_TOLERANCE: f64 = 1e-10;

fn run(cfg: &RunConfig, out: &mut Out) -> Result<(bool, String)> {
    let scheme = cfg.scheme(cfg.rho, cfg.nu)?;
    let chart = scheme.chart;
    let data = cfg.data(&chart)?;
    let snap_dir = cfg.output_dir.join("snapshots");
    if cfg.emit_snapshots {
        fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    }
    let mut acc = ForcingAccumulator::new(chart, cfg.nu);
    let mut last: Option<VectorField<f64>> = None;
    let mut index = 0usize;
    let (steps, ds) = scheme.steps();
    let mut snaps = Vec::new();
    let result = march(&scheme, &data, |f| {
        acc.push(f)?;
        if cfg.emit_snapshots && (index % cfg.snapshot_every == 0 || index == steps) {
            let p = snap_dir.join(format!("slice_{index:06}.cw"));
            write_snapshot(&p, f)?;
            snaps.push(p);
        }
        index += 1;
        if index == steps + 1 {
            last = Some(f.clone());
        }
        Ok(())
    })?;
    out.files.extend(snaps);

    let mut csv = String::from(TRAJECTORY_HEADER);
    let nc = chart.n();
    let cols: Vec<String> = (0..nc).map(|i| format!("w_{i}")).chain((0..nc).map(|i| format!("v_{i}"))).collect();
    let _ = writeln!(csv, "s,t,lambda,{},norm,fp_iters,fp_defect", cols.join(","));
    for p in &result.samples {
        let w: Vec<String> = p.center.iter().map(|v| v.to_string()).collect();
        let v: Vec<String> = p.center.iter().map(|v| (v / p.lambda).to_string()).collect();
        let norm = p.norm.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{},{},{},{}", p.s, p.t, p.lambda, w.join(","), v.join(","), norm, p.fp_iters, p.fp_defect);
    }
    out.write("trajectory.csv", &csv)?;

    let eps: Vec<f64> = cfg.eps_fractions.iter().map(|f| f * cfg.rho).collect();
    let forcing = acc.finish(&eps)?;
    let s: Vec<f64> = result.samples.iter().map(|p| p.s).collect();
    let w0: Vec<f64> = result.samples.iter().map(|p| p.center[0]).collect();
    let blowup = blowup_fit(&reconstruct_center_series(&s, &w0, &chart)?, &chart).ok();

    let no_drift = !cfg.toggles.convection || cfg.convection_variant == ConvectionVariant::ChainRule;
    let linear_check = match (&last, !cfg.toggles.burgers && !cfg.toggles.leray && no_drift) {
        (Some(f), true) => {
            let r = linear_reference(&scheme, &data, f.meta.time)?;
            let diff = r.iter().flatten().zip(f.comps.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let tol = LINEAR_CHECK_TOLERANCE * data.max_abs().max(1.0);
            Some(LinearCheck { max_abs_diff: diff, tolerance: tol, pass: diff <= tol })
        }
        _ => None,
    };
    let pass = linear_check.as_ref().map(|c| c.pass).unwrap_or(true);
    let summary = RunSummary {
        rho: cfg.rho,
        nu: cfg.nu,
        steps,
        ds,
        s_max: scheme.s_max,
        sup_norm: result.sup_norm,
        unconverged_steps: result.unconverged_steps,
        final_center_w: result.samples.last().map(|p| p.center.clone()).unwrap_or_default(),
        forcing,
        blowup,
        linear_check,
    };
    out.json("run.json", &summary)?;
    let text = format!(
        "run: {} steps to s = {:.4}, final w(s,0) = {:.6e}, sup norm {:.6e}",
        steps,
        scheme.s_max,
        summary.final_center_w.first().copied().unwrap_or(f64::NAN),
        result.sup_norm
    );
    Ok((pass, text))
}

fn sweep(cfg: &RunConfig, out: &mut Out) -> Result<(bool, String)> {
    let mut csv = String::from(
        "# rho: horizon; nu: viscosity; sup_norm: sup over s of the H^m+C^m norm; w_final: w(s_max,0); v_final = w_final/lambda(s_max); unconverged: fixed-point steps above tolerance\n",
    );
    csv.push_str("rho,nu,sup_norm,w_final,v_final,unconverged\n");
    let mut center = String::from("# s: pseudo-time; t: physical time; w_nu: center value per viscosity; w_limit: extrapolated to nu = 0; error: size of the extrapolation correction; v_limit = w_limit/lambda\n");
    for (ri, &rho) in cfg.rhos.iter().enumerate() {
        let scheme = cfg.scheme(rho, cfg.nus[0])?;
        let chart = scheme.chart;
        let data = cfg.data(&chart)?;
        let res = viscosity_sweep(&scheme, &data, &cfg.nus)?;
        let lam_end = chart.lambda_of_s(*res.s.last().unwrap_or(&0.0))?;
        for (k, &nu) in res.nus.iter().enumerate() {
            let w = *res.trajectories[k].last().unwrap_or(&f64::NAN);
            let _ = writeln!(csv, "{rho},{nu},{},{w},{},{}", res.norms[k], w / lam_end, res.unconverged[k]);
        }
        let rec = reconstruct_sweep(&res, &chart)?;
        let names: Vec<String> = res.nus.iter().map(|nu| format!("w_nu={nu}")).collect();
        let _ = writeln!(center, "rho = {rho}\ns,t,{},w_limit,error,v_limit", names.join(","));
        for (j, &s) in res.s.iter().enumerate() {
            let ws: Vec<String> = res.trajectories.iter().map(|t| t[j].to_string()).collect();
            let _ = writeln!(
                center,
                "{s},{},{},{},{},{}",
                rec[j].0,
                ws.join(","),
                res.extrapolation.series[j],
                res.extrapolation.error[j],
                rec[j].1
            );
        }
        out.json(&format!("sweep_rho{ri}.json", ri = ri), &res)?;
    }
    out.write("summary.csv", &csv)?;
    out.write("center_series.csv", &center)?;
    let rows = cfg.rhos.len() * cfg.nus.len();
    Ok((true, format!("sweep: {rows} runs over {} horizons", cfg.rhos.len())))
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseReport {
    pub source: PathBuf,
    pub samples: usize,
    pub blowup: crate::limits::BlowupReport,
    /// Forcing norms from stored snapshots, when the run emitted them. The
    /// time quadrature only sees the stored slices.
    pub forcing: Option<ForcingReport>,
    pub snapshots: usize,
}

fn read_trajectory(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::Format(format!("{}: empty", path.display())))?.split(',').collect();
    let col = |name: &str| {
        header.iter().position(|h| *h == name).ok_or_else(|| Error::Format(format!("{}: no column '{name}'", path.display())))
    };
    let (cs, cw) = (col("s")?, col("w_0")?);
    let (mut s, mut w) = (Vec::new(), Vec::new());
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64> {
            f.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("{}: bad row '{line}'", path.display())))
        };
        s.push(get(cs)?);
        w.push(get(cw)?);
    }
    Ok((s, w))
}

fn diagnose(cfg: &RunConfig, out: &mut Out) -> Result<(bool, String)> {
    let src = cfg.input_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let (s, w) = read_trajectory(&src.join("trajectory.csv"))?;
    let chart = cfg.chart()?;
    let series = reconstruct_center_series(&s, &w, &chart)?;
    let blowup = blowup_fit(&series, &chart)?;
    let snap_dir = src.join("snapshots");
    let mut snapshots = 0;
    let forcing = if snap_dir.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(&snap_dir)
            .map_err(|e| Error::io(&snap_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().map(|x| x == "cw").unwrap_or(false))
            .collect();
        paths.sort();
        snapshots = paths.len();
        let mut acc = ForcingAccumulator::new(chart, cfg.nu);
        for p in &paths {
            acc.push(&read_snapshot::<f64>(p)?)?;
        }
        let eps: Vec<f64> = cfg.eps_fractions.iter().map(|f| f * cfg.rho).collect();
        Some(acc.finish(&eps)?)
    } else {
        None
    };
    let report = DiagnoseReport { source: src, samples: s.len(), blowup, forcing, snapshots };
    out.json("diagnose.json", &report)?;
    Ok((
        true,
        format!(
            "diagnose: fitted order {:.6} ± {:.2e}, sup |v|(rho - t) = {:.6e}",
            report.blowup.fitted_order, report.blowup.order_ci95, report.blowup.bounded_product
        ),
    ))
}

fn audit(cfg: &RunConfig, out: &mut Out) -> Result<(bool, String)> {
    let chart = cfg.chart()?;
    let ledger = transform_audit(cfg.audit_samples, cfg.seed, &chart)?;
    out.json("audit.json", &ledger)?;
    let mut csv = String::from("# term; variant (convection only); max_rel_error: max |measured - printed|/|printed|; factor_min/max: range of measured/printed; matches: within 1e-10\n");
    csv.push_str("term,variant,max_rel_error,factor_min,factor_max,matches\n");
    for e in &ledger.entries {
        let v = e.variant.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{v},{},{},{},{}", e.term, e.max_rel_error, e.factor_min, e.factor_max, e.matches);
    }
    out.write("audit.csv", &csv)?;
    let pass = ledger.core_terms_match();
    Ok((pass, format!("audit: {} samples, resolved convection variant {}", ledger.samples, ledger.resolved_variant)))
}

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CHECK_FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DIVERGED: i32 = 3;
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Diverged { .. } => exit::DIVERGED,
        _ => exit::USAGE,
    }
}
