//! TOML run configuration.
//!
//! ```toml
//! [params]            # required; g plus J and κ in one of their spellings
//! g = 5e-3
//! j = 5e-3            # or j_l / j_r
//! kappa_over_g = 0.2  # or kappa, or kappa_l / kappa_c / kappa_r
//!
//! [sweep]             # Δ axis: Δ_L = Δ, Δ_C = Δ + delta_lc, Δ_R = Δ + delta_lr
//! start = -0.05
//! stop = 0.05
//! count = 101
//! delta_lr = 0.02
//!
//! [drive]
//! study = "diode"     # diode | source | capacitor
//! eps = 1e-4
//!
//! [run]
//! backends = ["analytic"]
//! formats = ["csv"]
//! out = "out"
//! ```
//!
//! Every key left out is filled with its default and the default is logged.

use std::fmt::Display;
use std::path::{Path, PathBuf};

use omtrans_core::liouville::{SteadyMethod, Truncation};
use omtrans_core::model::{thermal_occupancy, DetuningRule, NonlinearSign, SystemParams};
use omtrans_core::transport::{linspace, Backend, DriveConvention, Solver, Study, DEFAULT_EPS};
use omtrans_core::weakdrive::UpbSearch;
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

type S<T> = Option<Spanned<T>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: Spanned<RawParams>,
    sweep: Option<RawSweep>,
    drive: Option<RawDrive>,
    run: Option<RawRun>,
    spectrum: Option<RawSpectrum>,
    upb: Option<RawUpb>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    g: S<f64>,
    j: S<f64>,
    j_l: S<f64>,
    j_r: S<f64>,
    kappa: S<f64>,
    kappa_over_g: S<f64>,
    kappa_l: S<f64>,
    kappa_c: S<f64>,
    kappa_r: S<f64>,
    delta_l: S<f64>,
    delta_c: S<f64>,
    delta_r: S<f64>,
    gamma: S<f64>,
    n_th: S<f64>,
    temperature_mk: S<f64>,
    omega_m_hz: S<f64>,
    nonlinear_sign: S<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: S<String>,
    start: S<f64>,
    stop: S<f64>,
    count: S<i64>,
    log: S<bool>,
    delta_lc: S<f64>,
    delta_lr: S<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    study: S<String>,
    eps: S<f64>,
    eps_c0: S<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    backends: S<Vec<String>>,
    photon_dim: S<i64>,
    phonon_dim: S<i64>,
    max_photons: S<i64>,
    method: S<String>,
    audit_rtol: S<f64>,
    out: S<String>,
    formats: S<Vec<String>>,
    seed: S<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    s_max: S<i64>,
    n_max: S<i64>,
    phonon_dim: S<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUpb {
    g_min: S<f64>,
    g_max: S<f64>,
    delta_min: S<f64>,
    delta_max: S<f64>,
    g_points: S<i64>,
    delta_points: S<i64>,
    threshold: S<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "svg" => Some(Format::Svg),
            _ => None,
        }
    }
}

/// Accepts the short CLI spellings as well as the record tags.
pub fn parse_backend(s: &str) -> Option<Backend> {
    match s {
        "kerr" => Some(Backend::EffectiveKerr),
        "full" => Some(Backend::FullMasterEquation),
        _ => Backend::from_name(s),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl SweepAxis {
    pub fn grid(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.start.abs().ln(), self.stop.abs().ln());
            let sign = self.start.signum();
            linspace(a, b, self.count).into_iter().map(|x| sign * x.exp()).collect()
        } else {
            linspace(self.start, self.stop, self.count)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub s_max: usize,
    pub n_max: usize,
    pub phonon_dim: usize,
}

/// A validated configuration with every default applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// File stem of the config, used to name outputs.
    pub name: String,
    pub params: SystemParams,
    pub sweep: SweepAxis,
    pub rule: DetuningRule,
    pub study: Study,
    pub convention: DriveConvention,
    pub solvers: Vec<Solver>,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub seed: u64,
    pub spectrum: SpectrumSpec,
    pub upb: UpbSearch,
    /// `key = value` for every default that was applied, in order.
    pub defaults: Vec<String>,
}

struct Ctx<'a> {
    path: &'a str,
    src: &'a str,
    defaults: Vec<String>,
}

impl<'a> Ctx<'a> {
    fn line(&self, offset: usize) -> usize {
        self.src[..offset.min(self.src.len())].matches('\n').count() + 1
    }

    fn err_at<T>(&self, span: std::ops::Range<usize>, msg: impl Display) -> Result<T, ConfigError> {
        Err(ConfigError {
            path: self.path.to_string(),
            message: format!("line {}: {msg}", self.line(span.start)),
        })
    }

    fn err<T>(&self, msg: impl Display) -> Result<T, ConfigError> {
        Err(ConfigError {
            path: self.path.to_string(),
            message: msg.to_string(),
        })
    }

    fn or_default<T: Clone + std::fmt::Debug>(&mut self, v: &S<T>, key: &str, default: T) -> T {
        match v {
            Some(s) => s.get_ref().clone(),
            None => {
                self.defaults.push(format!("{key} = {default:?}"));
                default
            }
        }
    }

    fn finite(&self, v: &S<f64>, key: &str) -> Result<Option<f64>, ConfigError> {
        match v {
            Some(s) if !s.get_ref().is_finite() => self.err_at(s.span(), format!("{key} must be finite")),
            Some(s) => Ok(Some(*s.get_ref())),
            None => Ok(None),
        }
    }

    fn non_negative(&self, v: &S<f64>, key: &str) -> Result<Option<f64>, ConfigError> {
        match (self.finite(v, key)?, v) {
            (Some(x), Some(s)) if x < 0.0 => self.err_at(s.span(), format!("{key} must be non-negative, got {x}")),
            (x, _) => Ok(x),
        }
    }

    fn count(&self, v: &S<i64>, key: &str, min: i64) -> Result<Option<usize>, ConfigError> {
        match v {
            Some(s) if *s.get_ref() < min => {
                self.err_at(s.span(), format!("{key} must be at least {min}, got {}", s.get_ref()))
            }
            Some(s) => Ok(Some(*s.get_ref() as usize)),
            None => Ok(None),
        }
    }

    fn exclusive(&self, a: &S<f64>, b: &S<f64>, what: &str) -> Result<(), ConfigError> {
        if let (Some(_), Some(s)) = (a, b) {
            return self.err_at(s.span(), format!("{what} given twice"));
        }
        Ok(())
    }
}

pub fn parse_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let shown = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    parse_str(&src, &shown, &name)
}

pub fn parse_str(src: &str, path: &str, name: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(src).map_err(|e| ConfigError {
        path: path.to_string(),
        message: e.to_string().trim_end().to_string(),
    })?;
    let mut cx = Ctx {
        path,
        src,
        defaults: Vec::new(),
    };
    let params = resolve_params(&mut cx, &raw.params)?;

    let sw = raw.sweep.as_ref();
    let none_sweep = RawSweep {
        variable: None,
        start: None,
        stop: None,
        count: None,
        log: None,
        delta_lc: None,
        delta_lr: None,
    };
    let sw = sw.unwrap_or(&none_sweep);
    let variable = cx.or_default(&sw.variable, "sweep.variable", "delta".to_string());
    if variable != "delta" {
        let span = sw.variable.as_ref().map(|s| s.span()).unwrap_or(0..0);
        return cx.err_at(span, format!("unsupported sweep variable {variable:?}; only \"delta\" is swept"));
    }
    let start = cx.finite(&sw.start, "sweep.start")?;
    let start = start.unwrap_or_else(|| cx.or_default(&None, "sweep.start", -0.05));
    let stop = cx.finite(&sw.stop, "sweep.stop")?;
    let stop = stop.unwrap_or_else(|| cx.or_default(&None, "sweep.stop", 0.05));
    let count = cx.count(&sw.count, "sweep.count", 1)?;
    let count = count.unwrap_or_else(|| cx.or_default(&None, "sweep.count", 101usize));
    let log = cx.or_default(&sw.log, "sweep.log", false);
    if log && !(start * stop > 0.0) {
        let span = sw.log.as_ref().map(|s| s.span()).unwrap_or(0..0);
        return cx.err_at(span, "log sweep needs start and stop of the same sign, both nonzero");
    }
    let dlc = cx.finite(&sw.delta_lc, "sweep.delta_lc")?;
    let dlr = cx.finite(&sw.delta_lr, "sweep.delta_lr")?;
    let rule = DetuningRule {
        delta_lc: dlc.unwrap_or_else(|| cx.or_default(&None, "sweep.delta_lc", 0.0)),
        delta_lr: dlr.unwrap_or_else(|| cx.or_default(&None, "sweep.delta_lr", 0.0)),
    };

    let none_drive = RawDrive {
        study: None,
        eps: None,
        eps_c0: None,
    };
    let dr = raw.drive.as_ref().unwrap_or(&none_drive);
    let study_name = cx.or_default(&dr.study, "drive.study", "diode".to_string());
    let Some(study) = Study::from_name(&study_name) else {
        let span = dr.study.as_ref().map(|s| s.span()).unwrap_or(0..0);
        return cx.err_at(span, format!("unknown study {study_name:?} (diode, source, capacitor)"));
    };
    let eps = cx.non_negative(&dr.eps, "drive.eps")?;
    let eps = eps.unwrap_or_else(|| cx.or_default(&None, "drive.eps", DEFAULT_EPS));
    let mut convention = DriveConvention::for_study(study, eps);
    match cx.non_negative(&dr.eps_c0, "drive.eps_c0")? {
        Some(v) => convention.eps_c0 = v,
        None => {
            let d = convention.eps_c0;
            cx.or_default(&None, "drive.eps_c0", d);
        }
    }

    let none_run = RawRun {
        backends: None,
        photon_dim: None,
        phonon_dim: None,
        max_photons: None,
        method: None,
        audit_rtol: None,
        out: None,
        formats: None,
        seed: None,
    };
    let run = raw.run.as_ref().unwrap_or(&none_run);
    let backend_names = cx.or_default(&run.backends, "run.backends", vec!["analytic".to_string()]);
    let mut backends = Vec::new();
    for b in &backend_names {
        match parse_backend(b) {
            Some(x) => backends.push(x),
            None => {
                let span = run.backends.as_ref().map(|s| s.span()).unwrap_or(0..0);
                return cx.err_at(span, format!("unknown backend {b:?} (analytic, kerr, full)"));
            }
        }
    }
    if backends.is_empty() {
        let span = run.backends.as_ref().map(|s| s.span()).unwrap_or(0..0);
        return cx.err_at(span, "run.backends is empty");
    }
    let mut truncation = Truncation::default();
    match cx.count(&run.photon_dim, "run.photon_dim", 1)? {
        Some(v) => truncation.photon_dim = v,
        None => {
            cx.or_default(&None, "run.photon_dim", truncation.photon_dim);
        }
    }
    truncation.phonon_dim = cx.count(&run.phonon_dim, "run.phonon_dim", 1)?;
    if truncation.phonon_dim.is_none() {
        cx.defaults
            .push(format!("run.phonon_dim = {} (max(8, ceil(10(g^2 + n_th + 1))))", omtrans_core::liouville::default_phonon_dim(&params)));
    }
    truncation.max_photons = cx.count(&run.max_photons, "run.max_photons", 0)?;
    let method_name = cx.or_default(&run.method, "run.method", "auto".to_string());
    let method = match method_name.as_str() {
        "auto" => SteadyMethod::Auto,
        "direct" => SteadyMethod::Direct,
        "weak-drive" => SteadyMethod::WeakDrive,
        other => {
            let span = run.method.as_ref().map(|s| s.span()).unwrap_or(0..0);
            return cx.err_at(span, format!("unknown method {other:?} (auto, direct, weak-drive)"));
        }
    };
    let audit = cx.non_negative(&run.audit_rtol, "run.audit_rtol")?;
    let solvers = backends
        .into_iter()
        .map(|backend| Solver {
            backend,
            truncation,
            method,
            audit,
        })
        .collect();
    let out = PathBuf::from(cx.or_default(&run.out, "run.out", "out".to_string()));
    let format_names = cx.or_default(&run.formats, "run.formats", vec!["csv".to_string()]);
    let mut formats = Vec::new();
    for f in &format_names {
        match Format::from_name(f) {
            Some(x) => formats.push(x),
            None => {
                let span = run.formats.as_ref().map(|s| s.span()).unwrap_or(0..0);
                return cx.err_at(span, format!("unknown format {f:?} (csv, json, svg)"));
            }
        }
    }
    let seed = match &run.seed {
        Some(s) if *s.get_ref() < 0 => return cx.err_at(s.span(), "run.seed must be non-negative"),
        Some(s) => *s.get_ref() as u64,
        None => cx.or_default(&None, "run.seed", 0u64),
    };

    let spectrum = match &raw.spectrum {
        Some(sp) => SpectrumSpec {
            s_max: cx.count(&sp.s_max, "spectrum.s_max", 0)?.unwrap_or(2),
            n_max: cx.count(&sp.n_max, "spectrum.n_max", 0)?.unwrap_or(3),
            phonon_dim: cx.count(&sp.phonon_dim, "spectrum.phonon_dim", 1)?.unwrap_or(60),
        },
        None => SpectrumSpec {
            s_max: 2,
            n_max: 3,
            phonon_dim: 60,
        },
    };
    if spectrum.n_max >= spectrum.phonon_dim {
        return cx.err("spectrum.n_max must be below spectrum.phonon_dim");
    }

    let mut upb = UpbSearch::new((0.0, 0.05), (start, stop), rule);
    if let Some(u) = &raw.upb {
        let g_min = cx.non_negative(&u.g_min, "upb.g_min")?.unwrap_or(0.0);
        let g_max = cx.non_negative(&u.g_max, "upb.g_max")?.unwrap_or(0.05);
        let d_min = cx.finite(&u.delta_min, "upb.delta_min")?.unwrap_or(start);
        let d_max = cx.finite(&u.delta_max, "upb.delta_max")?.unwrap_or(stop);
        upb.g_range = (g_min, g_max);
        upb.delta_range = (d_min, d_max);
        upb.grid = (
            cx.count(&u.g_points, "upb.g_points", 2)?.unwrap_or(upb.grid.0),
            cx.count(&u.delta_points, "upb.delta_points", 2)?.unwrap_or(upb.grid.1),
        );
        if let Some(t) = cx.non_negative(&u.threshold, "upb.threshold")? {
            upb.threshold = t;
        }
    }

    Ok(RunConfig {
        name: name.to_string(),
        params,
        sweep: SweepAxis {
            start,
            stop,
            count,
            log,
        },
        rule,
        study,
        convention,
        solvers,
        out,
        formats,
        seed,
        spectrum,
        upb,
        defaults: cx.defaults,
    })
}

fn resolve_params(cx: &mut Ctx, raw: &Spanned<RawParams>) -> Result<SystemParams, ConfigError> {
    let span = raw.span();
    let r = raw.get_ref();
    let Some(g) = cx.non_negative(&r.g, "params.g")? else {
        return cx.err_at(span, "missing required key params.g");
    };
    cx.exclusive(&r.j, &r.j_l, "J_L (j and j_l)")?;
    cx.exclusive(&r.j, &r.j_r, "J_R (j and j_r)")?;
    let j = cx.non_negative(&r.j, "params.j")?;
    let (j_l, j_r) = match (j, cx.non_negative(&r.j_l, "params.j_l")?, cx.non_negative(&r.j_r, "params.j_r")?) {
        (Some(j), _, _) => (j, j),
        (None, Some(a), Some(b)) => (a, b),
        _ => return cx.err_at(span, "missing required key params.j (or both params.j_l and params.j_r)"),
    };

    cx.exclusive(&r.kappa, &r.kappa_over_g, "uniform kappa (kappa and kappa_over_g)")?;
    let uniform = match (cx.non_negative(&r.kappa, "params.kappa")?, cx.non_negative(&r.kappa_over_g, "params.kappa_over_g")?) {
        (Some(k), _) => Some(k),
        (None, Some(ratio)) => Some(ratio * g),
        _ => None,
    };
    let per = [
        cx.non_negative(&r.kappa_l, "params.kappa_l")?,
        cx.non_negative(&r.kappa_c, "params.kappa_c")?,
        cx.non_negative(&r.kappa_r, "params.kappa_r")?,
    ];
    let mut kappas = [0.0; 3];
    for (i, k) in per.iter().enumerate() {
        kappas[i] = match (k, uniform) {
            (Some(k), _) => *k,
            (None, Some(u)) => u,
            (None, None) => {
                return cx.err_at(span, "missing required key params.kappa (or kappa_over_g, or all of kappa_l/kappa_c/kappa_r)")
            }
        };
    }

    let mut detunings = [0.0; 3];
    for (i, (v, key)) in [(&r.delta_l, "params.delta_l"), (&r.delta_c, "params.delta_c"), (&r.delta_r, "params.delta_r")]
        .into_iter()
        .enumerate()
    {
        detunings[i] = match cx.finite(v, key)? {
            Some(x) => x,
            None => cx.or_default(&None, key, 0.0),
        };
    }
    let gamma = match cx.non_negative(&r.gamma, "params.gamma")? {
        Some(x) => x,
        None => cx.or_default(&None, "params.gamma", 0.0),
    };
    cx.exclusive(&r.n_th, &r.temperature_mk, "bath occupation (n_th and temperature_mk)")?;
    let omega_m_hz = cx.non_negative(&r.omega_m_hz, "params.omega_m_hz")?;
    let n_th = match (cx.non_negative(&r.n_th, "params.n_th")?, cx.non_negative(&r.temperature_mk, "params.temperature_mk")?) {
        (Some(n), _) => n,
        (None, Some(t)) => {
            let Some(f) = omega_m_hz else {
                let s = r.temperature_mk.as_ref().unwrap().span();
                return cx.err_at(s, "temperature_mk needs params.omega_m_hz");
            };
            match thermal_occupancy(f, t * 1e-3) {
                Ok(n) => n,
                Err(e) => return cx.err_at(r.temperature_mk.as_ref().unwrap().span(), e),
            }
        }
        (None, None) => cx.or_default(&None, "params.n_th", 0.0),
    };
    let sign_name = cx.or_default(&r.nonlinear_sign, "params.nonlinear_sign", "appendix".to_string());
    let nonlinear_sign = match sign_name.as_str() {
        "appendix" => NonlinearSign::Appendix,
        "polaron" => NonlinearSign::Polaron,
        other => {
            let s = r.nonlinear_sign.as_ref().map(|s| s.span()).unwrap_or(span);
            return cx.err_at(s, format!("unknown nonlinear_sign {other:?} (appendix, polaron)"));
        }
    };
    let p = SystemParams {
        delta_l: detunings[0],
        delta_c: detunings[1],
        delta_r: detunings[2],
        g,
        j_l,
        j_r,
        kappa_l: kappas[0],
        kappa_c: kappas[1],
        kappa_r: kappas[2],
        gamma,
        n_th,
        eps_l: 0.0,
        eps_c: 0.0,
        eps_r: 0.0,
        omega_m_hz,
        nonlinear_sign,
    };
    if let Err(e) = p.validate() {
        return cx.err_at(span, e);
    }
    Ok(p)
}
