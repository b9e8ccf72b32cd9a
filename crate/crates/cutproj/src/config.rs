//! TOML scheme configuration.
//!
//! Numbers may be written as TOML numbers or as strings holding a small
//! arithmetic expression; the identifier `golden` expands to
//! `1.6180339887498949` before evaluation.

use std::path::Path;

use cutproj_core::piecewise::Trapezoid;
use cutproj_core::spectra::{Cutoff, InternalProfile};
use cutproj_core::{BoxN, CutProjectScheme, Lattice, Window, DEFAULT_BUDGET};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// `golden` at 17 significant digits.
pub const GOLDEN_LITERAL: &str = "1.6180339887498949";

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Num {
    Int(i64),
    Float(f64),
    Expr(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scheme: RawScheme,
    window: RawWindow,
    profile: Option<RawProfile>,
    cutoff: Option<RawCutoff>,
    query: RawBox,
    diffraction: Option<RawDiffraction>,
    run: Option<RawRun>,
    check: Option<RawCheck>,
    oracle: Option<RawOracle>,
    pdcheck: Option<RawPdcheck>,
    almostperiods: Option<RawAlmost>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    d: usize,
    m: usize,
    basis: Vec<Vec<Num>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lo: Vec<Num>,
    hi: Vec<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWindow {
    boxes: Vec<RawBox>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    kind: String,
    lo: Option<Vec<Num>>,
    hi: Option<Vec<Num>>,
    delta: Option<Vec<Num>>,
    points: Option<Vec<Vec<Num>>>,
    weights: Option<Vec<Vec<Num>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCutoff {
    delta: Vec<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiffraction {
    threshold: Option<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<u64>,
    budget: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCheck {
    radius: Option<Num>,
    tol: Option<Num>,
    eps: Option<Num>,
    search_radius: Option<Num>,
    pairs: Option<usize>,
    coeff: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    radius: Option<Num>,
    top: Option<usize>,
    tol: Option<Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPdcheck {
    trials: Option<usize>,
    config_size: Option<usize>,
    patch: Option<RawBox>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlmost {
    eps: Option<Num>,
    a_half: Option<Num>,
    patch: Option<RawBox>,
    max_shift: Option<Num>,
    internal_tol: Option<Num>,
    profile: Option<RawProfile>,
}

/// Fully resolved configuration. Serialised verbatim into JSON metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub scheme: SchemeSection,
    pub window: Vec<BoxSection>,
    pub profile: ProfileSection,
    pub cutoff: CutoffSection,
    pub query: BoxSection,
    pub threshold: f64,
    pub seed: u64,
    pub budget: u64,
    pub check: CheckSection,
    pub oracle: OracleSection,
    pub pdcheck: PdcheckSection,
    pub almostperiods: AlmostSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeSection {
    pub d: usize,
    pub m: usize,
    /// Basis vectors (generators), each of length `d + m`.
    pub basis: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSection {
    pub fn to_box(&self) -> BoxN {
        BoxN {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileSection {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Trapezoid {
        lo: Vec<f64>,
        hi: Vec<f64>,
        delta: Vec<f64>,
    },
    Atomic {
        points: Vec<Vec<f64>>,
        weights: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffSection {
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSection {
    pub radius: f64,
    pub tol: f64,
    pub eps: f64,
    pub search_radius: f64,
    pub pairs: usize,
    pub coeff: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSection {
    pub radius: f64,
    pub top: usize,
    /// Pass tolerance on `|oracle − closed| / max |A|`.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdcheckSection {
    pub trials: usize,
    pub config_size: usize,
    pub patch: BoxSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlmostSection {
    pub eps: f64,
    pub a_half: f64,
    pub patch: BoxSection,
    pub max_shift: f64,
    pub internal_tol: f64,
    /// Weights of the scanned comb; defaults to the main profile.
    pub profile: ProfileSection,
}

fn bad(key: &str, msg: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: msg.into(),
    }
}

/// Rewrites bare integer literals as floats so that `1/2` evaluates to `0.5`.
fn floatify(expr: &str) -> String {
    let mut out = String::with_capacity(expr.len() + 8);
    let chars: Vec<char> = expr.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let starts_number = c.is_ascii_digit()
            && (i == 0 || !(chars[i - 1].is_alphanumeric() || chars[i - 1] == '_'));
        if !starts_number {
            out.push(c);
            i += 1;
            continue;
        }
        let mut j = i;
        let mut is_float = false;
        while j < chars.len() {
            let d = chars[j];
            if d.is_ascii_digit() {
                j += 1;
            } else if d == '.' {
                is_float = true;
                j += 1;
            } else if (d == 'e' || d == 'E') && j + 1 < chars.len() {
                is_float = true;
                j += 1;
                if chars[j] == '+' || chars[j] == '-' {
                    j += 1;
                }
            } else {
                break;
            }
        }
        out.extend(&chars[i..j]);
        if !is_float {
            out.push_str(".0");
        }
        i = j;
    }
    out
}

/// Evaluates a numeric expression with `golden` expanded.
pub fn eval_expr(expr: &str) -> Result<f64, String> {
    let expanded = expr.replace("golden", GOLDEN_LITERAL);
    let v = evalexpr::eval_number(&floatify(&expanded)).map_err(|e| e.to_string())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{expr}` is not finite"))
    }
}

fn num(key: &str, n: &Num) -> Result<f64, CliError> {
    let v = match n {
        Num::Int(i) => *i as f64,
        Num::Float(f) => *f,
        Num::Expr(s) => eval_expr(s).map_err(|e| bad(key, e))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(key, "value must be finite"))
    }
}

fn nums(key: &str, v: &[Num], len: usize) -> Result<Vec<f64>, CliError> {
    if v.len() != len {
        return Err(bad(key, format!("expected {len} values, got {}", v.len())));
    }
    v.iter()
        .enumerate()
        .map(|(i, n)| num(&format!("{key}[{i}]"), n))
        .collect()
}

fn opt_num(key: &str, n: Option<&Num>, default: f64) -> Result<f64, CliError> {
    n.map_or(Ok(default), |n| num(key, n))
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(bad(key, "must be positive"))
    }
}

fn boxed(key: &str, b: &RawBox, dim: usize) -> Result<BoxSection, CliError> {
    let lo = nums(&format!("{key}.lo"), &b.lo, dim)?;
    let hi = nums(&format!("{key}.hi"), &b.hi, dim)?;
    Ok(BoxSection { lo, hi })
}

fn resolve_profile(
    key: &str,
    p: Option<&RawProfile>,
    bbox: &BoxN,
    m: usize,
) -> Result<ProfileSection, CliError> {
    Ok(match p {
        None => ProfileSection::Box {
            lo: bbox.lo.clone(),
            hi: bbox.hi.clone(),
        },
        Some(p) => match p.kind.as_str() {
            "box" | "trapezoid" => {
                let lo =
                    p.lo.as_ref()
                        .map_or(Ok(bbox.lo.clone()), |v| nums(&format!("{key}.lo"), v, m))?;
                let hi =
                    p.hi.as_ref()
                        .map_or(Ok(bbox.hi.clone()), |v| nums(&format!("{key}.hi"), v, m))?;
                if p.kind == "box" {
                    if p.delta.is_some() {
                        return Err(bad(
                            &format!("{key}.delta"),
                            "only valid for kind = \"trapezoid\"",
                        ));
                    }
                    ProfileSection::Box { lo, hi }
                } else {
                    let delta = p
                        .delta
                        .as_ref()
                        .ok_or_else(|| bad(&format!("{key}.delta"), "required for a trapezoid"))?;
                    let delta = nums(&format!("{key}.delta"), delta, m)?;
                    if delta.iter().any(|x| *x < 0.0) {
                        return Err(bad(&format!("{key}.delta"), "must be non-negative"));
                    }
                    ProfileSection::Trapezoid { lo, hi, delta }
                }
            }
            "atomic" => {
                let pts = p.points.as_ref().ok_or_else(|| {
                    bad(&format!("{key}.points"), "required for an atomic profile")
                })?;
                let points = pts
                    .iter()
                    .enumerate()
                    .map(|(i, r)| nums(&format!("{key}.points[{i}]"), r, m))
                    .collect::<Result<Vec<_>, _>>()?;
                let weights = match &p.weights {
                    None => vec![[1.0, 0.0]; points.len()],
                    Some(w) => {
                        if w.len() != points.len() {
                            return Err(bad(
                                &format!("{key}.weights"),
                                "one [re, im] pair per point",
                            ));
                        }
                        w.iter()
                            .enumerate()
                            .map(|(i, r)| {
                                nums(&format!("{key}.weights[{i}]"), r, 2).map(|v| [v[0], v[1]])
                            })
                            .collect::<Result<Vec<_>, _>>()?
                    }
                };
                ProfileSection::Atomic { points, weights }
            }
            other => {
                return Err(bad(
                    &format!("{key}.kind"),
                    format!("unknown kind `{other}` (box, trapezoid, atomic)"),
                ))
            }
        },
    })
}

fn build_profile(m: usize, p: &ProfileSection) -> cutproj_core::Result<InternalProfile> {
    match p {
        ProfileSection::Box { lo, hi } => {
            InternalProfile::indicator(BoxN::new(lo.clone(), hi.clone())?)
        }
        ProfileSection::Trapezoid { lo, hi, delta } => InternalProfile::trapezoid(
            (0..lo.len())
                .map(|i| Trapezoid::new(lo[i], hi[i], delta[i]))
                .collect::<cutproj_core::Result<Vec<_>>>()?,
        ),
        ProfileSection::Atomic { points, weights } => InternalProfile::finite_atomic(
            m,
            points
                .iter()
                .zip(weights)
                .map(|(p, w)| (p.clone(), Complex64::new(w[0], w[1])))
                .collect(),
        ),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let key = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("<document>")
                .to_string();
            CliError::Config {
                key,
                message: e.to_string().trim().to_string(),
            }
        })?;
        Self::resolve(raw)
    }

    fn resolve(raw: RawConfig) -> Result<Self, CliError> {
        let RawScheme { d, m, basis } = raw.scheme;
        if d == 0 {
            return Err(bad("scheme.d", "must be at least 1"));
        }
        if m == 0 {
            return Err(bad("scheme.m", "must be at least 1"));
        }
        let n = d + m;
        if basis.len() != n {
            return Err(bad(
                "scheme.basis",
                format!("expected d + m = {n} basis vectors, got {}", basis.len()),
            ));
        }
        let basis = basis
            .iter()
            .enumerate()
            .map(|(i, r)| nums(&format!("scheme.basis[{i}]"), r, n))
            .collect::<Result<Vec<_>, _>>()?;

        if raw.window.boxes.is_empty() {
            return Err(bad("window.boxes", "at least one box is required"));
        }
        let window = raw
            .window
            .boxes
            .iter()
            .enumerate()
            .map(|(i, b)| boxed(&format!("window.boxes[{i}]"), b, m))
            .collect::<Result<Vec<_>, _>>()?;
        let bbox = Window {
            m,
            parts: window.iter().map(BoxSection::to_box).collect(),
        }
        .bounding_box();

        let profile = resolve_profile("profile", raw.profile.as_ref(), &bbox, m)?;

        let delta = match &raw.cutoff {
            None => vec![0.1; m],
            Some(c) => nums("cutoff.delta", &c.delta, m)?,
        };
        if delta.iter().any(|x| !(*x > 0.0)) {
            return Err(bad("cutoff.delta", "margins must be positive"));
        }
        let query = boxed("query", &raw.query, d)?;

        let threshold = match raw.diffraction.as_ref().and_then(|x| x.threshold.as_ref()) {
            None => 1e-3,
            Some(t) => num("diffraction.threshold", t)?,
        };
        if !(threshold > 0.0) {
            return Err(bad("diffraction.threshold", "must be positive"));
        }
        let run = raw.run.unwrap_or(RawRun {
            seed: None,
            budget: None,
        });
        let budget = run.budget.unwrap_or(DEFAULT_BUDGET);
        if budget == 0 {
            return Err(bad("run.budget", "must be positive"));
        }

        let c = raw.check.unwrap_or(RawCheck {
            radius: None,
            tol: None,
            eps: None,
            search_radius: None,
            pairs: None,
            coeff: None,
        });
        let check = CheckSection {
            radius: positive(
                "check.radius",
                opt_num("check.radius", c.radius.as_ref(), 4.0)?,
            )?,
            tol: positive("check.tol", opt_num("check.tol", c.tol.as_ref(), 1e-6)?)?,
            eps: positive("check.eps", opt_num("check.eps", c.eps.as_ref(), 0.05)?)?,
            search_radius: positive(
                "check.search_radius",
                opt_num("check.search_radius", c.search_radius.as_ref(), 200.0)?,
            )?,
            pairs: c.pairs.unwrap_or(1000),
            coeff: c.coeff.unwrap_or(20),
        };
        if check.coeff < 0 {
            return Err(bad("check.coeff", "must be non-negative"));
        }

        let o = raw.oracle.unwrap_or(RawOracle {
            radius: None,
            top: None,
            tol: None,
        });
        let oracle = OracleSection {
            radius: opt_num("oracle.radius", o.radius.as_ref(), 2000.0)?,
            top: o.top.unwrap_or(10),
            tol: positive("oracle.tol", opt_num("oracle.tol", o.tol.as_ref(), 0.03)?)?,
        };

        let default_patch = |half: f64| BoxSection {
            lo: vec![-half; d],
            hi: vec![half; d],
        };
        let p = raw.pdcheck.unwrap_or(RawPdcheck {
            trials: None,
            config_size: None,
            patch: None,
        });
        let pdcheck = PdcheckSection {
            trials: p.trials.unwrap_or(100),
            config_size: p.config_size.unwrap_or(40),
            patch: match &p.patch {
                None => default_patch(50.0),
                Some(b) => boxed("pdcheck.patch", b, d)?,
            },
        };
        if pdcheck.config_size == 0 {
            return Err(bad("pdcheck.config_size", "must be positive"));
        }

        let a = raw.almostperiods.unwrap_or(RawAlmost {
            eps: None,
            a_half: None,
            patch: None,
            max_shift: None,
            internal_tol: None,
            profile: None,
        });
        let almostperiods = AlmostSection {
            eps: opt_num("almostperiods.eps", a.eps.as_ref(), 0.1)?,
            a_half: positive(
                "almostperiods.a_half",
                opt_num("almostperiods.a_half", a.a_half.as_ref(), 0.5)?,
            )?,
            patch: match &a.patch {
                None => default_patch(100.0),
                Some(b) => boxed("almostperiods.patch", b, d)?,
            },
            max_shift: positive(
                "almostperiods.max_shift",
                opt_num("almostperiods.max_shift", a.max_shift.as_ref(), 20.0)?,
            )?,
            internal_tol: positive(
                "almostperiods.internal_tol",
                opt_num("almostperiods.internal_tol", a.internal_tol.as_ref(), 0.05)?,
            )?,
            profile: match &a.profile {
                None => profile.clone(),
                Some(p) => resolve_profile("almostperiods.profile", Some(p), &bbox, m)?,
            },
        };
        if almostperiods.eps < 0.0 {
            return Err(bad("almostperiods.eps", "must be non-negative"));
        }

        let cfg = Config {
            scheme: SchemeSection { d, m, basis },
            window,
            profile,
            cutoff: CutoffSection { delta },
            query,
            threshold,
            seed: run.seed.unwrap_or(0),
            budget,
            check,
            oracle,
            pdcheck,
            almostperiods,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field checks: the basis is regular, the profile is valid and the
    /// cutoff plateau covers the window.
    fn validate(&self) -> Result<(), CliError> {
        self.scheme()
            .map_err(|e| bad("scheme.basis", e.to_string()))?;
        self.profile().map_err(|e| bad("profile", e.to_string()))?;
        build_profile(self.scheme.m, &self.almostperiods.profile)
            .map_err(|e| bad("almostperiods.profile", e.to_string()))?;
        let cutoff = self
            .cutoff()
            .map_err(|e| bad("cutoff.delta", e.to_string()))?;
        if !cutoff.covers(&self.window()) {
            return Err(bad("cutoff", "plateau does not contain the window"));
        }
        Ok(())
    }

    pub fn scheme(&self) -> cutproj_core::Result<CutProjectScheme> {
        let lattice = Lattice::from_columns(&self.scheme.basis)?;
        CutProjectScheme::new(lattice, self.scheme.d, self.scheme.m)
    }

    pub fn window(&self) -> Window {
        Window {
            m: self.scheme.m,
            parts: self.window.iter().map(BoxSection::to_box).collect(),
        }
    }

    pub fn profile(&self) -> cutproj_core::Result<InternalProfile> {
        build_profile(self.scheme.m, &self.profile)
    }

    pub fn almost_profile(&self) -> cutproj_core::Result<InternalProfile> {
        build_profile(self.scheme.m, &self.almostperiods.profile)
    }

    /// Cutoff with plateau equal to the window's bounding box.
    pub fn cutoff(&self) -> cutproj_core::Result<Cutoff> {
        Cutoff::around(&self.window(), &self.cutoff.delta)
    }

    pub fn query(&self) -> BoxN {
        self.query.to_box()
    }
}
