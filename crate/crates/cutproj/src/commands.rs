//! Command implementations. Each returns an [`Outcome`]; writing files and
//! choosing the exit code is left to the binary.

use cutproj_core::comb::{autocorrelation_patch, eps_norm_almost_periods};
use cutproj_core::posdef::{
    dominant_offset, flip_weight_pair, lift_pd_crosscheck, ConfigPool, PdOptions,
};
use cutproj_core::spectra::{
    assemble_spectrum, closed_form_amplitude, oracle_amplitude, peak_candidates,
    DiffractionSpectrum, InternalProfile,
};
use cutproj_core::{BoxN, CutProjectScheme, LatticePointRef, WeightedComb, Window};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::Value;

use crate::config::Config;
use crate::error::{CliError, Context};
use crate::formats::{self, OracleRow, Report};

/// Result of a command: `ok` selects exit code 0 or 1.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub ok: bool,
    pub report: Report,
    pub csv: Option<String>,
    pub json: Option<Value>,
}

impl Outcome {
    fn new(ok: bool, report: Report) -> Self {
        Self {
            ok,
            report,
            csv: None,
            json: None,
        }
    }
}

/// Runs `f` on a pool of `threads` workers (0 = rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn scheme(cfg: &Config) -> Result<CutProjectScheme, CliError> {
    cfg.scheme().context("scheme")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAILED"
    }
}

pub fn check(cfg: &Config) -> Result<Outcome, CliError> {
    let cps = scheme(cfg)?;
    let c = &cfg.check;
    let inj = cps
        .verify_injectivity(c.radius, c.tol, cfg.budget)
        .context("injectivity")?;
    let reference = cfg.window().bounding_box();
    let dens = cps
        .internal_density_check(&reference, c.eps, c.search_radius, cfg.budget)
        .context("internal density")?;
    let pair = cps
        .dual_pairing_check(c.pairs, c.coeff, cfg.seed)
        .context("dual pairing")?;

    let mut r = Report::default();
    r.line("lattice density", cps.lattice().density());
    r.line(
        "injectivity",
        format!(
            "{} (radius {}, {} points checked)",
            verdict(inj.ok),
            inj.radius,
            inj.points_checked
        ),
    );
    if let Some(w) = &inj.witness {
        r.line("injectivity witness", format!("{w:?}"));
    }
    r.line(
        "internal density",
        format!(
            "{} (max gap {:e}, eps {}, {} internal points)",
            verdict(dens.ok),
            dens.max_gap,
            c.eps,
            dens.internal_points
        ),
    );
    r.line(
        "dual pairing",
        format!(
            "{} ({} pairs, max defect {:e})",
            verdict(pair.ok),
            pair.pairs,
            pair.max_defect
        ),
    );
    Ok(Outcome::new(inj.ok && dens.ok && pair.ok, r))
}

pub fn modelset(cfg: &Config) -> Result<Outcome, CliError> {
    let cps = scheme(cfg)?;
    let pts = cps
        .model_set(&cfg.window(), &cfg.query(), cfg.budget)
        .context("model set")?;
    let mut r = Report::default();
    r.line("points", pts.len());
    let mut out = Outcome::new(true, r);
    out.csv = Some(formats::modelset_csv(cps.d(), cps.m(), &pts));
    Ok(out)
}

/// Spectrum over `query`, with amplitudes evaluated on the current rayon pool.
pub fn spectrum(
    cfg: &Config,
    cps: &CutProjectScheme,
    query: &BoxN,
) -> Result<DiffractionSpectrum, CliError> {
    let h = cfg.profile().context("profile")?;
    let cutoff = cfg.cutoff().context("cutoff")?;
    let cands = peak_candidates(
        cps,
        &cfg.window(),
        &h,
        query,
        cfg.threshold,
        &cutoff,
        cfg.budget,
    )
    .context("diffraction")?;
    let scale = cands.meta.scale;
    let amps: Vec<Complex64> = cands
        .points
        .par_iter()
        .map(|p| closed_form_amplitude(scale, &h, &p.xstar))
        .collect();
    Ok(assemble_spectrum(cands, amps))
}

pub fn diffract(cfg: &Config, threads: usize) -> Result<Outcome, CliError> {
    let cps = scheme(cfg)?;
    let spec = with_threads(threads, || spectrum(cfg, &cps, &cfg.query()))??;
    let mut r = Report::default();
    r.line("candidates", spec.meta.candidates);
    r.line("peaks", spec.peaks.len());
    r.line(
        "internal radius",
        format!("{:?}", spec.meta.internal_radius),
    );
    let mut out = Outcome::new(true, r);
    out.csv = Some(formats::spectrum_csv(cps.d(), &spec));
    out.json = Some(formats::spectrum_json(cfg, &spec));
    Ok(out)
}

/// Dual-lattice point with physical part `k` and the smallest internal part
/// inside `internal`, if any.
fn locate_dual(
    dual: &CutProjectScheme,
    k: &[f64],
    internal: &BoxN,
    budget: u64,
) -> Result<Option<LatticePointRef>, CliError> {
    let q = BoxN {
        lo: k.iter().map(|v| v - 1e-9).collect(),
        hi: k.iter().map(|v| v + 1e-9).collect(),
    };
    let pts = dual
        .strip_points(&q, internal, budget)
        .context("dual lookup")?;
    let norm = |p: &LatticePointRef| p.xstar.iter().map(|v| v * v).sum::<f64>();
    Ok(pts.into_iter().min_by(|a, b| norm(a).total_cmp(&norm(b))))
}

/// Options of the `oracle` command.
#[derive(Debug, Clone, Default)]
pub struct OracleArgs {
    /// Explicit physical wave vectors; empty means the strongest peaks.
    pub k: Vec<Vec<f64>>,
    pub radius: Option<f64>,
    pub top: Option<usize>,
    pub threads: usize,
}

pub fn oracle(cfg: &Config, args: &OracleArgs) -> Result<Outcome, CliError> {
    let cps = scheme(cfg)?;
    let d = cps.d();
    let radius = args.radius.unwrap_or(cfg.oracle.radius);
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CliError::Usage(format!(
            "oracle radius must be positive, got {radius}"
        )));
    }
    let top = args.top.unwrap_or(cfg.oracle.top);
    let h = cfg.profile().context("profile")?;
    let w = cfg.window();
    let budget = cfg.budget;

    let rows = with_threads(args.threads, || -> Result<Vec<OracleRow>, CliError> {
        let spec = spectrum(cfg, &cps, &cfg.query())?;
        let max_amp = spec
            .peaks
            .iter()
            .map(|p| p.amplitude.norm())
            .fold(0.0, f64::max);
        let targets: Vec<(Vec<f64>, Complex64)> = if args.k.is_empty() {
            let mut peaks = spec.peaks.clone();
            // strongest first; the sort is stable so ties keep the k order
            peaks.sort_by(|a, b| b.amplitude.norm().total_cmp(&a.amplitude.norm()));
            peaks
                .into_iter()
                .take(top)
                .map(|p| (p.k, p.amplitude))
                .collect()
        } else {
            let dual = cps.dual_cps().context("dual scheme")?;
            let r = &spec.meta.internal_radius;
            let internal = BoxN {
                lo: r.iter().map(|v| -v).collect(),
                hi: r.clone(),
            };
            args.k
                .iter()
                .map(|k| {
                    if k.len() != d {
                        return Err(CliError::Usage(format!(
                            "--k needs {d} components, got {}",
                            k.len()
                        )));
                    }
                    let closed = locate_dual(&dual, k, &internal, budget)?
                        .map_or(Complex64::new(0.0, 0.0), |p| {
                            closed_form_amplitude(spec.meta.scale, &h, &p.xstar)
                        });
                    Ok((k.clone(), closed))
                })
                .collect::<Result<_, _>>()?
        };
        let reference = targets
            .iter()
            .map(|(_, a)| a.norm())
            .fold(max_amp, f64::max);
        targets
            .par_iter()
            .map(|(k, closed)| {
                let oracle = oracle_amplitude(&cps, &w, &h, k, radius, budget).context("oracle")?;
                let diff = (oracle - closed).norm();
                let rel = if reference > 0.0 {
                    diff / reference
                } else {
                    diff
                };
                Ok(OracleRow {
                    k: k.clone(),
                    oracle,
                    closed: *closed,
                    rel,
                })
            })
            .collect()
    })??;

    let worst = rows.iter().map(|r| r.rel).fold(0.0, f64::max);
    let ok = worst <= cfg.oracle.tol;
    let mut r = Report::default();
    r.line("rows", rows.len());
    r.line("patch radius", radius);
    r.line(
        "max rel diff",
        format!("{worst:e} (tol {}) {}", cfg.oracle.tol, verdict(ok)),
    );
    let mut out = Outcome::new(ok, r);
    out.csv = Some(formats::oracle_csv(d, &rows));
    Ok(out)
}

/// Weighted model-set patch `Σ h(x*) δ_x` over `region`.
fn weighted_patch(
    cfg: &Config,
    cps: &CutProjectScheme,
    h: &InternalProfile,
    region: &BoxN,
) -> Result<(Vec<LatticePointRef>, WeightedComb), CliError> {
    let pts = cps
        .model_set(&cfg.window(), region, cfg.budget)
        .context("model set")?;
    let comb = WeightedComb::from_points(cps.d(), &pts, |p| h.value(&p.xstar));
    Ok((pts, comb))
}

#[derive(Debug, Clone, Default)]
pub struct PdArgs {
    pub trials: Option<usize>,
    pub corrupt: bool,
    /// Use this comb instead of the patch autocorrelation.
    pub comb: Option<WeightedComb>,
}

pub fn pdcheck(cfg: &Config, args: &PdArgs) -> Result<Outcome, CliError> {
    let cps = scheme(cfg)?;
    let patch = cfg.pdcheck.patch.to_box();
    let h = cfg.profile().context("profile")?;
    let (pts, comb) = weighted_patch(cfg, &cps, &h, &patch)?;
    let mut gamma = match &args.comb {
        Some(c) => c.clone(),
        None => autocorrelation_patch(&comb, &patch).context("autocorrelation")?,
    };
    let mut r = Report::default();
    if args.corrupt {
        let t = dominant_offset(&gamma)
            .ok_or_else(|| CliError::Usage("comb has no nonzero offset to corrupt".into()))?;
        gamma = flip_weight_pair(&gamma, &t).context("corrupt")?;
        r.line("corrupted offset", format!("{t:?}"));
    }
    let w = cfg.window();
    let diff = w.difference(&w);
    let pool = match &args.comb {
        Some(_) => ConfigPool::Support,
        None => ConfigPool::Points(pts),
    };
    let opts = PdOptions {
        trials: args.trials.unwrap_or(cfg.pdcheck.trials),
        config_size: cfg.pdcheck.config_size,
        seed: cfg.seed,
        pool,
    };
    let rep = lift_pd_crosscheck(&cps, &gamma, &diff, &opts).context("pd cross-check")?;
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let state = match (rep.down_ok, rep.up_ok) {
        (true, true) => "both-ok",
        (false, false) => "both-fail",
        _ => "disagree",
    };
    r.line("atoms", gamma.len());
    r.line("trials", rep.min_eig_down.len());
    r.line("seed", rep.seed);
    r.line("min eigenvalue down", min(&rep.min_eig_down));
    r.line("min eigenvalue up", min(&rep.min_eig_up));
    r.line("entrywise equal", rep.entrywise_equal);
    r.line("verdict", state);

    let mut csv = String::from("trial,min_eig_down,min_eig_up\n");
    for (i, (a, b)) in rep.min_eig_down.iter().zip(&rep.min_eig_up).enumerate() {
        csv.push_str(&format!("{i},{a},{b}\n"));
    }
    let mut out = Outcome::new(rep.down_ok && rep.up_ok && rep.entrywise_equal, r);
    out.csv = Some(csv);
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct AlmostArgs {
    pub eps: Option<f64>,
    pub comb: Option<WeightedComb>,
}

/// Translations `t ∈ Λ(cube(internal_tol))` with `‖t‖∞ ≤ max_shift`.
pub fn difference_candidates(
    cps: &CutProjectScheme,
    internal_tol: f64,
    max_shift: f64,
    budget: u64,
) -> Result<Vec<Vec<f64>>, CliError> {
    let small = Window::from_box(BoxN::cube(cps.m(), internal_tol));
    let pts = cps
        .model_set(&small, &BoxN::cube(cps.d(), max_shift), budget)
        .context("candidates")?;
    Ok(pts.into_iter().map(|p| p.x).collect())
}

pub fn almostperiods(cfg: &Config, args: &AlmostArgs) -> Result<Outcome, CliError> {
    let cps = scheme(cfg)?;
    let a = &cfg.almostperiods;
    let eps = args.eps.unwrap_or(a.eps);
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(CliError::Usage(format!(
            "eps must be non-negative, got {eps}"
        )));
    }
    let comb = match &args.comb {
        Some(c) => c.clone(),
        None => {
            weighted_patch(
                cfg,
                &cps,
                &cfg.almost_profile().context("almostperiods.profile")?,
                &a.patch.to_box(),
            )?
            .1
        }
    };
    let cands = difference_candidates(&cps, a.internal_tol, a.max_shift, cfg.budget)?;
    let rep = eps_norm_almost_periods(&comb, &BoxN::cube(cps.d(), a.a_half), eps, &cands)
        .context("almost periods")?;

    let mut r = Report::default();
    r.line("candidates", cands.len());
    r.line("evaluated", rep.evaluated.len());
    r.line("skipped", rep.skipped.len());
    r.line("accepted", rep.accepted.len());
    r.line(
        "max gap",
        rep.max_gap.map_or("none".to_string(), |g| g.to_string()),
    );
    let rows: Vec<(Vec<f64>, f64, bool)> = rep
        .evaluated
        .iter()
        .map(|p| (p.t.clone(), p.norm, p.norm <= eps))
        .collect();
    let mut out = Outcome::new(true, r);
    out.csv = Some(formats::almost_period_csv(cps.d(), &rows));
    Ok(out)
}
