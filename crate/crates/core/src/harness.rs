//! Theorem-level sweeps: Poincare stability, the coordinate variant, LSI
//! stability, the Herbst concentration pipeline, the tail corollary, and
//! rate-exponent fits, with JSON/CSV report emission.

use crate::error::{Error, Result};
use crate::functionals::{self, GridFunction};
use crate::measure::{
    build_grid_measure, Interval, LogConcaveMeasure1D, PotentialFamily, ProductMeasure,
    TOL_CONVEXITY,
};
use crate::spectral::{self, near_optimal_family_axes};
use crate::transport;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

pub const CSV_SCHEMA: &str = "be-stability-lab v1";

/// A one-parameter family of 1D measures.
pub struct MeasureFamily {
    pub name: String,
    pub params: Vec<f64>,
    pub convex: bool,
    build: Box<dyn Fn(f64, usize) -> Result<LogConcaveMeasure1D> + Send + Sync>,
}

impl MeasureFamily {
    pub fn new(
        name: &str,
        params: Vec<f64>,
        convex: bool,
        build: impl Fn(f64, usize) -> Result<LogConcaveMeasure1D> + Send + Sync + 'static,
    ) -> Self {
        MeasureFamily { name: name.into(), params, convex, build: Box::new(build) }
    }

    /// Construct one member; convex families are verified against their
    /// uniform-convexity flag.
    pub fn member(&self, param: f64, n_points: usize) -> Result<LogConcaveMeasure1D> {
        let m = (self.build)(param, n_points)?;
        if self.convex && m.convexity_margin < -TOL_CONVEXITY {
            return Err(Error::Precondition(format!(
                "family {} flagged convex but margin = {:.3e} at param {param}",
                self.name, m.convexity_margin
            )));
        }
        Ok(m)
    }

    /// N(0, 1 - delta)
    pub fn gaussian_scaled(params: Vec<f64>) -> Self {
        Self::new("gaussian-scaled", params, true, |delta, n| {
            LogConcaveMeasure1D::from_family(PotentialFamily::Gaussian { variance: 1.0 - delta }, n)
        })
    }

    /// V = x^2/2 + delta x^4
    pub fn quartic(params: Vec<f64>) -> Self {
        Self::new("quartic", params, true, |delta, n| {
            LogConcaveMeasure1D::from_family(PotentialFamily::Quartic { delta }, n)
        })
    }

    /// V = x^2/2 + c x
    pub fn tilted(params: Vec<f64>) -> Self {
        Self::new("tilted", params, true, |c, n| {
            LogConcaveMeasure1D::from_family(PotentialFamily::Tilted { lambda: c }, n)
        })
    }

    /// Symmetric bimodal mixture (non-convex), rescaled by bisection so
    /// that the realized C_P is 1; the parameter is the mode location a.
    pub fn bimodal_rescaled(params: Vec<f64>, s: f64) -> Self {
        Self::new("bimodal-rescaled", params, false, move |a, n| {
            let base = LogConcaveMeasure1D::from_family(PotentialFamily::Mixture { a, s }, n)?;
            // C_P(scaled by c) grows monotonically in c; bracket and bisect
            let cp = |c: f64| -> Result<f64> {
                Ok(spectral::poincare_spectrum(&base.scaled(c)?, 1)?.poincare_constant)
            };
            let (mut lo, mut hi) = (0.05, 20.0);
            if (cp(lo)? - 1.0) * (cp(hi)? - 1.0) > 0.0 {
                return Err(Error::SolverFailure(
                    "C_P = 1 not bracketed by scales in [0.05, 20]".into(),
                ));
            }
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if cp(mid)? < 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            base.scaled(0.5 * (lo + hi))
        })
    }
}

/// Least-squares fit of log W1 against log eps.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// 1.96 standard errors of the slope
    pub ci_halfwidth: f64,
    pub n_rows: usize,
}

/// Slope of log w1 vs log eps over (eps, w1) rows.
pub fn fit_rate_exponent(rows: &[(f64, f64)]) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(e, w)| *e > 0.0 && *w > 0.0)
        .map(|&(e, w)| (e.ln(), w.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Precondition(format!(
            "need >= 4 positive rows for a rate fit, got {}",
            pts.len()
        )));
    }
    let span = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max)
        - pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    if span < std::f64::consts::LN_10 {
        return Err(Error::Precondition(format!(
            "eps range spans {:.2} decades, need >= 1",
            span / std::f64::consts::LN_10
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    let dof = (pts.len() as f64 - 2.0).max(1.0);
    let se = (ss_res / dof / sxx).sqrt();
    Ok(RateFit { slope, intercept, ci_halfwidth: 1.96 * se, n_rows: pts.len() })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub param: f64,
    pub tilt_p: Option<f64>,
    pub eps: f64,
    pub w1: f64,
    pub bound: f64,
    pub slack: f64,
    pub sigma_angle: f64,
    pub barycenter: f64,
    pub ratio: Option<f64>,
    pub gate_regime: bool,
    pub skipped: bool,
    pub note: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub experiment: String,
    pub family: String,
    pub k: usize,
    pub rows: Vec<StabilityRow>,
    pub exponent: Option<RateFit>,
    pub config: BTreeMap<String, String>,
    pub pass: bool,
}

impl StabilityReport {
    /// JSON with sorted keys (field order is normalized through a Value).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&serde_json::to_value(self)?)?)
    }

    pub fn write_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "# {CSV_SCHEMA}")?;
        writeln!(out, "family,param,eps,w1,bound,slack,sigma_angle,exponent")?;
        let exp = self
            .exponent
            .map(|f| format!("{:.6}", f.slope))
            .unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.6},{}",
                self.family, r.param, r.eps, r.w1, r.bound, r.slack, r.sigma_angle, exp
            )?;
        }
        Ok(())
    }
}

/// Options shared by the sweep drivers.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub n_points: usize,
    pub seed: u64,
    /// acceptance window for the near-optimal eigenvalue search
    pub eps_target: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { n_points: 1201, seed: 0, eps_target: 1.0 }
    }
}

fn config_block(family: &MeasureFamily, opts: &SweepOptions, extra: &[(&str, String)]) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    c.insert("family".into(), family.name.clone());
    c.insert(
        "params".into(),
        family.params.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
    );
    c.insert("n_points".into(), opts.n_points.to_string());
    c.insert("seed".into(), opts.seed.to_string());
    c.insert("eps_target".into(), opts.eps_target.to_string());
    for (k, v) in extra {
        c.insert((*k).into(), v.clone());
    }
    c
}

/// Shifted standard Gaussian gamma_b on a generous symmetric window.
fn gaussian_at(b: f64, n_points: usize) -> Result<LogConcaveMeasure1D> {
    build_grid_measure(
        |x| 0.5 * (x - b) * (x - b),
        Interval::new(b - 8.0, b + 8.0, n_points)?,
    )
}

/// Gaussian-split stability sweep: for each parameter, realize eps via the near-optimal
/// family and compare W1 to the Gaussian split against 26 k^{3/2} sqrt(eps).
///
/// `dim` = 1 pits the measure against gamma_b directly; `dim` = 2 tensors
/// the member with a standard Gaussian factor and runs the full split
/// search. `axes` picks the factor axes carrying the near-optimal
/// directions (k = axes.len()).
pub fn run_poincare_stability(
    family: &MeasureFamily,
    dim: usize,
    axes: &[usize],
    opts: &SweepOptions,
) -> Result<StabilityReport> {
    if !(1..=2).contains(&dim) || axes.iter().any(|&a| a >= dim) {
        return Err(Error::Precondition(format!("dim {dim} / axes {axes:?} unsupported")));
    }
    let k = axes.len();
    let kf = k as f64;
    let rows: Vec<StabilityRow> = family
        .params
        .par_iter()
        .map(|&param| -> Result<StabilityRow> {
            let m1 = family.member(param, opts.n_points)?;
            let product = if dim == 1 {
                ProductMeasure::product(vec![m1])?
            } else {
                ProductMeasure::product(vec![
                    m1,
                    LogConcaveMeasure1D::standard_gaussian(opts.n_points, 8.0),
                ])?
            };
            let (eps, gate_note) = match near_optimal_family_axes(&product, axes, opts.eps_target) {
                Ok((_, eps)) => (eps, None),
                Err(Error::SpectrumGap(msg)) => {
                    return Ok(StabilityRow {
                        param,
                        tilt_p: None,
                        eps: f64::NAN,
                        w1: f64::NAN,
                        bound: f64::NAN,
                        slack: f64::NAN,
                        sigma_angle: f64::NAN,
                        barycenter: f64::NAN,
                        ratio: None,
                        gate_regime: false,
                        skipped: true,
                        note: Some(msg),
                        pass: true,
                    })
                }
                Err(e) => return Err(e),
            };
            let (split, w1) = transport::best_split_search(&product)?;
            let bound = 26.0 * kf.powf(1.5) * eps.sqrt();
            let slack = bound + 5e-3 - w1;
            Ok(StabilityRow {
                param,
                tilt_p: None,
                eps,
                w1,
                bound,
                slack,
                sigma_angle: if dim == 2 { split.angle() } else { 0.0 },
                barycenter: split.barycenter,
                ratio: None,
                gate_regime: eps >= 1.0 / (18.0 * kf).powi(2),
                skipped: false,
                note: gate_note,
                pass: slack >= 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit_rows: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.skipped && r.eps > 0.0 && r.eps <= 0.05)
        .map(|r| (r.eps, r.w1))
        .collect();
    let exponent = fit_rate_exponent(&fit_rows).ok();
    let pass = rows.iter().all(|r| r.pass);
    Ok(StabilityReport {
        experiment: "poincare-stability".into(),
        family: family.name.clone(),
        k,
        rows,
        exponent,
        config: config_block(family, opts, &[("dim", dim.to_string()), ("axes", format!("{axes:?}"))]),
        pass,
    })
}

/// Coordinate-variant sweep (1D, k = 1): requires C_P <= 1 but not convexity;
/// eps = 1/Var - 1 and the certificate is W1 <= sqrt(pi eps).
pub fn run_coordinate_variant(family: &MeasureFamily, opts: &SweepOptions) -> Result<StabilityReport> {
    let rows: Vec<StabilityRow> = family
        .params
        .par_iter()
        .map(|&param| -> Result<StabilityRow> {
            let m = family.member(param, opts.n_points)?;
            let spec = spectral::poincare_spectrum(&m, 1)?;
            if spec.poincare_constant > 1.0 + 5e-3 {
                return Ok(StabilityRow {
                    param,
                    tilt_p: None,
                    eps: f64::NAN,
                    w1: f64::NAN,
                    bound: f64::NAN,
                    slack: f64::NAN,
                    sigma_angle: 0.0,
                    barycenter: f64::NAN,
                    ratio: None,
                    gate_regime: false,
                    skipped: true,
                    note: Some(format!(
                        "C_P = {:.4} > 1: hypothesis fails, family member rejected",
                        spec.poincare_constant
                    )),
                    pass: true,
                });
            }
            let var = m.variance();
            let eps = (1.0 / var - 1.0).max(0.0);
            let b = m.barycenter();
            let w1 = transport::w1_1d(&m, &gaussian_at(b, opts.n_points.max(2001))?)?;
            let bound = (std::f64::consts::PI * eps).sqrt();
            let slack = bound + 5e-3 - w1;
            Ok(StabilityRow {
                param,
                tilt_p: None,
                eps,
                w1,
                bound,
                slack,
                sigma_angle: 0.0,
                barycenter: b,
                ratio: None,
                gate_regime: false,
                skipped: false,
                note: None,
                pass: slack >= 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = rows.iter().all(|r| r.pass);
    Ok(StabilityReport {
        experiment: "coordinate-variant".into(),
        family: family.name.clone(),
        k: 1,
        rows,
        exponent: None,
        config: config_block(family, opts, &[]),
        pass,
    })
}

/// LSI stability sweep: exponential tilts e^{py/2} as LSI near-minimizers;
/// records the ratio W1 sqrt(int |grad u|^2) / sqrt(eps) and asserts sweep
/// boundedness rather than a (non-explicit) constant.
pub fn run_lsi_stability(
    family: &MeasureFamily,
    tilt_p_grid: &[f64],
    opts: &SweepOptions,
) -> Result<StabilityReport> {
    let cases: Vec<(f64, f64)> = family
        .params
        .iter()
        .flat_map(|&d| tilt_p_grid.iter().map(move |&p| (d, p)))
        .collect();
    let rows: Vec<StabilityRow> = cases
        .par_iter()
        .map(|&(param, p)| -> Result<StabilityRow> {
            let m = family.member(param, opts.n_points)?;
            let u = functionals::exponential_tilt(&m, p)?;
            let eps = functionals::lsi_deficit(&u, &m)?.relative;
            let b = m.barycenter();
            let w1 = transport::w1_1d(&m, &gaussian_at(b, opts.n_points.max(2001))?)?;
            if eps <= 1e-10 && w1 > 5e-3 {
                return Err(Error::Inconsistency(format!(
                    "eps = {eps:.2e} but W1 = {w1:.4}: an exact LSI optimizer must split exactly"
                )));
            }
            let energy = functionals::dirichlet_energy(&u, &m);
            let ratio = if eps > 1e-10 { Some(w1 * energy.sqrt() / eps.sqrt()) } else { None };
            Ok(StabilityRow {
                param,
                tilt_p: Some(p),
                eps,
                w1,
                bound: f64::NAN,
                slack: f64::NAN,
                sigma_angle: 0.0,
                barycenter: b,
                ratio,
                gate_regime: false,
                skipped: false,
                note: None,
                pass: ratio.map_or(true, f64::is_finite),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let mut pass = rows.iter().all(|r| r.pass);
    let mut config_extra = Vec::new();
    if !ratios.is_empty() {
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        pass = pass && max / min <= 10.0 && max <= 10.0 * median;
        config_extra.push(("ratio_max_over_min", format!("{:.6}", max / min)));
        config_extra.push(("ratio_median", format!("{median:.6}")));
    }
    Ok(StabilityReport {
        experiment: "lsi-stability".into(),
        family: family.name.clone(),
        k: 1,
        rows,
        exponent: None,
        config: config_block(
            family,
            opts,
            &config_extra
                .iter()
                .map(|(k, v)| (*k, v.clone()))
                .chain(std::iter::once((
                    "tilt_p_grid",
                    tilt_p_grid.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
                )))
                .collect::<Vec<_>>(),
        ),
        pass,
    })
}

/// The Herbst pipeline for one Lipschitz F.
#[derive(Debug, Clone, Serialize)]
pub struct HerbstReport {
    pub l: f64,
    /// eps solving int e^F dmu = exp(int F dmu + L^2/2 (1 - eps/2))
    pub eps: f64,
    pub lambda0: f64,
    /// lambda0 H'(lambda0) - H(lambda0) - (1 - eps) lambda0^2 L^2 / 2
    pub lambda0_criterion: f64,
    /// Ent(e^{l0 F}) - 2 (1 - eps) int |grad e^{l0 F/2}|^2 dmu
    pub almost_lsi_slack: f64,
    /// min grid increment of lambda L^2/2 - H(lambda)/lambda
    pub monotonicity_min_step: f64,
    /// int e^{l0 F} dmu - e^{L^2/8}
    pub mgf_lower_slack: f64,
    pub w1: f64,
    pub ratio: Option<f64>,
    pub pass: bool,
}

impl HerbstReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&serde_json::to_value(self)?)?)
    }
}

const HERBST_GRID: usize = 512;

/// Herbst concentration pipeline: H(lambda) on a 512-point grid, the realized eps,
/// a lambda0 in [1/2, 1] witnessing the Markov-inequality step, and the
/// proof's chain inequalities, ending in the W1 estimate for the tilt
/// u = e^{lambda0 F / 2}.
pub fn run_herbst(f: &GridFunction, m: &LogConcaveMeasure1D, l: f64) -> Result<HerbstReport> {
    let lip = f.lipschitz_constant();
    if lip > l + 1e-9 {
        return Err(Error::Precondition(format!("||F||_Lip = {lip:.4} exceeds L = {l}")));
    }
    let fc = functionals::center(f, m); // the proof takes int F dmu = 0
    let on = |vals: Vec<f64>| GridFunction { grid: f.grid, values: vals };
    let mgf = |lam: f64| -> f64 {
        functionals::integrate(&on(fc.values.iter().map(|&v| (lam * v).exp()).collect()), m)
    };
    let mgf_f = |lam: f64| -> f64 {
        functionals::integrate(
            &on(fc.values.iter().map(|&v| v * (lam * v).exp()).collect()),
            m,
        )
    };
    let h_at = |lam: f64| mgf(lam).ln();
    let hgrid: Vec<f64> = (1..=HERBST_GRID)
        .map(|i| i as f64 / HERBST_GRID as f64)
        .collect();
    let hvals: Vec<f64> = hgrid.iter().map(|&lam| h_at(lam)).collect();
    let eps = (2.0 * (1.0 - 2.0 * hvals[HERBST_GRID - 1] / (l * l))).max(0.0);

    // lambda0 in [1/2, 1] maximizing the Markov-step criterion; H' computed
    // exactly as the tilted mean of F
    let mut lambda0 = 0.5;
    let mut crit_max = f64::NEG_INFINITY;
    for (&lam, &h) in hgrid.iter().zip(&hvals) {
        if lam < 0.5 {
            continue;
        }
        let hp = mgf_f(lam) / mgf(lam);
        let crit = lam * hp - h - (1.0 - eps) * lam * lam * l * l / 2.0;
        if crit > crit_max {
            crit_max = crit;
            lambda0 = lam;
        }
    }
    if eps < 1.0 && crit_max < -1e-9 {
        return Err(Error::SolverFailure(format!(
            "no lambda0 in [1/2, 1] satisfies the Markov step (max criterion {crit_max:.3e}, eps {eps:.4}); H(1) = {:.6}",
            hvals[HERBST_GRID - 1]
        )));
    }

    // chain inequalities
    let g = on(fc.values.iter().map(|&v| (lambda0 * v).exp()).collect());
    let ent = functionals::entropy(&g, m)?;
    let u_raw = on(fc.values.iter().map(|&v| (0.5 * lambda0 * v).exp()).collect());
    let energy_raw = functionals::dirichlet_energy(&u_raw, m);
    let almost_lsi_slack = ent - 2.0 * (1.0 - eps) * energy_raw;
    let mono: Vec<f64> = hgrid
        .iter()
        .zip(&hvals)
        .map(|(&lam, &h)| lam * l * l / 2.0 - h / lam)
        .collect();
    let monotonicity_min_step = mono.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mgf_lower_slack = mgf(lambda0) - (l * l / 8.0).exp();

    // the W1 estimate of the LSI theorem applied to the normalized tilt
    let u = functionals::normalize_l2(&u_raw, m)?;
    let b = m.barycenter();
    let w1 = transport::w1_1d(m, &gaussian_at(b, m.n_points().max(2001))?)?;
    let energy = functionals::dirichlet_energy(&u, m);
    let ratio = if eps > 1e-10 { Some(w1 * energy.sqrt() / eps.sqrt()) } else { None };
    let pass = almost_lsi_slack >= -1e-6
        && monotonicity_min_step >= -1e-8
        && mgf_lower_slack >= -1e-6
        && (eps >= 1.0 || crit_max >= -1e-9);
    Ok(HerbstReport {
        l,
        eps,
        lambda0,
        lambda0_criterion: crit_max,
        almost_lsi_slack,
        monotonicity_min_step,
        mgf_lower_slack,
        w1,
        ratio,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub t: f64,
    pub tail_probability: f64,
    pub eps: f64,
    /// true when the derived eps leaves the regime where the W1 certificate
    /// beats the trivial bound 2 (the corollary's own caveat)
    pub vacuous: bool,
    pub herbst: HerbstReport,
}

impl TailReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&serde_json::to_value(self)?)?)
    }
}

/// mu({F >= thr}) by trapezoid quadrature with linear crossing
/// interpolation inside straddling cells.
fn tail_probability(f: &GridFunction, m: &LogConcaveMeasure1D, thr: f64) -> f64 {
    let n = m.n_points();
    let h = m.grid.spacing();
    let mut q = 0.0;
    for i in 0..n - 1 {
        let (f0, f1) = (f.values[i], f.values[i + 1]);
        let (d0, d1) = (m.density_at(m.grid.node(i)), m.density_at(m.grid.node(i + 1)));
        let cell = 0.5 * h * (d0 + d1);
        if f0 >= thr && f1 >= thr {
            q += cell;
        } else if f0 < thr && f1 < thr {
            // nothing
        } else {
            // crossing at fraction s of the cell
            let s = ((thr - f0) / (f1 - f0)).clamp(0.0, 1.0);
            let dc = d0 + s * (d1 - d0);
            if f1 >= thr {
                q += 0.5 * (1.0 - s) * h * (dc + d1);
            } else {
                q += 0.5 * s * h * (d0 + dc);
            }
        }
    }
    q
}

/// Tail corollary: extract eps from the deviation probability at level t
/// and drive the Herbst pipeline with t F.
pub fn run_tail_corollary(f: &GridFunction, m: &LogConcaveMeasure1D, t: f64) -> Result<TailReport> {
    let lip = f.lipschitz_constant();
    if lip > 1.0 + 1e-9 {
        return Err(Error::Precondition(format!("||F||_Lip = {lip:.4} > 1")));
    }
    if t <= 0.0 {
        return Err(Error::Precondition(format!("need t > 0, got {t}")));
    }
    let mean = functionals::integrate(f, m);
    let q = tail_probability(f, m, t + mean);
    if q <= 0.0 {
        return Err(Error::Degenerate(format!(
            "tail probability at t = {t} vanishes at quadrature precision"
        )));
    }
    let eps = (2.0 * (-2.0 * q.ln() / (t * t) - 1.0)).max(0.0);
    let herbst = run_herbst(&f.scale(t), m, t * 1.0)?;
    Ok(TailReport {
        t,
        tail_probability: q,
        eps,
        vacuous: eps > 0.5,
        herbst,
    })
}
