//! Monotone transport maps, Wasserstein distances, contraction checks, and
//! the best-Gaussian-split search.

pub mod flow;

pub use flow::{w1_discrete, Atom, TransportPlan};

use crate::error::{Error, Result};
use crate::functionals::GridFunction;
use crate::measure::{GaussianSplit, Interval, LogConcaveMeasure1D, ProductMeasure};
use rayon::prelude::*;
use serde::Serialize;

/// Resolution of the fine grids used for CDF work in the 1D routines.
const FINE_N: usize = 8193;

/// Monotone piecewise-linear map T with T# source = target.
#[derive(Debug, Clone)]
pub struct MonotoneMap1D {
    /// T(x) at the source grid nodes.
    pub map: GridFunction,
    /// Central-difference estimate of T'(x).
    pub derivative: GridFunction,
    /// max_i |F_target(T(x_i)) - F_source(x_i)|
    pub pushforward_residual: f64,
    /// Node range [lo, hi] on which the source CDF is resolvable
    /// (quantiles in [1e-9, 1 - 1e-9]); outside it the inverted CDF is
    /// saturated and derivatives are numerical noise.
    pub trusted: (usize, usize),
}

impl MonotoneMap1D {
    pub fn eval(&self, x: f64) -> f64 {
        self.map.eval(x)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContractionReport {
    pub max_derivative: f64,
    pub pass: bool,
}

/// A grid covering the union of both supports.
fn union_grid(a: &LogConcaveMeasure1D, b: &LogConcaveMeasure1D, n: usize) -> Result<Interval> {
    Interval::new(a.grid.lo.min(b.grid.lo), a.grid.hi.max(b.grid.hi), n)
}

/// Cumulative trapezoid CDF of `m` at the nodes of `grid`, normalized so the
/// last entry is exactly 1.
fn cdf_on(m: &LogConcaveMeasure1D, grid: Interval) -> Vec<f64> {
    let h = grid.spacing();
    let dens: Vec<f64> = grid.nodes().map(|x| m.density_at(x)).collect();
    let mut cdf = vec![0.0; dens.len()];
    for i in 1..dens.len() {
        cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i - 1] + dens[i]);
    }
    let total = cdf[dens.len() - 1];
    if total > 0.0 {
        for c in cdf.iter_mut() {
            *c /= total;
        }
    }
    cdf
}

/// Invert a monotone CDF tabulated on `grid` at level `q` by linear
/// interpolation; `hint` is a running lower bound on the bracket index for
/// monotone query sequences.
fn invert_cdf(grid: Interval, cdf: &[f64], q: f64, hint: &mut usize) -> f64 {
    let n = cdf.len();
    let q = q.clamp(0.0, 1.0);
    let mut i = (*hint).min(n - 2);
    if cdf[i] > q {
        i = 0;
    }
    while i + 2 < n && cdf[i + 1] < q {
        i += 1;
    }
    *hint = i;
    let (c0, c1) = (cdf[i], cdf[i + 1]);
    if c1 <= c0 {
        return grid.node(i);
    }
    let frac = ((q - c0) / (c1 - c0)).clamp(0.0, 1.0);
    grid.node(i) + frac * grid.spacing()
}

fn interp_at(grid: Interval, values: &[f64], x: f64) -> f64 {
    let n = values.len();
    if x <= grid.lo {
        return values[0];
    }
    if x >= grid.hi {
        return values[n - 1];
    }
    let t = (x - grid.lo) / grid.spacing();
    let i = (t.floor() as usize).min(n - 2);
    let frac = t - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// The monotone map T = F_target^{-1} o F_source on the source grid.
pub fn quantile_map(source: &LogConcaveMeasure1D, target: &LogConcaveMeasure1D) -> Result<MonotoneMap1D> {
    let sg = Interval::new(source.grid.lo, source.grid.hi, FINE_N)?;
    let tg = Interval::new(target.grid.lo, target.grid.hi, FINE_N)?;
    let fs = cdf_on(source, sg);
    let ft = cdf_on(target, tg);
    let mut hint = 0usize;
    let mut tvals = Vec::with_capacity(source.n_points());
    let mut trusted = (source.n_points(), 0usize);
    for (i, x) in source.grid.nodes().enumerate() {
        let q = interp_at(sg, &fs, x);
        if q >= 1e-9 && q <= 1.0 - 1e-9 {
            trusted.0 = trusted.0.min(i);
            trusted.1 = trusted.1.max(i);
        }
        tvals.push(invert_cdf(tg, &ft, q, &mut hint));
    }
    if trusted.0 >= trusted.1 {
        return Err(Error::Degenerate("source CDF resolvable nowhere on the grid".into()));
    }
    // monotonicity of the construction (strictly positive densities make the
    // CDFs strictly increasing, so a flat stretch can only come from an
    // unnormalizable target)
    for w in tvals.windows(2) {
        if w[1] - w[0] < -1e-10 {
            return Err(Error::Inconsistency(format!(
                "quantile map not monotone: step {} -> {}",
                w[0], w[1]
            )));
        }
    }
    let map = GridFunction { grid: source.grid, values: tvals };
    let derivative = crate::functionals::gradient(&map);
    let residual = source
        .grid
        .nodes()
        .map(|x| (interp_at(tg, &ft, map.eval(x)) - interp_at(sg, &fs, x)).abs())
        .fold(0.0, f64::max);
    if residual > 1e-6 {
        return Err(Error::Inconsistency(format!(
            "pushforward residual {residual:.3e} exceeds 1e-6"
        )));
    }
    Ok(MonotoneMap1D { map, derivative, pushforward_residual: residual, trusted })
}

/// Largest derivative of the map over the trusted quantile window; the
/// Caffarelli contraction holds iff this is <= 1 (up to discretization
/// slack).
pub fn contraction_check(t: &MonotoneMap1D) -> ContractionReport {
    let n = t.derivative.values.len();
    let lo = t.trusted.0.max(1);
    let hi = t.trusted.1.min(n - 2);
    let max_derivative = t.derivative.values[lo..=hi]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    ContractionReport { max_derivative, pass: max_derivative <= 1.0 + 1e-6 }
}

/// W1(a, b) = int |F_a - F_b| dx on a shared fine grid.
pub fn w1_1d(a: &LogConcaveMeasure1D, b: &LogConcaveMeasure1D) -> Result<f64> {
    let g = union_grid(a, b, FINE_N)?;
    let fa = cdf_on(a, g);
    let fb = cdf_on(b, g);
    let h = g.spacing();
    let mut s = 0.0;
    for i in 0..FINE_N {
        let trap = if i == 0 || i == FINE_N - 1 { 0.5 * h } else { h };
        s += trap * (fa[i] - fb[i]).abs();
    }
    Ok(s)
}

/// W2(a, b)^2 = int_0^1 (F_a^{-1}(q) - F_b^{-1}(q))^2 dq by the midpoint
/// rule in the quantile variable; returns W2.
pub fn w2_1d(a: &LogConcaveMeasure1D, b: &LogConcaveMeasure1D) -> Result<f64> {
    let ga = Interval::new(a.grid.lo, a.grid.hi, FINE_N)?;
    let gb = Interval::new(b.grid.lo, b.grid.hi, FINE_N)?;
    let fa = cdf_on(a, ga);
    let fb = cdf_on(b, gb);
    let m = 8192;
    let (mut ha, mut hb) = (0usize, 0usize);
    let mut s = 0.0;
    for k in 0..m {
        let q = (k as f64 + 0.5) / m as f64;
        let qa = invert_cdf(ga, &fa, q, &mut ha);
        let qb = invert_cdf(gb, &fb, q, &mut hb);
        s += (qa - qb) * (qa - qb) / m as f64;
    }
    Ok(s.sqrt())
}

fn gaussian_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Corners of the factor box in ambient coordinates.
fn ambient_corners(m: &ProductMeasure) -> [[f64; 2]; 4] {
    let (f1, f2) = (&m.factors()[0], &m.factors()[1]);
    let ys = [
        [f1.grid.lo, f2.grid.lo],
        [f1.grid.lo, f2.grid.hi],
        [f1.grid.hi, f2.grid.lo],
        [f1.grid.hi, f2.grid.hi],
    ];
    let mut out = [[0.0; 2]; 4];
    for (o, y) in out.iter_mut().zip(&ys) {
        *o = match m.rotation() {
            None => *y,
            Some(r) => [
                r[0][0] * y[0] + r[0][1] * y[1],
                r[1][0] * y[0] + r[1][1] * y[1],
            ],
        };
    }
    out
}

fn frame_range(m: &ProductMeasure, dir: [f64; 2]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in ambient_corners(m) {
        let u = c[0] * dir[0] + c[1] * dir[1];
        lo = lo.min(u);
        hi = hi.max(u);
    }
    (lo, hi)
}

/// Marginal density of x . dir as a 1D measure (dir a unit vector).
pub fn marginal_along(m: &ProductMeasure, dir: [f64; 2]) -> Result<LogConcaveMeasure1D> {
    if m.dim() != 2 {
        return Err(Error::Unsupported("marginal_along needs n = 2".into()));
    }
    let perp = [-dir[1], dir[0]];
    let n = 513;
    let (vlo, vhi) = frame_range(m, dir);
    let (ulo, uhi) = frame_range(m, perp);
    let vg = Interval::new(vlo, vhi, n)?;
    let ug = Interval::new(ulo, uhi, n)?;
    let hu = ug.spacing();
    let density: Vec<f64> = vg
        .nodes()
        .map(|v| {
            let mut s = 0.0;
            for (j, u) in ug.nodes().enumerate() {
                let trap = if j == 0 || j == n - 1 { 0.5 * hu } else { hu };
                let x = v * dir[0] + u * perp[0];
                let y = v * dir[1] + u * perp[1];
                s += trap * m.density_at_2d(x, y);
            }
            s
        })
        .collect();
    LogConcaveMeasure1D::from_density_values(vg, density)
}

/// Atom weight below max_weight * this fraction is dropped before the flow
/// solve (the remaining mass is renormalized).
const ATOM_DROP_FRACTION: f64 = 1e-14;

fn lattice_atoms(grid_u: Interval, grid_v: Interval, weight: impl Fn(usize, f64, usize, f64) -> f64) -> Vec<Atom> {
    let (nu, nv) = (grid_u.n_points, grid_v.n_points);
    let (hu, hv) = (grid_u.spacing(), grid_v.spacing());
    let mut atoms = Vec::with_capacity(nu * nv);
    for (i, u) in grid_u.nodes().enumerate() {
        let tu = if i == 0 || i == nu - 1 { 0.5 * hu } else { hu };
        for (j, v) in grid_v.nodes().enumerate() {
            let tv = if j == 0 || j == nv - 1 { 0.5 * hv } else { hv };
            let w = tu * tv * weight(i, u, j, v);
            atoms.push(Atom { pos: [u, v], mass: w });
        }
    }
    let max_w = atoms.iter().map(|a| a.mass).fold(0.0, f64::max);
    atoms.retain(|a| a.mass > max_w * ATOM_DROP_FRACTION);
    let total: f64 = atoms.iter().map(|a| a.mass).sum();
    for a in atoms.iter_mut() {
        a.mass /= total;
    }
    atoms
}

/// W1 between `m` and the comparison measure gamma_p(u) (x) mbar(v) in the
/// frame (u, v) = (x . sigma, x . sigma_perp), both materialized on a shared
/// `n_grid`^2 lattice.
pub fn w1_to_split_res(m: &ProductMeasure, sigma: &[f64], p: f64, n_grid: usize) -> Result<f64> {
    if m.dim() != 2 {
        return Err(Error::Unsupported("w1_to_split needs n = 2".into()));
    }
    if n_grid < 8 || n_grid > 128 {
        return Err(Error::Precondition(format!("joint grid {n_grid}^2 outside [8, 128]^2")));
    }
    let max_pts = m.factors().iter().map(|f| f.n_points()).max().unwrap();
    if max_pts / n_grid > 64 {
        return Err(Error::Precondition(format!(
            "coarsening ratio {} > 64: raise the joint resolution",
            max_pts / n_grid
        )));
    }
    let norm: f64 = sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!("|sigma| = {norm}, need a unit vector")));
    }
    let dir = [sigma[0], sigma[1]];
    let perp = [-dir[1], dir[0]];
    let (ulo, uhi) = frame_range(m, dir);
    let (vlo, vhi) = frame_range(m, perp);
    let gu = Interval::new(ulo, uhi, n_grid)?;
    let gv = Interval::new(vlo, vhi, n_grid)?;
    let dens = |u: f64, v: f64| {
        let x = u * dir[0] + v * perp[0];
        let y = u * dir[1] + v * perp[1];
        m.density_at_2d(x, y)
    };
    // lattice marginal along sigma_perp (row sums with trapezoid u-weights)
    let hu = gu.spacing();
    let mbar: Vec<f64> = gv
        .nodes()
        .map(|v| {
            let mut s = 0.0;
            for (i, u) in gu.nodes().enumerate() {
                let tu = if i == 0 || i == n_grid - 1 { 0.5 * hu } else { hu };
                s += tu * dens(u, v);
            }
            s
        })
        .collect();
    let source = lattice_atoms(gu, gv, |_, u, _, v| dens(u, v));
    let target = lattice_atoms(gu, gv, |_, u, j, _| gaussian_pdf(u - p) * mbar[j]);
    Ok(w1_discrete(&source, &target)?.cost)
}

pub fn w1_to_split(m: &ProductMeasure, sigma: &[f64], p: f64) -> Result<f64> {
    w1_to_split_res(m, sigma, p, 96)
}

const COARSE_SPLIT_RES: usize = 32;
const FINAL_SPLIT_RES: usize = 96;

fn split_objective(m: &ProductMeasure, theta: f64, res: usize) -> Result<f64> {
    let sigma = [theta.cos(), theta.sin()];
    let b = m.barycenter_vec();
    let p = b[0] * sigma[0] + b[1] * sigma[1];
    w1_to_split_res(m, &sigma, p, res)
}

fn golden_refine(m: &ProductMeasure, mut lo: f64, mut hi: f64, res: usize) -> Result<(f64, f64)> {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = split_objective(m, x1, res)?;
    let mut f2 = split_objective(m, x2, res)?;
    while hi - lo > 1e-3 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = split_objective(m, x1, res)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = split_objective(m, x2, res)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    Ok((mid, split_objective(m, mid, res)?))
}

/// Best Gaussian split: p fixed to the projected barycenter, sigma by a
/// 64-angle scan plus golden-section refinement to 1e-3 radians; the winning
/// angle is re-scored at the final lattice resolution.
pub fn best_split_search(m: &ProductMeasure) -> Result<(GaussianSplit, f64)> {
    match m.dim() {
        1 => {
            let f = &m.factors()[0];
            let p = f.barycenter();
            let half = 0.5 * (f.grid.hi - f.grid.lo).max(16.0);
            let gamma = crate::measure::build_grid_measure(
                |x| 0.5 * (x - p) * (x - p),
                Interval::new(p - half, p + half, FINE_N.min(4097))?,
            )?;
            let w1 = w1_1d(f, &gamma)?;
            Ok((GaussianSplit::new(vec![1.0], p, None)?, w1))
        }
        2 => {
            let n_scan = 64;
            let mut scan: Vec<(f64, f64)> = (0..n_scan)
                .into_par_iter()
                .map(|j| {
                    let theta = j as f64 * std::f64::consts::PI / n_scan as f64;
                    let val = split_objective(m, theta, COARSE_SPLIT_RES)
                        .unwrap_or(f64::INFINITY);
                    (theta, val)
                })
                .collect();
            scan.sort_by(|a, b| a.0.total_cmp(&b.0));
            // local minima of the cyclic scan (theta and theta + pi give the
            // same split, so wrap around)
            let vals: Vec<f64> = scan.iter().map(|s| s.1).collect();
            let noise = 1e-4 * (1.0 + vals.iter().cloned().fold(f64::INFINITY, f64::min));
            let mut minima: Vec<usize> = (0..n_scan)
                .filter(|&j| {
                    let prev = vals[(j + n_scan - 1) % n_scan];
                    let next = vals[(j + 1) % n_scan];
                    vals[j] <= prev && vals[j] <= next
                })
                .collect();
            minima.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
            let distinct = minima
                .iter()
                .filter(|&&j| vals[j] < vals[minima[0]] + noise.max(1e-3))
                .count();
            let seeds: Vec<usize> = if distinct <= 1 {
                vec![minima[0]]
            } else {
                minima.iter().take(8).cloned().collect()
            };
            let h = std::f64::consts::PI / n_scan as f64;
            let mut best: Option<(f64, f64)> = None;
            for &j in &seeds {
                let theta = scan[j].0;
                let (t, v) = golden_refine(m, theta - h, theta + h, COARSE_SPLIT_RES)?;
                if best.map_or(true, |(_, bv)| v < bv - 1e-15 || (v <= bv && t < best.unwrap().0)) {
                    best = Some((t, v));
                }
            }
            let theta = best.unwrap().0.rem_euclid(std::f64::consts::PI);
            let w1 = split_objective(m, theta, FINAL_SPLIT_RES)?;
            let sigma = vec![theta.cos(), theta.sin()];
            let b = m.barycenter_vec();
            let p = b[0] * sigma[0] + b[1] * sigma[1];
            let mbar = marginal_along(m, [-sigma[1], sigma[0]])?;
            Ok((GaussianSplit::new(sigma, p, Some(mbar))?, w1))
        }
        d => Err(Error::Unsupported(format!("split search limited to n <= 2, got {d}"))),
    }
}
