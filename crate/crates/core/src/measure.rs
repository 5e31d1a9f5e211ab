//! Grid representations of uniformly log-concave probability measures
//! mu = e^{-V} dx, their products, rotations and marginals.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Tolerance below which a measure still counts as uniformly log-concave.
pub const TOL_CONVEXITY: f64 = 1e-6;

/// Boundary weights above this fraction of the max weight trip the
/// truncation warning.
pub const BOUNDARY_MASS_THRESHOLD: f64 = 1e-10;

/// A uniform grid on a truncated line segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub n_points: usize,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidGrid(format!("need lo < hi, got [{lo}, {hi}]")));
        }
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!("need n_points >= 3, got {n_points}")));
        }
        Ok(Interval { lo, hi, n_points })
    }

    /// Symmetric interval [-halfwidth, halfwidth].
    pub fn symmetric(halfwidth: f64, n_points: usize) -> Result<Self> {
        Interval::new(-halfwidth, halfwidth, n_points)
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |i| self.node(i))
    }
}

/// Named potential families used throughout the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialFamily {
    /// V = x^2 / (2 variance); the measure N(0, variance).
    Gaussian { variance: f64 },
    /// V = x^2/2 + delta x^4.
    Quartic { delta: f64 },
    /// V = x^2/2 + lambda x; a translated Gaussian.
    Tilted { lambda: f64 },
    /// Symmetric two-mode mixture (1/2) N(-a, s^2) + (1/2) N(a, s^2);
    /// non-log-concave once a > s.
    Mixture { a: f64, s: f64 },
}

impl PotentialFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PotentialFamily::Gaussian { variance } if variance <= 0.0 => Err(Error::Config(
                format!("gaussian variance must be positive, got {variance}"),
            )),
            PotentialFamily::Quartic { delta } if delta < 0.0 => Err(Error::Config(format!(
                "quartic delta must be nonnegative, got {delta}"
            ))),
            PotentialFamily::Mixture { s, .. } if s <= 0.0 => {
                Err(Error::Config(format!("mixture scale must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PotentialFamily::Gaussian { variance } => x * x / (2.0 * variance),
            PotentialFamily::Quartic { delta } => x * x / 2.0 + delta * x.powi(4),
            PotentialFamily::Tilted { lambda } => x * x / 2.0 + lambda * x,
            PotentialFamily::Mixture { a, s } => {
                let l1 = -(x + a) * (x + a) / (2.0 * s * s);
                let l2 = -(x - a) * (x - a) / (2.0 * s * s);
                let m = l1.max(l2);
                -(m + (0.5 * ((l1 - m).exp() + (l2 - m).exp())).ln())
            }
        }
    }

    /// (mean, scale) hints used to pick the default truncation domain.
    pub fn domain_hint(&self) -> (f64, f64) {
        match *self {
            PotentialFamily::Gaussian { variance } => (0.0, variance.sqrt()),
            PotentialFamily::Quartic { .. } => (0.0, 1.0),
            PotentialFamily::Tilted { lambda } => (-lambda, 1.0),
            PotentialFamily::Mixture { a, s } => (0.0, (a * a + s * s).sqrt()),
        }
    }

    /// Default domain [m - 8s, m + 8s] from the hints.
    pub fn default_domain(&self, n_points: usize) -> Result<Interval> {
        let (m, s) = self.domain_hint();
        Interval::new(m - 8.0 * s, m + 8.0 * s, n_points)
    }
}

/// The object mu = e^{-V} dx on a grid: potential values, normalized
/// trapezoid weights of e^{-V}, and the discrete convexity margin
/// min_interior V'' - 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogConcaveMeasure1D {
    pub grid: Interval,
    pub potential: Vec<f64>,
    pub weights: Vec<f64>,
    pub convexity_margin: f64,
    /// Normalizer Z = int e^{-(V - min V)} dx over the grid.
    pub log_normalizer_shift: f64,
    pub normalizer: f64,
    /// True when the boundary weights exceeded the truncation threshold.
    pub truncation_warning: bool,
}

/// Construct a grid measure from a potential. Weights are the normalized
/// trapezoid quadrature of e^{-V}; the convexity margin comes from
/// three-point second differences of V at interior nodes.
pub fn build_grid_measure(potential: impl Fn(f64) -> f64, domain: Interval) -> Result<LogConcaveMeasure1D> {
    let v: Vec<f64> = domain.nodes().map(&potential).collect();
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonNormalizable(format!(
            "potential not finite on the grid (found {bad})"
        )));
    }
    LogConcaveMeasure1D::from_potential_values(domain, v)
}

impl LogConcaveMeasure1D {
    pub fn from_potential_values(grid: Interval, potential: Vec<f64>) -> Result<Self> {
        assert_eq!(potential.len(), grid.n_points);
        let h = grid.spacing();
        let vmin = potential.iter().cloned().fold(f64::INFINITY, f64::min);
        let density: Vec<f64> = potential.iter().map(|&vi| (-(vi - vmin)).exp()).collect();
        let mut z = 0.0;
        for i in 0..grid.n_points {
            let trap = if i == 0 || i == grid.n_points - 1 { 0.5 * h } else { h };
            z += trap * density[i];
        }
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::NonNormalizable(format!("normalizer Z = {z}")));
        }
        let weights: Vec<f64> = density
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let trap = if i == 0 || i == grid.n_points - 1 { 0.5 * h } else { h };
                trap * d / z
            })
            .collect();
        let wmax = weights.iter().cloned().fold(0.0, f64::max);
        let truncation_warning =
            weights[0] > BOUNDARY_MASS_THRESHOLD * wmax || weights[grid.n_points - 1] > BOUNDARY_MASS_THRESHOLD * wmax;

        // min over interior nodes of the discrete Hessian, minus 1
        let mut vpp_min = f64::INFINITY;
        for i in 1..grid.n_points - 1 {
            let vpp = (potential[i - 1] - 2.0 * potential[i] + potential[i + 1]) / (h * h);
            vpp_min = vpp_min.min(vpp);
        }
        Ok(LogConcaveMeasure1D {
            grid,
            potential,
            weights,
            convexity_margin: vpp_min - 1.0,
            log_normalizer_shift: vmin,
            normalizer: z,
            truncation_warning,
        })
    }

    /// Build directly from sampled (nonnegative) density values; used for
    /// marginals of rotated products where only the density is available.
    pub fn from_density_values(grid: Interval, density: Vec<f64>) -> Result<Self> {
        let dmax = density.iter().cloned().fold(0.0, f64::max);
        if !(dmax > 0.0) {
            return Err(Error::NonNormalizable("density vanishes on the grid".into()));
        }
        let potential: Vec<f64> = density
            .iter()
            .map(|&d| -(d.max(1e-300) / dmax).ln())
            .collect();
        let mut m = Self::from_potential_values(grid, potential)?;
        // Margin estimated only where the density carries mass; the clamped
        // log outside the support would otherwise dominate.
        let h = grid.spacing();
        let mut vpp_min = f64::INFINITY;
        for i in 1..grid.n_points - 1 {
            if density[i - 1] > 1e-12 * dmax && density[i] > 1e-12 * dmax && density[i + 1] > 1e-12 * dmax {
                let vpp = (m.potential[i - 1] - 2.0 * m.potential[i] + m.potential[i + 1]) / (h * h);
                vpp_min = vpp_min.min(vpp);
            }
        }
        m.convexity_margin = vpp_min - 1.0;
        Ok(m)
    }

    pub fn standard_gaussian(n_points: usize, halfwidth: f64) -> Self {
        build_grid_measure(|x| 0.5 * x * x, Interval::symmetric(halfwidth, n_points).unwrap()).unwrap()
    }

    pub fn from_family(f: PotentialFamily, n_points: usize) -> Result<Self> {
        f.validate()?;
        build_grid_measure(|x| f.eval(x), f.default_domain(n_points)?)
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points
    }

    /// Normalized density at an arbitrary point (linear interpolation of V,
    /// zero outside the grid).
    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.grid.lo || x > self.grid.hi {
            return 0.0;
        }
        let h = self.grid.spacing();
        let t = (x - self.grid.lo) / h;
        let i = (t.floor() as usize).min(self.grid.n_points - 2);
        let frac = t - i as f64;
        let v = self.potential[i] * (1.0 - frac) + self.potential[i + 1] * frac;
        (-(v - self.log_normalizer_shift)).exp() / self.normalizer
    }

    /// Pushforward under x -> c x (c > 0): V_c(x) = V(x/c).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        assert!(c > 0.0);
        let grid = Interval::new(self.grid.lo * c, self.grid.hi * c, self.grid.n_points)?;
        let v: Vec<f64> = (0..self.grid.n_points).map(|i| self.potential[i]).collect();
        Self::from_potential_values(grid, v)
    }

    pub fn is_uniform(&self, tol: f64) -> bool {
        self.convexity_margin >= -tol
    }

    pub fn barycenter(&self) -> f64 {
        self.grid
            .nodes()
            .zip(&self.weights)
            .map(|(x, &w)| w * x)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.barycenter();
        self.grid
            .nodes()
            .zip(&self.weights)
            .map(|(x, &w)| w * (x - m) * (x - m))
            .sum()
    }

    /// Write (x, V, weight) rows as CSV.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "# be-stability-lab v1")?;
        writeln!(out, "x,potential,weight")?;
        for (i, x) in self.grid.nodes().enumerate() {
            writeln!(out, "{},{},{}", x, self.potential[i], self.weights[i])?;
        }
        Ok(())
    }
}

/// Margin report from `check_uniform_convexity`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvexityReport {
    pub margin: f64,
    pub uniform: bool,
}

pub fn check_uniform_convexity(m: &LogConcaveMeasure1D, tol: f64) -> ConvexityReport {
    ConvexityReport {
        margin: m.convexity_margin,
        uniform: m.convexity_margin >= -tol,
    }
}

/// Tensor product of 1D factors, optionally rotated (2D only).
#[derive(Debug, Clone)]
pub struct ProductMeasure {
    factors: Vec<LogConcaveMeasure1D>,
    rotation: Option<[[f64; 2]; 2]>,
}

impl ProductMeasure {
    pub fn product(factors: Vec<LogConcaveMeasure1D>) -> Result<Self> {
        if factors.is_empty() || factors.len() > 3 {
            return Err(Error::Unsupported(format!(
                "products limited to 1..=3 factors, got {}",
                factors.len()
            )));
        }
        Ok(ProductMeasure { factors, rotation: None })
    }

    pub fn rotated(factors: Vec<LogConcaveMeasure1D>, rotation: [[f64; 2]; 2]) -> Result<Self> {
        if factors.len() != 2 {
            return Err(Error::Unsupported("rotation supported only for n = 2".into()));
        }
        // R^T R = I to 1e-10
        for i in 0..2 {
            for j in 0..2 {
                let dot: f64 = (0..2).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot - target).abs() > 1e-10 {
                    return Err(Error::Precondition(format!(
                        "rotation not orthogonal: (R^T R)[{i}][{j}] = {dot}"
                    )));
                }
            }
        }
        Ok(ProductMeasure { factors, rotation: Some(rotation) })
    }

    pub fn rotated_by_angle(factors: Vec<LogConcaveMeasure1D>, theta: f64) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        Self::rotated(factors, [[c, -s], [s, c]])
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[LogConcaveMeasure1D] {
        &self.factors
    }

    pub fn rotation(&self) -> Option<&[[f64; 2]; 2]> {
        self.rotation.as_ref()
    }

    /// Ambient-frame barycenter.
    pub fn barycenter_vec(&self) -> Vec<f64> {
        let b: Vec<f64> = self.factors.iter().map(|f| f.barycenter()).collect();
        match self.rotation {
            None => b,
            Some(r) => vec![r[0][0] * b[0] + r[0][1] * b[1], r[1][0] * b[0] + r[1][1] * b[1]],
        }
    }

    /// Variance of x . dir for a unit vector dir in the ambient frame.
    /// Factors are independent, so this is sum c_i^2 Var(factor_i) with
    /// c = R^T dir.
    pub fn variance_along(&self, dir: &[f64]) -> Result<f64> {
        if dir.len() != self.dim() {
            return Err(Error::Precondition(format!(
                "direction has dim {}, measure has dim {}",
                dir.len(),
                self.dim()
            )));
        }
        let norm: f64 = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!("direction not unit: |dir| = {norm}")));
        }
        let c: Vec<f64> = match self.rotation {
            None => dir.to_vec(),
            Some(r) => vec![r[0][0] * dir[0] + r[1][0] * dir[1], r[0][1] * dir[0] + r[1][1] * dir[1]],
        };
        Ok(c.iter()
            .zip(&self.factors)
            .map(|(&ci, f)| ci * ci * f.variance())
            .sum())
    }

    /// Joint density at an ambient point (2D only).
    pub fn density_at_2d(&self, x: f64, y: f64) -> f64 {
        debug_assert_eq!(self.dim(), 2);
        let (y1, y2) = match self.rotation {
            None => (x, y),
            Some(r) => (r[0][0] * x + r[1][0] * y, r[0][1] * x + r[1][1] * y),
        };
        self.factors[0].density_at(y1) * self.factors[1].density_at(y2)
    }
}

/// Drop one ambient axis, returning the marginal on the remaining axes.
///
/// Without rotation this just removes a factor. With rotation (2D) the
/// marginal density is integrated on a joint grid along the dropped ambient
/// coordinate; its convexity margin is re-estimated from -log density.
pub fn marginal(p: &ProductMeasure, drop_axis: usize) -> Result<ProductMeasure> {
    if drop_axis >= p.dim() {
        return Err(Error::Precondition(format!(
            "drop_axis {} out of range for dim {}",
            drop_axis,
            p.dim()
        )));
    }
    match p.rotation {
        None => {
            let factors: Vec<LogConcaveMeasure1D> = p
                .factors
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop_axis)
                .map(|(_, f)| f.clone())
                .collect();
            ProductMeasure::product(factors)
        }
        Some(r) => {
            if p.dim() != 2 {
                return Err(Error::Unsupported("rotated marginals only implemented for n = 2".into()));
            }
            let keep = 1 - drop_axis;
            // ambient range of the kept coordinate: projection of the
            // rotated factor box
            let (f1, f2) = (&p.factors[0], &p.factors[1]);
            let corners = [
                (f1.grid.lo, f2.grid.lo),
                (f1.grid.lo, f2.grid.hi),
                (f1.grid.hi, f2.grid.lo),
                (f1.grid.hi, f2.grid.hi),
            ];
            let proj = |axis: usize, (a, b): (f64, f64)| r[axis][0] * a + r[axis][1] * b;
            let mut lo_k = f64::INFINITY;
            let mut hi_k = f64::NEG_INFINITY;
            let mut lo_d = f64::INFINITY;
            let mut hi_d = f64::NEG_INFINITY;
            for c in corners {
                lo_k = lo_k.min(proj(keep, c));
                hi_k = hi_k.max(proj(keep, c));
                lo_d = lo_d.min(proj(drop_axis, c));
                hi_d = hi_d.max(proj(drop_axis, c));
            }
            let n = p.factors.iter().map(|f| f.n_points()).max().unwrap().min(1025);
            let kept_grid = Interval::new(lo_k, hi_k, n)?;
            let drop_grid = Interval::new(lo_d, hi_d, n)?;
            let hd = drop_grid.spacing();
            let density: Vec<f64> = kept_grid
                .nodes()
                .map(|xk| {
                    let mut s = 0.0;
                    for (j, xd) in drop_grid.nodes().enumerate() {
                        let trap = if j == 0 || j == n - 1 { 0.5 * hd } else { hd };
                        let (x, y) = if keep == 0 { (xk, xd) } else { (xd, xk) };
                        s += trap * p.density_at_2d(x, y);
                    }
                    s
                })
                .collect();
            let m = LogConcaveMeasure1D::from_density_values(kept_grid, density)?;
            ProductMeasure::product(vec![m])
        }
    }
}

/// A product decomposition gamma_{p,sigma} (x) mu-bar: standard Gaussian
/// along `direction` with barycenter offset p, tensor the marginal on the
/// orthogonal complement.
#[derive(Debug, Clone)]
pub struct GaussianSplit {
    pub direction: Vec<f64>,
    pub barycenter: f64,
    pub marginal: Option<LogConcaveMeasure1D>,
}

impl GaussianSplit {
    pub fn new(direction: Vec<f64>, barycenter: f64, marginal: Option<LogConcaveMeasure1D>) -> Result<Self> {
        let norm: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("|sigma| = {norm}, need a unit vector")));
        }
        Ok(GaussianSplit { direction, barycenter, marginal })
    }

    pub fn angle(&self) -> f64 {
        self.direction[1].atan2(self.direction[0])
    }
}
