//! Grid calculus: gradients, integrals, variances, entropies, and the
//! Poincare / LSI deficit functionals.

use crate::error::{Error, Result};
use crate::measure::{Interval, LogConcaveMeasure1D};
use serde::Serialize;

/// Values of a test function on a measure's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Interval,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn from_fn(grid: Interval, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            grid,
            values: grid.nodes().map(f).collect(),
        }
    }

    pub fn on_measure(m: &LogConcaveMeasure1D, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(m.grid, f)
    }

    pub fn coordinate(m: &LogConcaveMeasure1D) -> Self {
        Self::on_measure(m, |x| x)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear interpolation, clamped extrapolation outside the grid using
    /// the one-sided boundary slope.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let h = self.grid.spacing();
        if x <= self.grid.lo {
            let slope = (self.values[1] - self.values[0]) / h;
            return self.values[0] + slope * (x - self.grid.lo);
        }
        if x >= self.grid.hi {
            let slope = (self.values[n - 1] - self.values[n - 2]) / h;
            return self.values[n - 1] + slope * (x - self.grid.hi);
        }
        let t = (x - self.grid.lo) / h;
        let i = (t.floor() as usize).min(n - 2);
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &GridFunction) -> Self {
        assert_eq!(self.grid, other.grid);
        GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    /// Max absolute finite-difference slope (discrete Lipschitz constant).
    pub fn lipschitz_constant(&self) -> f64 {
        let h = self.grid.spacing();
        self.values
            .windows(2)
            .map(|w| ((w[1] - w[0]) / h).abs())
            .fold(0.0, f64::max)
    }
}

fn check_host(f: &GridFunction, m: &LogConcaveMeasure1D) {
    assert_eq!(
        f.grid, m.grid,
        "grid function does not live on the measure's grid"
    );
}

/// Central differences at interior nodes, one-sided at the boundary.
pub fn gradient(f: &GridFunction) -> GridFunction {
    let n = f.values.len();
    let h = f.grid.spacing();
    let mut g = vec![0.0; n];
    g[0] = (f.values[1] - f.values[0]) / h;
    g[n - 1] = (f.values[n - 1] - f.values[n - 2]) / h;
    for i in 1..n - 1 {
        g[i] = (f.values[i + 1] - f.values[i - 1]) / (2.0 * h);
    }
    GridFunction { grid: f.grid, values: g }
}

pub fn integrate(f: &GridFunction, m: &LogConcaveMeasure1D) -> f64 {
    check_host(f, m);
    f.values.iter().zip(&m.weights).map(|(&v, &w)| v * w).sum()
}

pub fn variance(f: &GridFunction, m: &LogConcaveMeasure1D) -> f64 {
    let mean = integrate(f, m);
    f.values
        .iter()
        .zip(&m.weights)
        .map(|(&v, &w)| w * (v - mean) * (v - mean))
        .sum()
}

/// int |grad f|^2 dmu, by construction equal to integrate(gradient(f)^2).
pub fn dirichlet_energy(f: &GridFunction, m: &LogConcaveMeasure1D) -> f64 {
    let g = gradient(f);
    let g2 = GridFunction {
        grid: g.grid,
        values: g.values.iter().map(|&v| v * v).collect(),
    };
    integrate(&g2, m)
}

/// Ent_mu(g) = int g log g dmu - (int g dmu) log int g dmu, with the
/// convention 0 log 0 = 0 (entries below 1e-300 clamped to zero).
pub fn entropy(g: &GridFunction, m: &LogConcaveMeasure1D) -> Result<f64> {
    check_host(g, m);
    if let Some(&bad) = g.values.iter().find(|&&v| v < -1e-12) {
        return Err(Error::Precondition(format!(
            "entropy requires a nonnegative function, found {bad}"
        )));
    }
    let xlogx = |v: f64| if v < 1e-300 { 0.0 } else { v * v.ln() };
    let int_glogg: f64 = g
        .values
        .iter()
        .zip(&m.weights)
        .map(|(&v, &w)| w * xlogx(v.max(0.0)))
        .sum();
    let int_g: f64 = integrate(g, m);
    Ok(int_glogg - xlogx(int_g))
}

/// Deficit of a functional inequality, in absolute and relative form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Deficit {
    pub absolute: f64,
    /// The epsilon of the (1 + eps)-convexity hypotheses,
    /// clamped at >= 0.
    pub relative: f64,
}

/// Poincare deficit int |grad u|^2 dmu - Var(u), with relative form
/// eps = int|grad u|^2 / Var(u) - 1.
pub fn poincare_deficit(u: &GridFunction, m: &LogConcaveMeasure1D) -> Result<Deficit> {
    let var = variance(u, m);
    if var <= 0.0 {
        return Err(Error::Degenerate("Var(u) = 0: constant u is a trivial minimizer".into()));
    }
    let energy = dirichlet_energy(u, m);
    Ok(Deficit {
        absolute: energy - var,
        relative: (energy / var - 1.0).max(0.0),
    })
}

/// LSI deficit 2 int |grad u|^2 dmu - Ent(u^2) for u normalized to
/// int u^2 dmu = 1; relative form eps = deficit / (2 int |grad u|^2 dmu).
pub fn lsi_deficit(u: &GridFunction, m: &LogConcaveMeasure1D) -> Result<Deficit> {
    check_host(u, m);
    let u2 = u.map(|v| v * v);
    let alpha = integrate(&u2, m);
    if alpha <= 0.0 {
        return Err(Error::Degenerate("int u^2 dmu = 0: trivial minimizer".into()));
    }
    let u2n = u2.scale(1.0 / alpha);
    let ent = entropy(&u2n, m)?;
    let energy = dirichlet_energy(u, m) / alpha;
    let absolute = 2.0 * energy - ent;
    let relative = if energy > 0.0 { (absolute / (2.0 * energy)).max(0.0) } else { 0.0 };
    Ok(Deficit { absolute, relative })
}

/// Rescale so that int u^2 dmu = 1.
pub fn normalize_l2(u: &GridFunction, m: &LogConcaveMeasure1D) -> Result<GridFunction> {
    let n2 = integrate(&u.map(|v| v * v), m);
    if n2 <= 0.0 {
        return Err(Error::Degenerate("cannot L2-normalize the zero function".into()));
    }
    Ok(u.scale(1.0 / n2.sqrt()))
}

/// Subtract the mean so that int u dmu = 0.
pub fn center(u: &GridFunction, m: &LogConcaveMeasure1D) -> GridFunction {
    let mean = integrate(u, m);
    u.map(|v| v - mean)
}

/// The exact Gaussian LSI optimizer e^{p y / 2}, normalized under `m`.
pub fn exponential_tilt(m: &LogConcaveMeasure1D, p: f64) -> Result<GridFunction> {
    normalize_l2(&GridFunction::on_measure(m, |y| (p * y / 2.0).exp()), m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss() -> LogConcaveMeasure1D {
        LogConcaveMeasure1D::standard_gaussian(2001, 8.0)
    }

    #[test]
    fn gradient_of_quadratic() {
        let f = GridFunction::from_fn(Interval::symmetric(4.0, 401).unwrap(), |x| x * x);
        let g = gradient(&f);
        for (i, x) in f.grid.nodes().enumerate().skip(1).take(399) {
            assert!((g.values[i] - 2.0 * x).abs() < 1e-10);
        }
    }

    #[test]
    fn eval_interpolates_and_extrapolates() {
        let f = GridFunction::from_fn(Interval::new(0.0, 1.0, 11).unwrap(), |x| 3.0 * x + 1.0);
        assert!((f.eval(0.55) - 2.65).abs() < 1e-12);
        assert!((f.eval(-1.0) + 2.0).abs() < 1e-12);
        assert!((f.eval(2.0) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_moments_and_energy() {
        let m = gauss();
        let x = GridFunction::coordinate(&m);
        assert!(integrate(&x, &m).abs() < 1e-12);
        assert!((variance(&x, &m) - 1.0).abs() < 1e-6);
        assert!((dirichlet_energy(&x, &m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poincare_deficit_zero_for_coordinate() {
        let m = gauss();
        let d = poincare_deficit(&GridFunction::coordinate(&m), &m).unwrap();
        assert!(d.absolute.abs() < 1e-6);
        assert!(d.relative < 1e-6);
    }

    #[test]
    fn poincare_deficit_of_quadratic_is_one() {
        // u = x^2: energy 4 E[x^2] = 4, Var(x^2) = 2, so eps = 1
        let m = gauss();
        let d = poincare_deficit(&GridFunction::on_measure(&m, |x| x * x), &m).unwrap();
        assert!((d.relative - 1.0).abs() < 1e-4, "eps = {}", d.relative);
    }

    #[test]
    fn entropy_of_constant_vanishes() {
        let m = gauss();
        let g = GridFunction::on_measure(&m, |_| 2.5);
        assert!(entropy(&g, &m).unwrap().abs() < 1e-12);
        assert!(entropy(&g.scale(-1.0), &m).is_err());
    }

    #[test]
    fn lsi_deficit_zero_for_exponential_tilt() {
        // Carlen: equality in the Gaussian LSI exactly at e^{p y / 2}
        // trapezoid entropy error is O(spacing^2); p = 2 needs the finer grid
        let m = LogConcaveMeasure1D::standard_gaussian(6001, 8.0);
        for p in [0.5, 1.0, 2.0] {
            let u = exponential_tilt(&m, p).unwrap();
            let d = lsi_deficit(&u, &m).unwrap();
            assert!(d.absolute.abs() < 1e-5, "p = {p}: deficit {}", d.absolute);
        }
    }

    #[test]
    fn lsi_deficit_positive_for_shrunk_variance() {
        // the tilt is only optimal under the standard Gaussian
        let m = LogConcaveMeasure1D::from_family(
            crate::measure::PotentialFamily::Gaussian { variance: 0.9 },
            2001,
        )
        .unwrap();
        let u = exponential_tilt(&m, 1.0).unwrap();
        let d = lsi_deficit(&u, &m).unwrap();
        // exact relative deficit for the tilt under N(0, 1 - delta) is delta
        assert!((d.relative - 0.1).abs() < 1e-4, "eps = {}", d.relative);
    }

    #[test]
    fn normalize_and_center() {
        let m = gauss();
        let u = GridFunction::on_measure(&m, |x| 1.0 + x);
        let c = center(&u, &m);
        assert!(integrate(&c, &m).abs() < 1e-12);
        let n = normalize_l2(&c, &m).unwrap();
        assert!((integrate(&n.map(|v| v * v), &m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_constant_of_kinked_function() {
        let f = GridFunction::from_fn(Interval::symmetric(2.0, 41).unwrap(), |x| x.abs());
        assert!((f.lipschitz_constant() - 1.0).abs() < 1e-12);
    }
}
