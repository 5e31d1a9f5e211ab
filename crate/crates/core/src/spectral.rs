//! Weighted Neumann eigenproblem for the generator -Delta + V' d/dx,
//! discretized in self-adjoint divergence form. The Poincare constant is
//! 1/lambda_1; the low eigenfunctions are the near-optimal test functions
//! of the stability theorems.

use crate::error::{Error, Result};
use crate::functionals::{self, GridFunction};
use crate::measure::{LogConcaveMeasure1D, ProductMeasure};
use crate::transport;
use serde::Serialize;

/// Ordered eigenpairs of the Dirichlet form, zero mode removed.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<GridFunction>,
    pub poincare_constant: f64,
    pub residual_norms: Vec<f64>,
}

/// Stiffness coefficients a_i = m_i / h^2 with face-centered cell masses
/// m_i, so that the constant function is an exact null vector.
fn stiffness_coeffs(m: &LogConcaveMeasure1D) -> Vec<f64> {
    let n = m.n_points();
    let h = m.grid.spacing();
    // node density d_i = rho_i / Z recovered from the trapezoid weights
    let d = |i: usize| {
        let trap = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        m.weights[i] / trap
    };
    (0..n - 1)
        .map(|i| {
            let cell_mass = h * 0.5 * (d(i) + d(i + 1));
            cell_mass / (h * h)
        })
        .collect()
}

/// The discrete Dirichlet form E(f, g) = int f' g' dmu used by the
/// eigensolver (face-centered masses). This is the form whose Rayleigh
/// quotients reproduce the eigenvalues exactly.
pub fn dirichlet_form(f: &GridFunction, g: &GridFunction, m: &LogConcaveMeasure1D) -> f64 {
    assert_eq!(f.grid, m.grid);
    assert_eq!(g.grid, m.grid);
    let a = stiffness_coeffs(m);
    a.iter()
        .enumerate()
        .map(|(i, &ai)| ai * (f.values[i + 1] - f.values[i]) * (g.values[i + 1] - g.values[i]))
        .sum()
}

/// Symmetric tridiagonal matrix in the standard form
/// B = M^{-1/2} K M^{-1/2}.
struct Tridiag {
    diag: Vec<f64>,
    off: Vec<f64>,
}

fn standard_form(m: &LogConcaveMeasure1D) -> Tridiag {
    let n = m.n_points();
    let a = stiffness_coeffs(m);
    let w = &m.weights;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    for i in 0..n {
        let k_ii = if i == 0 {
            a[0]
        } else if i == n - 1 {
            a[n - 2]
        } else {
            a[i - 1] + a[i]
        };
        // a node whose density underflowed to zero is an infinite-potential
        // region; park it at the top of the spectrum instead of letting it
        // decouple as a spurious zero mode
        diag[i] = if w[i] > 0.0 { k_ii / w[i] } else { 1e15 };
    }
    for i in 0..n - 1 {
        // sqrt before multiplying: deep-tail weights are ~1e-200 and the
        // product of two of them underflows to zero
        off[i] = -a[i] / (w[i].max(f64::MIN_POSITIVE).sqrt() * w[i + 1].max(f64::MIN_POSITIVE).sqrt());
    }
    Tridiag { diag, off }
}

/// Count eigenvalues strictly below `lambda` via the Sturm sequence of the
/// LDLT factorization.
fn sturm_count(t: &Tridiag, lambda: f64) -> usize {
    let n = t.diag.len();
    let guard = 1e-300;
    let mut count = 0;
    let mut q = t.diag[0] - lambda;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let q_safe = if q.abs() < guard {
            if q >= 0.0 {
                guard
            } else {
                -guard
            }
        } else {
            q
        };
        q = (t.diag[i] - lambda) - t.off[i - 1] * t.off[i - 1] / q_safe;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// k-th smallest eigenvalue (0-based) by bisection.
fn bisect_eigenvalue(t: &Tridiag, k: usize) -> f64 {
    // Gershgorin bounds
    let n = t.diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = (if i > 0 { t.off[i - 1].abs() } else { 0.0 })
            + (if i < n - 1 { t.off[i].abs() } else { 0.0 });
        lo = lo.min(t.diag[i] - r);
        hi = hi.max(t.diag[i] + r);
    }
    // enough iterations to close even the huge Gershgorin intervals that
    // guarded near-zero tail weights produce
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(t, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solve (B - sigma I) x = rhs for tridiagonal B with partial pivoting.
fn tridiag_solve_shifted(t: &Tridiag, sigma: f64, rhs: &[f64]) -> Vec<f64> {
    let n = t.diag.len();
    // working copies of the three bands plus a fourth for fill-in
    let mut a = vec![0.0; n]; // sub
    let mut b: Vec<f64> = t.diag.iter().map(|&d| d - sigma).collect();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n - 1 {
        a[i + 1] = t.off[i];
        c[i] = t.off[i];
    }
    let mut x = rhs.to_vec();
    for i in 0..n - 1 {
        if a[i + 1].abs() > b[i].abs() {
            // swap rows i and i+1; row i spans cols (i, i+1, i+2)
            let (bi, ci, di) = (b[i], c[i], d[i]);
            b[i] = a[i + 1];
            c[i] = b[i + 1];
            d[i] = c[i + 1];
            a[i + 1] = bi;
            b[i + 1] = ci;
            c[i + 1] = di;
            x.swap(i, i + 1);
        }
        let piv = if b[i].abs() < 1e-300 {
            1e-300_f64.copysign(b[i])
        } else {
            b[i]
        };
        let mult = a[i + 1] / piv;
        b[i + 1] -= mult * c[i];
        c[i + 1] -= mult * d[i];
        x[i + 1] -= mult * x[i];
    }
    // back substitution with the extra band
    for i in (0..n).rev() {
        let mut s = x[i];
        if i + 1 < n {
            s -= c[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= d[i] * x[i + 2];
        }
        let piv = if b[i].abs() < 1e-300 {
            1e-300_f64.copysign(b[i])
        } else {
            b[i]
        };
        x[i] = s / piv;
    }
    x
}

fn residual_norm(t: &Tridiag, lambda: f64, v: &[f64]) -> f64 {
    let n = t.diag.len();
    let mut r2 = 0.0;
    for i in 0..n {
        let mut bv = t.diag[i] * v[i];
        if i > 0 {
            bv += t.off[i - 1] * v[i - 1];
        }
        if i < n - 1 {
            bv += t.off[i] * v[i + 1];
        }
        let r = bv - lambda * v[i];
        r2 += r * r;
    }
    r2.sqrt()
}

/// Inverse iteration for the eigenvector at `lambda`, orthogonalized
/// against previously found vectors.
fn inverse_iteration(t: &Tridiag, lambda: f64, prev: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let n = t.diag.len();
    // deterministic pseudo-random start
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let s = (i as u64).wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        })
        .collect();
    let shift = lambda + 1e-10 * (1.0 + lambda.abs());
    for _ in 0..20 {
        for p in prev {
            let dot: f64 = v.iter().zip(p).map(|(&a, &b)| a * b).sum();
            v.iter_mut().zip(p).for_each(|(a, &b)| *a -= dot * b);
        }
        let norm: f64 = v.iter().map(|&a| a * a).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::SolverFailure("inverse iteration collapsed to zero".into()));
        }
        v.iter_mut().for_each(|a| *a /= norm);
        let res = residual_norm(t, lambda, &v);
        if res < 1e-9 * (1.0 + lambda.abs()) {
            break;
        }
        v = tridiag_solve_shifted(t, shift, &v);
    }
    let norm: f64 = v.iter().map(|&a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    let res = residual_norm(t, lambda, &v);
    if res > 1e-6 * (1.0 + lambda.abs()) {
        return Err(Error::SolverFailure(format!(
            "inverse iteration residual {res:.3e} at lambda = {lambda}"
        )));
    }
    Ok((v, res))
}

/// Solve the weighted Neumann eigenproblem, discard the zero mode, and
/// return the lowest `n_eigs` positive eigenpairs in ascending order.
///
/// Eigenfunctions are normalized to int u dmu = 0, int u^2 dmu = 1, with
/// sign fixed by the first nonzero moment int u x^r dmu > 0.
pub fn poincare_spectrum(m: &LogConcaveMeasure1D, n_eigs: usize) -> Result<SpectralResult> {
    let n = m.n_points();
    if n_eigs == 0 || n_eigs >= n / 4 {
        return Err(Error::Precondition(format!(
            "need 0 < n_eigs < n_points/4, got n_eigs = {n_eigs}, n_points = {n}"
        )));
    }
    let t = standard_form(m);
    let lambda0 = bisect_eigenvalue(&t, 0);
    if lambda0.abs() > 1e-6 {
        return Err(Error::SolverFailure(format!(
            "constant null mode not resolved: lambda_0 = {lambda0:.3e}"
        )));
    }
    let mut eigenvalues = Vec::with_capacity(n_eigs);
    let mut eigenfunctions = Vec::with_capacity(n_eigs);
    let mut residual_norms = Vec::with_capacity(n_eigs);
    let mut raw_vectors: Vec<Vec<f64>> = Vec::new();
    // the exact null vector in standard coordinates is sqrt(w)
    let sqrt_w: Vec<f64> = m.weights.iter().map(|&w| w.sqrt()).collect();
    let null_norm: f64 = sqrt_w.iter().map(|&a| a * a).sum::<f64>().sqrt();
    raw_vectors.push(sqrt_w.iter().map(|&a| a / null_norm).collect());

    for k in 1..=n_eigs {
        let lambda = bisect_eigenvalue(&t, k);
        let (v, res) = inverse_iteration(&t, lambda, &raw_vectors)?;
        // back to measure coordinates u = v / sqrt(w)
        let mut u: Vec<f64> = v
            .iter()
            .zip(&m.weights)
            .map(|(&vi, &wi)| vi / wi.max(f64::MIN_POSITIVE).sqrt())
            .collect();
        let mut f = GridFunction { grid: m.grid, values: u.clone() };
        // enforce the normalization conventions
        f = functionals::center(&f, m);
        f = functionals::normalize_l2(&f, m)?;
        // sign: first nonzero moment int u x^r dmu positive
        let mut sign = 0.0;
        for r in 1..=4 {
            let mom: f64 = m
                .grid
                .nodes()
                .zip(&f.values)
                .zip(&m.weights)
                .map(|((x, &u), &w)| w * u * x.powi(r))
                .sum();
            if mom.abs() > 1e-8 {
                sign = mom.signum();
                break;
            }
        }
        if sign < 0.0 {
            f = f.scale(-1.0);
        }
        u = f.values.clone();
        let v_signed: Vec<f64> = u
            .iter()
            .zip(&m.weights)
            .map(|(&ui, &wi)| ui * wi.sqrt())
            .collect();
        let vnorm: f64 = v_signed.iter().map(|&a| a * a).sum::<f64>().sqrt();
        raw_vectors.push(v_signed.iter().map(|&a| a / vnorm).collect());
        eigenvalues.push(lambda);
        eigenfunctions.push(f);
        residual_norms.push(res);
    }
    let poincare_constant = 1.0 / eigenvalues[0];
    Ok(SpectralResult {
        eigenvalues,
        eigenfunctions,
        poincare_constant,
        residual_norms,
    })
}

impl SpectralResult {
    /// JSON export: eigenvalues and residuals.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "eigenvalues": self.eigenvalues,
            "poincare_constant": self.poincare_constant,
            "residual_norms": self.residual_norms,
        })
    }

    /// CSV export of the eigenfunction traces: x, u_1(x), u_2(x), ...
    pub fn write_traces_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.eigenfunctions.len()).map(|i| format!("u{i}")).collect();
        writeln!(out, "x,{}", header.join(","))?;
        if let Some(first) = self.eigenfunctions.first() {
            for (i, x) in first.grid.nodes().enumerate() {
                let row: Vec<String> = self
                    .eigenfunctions
                    .iter()
                    .map(|f| format!("{}", f.values[i]))
                    .collect();
                writeln!(out, "{},{}", x, row.join(","))?;
            }
        }
        Ok(())
    }
}

/// An eigenfunction of a product measure that varies along a single factor
/// axis; its ambient gradient direction is `direction`.
#[derive(Debug, Clone)]
pub struct ProductEigenfunction {
    pub axis: usize,
    pub eigenvalue: f64,
    pub func: GridFunction,
    pub direction: Vec<f64>,
}

/// Near-optimal family along the first k factor axes: u_i is the ground
/// eigenfunction of factor i, accepted when its eigenvalue sits in the
/// 1 + eps_target window. Returns the family and the realized
/// eps = max_i lambda_i - 1 (clamped at 0).
///
/// Product spectra compose as sums of factor spectra, and rotation
/// conjugates eigenfunctions without moving eigenvalues, so factor solves
/// suffice.
pub fn near_optimal_family(
    m: &ProductMeasure,
    k: usize,
    eps_target: f64,
) -> Result<(Vec<ProductEigenfunction>, f64)> {
    let n = m.dim();
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("need 1 <= k <= {n}, got k = {k}")));
    }
    let axes: Vec<usize> = (0..k).collect();
    near_optimal_family_axes(m, &axes, eps_target)
}

/// Same as `near_optimal_family` but with an explicit choice of factor
/// axes.
pub fn near_optimal_family_axes(
    m: &ProductMeasure,
    axes: &[usize],
    eps_target: f64,
) -> Result<(Vec<ProductEigenfunction>, f64)> {
    let n = m.dim();
    if axes.is_empty() || axes.iter().any(|&a| a >= n) {
        return Err(Error::Precondition(format!("axes {axes:?} invalid for dim {n}")));
    }
    let mut family = Vec::with_capacity(axes.len());
    let mut realized = Vec::new();
    for &axis in axes {
        let factor = &m.factors()[axis];
        let spec = poincare_spectrum(factor, 1)?;
        realized.push((axis, spec.eigenvalues[0]));
        let mut direction = vec![0.0; n];
        match m.rotation() {
            None => direction[axis] = 1.0,
            Some(r) => {
                direction[0] = r[0][axis];
                direction[1] = r[1][axis];
            }
        }
        family.push(ProductEigenfunction {
            axis,
            eigenvalue: spec.eigenvalues[0],
            func: spec.eigenfunctions[0].clone(),
            direction,
        });
    }
    if let Some((axis, lambda)) = realized.iter().find(|(_, l)| *l > 1.0 + eps_target) {
        return Err(Error::SpectrumGap(format!(
            "axis {axis} has lambda_1 = {lambda:.6} > 1 + eps_target = {:.6}; realized spectrum {realized:?}",
            1.0 + eps_target
        )));
    }
    let eps = (realized.iter().map(|(_, l)| *l).fold(f64::NEG_INFINITY, f64::max) - 1.0).max(0.0);
    Ok((family, eps))
}

/// 1D analogue of the direction estimate: the first Hermite coefficient of
/// u composed with the transport map from the Gaussian, and the alignment
/// error of the gradient with the resulting unit direction.
#[derive(Debug, Clone, Serialize)]
pub struct DirectionEstimate1D {
    pub hermite_coefficient: f64,
    pub direction: f64,
    pub alignment: f64,
    /// Some(pass) when eps < (18 k)^{-2}; None with a gate message when the
    /// precondition fails and the bound is not asserted.
    pub alignment_check: Option<bool>,
    pub gate_message: Option<String>,
}

pub fn hermite_linear_part(
    u: &GridFunction,
    m: &LogConcaveMeasure1D,
    eps: f64,
    k: usize,
) -> Result<DirectionEstimate1D> {
    let gauss = LogConcaveMeasure1D::standard_gaussian(m.n_points(), 8.0);
    let map = transport::quantile_map(&gauss, m)?;
    // first Hermite coefficient w = int xi u(T(xi)) dgamma(xi)
    let w: f64 = gauss
        .grid
        .nodes()
        .enumerate()
        .map(|(i, xi)| gauss.weights[i] * xi * u.eval(map.map.values[i]))
        .sum();
    if w.abs() < 1e-8 {
        return Err(Error::Degenerate(format!("first Hermite coefficient {w:.3e} ~ 0")));
    }
    let w_hat = w.signum();
    let grad = functionals::gradient(u);
    let alignment: f64 = grad
        .values
        .iter()
        .zip(&m.weights)
        .map(|(&g, &wt)| wt * (g - w_hat) * (g - w_hat))
        .sum();
    let gate = 1.0 / ((18 * k) as f64).powi(2);
    if eps < gate {
        Ok(DirectionEstimate1D {
            hermite_coefficient: w,
            direction: w_hat,
            alignment,
            alignment_check: Some(alignment <= 9.0 * eps + 1e-9),
            gate_message: None,
        })
    } else {
        Ok(DirectionEstimate1D {
            hermite_coefficient: w,
            direction: w_hat,
            alignment,
            alignment_check: None,
            gate_message: Some(format!("eps = {eps:.4} >= (18k)^-2 = {gate:.6}; bound not asserted")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::PotentialFamily;

    #[test]
    fn gaussian_spectrum_is_ou() {
        let m = LogConcaveMeasure1D::standard_gaussian(2001, 8.0);
        let spec = poincare_spectrum(&m, 3).unwrap();
        for (i, want) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!(
                (spec.eigenvalues[i] - want).abs() < 1e-2,
                "lambda_{} = {}",
                i + 1,
                spec.eigenvalues[i]
            );
        }
        assert!((spec.poincare_constant - 1.0).abs() < 2e-3);
        assert!(spec.residual_norms.iter().all(|&r| r < 1e-6));
        // ground eigenfunction is the coordinate, sign fixed positive
        let u1 = &spec.eigenfunctions[0];
        for (i, x) in m.grid.nodes().enumerate() {
            if x.abs() <= 4.0 {
                assert!((u1.values[i] - x).abs() < 2e-3, "u1({x}) = {}", u1.values[i]);
            }
        }
    }

    #[test]
    fn scaled_gaussian_spectrum() {
        let v = 0.8;
        let m = LogConcaveMeasure1D::from_family(PotentialFamily::Gaussian { variance: v }, 2001).unwrap();
        let spec = poincare_spectrum(&m, 2).unwrap();
        assert!((spec.eigenvalues[0] - 1.0 / v).abs() < 2e-2);
        assert!((spec.poincare_constant - v).abs() < 2e-3);
    }

    #[test]
    fn eigenfunctions_are_orthonormal_and_rayleigh_consistent() {
        let m = LogConcaveMeasure1D::from_family(PotentialFamily::Quartic { delta: 0.05 }, 1601).unwrap();
        let spec = poincare_spectrum(&m, 2).unwrap();
        // strict convexity raises the gap above 1
        assert!(spec.eigenvalues[0] > 1.0);
        assert!(spec.poincare_constant < 1.0);
        let (u1, u2) = (&spec.eigenfunctions[0], &spec.eigenfunctions[1]);
        let dot: f64 = u1
            .values
            .iter()
            .zip(&u2.values)
            .zip(&m.weights)
            .map(|((&a, &b), &w)| w * a * b)
            .sum();
        assert!(dot.abs() < 1e-8, "int u1 u2 dmu = {dot}");
        // the discrete Dirichlet form reproduces the eigenvalue exactly
        let rayleigh = dirichlet_form(u1, u1, &m);
        assert!((rayleigh - spec.eigenvalues[0]).abs() < 1e-8);
    }

    #[test]
    fn spectrum_rejects_bad_request() {
        let m = LogConcaveMeasure1D::standard_gaussian(101, 8.0);
        assert!(poincare_spectrum(&m, 0).is_err());
        assert!(poincare_spectrum(&m, 30).is_err());
    }

    #[test]
    fn near_optimal_family_reports_realized_eps() {
        let g = LogConcaveMeasure1D::standard_gaussian(1201, 8.0);
        let q = LogConcaveMeasure1D::from_family(PotentialFamily::Quartic { delta: 0.02 }, 1201).unwrap();
        let p = ProductMeasure::product(vec![g, q]).unwrap();
        let (family, eps) = near_optimal_family(&p, 2, 0.5).unwrap();
        assert_eq!(family.len(), 2);
        assert_eq!(family[0].axis, 0);
        assert!(eps > 0.0 && eps < 0.5, "eps = {eps}");
        assert_eq!(family[1].direction, vec![0.0, 1.0]);
    }

    #[test]
    fn near_optimal_family_gates_on_spectrum_gap() {
        // N(0, 0.8) has lambda_1 = 1.25, outside a 0.1 window
        let shrunk = LogConcaveMeasure1D::from_family(PotentialFamily::Gaussian { variance: 0.8 }, 1201).unwrap();
        let p = ProductMeasure::product(vec![shrunk]).unwrap();
        match near_optimal_family(&p, 1, 0.1) {
            Err(Error::SpectrumGap(_)) => {}
            other => panic!("expected SpectrumGap, got {other:?}"),
        }
    }

    #[test]
    fn rotated_family_directions_follow_rotation() {
        let g = LogConcaveMeasure1D::standard_gaussian(1201, 8.0);
        let theta = 0.6_f64;
        let p = ProductMeasure::rotated_by_angle(vec![g.clone(), g], theta).unwrap();
        let (family, eps) = near_optimal_family(&p, 1, 0.1).unwrap();
        assert!(eps < 1e-3);
        let d = &family[0].direction;
        assert!((d[0] - theta.cos()).abs() < 1e-12);
        assert!((d[1] - theta.sin()).abs() < 1e-12);
    }

    #[test]
    fn hermite_linear_part_of_coordinate() {
        let m = LogConcaveMeasure1D::standard_gaussian(2001, 8.0);
        let spec = poincare_spectrum(&m, 1).unwrap();
        let est = hermite_linear_part(&spec.eigenfunctions[0], &m, 1e-4, 1).unwrap();
        assert!((est.hermite_coefficient - 1.0).abs() < 1e-3, "w = {}", est.hermite_coefficient);
        assert_eq!(est.direction, 1.0);
        assert!(est.alignment < 1e-4, "alignment = {}", est.alignment);
        assert_eq!(est.alignment_check, Some(true));
    }

    #[test]
    fn hermite_linear_part_gates_above_threshold() {
        let m = LogConcaveMeasure1D::standard_gaussian(1201, 8.0);
        let u = GridFunction::coordinate(&m);
        let est = hermite_linear_part(&u, &m, 0.5, 1).unwrap();
        assert!(est.alignment_check.is_none());
        assert!(est.gate_message.is_some());
    }
}
