//! Least-squares fits, crossing solvers, the gate-error combination and the
//! threshold set.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Model {
    /// `c·ε²`
    Quadratic,
    /// `c·ε`
    Linear,
    /// `−A·t + B`, coefficients `[A, B]`.
    Line,
    /// Polynomial without constant term, coefficients for `ε¹..ε^d`.
    SlopePoly(u8),
    /// `c0 + c1·ε + c2·ε²`, the misfit diagnostic.
    FreeQuadratic,
}

impl Model {
    pub fn name(&self) -> String {
        match self {
            Model::Quadratic => "quadratic".into(),
            Model::Linear => "linear".into(),
            Model::Line => "line".into(),
            Model::SlopePoly(d) => format!("slope_poly{d}"),
            Model::FreeQuadratic => "free_quadratic".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Model, Error> {
        Ok(match s {
            "quadratic" => Model::Quadratic,
            "linear" => Model::Linear,
            "line" => Model::Line,
            "slope_poly2" => Model::SlopePoly(2),
            "slope_poly3" => Model::SlopePoly(3),
            "free_quadratic" => Model::FreeQuadratic,
            other => return Err(Error::Parse(format!("unknown model {other:?}"))),
        })
    }

    /// Names of the coefficients, in the order of [`FitResult::coefficients`].
    pub fn params(&self) -> Vec<String> {
        match self {
            Model::Quadratic => vec!["c2".into()],
            Model::Linear => vec!["c1".into()],
            Model::Line => vec!["A".into(), "B".into()],
            Model::SlopePoly(d) => (1..=*d).map(|k| format!("c{k}")).collect(),
            Model::FreeQuadratic => vec!["c0".into(), "c1".into(), "c2".into()],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: Model,
    pub coefficients: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Unweighted residual sum of squares.
    pub rss: f64,
    pub points: usize,
    /// Weighted coefficient of determination.
    pub r2: f64,
}

impl FitResult {
    /// Evaluates the fitted model at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let c = &self.coefficients;
        match self.model {
            Model::Quadratic => c[0] * x * x,
            Model::Linear => c[0] * x,
            Model::Line => -c[0] * x + c[1],
            Model::SlopePoly(_) => c
                .iter()
                .enumerate()
                .map(|(k, ck)| ck * x.powi(k as i32 + 1))
                .sum(),
            Model::FreeQuadratic => c[0] + c[1] * x + c[2] * x * x,
        }
    }
}

/// Binomial standard error of `k/n`; a zero (or full) count uses half a
/// count so the point keeps finite weight.
pub fn binomial_stderr(k: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let nf = n as f64;
    let k = (k as f64).clamp(0.5, nf - 0.5);
    let p = k / nf;
    (p * (1.0 - p) / nf).sqrt()
}

/// Weighted least squares `y ≈ Σ c_k x^{p_k}` with optional per-point σ.
///
/// With σ given the covariance is `(XᵀWX)⁻¹`; without it the covariance is
/// scaled by the residual variance.
fn weighted_poly(
    points: &[(f64, f64, Option<f64>)],
    powers: &[i32],
    model: Model,
) -> Result<FitResult, Error> {
    let n = points.len();
    let k = powers.len();
    if n < k + 1 {
        return Err(Error::Numerical(format!(
            "{} points cannot fit {k} coefficients",
            n
        )));
    }
    for &(x, y, s) in points {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Numerical(format!("non-finite point ({x}, {y})")));
        }
        if let Some(s) = s {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Numerical(format!("sigma {s} must be positive")));
            }
        }
    }
    let w: Vec<f64> = points
        .iter()
        .map(|&(_, _, s)| s.map_or(1.0, |s| 1.0 / (s * s)))
        .collect();
    let mut a = DMatrix::from_fn(n, k, |i, j| w[i].sqrt() * points[i].0.powi(powers[j]));
    let b = DVector::from_fn(n, |i, _| w[i].sqrt() * points[i].1);

    // column scaling keeps ε^3 columns from wrecking the conditioning
    let scale: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    if scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return Err(Error::Numerical("degenerate design column".into()));
    }
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin.is_nan() || smin <= smax * 1e-12 {
        return Err(Error::Numerical(
            "degenerate design (rank deficient)".into(),
        ));
    }
    let sol = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let coefficients: Vec<f64> = (0..k).map(|j| sol[j] / scale[j]).collect();

    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut cov = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for m in 0..k {
                let s = svd.singular_values[m];
                acc += v_t[(m, i)] * v_t[(m, j)] / (s * s);
            }
            cov[(i, j)] = acc / (scale[i] * scale[j]);
        }
    }

    let predict = |x: f64| -> f64 {
        powers
            .iter()
            .zip(&coefficients)
            .map(|(p, c)| c * x.powi(*p))
            .sum()
    };
    let mut rss = 0.0;
    let mut wrss = 0.0;
    let wsum: f64 = w.iter().sum();
    let ybar = points.iter().zip(&w).map(|(p, wi)| wi * p.1).sum::<f64>() / wsum;
    let mut wtot = 0.0;
    for (p, wi) in points.iter().zip(&w) {
        let r = p.1 - predict(p.0);
        rss += r * r;
        wrss += wi * r * r;
        wtot += wi * (p.1 - ybar).powi(2);
    }
    let sigma_known = points.iter().all(|p| p.2.is_some());
    let var_scale = if sigma_known {
        1.0
    } else {
        wrss / (n - k) as f64
    };
    let stderr = (0..k).map(|j| (cov[(j, j)] * var_scale).sqrt()).collect();
    let r2 = if wtot > 0.0 { 1.0 - wrss / wtot } else { 1.0 };

    let mut fit = FitResult {
        model,
        coefficients,
        stderr,
        rss,
        points: n,
        r2,
    };
    if model == Model::Line {
        fit.coefficients[0] = -fit.coefficients[0];
    }
    if fit.coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical(
            "fit produced a non-finite coefficient".into(),
        ));
    }
    Ok(fit)
}

fn distinct_x(points: &[(f64, f64, f64)]) -> Result<(), Error> {
    let first = points.first().map(|p| p.0);
    if points.len() >= 2 && points.iter().all(|p| Some(p.0) == first) {
        return Err(Error::Numerical("all abscissae equal".into()));
    }
    Ok(())
}

/// Weighted fit of `y = c·ε^degree` from `(ε, y, σ)` points.
pub fn fit_through_origin(points: &[(f64, f64, f64)], degree: u8) -> Result<FitResult, Error> {
    let model = match degree {
        1 => Model::Linear,
        2 => Model::Quadratic,
        d => return Err(Error::InvalidInput(format!("degree {d} not in {{1,2}}"))),
    };
    distinct_x(points)?;
    let pts: Vec<_> = points.iter().map(|&(x, y, s)| (x, y, Some(s))).collect();
    weighted_poly(&pts, &[degree as i32], model)
}

/// Weighted `c0 + c1·ε + c2·ε²`, reported next to the through-origin fit.
pub fn fit_free_quadratic(points: &[(f64, f64, f64)]) -> Result<FitResult, Error> {
    distinct_x(points)?;
    let pts: Vec<_> = points.iter().map(|&(x, y, s)| (x, y, Some(s))).collect();
    weighted_poly(&pts, &[0, 1, 2], Model::FreeQuadratic)
}

/// Weighted line through `(t, F, σ)`; returns `[A, B]` with slope `−A`.
pub fn fit_line(series: &[(f64, f64, f64)]) -> Result<FitResult, Error> {
    if series.len() < 3 {
        return Err(Error::Numerical(format!(
            "line fit needs 3 points, got {}",
            series.len()
        )));
    }
    distinct_x(series)?;
    let pts: Vec<_> = series.iter().map(|&(x, y, s)| (x, y, Some(s))).collect();
    weighted_poly(&pts, &[1, 0], Model::Line)
}

/// Unweighted polynomial in ε of degree 2 or 3 with zero constant term.
pub fn fit_slope_poly(points: &[(f64, f64)], degree: u8) -> Result<FitResult, Error> {
    if !(2..=3).contains(&degree) {
        return Err(Error::InvalidInput(format!(
            "degree {degree} not in {{2,3}}"
        )));
    }
    let pts: Vec<_> = points.iter().map(|&(x, y)| (x, y, None)).collect();
    let powers: Vec<i32> = (1..=degree as i32).collect();
    weighted_poly(&pts, &powers, Model::SlopePoly(degree))
}

pub const DEFAULT_BRACKET: (f64, f64) = (1e-8, 1e-1);

/// Root of `f − g` on `bracket` by bisection to relative tolerance 1e-10.
pub fn crossing(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    bracket: (f64, f64),
) -> Result<f64, Error> {
    let h = |x: f64| f(x) - g(x);
    let (mut lo, mut hi) = bracket;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::Numerical(format!("empty bracket ({lo}, {hi})")));
    }
    let (mut hlo, hhi) = (h(lo), h(hi));
    if hlo == 0.0 {
        return Ok(lo);
    }
    if hhi == 0.0 {
        return Ok(hi);
    }
    if hlo.is_nan() || hhi.is_nan() || hlo.signum() == hhi.signum() {
        return Err(Error::Numerical(format!(
            "no sign change on ({lo:e}, {hi:e})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-10 * mid.abs() {
            return Ok(mid);
        }
        let hm = h(mid);
        if hm == 0.0 {
            return Ok(mid);
        }
        if hm.signum() == hlo.signum() {
            lo = mid;
            hlo = hm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn inv_c(ratio_c: f64) -> f64 {
    if ratio_c.is_infinite() {
        0.0
    } else {
        1.0 / ratio_c
    }
}

/// `G₁ = (4/9)(91 + 98/C + 21/C²) + (14/3)(2 + 1/C)·D₁ + D₂`.
pub fn g1_combine(ratio_c: f64, d1: f64, d2: f64) -> f64 {
    let ic = inv_c(ratio_c);
    (4.0 / 9.0) * (91.0 + 98.0 * ic + 21.0 * ic * ic) + (14.0 / 3.0) * (2.0 + ic) * d1 + d2
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TableRow {
    pub ratio_c: f64,
    pub d2: f64,
    pub d1: f64,
    pub g1: f64,
}

/// Published fit coefficients per `C = ε/γ`.
pub const REFERENCE_TABLE: [TableRow; 7] = [
    TableRow {
        ratio_c: 0.3,
        d2: 81440.2,
        d1: 489.0,
        g1: 93900.2,
    },
    TableRow {
        ratio_c: 0.5,
        d2: 57385.0,
        d1: 409.6,
        g1: 65195.7,
    },
    TableRow {
        ratio_c: 0.8,
        d2: 49597.1,
        d1: 364.1,
        g1: 55228.7,
    },
    TableRow {
        ratio_c: 1.0,
        d2: 43843.2,
        d1: 343.8,
        g1: 48749.7,
    },
    TableRow {
        ratio_c: 1.5,
        d2: 40618.0,
        d1: 331.3,
        g1: 44814.5,
    },
    TableRow {
        ratio_c: 2.0,
        d2: 38286.5,
        d1: 324.4,
        g1: 42135.7,
    },
    TableRow {
        ratio_c: f64::INFINITY,
        d2: 33961.0,
        d1: 290.8,
        g1: 36715.6,
    },
];

pub const REFERENCE_TABLE_VERSION: &str = "table1-v1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdSet {
    pub ratio_c: f64,
    pub eps_pth: f64,
    /// Small-ε closed form `40/(3D₂)`, for comparison with `eps_pth`.
    pub eps_pth_approx: f64,
    pub eps_sth: Option<f64>,
    pub eps_mth: f64,
    pub eps_g1: f64,
    pub eps_thg1: f64,
    pub eps_thg2: f64,
}

pub fn naked_fidelity(epsilon: f64, t: u32) -> f64 {
    (1.0 - 2.0 * epsilon / 3.0).powi(t as i32)
}

pub fn thresholds_from(
    row: &TableRow,
    slope_fit: Option<&FitResult>,
) -> Result<ThresholdSet, Error> {
    if !(row.d2 > 0.0 && row.g1 > 0.0 && row.d1 >= 0.0) {
        return Err(Error::InvalidInput(format!("invalid table row {row:?}")));
    }
    let d2 = row.d2;
    let eps_pth = crossing(
        |e| d2 * e * e,
        |e| 1.0 - naked_fidelity(e, 20),
        DEFAULT_BRACKET,
    )?;
    let eps_sth = match slope_fit {
        Some(fit) => Some(crossing(
            |e| fit.eval(e),
            |e| 2.0 * e / 3.0,
            DEFAULT_BRACKET,
        )?),
        None => None,
    };
    let eps_thg1 = 1.0 / row.g1;
    Ok(ThresholdSet {
        ratio_c: row.ratio_c,
        eps_pth,
        eps_pth_approx: 40.0 / (3.0 * d2),
        eps_sth,
        eps_mth: 1.0 / d2,
        eps_g1: 2.0 * (2.0 + inv_c(row.ratio_c)) / (3.0 * row.g1),
        eps_thg1,
        eps_thg2: eps_thg1 / 2.0,
    })
}

/// Fidelity after one error-free recovery of a block with independent
/// per-qubit error `η`: `(1−η)⁷ + 7η(1−η)⁶`.
pub fn perfect_recovery_reference(eta: f64) -> f64 {
    (1.0 - eta).powi(7) + 7.0 * eta * (1.0 - eta).powi(6)
}

/// Failure probability of an unencoded one-qubit gate: `(2ε/3)(2 + 1/C)`.
pub fn naked_gate_reference(epsilon: f64, ratio_c: f64) -> f64 {
    2.0 * epsilon / 3.0 * (2.0 + inv_c(ratio_c))
}

/// Keeps the first `digits` significant figures of `x`, dropping the rest.
pub fn truncate_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = x.abs().log10().floor() as i32 - digits + 1;
    let scale = 10f64.powi(e);
    // nudge guards against 2.9 being stored as 2.8999…
    (x / scale * (1.0 + 1e-12)).trunc() * scale
}
