//! Least-squares fits of `log y` against `log x`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateFitError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("point ({0}, {1}) has a nonpositive or non-finite coordinate")]
    NonPositive(f64, f64),
    #[error("all x values coincide")]
    CollinearX,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub r_squared: f64,
    /// The fitted points in canonical (sorted) order.
    pub points: Vec<(f64, f64)>,
}

/// Ordinary least squares on `(ln x, ln y)`.
///
/// Points are sorted before fitting, so the result does not depend on the
/// input order. Logs of `y` are taken relative to the first sorted point,
/// which makes the slope bit-identical under scaling `y` by a power of two.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<RateFit, RateFitError> {
    if points.len() < 3 {
        return Err(RateFitError::TooFewPoints(points.len()));
    }
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()) {
            return Err(RateFitError::NonPositive(x, y));
        }
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let y_ref = pts[0].1;
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| (p.1 / y_ref).ln()).collect();
    let n = pts.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(RateFitError::CollinearX);
    }
    let slope = sxy / sxx;
    let rel_intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - rel_intercept - slope * x;
            r * r
        })
        .sum();
    let stderr_slope = (sse / (n - 2.0) / sxx).sqrt();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(RateFit {
        slope,
        intercept: rel_intercept + y_ref.ln(),
        stderr_slope,
        r_squared,
        points: pts,
    })
}

/// `|slope - target| ≤ tol + 2·stderr`.
pub fn compare_exponent(fit: &RateFit, target: f64, tol: f64) -> bool {
    (fit.slope - target).abs() <= tol + 2.0 * fit.stderr_slope
}
