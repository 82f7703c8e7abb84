//! Small numerical helpers: compensated summation, normal distribution,
//! Kolmogorov–Smirnov distance, and least-squares line fits.


#[cfg(not(feature = "std"))]
use num_traits::Float;

/// Kahan–Babuska compensated sum.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Standard normal CDF via erf.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

/// CDF of `N(0, sigma2)`.
pub fn normal_cdf(x: f64, sigma2: f64) -> f64 {
    std_normal_cdf(x / sigma2.sqrt())
}

/// Density of `N(0, sigma2)`.
pub fn normal_pdf(x: f64, sigma2: f64) -> f64 {
    (-(x * x) / (2.0 * sigma2)).exp() / (core::f64::consts::TAU * sigma2).sqrt()
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples`
/// (sorted in place) and a continuous CDF.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Least-squares line `y = slope * x + intercept` with a scale-free quality
/// measure: RMS residual divided by the RMS deviation of `y` from its mean
/// (0 = perfect line, 1 = no better than a constant).
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub rel_residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = kahan_sum(xs.iter().copied()) / nf;
    let my = kahan_sum(ys.iter().copied()) / nf;
    let sxx = kahan_sum(xs.iter().map(|&x| (x - mx) * (x - mx)));
    let sxy = kahan_sum(xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)));
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = kahan_sum(
        xs.iter().zip(ys).map(|(&x, &y)| {
            let r = y - (slope * x + intercept);
            r * r
        }),
    );
    let ss_tot = kahan_sum(ys.iter().map(|&y| (y - my) * (y - my)));
    let rel_residual = if ss_tot > 0.0 { (ss_res / ss_tot).sqrt() } else { 0.0 };
    Some(LineFit { slope, intercept, rel_residual })
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    kahan_sum(xs.iter().copied()) / xs.len() as f64
}

/// Pearson correlation of two equal-length samples.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy = kahan_sum(xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)));
    let sxx = kahan_sum(xs.iter().map(|&x| (x - mx) * (x - mx)));
    let syy = kahan_sum(ys.iter().map(|&y| (y - my) * (y - my)));
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Vertex of the parabola through three points; `None` when degenerate
/// (collinear or non-concave for a maximum search).
pub fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<(f64, f64)> {
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let (y0, y1, y2) = (y[0], y[1], y[2]);
    let d0 = (x0 - x1) * (x0 - x2);
    let d1 = (x1 - x0) * (x1 - x2);
    let d2 = (x2 - x0) * (x2 - x1);
    if d0 == 0.0 || d1 == 0.0 || d2 == 0.0 {
        return None;
    }
    // Lagrange coefficients of a x^2 + b x + c.
    let a = y0 / d0 + y1 / d1 + y2 / d2;
    let b = -(y0 * (x1 + x2) / d0 + y1 * (x0 + x2) / d1 + y2 * (x0 + x1) / d2);
    if a == 0.0 {
        return None;
    }
    let xv = -b / (2.0 * a);
    let c = kahan_sum([y0 * x1 * x2 / d0, y1 * x0 * x2 / d1, y2 * x0 * x1 / d2]);
    let yv = (a * xv + b) * xv + c;
    Some((xv, yv))
}
