//! Small numerical helpers shared by the feature modules.

use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation with divisor `n`.
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Pearson correlation of two equally long, fully defined slices.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    beta_reg(0.5 * df, 0.5, x).clamp(0.0, 1.0)
}

/// Golden-section search for the maximum of `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Golden-section search for the minimum of `f` on `[a, b]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, fx) = golden_max(|x| -f(x), a, b, tol);
    (x, -fx)
}

/// Ordinary least squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 for a zero-variance response.
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} abscissae for {} values", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData("line fit needs at least 2 points".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::ZeroVariance("abscissa of line fit".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
        .sum();
    let r2 = if ss_tot <= f64::EPSILON * my.abs().max(1.0) * y.len() as f64 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LineFit { slope, intercept, r2 })
}

/// `10·log10(Σ 10^(v/10))`, evaluated stably.
pub fn db_sum(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let vals: Vec<f64> = values.into_iter().collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let s: f64 = vals.iter().map(|v| 10f64.powf((v - max) / 10.0)).sum();
    Some(max + 10.0 * s.log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, fx) = golden_max(|x| -(x - 0.37).powi(2) + 2.0, 0.0, 2.0, 1e-6);
        assert!((x - 0.37).abs() < 1e-5);
        assert!((fx - 2.0).abs() < 1e-9);
        let (x, _) = golden_min(|x| (x - 5.0).abs(), 0.0, 10.0, 1e-4);
        assert!((x - 5.0).abs() < 1e-3);
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.intercept - 3.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        let flat = fit_line(&x, &[4.0; 4]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert_eq!(flat.r2, 1.0);
    }

    #[test]
    fn db_sum_of_equal_levels() {
        let s = db_sum([60.0, 60.0]).unwrap();
        assert!((s - (60.0 + 10.0 * 2f64.log10())).abs() < 1e-12);
        assert_eq!(db_sum(std::iter::empty()), None);
    }

    #[test]
    fn t_p_value_limits() {
        assert!((student_t_two_sided(0.0, 8.0) - 1.0).abs() < 1e-12);
        assert_eq!(student_t_two_sided(f64::INFINITY, 8.0), 0.0);
    }
}
