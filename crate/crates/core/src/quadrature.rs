use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1].
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss-Legendre over `[a, b]` split at the sorted `breaks` that
/// fall inside it, `panels` panels per piece.
pub(crate) fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    rule: &[(f64, f64)],
    panels: usize,
) -> f64 {
    let mut knots = vec![a];
    knots.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    knots.push(b);
    knots.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in knots.windows(2) {
        let h = (w[1] - w[0]) / panels as f64;
        if h <= 0.0 {
            continue;
        }
        for p in 0..panels {
            let lo = w[0] + p as f64 * h;
            let mid = lo + 0.5 * h;
            total += 0.5
                * h
                * rule
                    .iter()
                    .map(|&(x, wt)| wt * f(mid + 0.5 * h * x))
                    .sum::<f64>();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = gauss_legendre(8);
        let s: f64 = rule.iter().map(|r| r.1).sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 15 is exact for 8 nodes
        let v: f64 = rule.iter().map(|&(x, w)| w * x.powi(14)).sum();
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn piecewise_step() {
        let rule = gauss_legendre(4);
        let f = |x: f64| if x < 0.3 { 1.0 } else { 3.0 };
        let v = integrate_piecewise(f, 0.0, 1.0, &[0.3], &rule, 1);
        assert!((v - (0.3 + 2.1)).abs() < 1e-14);
    }
}
