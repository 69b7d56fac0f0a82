//! Value-list syntax shared by `--rates` and `--grid`.
//!
//! * `a,b,c` explicit values
//! * `lo:hi:N` or `lo:hi:linN` N evenly spaced values, endpoints included
//! * `lo:hi:logN` N log-spaced values

pub fn parse_values(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("cannot parse {s:?} as a number"))
    };
    if !spec.contains(':') {
        let values: Vec<f64> = spec.split(',').map(num).collect::<Result<_, _>>()?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err("values must be finite".into());
        }
        return Ok(values);
    }
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(format!(
            "expected lo:hi:N, lo:hi:linN or lo:hi:logN, got {spec:?}"
        ));
    };
    let (lo, hi) = (num(lo)?, num(hi)?);
    let (log, count) = match n.trim() {
        s if s.starts_with("log") => (true, &s[3..]),
        s if s.starts_with("lin") => (false, &s[3..]),
        s => (false, s),
    };
    let count: usize = count
        .parse()
        .map_err(|_| format!("cannot parse point count in {spec:?}"))?;
    if count < 2 {
        return Err(format!("need at least 2 points, got {count}"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("need finite lo < hi, got {lo} and {hi}"));
    }
    if log && lo <= 0.0 {
        return Err("log spacing needs lo > 0".into());
    }
    let last = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let f = i as f64 / last;
            match (i, log) {
                (0, _) => lo,
                (i, _) if i == count - 1 => hi,
                (_, true) => lo * (hi / lo).powf(f),
                (_, false) => lo + (hi - lo) * f,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_spacing() {
        let v = parse_values("0.1:1000:log40").unwrap();
        assert_eq!(v.len(), 40);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[39], 1000.0);
        let ratio = v[1] / v[0];
        assert!(v
            .windows(2)
            .all(|w| (w[1] / w[0] / ratio - 1.0).abs() < 1e-12));
    }

    #[test]
    fn linear_and_lists() {
        assert_eq!(parse_values("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_values("1:2:lin3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_values("5, 1e-3").unwrap(), vec![5.0, 1e-3]);
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in ["", "1:2", "2:1:5", "0:1:log5", "1:2:1", "a,b", "1:2:logx"] {
            assert!(parse_values(bad).is_err(), "{bad}");
        }
    }
}
