//! A-trous dyadic wavelet transform with quadratic-spline filters.
//!
//! Low-pass `h = [1, 3, 3, 1] / 8`, high-pass `g = 2 * [1, -1]`. Level `j`
//! uses both filters dilated by `2^(j-1)`. The detail signal at scale `2^j`
//! is shifted so that an isolated impulse produces its response centred on
//! the impulse; boundaries use symmetric extension.

const LOW_PASS: [f64; 4] = [0.125, 0.375, 0.375, 0.125];
const HIGH_PASS: [f64; 2] = [2.0, -2.0];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("wavelet scale must be a power of two >= 2, got {0}")]
pub struct BadScale(pub u32);

fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * n - 2 - i;
    }
    i.clamp(0, n - 1) as usize
}

fn dilated(x: &[f64], taps: &[f64], step: usize) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|t| {
            taps.iter()
                .enumerate()
                .map(|(k, f)| f * x[reflect(t as i64 - (k * step) as i64, n)])
                .sum()
        })
        .collect()
}

/// Detail coefficients at dyadic `scale` (2, 4, 8, ...), one per sample.
pub fn detail(samples: &[i32], scale: u32) -> Result<Vec<f64>, BadScale> {
    if scale < 2 || !scale.is_power_of_two() {
        return Err(BadScale(scale));
    }
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let levels = scale.trailing_zeros() as usize;
    let mut approx: Vec<f64> = samples.iter().map(|&s| f64::from(s)).collect();
    let mut support = 0usize;
    for j in 1..levels {
        let step = 1 << (j - 1);
        approx = dilated(&approx, &LOW_PASS, step);
        support += 3 * step;
    }
    let step = 1 << (levels - 1);
    let d = dilated(&approx, &HIGH_PASS, step);
    support += step;
    let shift = support / 2;
    let n = d.len();
    Ok((0..n).map(|t| d[(t + shift).min(n - 1)]).collect())
}

/// Squared detail coefficients.
pub fn energy(samples: &[i32], scale: u32) -> Result<Vec<f64>, BadScale> {
    Ok(detail(samples, scale)?.into_iter().map(|v| v * v).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_response_is_centred() {
        let mut x = vec![0; 64];
        x[32] = 8;
        let d = detail(&x, 4).unwrap();
        // (h * g2) for an impulse of 8 is 2 * [1, 3, 2, -2, -3, -1].
        assert_eq!(&d[30..36], &[2.0, 6.0, 4.0, -4.0, -6.0, -2.0]);
        let e = energy(&x, 4).unwrap();
        let peak = e
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!((peak.0 as i64 - 32).abs() <= 1);
    }

    #[test]
    fn constant_signal_has_zero_detail() {
        let d = detail(&[7; 40], 8).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn scale_must_be_dyadic() {
        assert_eq!(detail(&[0; 4], 3), Err(BadScale(3)));
        assert_eq!(detail(&[0; 4], 1), Err(BadScale(1)));
        assert!(detail(&[], 2).unwrap().is_empty());
    }
}
