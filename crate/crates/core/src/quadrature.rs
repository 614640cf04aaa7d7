//! Composite Simpson quadrature on uniform grids.

/// Simpson coefficients for `intervals` equal subintervals (even), without the
/// step factor: `1/3, 4/3, 2/3, 4/3, ..., 4/3, 1/3`.
pub fn simpson_weights(intervals: usize) -> Vec<f64> {
    assert!(
        intervals >= 2 && intervals.is_multiple_of(2),
        "Simpson needs an even interval count"
    );
    (0..=intervals).map(|i| coefficient(i, intervals)).collect()
}

#[inline]
fn coefficient(i: usize, intervals: usize) -> f64 {
    if i == 0 || i == intervals {
        1.0 / 3.0
    } else if i % 2 == 1 {
        4.0 / 3.0
    } else {
        2.0 / 3.0
    }
}

/// Composite Simpson of `intervals + 1` samples produced by `f(i)`, spacing `h`.
#[inline]
pub fn simpson_by(intervals: usize, h: f64, mut f: impl FnMut(usize) -> f64) -> f64 {
    debug_assert!(intervals >= 2 && intervals.is_multiple_of(2));
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..intervals {
        if i % 2 == 1 {
            odd += f(i);
        } else {
            even += f(i);
        }
    }
    h / 3.0 * (f(0) + f(intervals) + 4.0 * odd + 2.0 * even)
}

/// Composite Simpson of uniformly spaced samples.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    assert!(
        values.len() >= 3 && values.len() % 2 == 1,
        "Simpson needs an odd sample count >= 3"
    );
    simpson_by(values.len() - 1, h, |i| values[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_cubics() {
        let h = 0.25;
        let xs: Vec<f64> = (0..=8).map(|i| i as f64 * h).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x * x - x * x + 3.0).collect();
        // integral over [0, 2] of 2x^3 - x^2 + 3 = 8 - 8/3 + 6
        assert!((simpson(&ys, h) - (14.0 - 8.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn weights_sum_to_interval_count() {
        for n in [2, 4, 18, 100] {
            let w = simpson_weights(n);
            assert_eq!(w.len(), n + 1);
            assert!((w.iter().sum::<f64>() - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn fourth_order_on_smooth_integrand() {
        // ∫_0^1 e^x sin(3x) dx, closed form
        let exact = (1f64.exp() * (3f64.sin() - 3.0 * 3f64.cos()) + 3.0) / 10.0;
        let err = |m: usize| {
            let h = 1.0 / m as f64;
            (simpson_by(m, h, |i| {
                let x = i as f64 * h;
                x.exp() * (3.0 * x).sin()
            }) - exact)
                .abs()
        };
        let ratio = err(16) / err(32);
        assert!((12.0..=20.0).contains(&ratio), "{ratio}");
    }
}
