//! Central finite differences with one level of Richardson extrapolation.

/// Fourth-order central stencil for the `order`-th derivative (1..=4).
pub fn central(f: &impl Fn(f64) -> f64, x: f64, order: usize, h: f64) -> f64 {
    let v = |k: f64| f(x + k * h);
    match order {
        0 => f(x),
        1 => (-v(2.0) + 8.0 * v(1.0) - 8.0 * v(-1.0) + v(-2.0)) / (12.0 * h),
        2 => (-v(2.0) + 16.0 * v(1.0) - 30.0 * v(0.0) + 16.0 * v(-1.0) - v(-2.0)) / (12.0 * h * h),
        3 => {
            (-v(3.0) + 8.0 * v(2.0) - 13.0 * v(1.0) + 13.0 * v(-1.0) - 8.0 * v(-2.0) + v(-3.0))
                / (8.0 * h.powi(3))
        }
        4 => {
            (-v(3.0) + 12.0 * v(2.0) - 39.0 * v(1.0) + 56.0 * v(0.0) - 39.0 * v(-1.0)
                + 12.0 * v(-2.0)
                - v(-3.0))
                / (6.0 * h.powi(4))
        }
        _ => panic!("finite differences implemented up to order 4, got {order}"),
    }
}

/// [`central`] at `h` and `h/2` combined to cancel the `h^4` error term.
pub fn richardson(f: &impl Fn(f64) -> f64, x: f64, order: usize, h: f64) -> f64 {
    let coarse = central(f, x, order, h);
    let fine = central(f, x, order, 0.5 * h);
    (16.0 * fine - coarse) / 15.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_low_degree_polynomials() {
        let f = |x: f64| 3.0 * x.powi(4) - x.powi(3) + 2.0 * x - 1.0;
        let x: f64 = 0.7;
        let exact = [
            12.0 * x.powi(3) - 3.0 * x.powi(2) + 2.0,
            36.0 * x * x - 6.0 * x,
            72.0 * x - 6.0,
            72.0,
        ];
        for (k, e) in exact.iter().enumerate() {
            let d = richardson(&f, x, k + 1, 1e-2);
            assert!((d - e).abs() < 1e-6 * (1.0 + e.abs()), "order {}: {d} vs {e}", k + 1);
        }
    }

    #[test]
    fn converges_on_transcendental() {
        let f = |x: f64| x.sin();
        for order in 1..=4 {
            let exact = match order % 4 {
                1 => 1.0f64.cos(),
                2 => -1.0f64.sin(),
                3 => -1.0f64.cos(),
                _ => 1.0f64.sin(),
            };
            let d = richardson(&f, 1.0, order, 0.05);
            assert!((d - exact).abs() < 1e-7, "order {order}: {d} vs {exact}");
        }
    }
}
