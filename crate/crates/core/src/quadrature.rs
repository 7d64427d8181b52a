//! Small quadrature helpers shared by the radial integrals.

/// Composite Simpson rule over equally spaced samples. An even number of
/// samples closes with a trapezoid panel on the last interval.
pub fn simpson(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => return 0.0,
        2 => return 0.5 * dx * (values[0] + values[1]),
        _ => {}
    }
    let (body, tail) = if n % 2 == 1 {
        (n, 0.0)
    } else {
        (n - 1, 0.5 * dx * (values[n - 2] + values[n - 1]))
    };
    let mut s = values[0] + values[body - 1];
    for (i, v) in values[1..body - 1].iter().enumerate() {
        s += if i % 2 == 0 { 4.0 * v } else { 2.0 * v };
    }
    s * dx / 3.0 + tail
}

/// Uniform grid in `ln r` on `[r_min, r_max]` with `points` nodes.
#[derive(Debug, Clone)]
pub struct LogGrid {
    pub r: Vec<f64>,
    /// Spacing in `ln r`.
    pub step: f64,
}

impl LogGrid {
    pub fn new(r_min: f64, r_max: f64, points: usize) -> Self {
        assert!(r_min > 0.0 && r_max > r_min && points >= 2);
        let (a, b) = (r_min.ln(), r_max.ln());
        let step = (b - a) / (points - 1) as f64;
        let r = (0..points).map(|i| (a + step * i as f64).exp()).collect();
        Self { r, step }
    }

    /// `∫ f(r) dr` over the grid, integrating `r f(r)` in `ln r`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let v: Vec<f64> = self.r.iter().map(|&r| r * f(r)).collect();
        simpson(&v, self.step)
    }

    /// `∫ 4π r² g(r) dr` for a spherically symmetric density.
    pub fn integrate_spherical(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.integrate(|r| 4.0 * std::f64::consts::PI * r * r * g(r))
    }

    /// Running integral `∫_{r_min}^{r_i} f(r) dr` at every node (trapezoid in `ln r`).
    pub fn cumulative(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let v: Vec<f64> = self.r.iter().map(|&r| r * f(r)).collect();
        let mut out = Vec::with_capacity(v.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in v.windows(2) {
            acc += 0.5 * self.step * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let dx = 0.1;
        let v: Vec<f64> = (0..11).map(|i| (i as f64 * dx).powi(3)).collect();
        assert!((simpson(&v, dx) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn log_grid_gaussian_moment() {
        let g = LogGrid::new(1e-8, 20.0, 801);
        let val = g.integrate_spherical(|r| (-r * r).exp());
        assert!((val - std::f64::consts::PI.powf(1.5)).abs() < 1e-10);
    }
}
