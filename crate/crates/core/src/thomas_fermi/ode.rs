//! Adaptive Dormand-Prince 5(4) integrator with cubic Hermite dense output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step magnitude.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-12,
            atol: 1e-14,
            h_max: 0.02,
            max_steps: 2_000_000,
        }
    }
}

/// Accepted nodes of an integration, with derivatives for interpolation.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; D]>,
    pub dy: Vec<[f64; D]>,
    /// Whether the stop predicate fired before the end point.
    pub stopped: bool,
}

impl<const D: usize> Trajectory<D> {
    pub fn last(&self) -> (f64, [f64; D]) {
        (*self.t.last().unwrap(), *self.y.last().unwrap())
    }

    /// Cubic Hermite interpolation on segment `k` (between nodes `k` and `k+1`).
    pub fn hermite_on(&self, k: usize, t: f64) -> ([f64; D], [f64; D]) {
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s),
            s * (1.0 - s) * (1.0 - s),
            s * s * (3.0 - 2.0 * s),
            s * s * (s - 1.0),
        );
        let (d00, d10, d01, d11) = (
            6.0 * s * (s - 1.0) / h,
            (1.0 - s) * (1.0 - 3.0 * s),
            -6.0 * s * (s - 1.0) / h,
            s * (3.0 * s - 2.0),
        );
        let mut y = [0.0; D];
        let mut dy = [0.0; D];
        for i in 0..D {
            let (y0, y1, f0, f1) = (self.y[k][i], self.y[k + 1][i], self.dy[k][i], self.dy[k + 1][i]);
            y[i] = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1;
            dy[i] = d00 * y0 + d10 * f0 + d01 * y1 + d11 * f1;
        }
        (y, dy)
    }

    /// Segment index containing `t` for a trajectory in either direction.
    pub fn segment(&self, t: f64) -> usize {
        let n = self.t.len();
        let ascending = self.t[n - 1] >= self.t[0];
        let k = if ascending {
            self.t.partition_point(|&v| v <= t)
        } else {
            self.t.partition_point(|&v| v >= t)
        };
        k.clamp(1, n - 1) - 1
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction), stopping
/// early at the first accepted node where `stop` returns true.
pub fn integrate<const D: usize>(
    f: impl Fn(f64, &[f64; D]) -> [f64; D],
    t0: f64,
    y0: [f64; D],
    t1: f64,
    opts: &OdeOptions,
    mut stop: impl FnMut(f64, &[f64; D]) -> bool,
) -> Result<Trajectory<D>> {
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k0 = f(t, &y);
    let mut traj = Trajectory {
        t: vec![t],
        y: vec![y],
        dy: vec![k0],
        stopped: false,
    };
    let mut h = (1e-4 * span).clamp(1e-12, opts.h_max);
    for _ in 0..opts.max_steps {
        if (t1 - t) * dir <= 0.0 {
            return Ok(traj);
        }
        h = h.min((t1 - t).abs()).min(opts.h_max);
        let mut k = [[0.0; D]; 7];
        k[0] = k0;
        for s in 1..7 {
            let mut ys = y;
            for (i, v) in ys.iter_mut().enumerate() {
                for (j, kj) in k.iter().enumerate().take(s) {
                    *v += dir * h * A[s][j] * kj[i];
                }
            }
            k[s] = f(t + dir * h * C[s], &ys);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for i in 0..D {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][i];
                d4 += B4[s] * k[s][i];
            }
            y5[i] = y[i] + dir * h * d5;
            let scale = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
            err = err.max((dir * h * (d5 - d4)).abs() / scale);
        }
        if !err.is_finite() {
            h *= 0.25;
            if h < 1e-14 * span.max(1.0) {
                return Err(Error::Internal("ODE integration produced non-finite values".into()));
            }
            continue;
        }
        if err <= 1.0 {
            t += dir * h;
            y = y5;
            k0 = k[6];
            traj.t.push(t);
            traj.y.push(y);
            traj.dy.push(k0);
            if stop(t, &y) {
                traj.stopped = true;
                return Ok(traj);
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 * span.max(1.0) {
            return Err(Error::Internal("ODE step size underflow".into()));
        }
    }
    Err(Error::Internal("ODE integration exceeded the step budget".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_oscillator() {
        let traj = integrate(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 2.0, &OdeOptions::default(), |_, _| false).unwrap();
        let (t, y) = traj.last();
        assert_eq!(t, 2.0);
        assert!((y[0] - 2f64.exp()).abs() < 1e-10);

        let opts = OdeOptions {
            h_max: 1.0,
            ..Default::default()
        };
        let traj = integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], -3.0, &opts, |_, _| false).unwrap();
        let (_, y) = traj.last();
        assert!((y[0] - (-3f64).sin()).abs() < 1e-10);
        let k = traj.segment(-1.234);
        let (yi, dyi) = traj.hermite_on(k, -1.234);
        assert!((yi[0] - (-1.234f64).sin()).abs() < 1e-7);
        assert!((dyi[0] - (-1.234f64).cos()).abs() < 1e-6);
    }

    #[test]
    fn stop_predicate() {
        let traj = integrate(|_, _: &[f64; 1]| [-1.0], 0.0, [1.0], 5.0, &OdeOptions::default(), |_, y| y[0] < 0.0).unwrap();
        assert!(traj.stopped);
        assert!(traj.last().1[0] < 0.0);
    }
}
