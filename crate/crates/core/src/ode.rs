//! Adaptive Dormand-Prince 5(4) integrator over real state vectors.
//!
//! Complex states are packed as interleaved `[re, im]`. Steps are clamped
//! so that every requested output node is hit exactly.

use crate::{Error, Result};

/// Step-size control for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct OdeOpts {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step guess (0 picks one from the span).
    pub h0: f64,
    /// Minimum step as a fraction of the span before giving up.
    pub hmin_rel: f64,
    pub max_steps: usize,
}

impl Default for OdeOpts {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h0: 0.0,
            hmin_rel: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOpts {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol * 1e-2,
            ..Self::default()
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integration statistics.
#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(x, y)` from `x0` through the monotone `nodes`,
/// returning the state at each node. `post` is applied to every accepted
/// state (for renormalization).
pub fn integrate_with<F, P>(
    mut f: F,
    mut post: P,
    x0: f64,
    y0: &[f64],
    nodes: &[f64],
    opts: OdeOpts,
) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(&mut [f64]),
{
    let n = y0.len();
    let mut out = Vec::with_capacity(nodes.len());
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut x = x0;
    let span = nodes.last().map_or(0.0, |&e| (e - x0).abs());
    if span == 0.0 {
        for _ in nodes {
            out.push(y.clone());
        }
        return Ok((out, stats));
    }
    let dir = (nodes.last().unwrap() - x0).signum();
    let hmin = opts.hmin_rel * span.max(1.0);
    let mut h = if opts.h0 > 0.0 { opts.h0 } else { span * 1e-3 };
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    f(x, &y, &mut k[0]);
    let mut steps = 0usize;
    for &target in nodes {
        while (target - x) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Integration(format!("step budget exhausted at x = {x}")));
            }
            let rem = (target - x).abs();
            let last = h >= rem;
            let hs = if last { rem } else { h } * dir;
            let stage = |coef: &[(usize, f64)], k: &Vec<Vec<f64>>, tmp: &mut Vec<f64>| {
                for i in 0..n {
                    let mut s = y[i];
                    for &(j, a) in coef {
                        s += hs * a * k[j][i];
                    }
                    tmp[i] = s;
                }
            };
            stage(&[(0, A21)], &k, &mut tmp);
            f(x + C2 * hs, &tmp, &mut k[1]);
            stage(&[(0, A31), (1, A32)], &k, &mut tmp);
            f(x + C3 * hs, &tmp, &mut k[2]);
            stage(&[(0, A41), (1, A42), (2, A43)], &k, &mut tmp);
            f(x + C4 * hs, &tmp, &mut k[3]);
            stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], &k, &mut tmp);
            f(x + C5 * hs, &tmp, &mut k[4]);
            stage(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], &k, &mut tmp);
            f(x + hs, &tmp, &mut k[5]);
            for i in 0..n {
                ynew[i] = y[i]
                    + hs * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
            }
            f(x + hs, &ynew, &mut k[6]);
            let mut err = 0.0;
            for i in 0..n {
                let e = hs
                    * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                        + E7 * k[6][i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
                err += (e / sc).powi(2);
            }
            err = (err / n as f64).sqrt();
            if !err.is_finite() {
                h *= 0.25;
                stats.rejected += 1;
                if h < hmin {
                    return Err(Error::Integration(format!("non-finite state near x = {x}")));
                }
                continue;
            }
            if err <= 1.0 {
                x = if last { target } else { x + hs };
                y.copy_from_slice(&ynew);
                post(&mut y);
                if post_changed(&y, &ynew) {
                    f(x, &y, &mut k[0]);
                } else {
                    k.swap(0, 6);
                }
                stats.accepted += 1;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = hs.abs() * fac;
                }
            } else {
                stats.rejected += 1;
                h = hs.abs() * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < hmin {
                    return Err(Error::Integration(format!("step size underflow at x = {x}")));
                }
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn post_changed(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).any(|(x, y)| x != y)
}

/// [`integrate_with`] without a post-step hook.
pub fn integrate<F>(f: F, x0: f64, y0: &[f64], nodes: &[f64], opts: OdeOpts) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_with(f, |_| {}, x0, y0, nodes, opts).map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let nodes: Vec<f64> = (1..=4).map(|k| k as f64 * 2.5).collect();
        let out = integrate(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            0.0,
            &[1.0, 0.0],
            &nodes,
            OdeOpts::default(),
        )
        .unwrap();
        for (x, y) in nodes.iter().zip(&out) {
            assert!((y[0] - x.cos()).abs() < 1e-9);
            assert!((y[1] + x.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn backward_and_zero_span() {
        let out = integrate(|_, y, d| d[0] = y[0], 1.0, &[1.0], &[0.0], OdeOpts::default()).unwrap();
        assert!((out[0][0] - (-1.0f64).exp()).abs() < 1e-10);
        let z = integrate(|_, y, d| d[0] = y[0], 1.0, &[2.0], &[1.0], OdeOpts::default()).unwrap();
        assert_eq!(z[0][0], 2.0);
    }
}
