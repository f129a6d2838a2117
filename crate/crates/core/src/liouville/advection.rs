//! Dimensionally split second-order upwind TVD transport with the van Leer limiter.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Default CFL bound for every sweep.
pub const CFL_MAX: f64 = 0.45;

/// A transported value. Complex values are limited component-wise.
pub trait Cell:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn van_leer(a: Self, b: Self) -> Self;
}

#[inline]
pub fn van_leer(a: f64, b: f64) -> f64 {
    let p = a * b;
    // evaluated unconditionally so the select vectorises
    let r = 2.0 * p / (a + b);
    if p > 0.0 {
        r
    } else {
        0.0
    }
}

impl Cell for f64 {
    #[inline]
    fn van_leer(a: f64, b: f64) -> f64 {
        van_leer(a, b)
    }
}

impl Cell for C64 {
    #[inline]
    fn van_leer(a: C64, b: C64) -> C64 {
        C64::new(van_leer(a.re, b.re), van_leer(a.im, b.im))
    }
}

/// Boundary treatment on one side of a sweep.
#[derive(Clone, Copy)]
pub enum Side<'a, T> {
    /// Zero-gradient ghost cells.
    Outflow,
    /// Two ghost layers per line, laid out `[outer][layer][inner]`; layer 0 touches the boundary.
    Given(&'a [T]),
}

/// Splits `shape` around `axis` into `(outer, n, inner)`.
pub fn split_shape(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Evaluates `f` on the multi-index of every line along `axis` (axis coordinate 0),
/// returning values laid out `[outer][inner]`.
pub fn line_values(shape: &[usize], axis: usize, f: impl Fn(&[usize]) -> f64) -> Vec<f64> {
    let (outer, _, inner) = split_shape(shape, axis);
    let mut idx = vec![0usize; shape.len()];
    let mut out = Vec::with_capacity(outer * inner);
    for o in 0..outer {
        let mut rem = o;
        for k in (0..axis).rev() {
            idx[k] = rem % shape[k];
            rem /= shape[k];
        }
        for j in 0..inner {
            let mut rem = j;
            for k in (axis + 1..shape.len()).rev() {
                idx[k] = rem % shape[k];
                rem /= shape[k];
            }
            out.push(f(&idx));
        }
    }
    out
}

/// Largest `|v| dt / h` over `velocity`.
pub fn cfl_number(velocity: &[f64], dt: f64, h: f64) -> f64 {
    velocity.iter().fold(0.0f64, |m, v| m.max(v.abs())) * dt / h
}

/// One conservative sweep along `axis` of the row-major array `data`.
///
/// `velocity` holds one speed per line (`[outer][inner]`); it is constant along
/// each line, so the face speed equals the cell speed. When `faces` is non-empty the
/// physical fluxes at those face indices (face `i` is the left face of cell `i`)
/// are returned laid out `[outer][face][inner]`.
#[allow(clippy::too_many_arguments)]
pub fn sweep<T: Cell>(
    data: &mut [T],
    shape: &[usize],
    axis: usize,
    velocity: &[f64],
    dt: f64,
    h: f64,
    left: Side<T>,
    right: Side<T>,
    faces: &[usize],
) -> Result<Vec<T>> {
    let (outer, n, inner) = split_shape(shape, axis);
    debug_assert_eq!(data.len(), outer * n * inner);
    debug_assert_eq!(velocity.len(), outer * inner);
    let cfl = cfl_number(velocity, dt, h);
    if !(cfl <= CFL_MAX) {
        return Err(Error::Cfl {
            axis,
            number: cfl,
            limit: CFL_MAX,
        });
    }
    let mut record = vec![T::default(); outer * faces.len() * inner];
    if cfl == 0.0 {
        return Ok(record);
    }
    let lambda = dt / h;
    let block = n * inner;
    let run = |o: usize, chunk: &mut [T], rec: &mut [T]| {
        let vel = &velocity[o * inner..(o + 1) * inner];
        // padded copy of the line block; padded row k holds cell k - 2
        let mut pad = Vec::with_capacity((n + 4) * inner);
        let ghost = |side: &Side<T>, layer: usize, edge: usize| -> Vec<T> {
            match side {
                Side::Outflow => chunk[edge * inner..(edge + 1) * inner].to_vec(),
                Side::Given(g) => g[(o * 2 + layer) * inner..(o * 2 + layer + 1) * inner].to_vec(),
            }
        };
        pad.extend(ghost(&left, 1, 0));
        pad.extend(ghost(&left, 0, 0));
        pad.extend_from_slice(chunk);
        pad.extend(ghost(&right, 0, n - 1));
        pad.extend(ghost(&right, 1, n - 1));

        // runs of equal upwind direction across the line block
        let mut runs: Vec<(usize, usize, bool)> = Vec::new();
        for (j, &a) in vel.iter().enumerate() {
            match runs.last_mut() {
                Some(r) if r.2 == (a >= 0.0) => r.1 = j + 1,
                _ => runs.push((j, j + 1, a >= 0.0)),
            }
        }
        // flux through face f (left face of cell f)
        let flux = |f: usize, out: &mut [T]| {
            for &(lo, hi, forward) in &runs {
                let base = if forward { f } else { f + 1 };
                let um = &pad[base * inner + lo..base * inner + hi];
                let u0 = &pad[(base + 1) * inner + lo..(base + 1) * inner + hi];
                let up = &pad[(base + 2) * inner + lo..(base + 2) * inner + hi];
                let (v, out) = (&vel[lo..hi], &mut out[lo..hi]);
                if forward {
                    for j in 0..hi - lo {
                        let (a, c) = (v[j], u0[j]);
                        out[j] = (c + T::van_leer(c - um[j], up[j] - c) * (0.5 * (1.0 - a * lambda))) * a;
                    }
                } else {
                    for j in 0..hi - lo {
                        let (a, c) = (v[j], u0[j]);
                        out[j] = (c - T::van_leer(c - um[j], up[j] - c) * (0.5 * (1.0 + a * lambda))) * a;
                    }
                }
            }
        };
        let record = |f: usize, row: &[T], rec: &mut [T]| {
            for (k, _) in faces.iter().enumerate().filter(|(_, &g)| g == f) {
                rec[k * inner..(k + 1) * inner].copy_from_slice(row);
            }
        };
        if inner == 1 && faces.is_empty() {
            // single line with one speed: hoist the upwind choice out of the loop
            let a = vel[0];
            let nu = a * lambda;
            let base = if a >= 0.0 { 0 } else { 1 };
            let (um, u0, up) = (&pad[base..base + n + 1], &pad[base + 1..base + n + 2], &pad[base + 2..base + n + 3]);
            let mut flux = vec![T::default(); n + 1];
            if a >= 0.0 {
                for f in 0..=n {
                    let c = u0[f];
                    flux[f] = (c + T::van_leer(c - um[f], up[f] - c) * (0.5 * (1.0 - nu))) * a;
                }
            } else {
                for f in 0..=n {
                    let c = u0[f];
                    flux[f] = (c - T::van_leer(c - um[f], up[f] - c) * (0.5 * (1.0 + nu))) * a;
                }
            }
            for (i, c) in chunk.iter_mut().enumerate() {
                *c = *c - (flux[i + 1] - flux[i]) * lambda;
            }
            return;
        }
        let mut prev = vec![T::default(); inner];
        let mut next = vec![T::default(); inner];
        flux(0, &mut prev);
        record(0, &prev, rec);
        for i in 0..n {
            flux(i + 1, &mut next);
            record(i + 1, &next, rec);
            let row = &mut chunk[i * inner..(i + 1) * inner];
            for j in 0..inner {
                row[j] = row[j] - (next[j] - prev[j]) * lambda;
            }
            std::mem::swap(&mut prev, &mut next);
        }
    };
    if faces.is_empty() {
        data.par_chunks_mut(block)
            .enumerate()
            .for_each(|(o, chunk)| run(o, chunk, &mut []));
    } else {
        data.par_chunks_mut(block)
            .zip(record.par_chunks_mut(faces.len() * inner))
            .enumerate()
            .for_each(|(o, (chunk, rec))| run(o, chunk, rec));
    }
    Ok(record)
}

/// One TVD step of `field` along `axis` with outflow boundaries.
pub fn advect_tvd<T: Cell>(
    field: &mut [T],
    shape: &[usize],
    axis: usize,
    velocity: &[f64],
    dt: f64,
    h: f64,
) -> Result<()> {
    sweep(field, shape, axis, velocity, dt, h, Side::Outflow, Side::Outflow, &[]).map(|_| ())
}

/// Total variation of each line along `axis`, summed.
pub fn total_variation(field: &[f64], shape: &[usize], axis: usize) -> f64 {
    let (outer, n, inner) = split_shape(shape, axis);
    let mut tv = 0.0;
    for o in 0..outer {
        for j in 0..inner {
            for i in 1..n {
                let b = o * n * inner + j;
                tv += (field[b + i * inner] - field[b + (i - 1) * inner]).abs();
            }
        }
    }
    tv
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(n: usize, center: f64, width: f64) -> (Vec<f64>, f64) {
        let h = 1.0 / n as f64;
        let f = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                (-((x - center) / width).powi(2)).exp()
            })
            .collect();
        (f, h)
    }

    #[test]
    fn conserves_mass() {
        let (mut f, h) = gaussian(200, 0.4, 0.05);
        let m0: f64 = f.iter().sum();
        let dt = 0.4 * h;
        for _ in 0..50 {
            advect_tvd(&mut f, &[200], 0, &[1.0], dt, h).unwrap();
        }
        let m1: f64 = f.iter().sum();
        assert!(((m1 - m0) / m0).abs() < 1e-12);
    }

    #[test]
    fn square_wave_total_variation_does_not_grow() {
        let n = 128;
        let mut f: Vec<f64> = (0..n).map(|i| if (40..70).contains(&i) { 1.0 } else { 0.0 }).collect();
        let h = 1.0 / n as f64;
        for v in [1.0, -0.7] {
            for _ in 0..30 {
                let tv0 = total_variation(&f, &[n], 0);
                advect_tvd(&mut f, &[n], 0, &[v], 0.4 * h / v.abs(), h).unwrap();
                assert!(total_variation(&f, &[n], 0) <= tv0 + 1e-14);
            }
        }
    }

    fn translation_error(n: usize) -> f64 {
        let (mut f, h) = gaussian(n, 0.3, 0.08);
        let t = 0.25;
        let steps = (t / (0.4 * h)).ceil() as usize;
        let dt = t / steps as f64;
        for _ in 0..steps {
            advect_tvd(&mut f, &[n], 0, &[1.0], dt, h).unwrap();
        }
        let (exact, _) = gaussian(n, 0.3 + t, 0.08);
        f.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>() * h
    }

    #[test]
    fn second_order_translation() {
        let ns = [100, 200, 400, 800];
        let errs: Vec<f64> = ns.iter().map(|&n| translation_error(n)).collect();
        let xs: Vec<f64> = ns.iter().map(|&n| (1.0 / n as f64).ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((1.6..=2.2).contains(&slope), "slope {slope}");
    }

    #[test]
    fn cfl_violation_is_an_error() {
        let mut f = vec![1.0; 10];
        let err = advect_tvd(&mut f, &[10], 0, &[1.0], 0.5, 1.0);
        assert!(matches!(err, Err(Error::Cfl { .. })));
        assert!(f.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn given_constant_ghosts_keep_constant() {
        let shape = [3, 8];
        let mut f = vec![2.5; 24];
        let ghosts = vec![2.5; 3 * 2];
        for v in [0.9, -0.9] {
            sweep(&mut f, &shape, 1, &[v, v, v], 0.4, 1.0, Side::Given(&ghosts), Side::Given(&ghosts), &[0, 8])
                .unwrap();
        }
        assert!(f.iter().all(|x| (x - 2.5).abs() < 1e-15));
    }

    #[test]
    fn recorded_fluxes_balance_mass() {
        let shape = [16, 4];
        let (g, _) = gaussian(16, 0.5, 0.2);
        let mut f: Vec<f64> = (0..64).map(|k| g[k / 4] * (1.0 + k as f64 % 4.0)).collect();
        let vel = vec![0.8, -0.3, 0.5, -1.0];
        let (h, dt) = (1.0, 0.4);
        let before: Vec<f64> = (0..4).map(|j| (0..16).map(|i| f[i * 4 + j]).sum()).collect();
        let fl = sweep(&mut f, &shape, 0, &vel, dt, h, Side::Outflow, Side::Outflow, &[0, 16]).unwrap();
        for j in 0..4 {
            let after: f64 = (0..16).map(|i| f[i * 4 + j]).sum();
            let expected = before[j] + dt / h * (fl[j] - fl[4 + j]);
            assert!((after - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn complex_matches_componentwise_real() {
        let n = 64;
        let (re, h) = gaussian(n, 0.4, 0.1);
        let (im, _) = gaussian(n, 0.6, 0.05);
        let mut z: Vec<C64> = re.iter().zip(&im).map(|(a, b)| C64::new(*a, -b)).collect();
        let (mut a, mut b) = (re.clone(), im.iter().map(|v| -v).collect::<Vec<_>>());
        for _ in 0..10 {
            advect_tvd(&mut z, &[n], 0, &[-1.0], 0.3 * h, h).unwrap();
            advect_tvd(&mut a, &[n], 0, &[-1.0], 0.3 * h, h).unwrap();
            advect_tvd(&mut b, &[n], 0, &[-1.0], 0.3 * h, h).unwrap();
        }
        for i in 0..n {
            assert_eq!(z[i].re, a[i]);
            assert_eq!(z[i].im, b[i]);
        }
    }

    proptest! {
        #[test]
        fn tvd_for_random_data(
            data in proptest::collection::vec(-1.0f64..1.0, 8..64),
            v in -1.0f64..1.0,
            c in 0.0f64..CFL_MAX,
        ) {
            let n = data.len();
            let mut f = data.clone();
            let tv0 = total_variation(&f, &[n], 0);
            let dt = if v == 0.0 { 0.0 } else { c / v.abs() };
            advect_tvd(&mut f, &[n], 0, &[v], dt, 1.0).unwrap();
            prop_assert!(total_variation(&f, &[n], 0) <= tv0 * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn bounded_by_initial_extrema(
            data in proptest::collection::vec(0.0f64..1.0, 8..64),
            v in -1.0f64..1.0,
        ) {
            let n = data.len();
            let mut f = data.clone();
            let (lo, hi) = data.iter().fold((f64::MAX, f64::MIN), |(l, h), x| (l.min(*x), h.max(*x)));
            advect_tvd(&mut f, &[n], 0, &[v], 0.4, 1.0).unwrap();
            prop_assert!(f.iter().all(|x| *x >= lo - 1e-14 && *x <= hi + 1e-14));
        }
    }
}
