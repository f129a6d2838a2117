//! Reference solver for the two-component semiclassical Schrödinger equation
//! `i eps psi_t = -eps^2/2 Lap psi + (U + V) psi` using Strang time-splitting
//! with a pseudo-spectral kinetic step on a periodic grid.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{integer_ratio, Axis};
use crate::linalg::{Mat2, C64, ZERO};
use crate::observables::{ObservableSeries, SeriesSource};
use crate::potentials::TwoBandPotential;

/// Largest packet mass allowed outside the grid at initialisation.
pub const TAIL_LIMIT: f64 = 1e-8;

/// Periodic uniform grid with power-of-two sizes; storage is row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub axes: Vec<Axis>,
}

impl SpatialGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(invalid(format!("spatial grid must be 1D or 2D, got {}D", axes.len())));
        }
        for a in &axes {
            if !a.n.is_power_of_two() {
                return Err(invalid(format!(
                    "spectral grid sizes must be powers of two, got {} cells on [{}, {}]",
                    a.n,
                    a.min,
                    a.max()
                )));
            }
        }
        Ok(Self { axes })
    }

    /// Grid on `[min, max]` per axis with spacing `dx`.
    pub fn with_spacing(extents: &[[f64; 2]], dx: f64) -> Result<Self> {
        let axes = extents
            .iter()
            .map(|[lo, hi]| Axis::with_spacing(*lo, *hi, dx))
            .collect::<Result<Vec<_>>>()?;
        Self::new(axes)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).product()
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        match self.axes.as_slice() {
            [a] => [a.center(i), 0.0],
            [a, b] => [a.center(i / b.n), b.center(i % b.n)],
            _ => unreachable!(),
        }
    }

    fn wavenumbers(axis: &Axis) -> Vec<f64> {
        let n = axis.n as i64;
        let base = 2.0 * PI / axis.length();
        (0..n)
            .map(|j| base * if j < n / 2 { j } else { j - n } as f64)
            .collect()
    }

    /// `|k|^2` per node in FFT ordering.
    fn k_squared(&self) -> Vec<f64> {
        match self.axes.as_slice() {
            [a] => Self::wavenumbers(a).into_iter().map(|k| k * k).collect(),
            [a, b] => {
                let (ka, kb) = (Self::wavenumbers(a), Self::wavenumbers(b));
                ka.iter()
                    .flat_map(|x| kb.iter().map(move |y| x * x + y * y))
                    .collect()
            }
            _ => unreachable!(),
        }
    }
}

/// Gaussian packet `(A/pi)^{d/4} exp(-A/2 |x-x0|^2 + i p0.(x-x0)/eps)` on a band superposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub a_plus: f64,
    pub a_minus: f64,
    pub x0: Vec<f64>,
    pub p0: Vec<f64>,
    /// Gaussian width parameter `A`.
    pub width: f64,
}

impl PacketSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.x0.len() != dim || self.p0.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.x0.len().max(self.p0.len()),
            });
        }
        if !(self.width > 0.0) {
            return Err(invalid(format!("packet width must be positive, got {}", self.width)));
        }
        Ok(())
    }
}

/// Mass fraction of a normalised density `~ exp(-a (s - c)^2)` lying outside `[lo, hi]`.
pub(crate) fn gaussian_tail_outside(center: f64, a: f64, lo: f64, hi: f64) -> f64 {
    let s = a.sqrt();
    0.5 * libm::erfc(s * (center - lo)) + 0.5 * libm::erfc(s * (hi - center))
}

/// Two-component wavefunction sampled at the cell centres of a periodic grid.
#[derive(Clone, Debug)]
pub struct WaveField {
    pub grid: SpatialGrid,
    pub psi: [Vec<C64>; 2],
    pub epsilon: f64,
    pub time: f64,
}

impl WaveField {
    /// `||psi||^2` by midpoint quadrature.
    pub fn norm_sqr(&self) -> f64 {
        let s: f64 = self.psi[0]
            .iter()
            .zip(&self.psi[1])
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .sum();
        s * self.grid.cell_volume()
    }

    /// `|psi_1|^2` and `|psi_2|^2` per node.
    pub fn component_densities(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.psi[0].iter().map(|z| z.norm_sqr()).collect(),
            self.psi[1].iter().map(|z| z.norm_sqr()).collect(),
        )
    }

    /// Band densities `|Pi_+- psi|^2 = |chi_+-^dagger psi|^2` per node.
    pub fn band_densities(&self, pot: &TwoBandPotential) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.grid.len();
        let d = self.grid.dim();
        let mut plus = Vec::with_capacity(n);
        let mut minus = Vec::with_capacity(n);
        for i in 0..n {
            let x = self.grid.point(i);
            let t = pot.theta(&x[..d])?;
            let v = t.apply([self.psi[0][i], self.psi[1][i]]);
            plus.push(v[0].norm_sqr());
            minus.push(v[1].norm_sqr());
        }
        Ok((plus, minus))
    }
}

/// `psi_0 = g(x) (a+ chi_+ + a- chi_-)`.
pub fn init_wavepacket(
    spec: &PacketSpec,
    pot: &TwoBandPotential,
    grid: &SpatialGrid,
    epsilon: f64,
) -> Result<WaveField> {
    let d = grid.dim();
    if pot.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            got: d,
        });
    }
    spec.validate(d)?;
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let tail = grid
        .axes
        .iter()
        .enumerate()
        .map(|(k, a)| gaussian_tail_outside(spec.x0[k], spec.width, a.min, a.max()))
        .fold(0.0, |acc, t| acc + t - acc * t);
    if tail > TAIL_LIMIT {
        return Err(Error::DomainTooSmall {
            what: "Schrodinger",
            mass: tail,
            limit: TAIL_LIMIT,
        });
    }

    let a = spec.width;
    let amp = (a / PI).powf(d as f64 / 4.0);
    let n = grid.len();
    let mut psi = [vec![ZERO; n], vec![ZERO; n]];
    for i in 0..n {
        let x = grid.point(i);
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for k in 0..d {
            let dx = x[k] - spec.x0[k];
            r2 += dx * dx;
            phase += spec.p0[k] * dx;
        }
        let g = C64::from_polar(amp * (-0.5 * a * r2).exp(), phase / epsilon);
        let basis = pot.eigenbasis(&x[..d])?;
        for c in 0..2 {
            psi[c][i] = g * (basis.chi_plus[c] * spec.a_plus + basis.chi_minus[c] * spec.a_minus);
        }
    }
    Ok(WaveField {
        grid: grid.clone(),
        psi,
        epsilon,
        time: 0.0,
    })
}

struct Spectral {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    column: Vec<C64>,
    scratch: Vec<C64>,
}

impl Spectral {
    fn new(grid: &SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        let shape: Vec<usize> = grid.axes.iter().map(|a| a.n).collect();
        let forward: Vec<_> = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse: Vec<_> = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let scratch_len = forward
            .iter()
            .chain(&inverse)
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            column: vec![ZERO; shape[0]],
            scratch: vec![ZERO; scratch_len],
            shape,
            forward,
            inverse,
        }
    }

    fn transform(&mut self, data: &mut [C64], inverse: bool) {
        let plans = if inverse { &self.inverse } else { &self.forward };
        match self.shape.as_slice() {
            [_] => plans[0].process_with_scratch(data, &mut self.scratch),
            [nx, ny] => {
                let (nx, ny) = (*nx, *ny);
                plans[1].process_with_scratch(data, &mut self.scratch);
                for j in 0..ny {
                    for i in 0..nx {
                        self.column[i] = data[i * ny + j];
                    }
                    plans[0].process_with_scratch(&mut self.column, &mut self.scratch);
                    for i in 0..nx {
                        data[i * ny + j] = self.column[i];
                    }
                }
            }
            _ => unreachable!(),
        }
    }
}

/// Precomputed Strang propagator for a fixed `(potential, grid, eps, dt)`.
pub struct Tssp {
    spectral: Spectral,
    /// `exp(-i eps |k|^2 dt / 4) / N` (half kinetic step with the inverse FFT normalisation folded in).
    half_kinetic: Vec<C64>,
    /// `exp(-i eps |k|^2 dt / 2) / N`.
    full_kinetic: Vec<C64>,
    /// Nodewise `exp(-i (U + V) dt / eps)`.
    potential: Vec<Mat2>,
    pub dt: f64,
    pub epsilon: f64,
}

impl Tssp {
    pub fn new(pot: &TwoBandPotential, grid: &SpatialGrid, epsilon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        if pot.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: pot.dim(),
                got: grid.dim(),
            });
        }
        let norm = 1.0 / grid.len() as f64;
        let k2 = grid.k_squared();
        let kinetic = |frac: f64| -> Vec<C64> {
            k2.iter()
                .map(|k| C64::from_polar(norm, -epsilon * k * dt * frac))
                .collect()
        };
        let d = grid.dim();
        let tau = dt / epsilon;
        // exp(-i V tau) = e^{-i E tau} Pi_+ + e^{i E tau} Pi_-, with Pi_+- = (I +- V/E)/2.
        let potential = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                let e = pot.gap(&x[..d]);
                let v = pot.matrix(&x[..d]);
                let sinc = if e > 0.0 { (e * tau).sin() / e } else { tau };
                let m = Mat2::identity() * (e * tau).cos() - v.scale(C64::new(0.0, sinc));
                m.scale(C64::from_polar(1.0, -pot.trace() * tau))
            })
            .collect();
        Ok(Self {
            spectral: Spectral::new(grid),
            half_kinetic: kinetic(0.25),
            full_kinetic: kinetic(0.5),
            potential,
            dt,
            epsilon,
        })
    }

    fn kinetic(&mut self, field: &mut WaveField, full: bool) {
        let mult = if full { &self.full_kinetic } else { &self.half_kinetic };
        for comp in field.psi.iter_mut() {
            self.spectral.transform(comp, false);
            for (z, m) in comp.iter_mut().zip(mult) {
                *z *= m;
            }
            self.spectral.transform(comp, true);
        }
    }

    fn potential_step(&self, field: &mut WaveField) {
        let [a, b] = &mut field.psi;
        for ((u, v), m) in a.iter_mut().zip(b.iter_mut()).zip(&self.potential) {
            let out = m.apply([*u, *v]);
            *u = out[0];
            *v = out[1];
        }
    }

    /// One Strang step: half kinetic, full potential, half kinetic.
    pub fn step(&mut self, field: &mut WaveField) {
        self.advance(field, 1);
    }

    /// `steps` Strang steps with the interior kinetic half-steps fused.
    pub fn advance(&mut self, field: &mut WaveField, steps: usize) {
        if steps == 0 {
            return;
        }
        self.kinetic(field, false);
        for s in 0..steps {
            self.potential_step(field);
            self.kinetic(field, s + 1 < steps);
        }
        field.time += steps as f64 * self.dt;
    }
}

/// One TSSP step from `state`, returning the advanced field.
pub fn tssp_step(state: &WaveField, pot: &TwoBandPotential, dt: f64) -> Result<WaveField> {
    let mut tssp = Tssp::new(pot, &state.grid, state.epsilon, dt)?;
    let mut out = state.clone();
    tssp.step(&mut out);
    Ok(out)
}

/// Number of steps of size `dt` spanning `interval`, if it divides evenly.
pub(crate) fn steps_in(interval: f64, dt: f64) -> Option<usize> {
    if interval == 0.0 {
        return Some(0);
    }
    integer_ratio(interval, dt).filter(|k| *k > 0).map(|k| k as usize)
}

#[derive(Clone, Debug)]
pub struct SchrodingerParams {
    pub packet: PacketSpec,
    pub grid: SpatialGrid,
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub output_interval: f64,
    pub snapshot_times: Vec<f64>,
}

pub struct SchrodingerRun {
    pub series: ObservableSeries,
    pub final_field: WaveField,
    pub snapshots: Vec<WaveField>,
    pub initial_norm: f64,
}

/// Time-steps the packet to `t_final`, recording band populations at every output time.
pub fn run_schrodinger(params: &SchrodingerParams, pot: &TwoBandPotential) -> Result<SchrodingerRun> {
    let dt = params.dt;
    let total = steps_in(params.t_final, dt).ok_or_else(|| {
        invalid(format!(
            "t_final {} is not a multiple of dt {}",
            params.t_final, dt
        ))
    })?;
    let cadence = steps_in(params.output_interval, dt)
        .filter(|k| *k > 0)
        .ok_or_else(|| {
            invalid(format!(
                "output interval {} is not a positive multiple of dt {}",
                params.output_interval, dt
            ))
        })?;
    let snap_steps = params
        .snapshot_times
        .iter()
        .map(|&t| {
            steps_in(t, dt)
                .filter(|k| k % cadence == 0 && *k <= total)
                .ok_or_else(|| invalid(format!("snapshot time {t} is not an output time")))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut field = init_wavepacket(&params.packet, pot, &params.grid, params.epsilon)?;
    let initial_norm = field.norm_sqr();
    let mut tssp = Tssp::new(pot, &params.grid, params.epsilon, dt)?;
    let mut series = ObservableSeries::new(SeriesSource::Schrodinger);
    let mut snapshots = Vec::new();

    let mut done = 0;
    loop {
        let step_count = done;
        series.record_wave(&field, pot, step_count as f64 * dt)?;
        if snap_steps.contains(&step_count) {
            snapshots.push(field.clone());
        }
        if done >= total {
            break;
        }
        let block = cadence.min(total - done);
        tssp.advance(&mut field, block);
        done += block;
        field.time = done as f64 * dt;
    }
    Ok(SchrodingerRun {
        series,
        final_field: field,
        snapshots,
        initial_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::ModelKind;

    fn grid_1d(lo: f64, hi: f64, n: usize) -> SpatialGrid {
        SpatialGrid::new(vec![Axis::new(lo, hi, n).unwrap()]).unwrap()
    }

    fn packet(a_plus: f64, a_minus: f64, x0: f64, p0: f64, width: f64) -> PacketSpec {
        PacketSpec {
            a_plus,
            a_minus,
            x0: vec![x0],
            p0: vec![p0],
            width,
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(SpatialGrid::new(vec![Axis::new(0.0, 1.0, 100).unwrap()]).is_err());
    }

    #[test]
    fn pure_upper_band_has_no_lower_component() {
        let eps: f64 = 1.0 / 64.0;
        let pot = TwoBandPotential::new(ModelKind::OneD, eps.sqrt() / 4.0).unwrap();
        let grid = grid_1d(-1.0, 2.0, 1024);
        let f = init_wavepacket(&packet(1.0, 0.0, 0.5, -1.0, 1.0 / eps), &pot, &grid, eps).unwrap();
        let (plus, minus) = f.band_densities(&pot).unwrap();
        assert!(minus.iter().all(|m| *m < 1e-28));
        assert!(plus.iter().any(|p| *p > 1.0));
    }

    #[test]
    fn initial_norm_is_one() {
        let eps: f64 = 1.0 / 64.0;
        let pot = TwoBandPotential::new(ModelKind::OneD, 0.1).unwrap();
        // fine grid: 32 points per packet standard deviation
        let grid = grid_1d(-1.5, 2.5, 8192);
        let f = init_wavepacket(&packet(0.6, 0.8, 0.5, -1.0, 1.0 / eps), &pot, &grid, eps).unwrap();
        assert!((f.norm_sqr() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn equal_superposition_density_is_gaussian() {
        let eps: f64 = 1.0 / 64.0;
        let pot = TwoBandPotential::new(ModelKind::OneD, 0.05).unwrap();
        let grid = grid_1d(-1.0, 2.0, 512);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let spec = packet(s, s, 0.5, -1.0, 1.0 / eps);
        let f = init_wavepacket(&spec, &pot, &grid, eps).unwrap();
        let a = spec.width;
        for i in 0..grid.len() {
            let x = grid.point(i)[0];
            let g2 = (a / PI).sqrt() * (-a * (x - 0.5) * (x - 0.5)).exp();
            let rho = f.psi[0][i].norm_sqr() + f.psi[1][i].norm_sqr();
            assert!((rho - g2).abs() < 1e-13 * g2.max(1.0));
        }
    }

    #[test]
    fn domain_too_small() {
        let eps: f64 = 1.0 / 64.0;
        let pot = TwoBandPotential::new(ModelKind::OneD, 0.1).unwrap();
        let grid = grid_1d(0.0, 1.0, 256);
        let err = init_wavepacket(&packet(1.0, 0.0, 0.9, -1.0, 1.0 / eps), &pot, &grid, eps);
        assert!(matches!(err, Err(Error::DomainTooSmall { .. })));
    }

    /// Closed-form free evolution of the packet under `i eps psi_t = -eps^2/2 psi_xx`.
    fn free_gaussian(x: f64, t: f64, a: f64, x0: f64, p0: f64, eps: f64) -> C64 {
        let z = C64::new(1.0, a * eps * t);
        let s = x - x0 - p0 * t;
        let amp = (a / PI).powf(0.25) / z.sqrt();
        let phase = C64::new(0.0, p0 * (x - x0) / eps - p0 * p0 * t / (2.0 * eps));
        amp * (-(a * s * s) / (2.0 * z) + phase).exp()
    }

    #[test]
    fn free_evolution_matches_closed_form() {
        let eps: f64 = 1.0 / 64.0;
        let pot = TwoBandPotential::uniform(1, 0.0, ZERO).unwrap();
        let grid = grid_1d(-2.0, 2.0, 2048);
        let a = 1.0 / eps;
        let (x0, p0) = (0.5, -1.0);
        let n = grid.len();
        let psi0: Vec<C64> = (0..n)
            .map(|i| free_gaussian(grid.point(i)[0], 0.0, a, x0, p0, eps))
            .collect();
        let mut field = WaveField {
            grid: grid.clone(),
            psi: [psi0, vec![ZERO; n]],
            epsilon: eps,
            time: 0.0,
        };
        let dt = eps / 32.0;
        let mut tssp = Tssp::new(&pot, &grid, eps, dt).unwrap();
        tssp.advance(&mut field, 100);
        let t = 100.0 * dt;
        let err = (0..n)
            .map(|i| (field.psi[0][i] - free_gaussian(grid.point(i)[0], t, a, x0, p0, eps)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "max error {err:e}");
    }

    #[test]
    fn step_preserves_norm() {
        let eps: f64 = 1.0 / 64.0;
        let pot = TwoBandPotential::new(ModelKind::OneD, eps.sqrt() / 4.0).unwrap();
        let grid = grid_1d(-2.0, 2.0, 4096);
        let f = init_wavepacket(&packet(1.0, 0.0, 0.1, -1.0, 1.0 / eps), &pot, &grid, eps).unwrap();
        let n0 = f.norm_sqr();
        let g = tssp_step(&f, &pot, eps / 32.0).unwrap();
        assert!(((g.norm_sqr() - n0) / n0).abs() < 1e-12);
    }

    #[test]
    fn scalar_potential_is_global_phase() {
        let eps: f64 = 1.0 / 64.0;
        let c = 0.7;
        let free = TwoBandPotential::uniform(1, 0.0, ZERO).unwrap();
        let shifted = free.with_trace(c);
        let grid = grid_1d(-2.0, 2.0, 1024);
        let f = init_wavepacket(&packet(1.0, 0.0, 0.0, 0.5, 1.0 / eps), &free, &grid, eps);
        // chi_- is degenerate for V = 0, so build the state directly.
        assert!(f.is_err());
        let n = grid.len();
        let psi0: Vec<C64> = (0..n)
            .map(|i| free_gaussian(grid.point(i)[0], 0.0, 1.0 / eps, 0.0, 0.5, eps))
            .collect();
        let field = WaveField {
            grid: grid.clone(),
            psi: [psi0.clone(), psi0],
            epsilon: eps,
            time: 0.0,
        };
        let dt = eps / 16.0;
        let a = tssp_step(&field, &free, dt).unwrap();
        let b = tssp_step(&field, &shifted, dt).unwrap();
        let phase = C64::from_polar(1.0, -c * dt / eps);
        for comp in 0..2 {
            for i in 0..n {
                assert!((a.psi[comp][i] * phase - b.psi[comp][i]).norm() < 1e-13);
                assert!((a.psi[comp][i].norm() - b.psi[comp][i].norm()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn zero_final_time_records_initial_state() {
        let eps: f64 = 1.0 / 64.0;
        let pot = TwoBandPotential::new(ModelKind::OneD, eps.sqrt() / 4.0).unwrap();
        let params = SchrodingerParams {
            packet: packet(1.0, 0.0, 0.5, -1.0, 1.0 / eps),
            grid: grid_1d(-2.0, 2.0, 2048),
            epsilon: eps,
            dt: eps / 32.0,
            t_final: 0.0,
            output_interval: 1.0 / 128.0,
            snapshot_times: vec![],
        };
        let run = run_schrodinger(&params, &pot).unwrap();
        assert_eq!(run.series.times, vec![0.0]);
        assert!((run.series.p_plus[0] - 1.0).abs() < 1e-10);
        assert!(run.series.p_minus[0].abs() < 1e-10);
    }

    #[test]
    fn cadence_must_divide() {
        let eps: f64 = 1.0 / 64.0;
        let pot = TwoBandPotential::new(ModelKind::OneD, 0.1).unwrap();
        let params = SchrodingerParams {
            packet: packet(1.0, 0.0, 0.5, -1.0, 1.0 / eps),
            grid: grid_1d(-2.0, 2.0, 2048),
            epsilon: eps,
            dt: 0.003,
            t_final: 0.75,
            output_interval: 0.01,
            snapshot_times: vec![],
        };
        assert!(run_schrodinger(&params, &pot).is_err());
    }
}
