//! Wigner-matrix state on a phase-space grid and its Gaussian initial data.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::grid::PhaseGrid;
use crate::linalg::{C64, ZERO};
use crate::schrodinger::{gaussian_tail_outside, PacketSpec, TAIL_LIMIT};

/// Band-diagonal entries `f+`, `f-` and the off-diagonal `fi` on a phase grid.
/// `fi` is `None` where it is identically zero (adiabatic regions).
#[derive(Clone, Debug)]
pub struct WignerState {
    pub grid: PhaseGrid,
    pub f_plus: Vec<f64>,
    pub f_minus: Vec<f64>,
    pub f_i: Option<Vec<C64>>,
    pub epsilon: f64,
    pub time: f64,
}

impl WignerState {
    pub fn zeros(grid: PhaseGrid, epsilon: f64, with_fi: bool) -> Self {
        let n = grid.len();
        Self {
            f_plus: vec![0.0; n],
            f_minus: vec![0.0; n],
            f_i: with_fi.then(|| vec![ZERO; n]),
            grid,
            epsilon,
            time: 0.0,
        }
    }

    /// Allocates `fi = 0` if absent.
    pub fn ensure_fi(&mut self) -> &mut Vec<C64> {
        let n = self.grid.len();
        self.f_i.get_or_insert_with(|| vec![ZERO; n])
    }

    /// `(int f+, int f-)` by midpoint quadrature.
    pub fn band_masses(&self) -> (f64, f64) {
        let vol = self.grid.cell_volume();
        (
            self.f_plus.iter().sum::<f64>() * vol,
            self.f_minus.iter().sum::<f64>() * vol,
        )
    }

    pub fn total_mass(&self) -> f64 {
        let (a, b) = self.band_masses();
        a + b
    }
}

/// Fraction of the initial Wigner mass lying outside `grid`.
pub fn wigner_tail_mass(spec: &PacketSpec, grid: &PhaseGrid, epsilon: f64) -> f64 {
    let d = grid.dim();
    let mut inside = 1.0;
    for k in 0..d {
        let x = &grid.spatial[k];
        let p = &grid.momentum[k];
        inside *= 1.0 - gaussian_tail_outside(spec.x0[k], spec.width, x.min, x.max());
        inside *= 1.0 - gaussian_tail_outside(spec.p0[k], 1.0 / epsilon, p.min, p.max());
    }
    1.0 - inside
}

/// `f+- = a+-^2 (A / (pi^2 eps))^{d/2} exp(-A |x - x0|^2 - |p - p0|^2 / eps)`, `fi = 0`.
pub fn init_wigner(spec: &PacketSpec, grid: &PhaseGrid, epsilon: f64) -> Result<WignerState> {
    let d = grid.dim();
    spec.validate(d)?;
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let tail = wigner_tail_mass(spec, grid, epsilon);
    if tail > TAIL_LIMIT {
        return Err(Error::DomainTooSmall {
            what: "phase-space",
            mass: tail,
            limit: TAIL_LIMIT,
        });
    }
    Ok(sample_wigner(spec, grid, epsilon))
}

/// Samples the initial Wigner data at the cell centres of `grid` without a tail check.
pub(crate) fn sample_wigner(spec: &PacketSpec, grid: &PhaseGrid, epsilon: f64) -> WignerState {
    let d = grid.dim();
    let a = spec.width;
    let norm = (a / (PI * PI * epsilon)).powf(d as f64 / 2.0);
    let gx: Vec<f64> = (0..grid.spatial_len())
        .map(|s| {
            let x = grid.spatial_point(s);
            let r2: f64 = (0..d).map(|k| (x[k] - spec.x0[k]).powi(2)).sum();
            (-a * r2).exp()
        })
        .collect();
    let gp: Vec<f64> = (0..grid.momentum_len())
        .map(|m| {
            let p = grid.momentum_point(m);
            let r2: f64 = (0..d).map(|k| (p[k] - spec.p0[k]).powi(2)).sum();
            (-r2 / epsilon).exp()
        })
        .collect();

    let mut state = WignerState::zeros(grid.clone(), epsilon, true);
    let (wp, wm) = (spec.a_plus.powi(2) * norm, spec.a_minus.powi(2) * norm);
    let nm = gp.len();
    for (s, x) in gx.iter().enumerate() {
        for (m, p) in gp.iter().enumerate() {
            let g = x * p;
            state.f_plus[s * nm + m] = wp * g;
            state.f_minus[s * nm + m] = wm * g;
        }
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    fn grid_1d(h: f64) -> PhaseGrid {
        PhaseGrid::new(
            vec![Axis::with_spacing(-1.5, 1.5, h).unwrap()],
            vec![Axis::with_spacing(-2.5, 1.5, h).unwrap()],
        )
        .unwrap()
    }

    fn spec(a_plus: f64, a_minus: f64, eps: f64) -> PacketSpec {
        PacketSpec {
            a_plus,
            a_minus,
            x0: vec![0.5],
            p0: vec![-1.0],
            width: 1.0 / eps,
        }
    }

    #[test]
    fn quadrature_matches_amplitudes() {
        let eps: f64 = 1.0 / 256.0;
        let s = init_wigner(&spec(0.6, 0.8, eps), &grid_1d(1.0 / 128.0), eps).unwrap();
        let (mp, mm) = s.band_masses();
        assert!((mp - 0.36).abs() < 1e-6);
        assert!((mm - 0.64).abs() < 1e-6);
        assert!(s.f_i.as_ref().unwrap().iter().all(|z| *z == ZERO));
    }

    #[test]
    fn pure_state_has_empty_lower_band() {
        let eps: f64 = 1.0 / 64.0;
        let s = init_wigner(&spec(1.0, 0.0, eps), &grid_1d(1.0 / 64.0), eps).unwrap();
        assert!(s.f_minus.iter().all(|f| *f == 0.0));
    }

    #[test]
    fn momentum_variance_is_half_epsilon() {
        let eps: f64 = 1.0 / 512.0;
        let g = grid_1d(1.0 / 256.0);
        let s = init_wigner(&spec(1.0, 0.0, eps), &g, eps).unwrap();
        let np = g.momentum[0].n;
        let vol = g.cell_volume();
        let mut m2 = 0.0;
        for (i, f) in s.f_plus.iter().enumerate() {
            let p = g.momentum[0].center(i % np);
            m2 += f * (p + 1.0).powi(2) * vol;
        }
        assert!((m2 / (eps / 2.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn truncated_momentum_domain_rejected() {
        let eps: f64 = 1.0 / 64.0;
        let g = PhaseGrid::new(
            vec![Axis::new(-1.5, 1.5, 64).unwrap()],
            vec![Axis::new(-1.2, 1.5, 64).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            init_wigner(&spec(1.0, 0.0, eps), &g, eps),
            Err(Error::DomainTooSmall { .. })
        ));
    }
}
