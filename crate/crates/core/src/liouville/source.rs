//! Per-cell coupling source `df/dt = C f + D f / (i eps)` on `f = (f+, f-, fi, conj fi)`.
//!
//! With `bi = kappa e^{i theta}`, `b+ - b- = i beta` and `omega = beta - 2E/eps`,
//! the variables `w = (f+ - f-)/2` and `g = e^{-i theta} fi` obey
//! `d/dt (w, Re g, Im g) = a x (w, Re g, Im g)` with `a = (omega, 0, -2 kappa)`,
//! a rigid rotation that is integrated exactly. `f+ + f-` is invariant.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::linalg::{Mat4, C64, I, ZERO};
use crate::phase_space::WignerState;
use crate::potentials::{assemble_coupling, Coupling, CouplingData, TwoBandPotential};

/// The source generator at one phase-space cell.
#[derive(Clone, Copy, Debug)]
pub struct SourceOperator {
    pub coupling: Coupling,
    pub gap: f64,
    pub epsilon: f64,
}

impl SourceOperator {
    pub fn at(pot: &TwoBandPotential, x: &[f64], p: &[f64], epsilon: f64) -> Self {
        Self {
            coupling: pot.coupling(x, p),
            gap: pot.gap(x),
            epsilon,
        }
    }

    pub fn data(&self) -> CouplingData {
        assemble_coupling(self.coupling, self.gap)
    }

    /// `C + D / (i eps)` as a 4x4 matrix.
    pub fn generator(&self) -> Mat4 {
        let d = self.data();
        let mut g = d.c_matrix;
        for k in 0..4 {
            g[k][k] += C64::new(d.d_diag[k], 0.0) / (I * self.epsilon);
        }
        g
    }

    /// Coefficient multiplying `fi` in its own equation.
    pub fn fi_coefficient(&self) -> C64 {
        C64::new(
            0.0,
            self.coupling.b_plus_im - self.coupling.b_minus_im - 2.0 * self.gap / self.epsilon,
        )
    }

    /// Exact flow over `dt` of the real triple `(f+, f-, fi)`.
    #[inline]
    pub fn propagate(&self, fp: f64, fm: f64, fi: C64, dt: f64) -> (f64, f64, C64) {
        let c = &self.coupling;
        let kappa = c.b_i.norm();
        let omega = c.b_plus_im - c.b_minus_im - 2.0 * self.gap / self.epsilon;
        if kappa == 0.0 {
            return (fp, fm, fi * C64::from_polar(1.0, omega * dt));
        }
        let phase = c.b_i / kappa;
        let big = omega.hypot(2.0 * kappa);
        if big == 0.0 {
            return (fp, fm, fi);
        }
        let ax = [omega / big, 0.0, -2.0 * kappa / big];
        let mean = 0.5 * (fp + fm);
        let g = fi * phase.conj();
        let z = [0.5 * (fp - fm), g.re, g.im];
        let cross = [
            ax[1] * z[2] - ax[2] * z[1],
            ax[2] * z[0] - ax[0] * z[2],
            ax[0] * z[1] - ax[1] * z[0],
        ];
        let dot = ax[0] * z[0] + ax[1] * z[1] + ax[2] * z[2];
        let (s, co) = (big * dt).sin_cos();
        let r: [f64; 3] = std::array::from_fn(|k| z[k] * co + cross[k] * s + ax[k] * dot * (1.0 - co));
        (mean + r[0], mean - r[0], C64::new(r[1], r[2]) * phase)
    }
}

/// Applies the exact source flow for `dt` to every cell of `state`.
pub fn apply_source(state: &mut WignerState, pot: &TwoBandPotential, dt: f64) -> Result<()> {
    let grid = &state.grid;
    let d = grid.dim();
    let nm = grid.momentum_len();
    let eps = state.epsilon;
    let n = grid.len();
    let fi = state.f_i.get_or_insert_with(|| vec![ZERO; n]);
    state
        .f_plus
        .par_chunks_mut(nm)
        .zip(state.f_minus.par_chunks_mut(nm))
        .zip(fi.par_chunks_mut(nm))
        .enumerate()
        .try_for_each(|(s, ((fp, fm), fi))| {
            let x = grid.spatial_point(s);
            for m in 0..nm {
                let p = grid.momentum_point(m);
                let op = SourceOperator::at(pot, &x[..d], &p[..d], eps);
                let (a, b, c) = op.propagate(fp[m], fm[m], fi[m], dt);
                if !(a.is_finite() && b.is_finite() && c.re.is_finite() && c.im.is_finite()) {
                    return Err(Error::NonFinite);
                }
                fp[m] = a;
                fm[m] = b;
                fi[m] = c;
            }
            Ok(())
        })
}

/// The source flow of every cell for one fixed `dt`, stored as the symmetric
/// and skew parts of the rotation together with the phase of `bi`.
#[derive(Clone, Debug)]
pub struct SourceTable {
    dt: f64,
    /// `[m00, m11, m22, m02, m10, m21, phase.re, phase.im]` per cell.
    cells: Vec<[f64; 8]>,
}

impl SourceTable {
    pub fn new(grid: &PhaseGrid, pot: &TwoBandPotential, epsilon: f64, dt: f64) -> Self {
        let d = grid.dim();
        let nm = grid.momentum_len();
        let cells = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let x = grid.spatial_point(k / nm);
                let p = grid.momentum_point(k % nm);
                let op = SourceOperator::at(pot, &x[..d], &p[..d], epsilon);
                let c = &op.coupling;
                let kappa = c.b_i.norm();
                let omega = c.b_plus_im - c.b_minus_im - 2.0 * op.gap / epsilon;
                if kappa == 0.0 {
                    let (s, co) = (omega * dt).sin_cos();
                    return [1.0, co, co, 0.0, 0.0, s, 1.0, 0.0];
                }
                let phase = c.b_i / kappa;
                let big = omega.hypot(2.0 * kappa);
                let (a0, a2) = (omega / big, -2.0 * kappa / big);
                let (s, co) = (big * dt).sin_cos();
                let v = 1.0 - co;
                [co + a0 * a0 * v, co, co + a2 * a2 * v, a0 * a2 * v, a2 * s, a0 * s, phase.re, phase.im]
            })
            .collect();
        Self { dt, cells }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Flow of cell `k` applied to `(f+, f-, fi)`.
    #[inline]
    pub fn propagate(&self, k: usize, fp: f64, fm: f64, fi: C64) -> (f64, f64, C64) {
        let [m00, m11, m22, m02, m10, m21, pr, pi] = self.cells[k];
        if m00 == 1.0 && m02 == 0.0 && m10 == 0.0 {
            return (fp, fm, fi * C64::new(m11, m21));
        }
        let phase = C64::new(pr, pi);
        let g = fi * phase.conj();
        let z = [0.5 * (fp - fm), g.re, g.im];
        let r0 = m00 * z[0] - m10 * z[1] + m02 * z[2];
        let r1 = m10 * z[0] + m11 * z[1] - m21 * z[2];
        let r2 = m02 * z[0] + m21 * z[1] + m22 * z[2];
        let mean = 0.5 * (fp + fm);
        (mean + r0, mean - r0, C64::new(r1, r2) * phase)
    }

    /// Applies the tabulated flow to every cell of `state`.
    pub fn apply(&self, state: &mut WignerState) -> Result<()> {
        if state.grid.len() != self.cells.len() {
            return Err(Error::GridMismatch("source table and state differ in size".into()));
        }
        let n = state.grid.len();
        let nm = state.grid.momentum_len();
        let fi = state.f_i.get_or_insert_with(|| vec![ZERO; n]);
        state
            .f_plus
            .par_chunks_mut(nm)
            .zip(state.f_minus.par_chunks_mut(nm))
            .zip(fi.par_chunks_mut(nm))
            .enumerate()
            .try_for_each(|(s, ((fp, fm), fi))| {
                for m in 0..nm {
                    let (a, b, c) = self.propagate(s * nm + m, fp[m], fm[m], fi[m]);
                    if !(a.is_finite() && b.is_finite() && c.re.is_finite() && c.im.is_finite()) {
                        return Err(Error::NonFinite);
                    }
                    fp[m] = a;
                    fm[m] = b;
                    fi[m] = c;
                }
                Ok(())
            })
    }
}
