//! Phase-space transport for the band Liouville equations, adiabatic and coupled.
//!
//! Both steppers use the palindromic sweep order `X Y P Q | S | Q P Y X` with
//! half steps for every transport sweep. The adiabatic stepper omits `S`.

pub mod advection;
pub mod source;

use crate::error::{invalid, Result};
use crate::grid::PhaseGrid;
use crate::linalg::C64;
use crate::observables::{ObservableSeries, SeriesSource};
use crate::phase_space::{init_wigner, WignerState};
use crate::potentials::TwoBandPotential;
use crate::schrodinger::{steps_in, PacketSpec};

pub use advection::{advect_tvd, Cell, Side, CFL_MAX};
pub use source::{apply_source, SourceOperator, SourceTable};

/// Precomputed line velocities for every sweep axis of a grid.
///
/// Spatial sweeps move every field with `p_k`; momentum sweeps move `f+-` with
/// `-d_k(U +- E)` and leave `fi` in place since `U` is constant.
#[derive(Clone, Debug)]
pub struct AdvectionField {
    pub shape: Vec<usize>,
    pub spacing: Vec<f64>,
    /// Indexed by axis; `[outer][inner]` per axis.
    pub plus: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
    /// `None` on axes where `fi` does not move.
    pub off: Vec<Option<Vec<f64>>>,
}

impl AdvectionField {
    pub fn new(grid: &PhaseGrid, pot: &TwoBandPotential) -> Result<Self> {
        let d = grid.dim();
        if pot.dim() != d {
            return Err(crate::error::Error::DimensionMismatch {
                expected: pot.dim(),
                got: d,
            });
        }
        let shape = grid.shape();
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        let mut off = Vec::new();
        for axis in 0..2 * d {
            if axis < d {
                let v = advection::line_values(&shape, axis, |idx| grid.momentum[axis].center(idx[d + axis]));
                plus.push(v.clone());
                minus.push(v.clone());
                off.push(Some(v));
            } else {
                let k = axis - d;
                let grad = |idx: &[usize]| {
                    let x: Vec<f64> = (0..d).map(|j| grid.spatial[j].center(idx[j])).collect();
                    pot.gap_gradient(&x)[k]
                };
                plus.push(advection::line_values(&shape, axis, |i| -grad(i)));
                minus.push(advection::line_values(&shape, axis, grad));
                off.push(None);
            }
        }
        Ok(Self {
            spacing: grid.axes().map(|a| a.spacing).collect(),
            shape,
            plus,
            minus,
            off,
        })
    }

    pub fn axes(&self) -> usize {
        self.shape.len()
    }

    /// Largest stable `dt` over all sweeps (each sweep is a half step).
    pub fn max_dt(&self) -> f64 {
        let mut m: f64 = 0.0;
        for axis in 0..self.axes() {
            let vmax = self.plus[axis]
                .iter()
                .chain(&self.minus[axis])
                .fold(0.0f64, |a, v| a.max(v.abs()));
            m = m.max(vmax / self.spacing[axis]);
        }
        if m == 0.0 {
            f64::INFINITY
        } else {
            2.0 * CFL_MAX / m
        }
    }
}

/// Ghost slabs for one field on both sides of a sweep.
pub struct Ghosts<'a, T> {
    pub left: Side<'a, T>,
    pub right: Side<'a, T>,
}

impl<T> Ghosts<'_, T> {
    pub fn outflow() -> Self {
        Self {
            left: Side::Outflow,
            right: Side::Outflow,
        }
    }
}

/// Boundary data for one sweep of a whole state.
pub struct StateGhosts<'a> {
    pub plus: Ghosts<'a, f64>,
    pub minus: Ghosts<'a, f64>,
    pub off: Ghosts<'a, C64>,
}

impl StateGhosts<'_> {
    pub fn outflow() -> Self {
        Self {
            plus: Ghosts::outflow(),
            minus: Ghosts::outflow(),
            off: Ghosts::outflow(),
        }
    }
}

/// Sweeps all stored fields of `state` along `axis` for `dt`, returning the `f+-`
/// fluxes at `faces`.
pub fn sweep_state(
    state: &mut WignerState,
    field: &AdvectionField,
    axis: usize,
    dt: f64,
    ghosts: &StateGhosts,
    faces: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let h = field.spacing[axis];
    let shape = &field.shape;
    let fp = advection::sweep(
        &mut state.f_plus,
        shape,
        axis,
        &field.plus[axis],
        dt,
        h,
        ghosts.plus.left,
        ghosts.plus.right,
        faces,
    )?;
    let fm = advection::sweep(
        &mut state.f_minus,
        shape,
        axis,
        &field.minus[axis],
        dt,
        h,
        ghosts.minus.left,
        ghosts.minus.right,
        faces,
    )?;
    if let (Some(fi), Some(v)) = (state.f_i.as_mut(), field.off[axis].as_ref()) {
        advection::sweep(fi, shape, axis, v, dt, h, ghosts.off.left, ghosts.off.right, &[])?;
    }
    Ok((fp, fm))
}

/// Sweep order for the first half of a step; the second half runs it backwards.
pub fn sweep_order(dim: usize) -> Vec<usize> {
    (0..2 * dim).collect()
}

fn transport_half(state: &mut WignerState, field: &AdvectionField, dt: f64, forward: bool) -> Result<()> {
    let mut order = sweep_order(state.grid.dim());
    if !forward {
        order.reverse();
    }
    for axis in order {
        sweep_state(state, field, axis, 0.5 * dt, &StateGhosts::outflow(), &[])?;
    }
    Ok(())
}

/// Reusable stepper for a fixed grid and potential.
pub struct LiouvilleStepper<'a> {
    pub field: AdvectionField,
    pub pot: &'a TwoBandPotential,
    pub coupled: bool,
    table: Option<SourceTable>,
}

impl<'a> LiouvilleStepper<'a> {
    pub fn new(grid: &PhaseGrid, pot: &'a TwoBandPotential, coupled: bool) -> Result<Self> {
        Ok(Self {
            field: AdvectionField::new(grid, pot)?,
            pot,
            coupled,
            table: None,
        })
    }

    pub fn step(&mut self, state: &mut WignerState, dt: f64) -> Result<()> {
        if state.grid.shape() != self.field.shape {
            return Err(crate::error::Error::GridMismatch(
                "state grid differs from the stepper grid".into(),
            ));
        }
        transport_half(state, &self.field, dt, true)?;
        if self.coupled {
            if self.table.as_ref().is_none_or(|t| t.dt() != dt) {
                self.table = Some(SourceTable::new(&state.grid, self.pot, state.epsilon, dt));
            }
            self.table.as_ref().expect("table built above").apply(state)?;
        }
        transport_half(state, &self.field, dt, false)?;
        state.time += dt;
        Ok(())
    }
}

/// One step of the decoupled band transport; `fi` is left untouched.
pub fn adiabatic_step(state: &WignerState, pot: &TwoBandPotential, dt: f64) -> Result<WignerState> {
    let mut stepper = LiouvilleStepper::new(&state.grid, pot, false)?;
    let mut out = state.clone();
    let fi = out.f_i.take();
    stepper.step(&mut out, dt)?;
    out.f_i = fi;
    Ok(out)
}

/// One step of the coupled system with the exact source flow.
pub fn nonadiabatic_step(state: &WignerState, pot: &TwoBandPotential, dt: f64) -> Result<WignerState> {
    let mut stepper = LiouvilleStepper::new(&state.grid, pot, true)?;
    let mut out = state.clone();
    stepper.step(&mut out, dt)?;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LiouvilleParams {
    pub packet: PacketSpec,
    pub grid: PhaseGrid,
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    pub output_interval: f64,
    pub coupled: bool,
    pub snapshot_times: Vec<f64>,
}

pub struct LiouvilleRun {
    pub series: ObservableSeries,
    pub final_state: WignerState,
    pub snapshots: Vec<WignerState>,
    pub dt: f64,
}

/// Output step count and per-interval step count after reducing `dt` so that
/// it divides the output interval and satisfies `max_dt`.
pub(crate) fn schedule(t_final: f64, interval: f64, dt: f64, max_dt: f64) -> Result<(f64, usize, usize)> {
    if !(dt > 0.0) || !(interval > 0.0) || !(t_final >= 0.0) {
        return Err(invalid(format!(
            "need dt > 0, output interval > 0 and t_final >= 0 (got {dt}, {interval}, {t_final})"
        )));
    }
    let outputs = steps_in(t_final, interval).ok_or_else(|| {
        invalid(format!(
            "t_final {t_final} is not a multiple of the output interval {interval}"
        ))
    })?;
    let mut per = steps_in(interval, dt)
        .filter(|k| *k > 0)
        .ok_or_else(|| invalid(format!("output interval {interval} is not a multiple of dt {dt}")))?;
    while interval / per as f64 > max_dt {
        per *= 2;
    }
    Ok((interval / per as f64, outputs, per))
}

/// Full-domain run of the adiabatic or coupled Liouville system.
pub fn run_liouville(params: &LiouvilleParams, pot: &TwoBandPotential) -> Result<LiouvilleRun> {
    let mut state = init_wigner(&params.packet, &params.grid, params.epsilon)?;
    if !params.coupled {
        state.f_i = None;
    }
    let mut stepper = LiouvilleStepper::new(&params.grid, pot, params.coupled)?;
    let (dt, outputs, per) = schedule(
        params.t_final,
        params.output_interval,
        params.dt,
        stepper.field.max_dt(),
    )?;
    let mut series = ObservableSeries::new(SeriesSource::Liouville);
    let mut snapshots = Vec::new();
    for k in 0..=outputs {
        let t = k as f64 * params.output_interval;
        state.time = t;
        series.record_wigner(&state, t)?;
        if params.snapshot_times.iter().any(|s| (s - t).abs() < 1e-9) {
            snapshots.push(state.clone());
        }
        if k == outputs {
            break;
        }
        for _ in 0..per {
            stepper.step(&mut state, dt)?;
        }
    }
    Ok(LiouvilleRun {
        series,
        final_state: state,
        snapshots,
        dt,
    })
}
