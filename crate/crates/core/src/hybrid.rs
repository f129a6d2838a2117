//! Hybrid scheme: the decoupled band transport on a coarse grid covering the
//! whole domain, and the coupled system on a refined grid over the crossing zone.
//!
//! Every spatial sweep runs on both grids. Fine ghost cells are filled by limited
//! linear prolongation of coarse data (`fi` enters as zero), coarse fluxes at the
//! zone faces are replaced by the averaged fine fluxes, and coarse cells under the
//! zone are overwritten by the fine cell averages. The composite is conservative.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{strides, Axis, PhaseGrid};
use crate::linalg::{C64, ZERO};
use crate::liouville::advection::{split_shape, van_leer};
use crate::liouville::{
    schedule, sweep_order, sweep_state, AdvectionField, Ghosts, Side, SourceTable, StateGhosts,
};
use crate::observables::{ObservableSeries, SeriesSource};
use crate::phase_space::{init_wigner, sample_wigner, WignerState};
use crate::potentials::TwoBandPotential;
use crate::schrodinger::PacketSpec;

/// Default zone half-width factor: the zone is `|x_k| <= C0 sqrt(eps)`.
pub const DEFAULT_C0: f64 = 3.0;

const SNAP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HybridPartition {
    pub crossing_center: Vec<f64>,
    pub c0: f64,
    /// `C0 sqrt(eps)` before snapping to coarse faces.
    pub half_width: f64,
    pub refinement: usize,
    pub momentum_refinement: usize,
    /// Coarse cell range `[lo, hi)` of the zone per spatial axis.
    pub zone_lo: Vec<usize>,
    pub zone_hi: Vec<usize>,
    pub coarse: PhaseGrid,
    pub fine: PhaseGrid,
}

impl HybridPartition {
    pub fn dim(&self) -> usize {
        self.coarse.dim()
    }

    /// Snapped zone extent per spatial axis.
    pub fn zone(&self) -> Vec<[f64; 2]> {
        self.fine.spatial.iter().map(|a| [a.min, a.max()]).collect()
    }

    /// True when the zone covers the whole spatial domain.
    pub fn is_degenerate(&self) -> bool {
        (0..self.dim()).all(|k| self.zone_lo[k] == 0 && self.zone_hi[k] == self.coarse.spatial[k].n)
    }

    /// Refinement ratio along phase-space axis `a`.
    fn ratio(&self, a: usize) -> usize {
        if a < self.dim() {
            self.refinement
        } else {
            self.momentum_refinement
        }
    }

    /// Coarse index covering fine index `f` along axis `a`.
    fn coarse_index(&self, a: usize, f: usize) -> usize {
        let base = if a < self.dim() { self.zone_lo[a] } else { 0 };
        base + f / self.ratio(a)
    }

    /// Offset of fine cell `f` within its coarse cell, in coarse cell units.
    fn offset(&self, a: usize, f: usize) -> f64 {
        let r = self.ratio(a);
        ((f % r) as f64 + 0.5) / r as f64 - 0.5
    }
}

/// Builds the coarse/fine partition for the zone `|x_k| <= C0 sqrt(eps)` around the origin.
///
/// The zone is snapped outward to coarse faces and clamped to the domain; a zone
/// covering the domain gives the degenerate partition.
pub fn build_partition(
    epsilon: f64,
    c0: f64,
    coarse: &PhaseGrid,
    refinement: usize,
    momentum_refinement: usize,
) -> Result<HybridPartition> {
    if !(epsilon > 0.0 && c0 > 0.0) {
        return Err(invalid(format!("need eps > 0 and C0 > 0, got {epsilon} and {c0}")));
    }
    if ![2, 4, 8].contains(&refinement) {
        return Err(invalid(format!("refinement ratio must be 2, 4 or 8, got {refinement}")));
    }
    if ![1, 2, 4, 8].contains(&momentum_refinement) {
        return Err(invalid(format!(
            "momentum refinement must be 1, 2, 4 or 8, got {momentum_refinement}"
        )));
    }
    let d = coarse.dim();
    let half_width = c0 * epsilon.sqrt();
    let center = vec![0.0; d];
    let mut zone_lo = Vec::new();
    let mut zone_hi = Vec::new();
    let mut spatial = Vec::new();
    for k in 0..d {
        let ax = &coarse.spatial[k];
        if !(ax.min < center[k] && center[k] < ax.max()) {
            return Err(invalid(format!(
                "crossing point {} outside the spatial domain [{}, {}]",
                center[k],
                ax.min,
                ax.max()
            )));
        }
        let lo = ((center[k] - half_width - ax.min) / ax.spacing + SNAP_TOL).floor().max(0.0) as usize;
        let hi = (((center[k] + half_width - ax.min) / ax.spacing - SNAP_TOL).ceil() as usize).min(ax.n);
        if hi <= lo {
            return Err(Error::Misaligned(format!("empty zone on axis {k}")));
        }
        zone_lo.push(lo);
        zone_hi.push(hi);
        spatial.push(Axis {
            min: ax.face(lo),
            n: (hi - lo) * refinement,
            spacing: ax.spacing / refinement as f64,
        });
    }
    let momentum = coarse
        .momentum
        .iter()
        .map(|a| Axis {
            min: a.min,
            n: a.n * momentum_refinement,
            spacing: a.spacing / momentum_refinement as f64,
        })
        .collect();
    let fine = PhaseGrid::new(spatial, momentum)?;
    for k in 0..d {
        let (c, f) = (&coarse.spatial[k], &fine.spatial[k]);
        let r = (f.min - c.min) / c.spacing;
        if (r - r.round()).abs() > SNAP_TOL || (f.length() - (zone_hi[k] - zone_lo[k]) as f64 * c.spacing).abs() > SNAP_TOL {
            return Err(Error::Misaligned(format!("zone faces on axis {k} do not match coarse faces")));
        }
    }
    Ok(HybridPartition {
        crossing_center: center,
        c0,
        half_width,
        refinement,
        momentum_refinement,
        zone_lo,
        zone_hi,
        coarse: coarse.clone(),
        fine,
    })
}

fn unravel(mut i: usize, shape: &[usize], out: &mut [usize]) {
    for k in (0..shape.len()).rev() {
        out[k] = i % shape[k];
        i /= shape[k];
    }
}

fn ravel(idx: &[usize], stride: &[usize]) -> usize {
    idx.iter().zip(stride).map(|(i, s)| i * s).sum()
}

/// Limited linear reconstruction of `u` at coarse cell `c` displaced by `xi` (cell units).
fn reconstruct(u: &[f64], shape: &[usize], stride: &[usize], c: &[usize], xi: &[f64]) -> f64 {
    let at = ravel(c, stride);
    let u0 = u[at];
    let mut v = u0;
    for a in 0..shape.len() {
        if xi[a] == 0.0 || c[a] == 0 || c[a] + 1 >= shape[a] {
            continue;
        }
        let (um, up) = (u[at - stride[a]], u[at + stride[a]]);
        v += xi[a] * van_leer(u0 - um, up - u0);
    }
    v
}

/// Prolonged fine ghost slabs of `f+-` along spatial axis `axis`.
pub struct InterfaceGhosts {
    pub plus: [Option<Vec<f64>>; 2],
    pub minus: [Option<Vec<f64>>; 2],
    /// Zero slab for `fi` inflow.
    pub zero: Vec<C64>,
}

impl InterfaceGhosts {
    pub fn state_ghosts(&self) -> StateGhosts<'_> {
        fn side(g: &Option<Vec<f64>>) -> Side<'_, f64> {
            match g {
                Some(v) => Side::Given(v.as_slice()),
                None => Side::Outflow,
            }
        }
        let off = |g: &Option<Vec<f64>>| match g {
            Some(_) => Side::Given(self.zero.as_slice()),
            None => Side::Outflow,
        };
        StateGhosts {
            plus: Ghosts {
                left: side(&self.plus[0]),
                right: side(&self.plus[1]),
            },
            minus: Ghosts {
                left: side(&self.minus[0]),
                right: side(&self.minus[1]),
            },
            off: Ghosts {
                left: off(&self.plus[0]),
                right: off(&self.plus[1]),
            },
        }
    }
}

/// Fills the fine ghost cells for a sweep along spatial axis `axis` from the coarse
/// state. Sides on the physical boundary get `None` (outflow).
pub fn exchange_interface(
    partition: &HybridPartition,
    coarse: &WignerState,
    fine: &WignerState,
    axis: usize,
) -> Result<InterfaceGhosts> {
    if (coarse.time - fine.time).abs() > 1e-12 * coarse.time.abs().max(1.0) {
        return Err(Error::TimeLevel(coarse.time, fine.time));
    }
    if axis >= partition.dim() {
        return Err(invalid(format!("interface exchange along non-spatial axis {axis}")));
    }
    let cshape = partition.coarse.shape();
    let cstride = strides(&cshape);
    let fshape = partition.fine.shape();
    let (outer, _, inner) = split_shape(&fshape, axis);
    let nd = fshape.len();
    let r = partition.refinement;
    let interior = [partition.zone_lo[axis] > 0, partition.zone_hi[axis] < cshape[axis]];

    let slab = |u: &[f64], side: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(outer * 2 * inner);
        let mut idx = vec![0usize; nd];
        let mut c = vec![0usize; nd];
        let mut xi = vec![0.0; nd];
        let outer_shape = &fshape[..axis];
        let inner_shape = &fshape[axis + 1..];
        for o in 0..outer {
            unravel(o, outer_shape, &mut idx[..axis]);
            for layer in 0..2 {
                for j in 0..inner {
                    unravel(j, inner_shape, &mut idx[axis + 1..]);
                    for a in 0..nd {
                        if a == axis {
                            let d = (layer as f64 + 0.5) / r as f64;
                            if side == 0 {
                                c[a] = partition.zone_lo[a] - 1;
                                xi[a] = 0.5 - d;
                            } else {
                                c[a] = partition.zone_hi[a];
                                xi[a] = d - 0.5;
                            }
                        } else {
                            c[a] = partition.coarse_index(a, idx[a]);
                            xi[a] = partition.offset(a, idx[a]);
                        }
                    }
                    out.push(reconstruct(u, &cshape, &cstride, &c, &xi));
                }
            }
        }
        out
    };
    let build = |u: &[f64]| -> [Option<Vec<f64>>; 2] {
        [interior[0].then(|| slab(u, 0)), interior[1].then(|| slab(u, 1))]
    };
    Ok(InterfaceGhosts {
        plus: build(&coarse.f_plus),
        minus: build(&coarse.f_minus),
        zero: vec![ZERO; outer * 2 * inner],
    })
}

/// Overwrites coarse cells under the zone with fine cell averages.
pub fn restrict_to_coarse(partition: &HybridPartition, fine: &WignerState, coarse: &mut WignerState) {
    restrict_with(&fine_to_coarse(partition), restrict_weight(partition), fine, coarse);
}

fn restrict_weight(partition: &HybridPartition) -> f64 {
    1.0 / (0..partition.coarse.shape().len()).map(|a| partition.ratio(a)).product::<usize>() as f64
}

/// Coarse cell index of every fine cell.
fn fine_to_coarse(partition: &HybridPartition) -> Vec<usize> {
    let cstride = strides(&partition.coarse.shape());
    let fshape = partition.fine.shape();
    let nd = fshape.len();
    let mut idx = vec![0usize; nd];
    let mut c = vec![0usize; nd];
    (0..partition.fine.len())
        .map(|i| {
            unravel(i, &fshape, &mut idx);
            for a in 0..nd {
                c[a] = partition.coarse_index(a, idx[a]);
            }
            ravel(&c, &cstride)
        })
        .collect()
}

fn restrict_with(coarse_of: &[usize], weight: f64, fine: &WignerState, coarse: &mut WignerState) {
    for &at in coarse_of {
        coarse.f_plus[at] = 0.0;
        coarse.f_minus[at] = 0.0;
    }
    for ((&at, fp), fm) in coarse_of.iter().zip(&fine.f_plus).zip(&fine.f_minus) {
        coarse.f_plus[at] += fp * weight;
        coarse.f_minus[at] += fm * weight;
    }
}

/// Both grids sample the analytic data; coarse cells under the zone then take fine averages.
fn initial_states(partition: &HybridPartition, packet: &PacketSpec, epsilon: f64) -> Result<(WignerState, WignerState)> {
    let mut coarse = init_wigner(packet, &partition.coarse, epsilon)?;
    coarse.f_i = None;
    let fine = sample_wigner(packet, &partition.fine, epsilon);
    restrict_to_coarse(partition, &fine, &mut coarse);
    Ok((coarse, fine))
}

/// The coupled composite stepper.
pub struct HybridSolver<'a> {
    pub partition: HybridPartition,
    pub pot: &'a TwoBandPotential,
    pub coarse_field: AdvectionField,
    pub fine_field: AdvectionField,
    pub coarse: WignerState,
    pub fine: WignerState,
    table: Option<SourceTable>,
    /// Fine-to-coarse cell map used by the restriction.
    coarse_of: Vec<usize>,
    /// Covered coarse cells are stale until the next restriction.
    stale: bool,
}

impl<'a> HybridSolver<'a> {
    pub fn new(partition: HybridPartition, pot: &'a TwoBandPotential, packet: &PacketSpec, epsilon: f64) -> Result<Self> {
        let (coarse, fine) = initial_states(&partition, packet, epsilon)?;
        Ok(Self {
            coarse_field: AdvectionField::new(&partition.coarse, pot)?,
            fine_field: AdvectionField::new(&partition.fine, pot)?,
            coarse_of: fine_to_coarse(&partition),
            partition,
            pot,
            coarse,
            fine,
            table: None,
            stale: false,
        })
    }

    /// Brings the covered coarse cells up to date with the fine grid.
    fn sync(&mut self) {
        if self.stale {
            restrict_with(&self.coarse_of, restrict_weight(&self.partition), &self.fine, &mut self.coarse);
            self.stale = false;
        }
    }

    pub fn max_dt(&self) -> f64 {
        self.coarse_field.max_dt().min(self.fine_field.max_dt())
    }

    fn spatial_sweep(&mut self, axis: usize, dt: f64) -> Result<()> {
        self.sync();
        let p = &self.partition;
        let ghosts = exchange_interface(p, &self.coarse, &self.fine, axis)?;
        let cn = p.coarse.spatial[axis].n;
        let (lo, hi) = (p.zone_lo[axis], p.zone_hi[axis]);
        let mut cfaces = Vec::new();
        if lo > 0 {
            cfaces.push(lo);
        }
        if hi < cn {
            cfaces.push(hi);
        }
        let (cp, cm) = sweep_state(&mut self.coarse, &self.coarse_field, axis, dt, &StateGhosts::outflow(), &cfaces)?;
        let nf = p.fine.spatial[axis].n;
        let (fp, fm) = sweep_state(&mut self.fine, &self.fine_field, axis, dt, &ghosts.state_ghosts(), &[0, nf])?;
        if !cfaces.is_empty() {
            let lambda = dt / p.coarse.spatial[axis].spacing;
            self.reflux(axis, &cfaces, lambda, &cp, &fp, true);
            self.reflux(axis, &cfaces, lambda, &cm, &fm, false);
        }
        self.stale = true;
        Ok(())
    }

    /// Replaces the coarse flux at the zone faces by the mean fine flux.
    fn reflux(&mut self, axis: usize, cfaces: &[usize], lambda: f64, cflux: &[f64], fflux: &[f64], plus: bool) {
        let p = &self.partition;
        let cshape = p.coarse.shape();
        let fshape = p.fine.shape();
        let nd = cshape.len();
        let (c_outer, cn, c_inner) = split_shape(&cshape, axis);
        let (f_outer, _, f_inner) = split_shape(&fshape, axis);
        let (lo, hi) = (p.zone_lo[axis], p.zone_hi[axis]);
        let weight = 1.0 / (0..nd).filter(|a| *a != axis).map(|a| p.ratio(a)).product::<usize>() as f64;

        // mean fine flux per coarse transverse cell and side
        let mut mean = vec![[0.0f64; 2]; c_outer * c_inner];
        let c_outer_shape = &cshape[..axis];
        let c_inner_shape = &cshape[axis + 1..];
        let c_outer_stride = strides(c_outer_shape);
        let c_inner_stride = strides(c_inner_shape);
        let mut idx = vec![0usize; nd];
        for o in 0..f_outer {
            unravel(o, &fshape[..axis], &mut idx[..axis]);
            let co: Vec<usize> = (0..axis).map(|a| p.coarse_index(a, idx[a])).collect();
            let oc = ravel(&co, &c_outer_stride);
            for j in 0..f_inner {
                unravel(j, &fshape[axis + 1..], &mut idx[axis + 1..]);
                let cj: Vec<usize> = (axis + 1..nd).map(|a| p.coarse_index(a, idx[a])).collect();
                let jc = ravel(&cj, &c_inner_stride);
                let m = &mut mean[oc * c_inner + jc];
                m[0] += weight * fflux[(o * 2) * f_inner + j];
                m[1] += weight * fflux[(o * 2 + 1) * f_inner + j];
            }
        }

        let field = if plus { &mut self.coarse.f_plus } else { &mut self.coarse.f_minus };
        let nfaces = cfaces.len();
        let mut tidx = vec![0usize; nd];
        for o in 0..c_outer {
            unravel(o, c_outer_shape, &mut tidx[..axis]);
            for j in 0..c_inner {
                unravel(j, c_inner_shape, &mut tidx[axis + 1..]);
                let covered = (0..p.dim()).filter(|a| *a != axis).all(|a| (p.zone_lo[a]..p.zone_hi[a]).contains(&tidx[a]));
                if !covered {
                    continue;
                }
                let m = mean[o * c_inner + j];
                for (k, &face) in cfaces.iter().enumerate() {
                    let fc = cflux[(o * nfaces + k) * c_inner + j];
                    if face == lo {
                        // coarse cell left of the zone
                        field[(o * cn + lo - 1) * c_inner + j] += lambda * (fc - m[0]);
                    } else {
                        debug_assert_eq!(face, hi);
                        field[(o * cn + hi) * c_inner + j] += lambda * (m[1] - fc);
                    }
                }
            }
        }
    }

    fn momentum_sweep(&mut self, axis: usize, dt: f64) -> Result<()> {
        sweep_state(&mut self.coarse, &self.coarse_field, axis, dt, &StateGhosts::outflow(), &[])?;
        sweep_state(&mut self.fine, &self.fine_field, axis, dt, &StateGhosts::outflow(), &[])?;
        self.stale = true;
        Ok(())
    }

    fn sweep(&mut self, axis: usize, dt: f64) -> Result<()> {
        if axis < self.partition.dim() {
            self.spatial_sweep(axis, dt)
        } else {
            self.momentum_sweep(axis, dt)
        }
    }

    pub fn step(&mut self, dt: f64) -> Result<()> {
        let order = sweep_order(self.partition.dim());
        for &a in &order {
            self.sweep(a, 0.5 * dt)?;
        }
        if self.table.as_ref().is_none_or(|t| t.dt() != dt) {
            self.table = Some(SourceTable::new(&self.fine.grid, self.pot, self.fine.epsilon, dt));
        }
        self.table.as_ref().expect("table built above").apply(&mut self.fine)?;
        self.stale = true;
        for &a in order.iter().rev() {
            self.sweep(a, 0.5 * dt)?;
        }
        self.sync();
        self.coarse.time += dt;
        self.fine.time += dt;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct HybridParams {
    pub packet: PacketSpec,
    pub coarse: PhaseGrid,
    pub epsilon: f64,
    pub c0: f64,
    pub refinement: usize,
    pub momentum_refinement: usize,
    pub dt: f64,
    pub t_final: f64,
    pub output_interval: f64,
    pub snapshot_times: Vec<f64>,
}

pub struct HybridRun {
    pub series: ObservableSeries,
    pub partition: HybridPartition,
    pub coarse: WignerState,
    pub fine: WignerState,
    pub snapshots: Vec<WignerState>,
    pub dt: f64,
}

/// Runs the hybrid scheme, recording populations on the composite (coarse) grid.
pub fn run_hybrid(params: &HybridParams, pot: &TwoBandPotential) -> Result<HybridRun> {
    let partition = build_partition(
        params.epsilon,
        params.c0,
        &params.coarse,
        params.refinement,
        params.momentum_refinement,
    )?;
    let mut solver = HybridSolver::new(partition, pot, &params.packet, params.epsilon)?;
    let (dt, outputs, per) = schedule(params.t_final, params.output_interval, params.dt, solver.max_dt())?;
    let mut series = ObservableSeries::new(SeriesSource::Liouville);
    let mut snapshots = Vec::new();
    for k in 0..=outputs {
        let t = k as f64 * params.output_interval;
        solver.coarse.time = t;
        solver.fine.time = t;
        series.record_wigner(&solver.coarse, t)?;
        if params.snapshot_times.iter().any(|s| (s - t).abs() < 1e-9) {
            snapshots.push(solver.coarse.clone());
        }
        if k == outputs {
            break;
        }
        for _ in 0..per {
            solver.step(dt)?;
        }
    }
    Ok(HybridRun {
        series,
        partition: solver.partition,
        coarse: solver.coarse,
        fine: solver.fine,
        snapshots,
        dt,
    })
}
