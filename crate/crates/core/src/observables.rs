//! Band populations, position densities and currents, cumulative masses, the
//! L1 cumulative-mass error and log-log rate fitting.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{integer_ratio, Axis};
use crate::linalg::{C64, ZERO};
use crate::phase_space::WignerState;
use crate::potentials::TwoBandPotential;
use crate::schrodinger::WaveField;

/// Most negative Schrodinger population accepted as round-off.
pub const UNDERSHOOT_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesSource {
    Schrodinger,
    Liouville,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableRecord {
    pub p_plus: f64,
    pub p_minus: f64,
}

pub enum StateRef<'a> {
    Wigner(&'a WignerState),
    Wave(&'a WaveField),
}

/// `P+-` for either representation.
pub fn compute_observables(state: StateRef, pot: &TwoBandPotential) -> Result<ObservableRecord> {
    match state {
        StateRef::Wigner(s) => {
            let (p_plus, p_minus) = s.band_masses();
            Ok(ObservableRecord { p_plus, p_minus })
        }
        StateRef::Wave(w) => {
            let (a, b) = w.band_densities(pot)?;
            let vol = w.grid.cell_volume();
            Ok(ObservableRecord {
                p_plus: a.iter().sum::<f64>() * vol,
                p_minus: b.iter().sum::<f64>() * vol,
            })
        }
    }
}

/// Time series of band populations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub source: SeriesSource,
    pub times: Vec<f64>,
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
}

impl ObservableSeries {
    pub fn new(source: SeriesSource) -> Self {
        Self {
            source,
            times: Vec::new(),
            p_plus: Vec::new(),
            p_minus: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends a record. Schrodinger populations must be non-negative up to
    /// `UNDERSHOOT_TOL`. Phase-space populations only need to be finite: the
    /// coupled `f+-` are not sign-definite, so once a band's positive mass has
    /// left the domain its remainder can be slightly negative.
    pub fn push(&mut self, t: f64, rec: ObservableRecord) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(invalid(format!("series times must increase: {t} after {last}")));
            }
        }
        if !(rec.p_plus.is_finite() && rec.p_minus.is_finite()) {
            return Err(invalid(format!(
                "non-finite population at t = {t}: P+ = {}, P- = {}",
                rec.p_plus, rec.p_minus
            )));
        }
        if self.source == SeriesSource::Schrodinger && (rec.p_plus < -UNDERSHOOT_TOL || rec.p_minus < -UNDERSHOOT_TOL) {
            return Err(invalid(format!(
                "negative population at t = {t}: P+ = {:e}, P- = {:e}",
                rec.p_plus, rec.p_minus
            )));
        }
        self.times.push(t);
        self.p_plus.push(rec.p_plus);
        self.p_minus.push(rec.p_minus);
        Ok(())
    }

    pub fn record_wave(&mut self, field: &WaveField, pot: &TwoBandPotential, t: f64) -> Result<()> {
        let rec = compute_observables(StateRef::Wave(field), pot)?;
        self.push(t, rec)
    }

    pub fn record_wigner(&mut self, state: &WignerState, t: f64) -> Result<()> {
        let (p_plus, p_minus) = state.band_masses();
        self.push(t, ObservableRecord { p_plus, p_minus })
    }

    /// Index of the sample at time `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    pub fn p_plus_at(&self, t: f64) -> Option<f64> {
        self.index_of(t).map(|i| self.p_plus[i])
    }

    pub fn last(&self) -> Option<(f64, f64, f64)> {
        let i = self.len().checked_sub(1)?;
        Some((self.times[i], self.p_plus[i], self.p_minus[i]))
    }

    /// `max |P+_self - P+_other|` over the times present in both series.
    pub fn max_p_plus_difference(&self, other: &ObservableSeries) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut common = 0;
        for (i, t) in self.times.iter().enumerate() {
            if let Some(j) = other.index_of(*t) {
                worst = worst.max((self.p_plus[i] - other.p_plus[j]).abs());
                common += 1;
            }
        }
        if common == 0 {
            return Err(Error::GridMismatch("series share no sample times".into()));
        }
        Ok(worst)
    }

    pub fn transitions(&self, criteria: &TransitionCriteria) -> Vec<Transition> {
        detect_transitions(&self.times, &self.p_plus, criteria)
    }
}

/// Position densities and currents on a spatial grid.
#[derive(Clone, Debug)]
pub struct BandDensities {
    pub axes: Vec<Axis>,
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
    /// Total current, one array per spatial dimension.
    pub current: Vec<Vec<f64>>,
}

/// `rho+- = int f+- dp` and `J = int p (f+ + f-) dp`.
pub fn wigner_densities(state: &WignerState) -> BandDensities {
    let g = &state.grid;
    let d = g.dim();
    let nm = g.momentum_len();
    let dp = g.momentum_cell_volume();
    let ns = g.spatial_len();
    let mut rho_plus = vec![0.0; ns];
    let mut rho_minus = vec![0.0; ns];
    let mut current = vec![vec![0.0; ns]; d];
    for s in 0..ns {
        for m in 0..nm {
            let (a, b) = (state.f_plus[s * nm + m], state.f_minus[s * nm + m]);
            rho_plus[s] += a;
            rho_minus[s] += b;
            let p = g.momentum_point(m);
            for k in 0..d {
                current[k][s] += p[k] * (a + b);
            }
        }
        rho_plus[s] *= dp;
        rho_minus[s] *= dp;
        for c in current.iter_mut() {
            c[s] *= dp;
        }
    }
    BandDensities {
        axes: g.spatial.clone(),
        rho_plus,
        rho_minus,
        current,
    }
}

fn spectral_gradient(values: &[C64], axes: &[Axis], k: usize, fft: &Arc<dyn Fft<f64>>, ifft: &Arc<dyn Fft<f64>>) -> Vec<C64> {
    let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
    let n = shape[k];
    let inner: usize = shape[k + 1..].iter().product();
    let outer: usize = shape[..k].iter().product();
    let base = 2.0 * std::f64::consts::PI / axes[k].length();
    let mut out = values.to_vec();
    let mut line = vec![ZERO; n];
    for o in 0..outer {
        for j in 0..inner {
            for i in 0..n {
                line[i] = values[(o * n + i) * inner + j];
            }
            fft.process(&mut line);
            for (i, z) in line.iter_mut().enumerate() {
                let m = if i < n / 2 { i as f64 } else if i == n / 2 { 0.0 } else { i as f64 - n as f64 };
                *z *= C64::new(0.0, base * m / n as f64);
            }
            ifft.process(&mut line);
            for i in 0..n {
                out[(o * n + i) * inner + j] = line[i];
            }
        }
    }
    out
}

/// `rho+- = |Pi+- psi|^2` and `J = eps Im(conj(psi) . grad psi)`.
pub fn wave_densities(field: &WaveField, pot: &TwoBandPotential) -> Result<BandDensities> {
    let (rho_plus, rho_minus) = field.band_densities(pot)?;
    let axes = &field.grid.axes;
    let mut planner = FftPlanner::new();
    let mut current = Vec::new();
    for k in 0..axes.len() {
        let fft = planner.plan_fft_forward(axes[k].n);
        let ifft = planner.plan_fft_inverse(axes[k].n);
        let mut j = vec![0.0; field.grid.len()];
        for comp in &field.psi {
            let grad = spectral_gradient(comp, axes, k, &fft, &ifft);
            for ((acc, z), dz) in j.iter_mut().zip(comp).zip(&grad) {
                *acc += field.epsilon * (z.conj() * dz).im;
            }
        }
        current.push(j);
    }
    Ok(BandDensities {
        axes: axes.clone(),
        rho_plus,
        rho_minus,
        current,
    })
}

/// Overlap weights mapping cells of `src` onto cells of `dst`: `(dst, src, length)`.
fn overlap_weights(src: &Axis, dst: &Axis) -> Vec<(usize, usize, f64)> {
    let mut w = Vec::new();
    let mut s = 0;
    for t in 0..dst.n {
        let (lo, hi) = (dst.face(t), dst.face(t + 1));
        while s < src.n && src.face(s + 1) <= lo {
            s += 1;
        }
        let mut k = s;
        while k < src.n && src.face(k) < hi {
            let len = src.face(k + 1).min(hi) - src.face(k).max(lo);
            if len > 0.0 {
                w.push((t, k, len));
            }
            k += 1;
        }
    }
    w
}

/// Conservative cell-average remap of a density from `src` axes onto `dst` axes.
/// Source cells outside `dst` are dropped.
pub fn restrict_density(values: &[f64], src: &[Axis], dst: &[Axis]) -> Result<Vec<f64>> {
    if src.len() != dst.len() {
        return Err(Error::GridMismatch(format!(
            "cannot remap a {}D density onto a {}D grid",
            src.len(),
            dst.len()
        )));
    }
    let len: usize = src.iter().map(|a| a.n).product();
    if values.len() != len {
        return Err(Error::GridMismatch(format!("{} values for {} cells", values.len(), len)));
    }
    let mut shape: Vec<usize> = src.iter().map(|a| a.n).collect();
    let mut cur = values.to_vec();
    for k in 0..src.len() {
        let w = overlap_weights(&src[k], &dst[k]);
        let outer: usize = shape[..k].iter().product();
        let inner: usize = shape[k + 1..].iter().product();
        let (ns, nd) = (shape[k], dst[k].n);
        let mut next = vec![0.0; outer * nd * inner];
        for o in 0..outer {
            for &(t, s, l) in &w {
                let f = l / dst[k].spacing;
                for j in 0..inner {
                    next[(o * nd + t) * inner + j] += f * cur[(o * ns + s) * inner + j];
                }
            }
        }
        shape[k] = nd;
        cur = next;
    }
    Ok(cur)
}

/// `M(x) = int over the lower-left orthant up to the upper corner of cell x of (rho+ + rho-)`.
pub fn cumulative_mass(rho_plus: &[f64], rho_minus: &[f64], axes: &[Axis]) -> Result<Vec<f64>> {
    let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
    let len: usize = shape.iter().product();
    if rho_plus.len() != len || rho_minus.len() != len {
        return Err(Error::GridMismatch(format!(
            "densities of length {} and {} on a grid of {} cells",
            rho_plus.len(),
            rho_minus.len(),
            len
        )));
    }
    let vol: f64 = axes.iter().map(|a| a.spacing).product();
    let mut m: Vec<f64> = rho_plus.iter().zip(rho_minus).map(|(a, b)| (a + b) * vol).collect();
    for k in 0..shape.len() {
        let outer: usize = shape[..k].iter().product();
        let inner: usize = shape[k + 1..].iter().product();
        let n = shape[k];
        for o in 0..outer {
            for i in 1..n {
                for j in 0..inner {
                    let prev = m[(o * n + i - 1) * inner + j];
                    m[(o * n + i) * inner + j] += prev;
                }
            }
        }
    }
    Ok(m)
}

/// `(1/|Omega|) int |M_a - M_b| dx` on a common grid.
pub fn l1_cumulative_error(m_a: &[f64], m_b: &[f64], axes: &[Axis]) -> Result<f64> {
    let len: usize = axes.iter().map(|a| a.n).product();
    if m_a.len() != len || m_b.len() != len {
        return Err(Error::GridMismatch(format!(
            "cumulative masses of length {} and {} on a grid of {} cells",
            m_a.len(),
            m_b.len(),
            len
        )));
    }
    let vol: f64 = axes.iter().map(|a| a.spacing).product();
    let omega: f64 = axes.iter().map(|a| a.length()).product();
    Ok(m_a.iter().zip(m_b).map(|(a, b)| (a - b).abs()).sum::<f64>() * vol / omega)
}

/// Err between a wavefunction and a Wigner state, compared on the Wigner spatial grid.
pub fn cumulative_error(field: &WaveField, pot: &TwoBandPotential, state: &WignerState) -> Result<f64> {
    let (sp, sm) = field.band_densities(pot)?;
    let dst = &state.grid.spatial;
    let rp = restrict_density(&sp, &field.grid.axes, dst)?;
    let rm = restrict_density(&sm, &field.grid.axes, dst)?;
    let w = wigner_densities(state);
    let ms = cumulative_mass(&rp, &rm, dst)?;
    let ml = cumulative_mass(&w.rho_plus, &w.rho_minus, dst)?;
    l1_cumulative_error(&ms, &ml, dst)
}

/// Least-squares slope of `log err` against `log eps`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 3 {
        return Err(invalid(format!("rate fit needs at least 3 points, got {}", pairs.len())));
    }
    if let Some((e, r)) = pairs.iter().find(|(e, r)| !(*e > 0.0 && *r > 0.0)) {
        return Err(invalid(format!("rate fit needs positive values, got ({e}, {r})")));
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs distinct epsilon values"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Thresholds for locating jumps in a population curve.
#[derive(Clone, Copy, Debug)]
pub struct TransitionCriteria {
    /// Minimum `|dP/dt|` for a sample interval to belong to a jump.
    pub rate: f64,
    /// Minimum net change over a jump.
    pub min_jump: f64,
    /// Jumps separated by less than this are merged.
    pub merge_gap: f64,
}

impl Default for TransitionCriteria {
    fn default() -> Self {
        Self {
            rate: 0.25,
            min_jump: 0.02,
            merge_gap: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub start: f64,
    pub end: f64,
    /// Time at which half of the jump has occurred.
    pub time: f64,
    pub jump: f64,
}

pub fn detect_transitions(times: &[f64], values: &[f64], c: &TransitionCriteria) -> Vec<Transition> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for k in 0..times.len().saturating_sub(1) {
        let rate = (values[k + 1] - values[k]) / (times[k + 1] - times[k]);
        if rate.abs() < c.rate {
            continue;
        }
        match runs.last_mut() {
            Some((_, end)) if times[k] - times[*end] <= c.merge_gap => *end = k + 1,
            _ => runs.push((k, k + 1)),
        }
    }
    runs.into_iter()
        .filter_map(|(a, b)| {
            let jump = values[b] - values[a];
            if jump.abs() < c.min_jump {
                return None;
            }
            let half = values[a] + 0.5 * jump;
            let mut time = times[b];
            for k in a..b {
                let (v0, v1) = (values[k], values[k + 1]);
                if (v0 - half) * (v1 - half) <= 0.0 && v1 != v0 {
                    time = times[k] + (half - v0) / (v1 - v0) * (times[k + 1] - times[k]);
                    break;
                }
            }
            Some(Transition {
                start: times[a],
                end: times[b],
                time,
                jump,
            })
        })
        .collect()
}

/// Checks that `dst` is nested in `src` with integer ratio, for exact remaps.
pub fn is_nested(src: &Axis, dst: &Axis) -> bool {
    integer_ratio(dst.spacing, src.spacing).is_some_and(|k| k >= 1)
        && integer_ratio(dst.min - src.min, src.spacing).is_some()
}
