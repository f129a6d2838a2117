//! Experiment and convergence-study drivers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, SolverKind};
use crate::harness::output::{densities_csv, series_csv, write_json, write_text};
use crate::hybrid::run_hybrid;
use crate::liouville::run_liouville;
use crate::observables::{cumulative_error, fit_rate, wave_densities, wigner_densities, ObservableSeries};
use crate::phase_space::WignerState;
use crate::schrodinger::{run_schrodinger, WaveField};

/// Result of one solver within a run.
#[derive(Clone, Debug, Serialize)]
pub struct SolverOutcome {
    pub solver: SolverKind,
    pub series: ObservableSeries,
    /// Step actually used after CFL and cadence reduction.
    pub dt: f64,
    pub wall_seconds: f64,
    /// Crossing-zone box for hybrid runs.
    pub zone: Option<Vec<[f64; 2]>>,
    /// `Err` against the Schrodinger reference at `t_final`, when one was run.
    pub err: Option<f64>,
}

impl SolverOutcome {
    pub fn final_p(&self) -> (f64, f64) {
        self.series.last().map_or((f64::NAN, f64::NAN), |(_, a, b)| (a, b))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    pub epsilon: f64,
    pub outcomes: Vec<SolverOutcome>,
    pub dir: Option<PathBuf>,
}

impl RunReport {
    pub fn outcome(&self, solver: SolverKind) -> Option<&SolverOutcome> {
        self.outcomes.iter().find(|o| o.solver == solver)
    }

    /// `Err` of the hybrid run against the reference.
    pub fn err(&self) -> Option<f64> {
        self.outcome(SolverKind::Hybrid).and_then(|o| o.err)
    }

    fn summary(&self) -> Value {
        let solvers: BTreeMap<&str, Value> = self
            .outcomes
            .iter()
            .map(|o| {
                let (pp, pm) = o.final_p();
                (
                    o.solver.name(),
                    json!({
                        "final_time": o.series.last().map(|l| l.0),
                        "final_p_plus": pp,
                        "final_p_minus": pm,
                        "err": o.err,
                        "dt": o.dt,
                        "wall_seconds": o.wall_seconds,
                        "zone": o.zone,
                    }),
                )
            })
            .collect();
        json!({
            "name": self.name,
            "epsilon": self.epsilon,
            "err": self.err(),
            "err_normalisation": "liouville spatial domain",
            "solvers": solvers,
        })
    }
}

/// Final spatial data of a phase-space solver plus its snapshots.
struct PhaseOutput {
    outcome: SolverOutcome,
    final_state: WignerState,
    snapshots: Vec<WignerState>,
}

fn run_phase(cfg: &ExperimentConfig, solver: SolverKind) -> Result<PhaseOutput> {
    let pot = cfg.potential()?;
    let start = Instant::now();
    let (series, dt, zone, final_state, snapshots) = match solver {
        SolverKind::Hybrid => {
            let r = run_hybrid(&cfg.hybrid_params()?, &pot)?;
            let zone = r.partition.zone();
            (r.series, r.dt, Some(zone), r.coarse, r.snapshots)
        }
        SolverKind::Adiabatic | SolverKind::Nonadiabatic => {
            let r = run_liouville(&cfg.liouville_params(solver == SolverKind::Nonadiabatic)?, &pot)?;
            (r.series, r.dt, None, r.final_state, r.snapshots)
        }
        SolverKind::Schrodinger => unreachable!("phase-space solvers only"),
    };
    Ok(PhaseOutput {
        outcome: SolverOutcome {
            solver,
            series,
            dt,
            wall_seconds: start.elapsed().as_secs_f64(),
            zone,
            err: None,
        },
        final_state,
        snapshots,
    })
}

fn time_tag(t: f64) -> String {
    format!("{t:.6}")
}

/// Runs every selected solver. With `out` set, writes `config.json`,
/// `series_<solver>.csv`, snapshot CSVs and `summary.json` into it.
pub fn run_experiment(cfg: &ExperimentConfig, raw: Option<&Value>, out: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let out = out.map(Path::to_path_buf).or_else(|| cfg.output_dir.clone());
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
        write_json(
            &dir.join("config.json"),
            &json!({ "input": raw, "config": cfg.to_value(), "resolved": cfg.resolved() }),
        )?;
    }
    let pot = cfg.potential()?;

    let mut reference: Option<WaveField> = None;
    let mut outcomes = Vec::new();
    let mut solvers = cfg.solvers.clone();
    solvers.sort();
    solvers.dedup();
    for solver in solvers {
        if solver == SolverKind::Schrodinger {
            let start = Instant::now();
            let params = cfg.schrodinger_params()?;
            let r = run_schrodinger(&params, &pot)?;
            if let Some(dir) = &out {
                for snap in &r.snapshots {
                    let d = wave_densities(snap, &pot)?;
                    write_text(
                        &dir.join(format!("snapshot_schrodinger_t{}.csv", time_tag(snap.time))),
                        &densities_csv(&d),
                    )?;
                }
            }
            outcomes.push(SolverOutcome {
                solver,
                series: r.series,
                dt: params.dt,
                wall_seconds: start.elapsed().as_secs_f64(),
                zone: None,
                err: None,
            });
            reference = Some(r.final_field);
            continue;
        }
        let mut p = run_phase(cfg, solver)?;
        if let Some(field) = &reference {
            p.outcome.err = Some(cumulative_error(field, &pot, &p.final_state)?);
        }
        if let Some(dir) = &out {
            for snap in &p.snapshots {
                write_text(
                    &dir.join(format!("snapshot_{}_t{}.csv", solver.name(), time_tag(snap.time))),
                    &densities_csv(&wigner_densities(snap)),
                )?;
            }
        }
        outcomes.push(p.outcome);
    }

    let report = RunReport {
        name: cfg.name.clone(),
        epsilon: cfg.epsilon,
        outcomes,
        dir: out.clone(),
    };
    if let Some(dir) = &out {
        for o in &report.outcomes {
            write_text(&dir.join(format!("series_{}.csv", o.solver.name())), &series_csv(&o.series))?;
        }
        write_json(&dir.join("summary.json"), &report.summary())?;
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub epsilon: f64,
    pub err: f64,
    pub p_plus_reference: f64,
    pub p_plus_hybrid: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `log Err` against `log eps`.
    pub slope: f64,
}

impl StudyReport {
    pub fn is_monotone_decreasing(&self) -> bool {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        rows.windows(2).all(|w| w[1].err < w[0].err)
    }
}

pub fn study_csv(report: &StudyReport) -> String {
    let mut s = String::from("epsilon,err,p_plus_schrodinger,p_plus_hybrid\n");
    for r in &report.rows {
        s.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.epsilon, r.err, r.p_plus_reference, r.p_plus_hybrid
        ));
    }
    s.push_str(&format!("slope,{:.16e}\n", report.slope));
    s
}

/// Runs the Schrodinger reference and the hybrid model at each `eps` and fits
/// the decay rate of `Err`.
pub fn run_convergence_study(base: &ExperimentConfig, epsilons: &[f64], out: Option<&Path>) -> Result<StudyReport> {
    if epsilons.len() < 3 {
        return Err(Error::Config(format!(
            "a convergence study needs at least 3 epsilon values, got {}",
            epsilons.len()
        )));
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut cfg = base.clone();
        cfg.epsilon = eps;
        cfg.solvers = vec![SolverKind::Schrodinger, SolverKind::Hybrid];
        cfg.output_dir = None;
        let sub = out.map(|d| d.join(format!("eps_{eps}")));
        let r = run_experiment(&cfg, None, sub.as_deref())?;
        let reference = r.outcome(SolverKind::Schrodinger).expect("reference was run");
        let hybrid = r.outcome(SolverKind::Hybrid).expect("hybrid was run");
        rows.push(StudyRow {
            epsilon: eps,
            err: hybrid.err.expect("error against reference"),
            p_plus_reference: reference.final_p().0,
            p_plus_hybrid: hybrid.final_p().0,
        });
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon, r.err)).collect();
    let report = StudyReport {
        slope: fit_rate(&pairs)?,
        rows,
    };
    if let Some(dir) = out {
        write_text(&dir.join("study.csv"), &study_csv(&report))?;
        write_json(&dir.join("study.json"), &report)?;
    }
    Ok(report)
}
