//! Experiment configuration: JSON schema, layered merging and resolution to
//! concrete solver parameters.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{Axis, PhaseGrid};
use crate::hybrid::HybridParams;
use crate::liouville::LiouvilleParams;
use crate::potentials::{ModelKind, TwoBandPotential};
use crate::schrodinger::{PacketSpec, SchrodingerParams, SpatialGrid};

/// A number, or `coeff * eps^power`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scaled {
    Fixed(f64),
    Rule { coeff: f64, power: f64 },
}

impl Scaled {
    pub fn eval(&self, eps: f64) -> f64 {
        match *self {
            Scaled::Fixed(v) => v,
            Scaled::Rule { coeff, power } => coeff * eps.powf(power),
        }
    }

    pub fn eps(coeff: f64, power: f64) -> Self {
        Scaled::Rule { coeff, power }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Schrodinger,
    Adiabatic,
    Nonadiabatic,
    Hybrid,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Schrodinger => "schrodinger",
            SolverKind::Adiabatic => "adiabatic",
            SolverKind::Nonadiabatic => "nonadiabatic",
            SolverKind::Hybrid => "hybrid",
        }
    }

    /// Parses a solver list: a single name, `both` (schrodinger and hybrid), `all`,
    /// or a comma-separated list.
    pub fn parse_list(s: &str) -> Result<Vec<SolverKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim) {
            match part {
                "both" => out.extend([SolverKind::Schrodinger, SolverKind::Hybrid]),
                "all" => out.extend([
                    SolverKind::Schrodinger,
                    SolverKind::Adiabatic,
                    SolverKind::Nonadiabatic,
                    SolverKind::Hybrid,
                ]),
                name => out.push(
                    serde_json::from_value(Value::String(name.into()))
                        .map_err(|_| Error::Config(format!("unknown solver `{name}`")))?,
                ),
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaRule {
    /// `delta = c sqrt(eps)`.
    SqrtEps(f64),
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    pub a_plus: f64,
    pub a_minus: f64,
    pub x0: Vec<Scaled>,
    pub p0: Vec<f64>,
    /// Gaussian width `A`; defaults to `1/eps`.
    #[serde(default)]
    pub width: Option<Scaled>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchrodingerConfig {
    pub domain: Vec<[f64; 2]>,
    pub dx: Scaled,
    pub dt: Scaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiouvilleConfig {
    pub x_domain: Vec<[f64; 2]>,
    pub p_domain: Vec<[f64; 2]>,
    /// Coarse spatial spacing.
    pub h: Scaled,
    /// Coarse momentum spacing; defaults to `h`.
    #[serde(default)]
    pub hp: Option<Scaled>,
    /// Requested step; halved automatically until every sweep is stable.
    pub dt: Scaled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridConfig {
    pub c0: f64,
    pub refinement: usize,
    pub momentum_refinement: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelKind,
    pub epsilon: f64,
    pub delta: DeltaRule,
    pub packet: PacketConfig,
    pub t_final: Scaled,
    pub output_interval: Scaled,
    pub solvers: Vec<SolverKind>,
    pub schrodinger: SchrodingerConfig,
    pub liouville: LiouvilleConfig,
    pub hybrid: HybridConfig,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Run directory; the CLI `--out` flag takes precedence.
    #[serde(default)]
    pub output_dir: Option<std::path::PathBuf>,
}

/// Recursively merges `over` into `base`; objects merge key-wise, other values replace.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Applies `key.path=value`; the value is parsed as JSON, falling back to a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| match parse_number(raw) {
        Some(v) => serde_json::json!(v),
        None => Value::String(raw.to_string()),
    });
    let mut slot = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = slot
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{}` is not an object", keys[..i].join("."))))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        slot = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(Error::Config(format!("empty override key in `{assignment}`")))
}

/// Parses `2^-8`, `1/256` or a plain float.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((b, e)) = s.split_once('^') {
        return Some(b.trim().parse::<f64>().ok()?.powf(e.trim().parse::<f64>().ok()?));
    }
    if let Some((a, b)) = s.split_once('/') {
        return Some(a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?);
    }
    s.parse::<f64>().ok()
}

impl ExperimentConfig {
    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.model.dim();
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        match self.delta {
            DeltaRule::SqrtEps(c) | DeltaRule::Value(c) if !(c > 0.0) => {
                return bad(format!("delta must be positive, got {c}"));
            }
            _ => {}
        }
        let p = &self.packet;
        if p.x0.len() != d || p.p0.len() != d {
            return bad(format!("packet x0/p0 must have {d} components for model {:?}", self.model));
        }
        if (p.a_plus.powi(2) + p.a_minus.powi(2) - 1.0).abs() > 1e-12 {
            return bad(format!(
                "band amplitudes must satisfy a+^2 + a-^2 = 1, got {} and {}",
                p.a_plus, p.a_minus
            ));
        }
        let dims = [
            ("schrodinger.domain", self.schrodinger.domain.len()),
            ("liouville.x_domain", self.liouville.x_domain.len()),
            ("liouville.p_domain", self.liouville.p_domain.len()),
        ];
        for (name, n) in dims {
            if n != d {
                return bad(format!("{name} must have {d} intervals, got {n}"));
            }
        }
        for (name, s) in [
            ("schrodinger.dx", self.schrodinger.dx),
            ("schrodinger.dt", self.schrodinger.dt),
            ("liouville.h", self.liouville.h),
            ("liouville.dt", self.liouville.dt),
            ("output_interval", self.output_interval),
        ] {
            if !(s.eval(self.epsilon) > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.t_final.eval(self.epsilon) >= 0.0) {
            return bad("t_final must be non-negative".into());
        }
        if self.solvers.is_empty() {
            return bad("at least one solver must be selected".into());
        }
        if !(self.hybrid.c0 > 0.0) {
            return bad(format!("hybrid.c0 must be positive, got {}", self.hybrid.c0));
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        match self.delta {
            DeltaRule::SqrtEps(c) => c * self.epsilon.sqrt(),
            DeltaRule::Value(v) => v,
        }
    }

    pub fn potential(&self) -> Result<TwoBandPotential> {
        TwoBandPotential::new(self.model, self.delta())
    }

    pub fn packet(&self) -> PacketSpec {
        let eps = self.epsilon;
        PacketSpec {
            a_plus: self.packet.a_plus,
            a_minus: self.packet.a_minus,
            x0: self.packet.x0.iter().map(|s| s.eval(eps)).collect(),
            p0: self.packet.p0.clone(),
            width: self.packet.width.map_or(1.0 / eps, |w| w.eval(eps)),
        }
    }

    pub fn t_final(&self) -> f64 {
        self.t_final.eval(self.epsilon)
    }

    pub fn output_interval(&self) -> f64 {
        self.output_interval.eval(self.epsilon)
    }

    pub fn schrodinger_params(&self) -> Result<SchrodingerParams> {
        let eps = self.epsilon;
        Ok(SchrodingerParams {
            packet: self.packet(),
            grid: SpatialGrid::with_spacing(&self.schrodinger.domain, self.schrodinger.dx.eval(eps))?,
            epsilon: eps,
            dt: self.schrodinger.dt.eval(eps),
            t_final: self.t_final(),
            output_interval: self.output_interval(),
            snapshot_times: self.snapshot_times.clone(),
        })
    }

    /// The coarse (full-domain) phase grid.
    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        let eps = self.epsilon;
        let h = self.liouville.h.eval(eps);
        let hp = self.liouville.hp.map_or(h, |s| s.eval(eps));
        let spatial = self
            .liouville
            .x_domain
            .iter()
            .map(|[a, b]| Axis::with_spacing(*a, *b, h))
            .collect::<Result<Vec<_>>>()?;
        let momentum = self
            .liouville
            .p_domain
            .iter()
            .map(|[a, b]| Axis::with_spacing(*a, *b, hp))
            .collect::<Result<Vec<_>>>()?;
        PhaseGrid::new(spatial, momentum)
    }

    pub fn liouville_params(&self, coupled: bool) -> Result<LiouvilleParams> {
        Ok(LiouvilleParams {
            packet: self.packet(),
            grid: self.phase_grid()?,
            epsilon: self.epsilon,
            dt: self.liouville.dt.eval(self.epsilon),
            t_final: self.t_final(),
            output_interval: self.output_interval(),
            coupled,
            snapshot_times: self.snapshot_times.clone(),
        })
    }

    pub fn hybrid_params(&self) -> Result<HybridParams> {
        Ok(HybridParams {
            packet: self.packet(),
            coarse: self.phase_grid()?,
            epsilon: self.epsilon,
            c0: self.hybrid.c0,
            refinement: self.hybrid.refinement,
            momentum_refinement: self.hybrid.momentum_refinement,
            dt: self.liouville.dt.eval(self.epsilon),
            t_final: self.t_final(),
            output_interval: self.output_interval(),
            snapshot_times: self.snapshot_times.clone(),
        })
    }

    /// Concrete values derived from the rules at this epsilon.
    pub fn resolved(&self) -> Value {
        let eps = self.epsilon;
        let p = self.packet();
        serde_json::json!({
            "delta": self.delta(),
            "x0": p.x0,
            "p0": p.p0,
            "width": p.width,
            "t_final": self.t_final(),
            "output_interval": self.output_interval(),
            "schrodinger_dx": self.schrodinger.dx.eval(eps),
            "schrodinger_dt": self.schrodinger.dt.eval(eps),
            "liouville_h": self.liouville.h.eval(eps),
            "liouville_hp": self.liouville.hp.map_or(self.liouville.h.eval(eps), |s| s.eval(eps)),
            "liouville_dt_requested": self.liouville.dt.eval(eps),
            "zone_half_width": self.hybrid.c0 * eps.sqrt(),
            "error_domain": self.liouville.x_domain,
        })
    }
}
