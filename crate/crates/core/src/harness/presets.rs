//! Named experiment presets as JSON documents, so that file and flag overrides
//! layer on top of them key by key.

use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const PRESETS: [&str; 4] = ["1d-pure", "1d-mixed", "1d-pure-longtime", "2d-pure"];

fn one_d_pure() -> Value {
    json!({
        "name": "1d-pure",
        "model": "1d",
        "epsilon": 2f64.powi(-8),
        "delta": { "sqrt_eps": 0.25 },
        "packet": { "a_plus": 1.0, "a_minus": 0.0, "x0": [0.5], "p0": [-1.0] },
        "t_final": 0.75,
        "output_interval": 2f64.powi(-7),
        "solvers": ["schrodinger", "hybrid"],
        "schrodinger": {
            "domain": [[-2.5, 1.5]],
            "dx": { "coeff": 1.0 / 32.0, "power": 1.0 },
            "dt": { "coeff": 1.0 / 32.0, "power": 1.0 }
        },
        "liouville": {
            "x_domain": [[-1.5, 1.5]],
            "p_domain": [[-2.5, 1.5]],
            "h": 2f64.powi(-9),
            "dt": 2f64.powi(-14)
        },
        "hybrid": { "c0": 3.0, "refinement": 4, "momentum_refinement": 4 },
        "snapshot_times": []
    })
}

/// The preset document for `name`.
pub fn preset(name: &str) -> Result<Value> {
    let mut v = one_d_pure();
    match name {
        "1d-pure" => {}
        "1d-mixed" => {
            let a = std::f64::consts::FRAC_1_SQRT_2;
            v["name"] = json!("1d-mixed");
            v["packet"]["a_plus"] = json!(a);
            v["packet"]["a_minus"] = json!(a);
        }
        "1d-pure-longtime" => {
            v["name"] = json!("1d-pure-longtime");
            v["packet"]["x0"] = json!([0.3125]);
            v["t_final"] = json!(3.5);
            v["schrodinger"]["domain"] = json!([[-12.0, 4.0]]);
            v["liouville"]["p_domain"] = json!([[-2.5, 2.0]]);
        }
        "2d-pure" => {
            v = json!({
                "name": "2d-pure",
                "model": "2d-real",
                "epsilon": 2f64.powi(-6),
                "delta": { "sqrt_eps": 0.5 },
                "packet": {
                    "a_plus": 1.0,
                    "a_minus": 0.0,
                    "x0": [{ "coeff": 5.0, "power": 0.5 }, 0.0],
                    "p0": [-1.0, 0.0]
                },
                "t_final": 0.234375,
                "output_interval": { "coeff": 5.0, "power": 1.5 },
                "solvers": ["schrodinger", "hybrid"],
                "schrodinger": {
                    "domain": [[-2.875, 1.125], [-1.0, 1.0]],
                    "dx": { "coeff": 0.125, "power": 1.0 },
                    "dt": { "coeff": 5.0, "power": 1.5 }
                },
                "liouville": {
                    "x_domain": [[-0.875, 1.25], [-0.625, 0.625]],
                    "p_domain": [[-2.0, -0.25], [-0.625, 0.625]],
                    "h": { "coeff": 1.0, "power": 0.5 },
                    "dt": { "coeff": 5.0, "power": 1.5 }
                },
                "hybrid": { "c0": 3.0, "refinement": 2, "momentum_refinement": 2 },
                "snapshot_times": []
            });
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`; available: {}",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use crate::potentials::ModelKind;

    fn load(name: &str, eps: Option<f64>) -> ExperimentConfig {
        let mut v = preset(name).unwrap();
        if let Some(e) = eps {
            v["epsilon"] = json!(e);
        }
        ExperimentConfig::from_value(v).unwrap()
    }

    #[test]
    fn one_d_pure_literals() {
        let eps = 2f64.powi(-8);
        let c = load("1d-pure", Some(eps));
        assert_eq!(c.model, ModelKind::OneD);
        assert_eq!(c.delta(), eps.sqrt() / 4.0);
        let p = c.packet();
        assert_eq!((p.a_plus, p.a_minus), (1.0, 0.0));
        assert_eq!(p.x0, vec![0.5]);
        assert_eq!(p.p0, vec![-1.0]);
        assert_eq!(c.t_final(), 0.75);
        assert_eq!(c.hybrid.c0, 3.0);
        let r = c.resolved();
        assert_eq!(r["schrodinger_dx"], json!(eps / 32.0));
        assert_eq!(r["schrodinger_dt"], json!(eps / 32.0));
        assert_eq!(r["liouville_h"], json!(2f64.powi(-9)));
        assert_eq!(r["liouville_dt_requested"], json!(2f64.powi(-14)));
        // fine mesh is 2^-11 in both x and p
        assert_eq!(c.liouville.h.eval(eps) / c.hybrid.refinement as f64, 2f64.powi(-11));
        assert_eq!(c.liouville.h.eval(eps) / c.hybrid.momentum_refinement as f64, 2f64.powi(-11));
    }

    #[test]
    fn one_d_mixed_literals() {
        let c = load("1d-mixed", None);
        let p = c.packet();
        assert_eq!(p.a_plus, std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(p.a_minus, std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(p.x0, vec![0.5]);
        assert_eq!(p.p0, vec![-1.0]);
    }

    #[test]
    fn longtime_literals() {
        let c = load("1d-pure-longtime", None);
        let p = c.packet();
        assert_eq!(p.x0, vec![0.3125]);
        assert_eq!(p.p0, vec![-1.0]);
        assert_eq!((p.a_plus, p.a_minus), (1.0, 0.0));
    }

    #[test]
    fn two_d_pure_literals() {
        let eps = 2f64.powi(-6);
        let c = load("2d-pure", Some(eps));
        assert_eq!(c.model, ModelKind::TwoDReal);
        assert_eq!(c.delta(), eps.sqrt() / 2.0);
        let p = c.packet();
        assert_eq!(p.x0, vec![5.0 * eps.sqrt(), 0.0]);
        assert_eq!(p.p0, vec![-1.0, 0.0]);
        let r = c.resolved();
        assert_eq!(r["schrodinger_dx"], json!(eps / 8.0));
        assert!((r["schrodinger_dt"].as_f64().unwrap() - 5.0 * eps.powf(1.5)).abs() < 1e-18);
        assert_eq!(r["liouville_h"], json!(eps.sqrt()));
        assert_eq!((c.hybrid.refinement, c.hybrid.momentum_refinement), (2, 2));
        assert_eq!(c.t_final(), 0.234375);
    }

    #[test]
    fn presets_build_grids() {
        for name in PRESETS {
            let c = load(name, None);
            let grid = c.phase_grid().unwrap();
            c.schrodinger_params().unwrap();
            let tail = crate::phase_space::wigner_tail_mass(&c.packet(), &grid, c.epsilon);
            assert!(tail <= crate::schrodinger::TAIL_LIMIT, "{name}: {tail:e}");
        }
    }

    #[test]
    fn unknown_preset() {
        assert!(preset("3d").unwrap_err().to_string().contains("1d-pure"));
    }
}
