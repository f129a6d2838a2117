//! Randomised algebraic checks of the potentials: unitarity and
//! diagonalisation by Theta, skew-Hermitian coupling, closed-form couplings
//! against finite differences, and the expansion identities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::linalg::{mat4_adjoint, mat4_max_abs, Mat2, Mat4, C64};
use crate::potentials::{verify_basis_identities, ModelKind, TwoBandPotential};

pub const ALGEBRA_TOL: f64 = 1e-12;
pub const IDENTITY_TOL: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// Sampling box: `x` in `[-x_max, x_max]^d`, `p` in `[-p_max, p_max]^d`.
    pub x_max: f64,
    pub p_max: f64,
    /// `delta` drawn uniformly from this range per sample.
    pub delta: [f64; 2],
    pub fd_step: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 0x5eed,
            x_max: 1.0,
            p_max: 2.0,
            delta: [0.05, 0.5],
            fd_step: FD_STEP,
        }
    }
}

/// Worst-case residuals for one model.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ModelResiduals {
    pub model: ModelKind,
    pub samples: usize,
    pub unitarity: f64,
    pub diagonalisation: f64,
    pub skew: f64,
    pub real_part: f64,
    pub coupling_fd: f64,
    pub conjugation: f64,
    pub laplacian: f64,
    pub berry: f64,
}

impl ModelResiduals {
    pub fn algebra_passes(&self) -> bool {
        self.unitarity <= ALGEBRA_TOL
            && self.diagonalisation <= ALGEBRA_TOL
            && self.skew <= ALGEBRA_TOL
            && self.real_part <= ALGEBRA_TOL
    }

    pub fn identities_pass(&self) -> bool {
        self.coupling_fd <= IDENTITY_TOL
            && self.conjugation <= IDENTITY_TOL
            && self.laplacian <= IDENTITY_TOL
            && self.berry <= IDENTITY_TOL
    }

    pub fn passes(&self) -> bool {
        self.algebra_passes() && self.identities_pass()
    }
}

fn skew_residual(c: &Mat4) -> f64 {
    let a = mat4_adjoint(c);
    let s: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| c[i][j] + a[i][j]));
    mat4_max_abs(&s)
}

pub fn verify_model(model: ModelKind, opts: &VerifyOptions) -> Result<ModelResiduals> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (model.dim() as u64 * 0x9e37_79b9) ^ model as u64);
    let d = model.dim();
    let mut r = ModelResiduals {
        model,
        samples: opts.samples,
        unitarity: 0.0,
        diagonalisation: 0.0,
        skew: 0.0,
        real_part: 0.0,
        coupling_fd: 0.0,
        conjugation: 0.0,
        laplacian: 0.0,
        berry: 0.0,
    };
    for _ in 0..opts.samples {
        let delta = rng.gen_range(opts.delta[0]..=opts.delta[1]);
        let pot = TwoBandPotential::new(model, delta)?;
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-opts.x_max..=opts.x_max)).collect();
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-opts.p_max..=opts.p_max)).collect();

        let theta = pot.theta(&x)?;
        let e = pot.energy_gap(&x)?;
        let t_dag = theta.adjoint();
        r.unitarity = r.unitarity.max((theta * t_dag - Mat2::identity()).max_abs());
        let diag = Mat2::diag(C64::new(e, 0.0), C64::new(-e, 0.0));
        r.diagonalisation = r
            .diagonalisation
            .max((theta * pot.matrix(&x) * t_dag - diag).max_abs());

        let data = pot.coupling_coefficients(&x, &p)?;
        r.skew = r.skew.max(skew_residual(&data.c_matrix));
        r.real_part = r.real_part.max(data.b_plus.re.abs()).max(data.b_minus.re.abs());

        let ids = verify_basis_identities(&pot, &x, &p, opts.fd_step)?;
        r.coupling_fd = r.coupling_fd.max(ids.coupling);
        r.conjugation = r.conjugation.max(ids.conjugation);
        r.laplacian = r.laplacian.max(ids.laplacian);
        r.berry = r.berry.max(ids.berry);
    }
    Ok(r)
}

pub fn verify_all(opts: &VerifyOptions) -> Result<Vec<ModelResiduals>> {
    [ModelKind::OneD, ModelKind::TwoDReal, ModelKind::TwoDComplex]
        .into_iter()
        .map(|m| verify_model(m, opts))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let opts = VerifyOptions {
            samples: 100,
            ..Default::default()
        };
        for r in verify_all(&opts).unwrap() {
            assert!(r.passes(), "{r:?}");
        }
    }

    #[test]
    fn seeded_suite_is_reproducible() {
        let opts = VerifyOptions {
            samples: 20,
            ..Default::default()
        };
        let a = verify_model(ModelKind::TwoDComplex, &opts).unwrap();
        let b = verify_model(ModelKind::TwoDComplex, &opts).unwrap();
        assert_eq!(a.coupling_fd, b.coupling_fd);
        assert_eq!(a.laplacian, b.laplacian);
    }
}
