//! Two-band matrix potentials `U I + [[u, v], [conj v, -u]]`, their
//! eigen-decomposition and the inter-band coupling coefficients.
//!
//! Three avoided-crossing prototypes are provided (1D, 2D with a real
//! off-diagonal term, 2D with a complex off-diagonal term) plus a uniform
//! model with constant `u`, `v` used for reduction tests. All prototypes
//! have their crossing point at the origin and minimum gap `2 delta`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{Mat2, Mat4, C64, ONE, ZERO};

/// Which avoided-crossing prototype to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// `u = x`, `v = delta`.
    #[serde(rename = "1d")]
    OneD,
    /// `u = x`, `v = sqrt(y^2 + delta^2)`.
    #[serde(rename = "2d-real")]
    TwoDReal,
    /// `u = x`, `v = y + i delta`.
    #[serde(rename = "2d-complex")]
    TwoDComplex,
}

impl ModelKind {
    pub fn dim(self) -> usize {
        match self {
            ModelKind::OneD => 1,
            ModelKind::TwoDReal | ModelKind::TwoDComplex => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Prototype(ModelKind),
    Uniform { dim: usize, u: f64, v: C64 },
}

/// Point values of the potential entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialValue {
    pub trace: f64,
    pub u: f64,
    pub v: C64,
}

/// Eigen-data of `V` at one point.
#[derive(Clone, Copy, Debug)]
pub struct Eigenbasis {
    /// Unitary with `Theta V Theta^dagger = diag(E, -E)`; its rows are `chi_+^dagger`, `chi_-^dagger`.
    pub theta: Mat2,
    pub chi_plus: [C64; 2],
    pub chi_minus: [C64; 2],
    pub pi_plus: Mat2,
    pub pi_minus: Mat2,
    pub gap: f64,
}

/// Coupling coefficients `p . grad Theta Theta^dagger = [[b+, bi], [-conj bi, b-]]`
/// and the source matrices of the coupled Liouville system.
#[derive(Clone, Copy, Debug)]
pub struct CouplingData {
    pub b_plus: C64,
    pub b_minus: C64,
    pub b_i: C64,
    /// Acts on `(f+, f-, fi, conj fi)`.
    pub c_matrix: Mat4,
    pub d_diag: [f64; 4],
}

impl CouplingData {
    pub fn b_matrix(&self) -> Mat2 {
        Mat2::new(self.b_plus, self.b_i, -self.b_i.conj(), self.b_minus)
    }
}

/// The compact form used in hot loops: `b+ = i b_plus_im`, `b- = i b_minus_im`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    pub b_plus_im: f64,
    pub b_minus_im: f64,
    pub b_i: C64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoBandPotential {
    shape: Shape,
    delta: f64,
    trace: f64,
}

const DEGENERATE_TOL: f64 = 1e-14;

impl TwoBandPotential {
    /// A prototype model with gap half-width `delta > 0`.
    pub fn new(kind: ModelKind, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(invalid(format!(
                "delta must be strictly positive, got {delta}"
            )));
        }
        Ok(Self {
            shape: Shape::Prototype(kind),
            delta,
            trace: 0.0,
        })
    }

    /// Spatially constant `u` and `v`; Theta is constant so all couplings vanish.
    pub fn uniform(dim: usize, u: f64, v: C64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(invalid(format!("dimension must be 1 or 2, got {dim}")));
        }
        Ok(Self {
            shape: Shape::Uniform { dim, u, v },
            delta: v.norm(),
            trace: 0.0,
        })
    }

    /// Adds a constant trace part `U`.
    pub fn with_trace(mut self, trace: f64) -> Self {
        self.trace = trace;
        self
    }

    pub fn kind(&self) -> Option<ModelKind> {
        match self.shape {
            Shape::Prototype(k) => Some(k),
            Shape::Uniform { .. } => None,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Prototype(k) => k.dim(),
            Shape::Uniform { dim, .. } => dim,
        }
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn uv(&self, x: &[f64]) -> (f64, C64) {
        let d = self.delta;
        match self.shape {
            Shape::Prototype(ModelKind::OneD) => (x[0], C64::new(d, 0.0)),
            Shape::Prototype(ModelKind::TwoDReal) => (x[0], C64::new(x[1].hypot(d), 0.0)),
            Shape::Prototype(ModelKind::TwoDComplex) => (x[0], C64::new(x[1], d)),
            Shape::Uniform { u, v, .. } => (u, v),
        }
    }

    /// `(U, u, v)` at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<PotentialValue> {
        self.check_dim(x.len())?;
        let (u, v) = self.uv(x);
        Ok(PotentialValue {
            trace: self.trace,
            u,
            v,
        })
    }

    #[inline]
    pub(crate) fn gap(&self, x: &[f64]) -> f64 {
        let (u, v) = self.uv(x);
        (u * u + v.norm_sqr()).sqrt()
    }

    /// Half-gap `E = sqrt(|u|^2 + |v|^2)`; the bands are `U +- E`.
    pub fn energy_gap(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.gap(x))
    }

    /// Analytic `grad E`.
    #[inline]
    pub fn gap_gradient(&self, x: &[f64]) -> [f64; 2] {
        match self.shape {
            Shape::Prototype(ModelKind::OneD) => [x[0] / self.gap(x), 0.0],
            Shape::Prototype(_) => {
                let e = self.gap(x);
                [x[0] / e, x[1] / e]
            }
            Shape::Uniform { .. } => [0.0, 0.0],
        }
    }

    /// The traceless part `V` as a matrix.
    pub fn matrix(&self, x: &[f64]) -> Mat2 {
        let (u, v) = self.uv(x);
        Mat2::new(C64::new(u, 0.0), v, v.conj(), C64::new(-u, 0.0))
    }

    pub(crate) fn theta_unchecked(&self, x: &[f64]) -> std::result::Result<Mat2, f64> {
        let (u, v) = self.uv(x);
        let e = (u * u + v.norm_sqr()).sqrt();
        if e == 0.0 {
            return Err(0.0);
        }
        // 1 + u/E without cancellation for u < 0
        let a = if u >= 0.0 { 1.0 + u / e } else { v.norm_sqr() / (e * (e - u)) };
        if a < DEGENERATE_TOL {
            return Err(a);
        }
        let abs_v = v.norm();
        let phase = if abs_v > 0.0 { v.conj() / abs_v } else { ONE };
        let norm = 1.0 / (2.0 * a).sqrt();
        Ok(Mat2::new(
            phase * (a * norm),
            C64::new(abs_v / e * norm, 0.0),
            -v.conj() / e * norm,
            C64::new(a * norm, 0.0),
        ))
    }

    /// The diagonalising unitary Theta at `x`.
    pub fn theta(&self, x: &[f64]) -> Result<Mat2> {
        self.check_dim(x.len())?;
        self.theta_unchecked(x).map_err(|value| Error::DegenerateBasis {
            x: x.to_vec(),
            value,
        })
    }

    pub fn eigenbasis(&self, x: &[f64]) -> Result<Eigenbasis> {
        let theta = self.theta(x)?;
        let t = &theta.0;
        let chi_plus = [t[0][0].conj(), t[0][1].conj()];
        let chi_minus = [t[1][0].conj(), t[1][1].conj()];
        Ok(Eigenbasis {
            theta,
            chi_plus,
            chi_minus,
            pi_plus: Mat2::outer(chi_plus, chi_plus),
            pi_minus: Mat2::outer(chi_minus, chi_minus),
            gap: self.gap(x),
        })
    }

    /// Closed-form coupling coefficients at phase-space point `(x, p)`.
    ///
    /// For the complex 2D model the diagonal Berry terms are
    /// `b+ = i q delta (E + x) / (2 E |v|^2)` and
    /// `b- = i q delta / (2 E (E + x))`, and `Im bi = -q delta / (2 E |v|)`.
    #[inline]
    pub fn coupling(&self, x: &[f64], p: &[f64]) -> Coupling {
        let d = self.delta;
        match self.shape {
            Shape::Prototype(ModelKind::OneD) => Coupling {
                b_plus_im: 0.0,
                b_minus_im: 0.0,
                b_i: C64::new(-p[0] * d / (2.0 * (x[0] * x[0] + d * d)), 0.0),
            },
            Shape::Prototype(kind) => {
                let (xx, y, pp, q) = (x[0], x[1], p[0], p[1]);
                let s2 = y * y + d * d;
                let s = s2.sqrt();
                let e2 = xx * xx + s2;
                let re = (q * xx * y / s - pp * s) / (2.0 * e2);
                if kind == ModelKind::TwoDReal {
                    Coupling {
                        b_plus_im: 0.0,
                        b_minus_im: 0.0,
                        b_i: C64::new(re, 0.0),
                    }
                } else {
                    let e = e2.sqrt();
                    Coupling {
                        b_plus_im: q * d * (e + xx) / (2.0 * e * s2),
                        b_minus_im: q * d / (2.0 * e * (e + xx)),
                        b_i: C64::new(re, -q * d / (2.0 * e * s)),
                    }
                }
            }
            Shape::Uniform { .. } => Coupling {
                b_plus_im: 0.0,
                b_minus_im: 0.0,
                b_i: ZERO,
            },
        }
    }

    /// Full coupling data including the 4x4 matrices `C` and `D`.
    pub fn coupling_coefficients(&self, x: &[f64], p: &[f64]) -> Result<CouplingData> {
        self.check_dim(x.len())?;
        self.check_dim(p.len())?;
        let c = self.coupling(x, p);
        let e = self.gap(x);
        Ok(assemble_coupling(c, e))
    }
}

/// Builds `C` and `D` from the compact coefficients. The fourth row acts on
/// `conj fi` and is the complex conjugate of the third, so its diagonal is
/// `conj(b+ - b-)`.
pub fn assemble_coupling(c: Coupling, gap: f64) -> CouplingData {
    let bp = C64::new(0.0, c.b_plus_im);
    let bm = C64::new(0.0, c.b_minus_im);
    let bi = c.b_i;
    let bic = bi.conj();
    let berry = bp - bm;
    let c_matrix = [
        [ZERO, ZERO, bic, bi],
        [ZERO, ZERO, -bic, -bi],
        [-bi, bi, berry, ZERO],
        [-bic, bic, ZERO, berry.conj()],
    ];
    CouplingData {
        b_plus: bp,
        b_minus: bm,
        b_i: bi,
        c_matrix,
        d_diag: [0.0, 0.0, 2.0 * gap, -2.0 * gap],
    }
}

/// Residuals of the operator identities used to expand `H'`, evaluated with
/// central finite differences.
#[derive(Clone, Copy, Debug)]
pub struct IdentityResiduals {
    /// `|| Theta (p.grad Theta^dagger) + (p.grad Theta) Theta^dagger ||_max`
    pub conjugation: f64,
    /// `|| -2 grad Theta . grad Theta^dagger - Theta Lap Theta^dagger - Lap Theta Theta^dagger ||_max`
    pub laplacian: f64,
    /// Relative max-norm mismatch between closed-form and finite-difference `p.grad Theta Theta^dagger`.
    pub coupling: f64,
    /// Relative mismatch of `b+ - b-` against `-p.(chi+^dagger grad chi+ - chi-^dagger grad chi-)`.
    pub berry: f64,
    pub tolerance: f64,
}

impl IdentityResiduals {
    pub fn passes(&self) -> bool {
        self.conjugation <= self.tolerance
            && self.laplacian <= self.tolerance
            && self.coupling <= self.tolerance
            && self.berry <= self.tolerance
    }
}

/// Checks the expansion identities and the closed-form couplings at `(x, p)`.
///
/// First derivatives use a Richardson-extrapolated central difference with
/// step `h`. The Laplacian uses a twice-extrapolated second difference whose
/// step is `max(30 h, L / 100)`, with `L = min(1, |v|)` the length on which
/// Theta varies, so that roundoff and truncation both stay far below `1e-6`.
pub fn verify_basis_identities(
    pot: &TwoBandPotential,
    x: &[f64],
    p: &[f64],
    h: f64,
) -> Result<IdentityResiduals> {
    if !(h > 0.0) {
        return Err(invalid(format!("finite-difference step must be positive, got {h}")));
    }
    pot.check_dim(x.len())?;
    pot.check_dim(p.len())?;
    let dim = x.len();
    let theta = pot.theta(x)?;
    let at = |offsets: &[(usize, f64)]| -> Result<Mat2> {
        let mut y = x.to_vec();
        for &(d, s) in offsets {
            y[d] += s;
        }
        pot.theta(&y)
    };

    let (_, v) = pot.uv(x);
    let length = if v.norm() > 0.0 { v.norm().min(1.0) } else { 1.0 };
    let h2 = (30.0 * h).max(0.01 * length);
    let mut grads = Vec::with_capacity(dim);
    let mut lap = Mat2::zero();
    for d in 0..dim {
        let first = |s: f64| -> Result<Mat2> { Ok((at(&[(d, s)])? - at(&[(d, -s)])?) * (0.5 / s)) };
        grads.push((first(h)? * 4.0 - first(2.0 * h)?) * (1.0 / 3.0));
        let second = |s: f64| -> Result<Mat2> {
            Ok((at(&[(d, s)])? + at(&[(d, -s)])? - theta * 2.0) * (1.0 / (s * s)))
        };
        let (s1, s2, s4) = (second(h2)?, second(2.0 * h2)?, second(4.0 * h2)?);
        let r1 = (s1 * 4.0 - s2) * (1.0 / 3.0);
        let r2 = (s2 * 4.0 - s4) * (1.0 / 3.0);
        lap = lap + (r1 * 16.0 - r2) * (1.0 / 15.0);
    }

    let mut p_grad = Mat2::zero();
    let mut grad_dot = Mat2::zero();
    for (d, g) in grads.iter().enumerate() {
        p_grad = p_grad + *g * p[d];
        grad_dot = grad_dot + *g * g.adjoint();
    }
    let th_dag = theta.adjoint();

    let conjugation = (theta * p_grad.adjoint() + p_grad * th_dag).max_abs();
    let laplacian =
        (grad_dot * (-2.0) - theta * lap.adjoint() - lap * th_dag).max_abs();

    let closed = pot.coupling_coefficients(x, p)?.b_matrix();
    let fd = p_grad * th_dag;
    let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    let grad_norm = grads.iter().map(Mat2::max_abs).fold(0.0, f64::max);
    let scale = closed.max_abs().max(p_norm * grad_norm);
    let coupling = if scale > 0.0 {
        (fd - closed).max_abs() / scale
    } else {
        (fd - closed).max_abs()
    };

    // chi_+ is the conjugated first row of Theta, chi_- the second.
    let mut berry_fd = ZERO;
    for (d, g) in grads.iter().enumerate() {
        for k in 0..2 {
            let plus = theta.0[0][k] * g.0[0][k].conj();
            let minus = theta.0[1][k] * g.0[1][k].conj();
            berry_fd -= (plus - minus) * p[d];
        }
    }
    let closed_berry = closed.0[0][0] - closed.0[1][1];
    let berry_scale = closed_berry.norm().max(p_norm * grad_norm);
    let berry = if berry_scale > 0.0 {
        (berry_fd - closed_berry).norm() / berry_scale
    } else {
        (berry_fd - closed_berry).norm()
    };

    Ok(IdentityResiduals {
        conjugation,
        laplacian,
        coupling,
        berry,
        tolerance: 1e-6_f64.max(10.0 * h * h * grad_norm * grad_norm),
    })
}
