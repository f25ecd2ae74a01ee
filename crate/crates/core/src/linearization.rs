//! Linearization of the delayed gradient dynamics at an equilibrium and the
//! characteristic quasipolynomial `Q(λ) = p1(λ) p2(λ) - e^{-λτ} g1(λ) g2(λ)`.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::equilibrium::Equilibrium;
use crate::error::Result;
use crate::model::{profit_hessian, Firm, ModelSpec};

/// Relative tolerance for detecting identical firm factors.
pub const SYMMETRY_REL_TOL: f64 = 1e-10;

/// `λ² + linear λ + constant`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonicQuadratic {
    pub linear: f64,
    pub constant: f64,
}

impl MonicQuadratic {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        z * z + z * self.linear + self.constant
    }

    pub fn derivative(&self, z: Complex64) -> Complex64 {
        z * 2.0 + self.linear
    }
}

/// `slope λ + constant`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFactor {
    pub slope: f64,
    pub constant: f64,
}

impl LinearFactor {
    pub const ZERO: LinearFactor = LinearFactor {
        slope: 0.0,
        constant: 0.0,
    };

    pub fn eval(&self, z: Complex64) -> Complex64 {
        z * self.slope + self.constant
    }
}

/// `dx/dt = A x(t) + B x(t - τ)` in state order `(x1, x2, z1, z2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub a: Matrix4<f64>,
    pub b: Matrix4<f64>,
    pub tau: f64,
}

impl LinearizedSystem {
    /// `A + B e^{-λτ} - λ I`.
    pub fn characteristic_matrix(&self, lambda: Complex64) -> Matrix4<Complex64> {
        let delay = (-lambda * self.tau).exp();
        Matrix4::from_fn(|r, c| {
            let mut v = Complex64::new(self.a[(r, c)], 0.0) + delay * self.b[(r, c)];
            if r == c {
                v -= lambda;
            }
            v
        })
    }
}

/// Monic `λ⁴ + α3 λ³ + α2 λ² + α1 λ + α0` of the undelayed system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl QuarticCoefficients {
    pub fn new(a0: f64, a1: f64, a2: f64, a3: f64) -> Self {
        Self { a0, a1, a2, a3 }
    }

    /// Coefficients in ascending order, leading 1 included.
    pub fn ascending(&self) -> [f64; 5] {
        [self.a0, self.a1, self.a2, self.a3, 1.0]
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        (((z + self.a3) * z + self.a2) * z + self.a1) * z + self.a0
    }
}

/// Factored characteristic function; the exponential is applied only on evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quasipolynomial {
    pub p1: MonicQuadratic,
    pub p2: MonicQuadratic,
    pub g1: LinearFactor,
    pub g2: LinearFactor,
    pub tau: f64,
}

/// Value and derivative multiplied by a common positive factor, which keeps
/// far-left evaluations finite. Zeros, signs, and `Q'/Q` are unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledEval {
    pub value: Complex64,
    pub derivative: Complex64,
    /// Natural log of the applied factor (`<= 0`).
    pub log_scale: f64,
    /// Scaled size of the two terms, the reference for cancellation checks.
    pub magnitude: f64,
}

impl Quasipolynomial {
    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Unscaled `Q(λ)`. Overflows for `Re λ τ` very negative; prefer [`Self::eval_scaled`].
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.p1.eval(z) * self.p2.eval(z) - (-z * self.tau).exp() * self.g1.eval(z) * self.g2.eval(z)
    }

    pub fn eval_scaled(&self, z: Complex64) -> ScaledEval {
        let p1 = self.p1.eval(z);
        let p2 = self.p2.eval(z);
        let g1 = self.g1.eval(z);
        let g2 = self.g2.eval(z);
        let prod = p1 * p2;
        let dprod = self.p1.derivative(z) * p2 + p1 * self.p2.derivative(z);
        let coupling = g1 * g2;
        let dcoupling = g1 * self.g2.slope + self.g1.slope * g2 - coupling * self.tau;
        let w = -z * self.tau;
        let (log_scale, phase) = if w.re > 0.0 {
            (-w.re, Complex64::from_polar(1.0, w.im))
        } else {
            (0.0, w.exp())
        };
        let s = log_scale.exp();
        ScaledEval {
            value: prod * s - phase * coupling,
            derivative: dprod * s - phase * dcoupling,
            log_scale,
            magnitude: prod.norm() * s + coupling.norm(),
        }
    }

    /// `p1 p2` in ascending coefficient order.
    pub fn product_coefficients(&self) -> [f64; 5] {
        let (a1, a0) = (self.p1.linear, self.p1.constant);
        let (b1, b0) = (self.p2.linear, self.p2.constant);
        [a0 * b0, a1 * b0 + a0 * b1, a0 + b0 + a1 * b1, a1 + b1, 1.0]
    }

    /// `g1 g2` in ascending coefficient order.
    pub fn coupling_coefficients(&self) -> [f64; 3] {
        let (c1, c0) = (self.g1.slope, self.g1.constant);
        let (d1, d0) = (self.g2.slope, self.g2.constant);
        [c0 * d0, c1 * d0 + c0 * d1, c1 * d1]
    }

    /// `(p, g)` with `Q = p² - e^{-λτ} g²` when both firms' factors agree.
    pub fn symmetric_reduction(&self) -> Option<(MonicQuadratic, LinearFactor)> {
        let close = |a: f64, b: f64| (a - b).abs() <= SYMMETRY_REL_TOL * a.abs().max(b.abs()).max(1.0);
        let same = close(self.p1.linear, self.p2.linear)
            && close(self.p1.constant, self.p2.constant)
            && close(self.g1.slope, self.g2.slope)
            && close(self.g1.constant, self.g2.constant);
        same.then_some((self.p1, self.g1))
    }
}

pub fn build_linearization(spec: &ModelSpec, eq: &Equilibrium) -> Result<LinearizedSystem> {
    let s = &eq.state;
    let h1 = profit_hessian(spec, Firm::One, s)?;
    let h2 = profit_hessian(spec, Firm::Two, s)?;
    let [k1, k2, k3, k4] = spec.params().k;
    // at the fixed point the partials in the delayed x1 equal the undelayed ones
    let a = Matrix4::new(
        k1 * h1.xx, k1 * h1.cross, k1 * h1.xz, 0.0, //
        0.0, k2 * h2.xx, 0.0, k2 * h2.xz, //
        k3 * h1.xz, k3 * h1.rival_z, k3 * h1.zz, 0.0, //
        0.0, k4 * h2.xz, 0.0, k4 * h2.zz,
    );
    let mut b = Matrix4::zeros();
    b[(1, 0)] = k2 * h2.cross;
    b[(3, 0)] = k4 * h2.rival_z;
    Ok(LinearizedSystem {
        a,
        b,
        tau: spec.tau(),
    })
}

pub fn build_quasipolynomial(sys: &LinearizedSystem) -> Quasipolynomial {
    let (a, b) = (&sys.a, &sys.b);
    let p1 = MonicQuadratic {
        linear: -(a[(0, 0)] + a[(2, 2)]),
        constant: a[(0, 0)] * a[(2, 2)] - a[(0, 2)] * a[(2, 0)],
    };
    let p2 = MonicQuadratic {
        linear: -(a[(1, 1)] + a[(3, 3)]),
        constant: a[(1, 1)] * a[(3, 3)] - a[(1, 3)] * a[(3, 1)],
    };
    let g1 = LinearFactor {
        slope: a[(0, 1)],
        constant: -a[(0, 1)] * a[(2, 2)] + a[(0, 2)] * a[(2, 1)],
    };
    let g2 = LinearFactor {
        slope: b[(1, 0)],
        constant: -b[(1, 0)] * a[(3, 3)] + a[(1, 3)] * b[(3, 0)],
    };
    Quasipolynomial {
        p1,
        p2,
        g1,
        g2,
        tau: sys.tau,
    }
}

pub fn quasipolynomial_at(spec: &ModelSpec, eq: &Equilibrium) -> Result<Quasipolynomial> {
    Ok(build_quasipolynomial(&build_linearization(spec, eq)?))
}

/// `p1 p2 - g1 g2`.
pub fn tau0_quartic(qp: &Quasipolynomial) -> QuarticCoefficients {
    let prod = qp.product_coefficients();
    let coupling = qp.coupling_coefficients();
    QuarticCoefficients {
        a0: prod[0] - coupling[0],
        a1: prod[1] - coupling[1],
        a2: prod[2] - coupling[2],
        a3: prod[3],
    }
}
