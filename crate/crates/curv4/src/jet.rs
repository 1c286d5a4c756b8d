//! Second-order jets: (value, gradient, Hessian) triples with exact chain
//! rules. Field components enter as jets built from symbolic derivatives;
//! algebraic formulas (determinants, inverse metrics, Hodge coefficients)
//! are then pushed through this type so their first derivatives at the
//! point are exact as well, with no expression swell.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::expr::{DomainError, Expression};

/// Value, gradient and symmetric Hessian of a scalar quantity at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d: [f64; 4],
    pub h: [[f64; 4]; 4],
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 {
        v: 0.0,
        d: [0.0; 4],
        h: [[0.0; 4]; 4],
    };

    pub fn constant(v: f64) -> Jet2 {
        Jet2 { v, ..Jet2::ZERO }
    }

    /// Builds the jet of an expression at `p` from its symbolic derivatives.
    pub fn of_expression(e: &Expression, p: &[f64; 4]) -> Result<Jet2, DomainError> {
        let mut jet = Jet2::constant(e.eval(p)?);
        let firsts: Vec<Expression> = (0..4).map(|k| e.differentiate(k)).collect();
        for (k, dk) in firsts.iter().enumerate() {
            jet.d[k] = dk.eval(p)?;
            for l in k..4 {
                let v = dk.differentiate(l).eval(p)?;
                jet.h[k][l] = v;
                jet.h[l][k] = v;
            }
        }
        Ok(jet)
    }

    pub fn scale(self, c: f64) -> Jet2 {
        let mut out = self;
        out.v *= c;
        for k in 0..4 {
            out.d[k] *= c;
            for l in 0..4 {
                out.h[k][l] *= c;
            }
        }
        out
    }

    pub fn recip(self) -> Jet2 {
        // d(1/f) = -f'/f^2 ; dd(1/f) = (2 f' f'' ... expanded below)
        let f = self.v;
        let inv = 1.0 / f;
        let inv2 = inv * inv;
        let inv3 = inv2 * inv;
        let mut out = Jet2::constant(inv);
        for k in 0..4 {
            out.d[k] = -self.d[k] * inv2;
        }
        for k in 0..4 {
            for l in 0..4 {
                out.h[k][l] = (2.0 * self.d[k] * self.d[l] * inv3) - self.h[k][l] * inv2;
            }
        }
        out
    }

    pub fn sqrt(self) -> Jet2 {
        let s = self.v.sqrt();
        let mut out = Jet2::constant(s);
        let half_inv = 0.5 / s;
        for k in 0..4 {
            out.d[k] = self.d[k] * half_inv;
        }
        let quarter_inv3 = 0.25 / (s * s * s);
        for k in 0..4 {
            for l in 0..4 {
                out.h[k][l] = self.h[k][l] * half_inv - self.d[k] * self.d[l] * quarter_inv3;
            }
        }
        out
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        let mut out = self;
        out.v += rhs.v;
        for k in 0..4 {
            out.d[k] += rhs.d[k];
            for l in 0..4 {
                out.h[k][l] += rhs.h[k][l];
            }
        }
        out
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        let mut out = self;
        out.v -= rhs.v;
        for k in 0..4 {
            out.d[k] -= rhs.d[k];
            for l in 0..4 {
                out.h[k][l] -= rhs.h[k][l];
            }
        }
        out
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        let mut out = Jet2::constant(self.v * rhs.v);
        for k in 0..4 {
            out.d[k] = self.d[k] * rhs.v + self.v * rhs.d[k];
        }
        for k in 0..4 {
            for l in 0..4 {
                out.h[k][l] = self.h[k][l] * rhs.v
                    + self.d[k] * rhs.d[l]
                    + self.d[l] * rhs.d[k]
                    + self.v * rhs.h[k][l];
            }
        }
        out
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    #[allow(clippy::suspicious_arithmetic_impl)] // division via the reciprocal jet
    fn div(self, rhs: Jet2) -> Jet2 {
        self * rhs.recip()
    }
}
