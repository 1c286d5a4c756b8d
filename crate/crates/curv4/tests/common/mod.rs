//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

use curv4::expr::Expression;
use curv4::hodgeops::{TwoFormField, COORD_PAIRS};
use rand::rngs::StdRng;
use rand::Rng;

pub fn zero_upper() -> [[Expression; 4]; 4] {
    std::array::from_fn(|_| std::array::from_fn(|_| Expression::zero()))
}

/// Random polynomial of degree two in the chart coordinates.
pub fn random_poly(rng: &mut StdRng) -> Expression {
    let mut acc = Expression::constant(rng.gen_range(-1.0..1.0));
    for i in 0..4 {
        acc = Expression::add(
            acc,
            Expression::mul(
                Expression::constant(rng.gen_range(-0.5..0.5)),
                Expression::var(i),
            ),
        );
    }
    for i in 0..4 {
        for j in i..4 {
            if rng.gen_bool(0.4) {
                acc = Expression::add(
                    acc,
                    Expression::mul(
                        Expression::constant(rng.gen_range(-0.3..0.3)),
                        Expression::mul(Expression::var(i), Expression::var(j)),
                    ),
                );
            }
        }
    }
    acc
}

/// Random pointwise self-dual analytic field: coefficient functions on the
/// flat self-dual patterns. Conformal metrics share the flat 2-form star,
/// so these are self-dual for the stereographic charts as well.
pub fn random_selfdual_field(rng: &mut StdRng) -> TwoFormField {
    let c1 = random_poly(rng);
    let c2 = random_poly(rng);
    let c3 = random_poly(rng);
    let mut upper = zero_upper();
    for (i, j) in COORD_PAIRS {
        upper[i][j] = match (i, j) {
            (0, 1) | (2, 3) => c1.clone(),
            (0, 2) => c2.clone(),
            (1, 3) => Expression::neg(c2.clone()), // (3,1) entry mirrored
            (0, 3) | (1, 2) => c3.clone(),
            _ => unreachable!(),
        };
    }
    TwoFormField::new(&upper)
}
