//! Reference systems used by tests, the acceptance suite and the bundled
//! configurations.

use nalgebra::{DMatrix, DVector};

use crate::system::{ControlSet, OrthantSign, StateDomain, SubsystemDynamics, SwitchedSystem};

fn sub(dim: usize, a: &[f64], b: &[f64]) -> SubsystemDynamics {
    SubsystemDynamics::from_rows(dim, a, b).expect("fixture dimensions")
}

fn full_switch_set(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
}

/// Identity and swap modes on the box `[-10, 10]^2`, alternation only,
/// controls in `[-10, 10]`.
pub fn example1_system() -> SwitchedSystem {
    SwitchedSystem::new(
        vec![
            sub(2, &[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0]),
            sub(2, &[0.0, 1.0, 1.0, 0.0], &[0.0, 1.0]),
        ],
        [(0, 1), (1, 0)],
        ControlSet::new(-10.0, 10.0).unwrap(),
        StateDomain::Box {
            lower: vec![-10.0, -10.0],
            upper: vec![10.0, 10.0],
        },
    )
    .unwrap()
}

/// Two nonnegative modes on the nonnegative quadrant, unrestricted switching
/// and controls.
pub fn example2_system() -> SwitchedSystem {
    SwitchedSystem::new(
        vec![
            sub(2, &[1.0, 2.0, 2.0, 4.0], &[1.0, 2.0]),
            sub(2, &[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0]),
        ],
        full_switch_set(2),
        ControlSet::reals(),
        StateDomain::Orthant {
            signs: vec![OrthantSign::NonNegative, OrthantSign::NonNegative],
        },
    )
    .unwrap()
}

pub fn example_xi() -> DVector<f64> {
    DVector::from_vec(vec![0.0, 10.0])
}

pub const EXAMPLE_HORIZON: usize = 5;

/// Scalar single-mode system `x+ = x + mu`.
pub fn scalar_system() -> SwitchedSystem {
    SwitchedSystem::new(
        vec![sub(1, &[1.0], &[1.0])],
        [(0, 0)],
        ControlSet::reals(),
        StateDomain::All,
    )
    .unwrap()
}

/// `N = d` modes sharing `A = diag(diag)`, `b_i = e_i`, full switching.
pub fn prop1_system(diag: &[f64], d: usize) -> SwitchedSystem {
    let diags = vec![diag.to_vec(); d];
    diagonal_system(&diags, full_switch_set(d))
}

/// Mode `i` has `A_i = diag(diags[i])` and `b_i = e_i`; controls unrestricted.
pub fn diagonal_system(
    diags: &[Vec<f64>],
    switch_set: impl IntoIterator<Item = (usize, usize)>,
) -> SwitchedSystem {
    let d = diags[0].len();
    let subs = diags
        .iter()
        .enumerate()
        .map(|(i, dg)| {
            let mut b = DVector::zeros(d);
            b[i % d] = 1.0;
            SubsystemDynamics::new(DMatrix::from_diagonal(&DVector::from_column_slice(dg)), b)
                .unwrap()
        })
        .collect();
    SwitchedSystem::new(subs, switch_set, ControlSet::reals(), StateDomain::All).unwrap()
}

/// Mode `i` has anti-diagonal `A_i` with entries `anti[i]` (row order) and
/// `b_i = e_{d-i}` (0-based), i.e. the input enters the reflected axis.
pub fn anti_diagonal_system(
    anti: &[Vec<f64>],
    switch_set: impl IntoIterator<Item = (usize, usize)>,
) -> SwitchedSystem {
    let d = anti[0].len();
    let subs = anti
        .iter()
        .enumerate()
        .map(|(i, vals)| {
            let mut a = DMatrix::zeros(d, d);
            for (p, v) in vals.iter().enumerate() {
                a[(p, d - 1 - p)] = *v;
            }
            let mut b = DVector::zeros(d);
            b[d - 1 - (i % d)] = 1.0;
            SubsystemDynamics::new(a, b).unwrap()
        })
        .collect();
    SwitchedSystem::new(subs, switch_set, ControlSet::reals(), StateDomain::All).unwrap()
}

/// Single mode `A = I_2`, `b = e_1`.
pub fn identity_lti() -> SwitchedSystem {
    SwitchedSystem::new(
        vec![sub(2, &[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0])],
        [(0, 0)],
        ControlSet::reals(),
        StateDomain::All,
    )
    .unwrap()
}
