//! Switched linear system model, hybrid control sequences and the sparsity
//! objective.
//!
//! Subsystem indices are 0-based throughout the library. File formats and
//! reports shift them to 1-based at the serialization boundary.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pattern::CoordSign;

/// Absolute tolerance for "is this entry zero" decisions.
pub const EPS_ZERO: f64 = 1e-9;

/// One mode `x(t+1) = A x(t) + b mu(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemDynamics {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl SubsystemDynamics {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() != b.len() {
            return Err(Error::InvalidSystem(format!(
                "A is {}x{} but b has length {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    /// Builds the mode from a row-major matrix.
    pub fn from_rows(dim: usize, a_row_major: &[f64], b: &[f64]) -> Result<Self> {
        if a_row_major.len() != dim * dim || b.len() != dim {
            return Err(Error::InvalidSystem(format!(
                "expected {} matrix entries and {} input entries, got {} and {}",
                dim * dim,
                dim,
                a_row_major.len(),
                b.len()
            )));
        }
        Self::new(
            DMatrix::from_row_slice(dim, dim, a_row_major),
            DVector::from_column_slice(b),
        )
    }

    pub fn step(&self, x: &DVector<f64>, mu: f64) -> DVector<f64> {
        &self.a * x + &self.b * mu
    }

    pub fn is_diagonal_nonsingular(&self) -> bool {
        let d = self.a.nrows();
        (0..d).all(|p| {
            (0..d).all(|q| {
                let v = self.a[(p, q)];
                if p == q {
                    v != 0.0
                } else {
                    v == 0.0
                }
            })
        })
    }

    /// Index of the single nonzero entry of `b`, if `b` is a scaled basis vector.
    pub fn input_axis(&self) -> Option<usize> {
        let mut nz = self.b.iter().enumerate().filter(|(_, v)| **v != 0.0);
        let first = nz.next()?;
        if nz.next().is_some() {
            None
        } else {
            Some(first.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrthantSign {
    NonNegative,
    NonPositive,
}

/// The state set. Every variant contains the origin.
#[derive(Debug, Clone, PartialEq)]
pub enum StateDomain {
    All,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Orthant { signs: Vec<OrthantSign> },
}

impl StateDomain {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            StateDomain::All => Ok(()),
            StateDomain::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(Error::InvalidSystem(format!(
                        "box bounds must have length {dim}"
                    )));
                }
                for (k, (lo, hi)) in lower.iter().zip(upper).enumerate() {
                    if lo.is_nan() || hi.is_nan() || lo > hi || *lo > 0.0 || *hi < 0.0 {
                        return Err(Error::InvalidSystem(format!(
                            "box coordinate {} must satisfy lower <= 0 <= upper, got [{lo}, {hi}]",
                            k + 1
                        )));
                    }
                }
                Ok(())
            }
            StateDomain::Orthant { signs } => {
                if signs.len() != dim {
                    return Err(Error::InvalidSystem(format!(
                        "orthant signs must have length {dim}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, x: &DVector<f64>, eps: f64) -> bool {
        match self {
            StateDomain::All => x.iter().all(|v| v.is_finite()),
            StateDomain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| *v >= lo - eps && *v <= hi + eps),
            StateDomain::Orthant { signs } => x.iter().zip(signs).all(|(v, s)| match s {
                OrthantSign::NonNegative => *v >= -eps,
                OrthantSign::NonPositive => *v <= eps,
            }),
        }
    }

    /// Whether coordinate `coord` may carry the given sign inside the domain.
    pub fn allows(&self, coord: usize, sign: CoordSign) -> bool {
        match (self, sign) {
            (_, CoordSign::Zero) => true,
            (StateDomain::All, _) => true,
            (StateDomain::Box { upper, .. }, CoordSign::Pos) => upper[coord] > 0.0,
            (StateDomain::Box { lower, .. }, CoordSign::Neg) => lower[coord] < 0.0,
            (StateDomain::Orthant { signs }, CoordSign::Pos) => {
                signs[coord] == OrthantSign::NonNegative
            }
            (StateDomain::Orthant { signs }, CoordSign::Neg) => {
                signs[coord] == OrthantSign::NonPositive
            }
        }
    }

    /// Closed range of coordinate `coord` restricted to the given sign.
    pub fn coord_range(&self, coord: usize, sign: CoordSign) -> (f64, f64) {
        let (lo, hi) = match self {
            StateDomain::Box { lower, upper } => (lower[coord], upper[coord]),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        match sign {
            CoordSign::Zero => (0.0, 0.0),
            CoordSign::Pos => (0.0, hi),
            CoordSign::Neg => (lo, 0.0),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, StateDomain::Box { .. })
    }
}

/// Closed interval of admissible continuous controls, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSet {
    lo: f64,
    hi: f64,
}

impl ControlSet {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidSystem(format!(
                "control set [{lo}, {hi}] is empty"
            )));
        }
        if lo > 0.0 || hi < 0.0 {
            return Err(Error::InvalidSystem(format!(
                "control set [{lo}, {hi}] must contain 0"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn reals() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, mu: f64) -> bool {
        mu.is_finite() && mu >= self.lo && mu <= self.hi
    }

    /// Membership with an absolute slack, for values produced by arithmetic.
    pub fn contains_approx(&self, mu: f64, eps: f64) -> bool {
        mu.is_finite() && mu >= self.lo - eps && mu <= self.hi + eps
    }

    /// Whether `[lo, hi]` (endpoints may be infinite) lies inside the set.
    pub fn contains_range(&self, lo: f64, hi: f64) -> bool {
        lo >= self.lo && hi <= self.hi
    }

    /// Deterministic nonzero control used for "any nonzero" labels: 1 when
    /// admissible, otherwise the midpoint of the bounded side nearest zero.
    pub fn default_nonzero(&self) -> Option<f64> {
        if self.contains(1.0) {
            return Some(1.0);
        }
        let pos = (self.hi > 0.0).then_some(self.hi);
        let neg = (self.lo < 0.0).then_some(self.lo);
        match (pos, neg) {
            (Some(h), Some(l)) => {
                if h <= -l {
                    Some(h / 2.0)
                } else {
                    Some(l / 2.0)
                }
            }
            (Some(h), None) => Some(if h.is_finite() { h / 2.0 } else { 1.0 }),
            (None, Some(l)) => Some(if l.is_finite() { l / 2.0 } else { -1.0 }),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedSystem {
    dim: usize,
    subsystems: Vec<SubsystemDynamics>,
    switch_set: BTreeSet<(usize, usize)>,
    control_set: ControlSet,
    domain: StateDomain,
}

impl SwitchedSystem {
    pub fn new(
        subsystems: Vec<SubsystemDynamics>,
        switch_set: impl IntoIterator<Item = (usize, usize)>,
        control_set: ControlSet,
        domain: StateDomain,
    ) -> Result<Self> {
        let Some(first) = subsystems.first() else {
            return Err(Error::InvalidSystem("at least one subsystem is required".into()));
        };
        let dim = first.b.len();
        if dim == 0 {
            return Err(Error::InvalidSystem("state dimension must be at least 1".into()));
        }
        for (i, s) in subsystems.iter().enumerate() {
            if s.a.nrows() != dim || s.a.ncols() != dim || s.b.len() != dim {
                return Err(Error::InvalidSystem(format!(
                    "subsystem {} does not have dimension {dim}",
                    i + 1
                )));
            }
            if s.a.iter().chain(s.b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidSystem(format!(
                    "subsystem {} has non-finite entries",
                    i + 1
                )));
            }
        }
        let n = subsystems.len();
        let switch_set: BTreeSet<_> = switch_set.into_iter().collect();
        if let Some((i, j)) = switch_set.iter().find(|(i, j)| *i >= n || *j >= n) {
            return Err(Error::InvalidSystem(format!(
                "switch pair ({}, {}) refers to a subsystem outside 1..{n}",
                i + 1,
                j + 1
            )));
        }
        domain.validate(dim)?;
        Ok(Self {
            dim,
            subsystems,
            switch_set,
            control_set,
            domain,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_subsystems(&self) -> usize {
        self.subsystems.len()
    }

    pub fn subsystems(&self) -> &[SubsystemDynamics] {
        &self.subsystems
    }

    pub fn subsystem(&self, i: usize) -> &SubsystemDynamics {
        &self.subsystems[i]
    }

    pub fn switch_set(&self) -> &BTreeSet<(usize, usize)> {
        &self.switch_set
    }

    pub fn allows_switch(&self, from: usize, to: usize) -> bool {
        self.switch_set.contains(&(from, to))
    }

    pub fn successors(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        self.switch_set
            .range((from, 0)..(from + 1, 0))
            .map(|&(_, j)| j)
    }

    pub fn control_set(&self) -> &ControlSet {
        &self.control_set
    }

    pub fn domain(&self) -> &StateDomain {
        &self.domain
    }
}

/// Discrete and continuous control sequences of a common length `T >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridControlSequence {
    pub nu: Vec<usize>,
    pub mu: Vec<f64>,
}

impl HybridControlSequence {
    pub fn new(nu: Vec<usize>, mu: Vec<f64>) -> Result<Self> {
        if nu.is_empty() || nu.len() != mu.len() {
            return Err(Error::MalformedSequence(format!(
                "discrete length {} and continuous length {} must agree and be positive",
                nu.len(),
                mu.len()
            )));
        }
        Ok(Self { nu, mu })
    }

    pub fn horizon(&self) -> usize {
        self.nu.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds x(0)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sparsity {
    pub switches: usize,
    pub controls: usize,
    pub total: usize,
}

/// Successive differences `nu[m+1] - nu[m]`.
pub fn delta(nu: &[usize]) -> Vec<i64> {
    nu.windows(2).map(|w| w[1] as i64 - w[0] as i64).collect()
}

pub fn sparsity(seq: &HybridControlSequence) -> Sparsity {
    let switches = delta(&seq.nu).iter().filter(|d| **d != 0).count();
    let controls = seq.mu.iter().filter(|m| m.abs() > EPS_ZERO).count();
    Sparsity {
        switches,
        controls,
        total: switches + controls,
    }
}

pub fn is_admissible(system: &SwitchedSystem, seq: &HybridControlSequence) -> Result<bool> {
    check_indices(system, &seq.nu)?;
    let switches_ok = seq.nu.windows(2).all(|w| system.allows_switch(w[0], w[1]));
    let controls_ok = seq.mu.iter().all(|m| system.control_set().contains(*m));
    Ok(switches_ok && controls_ok)
}

pub fn simulate(
    system: &SwitchedSystem,
    xi: &DVector<f64>,
    seq: &HybridControlSequence,
) -> Result<Trajectory> {
    if xi.len() != system.dim() {
        return Err(Error::MalformedSequence(format!(
            "initial state has length {}, expected {}",
            xi.len(),
            system.dim()
        )));
    }
    check_indices(system, &seq.nu)?;
    let mut states = Vec::with_capacity(seq.horizon() + 1);
    states.push(xi.clone());
    for (i, mu) in seq.nu.iter().zip(&seq.mu) {
        let next = system.subsystem(*i).step(states.last().unwrap(), *mu);
        states.push(next);
    }
    Ok(Trajectory { states })
}

pub fn reaches_origin(traj: &Trajectory, eps: f64) -> bool {
    traj.final_state().amax() <= eps
}

pub fn self_loop_indices(switch_set: &BTreeSet<(usize, usize)>) -> BTreeSet<usize> {
    switch_set
        .iter()
        .filter(|(i, j)| i == j)
        .map(|(i, _)| *i)
        .collect()
}

fn check_indices(system: &SwitchedSystem, nu: &[usize]) -> Result<()> {
    match nu.iter().position(|i| *i >= system.n_subsystems()) {
        Some(t) => Err(Error::MalformedSequence(format!(
            "nu({t}) = {} is not a subsystem index in 1..{}",
            nu[t] + 1,
            system.n_subsystems()
        ))),
        None => Ok(()),
    }
}
