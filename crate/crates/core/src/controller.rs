//! Turning a hands-off walk into a concrete hybrid control sequence, and the
//! end-to-end solve pipeline.

use nalgebra::DVector;

use crate::abstraction::{
    build_support_abstraction, build_support_lattice, validate_abstraction, Abstraction,
    AbstractionFamily, Region, ValidationReport, Verdict,
};
use crate::error::{Error, Result};
use crate::graph::{add_extra_edges, build_graph, Edge, TransitionGraph};
use crate::system::{
    is_admissible, reaches_origin, sparsity, HybridControlSequence, Sparsity, SwitchedSystem,
    Trajectory, EPS_ZERO,
};
use crate::walk::{find_sparsest_padded_walk, pad_discrete, pad_from_origin, walk_weight, Walk};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub sequence: HybridControlSequence,
    pub trajectory: Trajectory,
    pub walk: Walk,
    pub walk_weight: usize,
    pub sparsity: Sparsity,
    pub reached_origin: bool,
}

/// Forward-simulates the walk from `xi`, evaluating every feedback label on
/// the state it is applied to, then pads the discrete tail up to `horizon`
/// with zero control.
pub fn realize(
    system: &SwitchedSystem,
    abs: &Abstraction,
    graph: &TransitionGraph,
    walk: &Walk,
    xi: &DVector<f64>,
    horizon: usize,
    free_value: Option<f64>,
) -> Result<SolveReport> {
    if horizon == 0 || walk.len() > horizon {
        return Err(Error::MalformedSequence(format!(
            "walk of length {} does not fit horizon {horizon}",
            walk.len()
        )));
    }
    if !walk.is_vertex_consistent(graph) {
        return Err(Error::MalformedSequence("walk edges do not chain".into()));
    }
    let found = abs.classify(xi, EPS_ZERO)?;
    if found != walk.start {
        return Err(Error::StartRegionMismatch {
            expected: walk.start,
            found,
        });
    }
    let free_value = free_value
        .or_else(|| system.control_set().default_nonzero())
        .unwrap_or(0.0);

    let mut nu = Vec::with_capacity(horizon);
    let mut mu = Vec::with_capacity(horizon);
    let mut states = vec![xi.clone()];
    for (t, &e) in walk.edges.iter().enumerate() {
        let edge = graph.edge(e);
        let x = &states[t];
        let u = edge.beta().eval(x.as_slice(), free_value);
        if !system.control_set().contains(u) {
            return Err(Error::ControlOutOfBounds { t, value: u });
        }
        let next = system.subsystem(edge.alpha()).step(x, u);
        let at = abs.classify(&next, EPS_ZERO).ok();
        if at != Some(edge.dst) {
            return Err(Error::RegionDeviation {
                t: t + 1,
                expected: edge.dst,
                found: at,
            });
        }
        nu.push(edge.alpha());
        mu.push(u);
        states.push(next);
    }

    let tail = horizon - walk.len();
    let padded = match nu.last() {
        Some(&last) => pad_discrete(system.switch_set(), system.n_subsystems(), last, tail)?,
        None => pad_from_origin(system.switch_set(), system.n_subsystems(), tail)?,
    };
    for i in padded {
        let next = system.subsystem(i).step(states.last().unwrap(), 0.0);
        nu.push(i);
        mu.push(0.0);
        states.push(next);
    }

    let sequence = HybridControlSequence::new(nu, mu)?;
    let trajectory = Trajectory { states };
    Ok(SolveReport {
        sparsity: sparsity(&sequence),
        reached_origin: reaches_origin(&trajectory, EPS_ZERO),
        walk_weight: walk_weight(graph, walk),
        walk: walk.clone(),
        sequence,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum AbstractionChoice {
    Support,
    Lattice,
    Explicit(Vec<Region>),
}

impl AbstractionChoice {
    pub fn build(&self, system: &SwitchedSystem) -> Result<Abstraction> {
        match self {
            AbstractionChoice::Support => Ok(build_support_abstraction(system)),
            AbstractionChoice::Lattice => build_support_lattice(system),
            AbstractionChoice::Explicit(regions) => Abstraction::new(
                system.dim(),
                system.domain().clone(),
                regions.clone(),
                AbstractionFamily::Explicit,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub samples: usize,
    pub seed: u64,
    pub extra_edges: Vec<Edge>,
    pub free_value: Option<f64>,
    /// Tolerance on `max |x(T)|` for the final origin check.
    pub origin_eps: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            samples: 200,
            seed: 0,
            extra_edges: Vec::new(),
            free_value: None,
            origin_eps: EPS_ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Infeasible {
    /// No T-walk leads from the region of the initial state to the origin.
    NoWalk { start_region: usize },
    AbstractionInvalid(ValidationReport),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Solved(SolveReport),
    Infeasible(Infeasible),
}

/// Everything produced on the way to a solution, kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub abstraction: Abstraction,
    pub validation: ValidationReport,
    pub graph: Option<TransitionGraph>,
    pub outcome: SolveOutcome,
}

impl Solution {
    pub fn report(&self) -> Option<&SolveReport> {
        match &self.outcome {
            SolveOutcome::Solved(r) => Some(r),
            SolveOutcome::Infeasible(_) => None,
        }
    }

    pub fn total(&self) -> Option<usize> {
        self.report().map(|r| r.sparsity.total)
    }
}

/// Builds and validates the abstraction, builds the graph, picks the walk
/// with the sparsest padded realization, realizes it and checks the result.
pub fn solve(
    system: &SwitchedSystem,
    choice: &AbstractionChoice,
    xi: &DVector<f64>,
    horizon: usize,
    opts: &SolveOptions,
) -> Result<Solution> {
    if horizon == 0 {
        return Err(Error::MalformedSequence("horizon must be at least 1".into()));
    }
    let abstraction = choice.build(system)?;
    let validation = validate_abstraction(system, &abstraction, opts.samples, opts.seed)?;
    if validation.verdict == Verdict::Invalid {
        return Ok(Solution {
            abstraction,
            outcome: SolveOutcome::Infeasible(Infeasible::AbstractionInvalid(validation.clone())),
            validation,
            graph: None,
        });
    }
    let mut graph = build_graph(system, &abstraction)?;
    if !opts.extra_edges.is_empty() {
        graph = add_extra_edges(
            &graph,
            system,
            &abstraction,
            &opts.extra_edges,
            opts.samples,
            opts.seed,
        )?;
    }
    let start_region = abstraction.classify(xi, EPS_ZERO)?;
    let outcome = match find_sparsest_padded_walk(&graph, system, start_region, horizon) {
        None => SolveOutcome::Infeasible(Infeasible::NoWalk { start_region }),
        Some(best) => {
            let mut report = realize(
                system,
                &abstraction,
                &graph,
                &best.walk,
                xi,
                horizon,
                opts.free_value,
            )?;
            report.reached_origin = reaches_origin(&report.trajectory, opts.origin_eps);
            if !is_admissible(system, &report.sequence)? {
                return Err(Error::VerificationFailed("sequence is not admissible".into()));
            }
            if !report.reached_origin {
                return Err(Error::VerificationFailed(format!(
                    "final state {:?} is not the origin",
                    report.trajectory.final_state().as_slice()
                )));
            }
            SolveOutcome::Solved(report)
        }
    };
    Ok(Solution {
        abstraction,
        validation,
        graph: Some(graph),
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::Beta;
    use crate::system::{ControlSet, StateDomain};
    use crate::walk::find_hands_off_walk;

    fn near(a: &DVector<f64>, b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-9)
    }

    #[test]
    fn example_one_realization() {
        let sys = fixtures::example1_system();
        let abs = build_support_abstraction(&sys);
        let g = build_graph(&sys, &abs).unwrap();
        let (walk, w) = find_hands_off_walk(&g, &sys, 2, 5).unwrap();
        assert_eq!(w, 2);
        let r = realize(&sys, &abs, &g, &walk, &fixtures::example_xi(), 5, None).unwrap();
        assert_eq!(r.sequence.nu, vec![1, 0, 1, 0, 1]);
        assert_eq!(r.sequence.mu, vec![0.0, -10.0, 0.0, 0.0, 0.0]);
        assert_eq!((r.sparsity.switches, r.sparsity.controls, r.sparsity.total), (4, 1, 5));
        assert!(near(&r.trajectory.states[1], &[10.0, 0.0]));
        assert!(r.trajectory.states[2..].iter().all(|x| near(x, &[0.0, 0.0])));
        assert!(r.reached_origin);
    }

    #[test]
    fn example_two_realization() {
        let sys = fixtures::example2_system();
        let abs = build_support_abstraction(&sys);
        let g = build_graph(&sys, &abs).unwrap();
        let (walk, w) = find_hands_off_walk(&g, &sys, 2, 5).unwrap();
        assert_eq!(w, 1);
        let r = realize(&sys, &abs, &g, &walk, &fixtures::example_xi(), 5, None).unwrap();
        assert_eq!(r.sequence.nu, vec![0; 5]);
        assert_eq!(r.sequence.mu, vec![-20.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!((r.sparsity.switches, r.sparsity.controls, r.sparsity.total), (0, 1, 1));
        assert!(r.trajectory.states[1..].iter().all(|x| near(x, &[0.0, 0.0])));
    }

    #[test]
    fn origin_start_pads_only() {
        let sys = fixtures::example2_system();
        let abs = build_support_abstraction(&sys);
        let g = build_graph(&sys, &abs).unwrap();
        let r = realize(&sys, &abs, &g, &Walk::empty(0), &DVector::zeros(2), 3, None).unwrap();
        assert_eq!(r.sequence.nu, vec![0, 0, 0]);
        assert_eq!(r.sequence.mu, vec![0.0; 3]);
        assert_eq!(r.sparsity.total, 0);
    }

    #[test]
    fn start_region_is_checked() {
        let sys = fixtures::example1_system();
        let abs = build_support_abstraction(&sys);
        let g = build_graph(&sys, &abs).unwrap();
        let (walk, _) = find_hands_off_walk(&g, &sys, 2, 5).unwrap();
        let err = realize(&sys, &abs, &g, &walk, &DVector::from_vec(vec![1.0, 0.0]), 5, None).unwrap_err();
        assert_eq!(err, Error::StartRegionMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn bad_edges_surface_as_region_deviation() {
        let sys = fixtures::example1_system();
        let abs = build_support_abstraction(&sys);
        let g = build_graph(&sys, &abs).unwrap().with_extra_edges([Edge::new(1, 0, 0, Beta::Zero)]).unwrap();
        let id = g.edges().iter().position(|e| e.src == 1 && e.dst == 0 && e.beta().is_zero()).unwrap();
        let walk = Walk { start: 1, edges: vec![id] };
        let err = realize(&sys, &abs, &g, &walk, &DVector::from_vec(vec![3.0, 0.0]), 2, None).unwrap_err();
        assert_eq!(err, Error::RegionDeviation { t: 1, expected: 0, found: Some(1) });
    }

    #[test]
    fn out_of_range_feedback_is_reported() {
        let sys = fixtures::example1_system();
        let abs = build_support_abstraction(&sys);
        let g = build_graph(&sys, &abs)
            .unwrap()
            .with_extra_edges([Edge::new(1, 0, 0, Beta::Feedback { c: vec![-2.0, 0.0], e: 0.0 })])
            .unwrap();
        let id = g.edges().iter().position(|e| matches!(e.beta(), Beta::Feedback { c, .. } if c[0] == -2.0)).unwrap();
        let err = realize(&sys, &abs, &g, &Walk { start: 1, edges: vec![id] }, &DVector::from_vec(vec![8.0, 0.0]), 2, None)
            .unwrap_err();
        assert_eq!(err, Error::ControlOutOfBounds { t: 0, value: -16.0 });
    }

    #[test]
    fn padding_dead_end_is_reported() {
        let sys = SwitchedSystem::new(
            fixtures::identity_lti().subsystems().to_vec(),
            [],
            ControlSet::reals(),
            StateDomain::All,
        )
        .unwrap();
        let abs = build_support_abstraction(&sys);
        let g = build_graph(&sys, &abs).unwrap();
        let walk = Walk { start: 1, edges: vec![0] };
        let err = realize(&sys, &abs, &g, &walk, &DVector::from_vec(vec![1.0, 0.0]), 2, None).unwrap_err();
        assert_eq!(err, Error::NoAdmissibleSuccessor { last: 0 });
    }

    #[test]
    fn solve_examples() {
        let opts = SolveOptions::default();
        let s1 = solve(&fixtures::example1_system(), &AbstractionChoice::Support, &fixtures::example_xi(), 5, &opts).unwrap();
        let r1 = s1.report().unwrap();
        assert_eq!((r1.walk_weight, r1.sparsity.total), (2, 5));
        let s2 = solve(&fixtures::example2_system(), &AbstractionChoice::Support, &fixtures::example_xi(), 5, &opts).unwrap();
        let r2 = s2.report().unwrap();
        assert_eq!((r2.walk_weight, r2.sparsity.total), (1, 1));
    }

    #[test]
    fn complement_start_needs_the_lattice() {
        let sys = fixtures::prop1_system(&[2.0, -0.5], 2);
        let xi = DVector::from_vec(vec![1.0, 1.0]);
        let opts = SolveOptions::default();
        let support = solve(&sys, &AbstractionChoice::Support, &xi, 4, &opts).unwrap();
        assert_eq!(support.outcome, SolveOutcome::Infeasible(Infeasible::NoWalk { start_region: 3 }));
        let lattice = solve(&sys, &AbstractionChoice::Lattice, &xi, 4, &opts).unwrap();
        let r = lattice.report().unwrap();
        assert!(r.reached_origin);
        // two coordinates to cancel with two different subsystems
        assert_eq!((r.sparsity.controls, r.sparsity.switches), (2, 1));
    }

    #[test]
    fn invalid_abstraction_is_infeasible() {
        let sys = SwitchedSystem::new(
            vec![crate::system::SubsystemDynamics::from_rows(2, &[1.0, 1.0, 0.0, 1.0], &[1.0, 0.0]).unwrap()],
            [(0, 0)],
            ControlSet::reals(),
            StateDomain::All,
        )
        .unwrap();
        let s = solve(&sys, &AbstractionChoice::Support, &DVector::from_vec(vec![1.0, 0.0]), 3, &SolveOptions::default())
            .unwrap();
        assert!(matches!(s.outcome, SolveOutcome::Infeasible(Infeasible::AbstractionInvalid(_))));
        assert!(s.graph.is_none());
    }
}
