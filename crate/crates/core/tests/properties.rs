use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use handsoff::abstraction::{
    build_support_abstraction, build_support_lattice, validate_abstraction, Region, RegionKind,
    SignConstraint,
};
use handsoff::config::{parse_config, ProblemConfig};
use handsoff::controller::AbstractionChoice;
use handsoff::fixtures;
use handsoff::graph::{export_json, import_json, Beta, Edge, TransitionGraph};
use handsoff::oracle::{brute_force_optimum, min_l0_continuous, transition_matrix, OracleOptions};
use handsoff::system::{
    simulate, sparsity, ControlSet, HybridControlSequence, OrthantSign, StateDomain,
    SubsystemDynamics, SwitchedSystem,
};
use handsoff::walk::{pad_discrete, walk_weight, PaddingCosts, Walk};

fn system(d: usize, n: usize, entries: Vec<f64>, pairs: Vec<(usize, usize)>) -> SwitchedSystem {
    let subs = (0..n)
        .map(|i| {
            let chunk = &entries[i * (d * d + d)..(i + 1) * (d * d + d)];
            SubsystemDynamics::from_rows(d, &chunk[..d * d], &chunk[d * d..]).unwrap()
        })
        .collect();
    SwitchedSystem::new(subs, pairs, ControlSet::reals(), StateDomain::All).unwrap()
}

prop_compose! {
    fn any_system()(d in 1usize..=3, n in 1usize..=3)
        (entries in prop::collection::vec(-2.0f64..2.0, n * (d * d + d)),
         pairs in prop::collection::vec((0..n, 0..n), 0..=n * n),
         d in Just(d), n in Just(n)) -> SwitchedSystem {
        system(d, n, entries, pairs)
    }
}

prop_compose! {
    fn system_with_sequence()(sys in any_system(), t in 1usize..=6)
        (nu in prop::collection::vec(0..sys.n_subsystems(), t),
         mu in prop::collection::vec(-5.0f64..5.0, t),
         xi in prop::collection::vec(-5.0f64..5.0, sys.dim()),
         sys in Just(sys)) -> (SwitchedSystem, Vec<usize>, Vec<f64>, DVector<f64>) {
        (sys, nu, mu, DVector::from_vec(xi))
    }
}

fn beta_strategy(d: usize) -> impl Strategy<Value = Beta> {
    prop_oneof![
        Just(Beta::Zero),
        Just(Beta::FreeNonzero),
        (prop::collection::vec(-1e3f64..1e3, d), -1e3f64..1e3).prop_map(|(c, e)| Beta::Feedback { c, e }),
    ]
}

prop_compose! {
    fn any_graph()(n in 2usize..=6, d in 1usize..=3)
        (edges in prop::collection::vec((1..n, 0..n, 0usize..3, beta_strategy(d)), 0..20),
         n in Just(n)) -> TransitionGraph {
        let mut vertices = vec![Region { id: 0, kind: RegionKind::Origin }];
        for id in 1..n {
            vertices.push(Region::pattern(id, vec![0], vec![SignConstraint::Any]));
        }
        let edges = edges.into_iter().map(|(s, t, a, b)| Edge::new(s, t, a, b)).collect();
        TransitionGraph::new(vertices, edges).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn transition_matrix_agrees_with_simulation((sys, nu, mu, xi) in system_with_sequence()) {
        let tm = transition_matrix(&sys, &nu, &xi);
        let predicted = -&tm.rhs + &tm.phi * DVector::from_vec(mu.clone());
        let seq = HybridControlSequence::new(nu, mu).unwrap();
        let simulated = simulate(&sys, &xi, &seq).unwrap();
        let scale = simulated.final_state().amax().max(1.0);
        prop_assert!((predicted - simulated.final_state()).amax() <= 1e-9 * scale);
    }

    #[test]
    fn simulation_is_deterministic((sys, nu, mu, xi) in system_with_sequence()) {
        let seq = HybridControlSequence::new(nu, mu).unwrap();
        prop_assert_eq!(simulate(&sys, &xi, &seq).unwrap(), simulate(&sys, &xi, &seq).unwrap());
    }

    #[test]
    fn sparsity_counts_add_up(nu in prop::collection::vec(0usize..3, 1..10), mu in prop::collection::vec(prop_oneof![Just(0.0), -3.0f64..3.0], 1..10)) {
        let t = nu.len().min(mu.len());
        let seq = HybridControlSequence::new(nu[..t].to_vec(), mu[..t].to_vec()).unwrap();
        let s = sparsity(&seq);
        prop_assert_eq!(s.total, s.switches + s.controls);
        prop_assert!(s.switches < t && s.controls <= t);
        let changes = seq.nu.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert_eq!(s.switches, changes);
    }

    #[test]
    fn graph_json_round_trips(g in any_graph()) {
        let text = export_json(&g);
        let back = import_json(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(export_json(&back), text);
    }

    #[test]
    fn appending_edges_never_lowers_weight(g in any_graph(), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8)) {
        let mut walk = Walk::empty(1);
        let mut last = 0;
        for pick in picks {
            let out = g.out_edges(walk.end(&g));
            if out.is_empty() {
                break;
            }
            walk.edges.push(out[pick.index(out.len())]);
            let w = walk_weight(&g, &walk);
            prop_assert!(w >= last);
            last = w;
        }
    }

    #[test]
    fn padding_is_admissible_and_cheapest(
        pairs in prop::collection::btree_set((0usize..3, 0usize..3), 0..9),
        last in 0usize..3,
        len in 0usize..7,
    ) {
        let costs = PaddingCosts::new(&pairs, 3, len);
        match pad_discrete(&pairs, 3, last, len) {
            Ok(seq) => {
                prop_assert_eq!(seq.len(), len);
                let mut prev = last;
                let mut switches = 0;
                for &v in &seq {
                    prop_assert!(pairs.contains(&(prev, v)));
                    switches += usize::from(v != prev);
                    prev = v;
                }
                prop_assert_eq!(Some(switches), costs.cost(last, len));
            }
            Err(_) => prop_assert_eq!(costs.cost(last, len), None),
        }
    }

    #[test]
    fn builders_partition_the_state_space(
        diag in prop::collection::vec(prop_oneof![-2.0f64..-0.1, 0.1f64..2.0], 3),
        x in prop::collection::vec(prop_oneof![Just(0.0), -5.0f64..5.0], 3),
    ) {
        let sys = fixtures::prop1_system(&diag, 3);
        let x = DVector::from_vec(x);
        for abs in [build_support_abstraction(&sys), build_support_lattice(&sys).unwrap()] {
            let region = abs.classify(&x, 1e-9).unwrap();
            let support: Vec<usize> = (0..3).filter(|k| x[*k].abs() > 1e-9).collect();
            match &abs.region(region).kind {
                RegionKind::Origin => prop_assert!(support.is_empty()),
                RegionKind::Pattern { free, .. } => prop_assert_eq!(free, &support),
                RegionKind::Other => prop_assert!(support.len() >= 2),
            }
            // region-constancy under mu = 0 for the diagonal class
            for sub in sys.subsystems() {
                prop_assert_eq!(abs.classify(&(&sub.a * &x), 1e-9).unwrap(), region);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn validation_reports_depend_only_on_the_seed(
        entries in prop::collection::vec(-2.0f64..2.0, 6),
        seed in any::<u64>(),
    ) {
        let sys = system(2, 1, entries, vec![(0, 0)]);
        let abs = build_support_abstraction(&sys);
        prop_assert_eq!(
            validate_abstraction(&sys, &abs, 50, seed).unwrap(),
            validate_abstraction(&sys, &abs, 50, seed).unwrap()
        );
    }

    #[test]
    fn no_control_needed_exactly_when_the_free_response_vanishes((sys, nu, _mu, xi) in system_with_sequence()) {
        let tm = transition_matrix(&sys, &nu, &xi);
        let (_, k) = min_l0_continuous(&sys, &nu, &xi, 1e-7, nu.len()).unwrap_or((vec![], usize::MAX));
        prop_assert_eq!(k == 0, tm.rhs.amax() <= 1e-7);
    }

    #[test]
    fn more_switching_freedom_never_hurts(
        diag in prop::collection::vec(prop_oneof![Just(0.5), Just(-1.0), Just(2.0)], 4),
        pairs in prop::collection::btree_set((0usize..2, 0usize..2), 1..4),
        extra in (0usize..2, 0usize..2),
        xi in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), Just(-2.0)], 2),
        t in 2usize..=4,
    ) {
        let diags = vec![diag[..2].to_vec(), diag[2..].to_vec()];
        let xi = DVector::from_vec(xi);
        let small = fixtures::diagonal_system(&diags, pairs.clone());
        let mut bigger: BTreeSet<_> = pairs;
        bigger.insert(extra);
        let large = fixtures::diagonal_system(&diags, bigger);
        let opts = OracleOptions::default();
        let a = brute_force_optimum(&small, &xi, t, &opts).unwrap().map(|r| r.total);
        let b = brute_force_optimum(&large, &xi, t, &opts).unwrap().map(|r| r.total);
        if let Some(a) = a {
            prop_assert!(b.is_some_and(|b| b <= a));
        }
    }

    #[test]
    fn configs_round_trip(
        (sys, _nu, _mu, xi) in system_with_sequence(),
        t in 1usize..10,
        lo in prop_oneof![Just(f64::NEG_INFINITY), -10.0f64..0.0],
        hi in prop_oneof![Just(f64::INFINITY), 0.0f64..10.0],
        lattice in any::<bool>(),
        reference in prop::option::of(0usize..10),
        orthant in any::<bool>(),
    ) {
        let domain = if orthant {
            StateDomain::Orthant { signs: vec![OrthantSign::NonNegative; sys.dim()] }
        } else {
            StateDomain::Box { lower: vec![-5.0; sys.dim()], upper: vec![5.0; sys.dim()] }
        };
        let xi = if orthant { xi.map(f64::abs) } else { xi };
        let system = SwitchedSystem::new(
            sys.subsystems().to_vec(),
            sys.switch_set().iter().copied(),
            ControlSet::new(lo, hi).unwrap(),
            domain,
        ).unwrap();
        let cfg = ProblemConfig {
            system,
            xi,
            horizon: t,
            epsilon: 1e-9,
            abstraction: if lattice { AbstractionChoice::Lattice } else { AbstractionChoice::Support },
            extra_edges: vec![Edge::new(1, 0, 0, Beta::Feedback { c: vec![0.1; sys.dim()], e: -0.3 })],
            free_nonzero_default: None,
            reference_total: reference,
        };
        let text = cfg.to_json();
        let back = parse_config(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json(), text);
    }
}

#[test]
fn transition_matrix_columns_follow_the_product_order() {
    // non-commuting modes make the order observable
    let a1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let a2 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
    let b = DVector::from_vec(vec![1.0, 0.0]);
    let sys = SwitchedSystem::new(
        vec![SubsystemDynamics::new(a1.clone(), b.clone()).unwrap(), SubsystemDynamics::new(a2.clone(), b.clone()).unwrap()],
        [(0, 1), (1, 0)],
        ControlSet::reals(),
        StateDomain::All,
    )
    .unwrap();
    let tm = transition_matrix(&sys, &[0, 1, 0], &DVector::from_vec(vec![1.0, 1.0]));
    assert_eq!(tm.phi.column(0).clone_owned(), &a1 * &a2 * &b);
    assert_eq!(tm.phi.column(1).clone_owned(), &a1 * &b);
    assert_eq!(tm.phi.column(2).clone_owned(), b);
    assert_eq!(tm.rhs, -(&a1 * &a2 * &a1 * DVector::from_vec(vec![1.0, 1.0])));
}
