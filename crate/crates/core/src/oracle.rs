//! Exhaustive reference solver for small instances.
//!
//! For a fixed discrete sequence the final state is affine in the continuous
//! inputs, `x(T) = (A_{T-1} ... A_0) xi + Phi mu`, so the sparsest continuous
//! sequence is found by trying supports in ascending size. The outer search
//! walks every admissible discrete sequence depth first.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system::{sparsity, HybridControlSequence, Sparsity, SwitchedSystem, EPS_ZERO};

pub const DEFAULT_RESIDUAL_EPS: f64 = 1e-7;
pub const DEFAULT_BUDGET: u64 = 1_000_000;
pub const MAX_HORIZON: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    /// `d x T`; column `k` is `A_{T-1} ... A_{k+1} b_k`.
    pub phi: DMatrix<f64>,
    /// `-(A_{T-1} ... A_0) xi`
    pub rhs: DVector<f64>,
}

pub fn transition_matrix(system: &SwitchedSystem, nu: &[usize], xi: &DVector<f64>) -> TransitionMatrix {
    let d = system.dim();
    let horizon = nu.len();
    let mut phi = DMatrix::zeros(d, horizon);
    // running product A_{T-1} ... A_{k+1}, built from the end
    let mut tail = DMatrix::<f64>::identity(d, d);
    for k in (0..horizon).rev() {
        let sub = system.subsystem(nu[k]);
        phi.set_column(k, &(&tail * &sub.b));
        tail *= &sub.a;
    }
    TransitionMatrix {
        phi,
        rhs: -(tail * xi),
    }
}

/// Sparsest continuous sequence that drives `xi` to the origin under `nu`,
/// with its number of nonzero entries. Supports larger than `max_k` are not
/// tried.
pub fn min_l0_continuous(
    system: &SwitchedSystem,
    nu: &[usize],
    xi: &DVector<f64>,
    eps: f64,
    max_k: usize,
) -> Option<(Vec<f64>, usize)> {
    let tm = transition_matrix(system, nu, xi);
    let horizon = nu.len();
    let controls = system.control_set();
    for k in 0..=max_k.min(horizon) {
        let mut support: Vec<usize> = (0..k).collect();
        loop {
            if let Some(mu) = solve_on_support(&tm, &support, eps) {
                let admissible = mu.iter().all(|v| controls.contains_approx(*v, EPS_ZERO));
                if admissible {
                    let mut full = vec![0.0; horizon];
                    for (s, v) in support.iter().zip(mu.iter()) {
                        full[*s] = v.clamp(controls.lo(), controls.hi());
                    }
                    return Some((full, k));
                }
            }
            if !next_combination(&mut support, horizon) {
                break;
            }
        }
    }
    None
}

fn solve_on_support(tm: &TransitionMatrix, support: &[usize], eps: f64) -> Option<DVector<f64>> {
    if support.is_empty() {
        return (tm.rhs.amax() <= eps).then(|| DVector::zeros(0));
    }
    let cols: Vec<_> = support.iter().map(|k| tm.phi.column(*k)).collect();
    let sub = DMatrix::from_columns(&cols);
    let svd = sub.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(1.0);
    let mu = svd.solve(&tm.rhs, tol).ok()?;
    let residual = (&sub * &mu - &tm.rhs).amax();
    (residual <= eps).then_some(mu)
}

/// Advances `comb` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub eps: f64,
    pub budget: u64,
    pub jobs: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            eps: DEFAULT_RESIDUAL_EPS,
            budget: DEFAULT_BUDGET,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub total: usize,
    pub sparsity: Sparsity,
    pub witness: HybridControlSequence,
    /// Discrete sequences whose inner problem was solved.
    pub sequences_examined: u64,
}

struct Search<'a> {
    system: &'a SwitchedSystem,
    xi: &'a DVector<f64>,
    horizon: usize,
    eps: f64,
    /// `extendable[l][i]`: some admissible sequence of `l` more steps follows `i`
    extendable: Vec<Vec<bool>>,
    best: Option<(usize, Vec<usize>, Vec<f64>)>,
    examined: u64,
}

impl Search<'_> {
    fn dfs(&mut self, prefix: &mut Vec<usize>, switches: usize) {
        if let Some((best, _, _)) = &self.best {
            if switches >= *best {
                return;
            }
        }
        if prefix.len() == self.horizon {
            self.examined += 1;
            let max_k = match &self.best {
                Some((b, _, _)) => b - switches - 1,
                None => self.horizon,
            };
            if let Some((mu, k)) = min_l0_continuous(self.system, prefix, self.xi, self.eps, max_k) {
                self.best = Some((switches + k, prefix.clone(), mu));
            }
            return;
        }
        let last = *prefix.last().expect("search starts from a first subsystem");
        let remaining = self.horizon - prefix.len() - 1;
        let succ: Vec<usize> = self.system.successors(last).collect();
        for next in succ {
            if !self.extendable[remaining][next] {
                continue;
            }
            prefix.push(next);
            self.dfs(prefix, switches + usize::from(next != last));
            prefix.pop();
        }
    }
}

fn extendable_table(system: &SwitchedSystem, horizon: usize) -> Vec<Vec<bool>> {
    let n = system.n_subsystems();
    let mut table = vec![vec![true; n]];
    for l in 1..horizon {
        let prev = &table[l - 1];
        let row = (0..n)
            .map(|i| system.successors(i).any(|j| prev[j]))
            .collect();
        table.push(row);
    }
    table
}

/// Global minimum of switch changes plus nonzero controls over all admissible
/// hybrid sequences of length `horizon` that reach the origin. Among optimal
/// sequences the witness has the lexicographically smallest discrete part.
pub fn brute_force_optimum(
    system: &SwitchedSystem,
    xi: &DVector<f64>,
    horizon: usize,
    opts: &OracleOptions,
) -> Result<Option<OracleResult>> {
    if horizon == 0 {
        return Err(Error::MalformedSequence("horizon must be at least 1".into()));
    }
    if xi.len() != system.dim() {
        return Err(Error::MalformedSequence(format!(
            "initial state has length {}, expected {}",
            xi.len(),
            system.dim()
        )));
    }
    if horizon > MAX_HORIZON {
        return Err(Error::BudgetExceeded(format!(
            "horizon {horizon} exceeds {MAX_HORIZON}"
        )));
    }
    let space = (system.n_subsystems() as u64)
        .checked_pow(horizon as u32)
        .unwrap_or(u64::MAX);
    if space > opts.budget {
        return Err(Error::BudgetExceeded(format!(
            "{} subsystems over horizon {horizon} give {space} sequences, budget is {}",
            system.n_subsystems(),
            opts.budget
        )));
    }

    let extendable = extendable_table(system, horizon);
    let firsts: Vec<usize> = (0..system.n_subsystems())
        .filter(|i| extendable[horizon - 1][*i])
        .collect();
    let run = |first: usize| {
        let mut search = Search {
            system,
            xi,
            horizon,
            eps: opts.eps,
            extendable: extendable.clone(),
            best: None,
            examined: 0,
        };
        search.dfs(&mut vec![first], 0);
        (search.best, search.examined)
    };

    let jobs = opts.jobs.max(1);
    let parts: Vec<_> = if jobs == 1 || firsts.len() < 2 {
        firsts.iter().map(|f| run(*f)).collect()
    } else {
        let chunk = firsts.len().div_ceil(jobs);
        std::thread::scope(|scope| {
            let handles: Vec<_> = firsts
                .chunks(chunk)
                .map(|group| scope.spawn(|| group.iter().map(|f| run(*f)).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("oracle worker panicked"))
                .collect()
        })
    };

    let examined = parts.iter().map(|(_, n)| n).sum();
    let best = parts
        .into_iter()
        .filter_map(|(b, _)| b)
        .min_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    match best {
        None => Ok(None),
        Some((total, nu, mu)) => {
            let witness = HybridControlSequence::new(nu, mu)?;
            Ok(Some(OracleResult {
                total,
                sparsity: sparsity(&witness),
                witness,
                sequences_examined: examined,
            }))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Match,
    GraphSuboptimal,
    GraphInfeasibleOracleFeasible,
    BothInfeasible,
    /// The graph solution beats the oracle, or the oracle finds nothing
    /// while the graph does. Either means a defect in one of the two.
    Inconsistent,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Match => "MATCH",
            Verdict::GraphSuboptimal => "GRAPH_SUBOPTIMAL",
            Verdict::GraphInfeasibleOracleFeasible => "GRAPH_INFEASIBLE_ORACLE_FEASIBLE",
            Verdict::BothInfeasible => "BOTH_INFEASIBLE",
            Verdict::Inconsistent => "INCONSISTENT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonReport {
    pub graph_total: Option<usize>,
    pub oracle_total: Option<usize>,
    /// `graph_total - oracle_total` when both exist.
    pub difference: Option<i64>,
    pub verdict: Verdict,
}

pub fn compare(graph_total: Option<usize>, oracle_total: Option<usize>) -> ComparisonReport {
    let verdict = match (graph_total, oracle_total) {
        (Some(g), Some(o)) if g == o => Verdict::Match,
        (Some(g), Some(o)) if g > o => Verdict::GraphSuboptimal,
        (None, Some(_)) => Verdict::GraphInfeasibleOracleFeasible,
        (None, None) => Verdict::BothInfeasible,
        _ => Verdict::Inconsistent,
    };
    ComparisonReport {
        graph_total,
        oracle_total,
        difference: graph_total
            .zip(oracle_total)
            .map(|(g, o)| g as i64 - o as i64),
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::system::{simulate, ControlSet, StateDomain, SubsystemDynamics};

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn identity_transition_matrix() {
        let sys = fixtures::identity_lti();
        let tm = transition_matrix(&sys, &[0, 0, 0], &v(&[1.0, 2.0]));
        assert_eq!(tm.phi, DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]));
        assert_eq!(tm.rhs, v(&[-1.0, -2.0]));
    }

    #[test]
    fn example_one_transition_matrix() {
        let sys = fixtures::example1_system();
        let nu = [1, 0, 1, 0, 1];
        let tm = transition_matrix(&sys, &nu, &fixtures::example_xi());
        // swap, identity, swap, identity, swap: xi = (0, 10) ends at (10, 0)
        assert_eq!(tm.rhs, v(&[-10.0, 0.0]));
        assert_eq!(tm.phi.column(1).clone_owned(), v(&[1.0, 0.0]));
        let (mu, k) = min_l0_continuous(&sys, &nu, &fixtures::example_xi(), DEFAULT_RESIDUAL_EPS, 5).unwrap();
        assert_eq!(k, 1);
        assert_eq!(mu, vec![0.0, -10.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_initial_state_needs_no_control() {
        let sys = fixtures::example2_system();
        let tm = transition_matrix(&sys, &[0, 1, 0], &DVector::zeros(2));
        assert_eq!(tm.rhs, DVector::zeros(2));
        assert_eq!(min_l0_continuous(&sys, &[0, 1, 0], &DVector::zeros(2), 1e-7, 3), Some((vec![0.0; 3], 0)));
    }

    #[test]
    fn example_two_continuous_part() {
        let sys = fixtures::example2_system();
        let (mu, k) = min_l0_continuous(&sys, &[0; 5], &fixtures::example_xi(), 1e-7, 5).unwrap();
        assert_eq!(k, 1);
        assert!((mu[0] + 20.0).abs() < 1e-9);
        assert!(mu[1..].iter().all(|m| *m == 0.0));
    }

    #[test]
    fn example_optima() {
        let opts = OracleOptions::default();
        let r1 = brute_force_optimum(&fixtures::example1_system(), &fixtures::example_xi(), 5, &opts).unwrap().unwrap();
        assert_eq!(r1.total, 5);
        assert_eq!(r1.sparsity.switches, 4);
        let r2 = brute_force_optimum(&fixtures::example2_system(), &fixtures::example_xi(), 5, &opts).unwrap().unwrap();
        assert_eq!(r2.total, 1);
        assert_eq!(r2.witness.nu, vec![0; 5]);
    }

    #[test]
    fn origin_with_self_loop_costs_nothing() {
        let r = brute_force_optimum(&fixtures::example2_system(), &DVector::zeros(2), 4, &OracleOptions::default())
            .unwrap()
            .unwrap();
        assert_eq!(r.total, 0);
    }

    #[test]
    fn uncontrollable_coordinate_is_infeasible() {
        let r = brute_force_optimum(&fixtures::identity_lti(), &v(&[0.0, 1.0]), 4, &OracleOptions::default()).unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn budget_guards() {
        let sys = fixtures::example2_system();
        let tight = OracleOptions { budget: 16, ..OracleOptions::default() };
        assert!(brute_force_optimum(&sys, &fixtures::example_xi(), 4, &tight).is_ok());
        assert!(matches!(brute_force_optimum(&sys, &fixtures::example_xi(), 5, &tight), Err(Error::BudgetExceeded(_))));
        let loose = OracleOptions { budget: u64::MAX, ..OracleOptions::default() };
        assert!(matches!(brute_force_optimum(&sys, &fixtures::example_xi(), 11, &loose), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn bounded_controls_can_make_a_support_infeasible() {
        // x+ = x + mu with |mu| <= 1: reaching 0 from 3 takes three pushes
        let sys = SwitchedSystem::new(
            vec![SubsystemDynamics::from_rows(1, &[1.0], &[1.0]).unwrap()],
            [(0, 0)],
            ControlSet::new(-1.0, 1.0).unwrap(),
            StateDomain::All,
        )
        .unwrap();
        let r = brute_force_optimum(&sys, &v(&[3.0]), 4, &OracleOptions::default()).unwrap().unwrap();
        assert_eq!(r.total, 3);
        let traj = simulate(&sys, &v(&[3.0]), &r.witness).unwrap();
        assert!(traj.final_state().amax() < 1e-9);
    }

    #[test]
    fn parallel_search_agrees() {
        let sys = fixtures::diagonal_system(
            &[vec![2.0, 0.5, -1.0], vec![1.0, -2.0, 0.5], vec![-0.5, 1.0, 2.0]],
            [(0, 1), (1, 2), (2, 0), (1, 1)],
        );
        let xi = v(&[1.0, -2.0, 3.0]);
        let one = brute_force_optimum(&sys, &xi, 5, &OracleOptions::default()).unwrap();
        let many = brute_force_optimum(&sys, &xi, 5, &OracleOptions { jobs: 3, ..OracleOptions::default() }).unwrap();
        assert_eq!(one.as_ref().map(|r| (r.total, r.witness.clone())), many.as_ref().map(|r| (r.total, r.witness.clone())));
        assert!(one.is_some());
    }

    #[test]
    fn verdicts() {
        assert_eq!(compare(Some(5), Some(5)).verdict, Verdict::Match);
        assert_eq!(compare(Some(6), Some(5)).verdict, Verdict::GraphSuboptimal);
        assert_eq!(compare(Some(6), Some(5)).difference, Some(1));
        assert_eq!(compare(None, Some(2)).verdict, Verdict::GraphInfeasibleOracleFeasible);
        assert_eq!(compare(None, None).verdict, Verdict::BothInfeasible);
        assert_eq!(compare(Some(1), Some(2)).verdict, Verdict::Inconsistent);
        assert_eq!(compare(Some(1), None).verdict, Verdict::Inconsistent);
    }
}
