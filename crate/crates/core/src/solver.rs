//! LP and MILP solving on top of the simplex engine.
//!
//! LP relaxations run the two-phase simplex directly. MILPs run branch and
//! bound with LP bounding: best-bound node selection with a diving bias,
//! branching on the most fractional binary flow variable, warm restarts from
//! the parent basis via the dual simplex. Fractional block-count variables are
//! never branched on: once all flows are integral the conditional optimum just
//! rounds them up.

use std::time::Instant;

use crate::formulation::{LpProblem, VariableKey};
use crate::simplex::{self, Basis, SimplexStatus, StandardForm};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    BudgetExceeded,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveBudget {
    pub max_simplex_iterations: u64,
    pub max_bnb_nodes: u64,
    /// Wall-clock limit in seconds. `None` keeps runs byte-deterministic;
    /// setting it trades determinism for a hard stop.
    pub wall_clock: Option<f64>,
}

impl Default for SolveBudget {
    fn default() -> Self {
        SolveBudget { max_simplex_iterations: 20_000_000, max_bnb_nodes: 20_000, wall_clock: None }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolveStats {
    pub iterations: u64,
    pub nodes: u64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: SolveStatus,
    pub objective: f64,
    /// Per-column values, aligned with `LpProblem::variables`.
    pub values: Vec<f64>,
    /// Row duals from the final LP basis (LP solves only).
    pub dual_hint: Option<Vec<f64>>,
    pub stats: SolveStats,
    /// Relative optimality gap when the budget ran out with an incumbent.
    pub gap: Option<f64>,
}

impl LpSolution {
    pub fn value(&self, p: &LpProblem, key: VariableKey) -> f64 {
        p.variable_index(key).map(|i| self.values[i]).unwrap_or(0.0)
    }
}

fn status_from(status: SimplexStatus) -> SolveStatus {
    match status {
        SimplexStatus::Optimal => SolveStatus::Optimal,
        SimplexStatus::Infeasible => SolveStatus::Infeasible,
        SimplexStatus::Unbounded => SolveStatus::Unbounded,
        SimplexStatus::IterationLimit | SimplexStatus::Numerical => SolveStatus::BudgetExceeded,
    }
}

/// Solves the continuous relaxation of `p`. Integrality markers are ignored.
pub fn solve_lp(p: &LpProblem, budget: &SolveBudget) -> LpSolution {
    let start = Instant::now();
    let mut form = StandardForm::from_problem(p);
    let art = simplex::solve(&mut form, budget.max_simplex_iterations);
    let elapsed = start.elapsed().as_secs_f64();
    LpSolution {
        status: status_from(art.outcome.status),
        objective: art.outcome.objective,
        values: art.outcome.x,
        dual_hint: (art.outcome.status == SimplexStatus::Optimal).then_some(art.outcome.duals),
        stats: SolveStats { iterations: art.outcome.iterations, nodes: 0, elapsed_s: elapsed },
        gap: None,
    }
}

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    /// (column, lower, upper) fixings along the path from the root.
    changes: Vec<(usize, f64, f64)>,
    basis: Basis,
}

/// Accepts a candidate incumbent only when it actually satisfies the rows.
fn verified(p: &LpProblem, candidate: Option<(f64, Vec<f64>)>) -> Option<(f64, Vec<f64>)> {
    candidate.filter(|(_, x)| p.max_violation(x) <= 1e-6)
}

/// Returns the objective after rounding fractional integer non-binaries up
/// (block counts), or `None` if some binary variable is fractional.
fn repaired_objective(p: &LpProblem, x: &[f64]) -> Option<(f64, Vec<f64>)> {
    let mut extra = 0.0;
    let mut repaired: Option<Vec<f64>> = None;
    for (j, &is_int) in p.integer.iter().enumerate() {
        if !is_int {
            continue;
        }
        let v = x[j];
        let frac = (v - v.round()).abs();
        if frac <= crate::INT_TOL {
            continue;
        }
        let binary = p.upper[j] - p.lower[j] <= 1.0 + 1e-9 && p.lower[j] >= -1e-9;
        if binary {
            return None;
        }
        // block counts only enter "mu <= y * cap" rows and the objective, so
        // the cheapest integral completion is the ceiling
        let up = v.ceil();
        extra += (up - v) * p.objective[j];
        repaired.get_or_insert_with(|| x.to_vec())[j] = up;
    }
    let obj = p.objective_value(x) + extra;
    Some((obj, repaired.unwrap_or_else(|| x.to_vec())))
}

/// Most fractional binary integer column, ties by lowest index.
fn branch_column(p: &LpProblem, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &is_int) in p.integer.iter().enumerate() {
        if !is_int {
            continue;
        }
        let frac = (x[j] - x[j].round()).abs();
        if frac <= crate::INT_TOL {
            continue;
        }
        let score = (x[j] - x[j].floor() - 0.5).abs();
        if best.map_or(true, |(_, s)| score < s - 1e-15) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j)
}

/// Greedy fix-and-dive: repeatedly pins near-integral binaries and rounds the
/// most decided fractional one, re-solving warm until integral or stuck.
/// Returns a feasible incumbent when it lands.
fn dive_heuristic(
    p: &LpProblem,
    form: &mut StandardForm,
    root_basis: &Basis,
    root_binv: &[f64],
    iterations_left: &mut u64,
    total_iterations: &mut u64,
) -> Option<(f64, Vec<f64>)> {
    let mut basis = root_basis.clone();
    let mut binv: Option<Vec<f64>> = Some(root_binv.to_vec());
    let mut fixed: Vec<(usize, f64)> = Vec::new();
    let mut x: Option<Vec<f64>> = None;

    for _round in 0..64 {
        for j in 0..p.num_variables() {
            form.set_bounds(j, p.lower[j], p.upper[j]);
        }
        for &(j, v) in &fixed {
            form.set_bounds(j, v, v);
        }
        let art = simplex::resolve_with_basis(
            form,
            &basis,
            binv.as_deref(),
            (*iterations_left).min(200_000),
        );
        *iterations_left = iterations_left.saturating_sub(art.outcome.iterations);
        *total_iterations += art.outcome.iterations;
        if art.outcome.status != SimplexStatus::Optimal {
            return None;
        }
        basis = art.basis;
        binv = Some(art.factorization);
        let values = art.outcome.x;

        // pin everything that already looks integral, then round the most
        // decided fractional binary
        let mut most_decided: Option<(usize, f64)> = None;
        let mut fractional = 0usize;
        for (j, &is_int) in p.integer.iter().enumerate() {
            if !is_int {
                continue;
            }
            let v = values[j];
            let frac = (v - v.round()).abs();
            let binary = p.upper[j] - p.lower[j] <= 1.0 + 1e-9 && p.lower[j] >= -1e-9;
            if !binary {
                continue;
            }
            if frac <= crate::INT_TOL {
                fixed.push((j, v.round()));
            } else {
                fractional += 1;
                let decidedness = (v - 0.5).abs();
                if most_decided.map_or(true, |(_, d)| decidedness > d) {
                    most_decided = Some((j, v));
                }
            }
        }
        fixed.sort_by_key(|&(j, _)| j);
        fixed.dedup_by_key(|&mut (j, _)| j);

        if fractional == 0 {
            x = Some(values);
            break;
        }
        let (j, v) = most_decided.expect("fractional notempty");
        fixed.push((j, v.round()));
    }

    let x = x?;
    let (obj, repaired) = repaired_objective(p, &x)?;
    Some((obj, repaired))
}

/// Branch and bound with LP bounding and proven-optimality termination.
pub fn solve_milp(p: &LpProblem, budget: &SolveBudget) -> LpSolution {
    let start = Instant::now();
    let mut form = StandardForm::from_problem(p);
    let mut iterations_left = budget.max_simplex_iterations;

    let root_art = simplex::solve(&mut form, iterations_left);
    iterations_left = iterations_left.saturating_sub(root_art.outcome.iterations);
    let mut total_iterations = root_art.outcome.iterations;

    if root_art.outcome.status != SimplexStatus::Optimal {
        let elapsed = start.elapsed().as_secs_f64();
        return LpSolution {
            status: status_from(root_art.outcome.status),
            objective: root_art.outcome.objective,
            values: root_art.outcome.x,
            dual_hint: None,
            stats: SolveStats { iterations: total_iterations, nodes: 1, elapsed_s: elapsed },
            gap: None,
        };
    }

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes_expanded: u64 = 1;
    let mut seq: u64 = 0;

    // a quick dive usually lands a feasible incumbent that lets best-bound
    // pruning engage immediately
    if p.integer.iter().any(|&i| i) {
        let mut iters = iterations_left;
        incumbent = verified(
            p,
            dive_heuristic(
                p,
                &mut form,
                &root_art.basis,
                &root_art.factorization,
                &mut iters,
                &mut total_iterations,
            ),
        );
        iterations_left = iters;
    }

    // open nodes: a dive stack preferred over a best-bound pool
    let mut stack: Vec<Node> = Vec::new();
    let mut pool: Vec<Node> = Vec::new();

    let root = Node {
        bound: root_art.outcome.objective,
        depth: 0,
        seq: 0,
        changes: Vec::new(),
        basis: root_art.basis.clone(),
    };
    stack.push(root);

    // factorization of the most recently solved node, reused when diving
    let mut hot: Option<(Basis, Vec<f64>)> = Some((root_art.basis, root_art.factorization));
    let mut hot_solution: Option<(Vec<f64>, f64)> =
        Some((root_art.outcome.x, root_art.outcome.objective));
    let mut budget_hit = false;

    while let Some(node) = pop_node(&mut stack, &mut pool, incumbent.as_ref().map(|i| i.0)) {
        if let Some((best, _)) = &incumbent {
            if node.bound >= best - 1e-9 {
                continue;
            }
        }
        if nodes_expanded >= budget.max_bnb_nodes || iterations_left == 0 {
            budget_hit = true;
            pool.push(node);
            break;
        }
        if let Some(limit) = budget.wall_clock {
            if start.elapsed().as_secs_f64() > limit {
                budget_hit = true;
                pool.push(node);
                break;
            }
        }

        // the root carries its own solution; children re-solve
        let (x, bound) = if node.depth == 0 {
            hot_solution.take().expect("root solved above")
        } else {
            // apply bound changes relative to the root
            for j in 0..p.num_variables() {
                form.set_bounds(j, p.lower[j], p.upper[j]);
            }
            for &(j, lo, hi) in &node.changes {
                form.set_bounds(j, lo, hi);
            }
            let fact = match &hot {
                Some((b, f)) if *b == node.basis => Some(f.as_slice()),
                _ => None,
            };
            let art = simplex::resolve_with_basis(&mut form, &node.basis, fact, iterations_left);
            iterations_left = iterations_left.saturating_sub(art.outcome.iterations);
            total_iterations += art.outcome.iterations;
            nodes_expanded += 1;
            match art.outcome.status {
                SimplexStatus::Infeasible => continue,
                SimplexStatus::Optimal => {}
                SimplexStatus::Unbounded
                | SimplexStatus::IterationLimit
                | SimplexStatus::Numerical => {
                    budget_hit = true;
                    pool.push(node);
                    break;
                }
            }
            hot = Some((art.basis.clone(), art.factorization));
            (art.outcome.x, art.outcome.objective)
        };

        if let Some((best, _)) = &incumbent {
            if bound >= best - 1e-9 {
                continue;
            }
        }

        match branch_column(p, &x) {
            None => {
                if let Some((obj, values)) = verified(p, repaired_objective(p, &x)) {
                    let better = incumbent.as_ref().map_or(true, |(b, _)| obj < b - 1e-9);
                    if better {
                        incumbent = Some((obj, values));
                    }
                }
            }
            Some(j) => {
                let basis = match &hot {
                    Some((b, _)) => b.clone(),
                    None => node.basis.clone(),
                };
                let down = node
                    .changes
                    .iter()
                    .copied()
                    .chain([(j, p.lower[j], x[j].floor())])
                    .collect::<Vec<_>>();
                let up = node
                    .changes
                    .iter()
                    .copied()
                    .chain([(j, x[j].ceil(), p.upper[j])])
                    .collect::<Vec<_>>();
                seq += 1;
                let up_node =
                    Node { bound, depth: node.depth + 1, seq, changes: up, basis: basis.clone() };
                seq += 1;
                let down_node = Node { bound, depth: node.depth + 1, seq, changes: down, basis };
                // dive toward the rounding of the fractional value
                if x[j] - x[j].floor() >= 0.5 {
                    pool.push(down_node);
                    stack.push(up_node);
                } else {
                    pool.push(up_node);
                    stack.push(down_node);
                }
            }
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let open_bound =
        stack.iter().chain(pool.iter()).map(|n| n.bound).fold(f64::INFINITY, f64::min);

    match incumbent {
        Some((obj, values)) => {
            let proven = !budget_hit && stack.is_empty() && pool.is_empty();
            let gap = if proven {
                None
            } else {
                let lb = open_bound.min(obj);
                Some(((obj - lb) / obj.abs().max(1e-9)).max(0.0))
            };
            LpSolution {
                status: if proven { SolveStatus::Optimal } else { SolveStatus::BudgetExceeded },
                objective: obj,
                values,
                dual_hint: None,
                stats: SolveStats {
                    iterations: total_iterations,
                    nodes: nodes_expanded,
                    elapsed_s: elapsed,
                },
                gap,
            }
        }
        None => LpSolution {
            status: if budget_hit { SolveStatus::BudgetExceeded } else { SolveStatus::Infeasible },
            objective: f64::INFINITY,
            values: Vec::new(),
            dual_hint: None,
            stats: SolveStats {
                iterations: total_iterations,
                nodes: nodes_expanded,
                elapsed_s: elapsed,
            },
            gap: None,
        },
    }
}

/// Pops the next node: dive while the stack top is still promising, otherwise
/// take the best-bound node from the pool (ties by creation order).
fn pop_node(stack: &mut Vec<Node>, pool: &mut Vec<Node>, incumbent: Option<f64>) -> Option<Node> {
    while let Some(n) = stack.pop() {
        if incumbent.map_or(true, |b| n.bound < b - 1e-9) {
            return Some(n);
        }
    }
    if pool.is_empty() {
        return None;
    }
    let mut best = 0;
    for (i, n) in pool.iter().enumerate() {
        let b = &pool[best];
        if n.bound < b.bound - 1e-12 || (n.bound <= b.bound + 1e-12 && n.seq < b.seq) {
            best = i;
        }
    }
    Some(pool.swap_remove(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{FormulationOptions, Relation, Row, RowTag, VariableKey};
    use crate::graph::LinkId;
    use crate::service::CommodityId;

    fn problem(
        objective: Vec<f64>,
        rows: Vec<(Vec<(usize, f64)>, Relation, f64)>,
        bounds: Vec<(f64, f64)>,
        integer: Vec<bool>,
    ) -> LpProblem {
        let n = objective.len();
        let variables: Vec<_> = (0..n)
            .map(|i| VariableKey::Flow { commodity: CommodityId(i as u32), link: LinkId(0) })
            .collect();
        let rows = rows
            .into_iter()
            .map(|(coeffs, relation, rhs)| Row {
                coeffs,
                relation,
                rhs,
                tag: RowTag::ObjectSum { link: LinkId(0) },
            })
            .collect();
        let (lower, upper) = bounds.into_iter().unzip();
        LpProblem::from_parts(
            variables,
            objective,
            rows,
            lower,
            upper,
            integer,
            FormulationOptions::default(),
        )
    }

    #[test]
    fn lp_matches_simple_optimum() {
        let p = problem(
            vec![1.0],
            vec![(vec![(0, 1.0)], Relation::Ge, 3.0)],
            vec![(0.0, f64::INFINITY)],
            vec![false],
        );
        let sol = solve_lp(&p, &SolveBudget::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!(sol.dual_hint.is_some());
    }

    #[test]
    fn milp_on_integral_lp_equals_lp() {
        let p = problem(
            vec![-1.0, -0.5],
            vec![(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.0)],
            vec![(0.0, 1.0), (0.0, 1.0)],
            vec![true, true],
        );
        let lp = solve_lp(&p, &SolveBudget::default());
        let milp = solve_milp(&p, &SolveBudget::default());
        assert_eq!(milp.status, SolveStatus::Optimal);
        assert!((milp.objective - lp.objective).abs() < 1e-9);
        assert!((milp.values[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn milp_branches_past_fractional_lp() {
        // min -(x+y) st x + y <= 1.5, binaries: LP gives -1.5, MILP -1.0
        let p = problem(
            vec![-1.0, -1.0],
            vec![(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.5)],
            vec![(0.0, 1.0), (0.0, 1.0)],
            vec![true, true],
        );
        let lp = solve_lp(&p, &SolveBudget::default());
        assert!((lp.objective + 1.5).abs() < 1e-9);
        let milp = solve_milp(&p, &SolveBudget::default());
        assert_eq!(milp.status, SolveStatus::Optimal);
        assert!((milp.objective + 1.0).abs() < 1e-9);
        assert!(milp.values.iter().all(|v| (v - v.round()).abs() < crate::INT_TOL));
        assert!(milp.objective >= lp.objective - 1e-9);
    }

    #[test]
    fn milp_detects_infeasible() {
        let p = problem(
            vec![1.0],
            vec![
                (vec![(0, 1.0)], Relation::Ge, 0.7),
                (vec![(0, 1.0)], Relation::Le, 0.3),
            ],
            vec![(0.0, 1.0)],
            vec![true],
        );
        let milp = solve_milp(&p, &SolveBudget::default());
        assert_eq!(milp.status, SolveStatus::Infeasible);
    }

    #[test]
    fn budget_exceeded_reports_incumbent_and_gap() {
        let n = 8;
        let mut rows = Vec::new();
        for i in 0..4 {
            rows.push((vec![(i, 1.0), (i + 4, 1.0), ((i + 1) % 4, 0.5)], Relation::Ge, 1.0));
        }
        let p = problem(
            (0..n).map(|i| 1.0 + (i as f64) * 0.3).collect(),
            rows,
            vec![(0.0, 1.0); n],
            vec![true; n],
        );
        let full = solve_milp(&p, &SolveBudget::default());
        assert_eq!(full.status, SolveStatus::Optimal);
        let tight = SolveBudget { max_bnb_nodes: 6, ..SolveBudget::default() };
        let cut = solve_milp(&p, &tight);
        if cut.status == SolveStatus::BudgetExceeded && !cut.values.is_empty() {
            // an incumbent was found before the budget ran out
            assert!(cut.gap.is_some());
            assert!(cut.objective >= full.objective - 1e-9);
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let p = problem(
            vec![-1.0, -1.0, -0.7],
            vec![
                (vec![(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Le, 1.8),
                (vec![(0, 1.0), (2, 1.0)], Relation::Le, 1.2),
            ],
            vec![(0.0, 1.0); 3],
            vec![true; 3],
        );
        let a = solve_milp(&p, &SolveBudget::default());
        let b = solve_milp(&p, &SolveBudget::default());
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.values, b.values);
    }
}
