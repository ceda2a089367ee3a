//! Bounded-variable revised simplex over a dense basis inverse.
//!
//! Rows in `<=` / `=` / `>=` form with per-variable bounds are normalized to
//! equalities with slacks. A two-phase primal simplex (Devex pricing with a
//! Bland fallback after a stall, Harris-style two-pass ratio test) solves from
//! scratch starting from a slack crash basis; a dual simplex re-optimizes
//! after bound changes during branch and bound. The basis inverse is kept
//! explicitly, updated per pivot, rebuilt when a residual check detects drift,
//! and repaired with artificial columns when a rebuild finds it singular.

use crate::formulation::{LpProblem, Relation};

const PIVOT_TOL: f64 = 1e-8;
const FORCED_REFACTOR: u64 = 1500;
const DRIFT_CHECK_EVERY: u64 = 100;
const DEVEX_RESET: f64 = 1e8;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SimplexStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Numerical,
}

#[derive(Clone, Debug)]
pub struct SimplexOutcome {
    pub status: SimplexStatus,
    /// Values of the structural variables.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers in the original row order and scaling.
    pub duals: Vec<f64>,
    pub iterations: u64,
}

/// Snapshot of a basis, reusable as a warm start after bound changes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    basic: Vec<u32>,
    at_upper: Vec<bool>,
}

/// Result of one simplex run: the outcome plus the final basis and its
/// factorization, which a caller may feed back in after changing bounds.
pub struct SolveArtifacts {
    pub outcome: SimplexOutcome,
    pub basis: Basis,
    pub factorization: Vec<f64>,
}

/// Equality-standardized problem: `A x = b`, `lb <= x <= ub`, minimize `c x`.
/// Columns: structural, then one slack per inequality row, then one artificial
/// per row (used by phase 1 and basis repair, pinned to zero afterwards).
pub struct StandardForm {
    pub m: usize,
    n_struct: usize,
    n_slack: usize,
    cols: Vec<Vec<(u32, f64)>>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    b: Vec<f64>,
    row_scale: Vec<f64>,
    /// Maps each inequality row to its slack column.
    slack_of_row: Vec<Option<u32>>,
}

impl StandardForm {
    pub fn from_problem(p: &LpProblem) -> StandardForm {
        let m = p.rows.len();
        let n_struct = p.num_variables();
        let mut cols: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_struct];
        let mut b = Vec::with_capacity(m);
        let mut row_scale = Vec::with_capacity(m);
        let mut slack_rows: Vec<usize> = Vec::new();

        for (r, row) in p.rows.iter().enumerate() {
            // flip >= rows so slacks are always nonnegative
            let sign = if row.relation == Relation::Ge { -1.0 } else { 1.0 };
            let maxabs = row
                .coeffs
                .iter()
                .map(|(_, a)| a.abs())
                .fold(row.rhs.abs(), f64::max)
                .max(1e-12);
            let scale = 1.0 / maxabs;
            row_scale.push(scale * sign);
            for &(j, a) in &row.coeffs {
                cols[j].push((r as u32, a * sign * scale));
            }
            b.push(row.rhs * sign * scale);
            if row.relation != Relation::Eq {
                slack_rows.push(r);
            }
        }

        let n_slack = slack_rows.len();
        let mut cost = p.objective.clone();
        let mut lb = p.lower.clone();
        let mut ub = p.upper.clone();
        let mut slack_of_row = vec![None; m];
        for (i, &r) in slack_rows.iter().enumerate() {
            slack_of_row[r] = Some((n_struct + i) as u32);
            cols.push(vec![(r as u32, 1.0)]);
            cost.push(0.0);
            lb.push(0.0);
            ub.push(f64::INFINITY);
        }
        for r in 0..m {
            cols.push(vec![(r as u32, 1.0)]);
            cost.push(0.0);
            lb.push(0.0);
            ub.push(0.0);
        }

        StandardForm { m, n_struct, n_slack, cols, cost, lb, ub, b, row_scale, slack_of_row }
    }

    fn n_total(&self) -> usize {
        self.n_struct + self.n_slack + self.m
    }

    fn artificial(&self, row: usize) -> usize {
        self.n_struct + self.n_slack + row
    }

    pub fn set_bounds(&mut self, column: usize, lower: f64, upper: f64) {
        self.lb[column] = lower;
        self.ub[column] = upper;
    }

    pub fn bounds(&self, column: usize) -> (f64, f64) {
        (self.lb[column], self.ub[column])
    }
}

fn feas_tol(scale: f64) -> f64 {
    crate::FEAS_TOL * scale.max(1.0)
}

struct Core<'a> {
    f: &'a StandardForm,
    /// Column-major basis inverse: entry (r, c) of `B^{-1}` at `binv[c * m + r]`.
    binv: Vec<f64>,
    basic: Vec<u32>,
    basic_pos: Vec<i32>,
    at_upper: Vec<bool>,
    xb: Vec<f64>,
    devex: Vec<f64>,
    iterations: u64,
    iteration_limit: u64,
    updates: u64,
    bland: bool,
    stall: u64,
    last_objective: f64,
    // scratch buffers
    ybuf: Vec<f64>,
    wbuf: Vec<f64>,
    rhobuf: Vec<f64>,
    /// Incrementally maintained reduced costs; refreshed after refactoring.
    dvec: Vec<f64>,
    dvec_valid: bool,
    alpha_list: Vec<(u32, f64)>,
}

enum StepOutcome {
    Optimal,
    Unbounded,
    Limit,
    Numerical,
    Pivoted,
}

impl<'a> Core<'a> {
    fn new(f: &'a StandardForm, limit: u64) -> Core<'a> {
        let m = f.m;
        Core {
            f,
            binv: vec![0.0; m * m],
            basic: vec![0; m],
            basic_pos: vec![-1; f.n_total()],
            at_upper: vec![false; f.n_total()],
            xb: vec![0.0; m],
            devex: vec![1.0; f.n_total()],
            iterations: 0,
            iteration_limit: limit,
            updates: 0,
            bland: false,
            stall: 0,
            last_objective: f64::INFINITY,
            ybuf: vec![0.0; m],
            wbuf: vec![0.0; m],
            rhobuf: vec![0.0; m],
            dvec: vec![0.0; f.n_total()],
            dvec_valid: false,
            alpha_list: Vec::new(),
        }
    }

    fn refresh_reduced_costs(&mut self, cost: &dyn Fn(usize) -> f64) {
        self.compute_duals(cost);
        for j in 0..self.f.n_total() {
            self.dvec[j] = if self.basic_pos[j] >= 0 { 0.0 } else { self.reduced_cost(j, cost) };
        }
        self.dvec_valid = true;
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        if self.at_upper[j] && self.f.ub[j].is_finite() {
            self.f.ub[j]
        } else {
            self.f.lb[j]
        }
    }

    /// Installs a crash basis: inequality slacks where the initial residual is
    /// feasible for them, signed artificials elsewhere.
    fn install_crash_basis(&mut self, signs: &mut Vec<f64>) -> bool {
        self.basic_pos.iter_mut().for_each(|p| *p = -1);
        self.at_upper.iter_mut().for_each(|u| *u = false);
        // residual with every structural column at its lower bound
        let mut residual = self.f.b.clone();
        for j in 0..self.f.n_struct {
            let v = self.f.lb[j];
            if v != 0.0 {
                for &(r, a) in &self.f.cols[j] {
                    residual[r as usize] -= a * v;
                }
            }
        }
        signs.clear();
        signs.resize(self.f.m, 1.0);
        for r in 0..self.f.m {
            let col = match self.f.slack_of_row[r] {
                Some(s) if residual[r] >= 0.0 => s as usize,
                _ => {
                    signs[r] = if residual[r] < 0.0 { -1.0 } else { 1.0 };
                    self.f.artificial(r)
                }
            };
            self.basic[r] = col as u32;
            self.basic_pos[col] = r as i32;
        }
        self.refactor()
    }

    fn install_basis(&mut self, basis: &Basis, factorization: Option<&[f64]>) -> bool {
        if basis.basic.len() != self.f.m || basis.at_upper.len() != self.f.n_total() {
            return false;
        }
        self.basic_pos.iter_mut().for_each(|p| *p = -1);
        self.basic.copy_from_slice(&basis.basic);
        self.at_upper.copy_from_slice(&basis.at_upper);
        for (r, &j) in self.basic.iter().enumerate() {
            self.basic_pos[j as usize] = r as i32;
        }
        for j in 0..self.f.n_total() {
            if self.basic_pos[j] < 0 && self.at_upper[j] && !self.f.ub[j].is_finite() {
                self.at_upper[j] = false;
            }
        }
        match factorization {
            Some(binv) if binv.len() == self.f.m * self.f.m => {
                self.binv.copy_from_slice(binv);
                self.recompute_basic_values();
                self.updates = 0;
                true
            }
            _ => self.refactor(),
        }
    }

    fn snapshot(&self) -> Basis {
        Basis { basic: self.basic.clone(), at_upper: self.at_upper.clone() }
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination on `[B | I]`.
    /// Dependent basis columns are replaced by their row's artificial and the
    /// factorization retried. Returns false when repair fails repeatedly.
    fn refactor(&mut self) -> bool {
        self.dvec_valid = false;
        for _ in 0..32 {
            match self.try_factorize() {
                Ok(()) => {
                    self.recompute_basic_values();
                    self.updates = 0;
                    return true;
                }
                Err((position, row)) => {
                    // swap in the artificial of the unpivoted row
                    let old = self.basic[position] as usize;
                    let art = self.f.artificial(row);
                    if art == old || self.basic_pos[art] >= 0 {
                        return false;
                    }
                    self.basic_pos[old] = -1;
                    self.at_upper[old] = false;
                    self.basic[position] = art as u32;
                    self.basic_pos[art] = position as i32;
                }
            }
        }
        false
    }

    /// One factorization attempt. On singularity returns the basis position
    /// whose column is dependent together with an unpivoted row index.
    fn try_factorize(&mut self) -> Result<(), (usize, usize)> {
        let m = self.f.m;
        let w = 2 * m;
        let mut a = vec![0.0; m * w];
        // perm[i] = original row currently stored at position i
        let mut perm: Vec<usize> = (0..m).collect();
        for (c, &j) in self.basic.iter().enumerate() {
            for &(r, v) in &self.f.cols[j as usize] {
                a[r as usize * w + c] = v;
            }
        }
        for r in 0..m {
            a[r * w + m + r] = 1.0;
        }
        for k in 0..m {
            let mut piv_row = k;
            let mut piv_val = a[k * w + k].abs();
            for r in (k + 1)..m {
                let v = a[r * w + k].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-10 {
                return Err((k, perm[k]));
            }
            if piv_row != k {
                perm.swap(k, piv_row);
                let (lo, hi) = (k.min(piv_row), k.max(piv_row));
                let (head, tail) = a.split_at_mut(hi * w);
                head[lo * w..lo * w + w].swap_with_slice(&mut tail[..w]);
            }
            let inv_piv = 1.0 / a[k * w + k];
            for c in k..w {
                a[k * w + c] *= inv_piv;
            }
            for r in 0..m {
                if r == k {
                    continue;
                }
                let factor = a[r * w + k];
                if factor == 0.0 {
                    continue;
                }
                let (krow, rrow) = disjoint_rows(&mut a, k, r, w);
                for c in k..w {
                    rrow[c] -= factor * krow[c];
                }
            }
        }
        for r in 0..m {
            for c in 0..m {
                self.binv[c * m + r] = a[r * w + m + c];
            }
        }
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let m = self.f.m;
        let rhs = self.effective_rhs();
        self.xb.iter_mut().for_each(|v| *v = 0.0);
        for (r, &v) in rhs.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let colseg = &self.binv[r * m..(r + 1) * m];
            for i in 0..m {
                self.xb[i] += colseg[i] * v;
            }
        }
    }

    /// `b` minus the contribution of all nonbasic columns.
    fn effective_rhs(&self) -> Vec<f64> {
        let mut rhs = self.f.b.clone();
        for j in 0..self.f.n_total() {
            if self.basic_pos[j] >= 0 {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(r, a) in &self.f.cols[j] {
                    rhs[r as usize] -= a * v;
                }
            }
        }
        rhs
    }

    /// Largest row residual of `B x_B = rhs`; cheap drift detector.
    fn residual(&self) -> f64 {
        let rhs = self.effective_rhs();
        let mut res = rhs;
        for (i, &j) in self.basic.iter().enumerate() {
            let v = self.xb[i];
            if v != 0.0 {
                for &(r, a) in &self.f.cols[j as usize] {
                    res[r as usize] -= a * v;
                }
            }
        }
        res.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    fn maybe_refactor(&mut self) -> bool {
        if self.updates >= FORCED_REFACTOR {
            return self.refactor();
        }
        if self.updates > 0 && self.updates % DRIFT_CHECK_EVERY == 0 && self.residual() > 1e-8 {
            return self.refactor();
        }
        true
    }

    /// `B^{-1} a_j` into the scratch buffer.
    fn ftran(&mut self, j: usize) {
        let m = self.f.m;
        self.wbuf.iter_mut().for_each(|v| *v = 0.0);
        for &(r, v) in &self.f.cols[j] {
            let colseg = &self.binv[r as usize * m..(r as usize + 1) * m];
            for i in 0..m {
                self.wbuf[i] += colseg[i] * v;
            }
        }
    }

    /// Row multipliers for a cost vector, into the scratch buffer.
    fn compute_duals(&mut self, cost: &dyn Fn(usize) -> f64) {
        let m = self.f.m;
        let mut cb = vec![0.0; m];
        let mut any = false;
        for (i, &j) in self.basic.iter().enumerate() {
            let c = cost(j as usize);
            cb[i] = c;
            any |= c != 0.0;
        }
        if !any {
            self.ybuf.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        for c in 0..m {
            let colseg = &self.binv[c * m..(c + 1) * m];
            let mut acc = 0.0;
            for i in 0..m {
                acc += cb[i] * colseg[i];
            }
            self.ybuf[c] = acc;
        }
    }

    fn reduced_cost(&self, j: usize, cost: &dyn Fn(usize) -> f64) -> f64 {
        let mut d = cost(j);
        for &(r, v) in &self.f.cols[j] {
            d -= self.ybuf[r as usize] * v;
        }
        d
    }

    fn objective_of(&self, cost: &dyn Fn(usize) -> f64) -> f64 {
        let mut obj = 0.0;
        for (i, &j) in self.basic.iter().enumerate() {
            obj += cost(j as usize) * self.xb[i];
        }
        for j in 0..self.f.n_total() {
            if self.basic_pos[j] < 0 {
                let v = self.nonbasic_value(j);
                if v != 0.0 {
                    obj += cost(j) * v;
                }
            }
        }
        obj
    }

    /// Row `row` of `B^{-1}` into the scratch buffer.
    fn btran_row(&mut self, row: usize) {
        let m = self.f.m;
        for c in 0..m {
            self.rhobuf[c] = self.binv[c * m + row];
        }
    }

    fn primal_step(&mut self, cost: &dyn Fn(usize) -> f64) -> StepOutcome {
        if self.iterations >= self.iteration_limit {
            return StepOutcome::Limit;
        }
        if !self.maybe_refactor() {
            return StepOutcome::Numerical;
        }
        if !self.dvec_valid {
            self.refresh_reduced_costs(cost);
        }

        // pricing: Devex reference weights, Bland's rule after a stall
        let mut entering: Option<(usize, f64, bool)> = None;
        for j in 0..self.f.n_total() {
            if self.basic_pos[j] >= 0 || self.f.lb[j] >= self.f.ub[j] {
                continue;
            }
            let d = self.dvec[j];
            let from_upper = self.at_upper[j] && self.f.ub[j].is_finite();
            let improving = if from_upper { d > 1e-9 } else { d < -1e-9 };
            if !improving {
                continue;
            }
            if self.bland {
                entering = Some((j, d.abs(), from_upper));
                break;
            }
            let score = d * d / self.devex[j];
            if entering.as_ref().map_or(true, |(_, best, _)| score > *best) {
                entering = Some((j, score, from_upper));
            }
        }
        let Some((enter_j, _, from_upper)) = entering else {
            return StepOutcome::Optimal;
        };

        let dir = if from_upper { -1.0 } else { 1.0 };
        self.ftran(enter_j);
        let flip_limit = self.f.ub[enter_j] - self.f.lb[enter_j];

        // Harris two-pass ratio test: pass 1 finds the tolerance-expanded
        // limit, pass 2 picks the largest pivot within it
        let mut limit = flip_limit;
        for (i, &wi) in self.wbuf.iter().enumerate() {
            let delta = dir * wi;
            if delta.abs() <= PIVOT_TOL {
                continue;
            }
            let bj = self.basic[i] as usize;
            let tol = feas_tol(self.xb[i].abs());
            let t = if delta > 0.0 {
                (self.xb[i] - self.f.lb[bj] + tol) / delta
            } else if self.f.ub[bj].is_finite() {
                (self.xb[i] - self.f.ub[bj] - tol) / delta
            } else {
                continue;
            };
            limit = limit.min(t.max(0.0));
        }
        if limit.is_infinite() {
            return StepOutcome::Unbounded;
        }

        let mut leaving: Option<(usize, f64, f64)> = None; // (row, delta, exact t)
        if self.bland {
            // smallest exact ratio, ties by lowest variable index
            let mut best_t = f64::INFINITY;
            for (i, &wi) in self.wbuf.iter().enumerate() {
                let delta = dir * wi;
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let bj = self.basic[i] as usize;
                let t = if delta > 0.0 {
                    (self.xb[i] - self.f.lb[bj]) / delta
                } else if self.f.ub[bj].is_finite() {
                    (self.xb[i] - self.f.ub[bj]) / delta
                } else {
                    continue;
                };
                let t = t.max(0.0);
                let replace = match &leaving {
                    None => true,
                    Some((li, _, _)) => {
                        t < best_t - 1e-12
                            || (t <= best_t + 1e-12 && self.basic[i] < self.basic[*li])
                    }
                };
                if replace {
                    best_t = t.min(best_t);
                    leaving = Some((i, delta, t));
                }
            }
        } else {
            for (i, &wi) in self.wbuf.iter().enumerate() {
                let delta = dir * wi;
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let bj = self.basic[i] as usize;
                let t = if delta > 0.0 {
                    (self.xb[i] - self.f.lb[bj]) / delta
                } else if self.f.ub[bj].is_finite() {
                    (self.xb[i] - self.f.ub[bj]) / delta
                } else {
                    continue;
                };
                let t = t.max(0.0);
                if t <= limit {
                    let replace = match &leaving {
                        None => true,
                        Some((_, ld, _)) => delta.abs() > ld.abs(),
                    };
                    if replace {
                        leaving = Some((i, delta, t));
                    }
                }
            }
        }

        self.iterations += 1;

        let flip_first = match &leaving {
            None => true,
            Some((_, _, t)) => flip_limit <= *t,
        };
        if flip_first {
            if flip_limit.is_infinite() {
                return StepOutcome::Unbounded;
            }
            let flip = flip_limit;
            for (i, wi) in self.wbuf.iter().enumerate() {
                self.xb[i] -= dir * wi * flip;
            }
            self.at_upper[enter_j] = !from_upper;
        } else {
            let (row, delta, t) = leaving.expect("checked above");
            let step = t;
            let enter_val = self.nonbasic_value(enter_j) + dir * step;
            let leave_j = self.basic[row] as usize;
            self.at_upper[leave_j] = delta < 0.0;

            // Devex weights and reduced costs both update against the pivot row
            let piv = self.wbuf[row];
            self.btran_row(row);
            let gamma_q = self.devex[enter_j].max(1.0);
            let piv2 = piv * piv;
            let theta_d = self.dvec[enter_j] / piv;
            for j in 0..self.f.n_total() {
                if self.basic_pos[j] >= 0 || j == enter_j {
                    continue;
                }
                let mut alpha = 0.0;
                for &(r, v) in &self.f.cols[j] {
                    alpha += self.rhobuf[r as usize] * v;
                }
                if alpha != 0.0 {
                    self.dvec[j] -= theta_d * alpha;
                    let cand = (alpha * alpha / piv2) * gamma_q;
                    if self.f.lb[j] < self.f.ub[j] && cand > self.devex[j] {
                        self.devex[j] = cand;
                    }
                }
            }
            self.dvec[leave_j] = -theta_d;
            self.dvec[enter_j] = 0.0;
            self.devex[leave_j] = (gamma_q / piv2).max(1.0);
            if self.devex.iter().any(|&g| g > DEVEX_RESET) {
                self.devex.iter_mut().for_each(|g| *g = 1.0);
            }

            for (i, wi) in self.wbuf.iter().enumerate() {
                self.xb[i] -= dir * wi * step;
            }
            self.xb[row] = enter_val;
            self.basic_pos[leave_j] = -1;
            self.basic[row] = enter_j as u32;
            self.basic_pos[enter_j] = row as i32;
            self.update_binv(row);
        }

        let obj = self.objective_of(cost);
        if obj < self.last_objective - 1e-10 * (1.0 + self.last_objective.abs()) {
            self.last_objective = obj;
            self.stall = 0;
        } else {
            self.stall += 1;
            if self.stall > 10 * self.f.m as u64 {
                self.bland = true;
            }
        }
        StepOutcome::Pivoted
    }

    /// Rank-one update of the inverse for the pivot stored in `wbuf`.
    fn update_binv(&mut self, row: usize) {
        let m = self.f.m;
        let inv_piv = 1.0 / self.wbuf[row];
        for c in 0..m {
            let seg = &mut self.binv[c * m..(c + 1) * m];
            let pivot_entry = seg[row] * inv_piv;
            if pivot_entry == 0.0 {
                continue;
            }
            for (i, &wi) in self.wbuf.iter().enumerate() {
                if i != row && wi != 0.0 {
                    seg[i] -= wi * pivot_entry;
                }
            }
            seg[row] = pivot_entry;
        }
        self.updates += 1;
    }

    fn primal_feasible(&self) -> bool {
        self.basic.iter().enumerate().all(|(i, &j)| {
            let j = j as usize;
            let tol = feas_tol(self.xb[i].abs());
            self.xb[i] >= self.f.lb[j] - tol
                && (!self.f.ub[j].is_finite() || self.xb[i] <= self.f.ub[j] + tol)
        })
    }

    fn optimize(&mut self, cost: &dyn Fn(usize) -> f64) -> SimplexStatus {
        self.last_objective = f64::INFINITY;
        self.stall = 0;
        self.dvec_valid = false;
        loop {
            match self.primal_step(cost) {
                StepOutcome::Pivoted => {}
                StepOutcome::Optimal => return SimplexStatus::Optimal,
                StepOutcome::Unbounded => return SimplexStatus::Unbounded,
                StepOutcome::Limit => return SimplexStatus::IterationLimit,
                StepOutcome::Numerical => return SimplexStatus::Numerical,
            }
        }
    }

    /// Primal optimization with a feasibility backstop: a mid-run basis repair
    /// can leave a basic variable outside its bounds, which the dual simplex
    /// then cleans up before re-optimizing.
    fn optimize_verified(&mut self, cost: &dyn Fn(usize) -> f64) -> SimplexStatus {
        for _ in 0..8 {
            let status = self.optimize(cost);
            if status != SimplexStatus::Optimal {
                return status;
            }
            if self.updates > 0 && self.residual() > 1e-9 && !self.refactor() {
                return SimplexStatus::Numerical;
            }
            if self.primal_feasible() {
                return SimplexStatus::Optimal;
            }
            let status = self.dual_optimize(cost);
            if status != SimplexStatus::Optimal {
                return status;
            }
        }
        SimplexStatus::Numerical
    }

    /// Dual simplex: restores primal feasibility while keeping the basis dual
    /// feasible for the given cost. `Infeasible` when a violated row admits no
    /// entering column.
    fn dual_optimize(&mut self, cost: &dyn Fn(usize) -> f64) -> SimplexStatus {
        self.dvec_valid = false;
        loop {
            if self.iterations >= self.iteration_limit {
                return SimplexStatus::IterationLimit;
            }
            if !self.maybe_refactor() {
                return SimplexStatus::Numerical;
            }
            let mut leave: Option<(usize, f64, bool)> = None;
            for (i, &j) in self.basic.iter().enumerate() {
                let j = j as usize;
                let tol = feas_tol(self.xb[i].abs());
                let below = self.f.lb[j] - self.xb[i];
                let above =
                    if self.f.ub[j].is_finite() { self.xb[i] - self.f.ub[j] } else { -1.0 };
                if below > tol && leave.as_ref().map_or(true, |l| below > l.1) {
                    leave = Some((i, below, false));
                }
                if above > tol && leave.as_ref().map_or(true, |l| above > l.1) {
                    leave = Some((i, above, true));
                }
            }
            let Some((row, _, above_upper)) = leave else {
                return SimplexStatus::Optimal;
            };

            if !self.dvec_valid {
                self.refresh_reduced_costs(cost);
            }
            self.btran_row(row);
            let sigma = if above_upper { 1.0 } else { -1.0 };

            let mut alphas = std::mem::take(&mut self.alpha_list);
            alphas.clear();
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.f.n_total() {
                if self.basic_pos[j] >= 0 {
                    continue;
                }
                let mut alpha = 0.0;
                for &(r, v) in &self.f.cols[j] {
                    alpha += self.rhobuf[r as usize] * v;
                }
                if alpha == 0.0 {
                    continue;
                }
                alphas.push((j as u32, alpha));
                if alpha.abs() <= PIVOT_TOL || self.f.lb[j] >= self.f.ub[j] {
                    continue;
                }
                let at_up = self.at_upper[j] && self.f.ub[j].is_finite();
                let candidate = if at_up { sigma * alpha < 0.0 } else { sigma * alpha > 0.0 };
                if !candidate {
                    continue;
                }
                let ratio = (self.dvec[j] / alpha).abs();
                let better = match &entering {
                    None => true,
                    Some((ej, er, ea)) => {
                        ratio < er - 1e-10
                            || (ratio < er + 1e-10
                                && if self.bland { j < *ej } else { alpha.abs() > ea.abs() })
                    }
                };
                if better {
                    entering = Some((j, ratio, alpha));
                }
            }
            let Some((enter_j, _, alpha)) = entering else {
                self.alpha_list = alphas;
                return SimplexStatus::Infeasible;
            };
            self.iterations += 1;

            // reduced costs shift along the pivot row
            let theta_d = self.dvec[enter_j] / alpha;
            for &(j, a) in &alphas {
                let j = j as usize;
                if j != enter_j {
                    self.dvec[j] -= theta_d * a;
                }
            }
            self.alpha_list = alphas;

            let leave_j = self.basic[row] as usize;
            let target = if above_upper { self.f.ub[leave_j] } else { self.f.lb[leave_j] };
            let delta = (self.xb[row] - target) / alpha;
            self.ftran(enter_j);
            for (i, wi) in self.wbuf.iter().enumerate() {
                self.xb[i] -= wi * delta;
            }
            self.dvec[leave_j] = -theta_d;
            self.dvec[enter_j] = 0.0;
            self.at_upper[leave_j] = above_upper;
            self.basic_pos[leave_j] = -1;
            self.basic[row] = enter_j as u32;
            self.basic_pos[enter_j] = row as i32;
            self.xb[row] = self.nonbasic_value(enter_j) + delta;
            self.update_binv(row);
        }
    }
}

fn disjoint_rows(a: &mut [f64], k: usize, r: usize, w: usize) -> (&[f64], &mut [f64]) {
    if k < r {
        let (head, tail) = a.split_at_mut(r * w);
        (&head[k * w..k * w + w], &mut tail[..w])
    } else {
        let (head, tail) = a.split_at_mut(k * w);
        (&tail[..w], &mut head[r * w..r * w + w])
    }
}

/// Solves from scratch: phase 1 on signed artificials from a slack crash
/// basis, then phase 2. Mutates the artificial columns and bounds of `f`.
pub fn solve(f: &mut StandardForm, limit: u64) -> SolveArtifacts {
    // reset artificials: bounds free for phase 1, sign set per crash residual
    for r in 0..f.m {
        let j = f.artificial(r);
        f.cols[j] = vec![(r as u32, 1.0)];
        f.lb[j] = 0.0;
        f.ub[j] = f64::INFINITY;
    }
    let mut signs = Vec::new();
    let (basis, binv, iters) = {
        let mut core = Core::new(f, limit);
        // two passes: install with +1 artificials to learn residual signs is
        // wasteful, so compute signs first and patch the columns
        if !core.install_crash_basis(&mut signs) {
            return failure(f, SimplexStatus::Numerical, 0);
        }
        drop(core);

        for (r, &s) in signs.iter().enumerate() {
            if s < 0.0 {
                let j = f.artificial(r);
                f.cols[j] = vec![(r as u32, -1.0)];
            }
        }
        let mut core = Core::new(f, limit);
        if !core.install_crash_basis(&mut Vec::new()) {
            return failure(f, SimplexStatus::Numerical, 0);
        }

        let art_start = f.n_struct + f.n_slack;
        let phase1 = move |j: usize| -> f64 {
            if j >= art_start {
                1.0
            } else {
                0.0
            }
        };
        let status = core.optimize(&phase1);
        if status != SimplexStatus::Optimal {
            let mapped =
                if status == SimplexStatus::Unbounded { SimplexStatus::Numerical } else { status };
            let iters = core.iterations;
            return failure(f, mapped, iters);
        }
        let infeasibility = core.objective_of(&phase1);
        if infeasibility > 1e-7 {
            let iters = core.iterations;
            return failure(f, SimplexStatus::Infeasible, iters);
        }
        if core.updates > 0 && !core.refactor() {
            let iters = core.iterations;
            return failure(f, SimplexStatus::Numerical, iters);
        }
        (core.snapshot(), std::mem::take(&mut core.binv), core.iterations)
    };

    // pin artificials at zero and run phase 2 from the feasible basis
    for r in 0..f.m {
        let j = f.artificial(r);
        f.ub[j] = 0.0;
    }
    let mut core = Core::new(f, limit);
    core.iterations = iters;
    if !core.install_basis(&basis, Some(&binv)) {
        return failure(f, SimplexStatus::Numerical, iters);
    }
    let cost = |j: usize| f.cost[j];
    let status = if core.primal_feasible() {
        core.optimize_verified(&cost)
    } else {
        match core.dual_optimize(&cost) {
            SimplexStatus::Optimal => core.optimize_verified(&cost),
            s => s,
        }
    };
    finish(core, f, status)
}

/// Re-optimizes after bound changes from a previous basis (and, when
/// available, its factorization). Artificial columns must already be pinned by
/// an earlier `solve` on the same `StandardForm`.
pub fn resolve_with_basis(
    f: &mut StandardForm,
    basis: &Basis,
    factorization: Option<&[f64]>,
    limit: u64,
) -> SolveArtifacts {
    {
        let mut core = Core::new(f, limit);
        if core.install_basis(basis, factorization) {
            let cost = |j: usize| f.cost[j];
            let status = if core.primal_feasible() {
                core.optimize_verified(&cost)
            } else {
                match core.dual_optimize(&cost) {
                    SimplexStatus::Optimal => core.optimize_verified(&cost),
                    s => s,
                }
            };
            if status == SimplexStatus::Infeasible {
                let iters = core.iterations;
                return failure(f, SimplexStatus::Infeasible, iters);
            }
            if status != SimplexStatus::Numerical {
                return finish(core, f, status);
            }
        }
    }
    solve(f, limit)
}

fn failure(f: &StandardForm, status: SimplexStatus, iterations: u64) -> SolveArtifacts {
    SolveArtifacts {
        outcome: SimplexOutcome {
            status,
            x: vec![0.0; f.n_struct],
            objective: 0.0,
            duals: vec![0.0; f.m],
            iterations,
        },
        basis: Basis { basic: vec![0; f.m], at_upper: vec![false; f.n_total()] },
        factorization: Vec::new(),
    }
}

fn finish(mut core: Core<'_>, f: &StandardForm, status: SimplexStatus) -> SolveArtifacts {
    if status == SimplexStatus::Optimal && core.updates > 0 {
        core.refactor();
    }
    let mut x = vec![0.0; f.n_struct];
    for (j, xv) in x.iter_mut().enumerate() {
        if core.basic_pos[j] < 0 {
            *xv = core.nonbasic_value(j);
        }
    }
    for (i, &j) in core.basic.iter().enumerate() {
        if (j as usize) < f.n_struct {
            x[j as usize] = core.xb[i];
        }
    }
    let cost = |j: usize| f.cost[j];
    let objective = core.objective_of(&cost);
    core.compute_duals(&cost);
    let mut duals = core.ybuf.clone();
    for (r, d) in duals.iter_mut().enumerate() {
        *d *= f.row_scale[r];
    }
    let outcome = SimplexOutcome { status, x, objective, duals, iterations: core.iterations };
    let basis = core.snapshot();
    let factorization = std::mem::take(&mut core.binv);
    SolveArtifacts { outcome, basis, factorization }
}
