//! Two-phase bounded primal simplex on a dense tableau.
//!
//! Every inequality row gets one slack column with a one-sided bound, so all
//! rows become equalities and the tableau carries `B⁻¹A` for structural and
//! slack columns. Rows whose slack cannot start basic get an artificial
//! variable; artificials are never stored as columns because once they leave
//! the basis they may not re-enter.

use crate::model::LinearProgram;
use crate::{SolveResult, SolveStatus, FEASIBILITY_TOL};

/// Entries below this magnitude are ignored by the ratio test.
const PIVOT_ZERO: f64 = 1e-9;
/// A chosen pivot smaller than this is a numerical breakdown.
const PIVOT_BREAKDOWN: f64 = 1e-10;
const STEP_ZERO: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_switch: usize,
    /// Hard cap on pivots; `None` scales with the problem size.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            degenerate_switch: 30,
            max_iterations: None,
        }
    }
}

/// Solve a linear program with default options.
pub fn solve_lp(lp: &LinearProgram) -> SolveResult {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> SolveResult {
    if lp.validate().is_err() {
        return SolveResult::failed(SolveStatus::NumericalFailure, 0);
    }
    let mut tab = match Tableau::build(lp) {
        Ok(t) => t,
        Err(status) => return SolveResult::failed(status, 0),
    };
    let status = tab.run(opts);
    let iterations = tab.iterations;
    if status != SolveStatus::Optimal {
        return SolveResult::failed(status, iterations);
    }
    let values = tab.structural_values(lp);
    if lp.max_violation(&values) > FEASIBILITY_TOL {
        return SolveResult::failed(SolveStatus::NumericalFailure, iterations);
    }
    SolveResult {
        status: SolveStatus::Optimal,
        objective: lp.objective_value(&values),
        values,
        gap: 0.0,
        iterations,
        nodes: 0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum VarState {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

struct Tableau {
    m: usize,
    /// Structural plus slack columns.
    ncols: usize,
    nstruct: usize,
    tab: Vec<f64>,
    /// Basic variable of each row; `>= ncols` marks that row's artificial.
    basis: Vec<usize>,
    xb: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    /// Reduced costs of the active phase.
    d: Vec<f64>,
    iterations: usize,
    phase_one: bool,
}

enum Step {
    Optimal,
    Unbounded,
    Breakdown,
    Moved,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self, SolveStatus> {
        let nstruct = lp.variables.len();

        // Empty rows are checked directly and dropped.
        let mut rows = Vec::with_capacity(lp.constraints.len());
        for c in &lp.constraints {
            let scale = c.terms.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max);
            if scale == 0.0 {
                let ok = match c.sense {
                    crate::Sense::Le => c.rhs >= -FEASIBILITY_TOL,
                    crate::Sense::Ge => c.rhs <= FEASIBILITY_TOL,
                    crate::Sense::Eq => c.rhs.abs() <= FEASIBILITY_TOL,
                };
                if !ok {
                    return Err(SolveStatus::Infeasible);
                }
                continue;
            }
            rows.push((c, 1.0 / scale));
        }
        let m = rows.len();
        let nslack = rows
            .iter()
            .filter(|(c, _)| c.sense != crate::Sense::Eq)
            .count();
        let ncols = nstruct + nslack;

        let mut lo = Vec::with_capacity(ncols);
        let mut hi = Vec::with_capacity(ncols);
        let mut cost = Vec::with_capacity(ncols);
        for v in &lp.variables {
            lo.push(v.lower);
            hi.push(v.upper);
            cost.push(v.cost);
        }
        for (c, _) in &rows {
            match c.sense {
                crate::Sense::Le => {
                    lo.push(0.0);
                    hi.push(f64::INFINITY);
                    cost.push(0.0);
                }
                crate::Sense::Ge => {
                    lo.push(f64::NEG_INFINITY);
                    hi.push(0.0);
                    cost.push(0.0);
                }
                crate::Sense::Eq => {}
            }
        }

        let mut state = vec![VarState::Lower; ncols];
        let mut xnb = vec![0.0; ncols];
        for j in 0..ncols {
            if lo[j].is_finite() {
                state[j] = VarState::Lower;
                xnb[j] = lo[j];
            } else if hi[j].is_finite() {
                state[j] = VarState::Upper;
                xnb[j] = hi[j];
            } else {
                state[j] = VarState::Zero;
                xnb[j] = 0.0;
            }
        }

        let mut tab = vec![0.0; m * ncols];
        let mut basis = vec![0; m];
        let mut xb = vec![0.0; m];
        let mut slack = nstruct;
        for (i, (c, scale)) in rows.iter().enumerate() {
            let row = &mut tab[i * ncols..(i + 1) * ncols];
            for &(v, a) in &c.terms {
                row[v.0] += a * scale;
            }
            let b = c.rhs * scale;
            let resid = b - (0..nstruct).map(|j| row[j] * xnb[j]).sum::<f64>();
            let slack_col = if c.sense != crate::Sense::Eq {
                row[slack] = 1.0;
                slack += 1;
                Some(slack - 1)
            } else {
                None
            };
            match slack_col {
                Some(s) if resid >= lo[s] && resid <= hi[s] => {
                    basis[i] = s;
                    xb[i] = resid;
                    state[s] = VarState::Basic;
                }
                _ => {
                    // Artificial with coefficient sign(resid); scale the row so
                    // the artificial's column is +e_i.
                    if resid < 0.0 {
                        row.iter_mut().for_each(|a| *a = -*a);
                    }
                    basis[i] = ncols + i;
                    xb[i] = resid.abs();
                }
            }
        }

        Ok(Tableau {
            m,
            ncols,
            nstruct,
            tab,
            basis,
            xb,
            lo,
            hi,
            cost,
            state,
            d: vec![0.0; ncols],
            iterations: 0,
            phase_one: true,
        })
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Lower => self.lo[j],
            VarState::Upper => self.hi[j],
            VarState::Zero | VarState::Basic => 0.0,
        }
    }

    fn basic_bounds(&self, i: usize) -> (f64, f64) {
        let b = self.basis[i];
        if b >= self.ncols {
            if self.phase_one {
                (0.0, f64::INFINITY)
            } else {
                (0.0, 0.0)
            }
        } else {
            (self.lo[b], self.hi[b])
        }
    }

    fn basic_cost(&self, i: usize) -> f64 {
        let b = self.basis[i];
        if self.phase_one {
            if b >= self.ncols {
                1.0
            } else {
                0.0
            }
        } else if b >= self.ncols {
            0.0
        } else {
            self.cost[b]
        }
    }

    fn compute_reduced_costs(&mut self) {
        let nc = self.ncols;
        for j in 0..nc {
            self.d[j] = if self.phase_one { 0.0 } else { self.cost[j] };
        }
        for i in 0..self.m {
            let cb = self.basic_cost(i);
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[i * nc..(i + 1) * nc];
            for (d, &t) in self.d.iter_mut().zip(row) {
                *d -= cb * t;
            }
        }
        for i in 0..self.m {
            let b = self.basis[i];
            if b < nc {
                self.d[b] = 0.0;
            }
        }
    }

    fn run(&mut self, opts: &SimplexOptions) -> SolveStatus {
        let max_iter = opts
            .max_iterations
            .unwrap_or(200 * (self.m + self.ncols) + 1000);

        // Phase one.
        if self.basis.iter().any(|&b| b >= self.ncols) {
            self.phase_one = true;
            self.compute_reduced_costs();
            match self.iterate(opts, max_iter, 1.0) {
                Ok(true) => {}
                Ok(false) => return SolveStatus::NumericalFailure,
                Err(s) => return s,
            }
            let infeas: f64 = (0..self.m)
                .filter(|&i| self.basis[i] >= self.ncols)
                .map(|i| self.xb[i])
                .sum();
            if infeas > 1e-7 {
                return SolveStatus::Infeasible;
            }
            self.drive_out_artificials();
        }

        // Phase two.
        self.phase_one = false;
        self.compute_reduced_costs();
        let cost_scale = self.cost.iter().fold(1.0_f64, |a, c| a.max(c.abs()));
        match self.iterate(opts, max_iter, cost_scale) {
            Ok(true) => SolveStatus::Optimal,
            Ok(false) => SolveStatus::NumericalFailure,
            Err(s) => s,
        }
    }

    /// Returns Ok(true) at optimality, Ok(false) on iteration exhaustion.
    fn iterate(&mut self, opts: &SimplexOptions, max_iter: usize, cost_scale: f64) -> Result<bool, SolveStatus> {
        let tol = 1e-9 * cost_scale;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= max_iter {
                return Ok(false);
            }
            let bland = degenerate_run >= opts.degenerate_switch;
            match self.step(tol, bland, &mut degenerate_run) {
                Step::Optimal => return Ok(true),
                Step::Unbounded => {
                    return Err(if self.phase_one {
                        SolveStatus::NumericalFailure
                    } else {
                        SolveStatus::Unbounded
                    })
                }
                Step::Breakdown => return Err(SolveStatus::NumericalFailure),
                Step::Moved => self.iterations += 1,
            }
        }
    }

    fn choose_entering(&self, tol: f64, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            let dj = self.d[j];
            let dir = match self.state[j] {
                VarState::Basic => continue,
                _ if self.lo[j] == self.hi[j] => continue,
                VarState::Lower if dj < -tol => 1.0,
                VarState::Upper if dj > tol => -1.0,
                VarState::Zero if dj.abs() > tol => -dj.signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = dj.abs();
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn step(&mut self, tol: f64, bland: bool, degenerate_run: &mut usize) -> Step {
        let Some((q, dir)) = self.choose_entering(tol, bland) else {
            return Step::Optimal;
        };
        let nc = self.ncols;

        // Ratio test: basic x_i moves by -dir * T[i][q] * theta.
        let mut theta = f64::INFINITY;
        for i in 0..self.m {
            let alpha = -dir * self.tab[i * nc + q];
            if alpha.abs() <= PIVOT_ZERO {
                continue;
            }
            let (l, u) = self.basic_bounds(i);
            let limit = if alpha < 0.0 {
                if l.is_finite() {
                    ((self.xb[i] - l) / -alpha).max(0.0)
                } else {
                    continue;
                }
            } else if u.is_finite() {
                ((u - self.xb[i]) / alpha).max(0.0)
            } else {
                continue;
            };
            if limit < theta {
                theta = limit;
            }
        }
        let flip = self.hi[q] - self.lo[q];
        if flip.is_finite() && flip <= theta {
            // Bound flip, no basis change.
            for i in 0..self.m {
                let t = self.tab[i * nc + q];
                if t != 0.0 {
                    self.xb[i] -= dir * flip * t;
                }
            }
            self.state[q] = if dir > 0.0 { VarState::Upper } else { VarState::Lower };
            *degenerate_run = 0;
            return Step::Moved;
        }
        if !theta.is_finite() {
            return Step::Unbounded;
        }

        // Among tied rows pick the largest pivot, or the smallest basic
        // index under Bland's rule.
        let mut leave: Option<usize> = None;
        let mut best_key = f64::NEG_INFINITY;
        for i in 0..self.m {
            let alpha = -dir * self.tab[i * nc + q];
            if alpha.abs() <= PIVOT_ZERO {
                continue;
            }
            let (l, u) = self.basic_bounds(i);
            let limit = if alpha < 0.0 {
                if !l.is_finite() {
                    continue;
                }
                ((self.xb[i] - l) / -alpha).max(0.0)
            } else {
                if !u.is_finite() {
                    continue;
                }
                ((u - self.xb[i]) / alpha).max(0.0)
            };
            if limit <= theta + STEP_ZERO * (1.0 + theta) {
                let key = if bland {
                    -(self.basis[i] as f64)
                } else {
                    alpha.abs()
                };
                if key > best_key {
                    best_key = key;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Step::Breakdown;
        };
        let pivot = self.tab[r * nc + q];
        if pivot.abs() < PIVOT_BREAKDOWN {
            return Step::Breakdown;
        }

        if theta <= STEP_ZERO {
            *degenerate_run += 1;
        } else {
            *degenerate_run = 0;
        }

        let xq = self.nonbasic_value(q) + dir * theta;
        for i in 0..self.m {
            let t = self.tab[i * nc + q];
            if t != 0.0 {
                self.xb[i] -= dir * theta * t;
            }
        }
        let alpha_r = -dir * pivot;
        let leaving = self.basis[r];
        if leaving < nc {
            self.state[leaving] = if alpha_r < 0.0 { VarState::Lower } else { VarState::Upper };
            if !self.lo[leaving].is_finite() && self.state[leaving] == VarState::Lower
                || !self.hi[leaving].is_finite() && self.state[leaving] == VarState::Upper
            {
                self.state[leaving] = VarState::Zero;
            }
        }
        self.pivot(r, q);
        self.basis[r] = q;
        self.state[q] = VarState::Basic;
        self.xb[r] = xq;
        Step::Moved
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let inv = 1.0 / self.tab[r * nc + q];
        {
            let row = &mut self.tab[r * nc..(r + 1) * nc];
            for a in row.iter_mut() {
                *a *= inv;
            }
            row[q] = 1.0;
        }
        let nz: Vec<(usize, f64)> = self.tab[r * nc..(r + 1) * nc]
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(j, &a)| (j, a))
            .collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * nc..(i + 1) * nc];
            for &(j, a) in &nz {
                row[j] -= f * a;
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            for &(j, a) in &nz {
                self.d[j] -= f * a;
            }
            self.d[q] = 0.0;
        }
    }

    fn drive_out_artificials(&mut self) {
        let nc = self.ncols;
        for r in 0..self.m {
            if self.basis[r] < nc {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..nc {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                let a = self.tab[r * nc + j].abs();
                if a > 1e-7 && best.map_or(true, |(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((q, _)) = best {
                let xq = self.nonbasic_value(q);
                self.pivot(r, q);
                self.basis[r] = q;
                self.state[q] = VarState::Basic;
                self.xb[r] = xq;
            } else {
                // Redundant row: the artificial stays basic, pinned at zero.
                self.xb[r] = 0.0;
            }
        }
    }

    fn structural_values(&self, lp: &LinearProgram) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.nstruct).map(|j| self.nonbasic_value(j)).collect();
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.nstruct {
                x[b] = self.xb[i];
            }
        }
        for (xj, v) in x.iter_mut().zip(&lp.variables) {
            if *xj < v.lower && *xj > v.lower - 1e-9 {
                *xj = v.lower;
            }
            if *xj > v.upper && *xj < v.upper + 1e-9 {
                *xj = v.upper;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{LinearProgram, Sense};

    #[test]
    fn bound_attaining_minimum() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_var("x", 0.0, 10.0, -1.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.value(x), 10.0);
        assert_eq!(r.objective, -10.0);
    }

    #[test]
    fn two_variable_cover() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_var("x", 0.0, 2.0, 1.0);
        let y = lp.add_var("y", 0.0, 2.0, 1.0);
        lp.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        lp.add_constraint("lo", vec![(x, 1.0)], Sense::Ge, 2.0);
        lp.add_constraint("hi", vec![(x, 1.0)], Sense::Le, 1.0);
        assert_eq!(solve_lp(&lp).status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray_is_reported() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_var("x", 0.0, f64::INFINITY, -1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 0.0);
        lp.add_constraint("c", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve_lp(&lp).status, SolveStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min |x - 3| style: x free, x = 3 + p - n, min p + n.
        let mut lp = LinearProgram::new("t");
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let p = lp.add_var("p", 0.0, f64::INFINITY, 1.0);
        let n = lp.add_var("n", 0.0, f64::INFINITY, 1.0);
        lp.add_constraint("def", vec![(x, 1.0), (p, -1.0), (n, 1.0)], Sense::Eq, 3.0);
        lp.add_constraint("cap", vec![(x, 1.0)], Sense::Le, -2.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.value(x) + 2.0).abs() < 1e-9);
        assert!((r.objective - 5.0).abs() < 1e-9);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let mut lp = LinearProgram::new("t");
        let x = lp.add_var("x", 0.0, 5.0, 1.0);
        let y = lp.add_var("y", 0.0, 5.0, 2.0);
        lp.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 4.0);
        lp.add_constraint("b", vec![(x, 2.0), (y, 2.0)], Sense::Eq, 8.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective - 4.0).abs() < 1e-9);
    }

    #[test]
    fn empty_row_feasibility_is_checked() {
        let mut lp = LinearProgram::new("t");
        lp.add_var("x", 0.0, 1.0, 1.0);
        lp.add_constraint("bad", vec![], Sense::Ge, 1.0);
        assert_eq!(solve_lp(&lp).status, SolveStatus::Infeasible);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance (converted to minimization).
        let mut lp = LinearProgram::new("beale");
        let x4 = lp.add_var("x4", 0.0, f64::INFINITY, -0.75);
        let x5 = lp.add_var("x5", 0.0, f64::INFINITY, 150.0);
        let x6 = lp.add_var("x6", 0.0, f64::INFINITY, -0.02);
        let x7 = lp.add_var("x7", 0.0, f64::INFINITY, 6.0);
        lp.add_constraint("r1", vec![(x4, 0.25), (x5, -60.0), (x6, -0.04), (x7, 9.0)], Sense::Le, 0.0);
        lp.add_constraint("r2", vec![(x4, 0.5), (x5, -90.0), (x6, -0.02), (x7, 3.0)], Sense::Le, 0.0);
        lp.add_constraint("r3", vec![(x6, 1.0)], Sense::Le, 1.0);
        let r = solve_lp_with(
            &lp,
            &SimplexOptions {
                degenerate_switch: 0,
                max_iterations: None,
            },
        );
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective + 0.05).abs() < 1e-9);
    }
}
