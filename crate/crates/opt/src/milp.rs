//! Best-first branch-and-bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::model::{MixedIntegerProgram, ModelError};
use crate::simplex::solve_lp;
use crate::{SolveResult, SolveStatus, INTEGRALITY_TOL};

#[derive(Clone, Copy, Debug)]
pub struct MilpOptions {
    /// Stop once (incumbent − best bound) / |incumbent| falls to this value.
    pub rel_gap: f64,
    /// Maximum number of LP relaxations solved.
    pub node_limit: usize,
    /// Try rounding the root relaxation to seed an incumbent. The search
    /// order is unchanged; a good incumbent only prunes earlier.
    pub root_rounding: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            rel_gap: 0.0,
            node_limit: 1_000_000,
            root_rounding: false,
        }
    }
}

struct Node {
    bound: f64,
    seq: usize,
    /// Per binary (in `MixedIntegerProgram::binaries` order): -1 free, 0 or 1 fixed.
    fixes: Vec<i8>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: invert so the lowest bound, then the oldest
    // node, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn gap_of(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1e-9)).max(0.0)
}

/// Solve a MIP by best-first branch-and-bound.
///
/// Branching picks the binary whose relaxation value is closest to 0.5,
/// breaking ties by the lowest variable index. Returns `Optimal` when the
/// gap target is met, otherwise `NodeLimit` with the incumbent (if any).
pub fn solve_milp(p: &MixedIntegerProgram, opts: &MilpOptions) -> Result<SolveResult, ModelError> {
    if opts.rel_gap < 0.0 || opts.rel_gap.is_nan() {
        return Err(ModelError::NegativeGap(opts.rel_gap));
    }
    p.validate()?;

    let nb = p.binaries.len();
    let mut lp = p.lp.clone();
    let base_bounds: Vec<(f64, f64)> = p
        .binaries
        .iter()
        .map(|b| {
            let v = &p.lp.variables[b.0];
            (v.lower, v.upper)
        })
        .collect();

    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;

    let solve_node = |fixes: &[i8], lp: &mut crate::LinearProgram| -> SolveResult {
        for (k, b) in p.binaries.iter().enumerate() {
            let (lo, hi) = match fixes[k] {
                0 => (0.0, 0.0),
                1 => (1.0, 1.0),
                _ => base_bounds[k],
            };
            lp.set_bounds(*b, lo, hi);
        }
        solve_lp(lp)
    };

    let root_fixes = vec![-1i8; nb];
    let root = solve_node(&root_fixes, &mut lp);
    nodes += 1;
    iterations += root.iterations;
    match root.status {
        SolveStatus::Optimal => {}
        status => {
            let mut r = SolveResult::failed(status, iterations);
            r.nodes = nodes;
            return Ok(r);
        }
    }

    if opts.root_rounding && nb > 0 && fractional_index(p, &root.values).is_some() {
        let fixes: Vec<i8> = p
            .binaries
            .iter()
            .map(|b| if root.values[b.0] >= 0.5 { 1 } else { 0 })
            .collect();
        let r = solve_node(&fixes, &mut lp);
        nodes += 1;
        iterations += r.iterations;
        if r.status == SolveStatus::Optimal {
            incumbent = Some((r.objective, r.values));
        }
    }

    heap.push(Node {
        bound: root.objective,
        seq,
        fixes: root_fixes,
    });
    seq += 1;
    // The root solution is re-used when its node pops.
    let mut cached_root = Some(root);

    // Bound of the node that triggered an early (gap-based) stop.
    let mut stop_bound: Option<f64> = None;
    let mut hit_limit = false;
    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            let tol = 1e-9 * inc.abs().max(1.0);
            if node.bound >= *inc - tol {
                // Every open node is at least this bad.
                stop_bound = Some(*inc);
                break;
            }
            if gap_of(*inc, node.bound) <= opts.rel_gap {
                stop_bound = Some(node.bound);
                break;
            }
        }
        let sol = match cached_root.take() {
            Some(r) if node.seq == 0 => r,
            _ => {
                if nodes >= opts.node_limit {
                    heap.push(node);
                    hit_limit = true;
                    break;
                }
                let r = solve_node(&node.fixes, &mut lp);
                nodes += 1;
                iterations += r.iterations;
                r
            }
        };
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::NumericalFailure => {
                let mut r = SolveResult::failed(SolveStatus::NumericalFailure, iterations);
                r.nodes = nodes;
                return Ok(r);
            }
            // Infeasible subtree; a bounded root cannot have unbounded children.
            _ => continue,
        }
        if let Some((inc, _)) = &incumbent {
            if sol.objective >= *inc - 1e-9 * inc.abs().max(1.0) {
                continue;
            }
        }
        match fractional_index(p, &sol.values) {
            None => {
                let mut values = sol.values;
                for b in &p.binaries {
                    values[b.0] = values[b.0].round();
                }
                incumbent = Some((sol.objective, values));
            }
            Some(k) => {
                for v in [0i8, 1] {
                    let mut fixes = node.fixes.clone();
                    fixes[k] = v;
                    heap.push(Node {
                        bound: sol.objective,
                        seq,
                        fixes,
                    });
                    seq += 1;
                }
            }
        }
    }

    Ok(match incumbent {
        Some((obj, values)) => {
            let (status, gap) = if hit_limit {
                let open = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
                let gap = gap_of(obj, open.min(obj));
                let status = if gap <= opts.rel_gap {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::NodeLimit
                };
                (status, gap)
            } else {
                (SolveStatus::Optimal, stop_bound.map_or(0.0, |b| gap_of(obj, b.min(obj))))
            };
            SolveResult {
                status,
                objective: obj,
                values,
                gap,
                iterations,
                nodes,
            }
        }
        None => {
            let status = if hit_limit {
                SolveStatus::NodeLimit
            } else {
                SolveStatus::Infeasible
            };
            let mut r = SolveResult::failed(status, iterations);
            r.nodes = nodes;
            r
        }
    })
}

/// Position (in `binaries`) of the most fractional binary, lowest index on ties.
fn fractional_index(p: &MixedIntegerProgram, values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, b) in p.binaries.iter().enumerate() {
        let x = values[b.0];
        let frac = (x - x.round()).abs();
        if frac <= INTEGRALITY_TOL {
            continue;
        }
        let dist = (x - 0.5).abs();
        if best.map_or(true, |(_, d)| dist < d) {
            best = Some((k, dist));
        }
    }
    best.map(|(k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Sense, VarId};

    #[test]
    fn knapsack_picks_the_heavier_item() {
        let mut p = MixedIntegerProgram::new("knap");
        let a = p.add_binary("a", -3.0);
        let b = p.add_binary("b", -2.0);
        p.lp.add_constraint("cap", vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0);
        let r = solve_milp(&p, &MilpOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.value(a), 1.0);
        assert_eq!(r.value(b), 0.0);
        assert!((r.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_binaries_reduce_to_lp() {
        let mut p = MixedIntegerProgram::new("fixed");
        let u = p.add_binary("u", 5.0);
        p.lp.set_bounds(u, 1.0, 1.0);
        let x = p.lp.add_var("x", 0.0, 10.0, 1.0);
        p.lp.add_constraint("link", vec![(x, 1.0), (u, -4.0)], Sense::Ge, 0.0);
        let mip = solve_milp(&p, &MilpOptions::default()).unwrap();
        let lp = solve_lp(&p.lp);
        assert_eq!(mip.status, SolveStatus::Optimal);
        assert!((mip.objective - lp.objective).abs() < 1e-12);
        assert_eq!(mip.values, lp.values);
    }

    #[test]
    fn negative_gap_is_rejected() {
        let p = MixedIntegerProgram::new("e");
        let opts = MilpOptions {
            rel_gap: -0.1,
            ..Default::default()
        };
        assert!(matches!(solve_milp(&p, &opts), Err(ModelError::NegativeGap(_))));
    }

    #[test]
    fn node_limit_without_incumbent() {
        // Parity constraint: 2a + 2b = 1 has fractional relaxations only.
        let mut p = MixedIntegerProgram::new("parity");
        let a = p.add_binary("a", 1.0);
        let b = p.add_binary("b", 1.0);
        p.lp.add_constraint("odd", vec![(a, 2.0), (b, 2.0)], Sense::Eq, 1.0);
        let opts = MilpOptions {
            node_limit: 1,
            ..Default::default()
        };
        let r = solve_milp(&p, &opts).unwrap();
        assert_eq!(r.status, SolveStatus::NodeLimit);
        assert!(!r.has_solution());

        let full = solve_milp(&p, &MilpOptions::default()).unwrap();
        assert_eq!(full.status, SolveStatus::Infeasible);
    }

    #[test]
    fn most_fractional_ties_break_low() {
        let mut p = MixedIntegerProgram::new("tie");
        let a = p.add_binary("a", 0.0);
        let b = p.add_binary("b", 0.0);
        let vals = vec![0.5, 0.5];
        assert_eq!(fractional_index(&p, &vals), Some(0));
        let _ = (a, b, VarId(0));
    }
}
