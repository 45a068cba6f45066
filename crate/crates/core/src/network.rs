//! Zonal network: lossless DC power flow and the flow-space constraints used
//! by the market layers.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scenario::{Pipe, Scenario};

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("zone {0} is not reachable from the swing zone")]
    Disconnected(String),
    #[error("unknown zone {0}")]
    UnknownZone(String),
    #[error("expected {expected} zonal injections, got {got}")]
    Length { expected: usize, got: usize },
}

#[derive(Clone, Debug)]
struct Branch {
    from: usize,
    to: usize,
    reactance: f64,
    limit: f64,
}

/// Pipes traversed by one independent loop, with the orientation of each.
pub type Cycle = Vec<(usize, f64)>;

#[derive(Clone, Debug)]
pub struct Network {
    pub zone_ids: Vec<String>,
    pub pipe_ids: Vec<String>,
    pub swing: usize,
    branches: Vec<Branch>,
    /// Loops closed by pipes outside a BFS tree rooted at the swing zone.
    cycles: Vec<Cycle>,
    /// LU factors of the susceptance matrix with the swing row/column removed.
    lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl Network {
    pub fn from_scenario(s: &Scenario) -> Result<Self, NetworkError> {
        let zones: Vec<String> = s.zones.iter().map(|z| z.id.clone()).collect();
        Network::new(&zones, &s.pipes, &s.swing_zone)
    }

    pub fn new(zones: &[String], pipes: &[Pipe], swing_zone: &str) -> Result<Self, NetworkError> {
        let idx = |z: &str| {
            zones
                .iter()
                .position(|x| x == z)
                .ok_or_else(|| NetworkError::UnknownZone(z.to_string()))
        };
        let swing = idx(swing_zone)?;
        let mut branches = Vec::with_capacity(pipes.len());
        for p in pipes {
            branches.push(Branch {
                from: idx(&p.from_zone)?,
                to: idx(&p.to_zone)?,
                reactance: p.reactance,
                limit: p.limit,
            });
        }
        let n = zones.len();

        // BFS tree from the swing zone.
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut depth = vec![usize::MAX; n];
        let mut in_tree = vec![false; branches.len()];
        depth[swing] = 0;
        let mut queue = VecDeque::from([swing]);
        while let Some(z) = queue.pop_front() {
            for (l, b) in branches.iter().enumerate() {
                let next = if b.from == z {
                    b.to
                } else if b.to == z {
                    b.from
                } else {
                    continue;
                };
                if depth[next] == usize::MAX {
                    depth[next] = depth[z] + 1;
                    parent[next] = Some((z, l));
                    in_tree[l] = true;
                    queue.push_back(next);
                }
            }
        }
        if let Some(z) = (0..n).find(|&z| depth[z] == usize::MAX) {
            return Err(NetworkError::Disconnected(zones[z].clone()));
        }

        let mut cycles = Vec::new();
        for (l, b) in branches.iter().enumerate() {
            if in_tree[l] {
                continue;
            }
            // Walk from `to` and `from` up to their common ancestor. The loop is
            // from → to along the chord, then back to `from` through the tree.
            let mut cycle = vec![(l, 1.0)];
            let (mut a, mut c) = (b.to, b.from);
            let mut tail = Vec::new();
            while a != c {
                if depth[a] >= depth[c] {
                    let (p, pl) = parent[a].expect("non-root has a parent");
                    // Traverse a → p.
                    cycle.push((pl, if branches[pl].from == a { 1.0 } else { -1.0 }));
                    a = p;
                } else {
                    let (p, pl) = parent[c].expect("non-root has a parent");
                    // Traversed later as p → c.
                    tail.push((pl, if branches[pl].from == p { 1.0 } else { -1.0 }));
                    c = p;
                }
            }
            cycle.extend(tail.into_iter().rev());
            cycles.push(cycle);
        }

        let mut net = Network {
            zone_ids: zones.to_vec(),
            pipe_ids: pipes.iter().map(|p| p.id.clone()).collect(),
            swing,
            branches,
            cycles,
            lu: None,
        };
        if n > 1 {
            net.lu = Some(net.reduced_susceptance().lu());
        }
        Ok(net)
    }

    pub fn num_zones(&self) -> usize {
        self.zone_ids.len()
    }

    pub fn num_pipes(&self) -> usize {
        self.branches.len()
    }

    pub fn endpoints(&self, pipe: usize) -> (usize, usize) {
        (self.branches[pipe].from, self.branches[pipe].to)
    }

    pub fn limit(&self, pipe: usize) -> f64 {
        self.branches[pipe].limit
    }

    pub fn reactance(&self, pipe: usize) -> f64 {
        self.branches[pipe].reactance
    }

    pub fn cycles(&self) -> &[Cycle] {
        &self.cycles
    }

    /// Reduced index of zone `z` (swing removed).
    fn reduced(&self, z: usize) -> Option<usize> {
        match z.cmp(&self.swing) {
            std::cmp::Ordering::Less => Some(z),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(z - 1),
        }
    }

    fn reduced_susceptance(&self) -> DMatrix<f64> {
        let n = self.num_zones() - 1;
        let mut b = DMatrix::zeros(n, n);
        for br in &self.branches {
            let y = 1.0 / br.reactance;
            let (i, j) = (self.reduced(br.from), self.reduced(br.to));
            if let Some(i) = i {
                b[(i, i)] += y;
            }
            if let Some(j) = j {
                b[(j, j)] += y;
            }
            if let (Some(i), Some(j)) = (i, j) {
                b[(i, j)] -= y;
                b[(j, i)] -= y;
            }
        }
        b
    }

    /// Flows (from → to positive) for net zonal injections. The swing zone
    /// absorbs whatever the other zones do not balance.
    pub fn dc_power_flow(&self, injections: &[f64]) -> Result<Vec<f64>, NetworkError> {
        let n = self.num_zones();
        if injections.len() != n {
            return Err(NetworkError::Length {
                expected: n,
                got: injections.len(),
            });
        }
        let mut theta = vec![0.0; n];
        if let Some(lu) = &self.lu {
            let rhs = DVector::from_iterator(
                n - 1,
                (0..n).filter(|&z| z != self.swing).map(|z| injections[z]),
            );
            let sol = lu
                .solve(&rhs)
                .ok_or_else(|| NetworkError::Disconnected(self.zone_ids[self.swing].clone()))?;
            for z in 0..n {
                if let Some(r) = self.reduced(z) {
                    theta[z] = sol[r];
                }
            }
        }
        Ok(self
            .branches
            .iter()
            .map(|b| (theta[b.from] - theta[b.to]) / b.reactance)
            .collect())
    }

    /// Largest |injection − net outflow| over all zones.
    pub fn kcl_residual(&self, injections: &[f64], flows: &[f64]) -> f64 {
        let mut net = injections.to_vec();
        for (b, f) in self.branches.iter().zip(flows) {
            net[b.from] -= f;
            net[b.to] += f;
        }
        net.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pipes whose |flow| exceeds the limit, with the excess in MW.
    pub fn violations(&self, flows: &[f64]) -> Vec<(usize, f64)> {
        self.branches
            .iter()
            .zip(flows)
            .enumerate()
            .filter_map(|(l, (b, f))| {
                let excess = f.abs() - b.limit;
                (excess > 1e-9).then_some((l, excess))
            })
            .collect()
    }
}

/// One-shot DC flow keyed by zone and pipe ids.
pub fn dc_power_flow(
    zones: &[String],
    injections: &[f64],
    pipes: &[Pipe],
    swing_zone: &str,
) -> Result<Vec<f64>, NetworkError> {
    Network::new(zones, pipes, swing_zone)?.dc_power_flow(injections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ewsim_opt::{solve_lp, LinearProgram, Sense};
    use proptest::prelude::*;

    fn pipe(id: &str, a: &str, b: &str, x: f64) -> Pipe {
        Pipe {
            id: id.into(),
            from_zone: a.into(),
            to_zone: b.into(),
            limit: 100.0,
            reactance: x,
        }
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_path_carries_everything() {
        let f = dc_power_flow(&ids(&["A", "B"]), &[100.0, -100.0], &[pipe("AB", "A", "B", 0.1)], "B")
            .unwrap();
        assert!((f[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn zero_injections_zero_flows() {
        let pipes = [pipe("AB", "A", "B", 0.1), pipe("BC", "B", "C", 0.2)];
        let f = dc_power_flow(&ids(&["A", "B", "C"]), &[0.0; 3], &pipes, "A").unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn triangle_splits_two_to_one() {
        let pipes = [
            pipe("AB", "A", "B", 0.1),
            pipe("AC", "A", "C", 0.1),
            pipe("CB", "C", "B", 0.1),
        ];
        let f = dc_power_flow(&ids(&["A", "B", "C"]), &[90.0, -90.0, 0.0], &pipes, "C").unwrap();
        assert!((f[0] - 60.0).abs() < 1e-9);
        assert!((f[1] - 30.0).abs() < 1e-9);
        assert!((f[2] - 30.0).abs() < 1e-9);
    }

    #[test]
    fn disconnected_network_fails() {
        let err = Network::new(&ids(&["A", "B", "C"]), &[pipe("AB", "A", "B", 0.1)], "A").unwrap_err();
        assert_eq!(err, NetworkError::Disconnected("C".into()));
    }

    #[test]
    fn swing_absorbs_imbalance() {
        let pipes = [pipe("AB", "A", "B", 0.1), pipe("BC", "B", "C", 0.1)];
        let net = Network::new(&ids(&["A", "B", "C"]), &pipes, "B").unwrap();
        // A and C inject; B (swing) takes it all.
        let inj = [30.0, -70.0, 40.0];
        let f = net.dc_power_flow(&inj).unwrap();
        assert!((f[0] - 30.0).abs() < 1e-9);
        assert!((f[1] + 40.0).abs() < 1e-9);
        assert!(net.kcl_residual(&inj, &f) < 1e-9);
    }

    fn mesh() -> (Vec<String>, Vec<Pipe>) {
        (
            ids(&["A", "B", "C", "D"]),
            vec![
                pipe("AB", "A", "B", 0.1),
                pipe("BC", "B", "C", 0.2),
                pipe("CD", "C", "D", 0.05),
                pipe("DA", "D", "A", 0.3),
                pipe("AC", "A", "C", 0.15),
            ],
        )
    }

    proptest! {
        #[test]
        fn kcl_and_kvl_hold(inj in prop::collection::vec(-200.0f64..200.0, 3)) {
            let (zones, pipes) = mesh();
            let net = Network::new(&zones, &pipes, "C").unwrap();
            let mut p = inj.clone();
            p.insert(2, -inj.iter().sum::<f64>());
            let f = net.dc_power_flow(&p).unwrap();
            prop_assert!(net.kcl_residual(&p, &f) <= 1e-9);
            for cyc in net.cycles() {
                let s: f64 = cyc.iter().map(|&(l, d)| d * net.reactance(l) * f[l]).sum();
                prop_assert!(s.abs() <= 1e-9);
            }
        }

        #[test]
        fn flow_space_rows_reproduce_dc_flow(inj in prop::collection::vec(-200.0f64..200.0, 3)) {
            let (zones, pipes) = mesh();
            let net = Network::new(&zones, &pipes, "C").unwrap();
            let mut p = inj.clone();
            p.insert(2, -inj.iter().sum::<f64>());
            let expected = net.dc_power_flow(&p).unwrap();
            let mut lp = LinearProgram::new("flows");
            let vars: Vec<_> = (0..net.num_pipes())
                .map(|l| lp.add_var(format!("f{l}"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
                .collect();
            for z in 0..net.num_zones() {
                let mut terms = Vec::new();
                for (l, &v) in vars.iter().enumerate() {
                    let (a, b) = net.endpoints(l);
                    if a == z { terms.push((v, -1.0)); }
                    if b == z { terms.push((v, 1.0)); }
                }
                lp.add_constraint(format!("kcl{z}"), terms, Sense::Eq, -p[z]);
            }
            for (k, cyc) in net.cycles().iter().enumerate() {
                let terms = cyc.iter().map(|&(l, d)| (vars[l], d * net.reactance(l))).collect();
                lp.add_constraint(format!("kvl{k}"), terms, Sense::Eq, 0.0);
            }
            let r = solve_lp(&lp);
            prop_assert!(r.is_optimal());
            for (a, b) in r.values.iter().zip(&expected) {
                prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
            }
        }
    }
}
