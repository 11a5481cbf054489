//! Radial distribution power flow by backward/forward sweep.
//!
//! Single-phase equivalent, per-unit on `v_base` (V) and `s_base` (kVA).
//! Nodes are numbered `1..=n` with node 1 the slack bus.

use num_complex::Complex;
use thiserror::Error;

use crate::num::Scalar;

pub const MAX_SWEEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch<T> {
    pub from: usize,
    pub to: usize,
    /// Series resistance (Ω).
    pub r_ohm: T,
    /// Series reactance (Ω).
    pub x_ohm: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeederModel<T> {
    pub nodes: usize,
    pub branches: Vec<Branch<T>>,
    pub v_base: T,
    pub s_base: T,
    /// Slack voltage magnitude (p.u.).
    pub slack_voltage: T,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("invalid feeder: {0}")]
    Topology(String),
    #[error("expected {expected} nodal injections, got {got}")]
    Injection { expected: usize, got: usize },
    #[error("non-finite injection at node {node}")]
    NonFinite { node: usize },
    #[error("sweep diverged after {iterations} iterations (max mismatch {mismatch:e} p.u.)")]
    Diverged { iterations: usize, mismatch: f64 },
}

/// Per-node complex power, consumption positive (kW, kVAr). Entry `k`
/// belongs to node `k + 1`; the slack entry is ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalInjection<T> {
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Scalar> NodalInjection<T> {
    pub fn zeros(nodes: usize) -> Self {
        Self {
            p: vec![T::zero(); nodes],
            q: vec![T::zero(); nodes],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoltageSolution<T> {
    /// Magnitude (p.u.) per node.
    pub magnitude: Vec<T>,
    /// Angle (rad) per node.
    pub angle: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest nodal power mismatch (p.u.) at the returned voltages.
    pub mismatch: T,
}

impl<T: Scalar> VoltageSolution<T> {
    /// Magnitude at node `id` (1-based).
    pub fn at(&self, id: usize) -> T {
        self.magnitude[id - 1]
    }
}

/// Rooted view of a feeder: nodes in breadth-first order from the slack
/// with the parent and per-unit impedance of each node's upstream branch.
#[derive(Clone, Debug)]
pub struct RadialTopology<T> {
    order: Vec<usize>,
    parent: Vec<usize>,
    z_pu: Vec<Complex<T>>,
}

impl<T: Scalar> FeederModel<T> {
    /// Base impedance in ohms.
    pub fn z_base(&self) -> T {
        self.v_base * self.v_base / (self.s_base * T::lit(1000.0))
    }

    pub fn validate(&self) -> Result<(), PowerFlowError> {
        self.topology().map(|_| ())
    }

    /// Check the tree invariants and root the feeder at node 1.
    pub fn topology(&self) -> Result<RadialTopology<T>, PowerFlowError> {
        let bad = |m: String| Err(PowerFlowError::Topology(m));
        let n = self.nodes;
        if n == 0 {
            return bad("feeder has no nodes".into());
        }
        if !(self.v_base > T::zero() && self.s_base > T::zero() && self.v_base.is_finite() && self.s_base.is_finite()) {
            return bad("bases must be positive and finite".into());
        }
        if !(self.slack_voltage > T::zero() && self.slack_voltage.is_finite()) {
            return bad("slack voltage must be positive".into());
        }
        if self.branches.len() != n - 1 {
            return bad(format!("{} nodes need {} branches, got {}", n, n - 1, self.branches.len()));
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (k, b) in self.branches.iter().enumerate() {
            if b.from == 0 || b.to == 0 || b.from > n || b.to > n || b.from == b.to {
                return bad(format!("branch {} connects invalid nodes {}-{}", k, b.from, b.to));
            }
            if !(b.r_ohm > T::zero() && b.x_ohm > T::zero() && b.r_ohm.is_finite() && b.x_ohm.is_finite()) {
                return bad(format!("branch {}-{} needs R, X > 0", b.from, b.to));
            }
            adj[b.from - 1].push((b.to - 1, k));
            adj[b.to - 1].push((b.from - 1, k));
        }
        let zb = self.z_base();
        let mut parent = vec![usize::MAX; n];
        let mut z_pu = vec![Complex::new(T::zero(), T::zero()); n];
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        seen[0] = true;
        order.push(0);
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(v, k) in &adj[u] {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                parent[v] = u;
                let b = &self.branches[k];
                z_pu[v] = Complex::new(b.r_ohm / zb, b.x_ohm / zb);
                order.push(v);
            }
        }
        if order.len() != n {
            return bad("feeder is not connected".into());
        }
        Ok(RadialTopology { order, parent, z_pu })
    }
}

impl FeederModel<f64> {
    /// Four-node radial house feeder with the default rule bases.
    pub fn default_feeder() -> Self {
        let line = |from, to, r_ohm, x_ohm| Branch { from, to, r_ohm, x_ohm };
        Self {
            nodes: 4,
            branches: vec![
                line(1, 2, 0.0922, 0.0470),
                line(2, 3, 0.1844, 0.0940),
                line(3, 4, 0.3660, 0.1864),
            ],
            v_base: 400.0,
            s_base: 10.0,
            slack_voltage: 1.0,
        }
    }
}

/// Solve the feeder for the given loads from a flat start.
pub fn backward_forward_sweep<T: Scalar>(
    feeder: &FeederModel<T>,
    inj: &NodalInjection<T>,
) -> Result<VoltageSolution<T>, PowerFlowError> {
    let topo = feeder.topology()?;
    sweep_with_topology(feeder, &topo, inj)
}

/// [`backward_forward_sweep`] with a precomputed topology, for repeated
/// solves on one feeder.
pub fn sweep_with_topology<T: Scalar>(
    feeder: &FeederModel<T>,
    topo: &RadialTopology<T>,
    inj: &NodalInjection<T>,
) -> Result<VoltageSolution<T>, PowerFlowError> {
    let n = feeder.nodes;
    if inj.p.len() != n || inj.q.len() != n {
        return Err(PowerFlowError::Injection {
            expected: n,
            got: inj.p.len().min(inj.q.len()),
        });
    }
    let zero = Complex::new(T::zero(), T::zero());
    let s: Vec<Complex<T>> = (0..n)
        .map(|k| {
            if k == 0 {
                return Ok(zero);
            }
            if !(inj.p[k].is_finite() && inj.q[k].is_finite()) {
                return Err(PowerFlowError::NonFinite { node: k + 1 });
            }
            Ok(Complex::new(inj.p[k], inj.q[k]) / feeder.s_base)
        })
        .collect::<Result<_, _>>()?;

    let v0 = Complex::new(feeder.slack_voltage, T::zero());
    let mut v = vec![v0; n];
    let mut current = vec![zero; n];
    let mismatch_tol = T::lit(T::PF_MISMATCH_TOL);
    let step_tol = T::lit(T::PF_STEP_TOL);
    let mut mismatch = T::infinity();
    let mut iterations = 0;
    while iterations < MAX_SWEEPS {
        iterations += 1;
        // backward: load currents accumulated towards the slack
        for k in 0..n {
            current[k] = (s[k] / v[k]).conj();
        }
        for &k in topo.order.iter().skip(1).rev() {
            let p = topo.parent[k];
            if p != 0 {
                let c = current[k];
                current[p] += c;
            }
        }
        // forward: voltage drops away from the slack
        let mut step = T::zero();
        mismatch = T::zero();
        for &k in topo.order.iter().skip(1) {
            let new = v[topo.parent[k]] - topo.z_pu[k] * current[k];
            step = step.max((new - v[k]).norm());
            // power the node would draw at the new voltage with the current
            // the branches now carry
            mismatch = mismatch.max(s[k].norm() * (new / v[k] - T::one()).norm());
            v[k] = new;
        }
        if !step.is_finite() || !mismatch.is_finite() {
            break;
        }
        if mismatch < mismatch_tol || step < step_tol {
            break;
        }
    }
    let converged = mismatch < mismatch_tol;
    if !converged {
        return Err(PowerFlowError::Diverged {
            iterations,
            mismatch: mismatch.as_f64(),
        });
    }
    Ok(VoltageSolution {
        magnitude: v.iter().map(|c| c.norm()).collect(),
        angle: v.iter().map(|c| c.arg()).collect(),
        iterations,
        converged,
        mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_bus(r: f64, x: f64, v_base: f64) -> FeederModel<f64> {
        FeederModel {
            nodes: 2,
            branches: vec![Branch { from: 1, to: 2, r_ohm: r, x_ohm: x }],
            v_base,
            s_base: 10.0,
            slack_voltage: 1.0,
        }
    }

    #[test]
    fn zero_injection_is_flat() {
        let f = FeederModel::default_feeder();
        let sol = backward_forward_sweep(&f, &NodalInjection::zeros(4)).unwrap();
        assert!(sol.magnitude.iter().all(|&m| m == 1.0));
        assert!(sol.converged);
    }

    #[test]
    fn two_bus_matches_quadratic() {
        let f = two_bus(0.1, 0.05, 400.0);
        let inj = NodalInjection { p: vec![0.0, 1.0], q: vec![0.0, 0.0] };
        let sol = backward_forward_sweep(&f, &inj).unwrap();
        // |V2|^4 - (|V1|^2 - 2(RP + XQ))|V2|^2 + |Z|^2|S|^2 = 0
        let zb = 400.0 * 400.0 / 10_000.0;
        let (r, x, p, q): (f64, f64, f64, f64) = (0.1 / zb, 0.05 / zb, 0.1, 0.0);
        let a = 1.0 - 2.0 * (r * p + x * q);
        let disc = a * a - 4.0 * (r * r + x * x) * (p * p + q * q);
        let v2 = ((a + disc.sqrt()) / 2.0).sqrt();
        assert!((sol.at(2) - v2).abs() < 1e-6, "{} vs {}", sol.at(2), v2);
    }

    #[test]
    fn generation_raises_terminal_voltage() {
        let f = FeederModel::default_feeder();
        let inj = NodalInjection { p: vec![0.0, 0.0, 0.0, -2.0], q: vec![0.0; 4] };
        let sol = backward_forward_sweep(&f, &inj).unwrap();
        assert!(sol.at(4) > f.slack_voltage);
        assert!(sol.at(4) > sol.at(3) && sol.at(3) > sol.at(2));
    }

    #[test]
    fn bad_topologies() {
        let mut f = FeederModel::default_feeder();
        f.branches[2].from = 2;
        f.branches[2].to = 3; // duplicate 2-3, node 4 orphaned
        assert!(matches!(f.validate(), Err(PowerFlowError::Topology(_))));
        let mut f = FeederModel::default_feeder();
        f.branches[0].r_ohm = 0.0;
        assert!(f.validate().is_err());
        let mut f = FeederModel::default_feeder();
        f.branches.pop();
        assert!(f.validate().is_err());
    }

    #[test]
    fn huge_load_diverges_explicitly() {
        let f = FeederModel::default_feeder();
        let inj = NodalInjection { p: vec![0.0, 0.0, 0.0, 1.0e4], q: vec![0.0; 4] };
        assert!(matches!(
            backward_forward_sweep(&f, &inj),
            Err(PowerFlowError::Diverged { .. })
        ));
    }

    #[test]
    fn reversed_branch_orientation_is_equivalent() {
        let f = FeederModel::default_feeder();
        let mut g = f.clone();
        for b in &mut g.branches {
            std::mem::swap(&mut b.from, &mut b.to);
        }
        let inj = NodalInjection { p: vec![0.0, 1.0, -2.0, 0.5], q: vec![0.0, 0.2, -0.1, 0.3] };
        let a = backward_forward_sweep(&f, &inj).unwrap();
        let b = backward_forward_sweep(&g, &inj).unwrap();
        assert_eq!(a.magnitude, b.magnitude);
    }

    #[test]
    fn f32_solves() {
        let f = FeederModel::<f32> {
            nodes: 2,
            branches: vec![Branch { from: 1, to: 2, r_ohm: 0.1, x_ohm: 0.05 }],
            v_base: 400.0,
            s_base: 10.0,
            slack_voltage: 1.0,
        };
        let inj = NodalInjection { p: vec![0.0, 1.0], q: vec![0.0, 0.0] };
        let sol = backward_forward_sweep(&f, &inj).unwrap();
        assert!(sol.at(2) < 1.0 && sol.at(2) > 0.99);
    }

    proptest! {
        #[test]
        fn branch_order_does_not_matter(perm in Just(()).prop_perturb(|_, mut rng| {
            let mut idx = vec![0usize, 1, 2];
            for i in (1..3).rev() { idx.swap(i, (rng.next_u32() as usize) % (i + 1)); }
            idx
        }), p in prop::collection::vec(-3.0f64..3.0, 3), q in prop::collection::vec(-1.0f64..1.0, 3)) {
            let f = FeederModel::default_feeder();
            let mut g = f.clone();
            g.branches = perm.iter().map(|&k| f.branches[k]).collect();
            let inj = NodalInjection { p: vec![0.0, p[0], p[1], p[2]], q: vec![0.0, q[0], q[1], q[2]] };
            let a = backward_forward_sweep(&f, &inj).unwrap();
            let b = backward_forward_sweep(&g, &inj).unwrap();
            for k in 0..4 {
                prop_assert!((a.magnitude[k] - b.magnitude[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn uniform_load_profile_is_monotone(load in 0.0f64..5.0, v_base in 200.0f64..450.0) {
            let mut f = FeederModel::default_feeder();
            f.v_base = v_base;
            let inj = NodalInjection { p: vec![0.0, load, load, load], q: vec![0.0, load / 3.0, load / 3.0, load / 3.0] };
            let sol = backward_forward_sweep(&f, &inj).unwrap();
            for k in 1..4 {
                prop_assert!(sol.magnitude[k] <= sol.magnitude[k - 1] + 1e-15);
            }
        }
    }
}
