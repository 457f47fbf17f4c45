//! Log-barrier interior-point method for the rate programs that arise once
//! the subcarrier assignment is fixed.
//!
//! Variables are transmit powers and auxiliary rate variables. Every rate
//! expression is a sum of `log2(1 + sum_i g_i p_i)` terms, so the feasible
//! set `{rate vars <= log-sums, powers >= 0, budgets}` is convex and the
//! linear-plus-concave objective can be maximized by damped Newton steps on
//! the barrier function for an increasing sequence of barrier weights.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::types::{Node, SIGMA};

/// `log2(1 + sum_i gain_i * p[var_i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogTerm {
    pub vars: Vec<(usize, f64)>,
}

impl LogTerm {
    pub fn single(var: usize, gain: f64) -> Self {
        Self { vars: vec![(var, gain)] }
    }

    fn snr(&self, p: &[f64]) -> f64 {
        self.vars.iter().map(|&(i, g)| g * p[i]).sum()
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        self.snr(p).ln_1p() / SIGMA
    }
}

/// `sum(logs) - sum(rate vars) >= 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateConstraint {
    pub logs: Vec<LogTerm>,
    pub rates: Vec<usize>,
}

/// Concave rate program over powers and rate variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateProgram {
    /// Node paying for each power variable.
    pub power_owner: Vec<Node>,
    pub n_rates: usize,
    pub budgets: [f64; 3],
    /// Weighted log terms in the objective.
    pub objective_logs: Vec<(f64, LogTerm)>,
    /// Weighted rate variables in the objective.
    pub objective_rates: Vec<(usize, f64)>,
    pub constraints: Vec<RateConstraint>,
}

/// Optimal powers and rate variables of a [`RateProgram`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramSolution {
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
    pub objective: f64,
    /// Upper bound on the suboptimality of `objective`.
    pub barrier_gap: f64,
}

const GAP_TOL: f64 = 1e-10;
const NEWTON_TOL: f64 = 1e-12;
const MAX_NEWTON: usize = 200;

impl RateProgram {
    pub fn add_power(&mut self, owner: Node) -> usize {
        self.power_owner.push(owner);
        self.power_owner.len() - 1
    }

    pub fn add_rate(&mut self) -> usize {
        self.n_rates += 1;
        self.n_rates - 1
    }

    fn n_power(&self) -> usize {
        self.power_owner.len()
    }

    fn dim(&self) -> usize {
        self.n_power() + self.n_rates
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let np = self.n_power();
        let logs: f64 = self.objective_logs.iter().map(|(c, t)| c * t.value(z)).sum();
        let rates: f64 = self.objective_rates.iter().map(|&(r, c)| c * z[np + r]).sum();
        logs + rates
    }

    fn constraint_slack(&self, c: &RateConstraint, z: &[f64]) -> f64 {
        let np = self.n_power();
        c.logs.iter().map(|t| t.value(z)).sum::<f64>() - c.rates.iter().map(|&r| z[np + r]).sum::<f64>()
    }

    fn budget_slack(&self, z: &[f64]) -> [f64; 3] {
        let mut s = self.budgets;
        for (i, owner) in self.power_owner.iter().enumerate() {
            s[owner.index()] -= z[i];
        }
        s
    }

    fn strictly_feasible(&self, z: &[f64]) -> bool {
        let np = self.n_power();
        z[..np].iter().all(|&p| p > 0.0)
            && self.budget_slack(z).iter().zip(self.used_nodes()).all(|(&s, used)| !used || s > 0.0)
            && self.constraints.iter().all(|c| self.constraint_slack(c, z) > 0.0)
    }

    fn used_nodes(&self) -> [bool; 3] {
        let mut u = [false; 3];
        for o in &self.power_owner {
            u[o.index()] = true;
        }
        u
    }

    /// Number of barrier terms, which bounds the duality gap by `m / tau`.
    fn n_barrier_terms(&self) -> usize {
        self.n_power() + self.used_nodes().iter().filter(|&&u| u).count() + self.constraints.len()
    }

    /// Barrier function `-tau * objective - sum log(slacks)` (to minimize).
    fn barrier(&self, z: &[f64], tau: f64) -> f64 {
        let np = self.n_power();
        let mut f = -tau * self.objective(z);
        f -= z[..np].iter().map(|p| p.ln()).sum::<f64>();
        for (s, used) in self.budget_slack(z).iter().zip(self.used_nodes()) {
            if used {
                f -= s.ln();
            }
        }
        for c in &self.constraints {
            f -= self.constraint_slack(c, z).ln();
        }
        f
    }

    fn grad_hess(&self, z: &[f64], tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let np = self.n_power();
        let m = self.dim();
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        // Gradient of a log term is g_i / (ln2 (1 + a)); its Hessian is
        // -g g' / (ln2 (1 + a)^2).
        let add_log = |g: &mut DVector<f64>, h: &mut DMatrix<f64>, t: &LogTerm, wg: f64, wh: f64| {
            let d = 1.0 + t.snr(z);
            for &(i, gi) in &t.vars {
                g[i] += wg * gi / (SIGMA * d);
                for &(j, gj) in &t.vars {
                    h[(i, j)] += wh * gi * gj / (SIGMA * d * d);
                }
            }
        };
        for (c, t) in &self.objective_logs {
            add_log(&mut g, &mut h, t, -tau * c, tau * c);
        }
        for &(r, c) in &self.objective_rates {
            g[np + r] -= tau * c;
        }
        for c in &self.constraints {
            let s = self.constraint_slack(c, z);
            let mut ds = DVector::zeros(m);
            for t in &c.logs {
                let d = 1.0 + t.snr(z);
                for &(i, gi) in &t.vars {
                    ds[i] += gi / (SIGMA * d);
                }
                // -(Hessian of s) / s
                add_log(&mut DVector::zeros(m), &mut h, t, 0.0, 1.0 / s);
            }
            for &r in &c.rates {
                ds[np + r] -= 1.0;
            }
            g -= &ds / s;
            h += &ds * ds.transpose() / (s * s);
        }
        for i in 0..np {
            g[i] -= 1.0 / z[i];
            h[(i, i)] += 1.0 / (z[i] * z[i]);
        }
        let slack = self.budget_slack(z);
        for (i, oi) in self.power_owner.iter().enumerate() {
            let s = slack[oi.index()];
            g[i] += 1.0 / s;
            for (j, oj) in self.power_owner.iter().enumerate() {
                if oi == oj {
                    h[(i, j)] += 1.0 / (s * s);
                }
            }
        }
        (g, h)
    }

    /// Strictly feasible starting point: every node splits half its budget
    /// evenly, and each rate variable sits one bit below its tightest cap.
    fn start(&self) -> Vec<f64> {
        let np = self.n_power();
        let mut counts = [0usize; 3];
        for o in &self.power_owner {
            counts[o.index()] += 1;
        }
        let mut z = vec![0.0; self.dim()];
        for (i, o) in self.power_owner.iter().enumerate() {
            z[i] = 0.5 * self.budgets[o.index()] / counts[o.index()] as f64;
        }
        let mut cap = vec![f64::INFINITY; self.n_rates];
        for c in &self.constraints {
            let logs: f64 = c.logs.iter().map(|t| t.value(&z)).sum();
            for &r in &c.rates {
                cap[r] = cap[r].min(logs / c.rates.len() as f64);
            }
        }
        for r in 0..self.n_rates {
            z[np + r] = if cap[r].is_finite() { 0.5 * cap[r] - 1.0 } else { 0.0 };
        }
        z
    }

    pub fn solve(&self) -> Result<ProgramSolution> {
        let np = self.n_power();
        let mut z = self.start();
        if self.dim() == 0 {
            return Ok(ProgramSolution {
                powers: vec![],
                rates: vec![],
                objective: 0.0,
                barrier_gap: 0.0,
            });
        }
        if !self.strictly_feasible(&z) {
            return Err(Error::BarrierFailure("starting point is not strictly feasible".into()));
        }
        let m = self.n_barrier_terms() as f64;
        let mut tau = 1.0;
        loop {
            self.centering(&mut z, tau)?;
            let gap = m / tau;
            let scale = 1.0 + self.objective(&z).abs();
            if gap < GAP_TOL * scale {
                return Ok(ProgramSolution {
                    powers: z[..np].to_vec(),
                    rates: z[np..].to_vec(),
                    objective: self.objective(&z),
                    barrier_gap: gap,
                });
            }
            tau *= 20.0;
        }
    }

    fn centering(&self, z: &mut Vec<f64>, tau: f64) -> Result<()> {
        for _ in 0..MAX_NEWTON {
            let (g, h) = self.grad_hess(z, tau);
            let d = newton_direction(&g, h)?;
            let decrement = -g.dot(&d);
            if decrement < NEWTON_TOL {
                return Ok(());
            }
            let f0 = self.barrier(z, tau);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let cand: Vec<f64> = z.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
                if self.strictly_feasible(&cand) {
                    let f = self.barrier(&cand, tau);
                    // Inside the quadratic-convergence region the barrier is
                    // flat to rounding; trust the full step there.
                    if f <= f0 - 0.25 * t * decrement || (t == 1.0 && decrement < 1e-6) {
                        *z = cand;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                // No representable progress left at this barrier weight.
                return Ok(());
            }
        }
        Ok(())
    }
}

/// Solves `H d = -g` with symmetric diagonal scaling; barrier Hessians mix
/// curvatures many orders of magnitude apart near the boundary.
fn newton_direction(g: &DVector<f64>, mut h: DMatrix<f64>) -> Result<DVector<f64>> {
    let m = g.len();
    let scale: Vec<f64> = (0..m).map(|i| 1.0 / h[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
    for i in 0..m {
        for j in 0..m {
            h[(i, j)] *= scale[i] * scale[j];
        }
    }
    let gs = DVector::from_fn(m, |i, _| g[i] * scale[i]);
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut hs = h.clone();
        for i in 0..m {
            hs[(i, i)] += shift;
        }
        if let Some(chol) = hs.cholesky() {
            let y = -chol.solve(&gs);
            return Ok(DVector::from_fn(m, |i, _| y[i] * scale[i]));
        }
        shift = if shift == 0.0 { 1e-12 } else { shift * 100.0 };
    }
    Err(Error::BarrierFailure("Hessian not positive definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_waterfill_on_two_subcarriers() {
        // Maximize log2(1 + p1) + log2(1 + 3 p2) with p1 + p2 <= 2.
        let mut prog = RateProgram { budgets: [2.0, 1.0, 1.0], ..Default::default() };
        let p1 = prog.add_power(Node::A);
        let p2 = prog.add_power(Node::A);
        prog.objective_logs.push((1.0, LogTerm::single(p1, 1.0)));
        prog.objective_logs.push((1.0, LogTerm::single(p2, 3.0)));
        let sol = prog.solve().unwrap();
        // Water level L: p1 = L - 1, p2 = L - 1/3, sum 2 => L = 5/3.
        assert!((sol.powers[0] - 2.0 / 3.0).abs() < 1e-7, "{:?}", sol.powers);
        assert!((sol.powers[1] - 4.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn min_of_two_hops() {
        // max t s.t. t <= log2(1 + p), t <= log2(1 + 2 q), p <= 1, q <= 1.
        let mut prog = RateProgram { budgets: [1.0, 1.0, 1.0], ..Default::default() };
        let p = prog.add_power(Node::A);
        let q = prog.add_power(Node::R);
        let t = prog.add_rate();
        prog.objective_rates.push((t, 1.0));
        prog.constraints.push(RateConstraint { logs: vec![LogTerm::single(p, 1.0)], rates: vec![t] });
        prog.constraints.push(RateConstraint { logs: vec![LogTerm::single(q, 2.0)], rates: vec![t] });
        let sol = prog.solve().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-8, "{}", sol.objective);
    }
}
