//! Dual-decomposition solver: ellipsoid search over the Lagrange
//! multipliers, per-subcarrier profit maximization, primal recovery and
//! outage declaration.

pub mod ellipsoid;
pub mod inner;
pub mod rates;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    dual_index as di, Allocation, DualPoint, Link, ModeRates, Node, ProblemInstance, Role,
    RoleMask, SolveOutcome, StopReason, SubcarrierDecision, User, SIGMA,
};

pub use ellipsoid::{ellipsoid_step, volume_ratio, CutKind, EllipsoidState};
pub use inner::{
    assign_subcarrier, bc_power, compute_profits, inner_solution, solve_mac, solve_mac_powers,
    waterfill, waterfill_direct, waterfill_oneway_hop1, waterfill_oneway_hop2, InnerPowers,
    MacInputs, ProfitVector, DEFAULT_MAC_TOL,
};
pub use rates::{coupling_violation, evaluate_rates, rates_from_caps, SessionCaps, TwoWayRegion};

/// Tunables of [`solve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop once `sqrt(g' P g)` drops below this.
    pub stop_tol: f64,
    pub iter_cap: usize,
    /// Lower bound imposed on every power price.
    pub alpha_min: f64,
    /// A QoS multiplier above this ends the search as an outage.
    pub mu_ceiling: f64,
    pub mac_newton_tol: f64,
    /// Re-derive every inner power at the final dual point by brute-force
    /// search and report the largest deviation.
    pub oracle_check: bool,
    /// Roles the scheme may assign.
    #[serde(skip)]
    pub roles: RoleMask,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            stop_tol: 1e-4,
            iter_cap: 5000,
            alpha_min: 1e-8,
            mu_ceiling: 1e4,
            mac_newton_tol: DEFAULT_MAC_TOL,
            oracle_check: false,
            roles: RoleMask::ALL,
        }
    }
}

impl SolverOptions {
    pub fn with_roles(mut self, roles: RoleMask) -> Self {
        self.roles = roles;
        self
    }
}

/// Dual coordinates that matter for a role mask, in [`di`] order.
pub fn active_coordinates(mask: RoleMask) -> Vec<usize> {
    let one_way = [Role::OneWayHop1A, Role::OneWayHop1B, Role::OneWayHop2A, Role::OneWayHop2B]
        .iter()
        .any(|&r| mask.allows(r));
    let two_way = mask.allows(Role::TwoWayMac) || mask.allows(Role::TwoWayBc);
    let relay = [Role::OneWayHop2A, Role::OneWayHop2B, Role::TwoWayBc]
        .iter()
        .any(|&r| mask.allows(r));
    let mut out = Vec::with_capacity(di::DIM);
    if one_way {
        out.extend([di::LAM_B1_A, di::LAM_B1_B]);
    }
    if two_way {
        out.extend([di::LAM_C1_A, di::LAM_C1_B, di::LAM_AB]);
    }
    out.extend([di::MU_A, di::MU_B, di::ALPHA_A, di::ALPHA_B]);
    if relay {
        out.push(di::ALPHA_R);
    }
    out
}

/// Subgradient of the dual function at the point whose inner maximizer
/// produced `caps` and `power_used`, in [`di`] order.
pub fn subgradient(
    inst: &ProblemInstance,
    caps: &SessionCaps,
    power_used: [f64; 3],
) -> [f64; di::DIM] {
    let mut d = [0.0; di::DIM];
    for k in User::BOTH {
        let i = k.index();
        d[di::LAM_B1_A + i] = caps.ow_hop1[i] - caps.ow_hop2[i];
        d[di::LAM_C1_A + i] = caps.tw_mac[i] - caps.tw_bc[i];
        d[di::MU_A + i] = caps.direct[i] + caps.ow_hop2[i] + caps.tw_bc[i] - inst.qos_floor(k);
    }
    d[di::LAM_AB] = caps.tw_mac_sum - caps.tw_bc[0] - caps.tw_bc[1];
    for node in Node::ALL {
        d[di::ALPHA_A + node.index()] = inst.budget(node) - power_used[node.index()];
    }
    d
}

/// Inner maximizer of the Lagrangian at one dual point.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianMax {
    /// Dual function value.
    pub value: f64,
    pub decisions: Vec<SubcarrierDecision>,
    pub caps: SessionCaps,
    pub power_used: [f64; 3],
}

impl LagrangianMax {
    pub fn subgradient(&self, inst: &ProblemInstance) -> [f64; di::DIM] {
        subgradient(inst, &self.caps, self.power_used)
    }
}

/// Dual function `sum_n max(0, best profit) + sum_j alpha_j P_j - sum_k mu_k r_k`
/// with the per-subcarrier argmax decisions.
pub fn maximize_lagrangian(
    dual: &DualPoint,
    inst: &ProblemInstance,
    mask: RoleMask,
    mac_tol: f64,
) -> Result<LagrangianMax> {
    let n = inst.n_subcarriers();
    let mut decisions = Vec::with_capacity(n);
    let mut value = 0.0;
    for i in 0..n {
        let (v, d) = inner::best_decision(i, dual, inst, mask, mac_tol)?;
        value += v;
        decisions.push(d);
    }
    for node in Node::ALL {
        value += dual.alpha(node) * inst.budget(node);
    }
    for k in User::BOTH {
        value -= dual.mu(k) * inst.qos_floor(k);
    }
    let caps = SessionCaps::of_decisions(&decisions, inst);
    let mut power_used = [0.0; 3];
    for d in &decisions {
        let p = d.node_powers();
        for j in 0..3 {
            power_used[j] += p[j];
        }
    }
    Ok(LagrangianMax { value, decisions, caps, power_used })
}

/// Dual function value alone.
pub fn dual_function(
    dual: &DualPoint,
    inst: &ProblemInstance,
    mask: RoleMask,
    mac_tol: f64,
) -> Result<f64> {
    Ok(maximize_lagrangian(dual, inst, mask, mac_tol)?.value)
}

/// Starting center of the ellipsoid search (full ten-entry layout; inactive
/// coordinates are zero).
pub fn initial_dual(inst: &ProblemInstance, mask: RoleMask, alpha_min: f64) -> [f64; di::DIM] {
    let w = inst.weights();
    let active = active_coordinates(mask);
    let mut c = [0.0; di::DIM];
    c[di::LAM_B1_A] = w[0] / 2.0;
    c[di::LAM_B1_B] = w[1] / 2.0;
    c[di::LAM_C1_A] = w[0] / 3.0;
    c[di::LAM_C1_B] = w[1] / 3.0;
    c[di::LAM_AB] = w[0].min(w[1]) / 3.0;
    let n = inst.n_subcarriers() as f64;
    let ch = inst.channels();
    for node in Node::ALL {
        let links: Vec<Link> = Role::ACTIVE
            .iter()
            .filter(|&&r| mask.allows(r))
            .flat_map(|&r| role_links(r))
            .filter(|l| l.from_node() == node)
            .collect();
        let gain = links.iter().map(|&l| ch.mean_gain(l)).fold(0.0, f64::max);
        let level = match node {
            Node::A => w[0],
            Node::B => w[1],
            Node::R => 0.5 * (w[0] + w[1]),
        };
        // Flat water-filling at the mean gain spends P exactly when
        // level / (ln2 alpha) = P/N + 1/g.
        let alpha = if gain > 0.0 {
            level / (SIGMA * (inst.budget(node) / n + 1.0 / gain))
        } else {
            0.0
        };
        c[di::ALPHA_A + node.index()] = alpha.max(alpha_min);
    }
    for (i, v) in c.iter_mut().enumerate() {
        if !active.contains(&i) {
            *v = 0.0;
        }
    }
    c
}

fn role_links(role: Role) -> Vec<Link> {
    match role {
        Role::DirectA => vec![Link::AB],
        Role::DirectB => vec![Link::BA],
        Role::OneWayHop1A => vec![Link::AR],
        Role::OneWayHop1B => vec![Link::BR],
        Role::OneWayHop2A => vec![Link::RB],
        Role::OneWayHop2B => vec![Link::RA],
        Role::TwoWayMac => vec![Link::AR, Link::BR],
        Role::TwoWayBc => vec![Link::RA, Link::RB],
        Role::Idle => vec![],
    }
}

/// Initial ellipsoid radius for a starting center.
pub fn initial_radius(inst: &ProblemInstance, center: &[f64; di::DIM]) -> f64 {
    let w = inst.weights();
    let alpha_max = center[di::ALPHA_A..].iter().copied().fold(0.0, f64::max);
    10.0 * 1f64.max(w[0]).max(w[1]).max(alpha_max)
}

/// Gradient of the first violated dual-feasibility constraint, in [`di`]
/// order, or `None` when the point is feasible.
fn violated_constraint(
    x: &[f64; di::DIM],
    weights: [f64; 2],
    active: &[usize],
    alpha_min: f64,
) -> Option<[f64; di::DIM]> {
    let mut g = [0.0; di::DIM];
    for &i in active {
        let lb = if i >= di::ALPHA_A { alpha_min } else { 0.0 };
        if !(x[i] >= lb) {
            g[i] = -1.0;
            return Some(g);
        }
    }
    let has = |i: usize| active.contains(&i);
    for k in 0..2 {
        let level = weights[k] + x[di::MU_A + k];
        if has(di::LAM_B1_A + k) && x[di::LAM_B1_A + k] > level {
            g[di::LAM_B1_A + k] = 1.0;
            g[di::MU_A + k] = -1.0;
            return Some(g);
        }
        if has(di::LAM_C1_A + k) && x[di::LAM_C1_A + k] + x[di::LAM_AB] > level {
            g[di::LAM_C1_A + k] = 1.0;
            g[di::LAM_AB] = 1.0;
            g[di::MU_A + k] = -1.0;
            return Some(g);
        }
    }
    None
}

/// One recovered primal candidate.
#[derive(Clone, Debug)]
struct Candidate {
    alloc: Allocation,
    rates: ModeRates,
    objective: f64,
    shortfall: f64,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        let (a, b) = (self.shortfall <= 0.0, other.shortfall <= 0.0);
        match (a, b) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.objective > other.objective,
            (false, false) => {
                self.shortfall < other.shortfall
                    || self.shortfall == other.shortfall && self.objective > other.objective
            }
        }
    }
}

/// Scales each node's powers so that it spends exactly its budget (never
/// more), and marks zero-power subcarriers idle.
pub fn fill_budgets(decisions: &[SubcarrierDecision], inst: &ProblemInstance) -> Allocation {
    let mut out: Vec<SubcarrierDecision> = decisions.to_vec();
    for node in Node::ALL {
        let used: f64 = out.iter().map(|d| d.node_powers()[node.index()]).sum();
        if !(used > 0.0) {
            continue;
        }
        let budget = inst.budget(node);
        let mut factor = budget / used;
        loop {
            let scaled: Vec<_> = out.iter().map(|d| d.scaled(node, factor)).collect();
            let total: f64 = scaled.iter().map(|d| d.node_powers()[node.index()]).sum();
            if total <= budget {
                out = scaled;
                break;
            }
            factor *= (budget / total) * (1.0 - 2.0 * f64::EPSILON);
        }
    }
    for d in out.iter_mut() {
        if !d.is_occupied() {
            *d = SubcarrierDecision::Idle;
        }
    }
    Allocation::new(out).expect("scaled powers stay finite and nonnegative")
}

fn make_candidate(
    decisions: &[SubcarrierDecision],
    inst: &ProblemInstance,
    split_weights: [f64; 2],
) -> Candidate {
    let alloc = fill_budgets(decisions, inst);
    let caps = SessionCaps::of(&alloc, inst);
    let qos = inst.qos();
    // A hair above the floor so that rounding in the final sum cannot
    // leave a satisfied user a few ulps short.
    let padded = [qos[0] * (1.0 + 1e-12), qos[1] * (1.0 + 1e-12)];
    let rates = rates_from_caps(&caps, padded, split_weights);
    let shortfall = User::BOTH
        .iter()
        .map(|&k| (inst.qos_floor(k) - rates.user_rate(k)).max(0.0))
        .sum();
    Candidate {
        objective: rates.weighted(inst.weights()),
        alloc,
        rates,
        shortfall,
    }
}

/// Per-iteration record of a traced solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub cut: CutKind,
    /// Dual function value at the center (feasible centers only).
    pub dual_value: Option<f64>,
    pub best_dual: f64,
    /// Objective of the best recovered primal candidate so far.
    pub best_primal: Option<f64>,
    /// Largest weak-duality slack violation seen: objective of the
    /// candidate recovered at this iterate minus this iterate's dual value.
    pub primal_minus_dual: Option<f64>,
    pub width: Option<f64>,
}

/// Runs the dual ellipsoid search and returns the recovered outcome.
pub fn solve(inst: &ProblemInstance, opts: &SolverOptions) -> Result<SolveOutcome> {
    Ok(run(inst, opts, false)?.0)
}

/// [`solve`] plus the per-iteration trace.
pub fn solve_traced(
    inst: &ProblemInstance,
    opts: &SolverOptions,
) -> Result<(SolveOutcome, Vec<TraceEntry>)> {
    run(inst, opts, true)
}

fn run(
    inst: &ProblemInstance,
    opts: &SolverOptions,
    trace: bool,
) -> Result<(SolveOutcome, Vec<TraceEntry>)> {
    let mask = opts.roles;
    let weights = inst.weights();
    let active = active_coordinates(mask);
    let start = initial_dual(inst, mask, opts.alpha_min);
    let radius = initial_radius(inst, &start);
    let center0: Vec<f64> = active.iter().map(|&i| start[i]).collect();
    let mut state = EllipsoidState::ball(&center0, radius);
    let qos_value: f64 = weights[0] * inst.qos()[0] + weights[1] * inst.qos()[1];

    let mut best_dual = f64::INFINITY;
    let mut best_point: Option<DualPoint> = None;
    let mut best: Option<Candidate> = None;
    let mut entries = Vec::new();
    let mut stop = StopReason::IterationCap;
    let mut iterations = 0;

    for it in 0..opts.iter_cap {
        iterations = it + 1;
        let mut full = [0.0; di::DIM];
        for (j, &i) in active.iter().enumerate() {
            full[i] = state.center[j];
        }
        if let Some(g) = violated_constraint(&full, weights, &active, opts.alpha_min) {
            let cut = DVector::from_iterator(active.len(), active.iter().map(|&i| g[i]));
            if trace {
                entries.push(TraceEntry {
                    iteration: it,
                    cut: CutKind::Constraint,
                    dual_value: None,
                    best_dual,
                    best_primal: best.as_ref().map(|c| c.objective),
                    primal_minus_dual: None,
                    width: None,
                });
            }
            match ellipsoid_step(&state, &cut, CutKind::Constraint) {
                Ok(s) => state = s,
                Err(Error::DegenerateCut(_)) => {
                    stop = StopReason::DegenerateCut;
                    break;
                }
                Err(e) => return Err(e),
            }
            continue;
        }
        let dual = DualPoint::new(full, weights)?;
        let lm = maximize_lagrangian(&dual, inst, mask, opts.mac_newton_tol)?;
        if lm.value < best_dual {
            best_dual = lm.value;
            best_point = Some(dual);
        }
        let split = [dual.level(User::A), dual.level(User::B)];
        let cand = make_candidate(&lm.decisions, inst, split);
        let slack = cand.objective - lm.value;
        if best.as_ref().map_or(true, |b| cand.better_than(b)) {
            best = Some(cand);
        }
        let delta = lm.subgradient(inst);
        let g = DVector::from_iterator(active.len(), active.iter().map(|&i| delta[i]));
        let width = state.cut_width(&g);
        if trace {
            entries.push(TraceEntry {
                iteration: it,
                cut: CutKind::Objective,
                dual_value: Some(lm.value),
                best_dual,
                best_primal: best.as_ref().map(|c| c.objective),
                primal_minus_dual: Some(slack),
                width: Some(width),
            });
        }
        if qos_value > 0.0 && best_dual < qos_value - 1e-9 * (1.0 + qos_value) {
            stop = StopReason::QosInfeasible;
            break;
        }
        if dual.mu(User::A).max(dual.mu(User::B)) > opts.mu_ceiling {
            stop = StopReason::MuCeiling;
            break;
        }
        if width < opts.stop_tol {
            stop = StopReason::Converged;
            break;
        }
        match ellipsoid_step(&state, &g, CutKind::Objective) {
            Ok(s) => state = s,
            Err(Error::DegenerateCut(_)) => {
                // A zero subgradient means the center minimizes the dual.
                stop = if g.iter().all(|&x| x == 0.0) {
                    StopReason::Converged
                } else {
                    StopReason::DegenerateCut
                };
                break;
            }
            Err(e) => return Err(e),
        }
    }

    let n = inst.n_subcarriers();
    let cand = best.unwrap_or_else(|| Candidate {
        alloc: Allocation::idle(n),
        rates: ModeRates::default(),
        objective: 0.0,
        shortfall: inst.qos()[0] + inst.qos()[1],
    });
    let outage = stop == StopReason::QosInfeasible
        || User::BOTH
            .iter()
            .any(|&k| cand.rates.user_rate(k) < inst.qos_floor(k));
    let oracle_max_deviation = match (&best_point, opts.oracle_check) {
        (Some(d), true) => Some(oracle_deviation(d, inst, mask, opts.mac_newton_tol)?),
        _ => None,
    };
    let (rate_a, rate_b, per_mode_rates, objective) = if outage {
        (0.0, 0.0, ModeRates::default(), 0.0)
    } else {
        (
            cand.rates.user_rate(User::A),
            cand.rates.user_rate(User::B),
            cand.rates,
            cand.objective,
        )
    };
    let outcome = SolveOutcome {
        rate_a,
        rate_b,
        per_mode_rates,
        objective,
        outage,
        iterations,
        converged: stop == StopReason::Converged,
        stop_reason: stop,
        dual_value: best_dual,
        gap_estimate: (!outage).then(|| best_dual - cand.objective),
        allocation: cand.alloc,
        recovered_rates: cand.rates,
        recovered_objective: cand.objective,
        dual_point: best_point,
        oracle_max_deviation,
    };
    Ok((outcome, entries))
}

/// Golden-section maximizer of a concave function on `[lo, hi]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let m = 0.5 * (a + b);
    // The interval may have shrunk away from a maximizer at the boundary.
    [lo, m, hi]
        .into_iter()
        .max_by(|x, y| f(*x).total_cmp(&f(*y)))
        .unwrap()
}

/// Largest gap between an inner power and its golden-section maximizer at
/// `dual`, over every subcarrier and allowed role.
fn oracle_deviation(
    dual: &DualPoint,
    inst: &ProblemInstance,
    mask: RoleMask,
    mac_tol: f64,
) -> Result<f64> {
    use crate::types::capacity;
    let ch = inst.channels();
    let mut worst: f64 = 0.0;
    for n in 0..inst.n_subcarriers() {
        let (_, pw) = inner_solution(n, dual, inst, mask, mac_tol)?;
        for k in User::BOTH {
            let i = k.index();
            let singles = [
                (Role::ACTIVE[i], dual.level(k), dual.alpha(k.node()), Link::direct(k), pw.direct[i]),
                (Role::ACTIVE[2 + i], dual.lam_b1(k), dual.alpha(k.node()), Link::uplink(k), pw.hop1[i]),
                (Role::ACTIVE[4 + i], dual.lam_b2(k), dual.alpha(Node::R), Link::downlink_for(k), pw.hop2[i]),
            ];
            for (role, level, price, link, p) in singles {
                if !mask.allows(role) {
                    continue;
                }
                let g = ch.gain(link, n);
                let hi = level / (SIGMA * price) + 1.0;
                let q = golden_max(|x| level * capacity(x * g) - price * x, 0.0, hi, 1e-10);
                worst = worst.max((q - p).abs());
            }
        }
        if mask.allows(Role::TwoWayBc) {
            let (xa, xb, ar) = (dual.xi(User::A), dual.xi(User::B), dual.alpha(Node::R));
            let (gra, grb) = (ch.gain(Link::RA, n), ch.gain(Link::RB, n));
            let f = |x: f64| xa * capacity(x * grb) + xb * capacity(x * gra) - ar * x;
            let q = golden_max(f, 0.0, (xa + xb) / (SIGMA * ar) + 1.0, 1e-10);
            worst = worst.max((q - pw.bc).abs());
        }
        if mask.allows(Role::TwoWayMac) {
            let inp = MacInputs {
                lam_c1: [dual.lam_c1(User::A), dual.lam_c1(User::B)],
                lam_ab: dual.lam_ab(),
                alpha: [dual.alpha(Node::A), dual.alpha(Node::B)],
                gain: [ch.gain(Link::AR, n), ch.gain(Link::BR, n)],
            };
            let ha = (inp.lam_c1[0] + inp.lam_ab) / (SIGMA * inp.alpha[0]) + 1.0;
            let hb = (inp.lam_c1[1] + inp.lam_ab) / (SIGMA * inp.alpha[1]) + 1.0;
            let inner_b = |pa: f64| golden_max(|pb| inp.objective([pa, pb]), 0.0, hb, 1e-10);
            let pa = golden_max(|pa| inp.objective([pa, inner_b(pa)]), 0.0, ha, 1e-9);
            let pb = inner_b(pa);
            // Only the objective is unique in the degenerate sum-only case.
            if inp.lam_c1[0] + inp.lam_c1[1] > 0.0 || inp.lam_ab == 0.0 {
                worst = worst.max((pa - pw.mac[0]).abs()).max((pb - pw.mac[1]).abs());
            }
        }
    }
    Ok(worst)
}
