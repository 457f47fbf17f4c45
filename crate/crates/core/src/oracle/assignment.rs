//! Optimal powers for a fixed role assignment, and exhaustive search over
//! all assignments for small instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::barrier::{LogTerm, RateConstraint, RateProgram};
use crate::error::{Error, Result};
use crate::types::{
    Allocation, Link, ModeRates, Node, ProblemInstance, Role, SubcarrierDecision, User, SIGMA,
};

/// Largest N accepted by [`exhaustive_solve`].
pub const EXHAUSTIVE_MAX_N: usize = 6;
/// Largest N accepted by [`convex_power_for_assignment`].
pub const ASSIGNMENT_MAX_N: usize = 16;

/// Powers, rates and weighted objective of one assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSolution {
    /// Roles that cannot carry end-to-end traffic (an unpaired relay hop,
    /// a dead link) come back as idle.
    pub allocation: Allocation,
    pub rates: ModeRates,
    pub objective: f64,
}

fn c2(x: f64) -> f64 {
    x.ln_1p() / SIGMA
}

/// Weighted-sum optimum of `R_A <= a, R_B <= b, R_A + R_B <= s`: fill the
/// heavier user first.
pub(crate) fn greedy_two_way(a: f64, b: f64, s: f64, w: [f64; 2]) -> [f64; 2] {
    let (a, b, s) = (a.max(0.0), b.max(0.0), s.max(0.0));
    if w[0] >= w[1] {
        let ra = a.min(s);
        [ra, b.min(s - ra)]
    } else {
        let rb = b.min(s);
        [a.min(s - rb), rb]
    }
}

struct Built {
    prog: RateProgram,
    /// Per subcarrier: effective role and the power variables it uses.
    slots: Vec<(Role, Vec<Option<usize>>)>,
}

fn build(roles: &[Role], inst: &ProblemInstance, weights: [f64; 2]) -> Built {
    let ch = inst.channels();
    let has = |r: Role, link: Link| {
        roles.iter().enumerate().any(|(n, &x)| x == r && ch.gain(link, n) > 0.0)
    };
    let ow_ok = [
        has(Role::OneWayHop1A, Link::AR) && has(Role::OneWayHop2A, Link::RB),
        has(Role::OneWayHop1B, Link::BR) && has(Role::OneWayHop2B, Link::RA),
    ];
    let mac_any = roles
        .iter()
        .enumerate()
        .any(|(n, &r)| r == Role::TwoWayMac && (ch.gain(Link::AR, n) > 0.0 || ch.gain(Link::BR, n) > 0.0));
    let bc_any = roles
        .iter()
        .enumerate()
        .any(|(n, &r)| r == Role::TwoWayBc && (ch.gain(Link::RA, n) > 0.0 || ch.gain(Link::RB, n) > 0.0));
    let tw_ok = mac_any && bc_any;

    let mut prog = RateProgram { budgets: inst.budgets(), ..Default::default() };
    let mut slots = Vec::with_capacity(roles.len());
    let mut hop1: [Vec<LogTerm>; 2] = Default::default();
    let mut hop2: [Vec<LogTerm>; 2] = Default::default();
    let mut mac: [Vec<LogTerm>; 2] = Default::default();
    let mut mac_sum: Vec<LogTerm> = Vec::new();
    let mut bc: [Vec<LogTerm>; 2] = Default::default();

    for (n, &role) in roles.iter().enumerate() {
        let var = |prog: &mut RateProgram, owner: Node, link: Link| {
            let g = ch.gain(link, n);
            (g > 0.0).then(|| (prog.add_power(owner), g))
        };
        let slot = match role {
            Role::DirectA | Role::DirectB => {
                let k = if role == Role::DirectA { User::A } else { User::B };
                match var(&mut prog, k.node(), Link::direct(k)) {
                    Some((i, g)) => {
                        prog.objective_logs.push((weights[k.index()], LogTerm::single(i, g)));
                        (role, vec![Some(i)])
                    }
                    None => (Role::Idle, vec![]),
                }
            }
            Role::OneWayHop1A | Role::OneWayHop1B => {
                let k = if role == Role::OneWayHop1A { User::A } else { User::B };
                match ow_ok[k.index()].then(|| var(&mut prog, k.node(), Link::uplink(k))).flatten() {
                    Some((i, g)) => {
                        hop1[k.index()].push(LogTerm::single(i, g));
                        (role, vec![Some(i)])
                    }
                    None => (Role::Idle, vec![]),
                }
            }
            Role::OneWayHop2A | Role::OneWayHop2B => {
                let k = if role == Role::OneWayHop2A { User::A } else { User::B };
                match ow_ok[k.index()].then(|| var(&mut prog, Node::R, Link::downlink_for(k))).flatten() {
                    Some((i, g)) => {
                        hop2[k.index()].push(LogTerm::single(i, g));
                        (role, vec![Some(i)])
                    }
                    None => (Role::Idle, vec![]),
                }
            }
            Role::TwoWayMac if tw_ok => {
                let a = var(&mut prog, Node::A, Link::AR);
                let b = var(&mut prog, Node::B, Link::BR);
                if let Some((i, g)) = a {
                    mac[0].push(LogTerm::single(i, g));
                }
                if let Some((i, g)) = b {
                    mac[1].push(LogTerm::single(i, g));
                }
                let vars: Vec<(usize, f64)> = a.into_iter().chain(b).collect();
                if vars.is_empty() {
                    (Role::Idle, vec![])
                } else {
                    mac_sum.push(LogTerm { vars });
                    (role, vec![a.map(|x| x.0), b.map(|x| x.0)])
                }
            }
            Role::TwoWayBc if tw_ok => {
                let gra = ch.gain(Link::RA, n);
                let grb = ch.gain(Link::RB, n);
                if gra <= 0.0 && grb <= 0.0 {
                    slots.push((Role::Idle, vec![]));
                    continue;
                }
                let i = prog.add_power(Node::R);
                if grb > 0.0 {
                    bc[0].push(LogTerm::single(i, grb));
                }
                if gra > 0.0 {
                    bc[1].push(LogTerm::single(i, gra));
                }
                (role, vec![Some(i)])
            }
            _ => (Role::Idle, vec![]),
        };
        slots.push(slot);
    }

    // Rate variables with zero weight would be unbounded below.
    for k in 0..2 {
        if ow_ok[k] && weights[k] > 0.0 {
            let t = prog.add_rate();
            prog.objective_rates.push((t, weights[k]));
            prog.constraints.push(RateConstraint { logs: std::mem::take(&mut hop1[k]), rates: vec![t] });
            prog.constraints.push(RateConstraint { logs: std::mem::take(&mut hop2[k]), rates: vec![t] });
        }
    }
    if tw_ok {
        let mut sum_rates = Vec::new();
        for k in 0..2 {
            if weights[k] > 0.0 {
                let t = prog.add_rate();
                prog.objective_rates.push((t, weights[k]));
                prog.constraints.push(RateConstraint { logs: std::mem::take(&mut mac[k]), rates: vec![t] });
                prog.constraints.push(RateConstraint { logs: std::mem::take(&mut bc[k]), rates: vec![t] });
                sum_rates.push(t);
            }
        }
        if !sum_rates.is_empty() {
            prog.constraints.push(RateConstraint { logs: mac_sum, rates: sum_rates });
        }
    }
    Built { prog, slots }
}

/// Maximizes the weighted sum rate over powers for a fixed role per
/// subcarrier, subject to the node budgets and the hop couplings.
pub fn convex_power_for_assignment(
    roles: &[Role],
    inst: &ProblemInstance,
) -> Result<AssignmentSolution> {
    power_for_assignment_weighted(roles, inst, inst.weights())
}

/// [`convex_power_for_assignment`] with explicit objective weights.
pub fn power_for_assignment_weighted(
    roles: &[Role],
    inst: &ProblemInstance,
    weights: [f64; 2],
) -> Result<AssignmentSolution> {
    let n = inst.n_subcarriers();
    if roles.len() != n {
        return Err(Error::InvalidConfig(format!(
            "assignment has {} roles for {n} subcarriers",
            roles.len()
        )));
    }
    if n > ASSIGNMENT_MAX_N {
        return Err(Error::TooLarge { n, cap: ASSIGNMENT_MAX_N });
    }
    let built = build(roles, inst, weights);
    let sol = built.prog.solve()?;
    let p = |v: &Option<usize>| v.map_or(0.0, |i| sol.powers[i]);
    let decisions: Vec<SubcarrierDecision> = built
        .slots
        .iter()
        .map(|(role, vars)| {
            let powers = match vars.len() {
                0 => [0.0, 0.0],
                1 => [p(&vars[0]), 0.0],
                _ => [p(&vars[0]), p(&vars[1])],
            };
            SubcarrierDecision::with_role(*role, powers)
        })
        .collect::<Result<_>>()?;
    let allocation = Allocation::new(decisions)?;
    let rates = assignment_rates(&allocation, inst, weights);
    Ok(AssignmentSolution {
        objective: rates.weighted(inst.weights()),
        allocation,
        rates,
    })
}

/// Rates of an allocation computed from first principles, without the
/// solver's rate code.
pub fn assignment_rates(alloc: &Allocation, inst: &ProblemInstance, split: [f64; 2]) -> ModeRates {
    let ch = inst.channels();
    let mut direct = [0.0; 2];
    let mut h1 = [0.0; 2];
    let mut h2 = [0.0; 2];
    let mut mac = [0.0; 2];
    let mut sum = 0.0;
    let mut bc = [0.0; 2];
    for (n, d) in alloc.decisions().iter().enumerate() {
        match *d {
            SubcarrierDecision::Idle => {}
            SubcarrierDecision::Direct { user, power } => {
                direct[user.index()] += c2(power * ch.gain(Link::direct(user), n))
            }
            SubcarrierDecision::OneWayHop1 { user, power } => {
                h1[user.index()] += c2(power * ch.gain(Link::uplink(user), n))
            }
            SubcarrierDecision::OneWayHop2 { user, power } => {
                h2[user.index()] += c2(power * ch.gain(Link::downlink_for(user), n))
            }
            SubcarrierDecision::TwoWayMac { power_a, power_b } => {
                let x = power_a * ch.gain(Link::AR, n);
                let y = power_b * ch.gain(Link::BR, n);
                mac[0] += c2(x);
                mac[1] += c2(y);
                sum += c2(x + y);
            }
            SubcarrierDecision::TwoWayBc { power } => {
                bc[0] += c2(power * ch.gain(Link::RB, n));
                bc[1] += c2(power * ch.gain(Link::RA, n));
            }
        }
    }
    let one_way = [h1[0].min(h2[0]), h1[1].min(h2[1])];
    let two_way = greedy_two_way(mac[0].min(bc[0]), mac[1].min(bc[1]), sum, split);
    ModeRates { direct, one_way, two_way }
}

/// Best assignment found by [`exhaustive_solve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveResult {
    pub roles: Vec<Role>,
    pub solution: AssignmentSolution,
    pub objective: f64,
}

fn decode(mut idx: usize, n: usize) -> Vec<Role> {
    let mut roles = Vec::with_capacity(n);
    for _ in 0..n {
        roles.push(Role::ACTIVE[idx % 8]);
        idx /= 8;
    }
    roles
}

/// Optimal weighted sum rate over all `8^N` assignments (QoS floors are
/// not enforced). Ties go to the lowest assignment index.
pub fn exhaustive_solve(inst: &ProblemInstance) -> Result<ExhaustiveResult> {
    let n = inst.n_subcarriers();
    if n > EXHAUSTIVE_MAX_N {
        return Err(Error::TooLarge { n, cap: EXHAUSTIVE_MAX_N });
    }
    let total = 8usize.pow(n as u32);
    let best = (0..total)
        .into_par_iter()
        .map(|idx| {
            let roles = decode(idx, n);
            convex_power_for_assignment(&roles, inst).map(|s| (s.objective, idx))
        })
        .try_reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                Ok(if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a })
            },
        )?;
    let roles = decode(best.1, n);
    let solution = convex_power_for_assignment(&roles, inst)?;
    Ok(ExhaustiveResult { roles, objective: solution.objective, solution })
}

/// Smallest extra weight on each short user that makes the weighted
/// optimum of `roles` meet the QoS floors, found by bisection; `None` when
/// even a heavily tilted objective cannot meet them.
pub fn qos_power_for_assignment(
    roles: &[Role],
    inst: &ProblemInstance,
) -> Result<Option<AssignmentSolution>> {
    let meets = |s: &AssignmentSolution| {
        User::BOTH.iter().all(|&k| s.rates.user_rate(k) >= inst.qos_floor(k) * (1.0 - 1e-9))
    };
    let base = convex_power_for_assignment(roles, inst)?;
    if meets(&base) {
        return Ok(Some(base));
    }
    let w = inst.weights();
    let scale = 1.0 + w[0].max(w[1]);
    for k in User::BOTH {
        let tilt = |mu: f64| {
            let mut wk = w;
            wk[k.index()] += mu;
            power_for_assignment_weighted(roles, inst, wk)
        };
        let hi_mu = 1e4 * scale;
        let hi = tilt(hi_mu)?;
        if !meets(&hi) {
            continue;
        }
        let (mut lo, mut hi_mu, mut best) = (0.0, hi_mu, hi);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi_mu);
            let s = tilt(mid)?;
            if meets(&s) {
                hi_mu = mid;
                best = s;
            } else {
                lo = mid;
            }
        }
        let objective = best.rates.weighted(w);
        return Ok(Some(AssignmentSolution { objective, ..best }));
    }
    Ok(None)
}
