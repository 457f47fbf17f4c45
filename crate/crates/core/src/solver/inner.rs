//! Per-subcarrier inner maximization: optimal powers of every role at a
//! fixed dual point, the resulting profits, and the argmax assignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    capacity, DualPoint, Link, Node, ProblemInstance, Role, RoleMask, SubcarrierDecision, User,
    SIGMA,
};

/// Profit of each assignable role, in [`Role::ACTIVE`] order:
/// `(DT-A, DT-B, OW1-A, OW1-B, OW2-A, OW2-B, TW1, TW2)`.
/// Roles excluded by a mask hold `-inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfitVector(pub [f64; 8]);

impl ProfitVector {
    pub fn get(&self, role: Role) -> f64 {
        match role {
            Role::Idle => 0.0,
            r => self.0[r.index()],
        }
    }

    /// Largest profit, or 0 if no role beats staying idle.
    pub fn best(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// Optimal power of every role on one subcarrier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InnerPowers {
    pub direct: [f64; 2],
    pub hop1: [f64; 2],
    pub hop2: [f64; 2],
    pub mac: [f64; 2],
    pub bc: f64,
}

impl InnerPowers {
    pub fn for_role(&self, role: Role) -> [f64; 2] {
        match role {
            Role::DirectA => [self.direct[0], 0.0],
            Role::DirectB => [self.direct[1], 0.0],
            Role::OneWayHop1A => [self.hop1[0], 0.0],
            Role::OneWayHop1B => [self.hop1[1], 0.0],
            Role::OneWayHop2A => [self.hop2[0], 0.0],
            Role::OneWayHop2B => [self.hop2[1], 0.0],
            Role::TwoWayMac => self.mac,
            Role::TwoWayBc => [self.bc, 0.0],
            Role::Idle => [0.0, 0.0],
        }
    }
}

/// Multi-level water-filling: `(level / (ln2 * price) - 1 / gain)^+`.
///
/// Maximizes `level * log2(1 + p * gain) - price * p` over `p >= 0`.
pub fn waterfill(level: f64, price: f64, gain: f64) -> Result<f64> {
    if !(price > 0.0) {
        return Err(Error::NonPositivePrice(price));
    }
    debug_assert!(level >= 0.0 && gain >= 0.0);
    if gain <= 0.0 || level <= 0.0 {
        return Ok(0.0);
    }
    Ok((level / (SIGMA * price) - 1.0 / gain).max(0.0))
}

/// Direct-transmission power for water level `w_k + mu_k`.
pub fn waterfill_direct(level: f64, alpha_k: f64, gain: f64) -> Result<f64> {
    waterfill(level, alpha_k, gain)
}

/// First one-way hop (user to relay), water level `lam_b1`.
pub fn waterfill_oneway_hop1(lam_b1: f64, alpha_k: f64, gain: f64) -> Result<f64> {
    waterfill(lam_b1, alpha_k, gain)
}

/// Second one-way hop (relay to destination), water level `lam_b2` and the
/// relay's power price.
pub fn waterfill_oneway_hop2(lam_b2: f64, alpha_r: f64, gain: f64) -> Result<f64> {
    waterfill(lam_b2, alpha_r, gain)
}

/// `level * log2(1 + p * gain) - price * p`.
#[inline]
pub fn single_link_profit(level: f64, price: f64, gain: f64, power: f64) -> f64 {
    if power <= 0.0 {
        return 0.0;
    }
    level * capacity(power * gain) - price * power
}

/// Inputs of the MAC-phase power problem on one subcarrier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacInputs {
    pub lam_c1: [f64; 2],
    pub lam_ab: f64,
    pub alpha: [f64; 2],
    /// `|h_{A,R}|^2`, `|h_{B,R}|^2`.
    pub gain: [f64; 2],
}

impl MacInputs {
    /// Concave MAC profit before subtracting nothing else:
    /// `sum_k lam_c1_k C(p_k g_k) + lam_ab C(p_A g_A + p_B g_B) - sum_k alpha_k p_k`.
    pub fn objective(&self, p: [f64; 2]) -> f64 {
        let x = p[0] * self.gain[0];
        let y = p[1] * self.gain[1];
        self.lam_c1[0] * capacity(x) + self.lam_c1[1] * capacity(y)
            + self.lam_ab * capacity(x + y)
            - self.alpha[0] * p[0]
            - self.alpha[1] * p[1]
    }

    /// Left-hand side minus right-hand side of the two stationarity
    /// equations, in the form `lam g/(1+x) + lam_ab g/(1+x+y) - ln2 alpha`.
    pub fn residual(&self, p: [f64; 2]) -> [f64; 2] {
        let x = p[0] * self.gain[0];
        let y = p[1] * self.gain[1];
        let s = 1.0 + x + y;
        [
            self.lam_c1[0] * self.gain[0] / (1.0 + x) + self.lam_ab * self.gain[0] / s
                - SIGMA * self.alpha[0],
            self.lam_c1[1] * self.gain[1] / (1.0 + y) + self.lam_ab * self.gain[1] / s
                - SIGMA * self.alpha[1],
        ]
    }
}

/// Detailed MAC solution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacSolution {
    pub powers: [f64; 2],
    pub newton_iterations: usize,
    /// Stationarity residual; entries for coordinates pinned at zero are
    /// reported as 0.
    pub residual: [f64; 2],
}

const MAC_MAX_ITER: usize = 100;
const MAC_STALL_TOL: f64 = 1e-11;

/// Maximizer of the MAC-phase profit over `p_A, p_B >= 0`.
///
/// Boundary solutions (one user silent) are closed-form water-filling and
/// are accepted when the KKT sign condition holds for the silent user.
/// Otherwise the optimum is interior and is found by damped Newton on the
/// stationarity system, started between the decoupled water-filling levels.
pub fn solve_mac(inp: &MacInputs, tol: f64) -> Result<MacSolution> {
    let [la, lb] = inp.lam_c1;
    let lab = inp.lam_ab;
    let [ga, gb] = inp.gain;
    let [aa, ab] = inp.alpha;
    let done = |pa: f64, pb: f64| {
        Ok(MacSolution {
            powers: [pa, pb],
            newton_iterations: 0,
            residual: [0.0; 2],
        })
    };
    if !(aa > 0.0) {
        return Err(Error::NonPositivePrice(aa));
    }
    if !(ab > 0.0) {
        return Err(Error::NonPositivePrice(ab));
    }
    if ga <= 0.0 && gb <= 0.0 {
        return done(0.0, 0.0);
    }
    if ga <= 0.0 {
        return done(0.0, waterfill(lb + lab, ab, gb)?);
    }
    if gb <= 0.0 {
        return done(waterfill(la + lab, aa, ga)?, 0.0);
    }
    if lab <= 0.0 {
        return done(waterfill(la, aa, ga)?, waterfill(lb, ab, gb)?);
    }

    // Boundary candidates: the other user silent.
    let pa_only = waterfill(la + lab, aa, ga)?;
    let pb_only = waterfill(lb + lab, ab, gb)?;
    let slope_b = lb * gb + lab * gb / (1.0 + pa_only * ga) - SIGMA * ab;
    if slope_b <= 0.0 {
        return done(pa_only, 0.0);
    }
    let slope_a = la * ga + lab * ga / (1.0 + pb_only * gb) - SIGMA * aa;
    if slope_a <= 0.0 {
        return done(0.0, pb_only);
    }
    if la + lb <= 1e-14 * lab {
        // Only p_A g_A + p_B g_B matters; the split is not unique.
        let fa = inp.objective([pa_only, 0.0]);
        let fb = inp.objective([0.0, pb_only]);
        return if fa >= fb { done(pa_only, 0.0) } else { done(0.0, pb_only) };
    }

    // Interior: Newton in received-SNR coordinates x = p_A g_A, y = p_B g_B.
    let ca = aa / ga;
    let cb = ab / gb;
    let xa_lo = waterfill(la, aa, ga)? * ga;
    let xb_lo = waterfill(lb, ab, gb)? * gb;
    let xa_hi = pa_only * ga;
    let xb_hi = pb_only * gb;
    let f = |x: f64, y: f64| {
        (la * x.ln_1p() + lb * y.ln_1p() + lab * (x + y).ln_1p()) / SIGMA - ca * x - cb * y
    };
    let mut x = 0.5 * (xa_lo + xa_hi);
    let mut y = 0.5 * (xb_lo + xb_hi);
    let scale = [1.0 + SIGMA * aa, 1.0 + SIGMA * ab];
    for it in 0..MAC_MAX_ITER {
        let s = 1.0 + x + y;
        let gx = (la / (1.0 + x) + lab / s) / SIGMA - ca;
        let gy = (lb / (1.0 + y) + lab / s) / SIGMA - cb;
        let res = [gx * SIGMA * ga, gy * SIGMA * gb];
        if res[0].abs() <= tol * scale[0] && res[1].abs() <= tol * scale[1] {
            return Ok(MacSolution {
                powers: [x / ga, y / gb],
                newton_iterations: it,
                residual: res,
            });
        }
        let s2 = s * s;
        let hxx = -(la / ((1.0 + x) * (1.0 + x)) + lab / s2) / SIGMA;
        let hyy = -(lb / ((1.0 + y) * (1.0 + y)) + lab / s2) / SIGMA;
        let hxy = -lab / (SIGMA * s2);
        let det = hxx * hyy - hxy * hxy;
        if !(det > 0.0) {
            break;
        }
        // d = -H^{-1} g
        let dx = -(hyy * gx - hxy * gy) / det;
        let dy = -(-hxy * gx + hxx * gy) / det;
        let f0 = f(x, y);
        let slope = gx * dx + gy * dy;
        let norm0 = res[0].abs() / scale[0] + res[1].abs() / scale[1];
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let nx = x + t * dx;
            let ny = y + t * dy;
            if nx > 0.0 && ny > 0.0 && (nx != x || ny != y) {
                // Near the root f is flat to rounding, so a decrease of the
                // stationarity residual also counts as progress.
                let ns = 1.0 + nx + ny;
                let rx = (la / (1.0 + nx) + lab / ns - SIGMA * ca) * ga;
                let ry = (lb / (1.0 + ny) + lab / ns - SIGMA * cb) * gb;
                let norm = rx.abs() / scale[0] + ry.abs() / scale[1];
                if f(nx, ny) >= f0 + 1e-4 * t * slope || norm < norm0 {
                    x = nx;
                    y = ny;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let s = 1.0 + x + y;
    let res = [
        la * ga / (1.0 + x) + lab * ga / s - SIGMA * aa,
        lb * gb / (1.0 + y) + lab * gb / s - SIGMA * ab,
    ];
    // Stalled at rounding level: accept when within the hard residual bound.
    if res[0].abs() <= MAC_STALL_TOL * scale[0] && res[1].abs() <= MAC_STALL_TOL * scale[1] {
        return Ok(MacSolution {
            powers: [x / ga, y / gb],
            newton_iterations: MAC_MAX_ITER,
            residual: res,
        });
    }
    Err(Error::NoConvergence {
        iterations: MAC_MAX_ITER,
        residual: res[0].abs().max(res[1].abs()),
    })
}

/// MAC-phase powers `(p_A, p_B)`.
pub fn solve_mac_powers(inp: &MacInputs, tol: f64) -> Result<(f64, f64)> {
    let s = solve_mac(inp, tol)?;
    Ok((s.powers[0], s.powers[1]))
}

/// Broadcast-phase relay power: the positive root of the stationarity
/// quadratic, or 0 when the relay's price exceeds the marginal value at
/// zero power.
pub fn bc_power(xi_a: f64, xi_b: f64, alpha_r: f64, gain_ra: f64, gain_rb: f64) -> Result<f64> {
    if !(alpha_r > 0.0) {
        return Err(Error::NonPositivePrice(alpha_r));
    }
    debug_assert!(xi_a >= 0.0 && xi_b >= 0.0);
    let marginal = (xi_b * gain_ra + xi_a * gain_rb) / SIGMA;
    if alpha_r >= marginal {
        return Ok(0.0);
    }
    let phi1 = alpha_r * gain_rb * gain_ra;
    let phi2 = alpha_r * (gain_rb + gain_ra) - (xi_a + xi_b) * gain_rb * gain_ra / SIGMA;
    let phi3 = alpha_r - marginal;
    // phi3 < 0 here, so the discriminant exceeds phi2^2.
    let disc = (phi2 * phi2 - 4.0 * phi1 * phi3).sqrt();
    let p = if phi2 >= 0.0 {
        -2.0 * phi3 / (phi2 + disc)
    } else {
        (-phi2 + disc) / (2.0 * phi1)
    };
    Ok(p.max(0.0))
}

/// Broadcast profit `xi_A C(p g_RB) + xi_B C(p g_RA) - alpha_R p`.
pub fn bc_objective(xi_a: f64, xi_b: f64, alpha_r: f64, gain_ra: f64, gain_rb: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    xi_a * capacity(p * gain_rb) + xi_b * capacity(p * gain_ra) - alpha_r * p
}

fn mac_inputs(n: usize, dual: &DualPoint, inst: &ProblemInstance) -> MacInputs {
    let ch = inst.channels();
    MacInputs {
        lam_c1: [dual.lam_c1(User::A), dual.lam_c1(User::B)],
        lam_ab: dual.lam_ab(),
        alpha: [dual.alpha(Node::A), dual.alpha(Node::B)],
        gain: [ch.gain(Link::AR, n), ch.gain(Link::BR, n)],
    }
}

/// Default MAC Newton tolerance (relative to `1 + ln2 alpha`).
pub const DEFAULT_MAC_TOL: f64 = 1e-13;

/// Optimal powers and profits of every role allowed by `mask` on
/// subcarrier `n`.
pub fn inner_solution(
    n: usize,
    dual: &DualPoint,
    inst: &ProblemInstance,
    mask: RoleMask,
    mac_tol: f64,
) -> Result<(ProfitVector, InnerPowers)> {
    let ch = inst.channels();
    let mut profits = [f64::NEG_INFINITY; 8];
    let mut pw = InnerPowers::default();
    for k in User::BOTH {
        let i = k.index();
        let alpha_k = dual.alpha(k.node());
        let roles = [
            (Role::ACTIVE[i], dual.level(k), alpha_k, Link::direct(k)),
            (Role::ACTIVE[2 + i], dual.lam_b1(k), alpha_k, Link::uplink(k)),
            (Role::ACTIVE[4 + i], dual.lam_b2(k), dual.alpha(Node::R), Link::downlink_for(k)),
        ];
        for (slot, (role, level, price, link)) in roles.into_iter().enumerate() {
            if !mask.allows(role) {
                continue;
            }
            let g = ch.gain(link, n);
            let p = waterfill(level, price, g)?;
            profits[role.index()] = single_link_profit(level, price, g, p).max(0.0);
            match slot {
                0 => pw.direct[i] = p,
                1 => pw.hop1[i] = p,
                _ => pw.hop2[i] = p,
            }
        }
    }
    if mask.allows(Role::TwoWayMac) {
        let inp = mac_inputs(n, dual, inst);
        let (pa, pb) = solve_mac_powers(&inp, mac_tol)?;
        pw.mac = [pa, pb];
        profits[Role::TwoWayMac.index()] = inp.objective([pa, pb]).max(0.0);
    }
    if mask.allows(Role::TwoWayBc) {
        let (xa, xb, ar) = (dual.xi(User::A), dual.xi(User::B), dual.alpha(Node::R));
        let (gra, grb) = (ch.gain(Link::RA, n), ch.gain(Link::RB, n));
        let p = bc_power(xa, xb, ar, gra, grb)?;
        pw.bc = p;
        profits[Role::TwoWayBc.index()] = bc_objective(xa, xb, ar, gra, grb, p).max(0.0);
    }
    Ok((ProfitVector(profits), pw))
}

/// All eight profits at the optimal inner powers (no roles masked).
pub fn compute_profits(n: usize, dual: &DualPoint, inst: &ProblemInstance) -> Result<ProfitVector> {
    Ok(inner_solution(n, dual, inst, RoleMask::ALL, DEFAULT_MAC_TOL)?.0)
}

/// Role with the largest profit; lowest index wins ties, and a subcarrier
/// whose best profit is not positive stays idle.
pub fn assign_subcarrier(profits: &ProfitVector) -> Role {
    let mut best = Role::Idle;
    let mut best_val = 0.0;
    for role in Role::ACTIVE {
        let v = profits.0[role.index()];
        if v > best_val {
            best = role;
            best_val = v;
        }
    }
    best
}

/// Decision for `role` using the inner-optimal powers.
pub fn decision_for(role: Role, powers: &InnerPowers) -> SubcarrierDecision {
    SubcarrierDecision::with_role(role, powers.for_role(role))
        .expect("inner powers are finite and non-negative")
}

/// Argmax role, its profit and its decision without solving the MAC
/// system when an upper bound shows it cannot win.
///
/// `log2(1 + x + y) <= log2(1 + x) + log2(1 + y)`, so the MAC profit is at
/// most the sum of two single-user water-filling profits.
pub(crate) fn best_decision(
    n: usize,
    dual: &DualPoint,
    inst: &ProblemInstance,
    mask: RoleMask,
    mac_tol: f64,
) -> Result<(f64, SubcarrierDecision)> {
    let ch = inst.channels();
    let mut best_val = 0.0;
    let mut best = SubcarrierDecision::Idle;
    let mut consider = |val: f64, dec: SubcarrierDecision, best_val: &mut f64| {
        if val > *best_val {
            *best_val = val;
            best = dec;
        }
    };
    // Same evaluation order as `Role::ACTIVE` so ties resolve identically.
    for (role, k, level, price, link) in [
        (Role::DirectA, User::A, dual.level(User::A), dual.alpha(Node::A), Link::AB),
        (Role::DirectB, User::B, dual.level(User::B), dual.alpha(Node::B), Link::BA),
        (Role::OneWayHop1A, User::A, dual.lam_b1(User::A), dual.alpha(Node::A), Link::AR),
        (Role::OneWayHop1B, User::B, dual.lam_b1(User::B), dual.alpha(Node::B), Link::BR),
        (Role::OneWayHop2A, User::A, dual.lam_b2(User::A), dual.alpha(Node::R), Link::RB),
        (Role::OneWayHop2B, User::B, dual.lam_b2(User::B), dual.alpha(Node::R), Link::RA),
    ] {
        if !mask.allows(role) {
            continue;
        }
        let g = ch.gain(link, n);
        let p = waterfill(level, price, g)?;
        if p > 0.0 {
            let v = single_link_profit(level, price, g, p).max(0.0);
            let dec = match role {
                Role::DirectA | Role::DirectB => SubcarrierDecision::Direct { user: k, power: p },
                Role::OneWayHop1A | Role::OneWayHop1B => {
                    SubcarrierDecision::OneWayHop1 { user: k, power: p }
                }
                _ => SubcarrierDecision::OneWayHop2 { user: k, power: p },
            };
            consider(v, dec, &mut best_val);
        }
    }
    let bc = if mask.allows(Role::TwoWayBc) {
        let (xa, xb, ar) = (dual.xi(User::A), dual.xi(User::B), dual.alpha(Node::R));
        let (gra, grb) = (ch.gain(Link::RA, n), ch.gain(Link::RB, n));
        let p = bc_power(xa, xb, ar, gra, grb)?;
        Some((bc_objective(xa, xb, ar, gra, grb, p).max(0.0), p))
    } else {
        None
    };
    if mask.allows(Role::TwoWayMac) {
        let inp = mac_inputs(n, dual, inst);
        let bound = {
            let (aa, ab) = (inp.alpha[0], inp.alpha[1]);
            let pa = waterfill(inp.lam_c1[0] + inp.lam_ab, aa, inp.gain[0])?;
            let pb = waterfill(inp.lam_c1[1] + inp.lam_ab, ab, inp.gain[1])?;
            single_link_profit(inp.lam_c1[0] + inp.lam_ab, aa, inp.gain[0], pa)
                + single_link_profit(inp.lam_c1[1] + inp.lam_ab, ab, inp.gain[1], pb)
        };
        let bc_val = bc.map_or(0.0, |b| b.0);
        if bound > 0.0 && bound >= best_val.max(bc_val) {
            let (pa, pb) = solve_mac_powers(&inp, mac_tol)?;
            let v = inp.objective([pa, pb]).max(0.0);
            consider(v, SubcarrierDecision::TwoWayMac { power_a: pa, power_b: pb }, &mut best_val);
        }
    }
    if let Some((v, p)) = bc {
        consider(v, SubcarrierDecision::TwoWayBc { power: p }, &mut best_val);
    }
    Ok((best_val, best))
}
