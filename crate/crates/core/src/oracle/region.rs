//! Two-way rate regions on a subcarrier-set basis versus 1-to-1 subcarrier
//! pairing.
//!
//! On a set basis the relay decodes everything received over the MAC set
//! and re-encodes it over the whole broadcast set. Pairing instead ties
//! each MAC subcarrier to one broadcast subcarrier, so every pair has its
//! own region and the pair regions add up.

use serde::{Deserialize, Serialize};

use super::assignment::power_for_assignment_weighted;
use super::barrier::{LogTerm, RateConstraint, RateProgram};
use crate::error::{Error, Result};
use crate::types::{Link, Node, ProblemInstance, Role, SIGMA};

/// Largest N accepted by [`set_basis_best`].
pub const SET_BASIS_MAX_N: usize = 16;
/// Largest N accepted by [`pairing_baseline`].
pub const PAIRING_MAX_N: usize = 8;

fn c2(x: f64) -> f64 {
    x.ln_1p() / SIGMA
}

/// Weighted-sum best point of `R_A <= a, R_B <= b, R_A + R_B <= s`; with
/// equal weights the most balanced point of the optimal edge.
pub fn weighted_point(a: f64, b: f64, s: f64, w: [f64; 2]) -> [f64; 2] {
    let (a, b, s) = (a.max(0.0), b.max(0.0), s.max(0.0));
    if w[0] > w[1] {
        let ra = a.min(s);
        [ra, b.min(s - ra)]
    } else if w[1] > w[0] {
        let rb = b.min(s);
        [a.min(s - rb), rb]
    } else {
        let v = s.min(a + b);
        let hi = a.min(v);
        let ra = (0.5 * v).max((v - b).max(0.0)).min(hi);
        [ra, v - ra]
    }
}

fn check_sets(n: usize, mac: &[usize], bc: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in mac.iter().chain(bc) {
        if i >= n {
            return Err(Error::InvalidConfig(format!("subcarrier {i} out of range 0..{n}")));
        }
        if seen[i] {
            return Err(Error::InvalidConfig(format!("subcarrier {i} used twice")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Two-way rate pair of the set-basis region for the given MAC and
/// broadcast sets, at the instance weights.
///
/// With `equal_power` each node splits its budget evenly over the
/// subcarriers it transmits on; otherwise powers are optimized.
pub fn set_basis_region_point(
    inst: &ProblemInstance,
    mac_set: &[usize],
    bc_set: &[usize],
    equal_power: bool,
) -> Result<[f64; 2]> {
    let n = inst.n_subcarriers();
    check_sets(n, mac_set, bc_set)?;
    if mac_set.is_empty() || bc_set.is_empty() {
        return Ok([0.0, 0.0]);
    }
    let w = inst.weights();
    if !equal_power {
        let mut roles = vec![Role::Idle; n];
        for &i in mac_set {
            roles[i] = Role::TwoWayMac;
        }
        for &i in bc_set {
            roles[i] = Role::TwoWayBc;
        }
        let sol = power_for_assignment_weighted(&roles, inst, w)?;
        return Ok(sol.rates.two_way);
    }
    let ch = inst.channels();
    let pa = inst.budget(Node::A) / mac_set.len() as f64;
    let pb = inst.budget(Node::B) / mac_set.len() as f64;
    let pr = inst.budget(Node::R) / bc_set.len() as f64;
    let (mut ma, mut mb, mut ms) = (0.0, 0.0, 0.0);
    for &i in mac_set {
        let x = pa * ch.gain(Link::AR, i);
        let y = pb * ch.gain(Link::BR, i);
        ma += c2(x);
        mb += c2(y);
        ms += c2(x + y);
    }
    let (mut ba, mut bb) = (0.0, 0.0);
    for &i in bc_set {
        ba += c2(pr * ch.gain(Link::RB, i));
        bb += c2(pr * ch.gain(Link::RA, i));
    }
    Ok(weighted_point(ma.min(ba), mb.min(bb), ms, w))
}

/// Best set-basis split of all N subcarriers into a MAC set and a
/// broadcast set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetBasisResult {
    pub mac_set: Vec<usize>,
    pub bc_set: Vec<usize>,
    pub rates: [f64; 2],
    /// Weighted sum of `rates`.
    pub value: f64,
}

/// Exhausts the `2^N` MAC/broadcast partitions; ties keep the partition
/// whose MAC bitmask is smallest.
pub fn set_basis_best(inst: &ProblemInstance, equal_power: bool) -> Result<SetBasisResult> {
    let n = inst.n_subcarriers();
    if n > SET_BASIS_MAX_N {
        return Err(Error::TooLarge { n, cap: SET_BASIS_MAX_N });
    }
    let w = inst.weights();
    let mut best: Option<SetBasisResult> = None;
    for mask in 1u32..(1u32 << n) - 1 {
        let mac: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let bc: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
        let r = set_basis_region_point(inst, &mac, &bc, equal_power)?;
        let value = w[0] * r[0] + w[1] * r[1];
        if best.as_ref().map_or(true, |b| value > b.value) {
            best = Some(SetBasisResult { mac_set: mac, bc_set: bc, rates: r, value });
        }
    }
    Ok(best.unwrap_or(SetBasisResult {
        mac_set: vec![],
        bc_set: (0..n).collect(),
        rates: [0.0; 2],
        value: 0.0,
    }))
}

/// Best 1-to-1 pairing of MAC and broadcast subcarriers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    /// `(mac subcarrier, broadcast subcarrier)` pairs.
    pub pairs: Vec<(usize, usize)>,
    pub rates: [f64; 2],
    pub value: f64,
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Pairing comparator: every subcarrier belongs to exactly one
/// (MAC, broadcast) pair and each pair contributes its own two-way region.
/// Exhausts the `C(N, N/2)` MAC halves and `(N/2)!` matchings.
pub fn pairing_baseline(inst: &ProblemInstance, equal_power: bool) -> Result<PairingResult> {
    let n = inst.n_subcarriers();
    if n > PAIRING_MAX_N {
        return Err(Error::TooLarge { n, cap: PAIRING_MAX_N });
    }
    if n % 2 != 0 {
        return Err(Error::InvalidConfig(format!("pairing needs an even N, got {n}")));
    }
    let half = n / 2;
    let w = inst.weights();
    let ch = inst.channels();
    let pa = inst.budget(Node::A) / half as f64;
    let pb = inst.budget(Node::B) / half as f64;
    let pr = inst.budget(Node::R) / half as f64;
    let pair_point = |m: usize, b: usize| {
        let x = pa * ch.gain(Link::AR, m);
        let y = pb * ch.gain(Link::BR, m);
        weighted_point(
            c2(x).min(c2(pr * ch.gain(Link::RB, b))),
            c2(y).min(c2(pr * ch.gain(Link::RA, b))),
            c2(x + y),
            w,
        )
    };
    let mut best: Option<PairingResult> = None;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != half {
            continue;
        }
        let mac: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let bc: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 0).collect();
        for perm in permutations(&bc) {
            let pairs: Vec<(usize, usize)> = mac.iter().copied().zip(perm).collect();
            let rates = if equal_power {
                pairs.iter().fold([0.0, 0.0], |acc, &(m, b)| {
                    let r = pair_point(m, b);
                    [acc[0] + r[0], acc[1] + r[1]]
                })
            } else {
                optimized_pairing_rates(inst, &pairs)?
            };
            let value = w[0] * rates[0] + w[1] * rates[1];
            if best.as_ref().map_or(true, |b| value > b.value) {
                best = Some(PairingResult { pairs, rates, value });
            }
        }
    }
    Ok(best.unwrap_or(PairingResult { pairs: vec![], rates: [0.0; 2], value: 0.0 }))
}

/// Jointly optimal powers for a fixed pairing: budgets are shared across
/// pairs, but every pair is its own two-way region.
fn optimized_pairing_rates(inst: &ProblemInstance, pairs: &[(usize, usize)]) -> Result<[f64; 2]> {
    let ch = inst.channels();
    let w = inst.weights();
    let mut prog = RateProgram { budgets: inst.budgets(), ..Default::default() };
    let mut vars = Vec::new();
    for &(m, b) in pairs {
        let gar = ch.gain(Link::AR, m);
        let gbr = ch.gain(Link::BR, m);
        let gra = ch.gain(Link::RA, b);
        let grb = ch.gain(Link::RB, b);
        let ia = prog.add_power(Node::A);
        let ib = prog.add_power(Node::B);
        let ir = prog.add_power(Node::R);
        let mut ts = Vec::new();
        for (k, up, down, iu) in [(0, gar, grb, ia), (1, gbr, gra, ib)] {
            if w[k] > 0.0 {
                let t = prog.add_rate();
                prog.objective_rates.push((t, w[k]));
                prog.constraints.push(RateConstraint { logs: vec![LogTerm::single(iu, up)], rates: vec![t] });
                prog.constraints.push(RateConstraint { logs: vec![LogTerm::single(ir, down)], rates: vec![t] });
                ts.push(t);
            }
        }
        if !ts.is_empty() {
            prog.constraints.push(RateConstraint {
                logs: vec![LogTerm { vars: vec![(ia, gar), (ib, gbr)] }],
                rates: ts,
            });
        }
        vars.push((ia, ib, ir, gar, gbr, gra, grb));
    }
    let sol = prog.solve()?;
    let p = &sol.powers;
    let mut total = [0.0; 2];
    for (ia, ib, ir, gar, gbr, gra, grb) in vars {
        let x = p[ia] * gar;
        let y = p[ib] * gbr;
        let r = weighted_point(
            c2(x).min(c2(p[ir] * grb)),
            c2(y).min(c2(p[ir] * gra)),
            c2(x + y),
            w,
        );
        total[0] += r[0];
        total[1] += r[1];
    }
    Ok(total)
}
