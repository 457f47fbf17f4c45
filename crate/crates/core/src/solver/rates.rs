//! Achievable rates of an allocation: per-session hop capacities, the
//! two-way capacity polytope, and end-to-end per-user rates.

use serde::{Deserialize, Serialize};

use crate::types::{
    capacity, Allocation, Link, ModeRates, ProblemInstance, SubcarrierDecision, User,
};

/// Summed per-hop capacities of every session, indexed by the user whose
/// data the hop carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionCaps {
    pub direct: [f64; 2],
    pub ow_hop1: [f64; 2],
    pub ow_hop2: [f64; 2],
    /// Individual MAC-phase rate bounds.
    pub tw_mac: [f64; 2],
    /// MAC-phase sum-rate bound.
    pub tw_mac_sum: f64,
    /// Broadcast-phase bounds: entry `k` is the rate at which the relay
    /// can deliver user `k`'s data to the other user.
    pub tw_bc: [f64; 2],
}

impl SessionCaps {
    pub fn of(alloc: &Allocation, inst: &ProblemInstance) -> Self {
        Self::of_decisions(alloc.decisions(), inst)
    }

    pub fn of_decisions(decisions: &[SubcarrierDecision], inst: &ProblemInstance) -> Self {
        let ch = inst.channels();
        let mut c = SessionCaps::default();
        for (n, d) in decisions.iter().enumerate() {
            match *d {
                SubcarrierDecision::Idle => {}
                SubcarrierDecision::Direct { user, power } => {
                    c.direct[user.index()] += capacity(power * ch.gain(Link::direct(user), n));
                }
                SubcarrierDecision::OneWayHop1 { user, power } => {
                    c.ow_hop1[user.index()] += capacity(power * ch.gain(Link::uplink(user), n));
                }
                SubcarrierDecision::OneWayHop2 { user, power } => {
                    c.ow_hop2[user.index()] +=
                        capacity(power * ch.gain(Link::downlink_for(user), n));
                }
                SubcarrierDecision::TwoWayMac { power_a, power_b } => {
                    let x = power_a * ch.gain(Link::AR, n);
                    let y = power_b * ch.gain(Link::BR, n);
                    c.tw_mac[0] += capacity(x);
                    c.tw_mac[1] += capacity(y);
                    c.tw_mac_sum += capacity(x + y);
                }
                SubcarrierDecision::TwoWayBc { power } => {
                    c.tw_bc[0] += capacity(power * ch.gain(Link::RB, n));
                    c.tw_bc[1] += capacity(power * ch.gain(Link::RA, n));
                }
            }
        }
        c
    }

    /// Two-way polytope `R_A <= cap[0]`, `R_B <= cap[1]`, `R_A + R_B <= sum`.
    pub fn two_way_region(&self) -> TwoWayRegion {
        TwoWayRegion {
            cap: [
                self.tw_mac[0].min(self.tw_bc[0]),
                self.tw_mac[1].min(self.tw_bc[1]),
            ],
            sum: self.tw_mac_sum,
        }
    }

    pub fn one_way(&self) -> [f64; 2] {
        [
            self.ow_hop1[0].min(self.ow_hop2[0]),
            self.ow_hop1[1].min(self.ow_hop2[1]),
        ]
    }
}

/// Two-way rate region of a fixed allocation: individual caps and a sum cap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoWayRegion {
    pub cap: [f64; 2],
    pub sum: f64,
}

impl TwoWayRegion {
    pub fn contains(&self, r: [f64; 2], tol: f64) -> bool {
        r[0] >= -tol
            && r[1] >= -tol
            && r[0] <= self.cap[0] + tol
            && r[1] <= self.cap[1] + tol
            && r[0] + r[1] <= self.sum + tol
    }

    /// Largest achievable `R_A + R_B`.
    pub fn max_sum(&self) -> f64 {
        (self.cap[0].max(0.0) + self.cap[1].max(0.0)).min(self.sum.max(0.0))
    }

    /// Weighted-sum maximizing point of the region intersected with
    /// `R_k >= floor_k`, by vertex enumeration. Ties along an optimal edge
    /// resolve to the point maximizing `min(R_A, R_B)`. `None` when the
    /// floors make the region empty.
    pub fn best_point(&self, weights: [f64; 2], floors: [f64; 2]) -> Option<[f64; 2]> {
        let a = self.cap[0].max(0.0);
        let b = self.cap[1].max(0.0);
        let s = self.sum.max(0.0);
        let [fa, fb] = [floors[0].max(0.0), floors[1].max(0.0)];
        let scale = 1.0 + a.max(b).max(s);
        let tol = 1e-12 * scale;
        if fa > a + tol || fb > b + tol || fa + fb > s + tol {
            return None;
        }
        // Lines n . r = c bounding the region.
        let lines: [([f64; 2], f64); 5] = [
            ([1.0, 0.0], a),
            ([0.0, 1.0], b),
            ([1.0, 1.0], s),
            ([1.0, 0.0], fa),
            ([0.0, 1.0], fb),
        ];
        let feasible = |r: [f64; 2]| {
            r[0] >= fa - tol && r[1] >= fb - tol && r[0] <= a + tol && r[1] <= b + tol
                && r[0] + r[1] <= s + tol
        };
        let mut verts: Vec<[f64; 2]> = Vec::with_capacity(10);
        for i in 0..5 {
            for j in i + 1..5 {
                let (n1, c1) = lines[i];
                let (n2, c2) = lines[j];
                let det = n1[0] * n2[1] - n1[1] * n2[0];
                if det == 0.0 {
                    continue;
                }
                let r = [
                    (c1 * n2[1] - n1[1] * c2) / det,
                    (n1[0] * c2 - c1 * n2[0]) / det,
                ];
                if feasible(r) {
                    // Clip rounding so the point lies inside the region.
                    let ra = r[0].clamp(fa, a);
                    let rb = r[1].clamp(fb, b).min((s - ra).max(fb));
                    verts.push([ra, rb]);
                }
            }
        }
        if verts.is_empty() {
            return None;
        }
        let value = |r: &[f64; 2]| weights[0] * r[0] + weights[1] * r[1];
        let best = verts.iter().map(value).fold(f64::NEG_INFINITY, f64::max);
        let vtol = 1e-12 * (1.0 + best.abs());
        let face: Vec<[f64; 2]> =
            verts.into_iter().filter(|r| value(r) >= best - vtol).collect();
        // The optimal face is a segment; its endpoints are extreme in R_A.
        let lo = *face.iter().min_by(|p, q| p[0].total_cmp(&q[0])).unwrap();
        let hi = *face.iter().max_by(|p, q| p[0].total_cmp(&q[0])).unwrap();
        Some(max_min_on_segment(lo, hi))
    }
}

fn max_min_on_segment(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    let dp = p[0] - p[1];
    let dq = q[0] - q[1];
    if dp == dq || dp.signum() == dq.signum() && dp != 0.0 && dq != 0.0 {
        return if p[0].min(p[1]) >= q[0].min(q[1]) { p } else { q };
    }
    // R_A = R_B somewhere on the segment.
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Per-user, per-mode rates of an allocation.
///
/// One-way rates are the smaller hop sum. The two-way pair is the
/// `split_weights`-weighted best point of the capacity polytope; when the
/// direct and one-way rates leave a user short of its QoS floor, the split
/// first tries to cover the shortfall and falls back to the unconstrained
/// split if that is impossible.
pub fn evaluate_rates(
    alloc: &Allocation,
    inst: &ProblemInstance,
    split_weights: [f64; 2],
) -> ModeRates {
    rates_from_caps(&SessionCaps::of(alloc, inst), inst.qos(), split_weights)
}

pub fn rates_from_caps(caps: &SessionCaps, qos: [f64; 2], split_weights: [f64; 2]) -> ModeRates {
    let direct = caps.direct;
    let one_way = caps.one_way();
    let region = caps.two_way_region();
    let floors = [
        qos[0] - direct[0] - one_way[0],
        qos[1] - direct[1] - one_way[1],
    ];
    let two_way = region
        .best_point(split_weights, floors)
        .or_else(|| region.best_point(split_weights, [0.0; 2]))
        .unwrap_or([0.0; 2]);
    ModeRates { direct, one_way, two_way }
}

/// Largest violation of the rate-coupling constraints: one-way rates within
/// both hop sums, two-way rates within the MAC and broadcast bounds, and
/// nonnegativity.
pub fn coupling_violation(rates: &ModeRates, caps: &SessionCaps) -> f64 {
    let mut v: f64 = 0.0;
    for k in User::BOTH {
        let i = k.index();
        v = v.max(rates.direct[i] - caps.direct[i]);
        v = v.max(rates.one_way[i] - caps.ow_hop1[i]);
        v = v.max(rates.one_way[i] - caps.ow_hop2[i]);
        v = v.max(rates.two_way[i] - caps.tw_mac[i]);
        v = v.max(rates.two_way[i] - caps.tw_bc[i]);
        v = v.max(-rates.direct[i]).max(-rates.one_way[i]).max(-rates.two_way[i]);
    }
    v.max(rates.two_way[0] + rates.two_way[1] - caps.tw_mac_sum)
}
