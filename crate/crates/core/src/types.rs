//! Domain model shared by the channel generator, the dual solver, the
//! brute-force oracle and the experiment runner.
//!
//! Every type validates its invariants on construction and is immutable
//! afterwards, so values can be shared freely across worker threads.
//! Rates are bits per OFDM symbol (base-2 logarithms); powers are linear
//! with unit noise variance at every receiver.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invariant, Error, Result};

/// `ln 2`, the factor between natural-log and bit rates.
pub const SIGMA: f64 = std::f64::consts::LN_2;

/// `log2(1 + snr)`.
#[inline]
pub fn capacity(snr: f64) -> f64 {
    snr.ln_1p() / SIGMA
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum User {
    A,
    B,
}

impl User {
    pub const BOTH: [User; 2] = [User::A, User::B];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn other(self) -> User {
        match self {
            User::A => User::B,
            User::B => User::A,
        }
    }

    pub fn node(self) -> Node {
        match self {
            User::A => Node::A,
            User::B => Node::B,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Node {
    A,
    B,
    R,
}

impl Node {
    pub const ALL: [Node; 3] = [Node::A, Node::B, Node::R];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Directed link between two of the three nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Link {
    AB,
    BA,
    AR,
    BR,
    RA,
    RB,
}

impl Link {
    pub const ALL: [Link; 6] = [Link::AB, Link::BA, Link::AR, Link::BR, Link::RA, Link::RB];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_node(self) -> Node {
        match self {
            Link::AB | Link::AR => Node::A,
            Link::BA | Link::BR => Node::B,
            Link::RA | Link::RB => Node::R,
        }
    }

    pub fn to_node(self) -> Node {
        match self {
            Link::BA | Link::RA => Node::A,
            Link::AB | Link::RB => Node::B,
            Link::AR | Link::BR => Node::R,
        }
    }

    pub fn reverse(self) -> Link {
        match self {
            Link::AB => Link::BA,
            Link::BA => Link::AB,
            Link::AR => Link::RA,
            Link::RA => Link::AR,
            Link::BR => Link::RB,
            Link::RB => Link::BR,
        }
    }

    /// The link obtained by exchanging the roles of A and B.
    pub fn mirror(self) -> Link {
        match self {
            Link::AB => Link::BA,
            Link::BA => Link::AB,
            Link::AR => Link::BR,
            Link::BR => Link::AR,
            Link::RA => Link::RB,
            Link::RB => Link::RA,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::AB => "AB",
            Link::BA => "BA",
            Link::AR => "AR",
            Link::BR => "BR",
            Link::RA => "RA",
            Link::RB => "RB",
        }
    }

    pub fn from_name(name: &str) -> Option<Link> {
        Link::ALL.into_iter().find(|l| l.name() == name)
    }

    /// Link carrying user `k`'s data directly to the other user.
    pub fn direct(k: User) -> Link {
        match k {
            User::A => Link::AB,
            User::B => Link::BA,
        }
    }

    /// Uplink from user `k` to the relay.
    pub fn uplink(k: User) -> Link {
        match k {
            User::A => Link::AR,
            User::B => Link::BR,
        }
    }

    /// Relay downlink that delivers user `k`'s data to the other user.
    pub fn downlink_for(k: User) -> Link {
        match k {
            User::A => Link::RB,
            User::B => Link::RA,
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Positions of the three nodes on a line, in kilometres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeGeometry {
    pos_a: f64,
    pos_b: f64,
    pos_r: f64,
}

impl NodeGeometry {
    pub fn new(pos_a: f64, pos_b: f64, pos_r: f64) -> Result<Self> {
        if !(pos_a.is_finite() && pos_b.is_finite() && pos_r.is_finite()) {
            return Err(invariant("geometry: positions must be finite"));
        }
        if (pos_a - pos_b).abs() <= 0.0 {
            return Err(invariant("geometry: distance(A, B) > 0"));
        }
        Ok(Self { pos_a, pos_b, pos_r })
    }

    /// A at 0, B at `distance_ab`, R at `fraction * distance_ab`.
    pub fn on_segment(distance_ab: f64, fraction: f64) -> Result<Self> {
        Self::new(0.0, distance_ab, fraction * distance_ab)
    }

    pub fn position(&self, node: Node) -> f64 {
        match node {
            Node::A => self.pos_a,
            Node::B => self.pos_b,
            Node::R => self.pos_r,
        }
    }

    pub fn distance(&self, link: Link) -> f64 {
        (self.position(link.from_node()) - self.position(link.to_node())).abs()
    }
}

/// Squared channel magnitudes `|h|^2` for every directed link and subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    n: usize,
    gains: [Vec<f64>; 6],
}

impl ChannelRealization {
    pub fn new(gains: [Vec<f64>; 6]) -> Result<Self> {
        let n = gains[0].len();
        if n == 0 {
            return Err(invariant("channels: N must be positive"));
        }
        for link in Link::ALL {
            let g = &gains[link.index()];
            if g.len() != n {
                return Err(invariant(format!(
                    "channels: link {link} has {} gains, expected N = {n}",
                    g.len()
                )));
            }
            if g.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(invariant(format!(
                    "channels: link {link} gains must be finite and >= 0"
                )));
            }
        }
        Ok(Self { n, gains })
    }

    /// Same gain on every subcarrier of every link.
    pub fn flat(n: usize, gain: f64) -> Result<Self> {
        Self::new(std::array::from_fn(|_| vec![gain; n]))
    }

    #[inline]
    pub fn n_subcarriers(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn gain(&self, link: Link, n: usize) -> f64 {
        self.gains[link.index()][n]
    }

    pub fn link(&self, link: Link) -> &[f64] {
        &self.gains[link.index()]
    }

    pub fn mean_gain(&self, link: Link) -> f64 {
        self.link(link).iter().sum::<f64>() / self.n as f64
    }

    /// Exchange A and B.
    pub fn mirrored(&self) -> Self {
        Self {
            n: self.n,
            gains: std::array::from_fn(|i| self.gains[Link::ALL[i].mirror().index()].clone()),
        }
    }

    /// Reorder subcarriers: output subcarrier `i` is input subcarrier `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(invariant("permutation length must equal N"));
        }
        Self::new(std::array::from_fn(|l| {
            perm.iter().map(|&j| self.gains[l][j]).collect()
        }))
    }
}

/// One fading frame together with weights, QoS floors and power budgets.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    channels: ChannelRealization,
    weights: [f64; 2],
    qos: [f64; 2],
    budgets: [f64; 3],
}

impl ProblemInstance {
    pub fn new(
        channels: ChannelRealization,
        weights: [f64; 2],
        qos: [f64; 2],
        budgets: [f64; 3],
    ) -> Result<Self> {
        Self { channels, weights, qos, budgets }.validate()
    }

    /// Returns the instance unchanged iff every invariant holds.
    pub fn validate(self) -> Result<Self> {
        // Re-check the channel too, since it may come from a file.
        let channels = ChannelRealization::new(self.channels.gains.clone())?;
        for (node, p) in Node::ALL.iter().zip(self.budgets) {
            if !(p.is_finite() && p > 0.0) {
                return Err(invariant(format!("budget of node {node:?} must be positive")));
            }
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invariant("weights must be finite and >= 0"));
        }
        if self.weights[0] + self.weights[1] <= 0.0 {
            return Err(invariant("weights must not both be zero"));
        }
        if self.qos.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invariant("QoS floors must be finite and >= 0"));
        }
        debug_assert_eq!(channels, self.channels);
        Ok(self)
    }

    pub fn channels(&self) -> &ChannelRealization {
        &self.channels
    }

    pub fn n_subcarriers(&self) -> usize {
        self.channels.n
    }

    pub fn weights(&self) -> [f64; 2] {
        self.weights
    }

    pub fn weight(&self, k: User) -> f64 {
        self.weights[k.index()]
    }

    pub fn qos(&self) -> [f64; 2] {
        self.qos
    }

    pub fn qos_floor(&self, k: User) -> f64 {
        self.qos[k.index()]
    }

    pub fn budgets(&self) -> [f64; 3] {
        self.budgets
    }

    pub fn budget(&self, node: Node) -> f64 {
        self.budgets[node.index()]
    }

    pub fn with_qos(&self, qos: [f64; 2]) -> Result<Self> {
        Self::new(self.channels.clone(), self.weights, qos, self.budgets)
    }

    pub fn with_weights(&self, weights: [f64; 2]) -> Result<Self> {
        Self::new(self.channels.clone(), weights, self.qos, self.budgets)
    }

    /// The same system with users A and B exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            channels: self.channels.mirrored(),
            weights: [self.weights[1], self.weights[0]],
            qos: [self.qos[1], self.qos[0]],
            budgets: [self.budgets[1], self.budgets[0], self.budgets[2]],
        }
    }

    pub fn to_file(&self) -> InstanceFile {
        InstanceFile {
            n: self.channels.n,
            w: self.weights,
            r: self.qos,
            p: self.budgets,
            gains: Link::ALL
                .iter()
                .map(|l| (l.name().to_string(), self.channels.link(*l).to_vec()))
                .collect(),
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        let mut gains: [Option<Vec<f64>>; 6] = Default::default();
        for (name, values) in file.gains {
            let link = Link::from_name(&name)
                .ok_or_else(|| invariant(format!("unknown link name {name:?}")))?;
            gains[link.index()] = Some(values);
        }
        let mut out: [Vec<f64>; 6] = Default::default();
        for link in Link::ALL {
            out[link.index()] = gains[link.index()]
                .take()
                .ok_or_else(|| invariant(format!("missing gains for link {link}")))?;
        }
        let channels = ChannelRealization::new(out)?;
        if channels.n != file.n {
            return Err(invariant(format!(
                "declared n = {} but gain sequences have length {}",
                file.n, channels.n
            )));
        }
        Self::new(channels, file.w, file.r, file.p)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// On-disk layout of a problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub w: [f64; 2],
    pub r: [f64; 2],
    pub p: [f64; 3],
    pub gains: BTreeMap<String, Vec<f64>>,
}

/// Index of each multiplier inside the ten-entry dual vector.
pub mod dual_index {
    pub const LAM_B1_A: usize = 0;
    pub const LAM_B1_B: usize = 1;
    pub const LAM_C1_A: usize = 2;
    pub const LAM_C1_B: usize = 3;
    pub const LAM_AB: usize = 4;
    pub const MU_A: usize = 5;
    pub const MU_B: usize = 6;
    pub const ALPHA_A: usize = 7;
    pub const ALPHA_B: usize = 8;
    pub const ALPHA_R: usize = 9;
    pub const DIM: usize = 10;
}

/// Lagrange multipliers of the relaxed problem.
///
/// Only the ten free multipliers are stored. The second-hop multipliers are
/// pinned by boundedness of the dual function and are derived on demand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPoint {
    lam_b1: [f64; 2],
    lam_c1: [f64; 2],
    lam_ab: f64,
    mu: [f64; 2],
    alpha: [f64; 3],
    weights: [f64; 2],
}

impl DualPoint {
    /// Builds a dual point from the ten-entry vector laid out as in
    /// [`dual_index`].
    pub fn new(values: [f64; dual_index::DIM], weights: [f64; 2]) -> Result<Self> {
        use dual_index::*;
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invariant("dual: all multipliers must be finite and >= 0"));
        }
        let d = Self {
            lam_b1: [values[LAM_B1_A], values[LAM_B1_B]],
            lam_c1: [values[LAM_C1_A], values[LAM_C1_B]],
            lam_ab: values[LAM_AB],
            mu: [values[MU_A], values[MU_B]],
            alpha: [values[ALPHA_A], values[ALPHA_B], values[ALPHA_R]],
            weights,
        };
        for k in User::BOTH {
            if d.lam_b1[k.index()] > d.level(k) {
                return Err(invariant(format!("dual: lam_b1[{k:?}] <= w + mu")));
            }
            if d.lam_c1[k.index()] + d.lam_ab > d.level(k) {
                return Err(invariant(format!("dual: lam_c1[{k:?}] + lam_ab <= w + mu")));
            }
        }
        Ok(d)
    }

    pub fn to_array(&self) -> [f64; dual_index::DIM] {
        [
            self.lam_b1[0],
            self.lam_b1[1],
            self.lam_c1[0],
            self.lam_c1[1],
            self.lam_ab,
            self.mu[0],
            self.mu[1],
            self.alpha[0],
            self.alpha[1],
            self.alpha[2],
        ]
    }

    pub fn weights(&self) -> [f64; 2] {
        self.weights
    }

    /// `w_k + mu_k`, the QoS-adjusted weight of user `k`.
    #[inline]
    pub fn level(&self, k: User) -> f64 {
        self.weights[k.index()] + self.mu[k.index()]
    }

    #[inline]
    pub fn lam_b1(&self, k: User) -> f64 {
        self.lam_b1[k.index()]
    }

    #[inline]
    pub fn lam_b2(&self, k: User) -> f64 {
        self.level(k) - self.lam_b1[k.index()]
    }

    #[inline]
    pub fn lam_c1(&self, k: User) -> f64 {
        self.lam_c1[k.index()]
    }

    #[inline]
    pub fn lam_ab(&self) -> f64 {
        self.lam_ab
    }

    /// Second-hop two-way multiplier, also written xi_k.
    #[inline]
    pub fn lam_c2(&self, k: User) -> f64 {
        self.level(k) - (self.lam_c1[k.index()] + self.lam_ab)
    }

    #[inline]
    pub fn xi(&self, k: User) -> f64 {
        self.lam_c2(k)
    }

    #[inline]
    pub fn mu(&self, k: User) -> f64 {
        self.mu[k.index()]
    }

    #[inline]
    pub fn alpha(&self, node: Node) -> f64 {
        self.alpha[node.index()]
    }
}

/// Transmission mode of a session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Direct,
    OneWay,
    TwoWay,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Direct, Mode::OneWay, Mode::TwoWay];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// What a subcarrier carries. The first eight variants are the assignable
/// roles in their fixed tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    DirectA,
    DirectB,
    OneWayHop1A,
    OneWayHop1B,
    OneWayHop2A,
    OneWayHop2B,
    TwoWayMac,
    TwoWayBc,
    Idle,
}

impl Role {
    /// Assignable roles in tie-break order.
    pub const ACTIVE: [Role; 8] = [
        Role::DirectA,
        Role::DirectB,
        Role::OneWayHop1A,
        Role::OneWayHop1B,
        Role::OneWayHop2A,
        Role::OneWayHop2B,
        Role::TwoWayMac,
        Role::TwoWayBc,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn mode(self) -> Option<Mode> {
        match self {
            Role::DirectA | Role::DirectB => Some(Mode::Direct),
            Role::OneWayHop1A | Role::OneWayHop1B | Role::OneWayHop2A | Role::OneWayHop2B => {
                Some(Mode::OneWay)
            }
            Role::TwoWayMac | Role::TwoWayBc => Some(Mode::TwoWay),
            Role::Idle => None,
        }
    }

    pub fn mirror(self) -> Role {
        match self {
            Role::DirectA => Role::DirectB,
            Role::DirectB => Role::DirectA,
            Role::OneWayHop1A => Role::OneWayHop1B,
            Role::OneWayHop1B => Role::OneWayHop1A,
            Role::OneWayHop2A => Role::OneWayHop2B,
            Role::OneWayHop2B => Role::OneWayHop2A,
            r => r,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Role::DirectA => "DT-A",
            Role::DirectB => "DT-B",
            Role::OneWayHop1A => "OW1-A",
            Role::OneWayHop1B => "OW1-B",
            Role::OneWayHop2A => "OW2-A",
            Role::OneWayHop2B => "OW2-B",
            Role::TwoWayMac => "TW1",
            Role::TwoWayBc => "TW2",
            Role::Idle => "IDLE",
        }
    }
}

/// Set of roles a scheme may use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoleMask(u8);

impl RoleMask {
    pub const ALL: RoleMask = RoleMask(0xff);
    pub const DIRECT_ONLY: RoleMask = RoleMask(0b0000_0011);
    pub const NO_TWO_WAY: RoleMask = RoleMask(0b0011_1111);
    pub const NONE: RoleMask = RoleMask(0);

    pub fn only(role: Role) -> RoleMask {
        match role {
            Role::Idle => RoleMask::NONE,
            r => RoleMask(1 << r.index()),
        }
    }

    #[inline]
    pub fn allows(self, role: Role) -> bool {
        role != Role::Idle && self.0 & (1 << role.index()) != 0
    }

    pub fn union(self, other: RoleMask) -> RoleMask {
        RoleMask(self.0 | other.0)
    }
}

/// Role and transmit power(s) on one subcarrier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SubcarrierDecision {
    Idle,
    Direct { user: User, power: f64 },
    /// User `user` transmits its own data to the relay.
    OneWayHop1 { user: User, power: f64 },
    /// The relay forwards `user`'s data to the other user.
    OneWayHop2 { user: User, power: f64 },
    TwoWayMac { power_a: f64, power_b: f64 },
    TwoWayBc { power: f64 },
}

impl SubcarrierDecision {
    pub fn role(&self) -> Role {
        match *self {
            SubcarrierDecision::Idle => Role::Idle,
            SubcarrierDecision::Direct { user: User::A, .. } => Role::DirectA,
            SubcarrierDecision::Direct { user: User::B, .. } => Role::DirectB,
            SubcarrierDecision::OneWayHop1 { user: User::A, .. } => Role::OneWayHop1A,
            SubcarrierDecision::OneWayHop1 { user: User::B, .. } => Role::OneWayHop1B,
            SubcarrierDecision::OneWayHop2 { user: User::A, .. } => Role::OneWayHop2A,
            SubcarrierDecision::OneWayHop2 { user: User::B, .. } => Role::OneWayHop2B,
            SubcarrierDecision::TwoWayMac { .. } => Role::TwoWayMac,
            SubcarrierDecision::TwoWayBc { .. } => Role::TwoWayBc,
        }
    }

    /// Builds a decision for `role`; `powers` holds one value, or the
    /// (A, B) pair for the MAC phase.
    pub fn with_role(role: Role, powers: [f64; 2]) -> Result<Self> {
        let [p, q] = powers;
        if !(p.is_finite() && q.is_finite() && p >= 0.0 && q >= 0.0) {
            return Err(invariant("decision: powers must be finite and >= 0"));
        }
        Ok(match role {
            Role::Idle => SubcarrierDecision::Idle,
            Role::DirectA => SubcarrierDecision::Direct { user: User::A, power: p },
            Role::DirectB => SubcarrierDecision::Direct { user: User::B, power: p },
            Role::OneWayHop1A => SubcarrierDecision::OneWayHop1 { user: User::A, power: p },
            Role::OneWayHop1B => SubcarrierDecision::OneWayHop1 { user: User::B, power: p },
            Role::OneWayHop2A => SubcarrierDecision::OneWayHop2 { user: User::A, power: p },
            Role::OneWayHop2B => SubcarrierDecision::OneWayHop2 { user: User::B, power: p },
            Role::TwoWayMac => SubcarrierDecision::TwoWayMac { power_a: p, power_b: q },
            Role::TwoWayBc => SubcarrierDecision::TwoWayBc { power: p },
        })
    }

    /// Power each node spends on this subcarrier, indexed by [`Node`].
    pub fn node_powers(&self) -> [f64; 3] {
        match *self {
            SubcarrierDecision::Idle => [0.0; 3],
            SubcarrierDecision::Direct { user, power }
            | SubcarrierDecision::OneWayHop1 { user, power } => {
                let mut out = [0.0; 3];
                out[user.index()] = power;
                out
            }
            SubcarrierDecision::OneWayHop2 { power, .. }
            | SubcarrierDecision::TwoWayBc { power } => [0.0, 0.0, power],
            SubcarrierDecision::TwoWayMac { power_a, power_b } => [power_a, power_b, 0.0],
        }
    }

    pub fn total_power(&self) -> f64 {
        self.node_powers().iter().sum()
    }

    /// Multiplies every power charged to `node` by `factor`.
    pub fn scaled(&self, node: Node, factor: f64) -> Self {
        let s = |p: f64, owner: Node| if owner == node { p * factor } else { p };
        match *self {
            SubcarrierDecision::Idle => SubcarrierDecision::Idle,
            SubcarrierDecision::Direct { user, power } => SubcarrierDecision::Direct {
                user,
                power: s(power, user.node()),
            },
            SubcarrierDecision::OneWayHop1 { user, power } => SubcarrierDecision::OneWayHop1 {
                user,
                power: s(power, user.node()),
            },
            SubcarrierDecision::OneWayHop2 { user, power } => SubcarrierDecision::OneWayHop2 {
                user,
                power: s(power, Node::R),
            },
            SubcarrierDecision::TwoWayMac { power_a, power_b } => SubcarrierDecision::TwoWayMac {
                power_a: s(power_a, Node::A),
                power_b: s(power_b, Node::B),
            },
            SubcarrierDecision::TwoWayBc { power } => SubcarrierDecision::TwoWayBc {
                power: s(power, Node::R),
            },
        }
    }

    pub fn mirrored(&self) -> Self {
        match *self {
            SubcarrierDecision::Direct { user, power } => SubcarrierDecision::Direct {
                user: user.other(),
                power,
            },
            SubcarrierDecision::OneWayHop1 { user, power } => SubcarrierDecision::OneWayHop1 {
                user: user.other(),
                power,
            },
            SubcarrierDecision::OneWayHop2 { user, power } => SubcarrierDecision::OneWayHop2 {
                user: user.other(),
                power,
            },
            SubcarrierDecision::TwoWayMac { power_a, power_b } => SubcarrierDecision::TwoWayMac {
                power_a: power_b,
                power_b: power_a,
            },
            d => d,
        }
    }

    /// True when the subcarrier actually radiates power.
    pub fn is_occupied(&self) -> bool {
        self.total_power() > 0.0
    }
}

/// Per-subcarrier decisions with the power each node consumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    decisions: Vec<SubcarrierDecision>,
    node_power_used: [f64; 3],
}

impl Allocation {
    pub fn new(decisions: Vec<SubcarrierDecision>) -> Result<Self> {
        for d in &decisions {
            if d.node_powers().iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(invariant("allocation: powers must be finite and >= 0"));
            }
        }
        let node_power_used = Self::sum_powers(&decisions);
        Ok(Self { decisions, node_power_used })
    }

    fn sum_powers(decisions: &[SubcarrierDecision]) -> [f64; 3] {
        let mut used = [0.0; 3];
        for d in decisions {
            let p = d.node_powers();
            for i in 0..3 {
                used[i] += p[i];
            }
        }
        used
    }

    pub fn idle(n: usize) -> Self {
        Self {
            decisions: vec![SubcarrierDecision::Idle; n],
            node_power_used: [0.0; 3],
        }
    }

    pub fn decisions(&self) -> &[SubcarrierDecision] {
        &self.decisions
    }

    pub fn roles(&self) -> Vec<Role> {
        self.decisions.iter().map(|d| d.role()).collect()
    }

    pub fn node_power_used(&self) -> [f64; 3] {
        self.node_power_used
    }

    pub fn power_used(&self, node: Node) -> f64 {
        self.node_power_used[node.index()]
    }

    /// Recomputes the per-node sums from the decisions.
    pub fn recomputed_power_used(&self) -> [f64; 3] {
        Self::sum_powers(&self.decisions)
    }

    pub fn within_budgets(&self, inst: &ProblemInstance) -> bool {
        Node::ALL
            .iter()
            .all(|&node| self.power_used(node) <= inst.budget(node))
    }

    /// Number of occupied subcarriers per mode plus the idle count
    /// (`[direct, one-way, two-way, idle]`).
    pub fn occupancy(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for d in &self.decisions {
            match (d.is_occupied(), d.role().mode()) {
                (true, Some(mode)) => counts[mode.index()] += 1,
                _ => counts[3] += 1,
            }
        }
        counts
    }

    pub fn mirrored(&self) -> Self {
        let decisions: Vec<_> = self.decisions.iter().map(|d| d.mirrored()).collect();
        let node_power_used = Self::sum_powers(&decisions);
        Self { decisions, node_power_used }
    }
}

/// Per-user rates split by transmission mode, indexed `[user]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeRates {
    pub direct: [f64; 2],
    pub one_way: [f64; 2],
    pub two_way: [f64; 2],
}

impl ModeRates {
    pub fn user_rate(&self, k: User) -> f64 {
        let i = k.index();
        self.direct[i] + self.one_way[i] + self.two_way[i]
    }

    pub fn mode(&self, mode: Mode) -> [f64; 2] {
        match mode {
            Mode::Direct => self.direct,
            Mode::OneWay => self.one_way,
            Mode::TwoWay => self.two_way,
        }
    }

    pub fn mode_total(&self, mode: Mode) -> f64 {
        let r = self.mode(mode);
        r[0] + r[1]
    }

    pub fn sum_rate(&self) -> f64 {
        self.user_rate(User::A) + self.user_rate(User::B)
    }

    pub fn weighted(&self, weights: [f64; 2]) -> f64 {
        weights[0] * self.user_rate(User::A) + weights[1] * self.user_rate(User::B)
    }
}

/// Why the dual iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// `sqrt(g' P g)` fell below the stopping tolerance.
    Converged,
    IterationCap,
    /// A feasible dual point certified that the QoS floors cannot be met.
    QosInfeasible,
    MuCeiling,
    DegenerateCut,
}

/// Result of one solver run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    /// Reported rates; zero for both users on outage.
    pub rate_a: f64,
    pub rate_b: f64,
    pub per_mode_rates: ModeRates,
    /// Weighted sum of the reported rates.
    pub objective: f64,
    pub outage: bool,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Best (smallest) dual objective seen at a dual-feasible point.
    pub dual_value: f64,
    /// `dual_value` minus the recovered primal objective; `None` on outage.
    pub gap_estimate: Option<f64>,
    pub allocation: Allocation,
    /// Rates of the recovered allocation before outage zeroing.
    pub recovered_rates: ModeRates,
    pub recovered_objective: f64,
    /// Dual point at which the best dual value was attained.
    pub dual_point: Option<DualPoint>,
    /// Largest deviation of an inner power from its brute-force maximizer,
    /// when the solver ran with oracle checks enabled.
    pub oracle_max_deviation: Option<f64>,
}

impl SolveOutcome {
    pub fn sum_rate(&self) -> f64 {
        self.rate_a + self.rate_b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_of_one_is_one_bit() {
        assert!((capacity(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(capacity(0.0), 0.0);
    }

    #[test]
    fn geometry_rejects_coincident_users() {
        assert!(NodeGeometry::new(1.0, 1.0, 0.5).is_err());
        let g = NodeGeometry::on_segment(2.0, 0.25).unwrap();
        assert_eq!(g.distance(Link::AR), 0.5);
        assert_eq!(g.distance(Link::RB), 1.5);
    }

    #[test]
    fn instance_invariants() {
        let ch = ChannelRealization::flat(2, 1.0).unwrap();
        assert!(ProblemInstance::new(ch.clone(), [1.0, 1.0], [0.0, 0.0], [0.0, 1.0, 1.0]).is_err());
        assert!(ProblemInstance::new(ch.clone(), [0.0, 0.0], [0.0, 0.0], [1.0; 3]).is_err());
        assert!(ProblemInstance::new(ch.clone(), [1.0, 1.0], [-1.0, 0.0], [1.0; 3]).is_err());
        assert!(ChannelRealization::new(std::array::from_fn(|i| vec![1.0; 2 + (i == 3) as usize])).is_err());
        assert!(ChannelRealization::new(std::array::from_fn(|_| vec![-1.0, 1.0])).is_err());
    }

    #[test]
    fn dual_point_feasibility() {
        let mut v = [0.0; dual_index::DIM];
        v[dual_index::LAM_B1_A] = 1.5;
        assert!(DualPoint::new(v, [1.0, 1.0]).is_err());
        v[dual_index::MU_A] = 0.5;
        let d = DualPoint::new(v, [1.0, 1.0]).unwrap();
        assert_eq!(d.lam_b2(User::A), 0.0);
        assert_eq!(d.to_array(), v);
        v[dual_index::ALPHA_R] = -1.0;
        assert!(DualPoint::new(v, [1.0, 1.0]).is_err());
    }

    #[test]
    fn allocation_tracks_power_and_occupancy() {
        let d = vec![
            SubcarrierDecision::with_role(Role::TwoWayMac, [1.0, 2.0]).unwrap(),
            SubcarrierDecision::with_role(Role::TwoWayBc, [3.0, 0.0]).unwrap(),
            SubcarrierDecision::with_role(Role::DirectB, [0.5, 0.0]).unwrap(),
            SubcarrierDecision::Idle,
        ];
        let a = Allocation::new(d).unwrap();
        assert_eq!(a.node_power_used(), [1.0, 2.5, 3.0]);
        assert_eq!(a.occupancy(), [1, 0, 2, 1]);
        let m = a.mirrored();
        assert_eq!(m.node_power_used(), [2.5, 1.0, 3.0]);
        assert_eq!(m.roles()[2], Role::DirectA);
    }
}
