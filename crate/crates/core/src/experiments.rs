//! Monte Carlo scenario runner: benchmark schemes, parameter sweeps and
//! CSV tables.
//!
//! A sweep cell is one `(snr, relay position, qos point)` combination.
//! Every trial of a cell draws its own channel realization from a seed
//! derived from the master seed, the relay position and the trial index, so
//! the same realization is reused across SNR values, QoS points and
//! schemes, and adding grid points never perturbs existing cells.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    default_taps, generate_channels, ChannelConfig, Tap, TapFading, DEFAULT_PATHLOSS_EXPONENT,
    DEFAULT_USER_DISTANCE_KM,
};
use crate::error::{Error, Result};
use crate::oracle::{exhaustive_solve, pairing_baseline, set_basis_best};
use crate::solver::{coupling_violation, solve, SessionCaps, SolverOptions};
use crate::types::{Mode, ModeRates, NodeGeometry, ProblemInstance, RoleMask, SolveOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Direct, one-way and two-way relaying.
    Proposed,
    /// Direct transmission only.
    Bm1,
    /// Direct transmission and one-way relaying.
    Bm2,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::Bm1, Scheme::Bm2];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Bm1 => "bm1",
            Scheme::Bm2 => "bm2",
        }
    }

    pub fn roles(self) -> RoleMask {
        match self {
            Scheme::Proposed => RoleMask::ALL,
            Scheme::Bm1 => RoleMask::DIRECT_ONLY,
            Scheme::Bm2 => RoleMask::NO_TWO_WAY,
        }
    }
}

/// Runs the solver restricted to the roles of `scheme`.
pub fn run_scheme(
    inst: &ProblemInstance,
    scheme: Scheme,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    solve(inst, &opts.clone().with_roles(scheme.roles()))
}

/// Channel parameters shared by every cell of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaseChannel {
    pub distance_km: f64,
    pub pathloss_exponent: f64,
    pub taps: Vec<Tap>,
    pub reciprocal: bool,
    pub shadowing_db: f64,
    pub fading: TapFading,
}

impl Default for BaseChannel {
    fn default() -> Self {
        Self {
            distance_km: DEFAULT_USER_DISTANCE_KM,
            pathloss_exponent: DEFAULT_PATHLOSS_EXPONENT,
            taps: default_taps(),
            reciprocal: true,
            shadowing_db: 0.0,
            fading: TapFading::Rayleigh,
        }
    }
}

/// One scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub schemes: Vec<Scheme>,
    /// Per-node power budget in dB over unit noise.
    pub snr_grid: Vec<f64>,
    pub n_trials: usize,
    /// QoS points `(r_a, r_b)`, bits per OFDM symbol.
    pub qos: Vec<[f64; 2]>,
    /// Relay positions as fractions of the A-B distance, measured from A.
    pub relay_positions: Vec<f64>,
    pub n_subcarriers: usize,
    pub weights: [f64; 2],
    pub channel: BaseChannel,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    pub solver: SolverOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            snr_grid: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            n_trials: 50,
            qos: vec![[5.0, 5.0]],
            relay_positions: vec![0.5],
            n_subcarriers: 256,
            weights: [1.0, 1.0],
            channel: BaseChannel::default(),
            master_seed: 1,
            output: None,
            solver: SolverOptions::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if self.n_subcarriers == 0 {
            return bad("n_subcarriers must be at least 1".into());
        }
        if let Some(s) = self.snr_grid.iter().find(|s| !s.is_finite()) {
            return bad(format!("snr value {s} is not finite"));
        }
        if let Some(p) = self.relay_positions.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return bad(format!("relay position {p} outside (0, 1)"));
        }
        if let Some(q) = self.qos.iter().find(|q| !q.iter().all(|r| r.is_finite() && *r >= 0.0)) {
            return bad(format!("qos point {q:?} must be finite and nonnegative"));
        }
        if !self.weights.iter().all(|w| w.is_finite() && *w > 0.0) {
            return bad(format!("weights {:?} must be positive", self.weights));
        }
        if !(self.channel.distance_km > 0.0) {
            return Err(Error::NonPositiveDistance(self.channel.distance_km));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Channel draw for a relay position and trial.
    pub fn channel_config(&self, relay_pos: f64, trial: usize) -> Result<ChannelConfig> {
        let cfg = ChannelConfig {
            geometry: NodeGeometry::on_segment(self.channel.distance_km, relay_pos)?,
            n_subcarriers: self.n_subcarriers,
            pathloss_exponent: self.channel.pathloss_exponent,
            taps: self.channel.taps.clone(),
            seed: trial_seed(self.master_seed, relay_pos, trial),
            reciprocal: self.channel.reciprocal,
            shadowing_db: self.channel.shadowing_db,
            fading: self.channel.fading,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Problem instance of one trial; the SNR sets every node's budget.
    pub fn instance(&self, snr_db: f64, relay_pos: f64, qos: [f64; 2], trial: usize) -> Result<ProblemInstance> {
        let ch = generate_channels(&self.channel_config(relay_pos, trial)?)?;
        ProblemInstance::new(ch, self.weights, qos, [db_to_linear(snr_db); 3])
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed of a trial, independent of platform and run order.
pub fn trial_seed(master: u64, relay_pos: f64, trial: usize) -> u64 {
    let mut h = mix(master ^ 0x9e37_79b9_7f4a_7c15);
    for part in [relay_pos.to_bits(), trial as u64] {
        h = mix(h.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ part);
    }
    h
}

/// Cell coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub relay_pos: f64,
    pub qos: [f64; 2],
}

impl CellKey {
    fn sort_key(&self) -> (Scheme, u64, u64, u64, u64) {
        let ord = |x: f64| {
            let b = x.to_bits();
            if x.is_sign_negative() { !b } else { b | (1 << 63) }
        };
        (self.scheme, ord(self.snr_db), ord(self.relay_pos), ord(self.qos[0]), ord(self.qos[1]))
    }
}

/// Outcome summary of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub key: CellKey,
    pub trial: usize,
    pub seed: u64,
    /// `None` when the trial failed with an error.
    pub result: Option<TrialResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub rates: ModeRates,
    pub outage: bool,
    /// `[direct, one-way, two-way, idle]` subcarrier counts.
    pub occupancy: [usize; 4],
    pub iterations: usize,
    pub converged: bool,
    pub gap: Option<f64>,
    /// Largest node power minus budget (at most zero when feasible).
    pub budget_excess: f64,
    /// Largest rate-coupling violation of the reported rates.
    pub coupling_violation: f64,
}

impl TrialResult {
    fn from_outcome(out: &SolveOutcome, inst: &ProblemInstance) -> Self {
        let used = out.allocation.recomputed_power_used();
        let budget_excess = (0..3)
            .map(|i| used[i] - inst.budgets()[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let coupling = if out.outage {
            0.0
        } else {
            coupling_violation(&out.per_mode_rates, &SessionCaps::of(&out.allocation, inst))
        };
        Self {
            rates: out.per_mode_rates,
            outage: out.outage,
            occupancy: out.allocation.occupancy(),
            iterations: out.iterations,
            converged: out.converged,
            gap: out.gap_estimate,
            budget_excess,
            coupling_violation: coupling,
        }
    }
}

/// Every cell of the scenario, one entry per scheme.
pub fn cells(cfg: &ScenarioConfig) -> Vec<CellKey> {
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        for &snr_db in &cfg.snr_grid {
            for &relay_pos in &cfg.relay_positions {
                for &qos in &cfg.qos {
                    out.push(CellKey { scheme, snr_db, relay_pos, qos });
                }
            }
        }
    }
    out
}

/// Runs every trial of every cell; records come back sorted by cell and
/// trial regardless of scheduling.
pub fn run_trials(cfg: &ScenarioConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let jobs: Vec<(CellKey, usize)> = cells(cfg)
        .into_iter()
        .flat_map(|k| (0..cfg.n_trials).map(move |t| (k, t)))
        .collect();
    let mut records: Vec<TrialRecord> = jobs
        .into_par_iter()
        .map(|(key, trial)| {
            let seed = trial_seed(cfg.master_seed, key.relay_pos, trial);
            let run = cfg
                .instance(key.snr_db, key.relay_pos, key.qos, trial)
                .and_then(|inst| {
                    run_scheme(&inst, key.scheme, &cfg.solver)
                        .map(|out| TrialResult::from_outcome(&out, &inst))
                });
            let (result, error) = match run {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            TrialRecord { key, trial, seed, result, error }
        })
        .collect();
    records.sort_by(|a, b| a.key.sort_key().cmp(&b.key.sort_key()).then(a.trial.cmp(&b.trial)));
    Ok(records)
}

/// Per-cell averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub key: CellKey,
    pub trials: usize,
    pub failed: usize,
    /// Mean sum rate, outage trials counted as zero.
    pub mean_sum_rate: f64,
    /// Mean sum rate over trials without outage.
    pub mean_sum_rate_no_outage: f64,
    pub outage_frac: f64,
    pub mean_rate: [f64; 2],
    /// Mean occupied subcarriers per mode over trials without outage,
    /// `[direct, one-way, two-way, idle]`.
    pub occupancy: [f64; 4],
    /// Fraction of the total throughput carried by each mode.
    pub share: [f64; 3],
    /// Mean per-user rate of each mode, `[mode][user]`.
    pub mode_rates: [[f64; 2]; 3],
    pub mean_iterations: f64,
    pub converged_frac: f64,
    pub mean_gap: Option<f64>,
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Aggregates the records of one cell.
pub fn summarize(key: CellKey, records: &[&TrialRecord]) -> CellSummary {
    let ok: Vec<&TrialResult> = records.iter().filter_map(|r| r.result.as_ref()).collect();
    let served: Vec<&&TrialResult> = ok.iter().filter(|r| !r.outage).collect();
    let n = ok.len();
    let mut mode_sum = [[0.0; 2]; 3];
    for r in &ok {
        for m in Mode::ALL {
            let v = r.rates.mode(m);
            mode_sum[m.index()][0] += v[0];
            mode_sum[m.index()][1] += v[1];
        }
    }
    let total: f64 = mode_sum.iter().map(|v| v[0] + v[1]).sum();
    let share = if total > 0.0 {
        mode_sum.map(|v| (v[0] + v[1]) / total)
    } else {
        [0.0; 3]
    };
    let sum_rate: f64 = ok.iter().map(|r| r.rates.sum_rate()).sum();
    let mut occupancy = [0.0; 4];
    for r in &served {
        for (o, &c) in occupancy.iter_mut().zip(&r.occupancy) {
            *o += c as f64;
        }
    }
    let gaps: Vec<f64> = served.iter().filter_map(|r| r.gap).collect();
    CellSummary {
        key,
        trials: records.len(),
        failed: records.len() - n,
        mean_sum_rate: mean(sum_rate, n),
        mean_sum_rate_no_outage: mean(served.iter().map(|r| r.rates.sum_rate()).sum(), served.len()),
        outage_frac: mean(ok.iter().filter(|r| r.outage).count() as f64, n),
        mean_rate: [
            mean(mode_sum.iter().map(|v| v[0]).sum(), n),
            mean(mode_sum.iter().map(|v| v[1]).sum(), n),
        ],
        occupancy: occupancy.map(|o| mean(o, served.len())),
        share,
        mode_rates: mode_sum.map(|v| [mean(v[0], n), mean(v[1], n)]),
        mean_iterations: mean(ok.iter().map(|r| r.iterations as f64).sum(), n),
        converged_frac: mean(ok.iter().filter(|r| r.converged).count() as f64, n),
        mean_gap: (!gaps.is_empty()).then(|| mean(gaps.iter().sum(), gaps.len())),
    }
}

/// Groups sorted records by cell.
pub fn summarize_all(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < records.len() {
        let key = records[start].key;
        let end = records[start..]
            .iter()
            .position(|r| r.key != key)
            .map_or(records.len(), |p| start + p);
        let group: Vec<&TrialRecord> = records[start..end].iter().collect();
        out.push(summarize(key, &group));
        start = end;
    }
    out
}

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Text(String),
    Int(u64),
    Float(f64),
    Missing,
}

impl Field {
    fn render(&self) -> String {
        match self {
            Field::Text(s) => s.clone(),
            Field::Int(i) => i.to_string(),
            Field::Float(x) => format_sig9(*x),
            Field::Missing => String::new(),
        }
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Float(x)
    }
}

impl From<usize> for Field {
    fn from(x: usize) -> Self {
        Field::Int(x as u64)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}

impl From<Option<f64>> for Field {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Field::Missing, Field::Float)
    }
}

/// Shortest decimal form of `x` rounded to 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    // Avoid "-0" in the output.
    if rounded == 0.0 {
        return "0".into();
    }
    rounded.to_string()
}

/// Header plus rows, ready for CSV emission.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Field>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Field>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Field::render))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Writes `table` to `path`, creating parent directories.
pub fn emit_csv(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let text = table.to_csv_string()?;
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    Ok(())
}

pub const SWEEP_COLUMNS: [&str; 28] = [
    "scheme",
    "snr_db",
    "relay_pos",
    "r_a",
    "r_b",
    "trials",
    "failed",
    "mean_sum_rate",
    "mean_sum_rate_no_outage",
    "outage_frac",
    "mean_rate_a",
    "mean_rate_b",
    "occ_direct",
    "occ_one_way",
    "occ_two_way",
    "occ_idle",
    "share_direct",
    "share_one_way",
    "share_two_way",
    "ra_direct",
    "rb_direct",
    "ra_one_way",
    "rb_one_way",
    "ra_two_way",
    "rb_two_way",
    "mean_iterations",
    "converged_frac",
    "mean_gap",
];

pub fn sweep_table(summaries: &[CellSummary]) -> Table {
    let mut t = Table::new(&SWEEP_COLUMNS);
    for s in summaries {
        let k = &s.key;
        let mut row: Vec<Field> = vec![
            k.scheme.name().into(),
            k.snr_db.into(),
            k.relay_pos.into(),
            k.qos[0].into(),
            k.qos[1].into(),
            s.trials.into(),
            s.failed.into(),
            s.mean_sum_rate.into(),
            s.mean_sum_rate_no_outage.into(),
            s.outage_frac.into(),
            s.mean_rate[0].into(),
            s.mean_rate[1].into(),
        ];
        row.extend(s.occupancy.iter().map(|&x| Field::from(x)));
        row.extend(s.share.iter().map(|&x| Field::from(x)));
        for m in s.mode_rates {
            row.extend([Field::from(m[0]), Field::from(m[1])]);
        }
        row.extend([s.mean_iterations.into(), s.converged_frac.into(), s.mean_gap.into()]);
        t.push(row);
    }
    t
}

pub const OUTAGE_COLUMNS: [&str; 8] =
    ["scheme", "snr_db", "relay_pos", "r_a", "r_b", "trials", "failed", "outage_frac"];

pub fn outage_table(summaries: &[CellSummary]) -> Table {
    let mut t = Table::new(&OUTAGE_COLUMNS);
    for s in summaries {
        let k = &s.key;
        t.push(vec![
            k.scheme.name().into(),
            k.snr_db.into(),
            k.relay_pos.into(),
            k.qos[0].into(),
            k.qos[1].into(),
            s.trials.into(),
            s.failed.into(),
            s.outage_frac.into(),
        ]);
    }
    t
}

/// Runs the scenario and aggregates it per cell.
pub fn sweep(cfg: &ScenarioConfig) -> Result<Vec<CellSummary>> {
    Ok(summarize_all(&run_trials(cfg)?))
}

/// Set-basis versus pairing comparison of one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionTrial {
    pub snr_db: f64,
    pub relay_pos: f64,
    pub trial: usize,
    pub set_basis: f64,
    pub pairing: f64,
}

/// Equal-power two-way sum rates of the best subcarrier-set partition and
/// the best 1-to-1 pairing for every trial, at the scenario weights and
/// zero QoS.
pub fn region_trials(cfg: &ScenarioConfig) -> Result<Vec<RegionTrial>> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &snr_db in &cfg.snr_grid {
        for &relay_pos in &cfg.relay_positions {
            for trial in 0..cfg.n_trials {
                jobs.push((snr_db, relay_pos, trial));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(snr_db, relay_pos, trial)| {
            let inst = cfg.instance(snr_db, relay_pos, [0.0, 0.0], trial)?;
            Ok(RegionTrial {
                snr_db,
                relay_pos,
                trial,
                set_basis: set_basis_best(&inst, true)?.value,
                pairing: pairing_baseline(&inst, true)?.value,
            })
        })
        .collect()
}

pub const REGION_COLUMNS: [&str; 8] = [
    "snr_db",
    "relay_pos",
    "trials",
    "mean_set_basis",
    "mean_pairing",
    "gain",
    "min_margin",
    "containment_violations",
];

/// Relative tolerance for the per-realization containment check.
pub const CONTAINMENT_RTOL: f64 = 1e-9;

/// One row per `(snr, relay position)`; `gain` is the ratio of the means
/// minus one and `min_margin` the smallest `set_basis - pairing`.
pub fn region_table(trials: &[RegionTrial]) -> Table {
    let mut t = Table::new(&REGION_COLUMNS);
    let mut start = 0;
    while start < trials.len() {
        let (snr, pos) = (trials[start].snr_db, trials[start].relay_pos);
        let end = trials[start..]
            .iter()
            .position(|r| r.snr_db != snr || r.relay_pos != pos)
            .map_or(trials.len(), |p| start + p);
        let g = &trials[start..end];
        let sb: f64 = g.iter().map(|r| r.set_basis).sum();
        let pr: f64 = g.iter().map(|r| r.pairing).sum();
        let margin = g.iter().map(|r| r.set_basis - r.pairing).fold(f64::INFINITY, f64::min);
        let violations = g
            .iter()
            .filter(|r| r.set_basis < r.pairing - CONTAINMENT_RTOL * (1.0 + r.pairing))
            .count();
        t.push(vec![
            snr.into(),
            pos.into(),
            g.len().into(),
            (sb / g.len() as f64).into(),
            (pr / g.len() as f64).into(),
            (sb / pr - 1.0).into(),
            margin.into(),
            violations.into(),
        ]);
        start = end;
    }
    t
}

/// Solver versus exhaustive search on one small instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleTrial {
    pub snr_db: f64,
    pub relay_pos: f64,
    pub trial: usize,
    pub exhaustive: f64,
    pub solver: f64,
    pub dual: f64,
}

impl OracleTrial {
    pub fn ratio(&self) -> f64 {
        if self.exhaustive > 0.0 {
            self.solver / self.exhaustive
        } else {
            1.0
        }
    }
}

/// Runs the full solver and the exhaustive search on every trial at the
/// first QoS point (zero QoS when none is given).
pub fn oracle_trials(cfg: &ScenarioConfig) -> Result<Vec<OracleTrial>> {
    cfg.validate()?;
    let qos = cfg.qos.first().copied().unwrap_or([0.0, 0.0]);
    let mut jobs = Vec::new();
    for &snr_db in &cfg.snr_grid {
        for &relay_pos in &cfg.relay_positions {
            for trial in 0..cfg.n_trials {
                jobs.push((snr_db, relay_pos, trial));
            }
        }
    }
    jobs.into_iter()
        .map(|(snr_db, relay_pos, trial)| {
            let inst = cfg.instance(snr_db, relay_pos, qos, trial)?;
            let ex = exhaustive_solve(&inst)?;
            let out = solve(&inst, &cfg.solver)?;
            Ok(OracleTrial {
                snr_db,
                relay_pos,
                trial,
                exhaustive: ex.objective,
                solver: out.objective,
                dual: out.dual_value,
            })
        })
        .collect()
}

pub const ORACLE_COLUMNS: [&str; 7] =
    ["snr_db", "relay_pos", "trial", "exhaustive", "solver", "dual", "ratio"];

pub fn oracle_table(trials: &[OracleTrial]) -> Table {
    let mut t = Table::new(&ORACLE_COLUMNS);
    for r in trials {
        t.push(vec![
            r.snr_db.into(),
            r.relay_pos.into(),
            r.trial.into(),
            r.exhaustive.into(),
            r.solver.into(),
            r.dual.into(),
            r.ratio().into(),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            snr_grid: vec![10.0],
            n_trials: 2,
            qos: vec![[0.0, 0.0]],
            n_subcarriers: 8,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn sig9_rounds_and_roundtrips() {
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(123456789012.0), "123456789000");
        assert_eq!(format_sig9(-0.0), "0");
        let s = format_sig9(std::f64::consts::PI);
        assert_eq!(format_sig9(s.parse().unwrap()), s);
    }

    #[test]
    fn seeds_depend_on_position_and_trial_only() {
        let s = trial_seed(7, 0.5, 3);
        assert_eq!(s, trial_seed(7, 0.5, 3));
        assert_ne!(s, trial_seed(7, 0.5, 4));
        assert_ne!(s, trial_seed(7, 0.3, 3));
        assert_ne!(s, trial_seed(8, 0.5, 3));
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut c = tiny();
        c.n_trials = 0;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.relay_positions = vec![1.0];
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.snr_grid = vec![f64::NAN];
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_and_single_cell_tables() {
        let t = sweep_table(&[]);
        assert_eq!(t.to_csv_string().unwrap().lines().count(), 1);
        let mut c = tiny();
        c.schemes = vec![Scheme::Proposed];
        let rows = sweep(&c).unwrap();
        assert_eq!(sweep_table(&rows).to_csv_string().unwrap().lines().count(), 2);
    }

    #[test]
    fn bm1_uses_direct_roles_only() {
        let c = tiny();
        let inst = c.instance(20.0, 0.5, [0.0, 0.0], 0).unwrap();
        let out = run_scheme(&inst, Scheme::Bm1, &c.solver).unwrap();
        assert!(out.allocation.roles().iter().all(|r| matches!(r.mode(), Some(Mode::Direct) | None)));
    }

    #[test]
    fn zero_qos_never_outage() {
        let rows = sweep(&tiny()).unwrap();
        assert!(rows.iter().all(|r| r.outage_frac == 0.0 && r.failed == 0));
    }
}
