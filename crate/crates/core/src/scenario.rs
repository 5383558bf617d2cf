//! Scenario configuration: sectioned `key = value` text (TOML tables) with
//! strict validation, documented defaults, and a lossless serialization for
//! archival diffs.
//!
//! Sections: `array`, `channel`, `beamforming`, `cancellation`, `budget`,
//! `users`, `output`. Unknown keys are rejected with the offending section
//! and line; every default applied during parsing is echoed back so run
//! logs record the full effective configuration.

use serde::Deserialize;

use crate::beamforming::{PhaseQuantizer, PhaseResolution};
use crate::cancellation::{BfcStrategy, RankRule};
use crate::error::{Error, Result};
use crate::link::LinkBudget;
use crate::select::SelectionPolicy;

// ---------------------------------------------------------------------------
// Raw (all-optional) layer, exactly what the file may contain
// ---------------------------------------------------------------------------

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    array: Option<RawArray>,
    channel: Option<RawChannel>,
    beamforming: Option<RawBeamforming>,
    cancellation: Option<RawCancellation>,
    budget: Option<RawBudget>,
    users: Option<RawUsers>,
    output: Option<RawOutput>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RawArray {
    tx_elements: Option<usize>,
    rx_elements: Option<usize>,
    spacing: Option<f64>,
    rx_gap: Option<f64>,
    rx_offset: Option<[f64; 3]>,
    rx_yaw_deg: Option<f64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    kappa: Option<f64>,
    isolation_db: Option<f64>,
    clusters: Option<usize>,
    rays_per_cluster: Option<usize>,
    ray_angle_stddev_deg: Option<f64>,
    seed: Option<u64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RawBeamforming {
    n_rf: Option<usize>,
    n_streams: Option<usize>,
    phase_bits: Option<PhaseBitsRaw>,
    oversampling: Option<usize>,
}

#[derive(Deserialize, Debug, Clone, PartialEq)]
#[serde(untagged)]
enum PhaseBitsRaw {
    Bits(u8),
    Word(String),
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RawCancellation {
    strategy: Option<String>,
    mu: Option<f64>,
    mu_grid: Option<Vec<f64>>,
    rank_rule: Option<String>,
    analog_sigma: Option<f64>,
    digital_db: Option<f64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    tx_power_dbm: Option<f64>,
    bandwidth_hz: Option<f64>,
    noise_figure_db: Option<f64>,
    lna_sat_dbm: Option<f64>,
    adc_sat_dbm: Option<f64>,
    rx_snr_db: Option<f64>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RawUsers {
    policy: Option<String>,
    entry: Option<Vec<RawUser>>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RawUser {
    id: Option<String>,
    antennas: Option<usize>,
    role: Option<String>,
}

#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    af_points: Option<usize>,
    af_ranges: Option<Vec<String>>,
    af_azimuth_deg: Option<f64>,
}

// ---------------------------------------------------------------------------
// Resolved scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ArraySection {
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub spacing: f64,
    pub rx_gap: f64,
    pub rx_offset: Option<[f64; 3]>,
    pub rx_yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSection {
    pub kappa: f64,
    pub isolation_db: f64,
    pub clusters: usize,
    pub rays_per_cluster: usize,
    pub ray_angle_stddev_deg: f64,
    pub seed: u64,
}

impl ChannelSection {
    /// Large-scale isolation gain `g_si = 10^(-isolation_db/20)`.
    pub fn g_si(&self) -> f64 {
        10f64.powf(-self.isolation_db / 20.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingSection {
    pub n_rf: usize,
    pub n_streams: usize,
    pub phase_bits: PhaseResolution,
    pub oversampling: usize,
}

impl BeamformingSection {
    pub fn quantizer(&self) -> PhaseQuantizer {
        PhaseQuantizer {
            resolution: self.phase_bits,
            amplitude_bits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CancellationSection {
    pub strategy: BfcStrategy,
    pub mu: f64,
    pub mu_grid: Vec<f64>,
    pub rank_rule: RankRule,
    pub analog_sigma: Option<f64>,
    pub digital_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserRole {
    Uplink,
    Downlink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserDef {
    pub id: String,
    pub antennas: usize,
    pub role: UserRole,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UsersSection {
    pub policy: SelectionPolicy,
    pub entries: Vec<UserDef>,
}

/// One range entry for the array-factor report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AfRange {
    Infinite,
    Wavelengths(f64),
}

impl AfRange {
    pub fn label(&self) -> String {
        match self {
            AfRange::Infinite => "inf".to_string(),
            AfRange::Wavelengths(r) => format!("{r}"),
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            AfRange::Infinite => f64::INFINITY,
            AfRange::Wavelengths(r) => *r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    pub dir: String,
    pub af_points: usize,
    pub af_ranges: Vec<AfRange>,
    pub af_azimuth_deg: f64,
}

/// Fully validated scenario configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub array: ArraySection,
    pub channel: ChannelSection,
    pub beamforming: BeamformingSection,
    pub cancellation: CancellationSection,
    pub budget: LinkBudget,
    pub users: UsersSection,
    pub output: OutputSection,
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

/// Section header (`[name]` or `[[name]]`) in force at the given line.
fn section_at(text: &str, line: usize) -> String {
    let mut current = "scenario".to_string();
    for (i, l) in text.lines().enumerate() {
        if i + 1 > line {
            break;
        }
        let t = l.trim();
        if t.starts_with('[') {
            let name: String = t
                .trim_start_matches('[')
                .trim_end_matches(|c| c == ']')
                .split('.')
                .next()
                .unwrap_or("scenario")
                .to_string();
            if !name.is_empty() {
                current = name;
            }
        }
    }
    current
}

fn toml_error(text: &str, err: toml::de::Error) -> Error {
    let line = err
        .span()
        .map(|s| text[..s.start.min(text.len())].lines().count().max(1));
    let section = line
        .map(|l| section_at(text, l))
        .unwrap_or_else(|| "scenario".to_string());
    Error::Config {
        section,
        line,
        message: err.message().to_string(),
    }
}

/// Tracks defaults as they are applied so the run log can echo them.
struct Defaults {
    log: Vec<String>,
}

impl Defaults {
    fn new() -> Self {
        Defaults { log: Vec::new() }
    }

    fn take<T: Clone + std::fmt::Debug>(
        &mut self,
        value: Option<T>,
        section: &str,
        key: &str,
        default: T,
    ) -> T {
        match value {
            Some(v) => v,
            None => {
                self.log.push(format!("{section}.{key} = {default:?}"));
                default
            }
        }
    }
}

fn parse_strategy(s: &str) -> Result<BfcStrategy> {
    match s {
        "regularized" => Ok(BfcStrategy::Regularized),
        "zero_forcing" => Ok(BfcStrategy::ZeroForcing),
        other => Err(Error::config(
            "cancellation",
            format!("unknown strategy '{other}' (regularized | zero_forcing)"),
        )),
    }
}

fn parse_rank_rule(s: &str) -> Result<RankRule> {
    if let Some(v) = s.strip_prefix("energy:") {
        let eps: f64 = v.parse().map_err(|_| {
            Error::config("cancellation", format!("bad energy fraction '{v}'"))
        })?;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::config(
                "cancellation",
                format!("energy fraction {eps} outside (0, 1]"),
            ));
        }
        Ok(RankRule::EnergyFraction(eps))
    } else if let Some(v) = s.strip_prefix("k:") {
        let k: usize = v
            .parse()
            .map_err(|_| Error::config("cancellation", format!("bad rank '{v}'")))?;
        Ok(RankRule::Explicit(k))
    } else {
        Err(Error::config(
            "cancellation",
            format!("rank_rule '{s}' must be 'energy:<fraction>' or 'k:<count>'"),
        ))
    }
}

fn parse_policy(s: &str) -> Result<SelectionPolicy> {
    match s {
        "max_rate" => Ok(SelectionPolicy::MaxRate),
        "max_orthogonality" => Ok(SelectionPolicy::MaxOrthogonality),
        other => Err(Error::config(
            "users",
            format!("unknown policy '{other}' (max_rate | max_orthogonality)"),
        )),
    }
}

fn parse_role(s: &str) -> Result<UserRole> {
    match s {
        "uplink" => Ok(UserRole::Uplink),
        "downlink" => Ok(UserRole::Downlink),
        other => Err(Error::config(
            "users",
            format!("unknown role '{other}' (uplink | downlink)"),
        )),
    }
}

fn parse_af_range(s: &str) -> Result<AfRange> {
    if s == "inf" {
        return Ok(AfRange::Infinite);
    }
    let r: f64 = s
        .parse()
        .map_err(|_| Error::config("output", format!("bad af range '{s}'")))?;
    if !(r > 0.0) {
        return Err(Error::config(
            "output",
            format!("af range {r} must be positive"),
        ));
    }
    Ok(AfRange::Wavelengths(r))
}

/// Parse and validate scenario text. Returns the scenario and the list of
/// defaults that were applied (one `section.key = value` entry each).
pub fn parse_scenario(text: &str) -> Result<(Scenario, Vec<String>)> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let mut d = Defaults::new();

    let ra = raw.array.unwrap_or_default();
    let array = ArraySection {
        tx_elements: d.take(ra.tx_elements, "array", "tx_elements", 8),
        rx_elements: d.take(ra.rx_elements, "array", "rx_elements", 8),
        spacing: d.take(ra.spacing, "array", "spacing", 0.5),
        rx_gap: d.take(ra.rx_gap, "array", "rx_gap", 2.0),
        rx_offset: ra.rx_offset,
        rx_yaw_deg: d.take(ra.rx_yaw_deg, "array", "rx_yaw_deg", 0.0),
    };
    if array.tx_elements == 0 || array.rx_elements == 0 {
        return Err(Error::config("array", "element counts must be >= 1"));
    }
    if !(array.spacing > 0.0) {
        return Err(Error::config("array", "spacing must be positive"));
    }
    if !(array.rx_gap >= 0.0) {
        return Err(Error::config("array", "rx_gap must be >= 0"));
    }

    let rc = raw.channel.unwrap_or_default();
    let channel = ChannelSection {
        kappa: d.take(rc.kappa, "channel", "kappa", 1.0),
        isolation_db: d.take(rc.isolation_db, "channel", "isolation_db", 40.0),
        clusters: d.take(rc.clusters, "channel", "clusters", 3),
        rays_per_cluster: d.take(rc.rays_per_cluster, "channel", "rays_per_cluster", 5),
        ray_angle_stddev_deg: d.take(rc.ray_angle_stddev_deg, "channel", "ray_angle_stddev_deg", 5.0),
        seed: d.take(rc.seed, "channel", "seed", 0),
    };
    if channel.kappa.is_nan() || channel.kappa < 0.0 {
        return Err(Error::config(
            "channel",
            format!("kappa {} must be >= 0 (or inf)", channel.kappa),
        ));
    }
    if !channel.isolation_db.is_finite() {
        return Err(Error::config("channel", "isolation_db must be finite"));
    }
    if channel.clusters == 0 || channel.rays_per_cluster == 0 {
        return Err(Error::config(
            "channel",
            "clusters and rays_per_cluster must be >= 1",
        ));
    }
    if !(channel.ray_angle_stddev_deg >= 0.0) {
        return Err(Error::config("channel", "ray_angle_stddev_deg must be >= 0"));
    }

    let rb = raw.beamforming.unwrap_or_default();
    let phase_bits = match d.take(
        rb.phase_bits,
        "beamforming",
        "phase_bits",
        PhaseBitsRaw::Word("ideal".into()),
    ) {
        PhaseBitsRaw::Word(w) if w == "ideal" => PhaseResolution::Ideal,
        PhaseBitsRaw::Word(w) => {
            return Err(Error::config(
                "beamforming",
                format!("phase_bits '{w}' must be 'ideal' or an integer >= 1"),
            ))
        }
        PhaseBitsRaw::Bits(0) => {
            return Err(Error::config("beamforming", "phase_bits must be >= 1"))
        }
        PhaseBitsRaw::Bits(b) => PhaseResolution::Bits(b),
    };
    let beamforming = BeamformingSection {
        n_rf: d.take(rb.n_rf, "beamforming", "n_rf", 2),
        n_streams: d.take(rb.n_streams, "beamforming", "n_streams", 2),
        phase_bits,
        oversampling: d.take(rb.oversampling, "beamforming", "oversampling", 1),
    };
    if beamforming.n_streams == 0 {
        return Err(Error::config("beamforming", "n_streams must be >= 1"));
    }
    if beamforming.n_rf < beamforming.n_streams {
        return Err(Error::config(
            "beamforming",
            format!(
                "n_rf {} must be >= n_streams {}",
                beamforming.n_rf, beamforming.n_streams
            ),
        ));
    }
    let min_array = array.tx_elements.min(array.rx_elements);
    if beamforming.n_rf > min_array {
        return Err(Error::config(
            "beamforming",
            format!("n_rf {} exceeds the {min_array}-element array", beamforming.n_rf),
        ));
    }
    if beamforming.oversampling == 0 {
        return Err(Error::config("beamforming", "oversampling must be >= 1"));
    }

    let rk = raw.cancellation.unwrap_or_default();
    let cancellation = CancellationSection {
        strategy: parse_strategy(&d.take(
            rk.strategy,
            "cancellation",
            "strategy",
            "regularized".to_string(),
        ))?,
        mu: d.take(rk.mu, "cancellation", "mu", 0.1),
        mu_grid: d.take(
            rk.mu_grid,
            "cancellation",
            "mu_grid",
            vec![0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0],
        ),
        rank_rule: parse_rank_rule(&d.take(
            rk.rank_rule,
            "cancellation",
            "rank_rule",
            "energy:0.99".to_string(),
        ))?,
        analog_sigma: rk.analog_sigma,
        digital_db: d.take(rk.digital_db, "cancellation", "digital_db", 0.0),
    };
    if !(cancellation.mu >= 0.0) {
        return Err(Error::config("cancellation", "mu must be >= 0"));
    }
    if cancellation.mu_grid.is_empty() {
        return Err(Error::config("cancellation", "mu_grid must be non-empty"));
    }
    if cancellation.mu_grid.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::config("cancellation", "mu_grid entries must be >= 0"));
    }
    if let Some(s) = cancellation.analog_sigma {
        if !(s >= 0.0) {
            return Err(Error::config("cancellation", "analog_sigma must be >= 0"));
        }
    }
    if !(cancellation.digital_db >= 0.0) {
        return Err(Error::config("cancellation", "digital_db must be >= 0"));
    }

    let rg = raw.budget.unwrap_or_default();
    let budget = LinkBudget {
        tx_power_dbm: d.take(rg.tx_power_dbm, "budget", "tx_power_dbm", 30.0),
        bandwidth_hz: d.take(rg.bandwidth_hz, "budget", "bandwidth_hz", 400e6),
        noise_figure_db: d.take(rg.noise_figure_db, "budget", "noise_figure_db", 5.0),
        lna_sat_dbm: d.take(rg.lna_sat_dbm, "budget", "lna_sat_dbm", -5.0),
        adc_sat_dbm: d.take(rg.adc_sat_dbm, "budget", "adc_sat_dbm", -25.0),
        rx_snr_db: d.take(rg.rx_snr_db, "budget", "rx_snr_db", 20.0),
    };
    budget
        .validate()
        .map_err(|e| Error::config("budget", e.to_string()))?;

    let ru = raw.users.unwrap_or_default();
    let policy = parse_policy(&d.take(ru.policy, "users", "policy", "max_rate".to_string()))?;
    let entries = match ru.entry {
        Some(list) => {
            let mut out = Vec::with_capacity(list.len());
            for (i, u) in list.into_iter().enumerate() {
                let id = u.id.ok_or_else(|| {
                    Error::config("users", format!("entry {i} is missing an id"))
                })?;
                let antennas = d.take(u.antennas, "users", &format!("entry[{i}].antennas"), 4);
                if antennas == 0 {
                    return Err(Error::config("users", "antennas must be >= 1"));
                }
                let role = parse_role(&d.take(
                    u.role,
                    "users",
                    &format!("entry[{i}].role"),
                    "uplink".to_string(),
                ))?;
                out.push(UserDef { id, antennas, role });
            }
            out
        }
        None => {
            d.log.push("users.entry = [dl0 (downlink, 4 antennas), ul0 (uplink, 4 antennas)]".into());
            vec![
                UserDef {
                    id: "dl0".into(),
                    antennas: 4,
                    role: UserRole::Downlink,
                },
                UserDef {
                    id: "ul0".into(),
                    antennas: 4,
                    role: UserRole::Uplink,
                },
            ]
        }
    };
    {
        let mut seen = std::collections::BTreeSet::new();
        for u in &entries {
            if !seen.insert(&u.id) {
                return Err(Error::config(
                    "users",
                    format!("duplicate user id '{}'", u.id),
                ));
            }
        }
    }
    let users = UsersSection { policy, entries };

    let ro = raw.output.unwrap_or_default();
    let af_ranges = d
        .take(ro.af_ranges, "output", "af_ranges", vec!["inf".to_string()])
        .iter()
        .map(|s| parse_af_range(s))
        .collect::<Result<Vec<_>>>()?;
    let output = OutputSection {
        dir: d.take(ro.dir, "output", "dir", "out".to_string()),
        af_points: d.take(ro.af_points, "output", "af_points", 721),
        af_ranges,
        af_azimuth_deg: d.take(ro.af_azimuth_deg, "output", "af_azimuth_deg", 0.0),
    };
    if output.af_points < 2 {
        return Err(Error::config("output", "af_points must be >= 2"));
    }
    if output.af_ranges.is_empty() {
        return Err(Error::config("output", "af_ranges must be non-empty"));
    }

    Ok((
        Scenario {
            array,
            channel,
            beamforming,
            cancellation,
            budget,
            users,
            output,
        },
        d.log,
    ))
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == x.trunc() && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

impl Scenario {
    /// Serialize with every effective value explicit; re-parsing the output
    /// reconstructs an equal `Scenario` with no defaults applied.
    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;

        let _ = writeln!(s, "[array]");
        let _ = writeln!(s, "tx_elements = {}", self.array.tx_elements);
        let _ = writeln!(s, "rx_elements = {}", self.array.rx_elements);
        let _ = writeln!(s, "spacing = {}", fmt_f64(self.array.spacing));
        let _ = writeln!(s, "rx_gap = {}", fmt_f64(self.array.rx_gap));
        if let Some(off) = self.array.rx_offset {
            let _ = writeln!(
                s,
                "rx_offset = [{}, {}, {}]",
                fmt_f64(off[0]),
                fmt_f64(off[1]),
                fmt_f64(off[2])
            );
        }
        let _ = writeln!(s, "rx_yaw_deg = {}", fmt_f64(self.array.rx_yaw_deg));

        let _ = writeln!(s, "\n[channel]");
        let _ = writeln!(s, "kappa = {}", fmt_f64(self.channel.kappa));
        let _ = writeln!(s, "isolation_db = {}", fmt_f64(self.channel.isolation_db));
        let _ = writeln!(s, "clusters = {}", self.channel.clusters);
        let _ = writeln!(s, "rays_per_cluster = {}", self.channel.rays_per_cluster);
        let _ = writeln!(
            s,
            "ray_angle_stddev_deg = {}",
            fmt_f64(self.channel.ray_angle_stddev_deg)
        );
        let _ = writeln!(s, "seed = {}", self.channel.seed);

        let _ = writeln!(s, "\n[beamforming]");
        let _ = writeln!(s, "n_rf = {}", self.beamforming.n_rf);
        let _ = writeln!(s, "n_streams = {}", self.beamforming.n_streams);
        match self.beamforming.phase_bits {
            PhaseResolution::Ideal => {
                let _ = writeln!(s, "phase_bits = \"ideal\"");
            }
            PhaseResolution::Bits(b) => {
                let _ = writeln!(s, "phase_bits = {b}");
            }
        }
        let _ = writeln!(s, "oversampling = {}", self.beamforming.oversampling);

        let _ = writeln!(s, "\n[cancellation]");
        let strategy = match self.cancellation.strategy {
            BfcStrategy::Regularized => "regularized",
            BfcStrategy::ZeroForcing => "zero_forcing",
        };
        let _ = writeln!(s, "strategy = \"{strategy}\"");
        let _ = writeln!(s, "mu = {}", fmt_f64(self.cancellation.mu));
        let grid: Vec<String> = self.cancellation.mu_grid.iter().map(|m| fmt_f64(*m)).collect();
        let _ = writeln!(s, "mu_grid = [{}]", grid.join(", "));
        let rank = match self.cancellation.rank_rule {
            RankRule::Explicit(k) => format!("k:{k}"),
            RankRule::EnergyFraction(e) => format!("energy:{e}"),
        };
        let _ = writeln!(s, "rank_rule = \"{rank}\"");
        if let Some(sigma) = self.cancellation.analog_sigma {
            let _ = writeln!(s, "analog_sigma = {}", fmt_f64(sigma));
        }
        let _ = writeln!(s, "digital_db = {}", fmt_f64(self.cancellation.digital_db));

        let _ = writeln!(s, "\n[budget]");
        let _ = writeln!(s, "tx_power_dbm = {}", fmt_f64(self.budget.tx_power_dbm));
        let _ = writeln!(s, "bandwidth_hz = {}", fmt_f64(self.budget.bandwidth_hz));
        let _ = writeln!(s, "noise_figure_db = {}", fmt_f64(self.budget.noise_figure_db));
        let _ = writeln!(s, "lna_sat_dbm = {}", fmt_f64(self.budget.lna_sat_dbm));
        let _ = writeln!(s, "adc_sat_dbm = {}", fmt_f64(self.budget.adc_sat_dbm));
        let _ = writeln!(s, "rx_snr_db = {}", fmt_f64(self.budget.rx_snr_db));

        let _ = writeln!(s, "\n[users]");
        let policy = match self.users.policy {
            SelectionPolicy::MaxRate => "max_rate",
            SelectionPolicy::MaxOrthogonality => "max_orthogonality",
        };
        let _ = writeln!(s, "policy = \"{policy}\"");
        for u in &self.users.entries {
            let _ = writeln!(s, "\n[[users.entry]]");
            let _ = writeln!(s, "id = \"{}\"", u.id);
            let _ = writeln!(s, "antennas = {}", u.antennas);
            let role = match u.role {
                UserRole::Uplink => "uplink",
                UserRole::Downlink => "downlink",
            };
            let _ = writeln!(s, "role = \"{role}\"");
        }

        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = \"{}\"", self.output.dir);
        let _ = writeln!(s, "af_points = {}", self.output.af_points);
        let ranges: Vec<String> = self
            .output
            .af_ranges
            .iter()
            .map(|r| format!("\"{}\"", r.label()))
            .collect();
        let _ = writeln!(s, "af_ranges = [{}]", ranges.join(", "));
        let _ = writeln!(s, "af_azimuth_deg = {}", fmt_f64(self.output.af_azimuth_deg));
        s
    }
}
