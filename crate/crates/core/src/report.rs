//! Batch orchestration: build the scenario's channels and beamformers, run
//! one report subcommand, and write its CSV file.
//!
//! Every report is a pure function of (scenario, seed): all randomness flows
//! through named substreams of the master seed, and numeric CSV fields carry
//! 17 significant digits, so identical inputs produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;

use crate::array::{array_factor, far_field_response, ArrayGeometry};
use crate::beamforming::{
    design_half_duplex, dft_codebook, to_hybrid, BeamformerRole, HybridBeamformer,
};
use crate::cancellation::{
    rx_bfc_project, tx_bfc_regularized, tx_bfc_zero_forcing, AnalogSicConfig, BfcStrategy,
    DigitalSicConfig, RxBfcMode,
};
use crate::channel::{
    assemble_si_channel, channel_to_csv, far_field_channel, near_field_channel, side_by_side,
    user_channel, ClusteredChannelParams, RigidTransform, SelfInterferenceChannel, UserChannel,
};
use crate::error::{Error, Result};
use crate::link::{
    levels_report, rate_region_sweep, saturation_powers, DuplexLink, SicMode,
};
use crate::rng::substream_seed;
use crate::scenario::{Scenario, UserRole};
use crate::select::{select_rx_user, CandidateSet, SelectionContext};
use crate::util::{fmt_sig17, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Channel,
    Af,
    BfcSweep,
    Levels,
    Select,
    CodebookIso,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Channel,
        Subcommand::Af,
        Subcommand::BfcSweep,
        Subcommand::Levels,
        Subcommand::Select,
        Subcommand::CodebookIso,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Channel => "channel",
            Subcommand::Af => "af",
            Subcommand::BfcSweep => "bfc-sweep",
            Subcommand::Levels => "levels",
            Subcommand::Select => "select",
            Subcommand::CodebookIso => "codebook-iso",
        }
    }

    pub fn file_name(&self) -> &'static str {
        match self {
            Subcommand::Channel => "channel.csv",
            Subcommand::Af => "af.csv",
            Subcommand::BfcSweep => "rate_region.csv",
            Subcommand::Levels => "levels.csv",
            Subcommand::Select => "selection.csv",
            Subcommand::CodebookIso => "codebook_isolation.csv",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "channel" => Ok(Subcommand::Channel),
            "af" => Ok(Subcommand::Af),
            "bfc-sweep" => Ok(Subcommand::BfcSweep),
            "levels" => Ok(Subcommand::Levels),
            "select" => Ok(Subcommand::Select),
            "codebook-iso" => Ok(Subcommand::CodebookIso),
            other => Err(Error::param(
                "scenario",
                format!("unknown subcommand '{other}'"),
            )),
        }
    }
}

/// Device geometries plus the receive array's rigid pose.
pub fn build_geometries(s: &Scenario) -> Result<(ArrayGeometry, ArrayGeometry, RigidTransform)> {
    let tx = ArrayGeometry::linear(s.array.tx_elements, s.array.spacing)?;
    let rx = ArrayGeometry::linear(s.array.rx_elements, s.array.spacing)?;
    let yaw = s.array.rx_yaw_deg.to_radians();
    let pose = match s.array.rx_offset {
        Some(off) => {
            RigidTransform::yaw_then_translate(yaw, Vector3::new(off[0], off[1], off[2]))
        }
        None => {
            let translate = side_by_side(&tx, &rx, s.array.rx_gap).translation();
            RigidTransform::yaw_then_translate(yaw, translate)
        }
    };
    Ok((tx, rx, pose))
}

fn cluster_params(s: &Scenario, seed: u64) -> ClusteredChannelParams {
    ClusteredChannelParams {
        num_clusters: s.channel.clusters,
        rays_per_cluster: s.channel.rays_per_cluster,
        ray_angle_stddev: s.channel.ray_angle_stddev_deg.to_radians(),
        seed,
    }
}

/// Assemble the scenario's self-interference channel from the `channel`
/// substream of the master seed.
pub fn build_si(s: &Scenario) -> Result<SelfInterferenceChannel> {
    let (tx, rx, pose) = build_geometries(s)?;
    let h_nf = near_field_channel(&tx, &rx, &pose)?;
    let params = cluster_params(s, substream_seed(s.channel.seed, "channel"));
    let h_ff = far_field_channel(&tx, &rx, &params)?;
    assemble_si_channel(h_nf, h_ff, s.channel.kappa, s.channel.g_si())
}

fn build_user(s: &Scenario, def: &crate::scenario::UserDef) -> Result<UserChannel> {
    let (tx, rx, _) = build_geometries(s)?;
    let user_geom = ArrayGeometry::linear(def.antennas, s.array.spacing)?;
    match def.role {
        UserRole::Downlink => {
            let params = cluster_params(s, substream_seed(s.channel.seed, &format!("user-dl:{}", def.id)));
            user_channel(&tx, &user_geom, &params, def.id.clone())
        }
        UserRole::Uplink => {
            let params = cluster_params(s, substream_seed(s.channel.seed, &format!("user-ul:{}", def.id)));
            user_channel(&user_geom, &rx, &params, def.id.clone())
        }
    }
}

fn first_user(s: &Scenario, role: UserRole) -> Result<UserChannel> {
    let def = s
        .users
        .entries
        .iter()
        .find(|u| u.role == role)
        .ok_or_else(|| {
            Error::config(
                "users",
                format!(
                    "no {} user configured",
                    match role {
                        UserRole::Uplink => "uplink",
                        UserRole::Downlink => "downlink",
                    }
                ),
            )
        })?;
    build_user(s, def)
}

fn analog_sic(s: &Scenario) -> Option<AnalogSicConfig> {
    s.cancellation.analog_sigma.map(|sigma| AnalogSicConfig {
        estimation_error_std: sigma,
    })
}

fn digital_sic(s: &Scenario) -> DigitalSicConfig {
    DigitalSicConfig {
        suppression_db: s.cancellation.digital_db,
    }
}

/// Assemble the full duplex-link evaluation context.
pub fn build_link(s: &Scenario) -> Result<DuplexLink> {
    let link = DuplexLink {
        h_si: build_si(s)?,
        downlink: first_user(s, UserRole::Downlink)?,
        uplink: first_user(s, UserRole::Uplink)?,
        n_streams: s.beamforming.n_streams,
        n_rf: s.beamforming.n_rf,
        quantizer: s.beamforming.quantizer(),
        budget: s.budget,
        analog_sic: analog_sic(s),
        digital_sic: digital_sic(s),
        analog_sic_seed: substream_seed(s.channel.seed, "analog-sic"),
        sic_mode: SicMode::Configured,
    };
    link.validate()?;
    Ok(link)
}

/// Transmit/receive hybrid beamformers under the scenario's configured
/// cancellation strategy (the scalar-`mu` operating point used by the
/// levels and selection reports).
fn configured_designs(
    s: &Scenario,
    si: &SelfInterferenceChannel,
    downlink: &UserChannel,
    uplink: &UserChannel,
) -> Result<(HybridBeamformer, HybridBeamformer, CMat)> {
    let q = s.beamforming.quantizer();
    let f_hd = design_half_duplex(&downlink.matrix, s.beamforming.n_streams, BeamformerRole::Precoder)?;
    let f_design = match s.cancellation.strategy {
        BfcStrategy::Regularized => tx_bfc_regularized(&f_hd, &si.matrix, s.cancellation.mu)?,
        BfcStrategy::ZeroForcing => {
            tx_bfc_zero_forcing(&f_hd, &si.matrix, &s.cancellation.rank_rule)?
        }
    };
    let (f_hyb, _) = to_hybrid(&f_design, s.beamforming.n_rf, &q, BeamformerRole::Precoder)?;
    let leakage = &si.matrix * f_hyb.effective();
    let w_hd = design_half_duplex(&uplink.matrix, s.beamforming.n_streams, BeamformerRole::Combiner)?;
    let rx_mode = match s.cancellation.strategy {
        BfcStrategy::Regularized => RxBfcMode::Regularized(s.cancellation.mu),
        BfcStrategy::ZeroForcing => RxBfcMode::ZeroForcing,
    };
    let w_design = rx_bfc_project(&w_hd, &leakage, rx_mode)?;
    let (w_hyb, _) = to_hybrid(&w_design, s.beamforming.n_rf, &q, BeamformerRole::Combiner)?;
    Ok((f_hyb, w_hyb, leakage))
}

fn af_csv(s: &Scenario) -> Result<String> {
    let (tx, _, _) = build_geometries(s)?;
    let az = s.output.af_azimuth_deg.to_radians();
    let weights = far_field_response(&tx, az)?;
    let n = s.output.af_points;
    let angles: Vec<f64> = (0..n)
        .map(|k| {
            -std::f64::consts::FRAC_PI_2
                + k as f64 * std::f64::consts::PI / (n as f64 - 1.0)
        })
        .collect();
    let mut columns = Vec::with_capacity(s.output.af_ranges.len());
    for range in &s.output.af_ranges {
        columns.push(array_factor(&tx, &weights, range.value(), &angles, true)?);
    }
    let mut out = String::from("angle_rad");
    for range in &s.output.af_ranges {
        let _ = write!(out, ",mag_{}", range.label());
    }
    out.push('\n');
    for (i, theta) in angles.iter().enumerate() {
        let _ = write!(out, "{}", fmt_sig17(*theta));
        for col in &columns {
            let _ = write!(out, ",{}", fmt_sig17(col[i]));
        }
        out.push('\n');
    }
    Ok(out)
}

fn rate_region_csv(s: &Scenario) -> Result<String> {
    let link = build_link(s)?;
    let sweep = rate_region_sweep(&link, &s.cancellation.mu_grid)?;
    let mut out = String::from("label,mu,se_tx_bps_hz,se_rx_bps_hz\n");
    let mut row = |label: &str, mu: Option<f64>, se_tx: f64, se_rx: f64| {
        let mu_text = mu.map(fmt_sig17).unwrap_or_default();
        let _ = writeln!(out, "{label},{mu_text},{},{}", fmt_sig17(se_tx), fmt_sig17(se_rx));
    };
    row("fd_capacity", None, sweep.fd_corner.se_tx, sweep.fd_corner.se_rx);
    row("hd_tx", None, sweep.hd_tx.se_tx, sweep.hd_tx.se_rx);
    row("hd_rx", None, sweep.hd_rx.se_tx, sweep.hd_rx.se_rx);
    row(
        "no_mitigation",
        Some(0.0),
        sweep.no_mitigation.se_tx,
        sweep.no_mitigation.se_rx,
    );
    for (mu, p) in &sweep.points {
        row(&p.label, Some(*mu), p.se_tx, p.se_rx);
    }
    Ok(out)
}

fn levels_csv(s: &Scenario) -> Result<String> {
    let si = build_si(s)?;
    let downlink = first_user(s, UserRole::Downlink)?;
    let uplink = first_user(s, UserRole::Uplink)?;
    let (f_hyb, w_hyb, _) = configured_designs(s, &si, &downlink, &uplink)?;
    let (lna, adc) = saturation_powers(&si.matrix, &f_hyb, &w_hyb.analog, &s.budget)?;
    let report = levels_report(&lna, &adc, analog_sic(s).as_ref(), &digital_sic(s), &s.budget);

    let mut out = String::from("stage,power_dbm,margin_db\n");
    let mut row = |stage: &str, power: f64, margin: f64| {
        let _ = writeln!(out, "{stage},{},{}", fmt_sig17(power), fmt_sig17(margin));
    };
    row("noise_floor", report.noise_floor_dbm, 0.0);
    row("si_at_worst_lna", report.si_at_worst_lna_dbm, report.lna_margin_db);
    row("si_at_worst_adc", report.si_at_worst_adc_dbm, report.adc_margin_db);
    row(
        "si_post_analog_sic",
        report.si_post_analog_sic_dbm,
        s.budget.adc_sat_dbm - report.si_post_analog_sic_dbm,
    );
    row(
        "si_post_digital_sic",
        report.si_post_digital_sic_dbm,
        report.noise_floor_dbm - report.si_post_digital_sic_dbm,
    );
    Ok(out)
}

fn selection_csv(s: &Scenario) -> Result<String> {
    let si = build_si(s)?;
    let downlink = first_user(s, UserRole::Downlink)?;
    let uplink_defs: Vec<_> = s
        .users
        .entries
        .iter()
        .filter(|u| u.role == UserRole::Uplink)
        .collect();
    if uplink_defs.is_empty() {
        return Err(Error::config("users", "select needs at least one uplink user"));
    }
    let mut candidates = Vec::with_capacity(uplink_defs.len());
    for def in uplink_defs {
        candidates.push(build_user(s, def)?);
    }
    // Fixed transmitter: design against the first uplink user, then hold the
    // resulting output leakage while scoring every candidate.
    let (_, _, leakage) = configured_designs(s, &si, &downlink, &candidates[0])?;
    let ctx = SelectionContext {
        n_streams: s.beamforming.n_streams,
        n_rf: s.beamforming.n_rf,
        quantizer: s.beamforming.quantizer(),
        budget: s.budget,
        analog_sic: analog_sic(s),
        digital_sic: digital_sic(s),
    };
    let rule = match s.cancellation.strategy {
        BfcStrategy::Regularized => RxBfcMode::Regularized(s.cancellation.mu),
        BfcStrategy::ZeroForcing => RxBfcMode::ZeroForcing,
    };
    let set = CandidateSet {
        users: candidates,
        policy: s.users.policy,
    };
    let selection = select_rx_user(&set, &leakage, rule, &ctx)?;
    let mut out = String::from("user_id,score,selected\n");
    for score in &selection.scores {
        let _ = writeln!(
            out,
            "{},{},{}",
            score.user_id,
            fmt_sig17(score.score),
            u8::from(score.selected)
        );
    }
    Ok(out)
}

fn codebook_iso_csv(s: &Scenario) -> Result<String> {
    let si = build_si(s)?;
    let tx_cb = dft_codebook(s.array.tx_elements, s.beamforming.oversampling)?;
    let rx_cb = dft_codebook(s.array.rx_elements, s.beamforming.oversampling)?;
    let map = crate::beamforming::codebook_isolation_map(&tx_cb, &rx_cb, &si.matrix)?;
    let mut out = String::from("rx_beam");
    for j in 0..map.ncols() {
        let _ = write!(out, ",tx_{j}");
    }
    out.push('\n');
    for i in 0..map.nrows() {
        let _ = write!(out, "{i}");
        for j in 0..map.ncols() {
            let _ = write!(out, ",{}", fmt_sig17(map[(i, j)]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Run one report against the scenario, writing its CSV under `out_dir`.
/// Returns the paths written.
pub fn run(sub: Subcommand, scenario: &Scenario, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let csv = match sub {
        Subcommand::Channel => channel_to_csv(&build_si(scenario)?.matrix),
        Subcommand::Af => af_csv(scenario)?,
        Subcommand::BfcSweep => rate_region_csv(scenario)?,
        Subcommand::Levels => levels_csv(scenario)?,
        Subcommand::Select => selection_csv(scenario)?,
        Subcommand::CodebookIso => codebook_iso_csv(scenario)?,
    };
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(sub.file_name());
    std::fs::write(&path, csv.as_bytes())?;
    Ok(vec![path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn scenario(text: &str) -> Scenario {
        parse_scenario(text).unwrap().0
    }

    #[test]
    fn subcommand_names_round_trip() {
        for sub in Subcommand::ALL {
            assert_eq!(sub, sub.name().parse().unwrap());
        }
        assert!("bogus".parse::<Subcommand>().is_err());
    }

    #[test]
    fn levels_csv_reproduces_the_worked_db_chain() {
        // 1x1 arrays with a pure near-field channel make the isolation
        // exact: 30 dBm - 70 dB -> -40 dBm at the ADC, then 20 + 20 dB of
        // staged cancellation -> -80 dBm, noise floor ~= -83 dBm.
        let text = r#"
[array]
tx_elements = 1
rx_elements = 1

[channel]
kappa = inf
isolation_db = 70.0
seed = 1

[beamforming]
n_rf = 1
n_streams = 1

[cancellation]
analog_sigma = 0.1
digital_db = 20.0

[users]
[[users.entry]]
id = "d"
antennas = 1
role = "downlink"

[[users.entry]]
id = "u"
antennas = 1
role = "uplink"
"#;
        let s = scenario(text);
        let csv = levels_csv(&s).unwrap();
        let mut post_digital = None;
        let mut floor = None;
        for line in csv.lines().skip(1) {
            let mut fields = line.split(',');
            let stage = fields.next().unwrap();
            let power: f64 = fields.next().unwrap().parse().unwrap();
            match stage {
                "si_post_digital_sic" => post_digital = Some(power),
                "noise_floor" => floor = Some(power),
                _ => {}
            }
        }
        let post_digital = post_digital.unwrap();
        let floor = floor.unwrap();
        assert!(
            (post_digital + 80.0).abs() < 1e-9,
            "post-digital SI {post_digital} dBm"
        );
        assert!((floor + 83.0).abs() < 0.05, "noise floor {floor} dBm");
        assert!(post_digital > floor, "not noise-limited in this budget");
    }

    #[test]
    fn af_csv_far_field_agreement_within_one_db() {
        let text = r#"
[array]
tx_elements = 8
rx_elements = 8

[channel]
seed = 3

[output]
af_ranges = ["inf", "24.5"]
"#;
        let s = scenario(text);
        let csv = af_csv(&s).unwrap();
        let mut max_dev: f64 = 0.0;
        for line in csv.lines().skip(1) {
            let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
            // Compare on a -12 dB display floor; the far-field pattern has
            // exact nulls that no finite comparison survives.
            let db = |x: f64| 20.0 * x.max(10f64.powf(-12.0 / 20.0)).log10();
            max_dev = max_dev.max((db(fields[1]) - db(fields[2])).abs());
        }
        assert!(max_dev <= 1.0, "max deviation {max_dev} dB");
    }

    #[test]
    fn reports_are_byte_deterministic() {
        let text = "[channel]\nseed = 11\n\n[cancellation]\nanalog_sigma = 0.1\ndigital_db = 20.0\n";
        let s = scenario(text);
        let tmp = tempfile::tempdir().unwrap();
        for sub in Subcommand::ALL {
            let dir_a = tmp.path().join(format!("{}_a", sub.name()));
            let dir_b = tmp.path().join(format!("{}_b", sub.name()));
            let wrote_a = run(sub, &s, &dir_a).unwrap();
            let wrote_b = run(sub, &s, &dir_b).unwrap();
            for (a, b) in wrote_a.iter().zip(wrote_b.iter()) {
                let bytes_a = std::fs::read(a).unwrap();
                let bytes_b = std::fs::read(b).unwrap();
                assert_eq!(bytes_a, bytes_b, "{} not deterministic", sub.name());
            }
        }
    }

    #[test]
    fn substreams_keep_reports_independent() {
        // Changing the analog-SIC error model must not perturb the channel
        // realization: they draw from different substreams.
        let a = scenario("[channel]\nseed = 5\n");
        let b = scenario("[channel]\nseed = 5\n\n[cancellation]\nanalog_sigma = 0.3\n");
        let tmp = tempfile::tempdir().unwrap();
        let pa = run(Subcommand::Channel, &a, &tmp.path().join("a")).unwrap();
        let pb = run(Subcommand::Channel, &b, &tmp.path().join("b")).unwrap();
        assert_eq!(
            std::fs::read(&pa[0]).unwrap(),
            std::fs::read(&pb[0]).unwrap()
        );
    }
}
