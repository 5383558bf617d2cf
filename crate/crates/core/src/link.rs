//! Link evaluation: saturation checks, staged power-level budgets, spectral
//! efficiencies, and duplexing rate regions.
//!
//! Power bookkeeping is in dBm at the receive-array reference plane. The
//! desired links on both sides are evaluated at the budget's reference SNR;
//! the transmit power enters only through the self-interference terms and
//! the saturation checks, with SI treated as additive Gaussian interference.

use crate::beamforming::{design_half_duplex, to_hybrid, BeamformerRole, HybridBeamformer, PhaseQuantizer};
use crate::cancellation::{
    analog_sic_apply, rx_bfc_project, tx_bfc_regularized, AnalogSicConfig, DigitalSicConfig,
    RxBfcMode,
};
use crate::channel::{SelfInterferenceChannel, UserChannel};
use crate::error::{Error, Result};
use crate::util::{db_to_linear, hermitian_defect, linear_to_db, CMat, C64, DBM_FLOOR};

/// Thermal noise density at 290 K, dBm/Hz.
const THERMAL_DBM_HZ: f64 = -174.0;

/// Scalar budget of one full-duplex transceiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub lna_sat_dbm: f64,
    pub adc_sat_dbm: f64,
    /// Desired uplink signal SNR at the receive array, dB.
    pub rx_snr_db: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::param("link-eval", "bandwidth_hz must be positive"));
        }
        for (name, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("noise_figure_db", self.noise_figure_db),
            ("lna_sat_dbm", self.lna_sat_dbm),
            ("adc_sat_dbm", self.adc_sat_dbm),
            ("rx_snr_db", self.rx_snr_db),
        ] {
            if !v.is_finite() {
                return Err(Error::param("link-eval", format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Integrated noise floor: -174 + 10 log10(BW) + NF, dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        THERMAL_DBM_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    pub fn tx_power_mw(&self) -> f64 {
        db_to_linear(self.tx_power_dbm)
    }
}

/// Self-interference power at each front-end reference point versus the
/// noise floor and the saturation thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLevelsReport {
    pub si_at_worst_lna_dbm: f64,
    pub si_at_worst_adc_dbm: f64,
    pub si_post_analog_sic_dbm: f64,
    pub si_post_digital_sic_dbm: f64,
    pub noise_floor_dbm: f64,
    pub lna_margin_db: f64,
    pub adc_margin_db: f64,
    pub noise_limited: bool,
}

/// One operating point of the duplexing trade-off.
#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub se_tx: f64,
    pub se_rx: f64,
    pub label: String,
}

/// Per-antenna LNA and per-RF-chain ADC self-interference input powers.
///
/// The LNA sees the channel `H_SI F_RF F_BB` (transmit side alone governs
/// it); the ADC sees `W_RFᴴ H_SI F_RF F_BB`. With total transmit power P
/// split across `N_s` streams, the power at row i is `(P/N_s)·‖row_i‖²`.
pub fn saturation_powers(
    h_si: &CMat,
    precoder: &HybridBeamformer,
    combiner_analog: &CMat,
    budget: &LinkBudget,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if precoder.n_antennas() != h_si.ncols() {
        return Err(Error::dim(
            "link-eval",
            format!(
                "precoder antennas {} vs channel Nt {}",
                precoder.n_antennas(),
                h_si.ncols()
            ),
        ));
    }
    if combiner_analog.nrows() != h_si.nrows() {
        return Err(Error::dim(
            "link-eval",
            format!(
                "combiner rows {} vs channel Nr {}",
                combiner_analog.nrows(),
                h_si.nrows()
            ),
        ));
    }
    let g = h_si * precoder.effective();
    let per_stream = budget.tx_power_mw() / precoder.n_streams() as f64;
    let row_powers = |m: &CMat| -> Vec<f64> {
        (0..m.nrows())
            .map(|i| linear_to_db(per_stream * m.row(i).norm_squared()))
            .collect()
    };
    let lna = row_powers(&g);
    let adc_matrix = combiner_analog.adjoint() * &g;
    let adc = row_powers(&adc_matrix);
    Ok((lna, adc))
}

/// Log-det spectral efficiency with interference treated as Gaussian:
/// `log2 det(I + (noise·I + C)^{-1} H Hᴴ (signal/N_s))`, bits/s/Hz.
pub fn spectral_efficiency(
    h_eff: &CMat,
    interference_cov: &CMat,
    noise_power: f64,
    signal_power: f64,
) -> Result<f64> {
    let rows = h_eff.nrows();
    if interference_cov.nrows() != rows || interference_cov.ncols() != rows {
        return Err(Error::dim(
            "link-eval",
            format!(
                "covariance {}x{} vs {rows} output streams",
                interference_cov.nrows(),
                interference_cov.ncols()
            ),
        ));
    }
    if !(noise_power > 0.0) {
        return Err(Error::param("link-eval", "noise power must be positive"));
    }
    if !(signal_power >= 0.0) {
        return Err(Error::param("link-eval", "signal power must be >= 0"));
    }
    let scale = interference_cov.norm().max(1.0);
    if hermitian_defect(interference_cov) > 1e-9 * scale {
        return Err(Error::NonPsdCovariance(
            "covariance is not Hermitian".into(),
        ));
    }
    let eig_c = interference_cov.clone().symmetric_eigen();
    if eig_c.eigenvalues.iter().any(|l| *l < -1e-9 * scale) {
        return Err(Error::NonPsdCovariance(format!(
            "covariance eigenvalue {} below tolerance",
            eig_c.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }

    let n_streams = h_eff.ncols().max(1) as f64;
    let noise_plus_int = {
        let mut a = interference_cov.clone();
        for i in 0..rows {
            a[(i, i)] += C64::new(noise_power, 0.0);
        }
        a
    };
    let signal = h_eff * h_eff.adjoint() * C64::new(signal_power / n_streams, 0.0);
    let total = &noise_plus_int + &signal;

    // log2 det(A + B) - log2 det(A); both are Hermitian positive definite.
    let log2_det = |m: CMat| -> f64 {
        m.symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|l| l.max(1e-300).log2())
            .sum()
    };
    let se = log2_det(total) - log2_det(noise_plus_int);
    Ok(se.max(0.0))
}

/// Nominal staged power budget.
///
/// The analog stage is represented by its modeled suppression `sigma²`
/// applied to the worst ADC-plane power (the randomized residual draw lives
/// in the rate pipeline); the digital stage subtracts its suppression floor.
pub fn levels_report(
    lna_dbm: &[f64],
    adc_dbm: &[f64],
    analog_sic: Option<&AnalogSicConfig>,
    digital_sic: &DigitalSicConfig,
    budget: &LinkBudget,
) -> PowerLevelsReport {
    let worst = |v: &[f64]| v.iter().cloned().fold(DBM_FLOOR, f64::max);
    let worst_lna = worst(lna_dbm);
    let worst_adc = worst(adc_dbm);
    let post_analog = match analog_sic {
        Some(cfg) if cfg.estimation_error_std > 0.0 => {
            (worst_adc + 20.0 * cfg.estimation_error_std.log10()).max(DBM_FLOOR)
        }
        Some(_) => DBM_FLOOR, // perfect estimate leaves no residual
        None => worst_adc,
    };
    let post_digital = (post_analog - digital_sic.suppression_db).max(DBM_FLOOR);
    let noise_floor = budget.noise_floor_dbm();
    PowerLevelsReport {
        si_at_worst_lna_dbm: worst_lna,
        si_at_worst_adc_dbm: worst_adc,
        si_post_analog_sic_dbm: post_analog,
        si_post_digital_sic_dbm: post_digital,
        noise_floor_dbm: noise_floor,
        lna_margin_db: budget.lna_sat_dbm - worst_lna,
        adc_margin_db: budget.adc_sat_dbm - worst_adc,
        noise_limited: post_digital <= noise_floor,
    }
}

/// How the cancellation stages enter a rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicMode {
    /// Analog and digital stages as configured.
    Configured,
    /// Self-interference fully removed (the full-duplex capacity reference).
    Perfect,
    /// No mitigation at all beyond the beamforming design.
    Off,
}

/// Everything needed to evaluate one full-duplex transceiver serving one
/// downlink and one uplink user.
#[derive(Debug, Clone)]
pub struct DuplexLink {
    pub h_si: SelfInterferenceChannel,
    /// Device-transmit to distant-user channel (user antennas × Nt).
    pub downlink: UserChannel,
    /// Distant-user to device-receive channel (Nr × user antennas).
    pub uplink: UserChannel,
    pub n_streams: usize,
    pub n_rf: usize,
    pub quantizer: PhaseQuantizer,
    pub budget: LinkBudget,
    pub analog_sic: Option<AnalogSicConfig>,
    pub digital_sic: DigitalSicConfig,
    pub analog_sic_seed: u64,
    pub sic_mode: SicMode,
}

impl DuplexLink {
    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        if let Some(a) = &self.analog_sic {
            a.validate()?;
        }
        self.digital_sic.validate()?;
        let nt = self.h_si.nt();
        let nr = self.h_si.nr();
        if self.downlink.matrix.ncols() != nt {
            return Err(Error::dim(
                "link-eval",
                "downlink channel columns must match the transmit array",
            ));
        }
        if self.uplink.matrix.nrows() != nr {
            return Err(Error::dim(
                "link-eval",
                "uplink channel rows must match the receive array",
            ));
        }
        let max_streams = nt
            .min(nr)
            .min(self.downlink.matrix.nrows())
            .min(self.uplink.matrix.ncols());
        if self.n_streams == 0 || self.n_streams > max_streams {
            return Err(Error::param(
                "link-eval",
                format!(
                    "n_streams {} outside 1..={max_streams} for these arrays/users",
                    self.n_streams
                ),
            ));
        }
        if self.n_rf < self.n_streams || self.n_rf > nt.min(nr) {
            return Err(Error::param(
                "link-eval",
                format!("n_rf {} violates n_streams <= n_rf <= antennas", self.n_rf),
            ));
        }
        Ok(())
    }

    fn reference_signal_mw(&self) -> f64 {
        db_to_linear(self.budget.noise_floor_dbm() + self.budget.rx_snr_db)
    }

    fn noise_mw(&self) -> f64 {
        db_to_linear(self.budget.noise_floor_dbm())
    }

    /// Device transmit/receive hybrid beamformers at one regularizer value.
    /// `Perfect` mode designs against a zeroed SI channel, which reduces
    /// both stages to their half-duplex optima along the identical code
    /// path.
    fn design_beamformers(
        &self,
        mu: f64,
        mode: SicMode,
    ) -> Result<(HybridBeamformer, HybridBeamformer, CMat)> {
        let h = match mode {
            SicMode::Perfect => CMat::zeros(self.h_si.nr(), self.h_si.nt()),
            _ => self.h_si.matrix.clone(),
        };
        let f_hd = design_half_duplex(&self.downlink.matrix, self.n_streams, BeamformerRole::Precoder)?;
        let f_design = tx_bfc_regularized(&f_hd, &h, mu)?;
        let (f_hyb, _) = to_hybrid(&f_design, self.n_rf, &self.quantizer, BeamformerRole::Precoder)?;
        let leakage = &h * f_hyb.effective();
        let w_hd = design_half_duplex(&self.uplink.matrix, self.n_streams, BeamformerRole::Combiner)?;
        let w_design = rx_bfc_project(&w_hd, &leakage, RxBfcMode::Regularized(mu))?;
        let (w_hyb, _) = to_hybrid(&w_design, self.n_rf, &self.quantizer, BeamformerRole::Combiner)?;
        Ok((f_hyb, w_hyb, leakage))
    }

    /// Evaluate one (mu, SIC-mode) operating point.
    fn evaluate_point(&self, mu: f64, mode: SicMode, label: &str) -> Result<RatePoint> {
        let (f_hyb, w_hyb, _) = self.design_beamformers(mu, mode)?;
        let f_eff = f_hyb.effective();
        let w_eff = w_hyb.effective();

        // Orthonormalize the composite combiner (digital post-processing),
        // which keeps the post-combining noise white.
        let qr = w_eff.clone().qr();
        let q = qr.q();
        let r = qr.r();

        let n_s = self.n_streams as f64;
        let p_tx = self.budget.tx_power_mw();
        let c_si: CMat = match mode {
            SicMode::Perfect => CMat::zeros(self.n_streams, self.n_streams),
            SicMode::Off => {
                let m = q.adjoint() * &self.h_si.matrix * &f_eff;
                &m * m.adjoint() * C64::new(p_tx / n_s, 0.0)
            }
            SicMode::Configured => {
                let h_rf = w_hyb.analog.adjoint() * &self.h_si.matrix * &f_hyb.analog;
                let residual_rf = match &self.analog_sic {
                    Some(cfg) => analog_sic_apply(&h_rf, cfg, self.analog_sic_seed),
                    None => h_rf,
                };
                let t = w_hyb.digital.adjoint() * residual_rf * &f_hyb.digital;
                // Undo the QR mixing: m = R^{-H} t.
                let m = match r.adjoint().solve_lower_triangular(&t) {
                    Some(m) => m,
                    None => {
                        let pinv = r
                            .adjoint()
                            .svd(true, true)
                            .pseudo_inverse(1e-12)
                            .expect("svd pseudo-inverse");
                        pinv * &t
                    }
                };
                let gamma = self.digital_sic.suppression_factor();
                &m * m.adjoint() * C64::new(gamma * p_tx / n_s, 0.0)
            }
        };

        let noise = self.noise_mw();
        let p_sig = self.reference_signal_mw();

        // Uplink: the distant user re-optimizes its precoder against the
        // device's combined channel (one adaptation pass).
        let g_ul = q.adjoint() * &self.uplink.matrix;
        let f_user = design_half_duplex(&g_ul, self.n_streams, BeamformerRole::Precoder)?;
        let h_eff_ul = &g_ul * &f_user;
        let se_rx = spectral_efficiency(&h_eff_ul, &c_si, noise, p_sig)?;

        // Downlink: the distant user re-optimizes its combiner likewise.
        let g_dl = &self.downlink.matrix * &f_eff;
        let w_user = design_half_duplex(&g_dl, self.n_streams, BeamformerRole::Combiner)?;
        let h_eff_dl = w_user.adjoint() * &g_dl;
        let zero_cov = CMat::zeros(h_eff_dl.nrows(), h_eff_dl.nrows());
        let se_tx = spectral_efficiency(&h_eff_dl, &zero_cov, noise, p_sig)?;

        Ok(RatePoint {
            se_tx,
            se_rx,
            label: label.to_string(),
        })
    }

    /// Saturation powers for the beamformers this link would deploy at `mu`.
    pub fn saturation_at(&self, mu: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let (f_hyb, w_hyb, _) = self.design_beamformers(mu, SicMode::Configured)?;
        saturation_powers(&self.h_si.matrix, &f_hyb, &w_hyb.analog, &self.budget)
    }
}

/// Rate-region sweep output: the swept beamforming-cancellation points plus
/// the reference points of the region figure.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// (mu, operating point) per grid entry, in grid order.
    pub points: Vec<(f64, RatePoint)>,
    /// Both links at their half-duplex optima with SI fully removed.
    pub fd_corner: RatePoint,
    /// Transmit-only end of the half-duplex time-sharing segment.
    pub hd_tx: RatePoint,
    /// Receive-only end of the half-duplex time-sharing segment.
    pub hd_rx: RatePoint,
    /// mu = 0 with no SIC stages at all.
    pub no_mitigation: RatePoint,
}

/// Sweep the transmit-side regularizer over `mu_grid`, designing the
/// receive side against the resulting leakage at each point and applying
/// the configured SIC stages.
pub fn rate_region_sweep(link: &DuplexLink, mu_grid: &[f64]) -> Result<SweepResult> {
    link.validate()?;
    if mu_grid.is_empty() {
        return Err(Error::param("link-eval", "mu grid is empty"));
    }
    let corner = link.evaluate_point(0.0, SicMode::Perfect, "fd_capacity")?;
    let hd_tx = RatePoint {
        se_tx: corner.se_tx,
        se_rx: 0.0,
        label: "hd_tx".into(),
    };
    let hd_rx = RatePoint {
        se_tx: 0.0,
        se_rx: corner.se_rx,
        label: "hd_rx".into(),
    };
    let no_mitigation = link.evaluate_point(0.0, SicMode::Off, "no_mitigation")?;
    let mode = match link.sic_mode {
        SicMode::Perfect => SicMode::Perfect,
        _ => SicMode::Configured,
    };
    let mut points = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        if !(mu >= 0.0) {
            return Err(Error::param("link-eval", format!("mu {mu} must be >= 0")));
        }
        points.push((mu, link.evaluate_point(mu, mode, "bfc")?));
    }
    Ok(SweepResult {
        points,
        fd_corner: corner,
        hd_tx,
        hd_rx,
        no_mitigation,
    })
}
