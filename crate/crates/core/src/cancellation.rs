//! Self-interference mitigation stages.
//!
//! Three stages act in sequence: beamforming cancellation shapes the
//! precoders/combiners around the self-interference channel, a reduced-size
//! analog canceller subtracts its estimate of the RF-chain-level coupling,
//! and a digital stage suppresses whatever power remains by a fixed factor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::beamforming::{BeamformerRole, HybridBeamformer};
use crate::error::{Error, Result};
use crate::util::{normalize_columns, CMat, CVec, C64};

/// Threshold below which a projected column counts as annihilated.
const ANNIHILATED: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfcStrategy {
    ZeroForcing,
    Regularized,
}

/// How many dominant directions of the self-interference channel the
/// zero-forcing projector removes: an explicit count, or the smallest count
/// capturing the given singular-value energy fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankRule {
    Explicit(usize),
    EnergyFraction(f64),
}

impl RankRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            RankRule::Explicit(_) => Ok(()),
            RankRule::EnergyFraction(e) => {
                if *e > 0.0 && *e <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::param(
                        "cancellation",
                        format!("energy fraction {e} outside (0, 1]"),
                    ))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfcConfig {
    pub strategy: BfcStrategy,
    pub rank_rule: RankRule,
    pub mu: f64,
}

/// Analog canceller error model: the estimate of the RF-chain coupling is
/// off by independent complex-Gaussian entries with relative std `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogSicConfig {
    pub estimation_error_std: f64,
}

impl AnalogSicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.estimation_error_std >= 0.0 {
            Ok(())
        } else {
            Err(Error::param(
                "cancellation",
                "estimation_error_std must be >= 0",
            ))
        }
    }
}

/// Digital canceller modeled as a fixed suppression floor on residual power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitalSicConfig {
    pub suppression_db: f64,
}

impl DigitalSicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.suppression_db >= 0.0 {
            Ok(())
        } else {
            Err(Error::param("cancellation", "suppression_db must be >= 0"))
        }
    }

    pub fn suppression_factor(&self) -> f64 {
        10f64.powf(-self.suppression_db / 10.0)
    }
}

/// The stream-level effective self-interference channel
/// `W_BBᴴ W_RFᴴ H_SI F_RF F_BB`.
pub fn effective_si_channel(
    combiner: &HybridBeamformer,
    h_si: &CMat,
    precoder: &HybridBeamformer,
) -> Result<CMat> {
    if combiner.role != BeamformerRole::Combiner || precoder.role != BeamformerRole::Precoder {
        return Err(Error::param(
            "cancellation",
            "effective_si_channel expects (combiner, channel, precoder)",
        ));
    }
    if combiner.n_antennas() != h_si.nrows() || precoder.n_antennas() != h_si.ncols() {
        return Err(Error::dim(
            "cancellation",
            format!(
                "channel {}x{} vs combiner {} / precoder {} antennas",
                h_si.nrows(),
                h_si.ncols(),
                combiner.n_antennas(),
                precoder.n_antennas()
            ),
        ));
    }
    Ok(combiner.digital.adjoint()
        * combiner.analog.adjoint()
        * h_si
        * &precoder.analog
        * &precoder.digital)
}

fn resolve_rank(singular_values: &[f64], rule: &RankRule, max_rank: usize) -> Result<usize> {
    rule.validate()?;
    match rule {
        RankRule::Explicit(k) => {
            if *k > max_rank {
                Err(Error::param(
                    "cancellation",
                    format!("explicit rank {k} exceeds min dimension {max_rank}"),
                ))
            } else {
                Ok(*k)
            }
        }
        RankRule::EnergyFraction(eps) => {
            let total: f64 = singular_values.iter().map(|s| s * s).sum();
            if total <= 0.0 {
                return Ok(0);
            }
            let mut acc = 0.0;
            for (i, s) in singular_values.iter().enumerate() {
                acc += s * s;
                if acc >= eps * total {
                    return Ok(i + 1);
                }
            }
            Ok(singular_values.len())
        }
    }
}

/// Deterministic unit vector orthogonal to the columns of `basis`.
fn complement_vector(basis: &CMat, skip: usize) -> Option<CVec> {
    let n = basis.nrows();
    let mut best: Option<(f64, CVec)> = None;
    for i in 0..n {
        let mut e = CVec::zeros(n);
        e[(i + skip) % n] = C64::new(1.0, 0.0);
        let proj = basis * (basis.adjoint() * &e);
        let residual = e - proj;
        let norm = residual.norm();
        if norm > ANNIHILATED {
            match &best {
                Some((b, _)) if *b >= norm => {}
                _ => best = Some((norm, residual / C64::new(norm, 0.0))),
            }
        }
    }
    best.map(|(_, v)| v)
}

/// Project the half-duplex precoder onto the orthogonal complement of the
/// dominant right singular subspace of `h_si`.
///
/// Annihilated columns are replaced by the least-dominant retained right
/// singular vector outside the projected-out subspace. Columns are
/// renormalized so the output carries total power `N_s`.
pub fn tx_bfc_zero_forcing(f_hd: &CMat, h_si: &CMat, rank_rule: &RankRule) -> Result<CMat> {
    if f_hd.nrows() != h_si.ncols() {
        return Err(Error::dim(
            "cancellation",
            format!(
                "precoder rows {} vs channel Nt {}",
                f_hd.nrows(),
                h_si.ncols()
            ),
        ));
    }
    let nt = h_si.ncols();
    let svd = h_si.clone().svd(false, true);
    let v = svd.v_t.as_ref().expect("requested V").adjoint();
    let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let k = resolve_rank(&sv, rank_rule, h_si.nrows().min(nt))?;
    if k >= nt {
        return Err(Error::EmptyNullSpace(format!(
            "projection rank {k} leaves no complement in a {nt}-dimensional transmit space"
        )));
    }

    let vk = v.columns(0, k).into_owned();
    let mut out = f_hd - &vk * (vk.adjoint() * f_hd);

    let mut replacements = 0usize;
    for j in 0..out.ncols() {
        if out.column(j).norm() < ANNIHILATED {
            // Least-dominant retained singular vector outside V_k, walking
            // backwards for successive replacements.
            let available = v.ncols().saturating_sub(k);
            let col = if replacements < available {
                v.column(v.ncols() - 1 - replacements).into_owned()
            } else {
                complement_vector(&vk, replacements).ok_or_else(|| {
                    Error::EmptyNullSpace("no replacement direction available".into())
                })?
            };
            out.set_column(j, &col);
            replacements += 1;
        }
    }
    normalize_columns(&mut out, ANNIHILATED);
    Ok(out)
}

/// Tikhonov-regularized shrink of the half-duplex precoder away from the
/// dominant self-interference directions:
/// each column becomes `(I + mu·H_SIᴴH_SI)^{-1} f`, evaluated through the
/// SVD filter factors `1/(1 + mu σᵢ²)` for stability at large `mu`, then
/// renormalized to unit column norm (total power `N_s`).
pub fn tx_bfc_regularized(f_hd: &CMat, h_si: &CMat, mu: f64) -> Result<CMat> {
    if !(mu >= 0.0) {
        return Err(Error::param("cancellation", "mu must be >= 0"));
    }
    if f_hd.nrows() != h_si.ncols() {
        return Err(Error::dim(
            "cancellation",
            format!(
                "precoder rows {} vs channel Nt {}",
                f_hd.nrows(),
                h_si.ncols()
            ),
        ));
    }
    let svd = h_si.clone().svd(false, true);
    let v = svd.v_t.as_ref().expect("requested V").adjoint();
    let coeff = v.adjoint() * f_hd;
    let mut out = f_hd.clone();
    for (i, s) in svd.singular_values.iter().enumerate() {
        let factor = mu * s * s / (1.0 + mu * s * s);
        if factor != 0.0 {
            let vi = v.column(i);
            for j in 0..out.ncols() {
                let corr = coeff[(i, j)] * C64::new(factor, 0.0);
                for r in 0..out.nrows() {
                    out[(r, j)] -= vi[r] * corr;
                }
            }
        }
    }
    normalize_columns(&mut out, ANNIHILATED);
    Ok(out)
}

/// Receive-side projection mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RxBfcMode {
    ZeroForcing,
    Regularized(f64),
}

/// Shape the half-duplex combiner around the output leakage
/// `L = H_SI F_RF F_BB` striking the receive array.
///
/// Zero-forcing projects onto the orthogonal complement of span(L);
/// the regularized mode solves `(I + mu·L·Lᴴ)^{-1} w`. Columns come back
/// unit-norm (combiners carry no power constraint).
pub fn rx_bfc_project(w_hd: &CMat, leakage: &CMat, mode: RxBfcMode) -> Result<CMat> {
    let nr = w_hd.nrows();
    if leakage.nrows() != nr {
        return Err(Error::dim(
            "cancellation",
            format!("leakage rows {} vs combiner rows {nr}", leakage.nrows()),
        ));
    }
    if leakage.ncols() > nr {
        return Err(Error::dim(
            "cancellation",
            format!(
                "leakage has {} columns, more than the {nr}-element receive array",
                leakage.ncols()
            ),
        ));
    }
    let svd = leakage.clone().svd(true, false);
    let u = svd.u.as_ref().expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);

    let mut out = match mode {
        RxBfcMode::ZeroForcing => {
            let rank = svd
                .singular_values
                .iter()
                .filter(|s| **s > (1e-12 * smax).max(1e-300))
                .count();
            if rank >= nr {
                return Err(Error::EmptyNullSpace(format!(
                    "leakage spans the whole {nr}-dimensional receive space"
                )));
            }
            let ur = u.columns(0, rank).into_owned();
            let projected = w_hd - &ur * (ur.adjoint() * w_hd);
            let mut fixed = projected;
            let mut replacements = 0usize;
            for j in 0..fixed.ncols() {
                if fixed.column(j).norm() < ANNIHILATED {
                    let col = complement_vector(&ur, replacements).ok_or_else(|| {
                        Error::EmptyNullSpace("no combiner direction outside the leakage".into())
                    })?;
                    fixed.set_column(j, &col);
                    replacements += 1;
                }
            }
            fixed
        }
        RxBfcMode::Regularized(mu) => {
            if !(mu >= 0.0) {
                return Err(Error::param("cancellation", "mu must be >= 0"));
            }
            let coeff = u.adjoint() * w_hd;
            let mut shaped = w_hd.clone();
            for (i, s) in svd.singular_values.iter().enumerate() {
                let factor = mu * s * s / (1.0 + mu * s * s);
                if factor != 0.0 {
                    let ui = u.column(i);
                    for j in 0..shaped.ncols() {
                        let corr = coeff[(i, j)] * C64::new(factor, 0.0);
                        for r in 0..shaped.nrows() {
                            shaped[(r, j)] -= ui[r] * corr;
                        }
                    }
                }
            }
            shaped
        }
    };
    normalize_columns(&mut out, ANNIHILATED);
    Ok(out)
}

/// Residual RF-chain coupling after analog cancellation.
///
/// The canceller observes `Ĥ = h_eff_rf + E` with independent zero-mean
/// complex-Gaussian entries of standard deviation
/// `sigma · ‖h_eff_rf‖_F / sqrt(entry count)` and subtracts it, leaving
/// `-E`. The expected residual energy is `sigma² ‖h_eff_rf‖²_F`.
pub fn analog_sic_apply(h_eff_rf: &CMat, sic: &AnalogSicConfig, seed: u64) -> CMat {
    let count = (h_eff_rf.nrows() * h_eff_rf.ncols()) as f64;
    let scale = sic.estimation_error_std * (crate::util::fro_norm_sq(h_eff_rf) / count).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_component = scale * std::f64::consts::FRAC_1_SQRT_2;
    let mut residual = CMat::zeros(h_eff_rf.nrows(), h_eff_rf.ncols());
    // Row-major draw order keeps the realization independent of storage
    // layout.
    for i in 0..h_eff_rf.nrows() {
        for j in 0..h_eff_rf.ncols() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            residual[(i, j)] = -C64::new(re * per_component, im * per_component);
        }
    }
    residual
}

/// Digital suppression floor applied to residual power (linear in, linear
/// out).
pub fn digital_sic_apply(residual_power: f64, sic: &DigitalSicConfig) -> f64 {
    residual_power * sic.suppression_factor()
}
