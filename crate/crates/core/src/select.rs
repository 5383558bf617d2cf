//! Uplink user selection against a fixed transmit-side output leakage.
//!
//! With the transmitter fixed, the effective self-interference collapses to
//! the output leakage striking the receive array. Each candidate user is
//! scored by designing the receive combiner around that leakage and either
//! measuring the post-cancellation uplink rate or the normalized residual
//! coupling; the best candidate wins, ties broken by the lowest index.

use crate::beamforming::{design_half_duplex, to_hybrid, BeamformerRole, PhaseQuantizer};
use crate::cancellation::{rx_bfc_project, AnalogSicConfig, DigitalSicConfig, RxBfcMode};
use crate::channel::UserChannel;
use crate::error::{Error, Result};
use crate::link::{spectral_efficiency, LinkBudget};
use crate::util::{db_to_linear, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionPolicy {
    /// Highest post-cancellation receive spectral efficiency (bits/s/Hz).
    MaxRate,
    /// Lowest normalized residual coupling to the leakage.
    MaxOrthogonality,
}

/// Candidate uplink users plus the scoring policy.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub users: Vec<UserChannel>,
    pub policy: SelectionPolicy,
}

/// Shared evaluation parameters for scoring the candidates.
#[derive(Debug, Clone)]
pub struct SelectionContext {
    pub n_streams: usize,
    pub n_rf: usize,
    pub quantizer: PhaseQuantizer,
    pub budget: LinkBudget,
    pub analog_sic: Option<AnalogSicConfig>,
    pub digital_sic: DigitalSicConfig,
}

impl SelectionContext {
    /// Nominal power suppression of the configured SIC stages. Selection is
    /// deterministic, so the analog stage enters through its modeled
    /// `sigma²` factor rather than a random residual draw.
    fn sic_power_factor(&self) -> f64 {
        let analog = self
            .analog_sic
            .map(|a| a.estimation_error_std.powi(2))
            .unwrap_or(1.0);
        analog * self.digital_sic.suppression_factor()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserScore {
    pub user_id: String,
    pub score: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub chosen: String,
    pub scores: Vec<UserScore>,
}

/// Score one candidate: design the combiner under `rule` against the
/// leakage, orthonormalize, and return
/// (post-cancellation uplink SE, normalized residual coupling).
pub fn score_candidate(
    candidate: &CMat,
    leakage: &CMat,
    rule: RxBfcMode,
    ctx: &SelectionContext,
) -> Result<(f64, f64)> {
    let n_streams = ctx
        .n_streams
        .min(candidate.ncols())
        .min(candidate.nrows())
        .max(1);
    let w_hd = design_half_duplex(candidate, n_streams, BeamformerRole::Combiner)?;
    let w_design = rx_bfc_project(&w_hd, leakage, rule)?;
    let (w_hyb, _) = to_hybrid(&w_design, ctx.n_rf, &ctx.quantizer, BeamformerRole::Combiner)?;
    let q = w_hyb.effective().qr().q();

    let coupled = q.adjoint() * leakage;
    let leak_energy = leakage.norm_squared();
    let residual_coupling = if leak_energy > 0.0 {
        coupled.norm_squared() / (q.norm_squared() * leak_energy)
    } else {
        0.0
    };

    let noise = db_to_linear(ctx.budget.noise_floor_dbm());
    let p_sig = db_to_linear(ctx.budget.noise_floor_dbm() + ctx.budget.rx_snr_db);
    let p_tx = ctx.budget.tx_power_mw();
    let gamma = ctx.sic_power_factor();
    let c_si = &coupled * coupled.adjoint() * C64::new(gamma * p_tx / n_streams as f64, 0.0);

    let g_ul = q.adjoint() * candidate;
    let f_user = design_half_duplex(&g_ul, n_streams, BeamformerRole::Precoder)?;
    let h_eff = &g_ul * &f_user;
    let se = spectral_efficiency(&h_eff, &c_si, noise, p_sig)?;
    Ok((se, residual_coupling))
}

/// Choose the uplink user that costs the fewest spatial resources to serve
/// next to the fixed output leakage. Returns the winner and every
/// candidate's score for audit.
pub fn select_rx_user(
    candidates: &CandidateSet,
    leakage: &CMat,
    combiner_rule: RxBfcMode,
    ctx: &SelectionContext,
) -> Result<Selection> {
    if candidates.users.is_empty() {
        return Err(Error::param("user-select", "candidate set is empty"));
    }
    for user in &candidates.users {
        if user.matrix.nrows() != leakage.nrows() {
            return Err(Error::dim(
                "user-select",
                format!(
                    "candidate {} has {} receive rows, leakage has {}",
                    user.user_id,
                    user.matrix.nrows(),
                    leakage.nrows()
                ),
            ));
        }
    }

    let mut scores = Vec::with_capacity(candidates.users.len());
    for user in &candidates.users {
        let (se, coupling) = score_candidate(&user.matrix, leakage, combiner_rule, ctx)?;
        let score = match candidates.policy {
            SelectionPolicy::MaxRate => se,
            SelectionPolicy::MaxOrthogonality => coupling,
        };
        scores.push(score);
    }

    // argbest with ties to the lowest index: strictly-better-than keeps the
    // earliest winner.
    let better = |a: f64, b: f64| match candidates.policy {
        SelectionPolicy::MaxRate => a > b,
        SelectionPolicy::MaxOrthogonality => a < b,
    };
    let mut best = 0usize;
    for i in 1..scores.len() {
        if better(scores[i], scores[best]) {
            best = i;
        }
    }

    let report = candidates
        .users
        .iter()
        .zip(scores.iter())
        .enumerate()
        .map(|(i, (user, score))| UserScore {
            user_id: user.user_id.clone(),
            score: *score,
            selected: i == best,
        })
        .collect();
    Ok(Selection {
        chosen: candidates.users[best].user_id.clone(),
        scores: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::CVec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> SelectionContext {
        SelectionContext {
            n_streams: 1,
            n_rf: 1,
            quantizer: PhaseQuantizer::ideal(),
            budget: LinkBudget {
                tx_power_dbm: 30.0,
                bandwidth_hz: 400e6,
                noise_figure_db: 5.0,
                lna_sat_dbm: -5.0,
                adc_sat_dbm: -25.0,
                rx_snr_db: 20.0,
            },
            analog_sic: None,
            digital_sic: DigitalSicConfig { suppression_db: 0.0 },
        }
    }

    /// Rank-1 candidate whose dominant receive direction is `dir`.
    fn directional_user(id: &str, dir: &[C64]) -> UserChannel {
        let u = CVec::from_column_slice(dir);
        let v = CVec::from_element(2, C64::new(1.0, 0.0));
        let mut m = CMat::zeros(dir.len(), 2);
        for i in 0..dir.len() {
            for j in 0..2 {
                m[(i, j)] = u[i] * v[j].conj();
            }
        }
        // Normalize to the UserChannel energy convention.
        let target = (m.nrows() * m.ncols()) as f64;
        let scale = (target / m.norm_squared()).sqrt();
        UserChannel {
            matrix: m * C64::new(scale, 0.0),
            user_id: id.into(),
        }
    }

    #[test]
    fn orthogonality_picks_user_clear_of_the_leakage() {
        // Leakage along e1; candidates dominant along e1, e2, (e1+e2)/√2:
        // the e2 user couples least.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let users = vec![
            directional_user("A", &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            directional_user("B", &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
            directional_user("C", &[C64::new(s, 0.0), C64::new(s, 0.0)]),
        ];
        let leakage = CMat::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let set = CandidateSet {
            users,
            policy: SelectionPolicy::MaxOrthogonality,
        };
        // No projection: score the raw half-duplex combiners.
        let sel = select_rx_user(&set, &leakage, RxBfcMode::Regularized(0.0), &ctx()).unwrap();
        assert_eq!(sel.chosen, "B");
        assert_eq!(sel.scores.len(), 3);
        assert!(sel.scores[1].selected);
        // Brute-force check over the three couplings.
        let best_by_hand = sel
            .scores
            .iter()
            .min_by(|a, b| a.score.partial_cmp(&b.score).unwrap())
            .unwrap();
        assert_eq!(best_by_hand.user_id, "B");
    }

    #[test]
    fn single_candidate_always_wins() {
        let users = vec![directional_user("only", &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)])];
        let leakage = CMat::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let set = CandidateSet {
            users,
            policy: SelectionPolicy::MaxRate,
        };
        let sel = select_rx_user(&set, &leakage, RxBfcMode::Regularized(1.0), &ctx()).unwrap();
        assert_eq!(sel.chosen, "only");
    }

    #[test]
    fn empty_candidate_set_errors() {
        let set = CandidateSet {
            users: vec![],
            policy: SelectionPolicy::MaxRate,
        };
        let leakage = CMat::zeros(2, 1);
        assert!(select_rx_user(&set, &leakage, RxBfcMode::ZeroForcing, &ctx()).is_err());
    }

    #[test]
    fn orthogonality_score_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let make = CMat::from_fn(4, 2, |_, _| crate::rng::complex_gaussian(&mut rng));
        let leakage = CMat::from_fn(4, 1, |_, _| crate::rng::complex_gaussian(&mut rng));
        let c = ctx();
        let (_, coupling) =
            score_candidate(&make, &leakage, RxBfcMode::Regularized(0.5), &c).unwrap();
        let scaled = make * C64::new(7.5, 0.0);
        let (_, coupling2) =
            score_candidate(&scaled, &leakage, RxBfcMode::Regularized(0.5), &c).unwrap();
        assert!(
            (coupling - coupling2).abs() < 1e-12,
            "{coupling} vs {coupling2}"
        );
    }

    #[test]
    fn duplicate_winner_keeps_the_winning_score() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut users = vec![
            directional_user("A", &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            directional_user("B", &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
            directional_user("C", &[C64::new(s, 0.0), C64::new(s, 0.0)]),
        ];
        let leakage = CMat::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let set = CandidateSet {
            users: users.clone(),
            policy: SelectionPolicy::MaxOrthogonality,
        };
        let c = ctx();
        let first = select_rx_user(&set, &leakage, RxBfcMode::Regularized(0.0), &c).unwrap();
        let winning_score = first
            .scores
            .iter()
            .find(|s| s.selected)
            .unwrap()
            .score;

        let mut dup = directional_user("B2", &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        dup.user_id = "B2".into();
        users.push(dup);
        let set2 = CandidateSet {
            users,
            policy: SelectionPolicy::MaxOrthogonality,
        };
        let second = select_rx_user(&set2, &leakage, RxBfcMode::Regularized(0.0), &c).unwrap();
        let winning_score2 = second
            .scores
            .iter()
            .find(|s| s.selected)
            .unwrap()
            .score;
        assert!((winning_score - winning_score2).abs() < 1e-12);
        // Tie resolves to the earlier index.
        assert_eq!(second.chosen, "B");
    }
}
