//! Half-duplex-optimal beamformer design, quantized hybrid factorization,
//! and analog codebook construction/refinement.
//!
//! A hybrid beamformer cascades an analog stage (one phase shifter per
//! antenna per RF chain, unit-modulus entries on a quantized phase grid)
//! with an unconstrained digital stage across RF chains.

use std::f64::consts::TAU;

use crate::array::{far_field_response, ArrayGeometry};
use crate::error::{Error, Result};
use crate::util::{fro_norm_sq, normalize_columns, CMat, CVec, C64};

/// Phase-shifter resolution: a b-bit grid `{2πk/2^b}` or ideal (continuous).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseResolution {
    Ideal,
    Bits(u8),
}

/// Quantization model of the analog beamforming network. Amplitude control
/// (attenuators) is carried as a hook but disabled by default; the analog
/// entries stay unit-modulus either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseQuantizer {
    pub resolution: PhaseResolution,
    pub amplitude_bits: Option<u8>,
}

impl PhaseQuantizer {
    pub fn ideal() -> Self {
        PhaseQuantizer {
            resolution: PhaseResolution::Ideal,
            amplitude_bits: None,
        }
    }

    pub fn bits(b: u8) -> Result<Self> {
        if b == 0 {
            return Err(Error::param("beamforming", "phase_bits must be >= 1"));
        }
        Ok(PhaseQuantizer {
            resolution: PhaseResolution::Bits(b),
            amplitude_bits: None,
        })
    }

    /// Grid spacing 2π/2^b, or `None` for the ideal quantizer.
    pub fn grid_spacing(&self) -> Option<f64> {
        match self.resolution {
            PhaseResolution::Ideal => None,
            PhaseResolution::Bits(b) => Some(TAU / (1u64 << b) as f64),
        }
    }

    /// Snap a phase to the nearest grid point, ties toward the smaller phase.
    pub fn quantize_phase(&self, phase: f64) -> f64 {
        match self.grid_spacing() {
            None => phase,
            Some(step) => {
                let wrapped = phase.rem_euclid(TAU);
                let cells = wrapped / step;
                let mut k = cells.round();
                // Round half away from zero would pick the larger phase on a
                // tie; pull it back down.
                if (cells.fract() - 0.5).abs() < 1e-12 {
                    k = cells.floor();
                }
                (k * step).rem_euclid(TAU)
            }
        }
    }

    /// Whether `phase` lies on the quantizer grid within `tol`.
    pub fn on_grid(&self, phase: f64, tol: f64) -> bool {
        match self.grid_spacing() {
            None => true,
            Some(step) => {
                let wrapped = phase.rem_euclid(TAU);
                let k = (wrapped / step).round();
                let nearest = (k * step).rem_euclid(TAU);
                let mut d = (wrapped - nearest).abs();
                if d > std::f64::consts::PI {
                    d = TAU - d;
                }
                d <= tol
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamformerRole {
    Precoder,
    Combiner,
}

/// Analog + digital beamformer pair.
///
/// Invariants (checked by [`HybridBeamformer::validate`]): every analog
/// entry is unit-modulus with a grid phase; `N_s <= N_rf <= N_ant`; and a
/// precoder carries total power `‖analog·digital‖²_F = N_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBeamformer {
    pub analog: CMat,
    pub digital: CMat,
    pub role: BeamformerRole,
    pub quantizer: PhaseQuantizer,
}

impl HybridBeamformer {
    pub fn n_antennas(&self) -> usize {
        self.analog.nrows()
    }

    pub fn n_rf(&self) -> usize {
        self.analog.ncols()
    }

    pub fn n_streams(&self) -> usize {
        self.digital.ncols()
    }

    /// The composite matrix `analog · digital`.
    pub fn effective(&self) -> CMat {
        &self.analog * &self.digital
    }

    pub fn validate(&self) -> Result<()> {
        if self.digital.nrows() != self.n_rf() {
            return Err(Error::dim(
                "beamforming",
                format!(
                    "digital stage has {} rows for {} RF chains",
                    self.digital.nrows(),
                    self.n_rf()
                ),
            ));
        }
        if !(self.n_streams() <= self.n_rf() && self.n_rf() <= self.n_antennas()) {
            return Err(Error::param(
                "beamforming",
                format!(
                    "stream/RF/antenna chain violated: {} <= {} <= {}",
                    self.n_streams(),
                    self.n_rf(),
                    self.n_antennas()
                ),
            ));
        }
        for z in self.analog.iter() {
            if (z.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::param(
                    "beamforming",
                    format!("analog entry {z} is not unit-modulus"),
                ));
            }
            if !self.quantizer.on_grid(z.arg(), 1e-9) {
                return Err(Error::param(
                    "beamforming",
                    format!("analog phase {} off the quantizer grid", z.arg()),
                ));
            }
        }
        if self.role == BeamformerRole::Precoder {
            let p = fro_norm_sq(&self.effective());
            let target = self.n_streams() as f64;
            if (p - target).abs() > 1e-9 * target.max(1.0) {
                return Err(Error::param(
                    "beamforming",
                    format!("precoder power {p} != streams {target}"),
                ));
            }
        }
        Ok(())
    }
}

/// Deterministic global-phase fix: rotate a column so its largest-magnitude
/// entry is real-positive.
fn phase_fix_column(col: &mut nalgebra::DVectorViewMut<C64>) {
    let mut best = 0usize;
    let mut best_mag = -1.0f64;
    for (i, z) in col.iter().enumerate() {
        let m = z.norm();
        if m > best_mag + 1e-15 {
            best_mag = m;
            best = i;
        }
    }
    if best_mag > 1e-300 {
        let rot = col[best].conj() / C64::new(best_mag, 0.0);
        for z in col.iter_mut() {
            *z *= rot;
        }
    }
}

/// Fully digital half-duplex-optimal beamformer for `channel`.
///
/// Precoder role returns the top right singular vectors, combiner role the
/// top left singular vectors; columns are orthonormal (squared Frobenius
/// norm = `n_streams`). Singular values are taken in descending order and
/// each column is phase-rotated so its largest entry is real-positive,
/// making the output deterministic across runs.
pub fn design_half_duplex(channel: &CMat, n_streams: usize, role: BeamformerRole) -> Result<CMat> {
    let min_dim = channel.nrows().min(channel.ncols());
    if n_streams == 0 || n_streams > min_dim {
        return Err(Error::param(
            "beamforming",
            format!(
                "n_streams {n_streams} outside 1..={} for a {}x{} channel",
                min_dim,
                channel.nrows(),
                channel.ncols()
            ),
        ));
    }
    let svd = channel.clone().svd(true, true);
    let mut out = match role {
        BeamformerRole::Precoder => {
            let v = svd.v_t.expect("requested V").adjoint();
            v.columns(0, n_streams).into_owned()
        }
        BeamformerRole::Combiner => {
            let u = svd.u.expect("requested U");
            u.columns(0, n_streams).into_owned()
        }
    };
    for mut col in out.column_iter_mut() {
        phase_fix_column(&mut col);
    }
    normalize_columns(&mut out, 1e-300);
    Ok(out)
}

/// Best unit-modulus, grid-phase approximation of one column together with
/// its diagonal least-squares scale.
///
/// The digital scalar absorbs any global rotation of the column, so the
/// quantizer searches the candidate rotations (one per distinct grid
/// assignment) and keeps the one maximizing `|aᴴ f|`. The grids are nested
/// in the bit depth, which makes the factorization error non-increasing as
/// phase resolution grows.
fn quantize_column(f: &CVec, quantizer: &PhaseQuantizer) -> (CVec, C64) {
    let n = f.len();
    let phases: Vec<f64> = f.iter().map(|z| z.arg()).collect();

    let analog_for = |rotation: f64| -> CVec {
        CVec::from_iterator(
            n,
            phases.iter().map(|&p| {
                let q = quantizer.quantize_phase(p - rotation);
                C64::new(q.cos(), q.sin())
            }),
        )
    };

    let analog = match quantizer.grid_spacing() {
        None => CVec::from_iterator(n, phases.iter().map(|&p| C64::new(p.cos(), p.sin()))),
        Some(step) => {
            // Assignment breakpoints: rotations where some entry crosses a
            // mid-cell boundary. Midpoints between consecutive breakpoints
            // enumerate every distinct assignment exactly once.
            let mut breaks: Vec<f64> = phases
                .iter()
                .map(|&p| (p - step / 2.0).rem_euclid(step))
                .collect();
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            let mut candidates = Vec::with_capacity(breaks.len() + 1);
            candidates.push(0.0);
            for w in 0..breaks.len() {
                let next = if w + 1 < breaks.len() {
                    breaks[w + 1]
                } else {
                    breaks[0] + step
                };
                candidates.push(((breaks[w] + next) / 2.0).rem_euclid(step));
            }
            let mut best: Option<(f64, CVec)> = None;
            for &rot in &candidates {
                let a = analog_for(rot);
                let score = a.dotc(f).norm();
                match &best {
                    Some((s, _)) if score <= *s + 1e-15 => {}
                    _ => best = Some((score, a)),
                }
            }
            best.expect("at least one candidate").1
        }
    };
    let scale = analog.dotc(f) / C64::new(n as f64, 0.0);
    (analog, scale)
}

/// Least-squares digital stage for a fixed analog stage.
fn solve_digital(analog: &CMat, design: &CMat) -> CMat {
    analog
        .clone()
        .svd(true, true)
        .solve(design, 1e-12)
        .expect("svd solve with u/v computed")
}

/// Factor a fully digital design into a quantized hybrid beamformer.
///
/// When the RF-chain count equals the stream count, each analog column takes
/// the quantized phase profile of the corresponding design column and the
/// digital stage is the diagonal least-squares scaling. Otherwise the two
/// stages are refined by alternating least squares (at most 50 rounds or a
/// relative residual change below 1e-6).
///
/// Returns the beamformer and the factorization residual
/// `‖analog·digital − design‖_F` (measured before the precoder power
/// renormalization).
pub fn to_hybrid(
    design: &CMat,
    n_rf: usize,
    quantizer: &PhaseQuantizer,
    role: BeamformerRole,
) -> Result<(HybridBeamformer, f64)> {
    let n_ant = design.nrows();
    let n_s = design.ncols();
    if n_rf < n_s {
        return Err(Error::param(
            "beamforming",
            format!("n_rf {n_rf} < n_streams {n_s}"),
        ));
    }
    if n_rf > n_ant {
        return Err(Error::param(
            "beamforming",
            format!("n_rf {n_rf} > antennas {n_ant}"),
        ));
    }

    let (analog, mut digital) = if n_rf == n_s {
        let mut analog = CMat::zeros(n_ant, n_rf);
        let mut digital = CMat::zeros(n_rf, n_s);
        for j in 0..n_s {
            let col: CVec = design.column(j).into_owned();
            let (a, d) = quantize_column(&col, quantizer);
            analog.set_column(j, &a);
            digital[(j, j)] = d;
        }
        (analog, digital)
    } else {
        // Seed the extra chains with quantized DFT beams so the start is
        // deterministic, then alternate.
        let mut analog = CMat::zeros(n_ant, n_rf);
        for r in 0..n_rf {
            let col: CVec = if r < n_s {
                design.column(r).into_owned()
            } else {
                CVec::from_fn(n_ant, |i, _| {
                    let phase = TAU * (i as f64) * (r as f64) / n_ant as f64;
                    C64::new(phase.cos(), phase.sin())
                })
            };
            let (a, _) = quantize_column(&col, quantizer);
            analog.set_column(r, &a);
        }
        let mut digital = solve_digital(&analog, design);
        let mut prev_err = (&analog * &digital - design).norm();
        for _ in 0..50 {
            // Unconstrained analog update, then per-column quantized
            // projection; the digital rows absorb the column rotations.
            let unconstrained = design
                * digital
                    .clone()
                    .svd(true, true)
                    .pseudo_inverse(1e-12)
                    .expect("svd pseudo-inverse");
            for r in 0..n_rf {
                let col: CVec = unconstrained.column(r).into_owned();
                let (a, _) = quantize_column(&col, quantizer);
                analog.set_column(r, &a);
            }
            digital = solve_digital(&analog, design);
            let err = (&analog * &digital - design).norm();
            if (prev_err - err).abs() <= 1e-6 * prev_err.max(1e-300) {
                prev_err = err;
                break;
            }
            prev_err = err;
        }
        let _ = prev_err;
        (analog, digital)
    };

    let residual = (&analog * &digital - design).norm();

    if role == BeamformerRole::Precoder {
        let p = fro_norm_sq(&(&analog * &digital));
        if p <= 0.0 {
            return Err(Error::param(
                "beamforming",
                "hybrid factorization collapsed to zero power",
            ));
        }
        let s = (n_s as f64 / p).sqrt();
        digital *= C64::new(s, 0.0);
    }

    let hb = HybridBeamformer {
        analog,
        digital,
        role,
        quantizer: *quantizer,
    };
    Ok((hb, residual))
}

/// A set of unit-modulus analog beams.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub beams: Vec<CVec>,
    pub labels: Vec<String>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.beams.is_empty() {
            return Err(Error::param("beamforming", "codebook is empty"));
        }
        if self.labels.len() != self.beams.len() {
            return Err(Error::param("beamforming", "codebook labels out of sync"));
        }
        for (i, b) in self.beams.iter().enumerate() {
            for z in b.iter() {
                if (z.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::param(
                        "beamforming",
                        format!("beam {i} has a non-unit-modulus entry"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Oversampled DFT codebook: beam m entry n is
/// `exp(j 2π n m / (n_ant · oversampling))`.
pub fn dft_codebook(n_ant: usize, oversampling: usize) -> Result<Codebook> {
    if n_ant < 1 || oversampling < 1 {
        return Err(Error::param(
            "beamforming",
            "codebook needs n_ant >= 1 and oversampling >= 1",
        ));
    }
    let total = n_ant * oversampling;
    let beams = (0..total)
        .map(|m| {
            CVec::from_fn(n_ant, |n, _| {
                let phase = TAU * (n as f64) * (m as f64) / total as f64;
                C64::new(phase.cos(), phase.sin())
            })
        })
        .collect();
    let labels = (0..total).map(|m| format!("dft_{m}")).collect();
    Ok(Codebook { beams, labels })
}

/// Normalized coupled power between every (rx beam, tx beam) pair:
/// entry (i, j) = `|w_iᴴ H f_j|² / (‖w_i‖² ‖f_j‖²)`, linear power gain.
pub fn codebook_isolation_map(
    tx_cb: &Codebook,
    rx_cb: &Codebook,
    h_si: &CMat,
) -> Result<nalgebra::DMatrix<f64>> {
    tx_cb.validate()?;
    rx_cb.validate()?;
    for b in &tx_cb.beams {
        if b.len() != h_si.ncols() {
            return Err(Error::dim(
                "beamforming",
                format!("tx beam length {} vs channel Nt {}", b.len(), h_si.ncols()),
            ));
        }
    }
    for b in &rx_cb.beams {
        if b.len() != h_si.nrows() {
            return Err(Error::dim(
                "beamforming",
                format!("rx beam length {} vs channel Nr {}", b.len(), h_si.nrows()),
            ));
        }
    }
    let mut map = nalgebra::DMatrix::<f64>::zeros(rx_cb.len(), tx_cb.len());
    for (j, f) in tx_cb.beams.iter().enumerate() {
        let hf = h_si * f;
        let f_pow = f.norm_squared();
        for (i, w) in rx_cb.beams.iter().enumerate() {
            let num = w.dotc(&hf).norm_sqr();
            map[(i, j)] = num / (w.norm_squared() * f_pow);
        }
    }
    Ok(map)
}

/// Worst (largest) pairwise coupling of a codebook used on both sides of
/// `h_si`.
fn worst_pair_coupling(beams: &[CVec], h_si: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for f in beams {
        let hf = h_si * f;
        let f_pow = f.norm_squared();
        for w in beams {
            let c = w.dotc(&hf).norm_sqr() / (w.norm_squared() * f_pow);
            worst = worst.max(c);
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineReport {
    pub worst_pair_before: f64,
    pub worst_pair_after: f64,
}

/// Shrink each beam toward the self-interference null space while keeping
/// its gain toward its original steering direction within
/// `gain_loss_budget_db`.
///
/// Per beam, a bisection over a log-spaced regularizer grid (40 steps) finds
/// the largest Tikhonov shrinkage whose phase-only re-projection stays
/// within the gain budget; a refined beam is kept only if it does not
/// increase the codebook's worst pairwise coupling. The same codebook is
/// used on the transmit and receive sides, so `h_si` must be square with
/// dimensions matching the beam length. `geom` supplies the steering vectors
/// used to measure per-direction gain.
pub fn refine_codebook(
    cb: &Codebook,
    h_si: &CMat,
    gain_loss_budget_db: f64,
    geom: &ArrayGeometry,
) -> Result<(Codebook, RefineReport)> {
    cb.validate()?;
    if gain_loss_budget_db < 0.0 {
        return Err(Error::param(
            "beamforming",
            "gain_loss_budget_db must be >= 0",
        ));
    }
    if h_si.nrows() != h_si.ncols() {
        return Err(Error::dim(
            "beamforming",
            "codebook refinement assumes matching tx/rx arrays (square channel)",
        ));
    }
    for b in &cb.beams {
        if b.len() != h_si.ncols() || b.len() != geom.len() {
            return Err(Error::dim(
                "beamforming",
                "beam length must match the channel and geometry",
            ));
        }
    }

    let before = worst_pair_coupling(&cb.beams, h_si);
    if gain_loss_budget_db == 0.0 {
        return Ok((
            cb.clone(),
            RefineReport {
                worst_pair_before: before,
                worst_pair_after: before,
            },
        ));
    }

    // Gain reference directions on a fine grid.
    let grid: Vec<f64> = (0..721)
        .map(|k| -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 720.0)
        .collect();
    let steering: Vec<CVec> = grid
        .iter()
        .map(|&a| far_field_response(geom, a))
        .collect::<Result<_>>()?;
    let gain_toward = |beam: &CVec, dir_idx: usize| -> f64 {
        steering[dir_idx].dotc(beam).norm_sqr()
    };

    let svd = h_si.clone().svd(false, true);
    let v = svd.v_t.as_ref().expect("requested V").adjoint();
    let sigma2: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();

    let shrink = |beam: &CVec, mu: f64| -> CVec {
        // (I + mu HᴴH)^{-1} beam through the SVD filter factors, then
        // phase-only re-projection to unit modulus.
        let coeffs = v.adjoint() * beam;
        let mut out = beam.clone();
        for (i, &s2) in sigma2.iter().enumerate() {
            let factor = mu * s2 / (1.0 + mu * s2);
            let corr = v.column(i) * (coeffs[i] * C64::new(factor, 0.0));
            out -= corr;
        }
        CVec::from_iterator(
            beam.len(),
            out.iter().map(|z| {
                let p = z.arg();
                C64::new(p.cos(), p.sin())
            }),
        )
    };

    let mut beams = cb.beams.clone();
    for idx in 0..beams.len() {
        let original = cb.beams[idx].clone();
        let dir = (0..grid.len())
            .max_by(|&a, &b| {
                gain_toward(&original, a)
                    .partial_cmp(&gain_toward(&original, b))
                    .unwrap()
            })
            .unwrap();
        let g0 = gain_toward(&original, dir);
        let budget_lin = 10f64.powf(-gain_loss_budget_db / 10.0);
        let feasible = |mu: f64| -> Option<CVec> {
            let cand = shrink(&original, mu);
            let g = gain_toward(&cand, dir);
            if g >= budget_lin * g0 {
                Some(cand)
            } else {
                None
            }
        };

        // Largest feasible regularizer by bisection on the exponent.
        let (mut lo, mut hi) = (-6.0f64, 6.0f64);
        let mut chosen: Option<CVec> = None;
        if let Some(c) = feasible(10f64.powf(hi)) {
            chosen = Some(c);
        } else {
            if feasible(10f64.powf(lo)).is_none() {
                continue; // even the smallest shrink violates the budget
            }
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                match feasible(10f64.powf(mid)) {
                    Some(c) => {
                        chosen = Some(c);
                        lo = mid;
                    }
                    None => hi = mid,
                }
            }
        }
        if let Some(cand) = chosen {
            // Greedy guard: keep the refinement only if the global worst-pair
            // coupling does not increase.
            let current = worst_pair_coupling(&beams, h_si);
            let prev = std::mem::replace(&mut beams[idx], cand);
            if worst_pair_coupling(&beams, h_si) > current + 1e-15 {
                beams[idx] = prev;
            }
        }
    }

    let after = worst_pair_coupling(&beams, h_si);
    Ok((
        Codebook {
            beams,
            labels: cb.labels.clone(),
        },
        RefineReport {
            worst_pair_before: before,
            worst_pair_after: after,
        },
    ))
}
