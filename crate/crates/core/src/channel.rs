//! Self-interference and user channel synthesis.
//!
//! The self-interference channel couples a transceiver's own transmit array
//! into its receive array. It mixes a deterministic spherical-wave component
//! between the co-located arrays with a stochastic clustered ray component
//! from environmental reflections; a Rician factor throttles the power split
//! and a large-scale gain captures the RF isolation between the arrays. Both
//! components are normalized to equal energy before mixing.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::array::{far_field_response, near_field_response, ArrayGeometry};
use crate::error::{Error, Result};
use crate::rng::complex_gaussian;
use crate::util::{fmt_sig17, fro_norm_sq, CMat, C64};

/// Relative tolerance for the equal-energy normalization checks.
const NORM_TOL: f64 = 1e-6;

/// Rigid placement of one array relative to another, in wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about the z-axis (in the array plane) followed by a
    /// translation.
    pub fn yaw_then_translate(yaw_rad: f64, translation: Vector3<f64>) -> Self {
        let (s, c) = yaw_rad.sin_cos();
        let rotation = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let defect = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if defect > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::param(
                "si-channel",
                "rotation must be a proper orthonormal matrix",
            ));
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }
}

/// Default relative pose of a transceiver's receive array: collinear with
/// the transmit array along x, `gap` wavelengths edge to edge, same
/// boresight.
pub fn side_by_side(tx: &ArrayGeometry, rx: &ArrayGeometry, gap: f64) -> RigidTransform {
    let (_, tx_hi) = tx.x_extent();
    let (rx_lo, _) = rx.x_extent();
    RigidTransform::from_translation(Vector3::new(tx_hi + gap - rx_lo, 0.0, 0.0))
}

/// Generative parameters for the clustered far-field ray model.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredChannelParams {
    pub num_clusters: usize,
    pub rays_per_cluster: usize,
    /// Per-ray angle offset standard deviation, radians.
    pub ray_angle_stddev: f64,
    pub seed: u64,
}

impl ClusteredChannelParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_clusters < 1 {
            return Err(Error::param("si-channel", "num_clusters must be >= 1"));
        }
        if self.rays_per_cluster < 1 {
            return Err(Error::param("si-channel", "rays_per_cluster must be >= 1"));
        }
        if !(self.ray_angle_stddev >= 0.0) {
            return Err(Error::param(
                "si-channel",
                "ray_angle_stddev must be >= 0",
            ));
        }
        Ok(())
    }
}

/// One propagation ray: complex gain plus departure/arrival azimuths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub gain: C64,
    pub departure: f64,
    pub arrival: f64,
}

fn clamp_angle(a: f64) -> f64 {
    a.clamp(-FRAC_PI_2, FRAC_PI_2)
}

/// Draw the ray set for `params`, deterministically from its seed.
///
/// Cluster-center angles are uniform on [-pi/2, pi/2]; per-ray offsets are
/// Gaussian with the configured stddev (clamped back into the visible
/// region); ray gains are standard complex Gaussian.
pub fn draw_rays(params: &ClusteredChannelParams) -> Result<Vec<Ray>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut rays = Vec::with_capacity(params.num_clusters * params.rays_per_cluster);
    for _ in 0..params.num_clusters {
        let center_dep = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        let center_arr = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
        for _ in 0..params.rays_per_cluster {
            let d_dep: f64 = rng.sample(StandardNormal);
            let d_arr: f64 = rng.sample(StandardNormal);
            let gain = complex_gaussian(&mut rng);
            rays.push(Ray {
                gain,
                departure: clamp_angle(center_dep + params.ray_angle_stddev * d_dep),
                arrival: clamp_angle(center_arr + params.ray_angle_stddev * d_arr),
            });
        }
    }
    Ok(rays)
}

/// Sum-of-rays channel `c · Σ α a_rx(θ_rx) a_tx(θ_tx)ᴴ`, scaled so the
/// squared Frobenius norm equals `Nt · Nr`.
pub fn channel_from_rays(
    tx_geom: &ArrayGeometry,
    rx_geom: &ArrayGeometry,
    rays: &[Ray],
) -> Result<CMat> {
    let nt = tx_geom.len();
    let nr = rx_geom.len();
    let mut h = CMat::zeros(nr, nt);
    for ray in rays {
        let a_tx = far_field_response(tx_geom, ray.departure)?;
        let a_rx = far_field_response(rx_geom, ray.arrival)?;
        for m in 0..nr {
            for n in 0..nt {
                h[(m, n)] += ray.gain * a_rx[m] * a_tx[n].conj();
            }
        }
    }
    normalize_to_element_count(h)
}

fn normalize_to_element_count(mut h: CMat) -> Result<CMat> {
    let target = (h.nrows() * h.ncols()) as f64;
    let norm_sq = fro_norm_sq(&h);
    if norm_sq <= 0.0 {
        return Err(Error::param(
            "si-channel",
            "degenerate channel draw with zero energy",
        ));
    }
    let c = (target / norm_sq).sqrt();
    h.iter_mut().for_each(|z| *z *= c);
    Ok(h)
}

/// Deterministic spherical-wave coupling between the transmit array and the
/// (rigidly placed) receive array, normalized to `Nt · Nr` energy.
pub fn near_field_channel(
    tx_geom: &ArrayGeometry,
    rx_geom: &ArrayGeometry,
    rx_pose: &RigidTransform,
) -> Result<CMat> {
    let nt = tx_geom.len();
    let nr = rx_geom.len();
    let mut h = CMat::zeros(nr, nt);
    for (m, p) in rx_geom.elements().iter().enumerate() {
        let obs = rx_pose.apply(p);
        let row = near_field_response(tx_geom, &obs)?;
        for n in 0..nt {
            h[(m, n)] = row[n];
        }
    }
    normalize_to_element_count(h)
}

/// Clustered stochastic reflection channel, normalized to `Nt · Nr` energy.
pub fn far_field_channel(
    tx_geom: &ArrayGeometry,
    rx_geom: &ArrayGeometry,
    params: &ClusteredChannelParams,
) -> Result<CMat> {
    let rays = draw_rays(params)?;
    channel_from_rays(tx_geom, rx_geom, &rays)
}

/// The assembled Nr×Nt self-interference channel together with its
/// provenance: the Rician factor, the isolation gain, and the retained
/// components.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfInterferenceChannel {
    pub matrix: CMat,
    /// Rician factor κ; `f64::INFINITY` selects the pure near-field limit.
    pub kappa: f64,
    /// Large-scale gain capturing RF isolation between the arrays.
    pub g_si: f64,
    pub near_field: CMat,
    pub far_field: CMat,
}

impl SelfInterferenceChannel {
    pub fn nt(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn nr(&self) -> usize {
        self.matrix.nrows()
    }
}

fn check_normalized(h: &CMat, name: &str) -> Result<()> {
    let target = (h.nrows() * h.ncols()) as f64;
    let norm_sq = fro_norm_sq(h);
    if (norm_sq - target).abs() > NORM_TOL * target {
        return Err(Error::NotNormalized(format!(
            "{name} has squared Frobenius norm {norm_sq}, expected {target}"
        )));
    }
    Ok(())
}

/// Mix pre-normalized near- and far-field components with Rician weights and
/// apply the isolation gain:
/// `H = g_si (sqrt(κ/(κ+1)) H_NF + sqrt(1/(κ+1)) H_FF)`.
pub fn assemble_si_channel(
    h_nf: CMat,
    h_ff: CMat,
    kappa: f64,
    g_si: f64,
) -> Result<SelfInterferenceChannel> {
    if h_nf.shape() != h_ff.shape() {
        return Err(Error::dim(
            "si-channel",
            format!(
                "near-field {:?} and far-field {:?} components differ in shape",
                h_nf.shape(),
                h_ff.shape()
            ),
        ));
    }
    if !(kappa >= 0.0) {
        return Err(Error::param("si-channel", "kappa must be >= 0 or infinite"));
    }
    if !(g_si > 0.0) {
        return Err(Error::param("si-channel", "g_si must be positive"));
    }
    check_normalized(&h_nf, "near-field component")?;
    check_normalized(&h_ff, "far-field component")?;

    let (w_nf, w_ff) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    };
    let g = C64::new(g_si, 0.0);
    let matrix = (&h_nf * C64::new(w_nf, 0.0) + &h_ff * C64::new(w_ff, 0.0)) * g;
    Ok(SelfInterferenceChannel {
        matrix,
        kappa,
        g_si,
        near_field: h_nf,
        far_field: h_ff,
    })
}

/// A far-field link between the full-duplex device and one distant user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub matrix: CMat,
    pub user_id: String,
}

/// Clustered channel between a transmitting endpoint and a receiving
/// endpoint, wrapped with the user's label. The matrix shape is
/// `rx_geom.len() × tx_geom.len()`.
pub fn user_channel(
    tx_geom: &ArrayGeometry,
    rx_geom: &ArrayGeometry,
    params: &ClusteredChannelParams,
    user_id: impl Into<String>,
) -> Result<UserChannel> {
    Ok(UserChannel {
        matrix: far_field_channel(tx_geom, rx_geom, params)?,
        user_id: user_id.into(),
    })
}

/// CSV text for a channel realization: one row per (rx_index, tx_index)
/// entry with 17-significant-digit real and imaginary parts.
pub fn channel_to_csv(h: &CMat) -> String {
    let mut out = String::from("rx_index,tx_index,re,im\n");
    for m in 0..h.nrows() {
        for n in 0..h.ncols() {
            let z = h[(m, n)];
            let _ = writeln!(out, "{m},{n},{},{}", fmt_sig17(z.re), fmt_sig17(z.im));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::ArrayKind;

    fn params(seed: u64) -> ClusteredChannelParams {
        ClusteredChannelParams {
            num_clusters: 3,
            rays_per_cluster: 5,
            ray_angle_stddev: 5f64.to_radians(),
            seed,
        }
    }

    #[test]
    fn near_field_channel_single_path_unit_phase() {
        let tx = ArrayGeometry::linear(1, 0.5).unwrap();
        let rx = ArrayGeometry::linear(1, 0.5).unwrap();
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 1.0));
        let h = near_field_channel(&tx, &rx, &pose).unwrap();
        assert!((h[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn near_field_channel_two_element_normalization() {
        // Pre-normalization entries [1, 0.8 e^{-j pi/2}]; after scaling the
        // squared Frobenius norm is exactly 2.
        let tx = ArrayGeometry::linear(1, 0.5).unwrap();
        let rx = ArrayGeometry::from_elements(
            vec![Vector3::zeros(), Vector3::new(0.75, 0.0, 0.0)],
            ArrayKind::Linear,
            0.75,
        )
        .unwrap();
        let pose = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 1.0));
        let h = near_field_channel(&tx, &rx, &pose).unwrap();
        assert!((fro_norm_sq(&h) - 2.0).abs() < 1e-12);
        // Entry ratio preserves the raw 0.8 e^{-j pi/2} relative response.
        let ratio = h[(1, 0)] / h[(0, 0)];
        assert!((ratio - C64::new(0.0, -0.8)).norm() < 1e-9);
    }

    #[test]
    fn near_field_channel_translation_invariant() {
        let tx = ArrayGeometry::linear(4, 0.5).unwrap();
        let rx = ArrayGeometry::linear(4, 0.5).unwrap();
        let pose = side_by_side(&tx, &rx, 2.0);
        let h1 = near_field_channel(&tx, &rx, &pose).unwrap();
        // Translate both arrays together: relative distances unchanged.
        let t = Vector3::new(-7.0, 2.0, 3.0);
        let tx2 = tx.translated(t);
        let rx2 = rx.clone();
        let pose2 = RigidTransform::from_translation(pose.translation() + t);
        let h2 = near_field_channel(&tx2, &rx2, &pose2).unwrap();
        assert!((&h1 - &h2).norm() < 1e-9);
    }

    #[test]
    fn near_field_channel_collision_errors() {
        let tx = ArrayGeometry::linear(2, 0.5).unwrap();
        let rx = ArrayGeometry::linear(2, 0.5).unwrap();
        let pose = RigidTransform::identity();
        assert!(matches!(
            near_field_channel(&tx, &rx, &pose),
            Err(Error::SingularRange(_))
        ));
    }

    #[test]
    fn single_broadside_ray_gives_all_ones() {
        let tx = ArrayGeometry::linear(2, 0.5).unwrap();
        let rx = ArrayGeometry::linear(2, 0.5).unwrap();
        let rays = [Ray {
            gain: C64::new(1.0, 0.0),
            departure: 0.0,
            arrival: 0.0,
        }];
        let h = channel_from_rays(&tx, &rx, &rays).unwrap();
        for z in h.iter() {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
        assert_eq!(h.rank(1e-9), 1);
    }

    #[test]
    fn far_field_channel_rank_bounded_by_ray_count() {
        let tx = ArrayGeometry::linear(8, 0.5).unwrap();
        let rx = ArrayGeometry::linear(8, 0.5).unwrap();
        let p = ClusteredChannelParams {
            num_clusters: 1,
            rays_per_cluster: 2,
            ray_angle_stddev: 5f64.to_radians(),
            seed: 9,
        };
        let h = far_field_channel(&tx, &rx, &p).unwrap();
        assert!(h.rank(1e-9) <= 2);
    }

    #[test]
    fn far_field_channel_deterministic_per_seed() {
        let tx = ArrayGeometry::linear(4, 0.5).unwrap();
        let rx = ArrayGeometry::linear(4, 0.5).unwrap();
        let a = far_field_channel(&tx, &rx, &params(11)).unwrap();
        let b = far_field_channel(&tx, &rx, &params(11)).unwrap();
        assert_eq!(a, b, "same seed must be bit-identical");
        let c = far_field_channel(&tx, &rx, &params(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn assemble_limits_and_mixture() {
        let tx = ArrayGeometry::linear(4, 0.5).unwrap();
        let rx = ArrayGeometry::linear(4, 0.5).unwrap();
        let pose = side_by_side(&tx, &rx, 2.0);
        let h_nf = near_field_channel(&tx, &rx, &pose).unwrap();
        let h_ff = far_field_channel(&tx, &rx, &params(3)).unwrap();
        let g = 0.01;

        let pure_nf = assemble_si_channel(h_nf.clone(), h_ff.clone(), f64::INFINITY, g).unwrap();
        assert!((&pure_nf.matrix - &(h_nf.clone() * C64::new(g, 0.0))).norm() < 1e-15);

        let pure_ff = assemble_si_channel(h_nf.clone(), h_ff.clone(), 0.0, g).unwrap();
        assert!((&pure_ff.matrix - &(h_ff.clone() * C64::new(g, 0.0))).norm() < 1e-15);

        let mixed = assemble_si_channel(h_nf.clone(), h_ff.clone(), 1.0, g).unwrap();
        let expect = (h_nf.clone() + h_ff.clone()) * C64::new(g / 2f64.sqrt(), 0.0);
        assert!((&mixed.matrix - &expect).norm() < 1e-12);
    }

    #[test]
    fn assemble_rejects_unnormalized_inputs() {
        let tx = ArrayGeometry::linear(2, 0.5).unwrap();
        let rx = ArrayGeometry::linear(2, 0.5).unwrap();
        let pose = side_by_side(&tx, &rx, 2.0);
        let h_nf = near_field_channel(&tx, &rx, &pose).unwrap();
        let h_bad = h_nf.clone() * C64::new(2.0, 0.0);
        assert!(matches!(
            assemble_si_channel(h_nf, h_bad, 1.0, 1.0),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn reconstruction_identity_holds() {
        let tx = ArrayGeometry::linear(8, 0.5).unwrap();
        let rx = ArrayGeometry::linear(8, 0.5).unwrap();
        let pose = side_by_side(&tx, &rx, 2.0);
        let h_nf = near_field_channel(&tx, &rx, &pose).unwrap();
        let h_ff = far_field_channel(&tx, &rx, &params(77)).unwrap();
        for &kappa in &[0.0, 0.5, 1.0, 10.0, 1e6] {
            let si = assemble_si_channel(h_nf.clone(), h_ff.clone(), kappa, 0.02).unwrap();
            let w_nf = (kappa / (kappa + 1.0)).sqrt();
            let w_ff = (1.0 / (kappa + 1.0)).sqrt();
            let rebuilt = (si.near_field.clone() * C64::new(w_nf, 0.0)
                + si.far_field.clone() * C64::new(w_ff, 0.0))
                * C64::new(si.g_si, 0.0);
            let rel = (&si.matrix - &rebuilt).norm() / si.matrix.norm();
            assert!(rel < 1e-12, "kappa {kappa}: relative error {rel}");
        }
    }

    #[test]
    fn kappa_monotone_toward_near_field() {
        let tx = ArrayGeometry::linear(4, 0.5).unwrap();
        let rx = ArrayGeometry::linear(4, 0.5).unwrap();
        let pose = side_by_side(&tx, &rx, 2.0);
        let h_nf = near_field_channel(&tx, &rx, &pose).unwrap();
        for seed in [5u64, 6, 7] {
            let h_ff = far_field_channel(&tx, &rx, &params(seed)).unwrap();
            let g = 0.1;
            let mut prev = f64::INFINITY;
            for &kappa in &[0.0, 0.3, 1.0, 3.0, 10.0, 100.0, 1e4] {
                let si = assemble_si_channel(h_nf.clone(), h_ff.clone(), kappa, g).unwrap();
                let dist = (&si.matrix - &(h_nf.clone() * C64::new(g, 0.0))).norm();
                assert!(
                    dist <= prev + 1e-12,
                    "seed {seed} kappa {kappa}: {dist} > {prev}"
                );
                prev = dist;
            }
        }
    }

    #[test]
    fn user_channel_shapes_and_determinism() {
        let device = ArrayGeometry::linear(8, 0.5).unwrap();
        let user = ArrayGeometry::linear(1, 0.5).unwrap();
        // Downlink: device transmits, single-antenna user receives -> row vector.
        let dl = user_channel(&device, &user, &params(21), "u0").unwrap();
        assert_eq!(dl.matrix.shape(), (1, 8));
        let dl2 = user_channel(&device, &user, &params(21), "u0").unwrap();
        assert_eq!(dl.matrix, dl2.matrix);
        // Single broadside ray gives a rank-1 matrix.
        let rays = [Ray {
            gain: C64::new(1.0, 0.0),
            departure: 0.1,
            arrival: -0.2,
        }];
        let h = channel_from_rays(&device, &device, &rays).unwrap();
        assert_eq!(h.rank(1e-9), 1);
    }

    #[test]
    fn csv_export_layout() {
        let h = CMat::from_row_slice(
            1,
            2,
            &[C64::new(1.0, -2.0), C64::new(0.5, 0.25)],
        );
        let csv = channel_to_csv(&h);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "rx_index,tx_index,re,im");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,0,"));
        assert!(first.contains("1.0000000000000000e0"));
        assert!(first.contains("-2.0000000000000000e0"));
    }
}
