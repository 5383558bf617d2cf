//! Antenna array geometry, steering vectors, and range-dependent array
//! factors.
//!
//! All lengths are expressed in carrier wavelengths (λ = 1), which removes
//! the carrier frequency as a free parameter. Linear arrays lie along the
//! x-axis centered at the origin; planar arrays are row-major in the x–y
//! plane. Azimuth is measured from the array boresight (the +z axis) in the
//! x–z plane, elevation toward +y. Elements are isotropic and uncoupled.

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::util::{CVec, C64};

/// Minimum allowed range between an element and an observation point, in
/// wavelengths. Anything closer is treated as a collision.
pub const MIN_RANGE: f64 = 1e-6;

/// Near-field amplitude reference distance (one wavelength): the spherical
/// wave carries amplitude `r_ref / r`.
pub const AMPLITUDE_REF: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    Linear,
    Planar,
}

/// Element positions of a transmit or receive array, in wavelength units.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    elements: Vec<Vector3<f64>>,
    kind: ArrayKind,
    spacing: f64,
}

impl ArrayGeometry {
    /// Uniform linear array of `n` elements along the x-axis, centered at the
    /// origin.
    pub fn linear(n: usize, spacing: f64) -> Result<Self> {
        let offset = (n as f64 - 1.0) / 2.0;
        let elements = (0..n)
            .map(|i| Vector3::new((i as f64 - offset) * spacing, 0.0, 0.0))
            .collect();
        Self::from_elements(elements, ArrayKind::Linear, spacing)
    }

    /// Uniform planar array of `nx` by `ny` elements in the x–y plane,
    /// row-major, centered at the origin.
    pub fn planar(nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        let ox = (nx as f64 - 1.0) / 2.0;
        let oy = (ny as f64 - 1.0) / 2.0;
        let mut elements = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                elements.push(Vector3::new(
                    (ix as f64 - ox) * spacing,
                    (iy as f64 - oy) * spacing,
                    0.0,
                ));
            }
        }
        Self::from_elements(elements, ArrayKind::Planar, spacing)
    }

    /// Build a geometry from explicit element positions.
    pub fn from_elements(
        elements: Vec<Vector3<f64>>,
        kind: ArrayKind,
        spacing: f64,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidGeometry("array has no elements".into()));
        }
        if !(spacing > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        if elements.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidGeometry(
                "element positions must be finite".into(),
            ));
        }
        Ok(ArrayGeometry {
            elements,
            kind,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn elements(&self) -> &[Vector3<f64>] {
        &self.elements
    }

    /// Geometric center of the elements.
    pub fn centroid(&self) -> Vector3<f64> {
        self.elements.iter().sum::<Vector3<f64>>() / self.elements.len() as f64
    }

    /// Aperture D: the maximum pairwise element distance.
    pub fn aperture(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.elements.iter().enumerate() {
            for b in &self.elements[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Copy of the geometry rigidly translated by `t`.
    pub fn translated(&self, t: Vector3<f64>) -> Self {
        ArrayGeometry {
            elements: self.elements.iter().map(|p| p + t).collect(),
            kind: self.kind,
            spacing: self.spacing,
        }
    }

    /// Extent of the array along the x-axis, `(min, max)`.
    pub fn x_extent(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.elements {
            lo = lo.min(p.x);
            hi = hi.max(p.x);
        }
        (lo, hi)
    }
}

/// Unit propagation direction for (azimuth, elevation) in the boresight
/// convention above.
pub fn direction(azimuth: f64, elevation: f64) -> Vector3<f64> {
    Vector3::new(
        azimuth.sin() * elevation.cos(),
        elevation.sin(),
        azimuth.cos() * elevation.cos(),
    )
}

/// Far-field (planar wavefront) steering vector toward `azimuth`.
///
/// Entry n is `exp(j 2π ⟨p_n, u⟩)` with unit modulus; no amplitude
/// normalization is applied (normalization lives in the beamformers).
pub fn far_field_response(geom: &ArrayGeometry, azimuth: f64) -> Result<CVec> {
    far_field_response_3d(geom, azimuth, 0.0)
}

/// Far-field steering vector with an explicit elevation. Elevation is only
/// meaningful for planar arrays; linear arrays must be steered in azimuth
/// alone.
pub fn far_field_response_3d(geom: &ArrayGeometry, azimuth: f64, elevation: f64) -> Result<CVec> {
    if geom.kind() == ArrayKind::Linear {
        if azimuth.abs() > std::f64::consts::FRAC_PI_2 + 1e-12 {
            return Err(Error::param(
                "array-geometry",
                format!("linear-array azimuth {azimuth} outside [-pi/2, pi/2]"),
            ));
        }
        if elevation != 0.0 {
            return Err(Error::param(
                "array-geometry",
                "elevation steering requires a planar array",
            ));
        }
    }
    let u = direction(azimuth, elevation);
    Ok(CVec::from_iterator(
        geom.len(),
        geom.elements().iter().map(|p| {
            let phase = TAU * p.dot(&u);
            C64::new(phase.cos(), phase.sin())
        }),
    ))
}

/// Far-field distance rule of thumb, 2D²/λ, in wavelengths (λ = 1).
/// A single element returns 0.
pub fn far_field_distance(geom: &ArrayGeometry) -> f64 {
    let d = geom.aperture();
    2.0 * d * d
}

/// Exact spherical-wavefront response of the array observed at `point`.
///
/// Entry n is `(r_ref / r_n) exp(-j 2π r_n)` with `r_n` the Euclidean
/// distance from element n to the point; amplitudes decay as 1/r.
pub fn near_field_response(geom: &ArrayGeometry, point: &Vector3<f64>) -> Result<CVec> {
    let mut out = CVec::zeros(geom.len());
    for (n, p) in geom.elements().iter().enumerate() {
        let r = (point - p).norm();
        if r < MIN_RANGE {
            return Err(Error::SingularRange(format!(
                "observation point within {MIN_RANGE} wavelengths of element {n}"
            )));
        }
        let phase = -TAU * r;
        let amp = AMPLITUDE_REF / r;
        out[n] = C64::new(amp * phase.cos(), amp * phase.sin());
    }
    Ok(out)
}

/// Array factor magnitude over an angle grid at the given range.
///
/// For each angle θ the observation point sits at `centroid + range·u(θ)`;
/// an infinite range evaluates the planar-wavefront response instead. The
/// result is `|weightsᴴ · response|` per angle, optionally normalized so the
/// peak is 1.
pub fn array_factor(
    geom: &ArrayGeometry,
    weights: &CVec,
    range: f64,
    angles: &[f64],
    normalize: bool,
) -> Result<Vec<f64>> {
    if weights.len() != geom.len() {
        return Err(Error::dim(
            "array-geometry",
            format!(
                "weight vector has {} entries for a {}-element array",
                weights.len(),
                geom.len()
            ),
        ));
    }
    if angles.is_empty() {
        return Err(Error::param("array-geometry", "angle grid is empty"));
    }
    if !(range > 0.0) {
        return Err(Error::param(
            "array-geometry",
            format!("range must be positive or infinite, got {range}"),
        ));
    }
    let center = geom.centroid();
    let mut out = Vec::with_capacity(angles.len());
    for &theta in angles {
        let resp = if range.is_infinite() {
            far_field_response(geom, theta)?
        } else {
            let point = center + range * direction(theta, 0.0);
            near_field_response(geom, &point)?
        };
        out.push(weights.dotc(&resp).norm());
    }
    if normalize {
        let peak = out.iter().cloned().fold(0.0f64, f64::max);
        if peak > 0.0 {
            for v in &mut out {
                *v /= peak;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() < tol, "{what}: {a} vs {b}");
    }

    #[test]
    fn broadside_response_is_all_ones() {
        let g = ArrayGeometry::linear(2, 0.5).unwrap();
        let r = far_field_response(&g, 0.0).unwrap();
        for z in r.iter() {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn endfire_two_element_relative_phase_is_pi() {
        // Direct formula with centered elements gives [e^{-j pi/2}, e^{+j pi/2}];
        // the physically meaningful relative phase across the half-wavelength
        // pair is pi, i.e. [1, -1] up to a global phase.
        let g = ArrayGeometry::linear(2, 0.5).unwrap();
        let r = far_field_response(&g, std::f64::consts::FRAC_PI_2).unwrap();
        let expected0 = C64::new(0.0, -1.0);
        let expected1 = C64::new(0.0, 1.0);
        assert!((r[0] - expected0).norm() < 1e-12);
        assert!((r[1] - expected1).norm() < 1e-12);
        let ratio = r[1] / r[0];
        assert!((ratio - C64::new(-1.0, 0.0)).norm() < 1e-12, "relative phase pi");
    }

    #[test]
    fn single_element_response_is_unity() {
        let g = ArrayGeometry::linear(1, 0.5).unwrap();
        let r = far_field_response(&g, 0.7).unwrap();
        assert!((r[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_entries_have_unit_modulus() {
        let g = ArrayGeometry::linear(8, 0.5).unwrap();
        for k in 0..=20 {
            let az = -std::f64::consts::FRAC_PI_2
                + k as f64 * std::f64::consts::PI / 20.0;
            let r = far_field_response(&g, az).unwrap();
            for z in r.iter() {
                assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_geometry_rejected() {
        assert!(matches!(
            ArrayGeometry::from_elements(Vec::new(), ArrayKind::Linear, 0.5),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn far_field_distance_examples() {
        let g8 = ArrayGeometry::linear(8, 0.5).unwrap();
        assert_close(far_field_distance(&g8), 24.5, 1e-12, "8-element");
        let g2 = ArrayGeometry::linear(2, 0.5).unwrap();
        assert_close(far_field_distance(&g2), 0.5, 1e-12, "2-element");
        let g1 = ArrayGeometry::linear(1, 0.5).unwrap();
        assert_close(far_field_distance(&g1), 0.0, 1e-12, "single element");
    }

    #[test]
    fn far_field_distance_scales_quadratically_with_spacing() {
        let a = ArrayGeometry::linear(8, 0.5).unwrap();
        let b = ArrayGeometry::linear(8, 1.0).unwrap();
        assert_close(
            far_field_distance(&b),
            4.0 * far_field_distance(&a),
            1e-9,
            "doubled spacing quadruples 2D^2",
        );
    }

    #[test]
    fn near_field_unit_range_full_cycle() {
        let g = ArrayGeometry::linear(1, 0.5).unwrap();
        let r = near_field_response(&g, &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((r[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn near_field_amplitude_and_phase_example() {
        // Elements at distances 1λ and 1.25λ from the observation point:
        // amplitudes 1 and 0.8, phases 0 and -pi/2 (mod 2π).
        let g = ArrayGeometry::from_elements(
            vec![Vector3::zeros(), Vector3::new(0.75, 0.0, 0.0)],
            ArrayKind::Linear,
            0.75,
        )
        .unwrap();
        let r = near_field_response(&g, &Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((r[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(
            (r[1] - C64::new(0.0, -0.8)).norm() < 1e-9,
            "0.8 e^{{-j pi/2}} = -0.8j, got {}",
            r[1]
        );
    }

    #[test]
    fn near_field_collision_is_singular() {
        let g = ArrayGeometry::linear(2, 0.5).unwrap();
        let p = g.elements()[0];
        assert!(matches!(
            near_field_response(&g, &p),
            Err(Error::SingularRange(_))
        ));
    }

    #[test]
    fn near_field_converges_to_far_field_phases() {
        // At r = 1e4 λ the residual quadratic phase π x⊥²/r stays below
        // 1e-3 rad for the apertures checked here (D = 3.5λ and 2λ).
        for n in [8usize, 5] {
            let g = ArrayGeometry::linear(n, 0.5).unwrap();
            for &az in &[0.0, 0.4, -1.1] {
                let point = 1.0e4 * direction(az, 0.0);
                let nf = near_field_response(&g, &point).unwrap();
                let ff = far_field_response(&g, az).unwrap();
                // Common scalar: align on element 0.
                let common = nf[0] / ff[0];
                for i in 0..n {
                    let aligned = nf[i] / common;
                    let dphi = (aligned / ff[i]).arg().abs();
                    assert!(
                        dphi < 1e-3,
                        "n={n} az={az} element {i}: phase error {dphi}"
                    );
                }
            }
        }
    }

    #[test]
    fn broadside_array_factor_peak_is_element_count() {
        let g = ArrayGeometry::linear(8, 0.5).unwrap();
        let w = CVec::from_element(8, C64::new(1.0, 0.0));
        let af = array_factor(&g, &w, f64::INFINITY, &[0.0], false).unwrap();
        assert_close(af[0], 8.0, 1e-12, "coherent sum of 8 unit terms");
    }

    #[test]
    fn array_factor_rejects_weight_mismatch() {
        let g = ArrayGeometry::linear(8, 0.5).unwrap();
        let w = CVec::from_element(4, C64::new(1.0, 0.0));
        assert!(matches!(
            array_factor(&g, &w, f64::INFINITY, &[0.0], false),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn far_field_pattern_invariant_under_rigid_translation() {
        let g = ArrayGeometry::linear(8, 0.5).unwrap();
        let gt = g.translated(Vector3::new(3.2, -1.5, 0.7));
        let w = CVec::from_fn(8, |i, _| C64::new(1.0, 0.3 * i as f64).unscale((1.0 + 0.09 * (i as f64).powi(2)).sqrt()));
        let angles: Vec<f64> = (0..91)
            .map(|k| -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 90.0)
            .collect();
        let a = array_factor(&g, &w, f64::INFINITY, &angles, false).unwrap();
        let b = array_factor(&gt, &w, f64::INFINITY, &angles, false).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_close(*x, *y, 1e-9, "translation invariance");
        }
    }

    #[test]
    fn near_field_pattern_flattens_close_in() {
        // Fig-5-style check at desk scale: the dB pattern at 5% of 2D²/λ is
        // much less dispersed than the far-field pattern.
        let g = ArrayGeometry::linear(8, 0.5).unwrap();
        let w = CVec::from_element(8, C64::new(1.0, 0.0));
        let angles: Vec<f64> = (0..721)
            .map(|k| -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 720.0)
            .collect();
        let dff = far_field_distance(&g);
        let std_of = |p: &[f64]| {
            let db: Vec<f64> = p.iter().map(|x| 20.0 * x.max(1e-12).log10()).collect();
            let mean = db.iter().sum::<f64>() / db.len() as f64;
            (db.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / db.len() as f64).sqrt()
        };
        let far = array_factor(&g, &w, f64::INFINITY, &angles, true).unwrap();
        let near = array_factor(&g, &w, 0.05 * dff, &angles, true).unwrap();
        assert!(
            std_of(&near) < std_of(&far),
            "near dispersion {} should be below far dispersion {}",
            std_of(&near),
            std_of(&far)
        );
    }
}
