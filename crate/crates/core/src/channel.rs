//! Array steering vectors and Rician channel draws.
//!
//! A user's channel is `h = h_los + h_nlos` with
//! `h_los = g·√(κ/(κ+1))·c̄(θ)` and `h_nlos = g·√(1/(κ+1))·w`, where `c̄` is the
//! unnormalized steering vector (unit-modulus entries, `‖c̄‖² = M`) and `w`
//! has i.i.d. CN(0, 1) entries. `κ = ∞` gives a pure line-of-sight channel.

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::rng::complex_normal;

/// Antenna array at the base station. `spacing` is `d/λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrayGeometry {
    /// Uniform linear array of `antennas` elements.
    Ula { antennas: usize, spacing: f64 },
    /// Uniform planar array in the yz-plane, `rows` elements along y and
    /// `cols` along z.
    Upa { rows: usize, cols: usize, spacing: f64 },
}

impl ArrayGeometry {
    pub fn ula(antennas: usize, spacing: f64) -> Result<Self> {
        if antennas == 0 {
            return Err(Error::invalid("ULA needs at least one antenna"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("antenna spacing must be > 0, got {spacing}")));
        }
        Ok(ArrayGeometry::Ula { antennas, spacing })
    }

    pub fn upa(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("UPA needs at least one element per axis"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("antenna spacing must be > 0, got {spacing}")));
        }
        Ok(ArrayGeometry::Upa { rows, cols, spacing })
    }

    pub fn antennas(&self) -> usize {
        match *self {
            ArrayGeometry::Ula { antennas, .. } => antennas,
            ArrayGeometry::Upa { rows, cols, .. } => rows * cols,
        }
    }

    pub fn spacing(&self) -> f64 {
        match *self {
            ArrayGeometry::Ula { spacing, .. } | ArrayGeometry::Upa { spacing, .. } => spacing,
        }
    }

    /// Unnormalized steering vector for elevation `theta` (and azimuth `phi`
    /// on a UPA; ignored on a ULA).
    pub fn steering(&self, theta: f64, phi: f64) -> CVector {
        match *self {
            ArrayGeometry::Ula { .. } => steering_ula(self, theta).expect("ULA geometry"),
            ArrayGeometry::Upa { .. } => steering_upa(self, theta, phi).expect("UPA geometry"),
        }
    }

    /// Unit-norm steering vector `α = c̄/√M`.
    pub fn normalized_steering(&self, theta: f64, phi: f64) -> CVector {
        let scale = 1.0 / (self.antennas() as f64).sqrt();
        self.steering(theta, phi).mapv(|z| z * scale)
    }
}

/// ULA response: element `m` is `exp(-j·2π·m·(d/λ)·cos θ)`.
pub fn steering_ula(geometry: &ArrayGeometry, theta: f64) -> Result<CVector> {
    let ArrayGeometry::Ula { antennas, spacing } = *geometry else {
        return Err(Error::invalid("steering_ula called with a non-ULA geometry"));
    };
    let step = -2.0 * PI * spacing * theta.cos();
    Ok(Array1::from_iter(
        (0..antennas).map(|m| Complex64::from_polar(1.0, step * m as f64)),
    ))
}

/// UPA response: entry `(m, n)` is `exp(+j·2π·(d/λ)·(m sin φ sin θ + n cos θ))`,
/// flattened with `m` (y axis) varying fastest.
pub fn steering_upa(geometry: &ArrayGeometry, theta: f64, phi: f64) -> Result<CVector> {
    let ArrayGeometry::Upa { rows, cols, spacing } = *geometry else {
        return Err(Error::invalid("steering_upa called with a non-UPA geometry"));
    };
    let ky = 2.0 * PI * spacing * phi.sin() * theta.sin();
    let kz = 2.0 * PI * spacing * theta.cos();
    let mut out = Array1::zeros(rows * cols);
    for n in 0..cols {
        for m in 0..rows {
            out[n * rows + m] = Complex64::from_polar(1.0, ky * m as f64 + kz * n as f64);
        }
    }
    Ok(out)
}

/// Static per-user ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserProfile {
    pub user_id: usize,
    /// Large-scale fading amplitude `g`.
    pub gain: f64,
    /// Rician factor; `f64::INFINITY` means line-of-sight only.
    pub kappa: f64,
    /// LOS angle of arrival (elevation on a UPA), radians in `[0, π]`.
    pub theta: f64,
    /// Azimuth, used only with a UPA.
    pub phi: f64,
}

impl UserProfile {
    pub fn new(user_id: usize, gain: f64, kappa: f64, theta: f64) -> Result<Self> {
        let p = UserProfile {
            user_id,
            gain,
            kappa,
            theta,
            phi: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::invalid(format!("gain must be > 0, got {}", self.gain)));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::invalid(format!(
                "Rician factor must be >= 0, got {}",
                self.kappa
            )));
        }
        if !(0.0..=PI).contains(&self.theta) {
            return Err(Error::invalid(format!("AOA {} outside [0, π]", self.theta)));
        }
        Ok(())
    }

    /// `√(κ/(κ+1))`, the LOS amplitude share.
    pub fn los_share(&self) -> f64 {
        if self.kappa.is_infinite() {
            1.0
        } else {
            (self.kappa / (self.kappa + 1.0)).sqrt()
        }
    }

    /// `√(1/(κ+1))`, the NLOS amplitude share.
    pub fn nlos_share(&self) -> f64 {
        if self.kappa.is_infinite() {
            0.0
        } else {
            (1.0 / (self.kappa + 1.0)).sqrt()
        }
    }

    /// Per-element NLOS variance `g²/(κ+1)`.
    pub fn nlos_variance(&self) -> f64 {
        self.gain * self.gain * self.nlos_share().powi(2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CVector,
    pub h_los: CVector,
    pub h_nlos: CVector,
}

/// The deterministic LOS part `g·√(κ/(κ+1))·c̄(θ)`.
pub fn los_component(profile: &UserProfile, geometry: &ArrayGeometry) -> CVector {
    let amp = profile.gain * profile.los_share();
    geometry.steering(profile.theta, profile.phi).mapv(|z| z * amp)
}

/// Draws one subframe's channel. The NLOS vector is redrawn on every call;
/// the LOS part depends only on the profile.
pub fn draw_channel<R: Rng + ?Sized>(
    profile: &UserProfile,
    geometry: &ArrayGeometry,
    rng: &mut R,
) -> ChannelRealization {
    let h_los = los_component(profile, geometry);
    let m = geometry.antennas();
    let amp = profile.gain * profile.nlos_share();
    let h_nlos = if amp == 0.0 {
        CVector::zeros(m)
    } else {
        Array1::from_iter((0..m).map(|_| complex_normal(rng) * amp))
    };
    let h = &h_los + &h_nlos;
    ChannelRealization { h, h_los, h_nlos }
}
