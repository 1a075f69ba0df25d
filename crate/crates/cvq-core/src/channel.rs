//! Single-mode Gaussian trace-preserving channels `gamma -> X gamma X^T + Y`
//! applied to a chosen mode of a multimode state, with the loss plus
//! excess-noise constructor used throughout the protocol analyses.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::gaussian::{ensure_valid, GaussianState};
use crate::scalar::{c, Real};

/// A single-mode Gaussian channel, validated for complete positivity at
/// construction via the real test `Y >= 0` and `det Y >= (det X - 1)^2`.
///
/// Serializes as `{"T": .., "xi": ..}` when built by [`loss_noise`] and as
/// the general `{"X": [[..]], "Y": [[..]]}` form otherwise; both forms are
/// accepted on input.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChannel<T: Real = f64> {
    x: [[T; 2]; 2],
    y: [[T; 2]; 2],
    loss_params: Option<(T, T)>,
}

impl<T: Real> GaussianChannel<T> {
    /// Build a channel from its matrix pair, rejecting CP violations.
    pub fn new(x: Matrix2<T>, y: Matrix2<T>) -> Result<Self, CoreError> {
        let tol = c::<T>(1e-10);
        if (y[(0, 1)] - y[(1, 0)]).abs() > tol {
            return Err(CoreError::NotCompletelyPositive);
        }
        let ysym = (y + y.transpose()) * c::<T>(0.5);
        let tr = ysym[(0, 0)] + ysym[(1, 1)];
        let det_y = ysym[(0, 0)] * ysym[(1, 1)] - ysym[(0, 1)] * ysym[(1, 0)];
        // PSD for 2x2: trace and determinant nonnegative
        if tr < -tol || det_y < -tol {
            return Err(CoreError::NotCompletelyPositive);
        }
        let det_x = x[(0, 0)] * x[(1, 1)] - x[(0, 1)] * x[(1, 0)];
        let need = (det_x - T::one()) * (det_x - T::one());
        if det_y < need - tol {
            return Err(CoreError::NotCompletelyPositive);
        }
        Ok(Self {
            x: [[x[(0, 0)], x[(0, 1)]], [x[(1, 0)], x[(1, 1)]]],
            y: [[ysym[(0, 0)], ysym[(0, 1)]], [ysym[(1, 0)], ysym[(1, 1)]]],
            loss_params: None,
        })
    }

    /// Identity channel.
    pub fn identity() -> Self {
        Self {
            x: [[T::one(), T::zero()], [T::zero(), T::one()]],
            y: [[T::zero(); 2]; 2],
            loss_params: None,
        }
    }

    pub fn x(&self) -> Matrix2<T> {
        Matrix2::new(self.x[0][0], self.x[0][1], self.x[1][0], self.x[1][1])
    }

    pub fn y(&self) -> Matrix2<T> {
        Matrix2::new(self.y[0][0], self.y[0][1], self.y[1][0], self.y[1][1])
    }

    /// `(T, xi)` when the channel came from the loss constructor.
    pub fn loss_params(&self) -> Option<(T, T)> {
        self.loss_params
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ChannelWire<T> {
    Loss {
        #[serde(rename = "T")]
        t: T,
        xi: T,
    },
    General {
        #[serde(rename = "X")]
        x: [[T; 2]; 2],
        #[serde(rename = "Y")]
        y: [[T; 2]; 2],
    },
}

impl<T: Real + Serialize> Serialize for GaussianChannel<T> {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let wire = match self.loss_params {
            Some((t, xi)) => ChannelWire::Loss { t, xi },
            None => ChannelWire::General { x: self.x, y: self.y },
        };
        wire.serialize(ser)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for GaussianChannel<T> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        match ChannelWire::<T>::deserialize(de)? {
            ChannelWire::Loss { t, xi } => loss_noise(t, xi).map_err(D::Error::custom),
            ChannelWire::General { x, y } => GaussianChannel::new(
                Matrix2::new(x[0][0], x[0][1], x[1][0], x[1][1]),
                Matrix2::new(y[0][0], y[0][1], y[1][0], y[1][1]),
            )
            .map_err(D::Error::custom),
        }
    }
}

/// Loss channel with transmittance `T in (0, 1]` and excess noise `xi >= 0`
/// referred to the channel input: `X = sqrt(T) I`, `Y = (1 - T + T xi) I`.
pub fn loss_noise<T: Real>(t: T, xi: T) -> Result<GaussianChannel<T>, CoreError> {
    if t <= T::zero() || t > T::one() {
        return Err(CoreError::InvalidParameter {
            name: "T",
            reason: format!("transmittance must lie in (0, 1], got {t}"),
        });
    }
    if xi < T::zero() {
        return Err(CoreError::InvalidParameter {
            name: "xi",
            reason: format!("excess noise must be >= 0, got {xi}"),
        });
    }
    let xr = t.sqrt();
    let yv = T::one() - t + t * xi;
    let mut ch = GaussianChannel::new(
        Matrix2::new(xr, T::zero(), T::zero(), xr),
        Matrix2::new(yv, T::zero(), T::zero(), yv),
    )?;
    ch.loss_params = Some((t, xi));
    Ok(ch)
}

/// Apply the channel to one mode: the covariance is conjugated by the map
/// that is `X` on the chosen mode and the identity elsewhere, then `Y` is
/// added on that mode's block; the displacement transforms the same way.
pub fn apply<T: Real>(
    ch: &GaussianChannel<T>,
    s: &GaussianState<T>,
    mode: usize,
) -> Result<GaussianState<T>, CoreError> {
    ensure_valid(s)?;
    if mode >= s.n_modes() {
        return Err(CoreError::ModeOutOfRange {
            index: mode,
            n_modes: s.n_modes(),
        });
    }
    let dim = 2 * s.n_modes();
    let mut embed = DMatrix::identity(dim, dim);
    let x = ch.x();
    for i in 0..2 {
        for j in 0..2 {
            embed[(2 * mode + i, 2 * mode + j)] = x[(i, j)];
        }
    }
    let mut g = &embed * s.covariance() * embed.transpose();
    let y = ch.y();
    for i in 0..2 {
        for j in 0..2 {
            g[(2 * mode + i, 2 * mode + j)] += y[(i, j)];
        }
    }
    let d = &embed * s.displacement();
    GaussianState::new(d, g)
}

/// Composition `c2 after c1`: `X = X2 X1`, `Y = X2 Y1 X2^T + Y2`.
pub fn compose<T: Real>(
    c2: &GaussianChannel<T>,
    c1: &GaussianChannel<T>,
) -> Result<GaussianChannel<T>, CoreError> {
    let x = c2.x() * c1.x();
    let y = c2.x() * c1.y() * c2.x().transpose() + c2.y();
    GaussianChannel::new(x, y)
}
