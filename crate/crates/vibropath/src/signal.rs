//! Channel-level domain types: engine mounts, measurement directions,
//! channel roles and the validated [`TimeSeries`] record.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Engine mount position. The fixed ordering RH, LH, REAR is also the
/// tie-break order used when ranking paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mount {
    Rh,
    Lh,
    Rear,
}

impl Mount {
    pub const ALL: [Mount; 3] = [Mount::Rh, Mount::Lh, Mount::Rear];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mount::Rh => "RH",
            Mount::Lh => "LH",
            Mount::Rear => "REAR",
        }
    }

    pub fn parse(s: &str) -> Result<Mount> {
        match s.to_ascii_uppercase().as_str() {
            "RH" => Ok(Mount::Rh),
            "LH" => Ok(Mount::Lh),
            "REAR" => Ok(Mount::Rear),
            other => Err(Error::InvalidConfiguration(format!(
                "unknown mount {other:?} (expected RH, LH or REAR)"
            ))),
        }
    }
}

impl fmt::Display for Mount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Principal measurement direction at a mount.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    X,
    Y,
    Z,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::X, Direction::Y, Direction::Z];

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::X => "X",
            Direction::Y => "Y",
            Direction::Z => "Z",
        }
    }

    pub fn parse(s: &str) -> Result<Direction> {
        match s.to_ascii_uppercase().as_str() {
            "X" => Ok(Direction::X),
            "Y" => Ok(Direction::Y),
            "Z" => Ok(Direction::Z),
            other => Err(Error::InvalidConfiguration(format!(
                "unknown direction {other:?} (expected X, Y or Z)"
            ))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a recorded channel represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    /// Accelerometer on the engine side of a mount.
    EngineSide,
    /// Accelerometer on the body side of a mount.
    BodySide,
    /// Accelerometer at the receiver point in the compartment.
    Target,
    /// Piezoelectric force channel of the impact hammer.
    HammerForce,
    /// Engine speed reference.
    Tacho,
}

impl ChannelRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelRole::EngineSide => "engine_side",
            ChannelRole::BodySide => "body_side",
            ChannelRole::Target => "target",
            ChannelRole::HammerForce => "hammer_force",
            ChannelRole::Tacho => "tacho",
        }
    }

    /// Unit string the role requires, if the role pins one.
    pub fn expected_unit(&self) -> Option<&'static [&'static str]> {
        match self {
            ChannelRole::EngineSide | ChannelRole::BodySide | ChannelRole::Target => {
                Some(&["m/s^2"])
            }
            ChannelRole::HammerForce => Some(&["N"]),
            ChannelRole::Tacho => Some(&["rpm", "pulse"]),
        }
    }
}

impl fmt::Display for ChannelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a tacho channel encodes engine speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TachoKind {
    /// Samples are already engine speed in rev/min.
    RpmTrace,
    /// Square pulse train, `pulses_per_rev` pulses per crank revolution.
    PulseTrain { pulses_per_rev: u32 },
}

/// A uniformly sampled channel record with its instrumentation metadata.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub channel_id: String,
    pub role: ChannelRole,
    pub mount: Option<Mount>,
    pub direction: Option<Direction>,
    pub unit: String,
    /// Present only for tacho channels; declared in the dataset manifest.
    pub tacho_kind: Option<TachoKind>,
}

impl TimeSeries {
    /// Build a validated record. Mount-side accelerometer channels must
    /// carry mount and direction metadata.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        samples: Vec<f64>,
        sample_rate: f64,
        channel_id: impl Into<String>,
        role: ChannelRole,
        mount: Option<Mount>,
        direction: Option<Direction>,
        unit: impl Into<String>,
    ) -> Result<Self> {
        let ts = TimeSeries {
            samples,
            sample_rate,
            channel_id: channel_id.into(),
            role,
            mount,
            direction,
            unit: unit.into(),
            tacho_kind: None,
        };
        ts.validate()?;
        Ok(ts)
    }

    pub fn with_tacho_kind(mut self, kind: TachoKind) -> Self {
        self.tacho_kind = Some(kind);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "channel {:?}: sample_rate must be positive, got {}",
                self.channel_id, self.sample_rate
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidConfiguration(format!(
                "channel {:?}: empty sample vector",
                self.channel_id
            )));
        }
        if let Some(bad) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfiguration(format!(
                "channel {:?}: non-finite sample at index {bad}",
                self.channel_id
            )));
        }
        if matches!(self.role, ChannelRole::EngineSide | ChannelRole::BodySide)
            && (self.mount.is_none() || self.direction.is_none())
        {
            return Err(Error::SchemaViolation(format!(
                "channel {:?}: role {} requires mount and direction",
                self.channel_id, self.role
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Record duration in seconds (one sample interval per sample).
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn rms(&self) -> f64 {
        let sum: f64 = self.samples.iter().map(|v| v * v).sum();
        (sum / self.samples.len() as f64).sqrt()
    }

    /// Same rate (within 1e-9 relative) and same length.
    pub fn compatible_with(&self, other: &TimeSeries) -> Result<()> {
        let rate_ok =
            (self.sample_rate - other.sample_rate).abs() <= 1e-9 * self.sample_rate.abs();
        if !rate_ok {
            return Err(Error::IncompatibleChannels(format!(
                "{:?} at {} Hz vs {:?} at {} Hz",
                self.channel_id, self.sample_rate, other.channel_id, other.sample_rate
            )));
        }
        if self.samples.len() != other.samples.len() {
            return Err(Error::IncompatibleChannels(format!(
                "{:?} has {} samples, {:?} has {}",
                self.channel_id,
                self.samples.len(),
                other.channel_id,
                other.samples.len()
            )));
        }
        Ok(())
    }
}
