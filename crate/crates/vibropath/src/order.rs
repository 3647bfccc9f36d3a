//! Engine-order extraction from run-up records.
//!
//! Orders are tracked by complex demodulation against the phase integral
//! of the rpm profile: the signal is multiplied by `exp(-i*phi(t))` with
//! `phi` the accumulated crank phase scaled by the order number, then
//! averaged under a Hann weight whose length sets the tracker bandwidth.
//! A component exactly on the order demodulates to a constant, so the
//! estimate is unbiased through a sweep as long as the profile is
//! accurate.

use crate::error::{Error, Result};
use crate::signal::{ChannelRole, Direction, Mount, TachoKind, TimeSeries};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Tracker half-bandwidth in orders.
pub const DEFAULT_BANDWIDTH_ORDERS: f64 = 0.5;
/// Default rpm bin width for run-up analyses.
pub const DEFAULT_RPM_STEP: f64 = 25.0;
/// Engine orders tracked by default (firing order and harmonics of a
/// four-cylinder four-stroke engine).
pub const DEFAULT_ORDERS: [f64; 3] = [2.0, 4.0, 6.0];
/// Bins whose window holds less than this many signal cycles are masked.
const MIN_CYCLES: f64 = 1.0;
/// Maximum credible speed change between adjacent profile samples.
const MAX_RPM_JUMP: f64 = 500.0;
/// Moving-median span for pulse-derived profiles, seconds.
const MEDIAN_SPAN: f64 = 0.5;

/// Frequency of an engine order at a given speed: `order * rpm / 60`.
pub fn order_frequency(order: f64, rpm: f64) -> f64 {
    order * rpm / 60.0
}

/// Engine speed versus time.
#[derive(Debug, Clone)]
pub struct RpmProfile {
    time: Vec<f64>,
    rpm: Vec<f64>,
    /// Cumulative revolutions-minutes integral (trapezoid) for phase.
    cum: Vec<f64>,
}

impl RpmProfile {
    pub fn new(time: Vec<f64>, rpm: Vec<f64>) -> Result<Self> {
        if time.len() != rpm.len() || time.is_empty() {
            return Err(Error::CorruptTacho(format!(
                "profile needs matching non-empty time/rpm arrays, got {} and {}",
                time.len(),
                rpm.len()
            )));
        }
        if time.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::CorruptTacho("profile time must strictly increase".into()));
        }
        if let Some(i) = rpm.iter().position(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::CorruptTacho(format!(
                "non-positive speed {} at profile index {i}",
                rpm[i]
            )));
        }
        if let Some(i) = rpm.windows(2).position(|w| (w[1] - w[0]).abs() > MAX_RPM_JUMP) {
            return Err(Error::CorruptTacho(format!(
                "speed jumps {:.0} -> {:.0} rpm between adjacent samples at t = {:.4} s",
                rpm[i],
                rpm[i + 1],
                time[i + 1]
            )));
        }
        let mut cum = Vec::with_capacity(time.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for i in 1..time.len() {
            acc += 0.5 * (rpm[i] + rpm[i - 1]) * (time[i] - time[i - 1]);
            cum.push(acc);
        }
        Ok(RpmProfile { time, rpm, cum })
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn rpm(&self) -> &[f64] {
        &self.rpm
    }

    pub fn min_rpm(&self) -> f64 {
        self.rpm.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rpm(&self) -> f64 {
        self.rpm.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Speed at time `t`, linearly interpolated, clamped at the ends.
    pub fn rpm_at(&self, t: f64) -> f64 {
        if t <= self.time[0] {
            return self.rpm[0];
        }
        if t >= *self.time.last().unwrap() {
            return *self.rpm.last().unwrap();
        }
        let i = match self
            .time
            .binary_search_by(|v| v.partial_cmp(&t).unwrap())
        {
            Ok(i) => return self.rpm[i],
            Err(i) => i - 1,
        };
        let frac = (t - self.time[i]) / (self.time[i + 1] - self.time[i]);
        self.rpm[i] + frac * (self.rpm[i + 1] - self.rpm[i])
    }

    /// First time the profile crosses speed `r`, or `None` outside range.
    pub fn time_at_rpm(&self, r: f64) -> Option<f64> {
        for i in 0..self.rpm.len() {
            if self.rpm[i] == r {
                return Some(self.time[i]);
            }
            if i + 1 < self.rpm.len()
                && (self.rpm[i] - r) * (self.rpm[i + 1] - r) < 0.0
            {
                let frac = (r - self.rpm[i]) / (self.rpm[i + 1] - self.rpm[i]);
                return Some(self.time[i] + frac * (self.time[i + 1] - self.time[i]));
            }
        }
        None
    }

    /// Integral of rpm from the profile start to `t`, in rev-minute units
    /// scaled by seconds. Exact for piecewise-linear profiles; constant
    /// extrapolation outside the profile span.
    pub fn rpm_integral_at(&self, t: f64) -> f64 {
        if t <= self.time[0] {
            return self.rpm[0] * (t - self.time[0]);
        }
        let last = *self.time.last().unwrap();
        if t >= last {
            return self.cum.last().unwrap() + self.rpm.last().unwrap() * (t - last);
        }
        let i = match self
            .time
            .binary_search_by(|v| v.partial_cmp(&t).unwrap())
        {
            Ok(i) => return self.cum[i],
            Err(i) => i - 1,
        };
        let dt = t - self.time[i];
        let r_t = self.rpm_at(t);
        self.cum[i] + 0.5 * (self.rpm[i] + r_t) * dt
    }

    /// Crank phase integral per sample for a record of `n` samples at
    /// `sample_rate`, in revolutions (divide by 60 happens at the caller).
    fn revolutions_per_sample(&self, sample_rate: f64, n: usize) -> Vec<f64> {
        // Single forward walk; profile segments are visited in order.
        let mut out = Vec::with_capacity(n);
        let mut seg = 0usize;
        let t0 = self.time[0];
        for s in 0..n {
            let t = s as f64 / sample_rate;
            if t <= t0 {
                out.push(self.rpm[0] * (t - t0));
                continue;
            }
            while seg + 1 < self.time.len() && self.time[seg + 1] < t {
                seg += 1;
            }
            if seg + 1 >= self.time.len() {
                let last = *self.time.last().unwrap();
                out.push(self.cum.last().unwrap() + self.rpm.last().unwrap() * (t - last));
            } else {
                let dt = t - self.time[seg];
                let frac = dt / (self.time[seg + 1] - self.time[seg]);
                let r_t = self.rpm[seg] + frac * (self.rpm[seg + 1] - self.rpm[seg]);
                out.push(self.cum[seg] + 0.5 * (self.rpm[seg] + r_t) * dt);
            }
        }
        out
    }
}

/// Build a speed profile from a tacho channel.
///
/// Already-scaled rpm traces pass through unchanged. Pulse trains are
/// converted via inter-pulse intervals (rising edges at half amplitude
/// with sub-sample interpolation) and smoothed with a 0.5 s moving
/// median.
pub fn rpm_profile_from_tacho(tacho: &TimeSeries) -> Result<RpmProfile> {
    if tacho.role != ChannelRole::Tacho {
        return Err(Error::IncompatibleChannels(format!(
            "channel {:?} has role {}, expected tacho",
            tacho.channel_id, tacho.role
        )));
    }
    let kind = tacho.tacho_kind.unwrap_or(match tacho.unit.as_str() {
        "pulse" => TachoKind::PulseTrain { pulses_per_rev: 1 },
        _ => TachoKind::RpmTrace,
    });
    match kind {
        TachoKind::RpmTrace => {
            let time: Vec<f64> = (0..tacho.len())
                .map(|i| i as f64 / tacho.sample_rate)
                .collect();
            RpmProfile::new(time, tacho.samples.clone())
        }
        TachoKind::PulseTrain { pulses_per_rev } => {
            if pulses_per_rev == 0 {
                return Err(Error::InvalidConfiguration(
                    "pulses_per_rev must be positive".into(),
                ));
            }
            let edges = rising_edges(&tacho.samples, tacho.sample_rate)?;
            if edges.len() < 3 {
                return Err(Error::CorruptTacho(format!(
                    "only {} tacho pulses found; need at least 3",
                    edges.len()
                )));
            }
            let mut time = Vec::with_capacity(edges.len() - 1);
            let mut rpm = Vec::with_capacity(edges.len() - 1);
            for w in edges.windows(2) {
                let dt = w[1] - w[0];
                if dt <= 0.0 {
                    return Err(Error::CorruptTacho("non-increasing pulse times".into()));
                }
                time.push(0.5 * (w[0] + w[1]));
                rpm.push(60.0 / (dt * pulses_per_rev as f64));
            }
            let smoothed = moving_median(&time, &rpm, MEDIAN_SPAN);
            RpmProfile::new(time, smoothed)
        }
    }
}

/// Rising-edge times at half amplitude, refined by linear interpolation
/// across the crossing sample.
fn rising_edges(samples: &[f64], sample_rate: f64) -> Result<Vec<f64>> {
    let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > min) {
        return Err(Error::CorruptTacho("tacho pulse channel is constant".into()));
    }
    let threshold = 0.5 * (max + min);
    let mut edges = Vec::new();
    for i in 1..samples.len() {
        if samples[i - 1] < threshold && samples[i] >= threshold {
            let frac = (threshold - samples[i - 1]) / (samples[i] - samples[i - 1]);
            edges.push((i as f64 - 1.0 + frac) / sample_rate);
        }
    }
    Ok(edges)
}

fn moving_median(time: &[f64], values: &[f64], span: f64) -> Vec<f64> {
    let half = span / 2.0;
    let mut out = Vec::with_capacity(values.len());
    let mut lo = 0usize;
    let mut hi = 0usize;
    let mut window: Vec<f64> = Vec::new();
    for i in 0..values.len() {
        while lo < values.len() && time[lo] < time[i] - half {
            lo += 1;
        }
        while hi < values.len() && time[hi] <= time[i] + half {
            hi += 1;
        }
        window.clear();
        window.extend_from_slice(&values[lo..hi]);
        window.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = window.len();
        out.push(if m % 2 == 1 {
            window[m / 2]
        } else {
            0.5 * (window[m / 2 - 1] + window[m / 2])
        });
    }
    out
}

/// Complex amplitude of one engine order versus rpm.
#[derive(Debug, Clone)]
pub struct OrderTrack {
    pub order: f64,
    pub rpm_grid: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub valid: Vec<bool>,
}

impl OrderTrack {
    pub fn validate(&self) -> Result<()> {
        if self.amplitude.len() != self.rpm_grid.len() || self.valid.len() != self.rpm_grid.len() {
            return Err(Error::IncompatibleGrids(
                "order track arrays differ in length".into(),
            ));
        }
        if self.rpm_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::IncompatibleGrids(
                "rpm grid must strictly increase".into(),
            ));
        }
        for (k, (&v, a)) in self.valid.iter().zip(&self.amplitude).enumerate() {
            if v && !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::InvalidConfiguration(format!(
                    "valid bin {k} holds non-finite amplitude"
                )));
            }
        }
        Ok(())
    }

    pub fn max_amplitude(&self) -> f64 {
        self.amplitude
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .fold(0.0_f64, |m, (a, _)| m.max(a.norm()))
    }
}

/// Mount transmissibility of one order: body-side over engine-side
/// complex amplitude versus rpm.
#[derive(Debug, Clone)]
pub struct OrderTransmissibility {
    pub order: f64,
    pub mount: Mount,
    pub direction: Direction,
    pub rpm_grid: Vec<f64>,
    pub ratio: Vec<Complex64>,
    pub valid: Vec<bool>,
}

/// Uniform rpm grid with bins on multiples of `step` inside
/// `[min, max]`; degenerates to a single mid-range bin when the range is
/// narrower than one step.
pub fn rpm_grid_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfiguration(format!(
            "rpm_step must be positive, got {step}"
        )));
    }
    let lo = ((min - 1e-9) / step).ceil() * step;
    let hi = ((max + 1e-9) / step).floor() * step;
    if lo > hi {
        return Ok(vec![0.5 * (min + max)]);
    }
    let n = ((hi - lo) / step).round() as usize + 1;
    Ok((0..n).map(|k| lo + k as f64 * step).collect())
}

/// Uniform rpm grid covering the profile range.
pub fn rpm_grid(profile: &RpmProfile, step: f64) -> Result<Vec<f64>> {
    rpm_grid_range(profile.min_rpm(), profile.max_rpm(), step)
}

/// Extract the complex amplitude of `order` along the rpm sweep.
///
/// Bins are placed on multiples of `rpm_step`; the window at each bin is
/// centered where the profile first crosses the bin speed and spans
/// `2 / half_bandwidth` seconds with `half_bandwidth =
/// bandwidth_orders * rpm / 60` Hz. Windows clipped by the record edges
/// stay usable; bins with less than one full signal cycle are masked.
pub fn extract_order(
    signal: &TimeSeries,
    profile: &RpmProfile,
    order: f64,
    rpm_step: f64,
    bandwidth_orders: f64,
) -> Result<OrderTrack> {
    if !(order > 0.0) {
        return Err(Error::InvalidConfiguration(format!(
            "order must be positive, got {order}"
        )));
    }
    if !(bandwidth_orders > 0.0) {
        return Err(Error::InvalidConfiguration(format!(
            "bandwidth_orders must be positive, got {bandwidth_orders}"
        )));
    }
    let nyquist = signal.sample_rate / 2.0;
    for &r in profile.rpm() {
        let f = order_frequency(order, r);
        if f >= nyquist {
            return Err(Error::OutOfBand {
                order,
                rpm: r,
                frequency: f,
                limit: nyquist,
            });
        }
    }

    let grid = rpm_grid(profile, rpm_step)?;
    let n = signal.len();
    let fs = signal.sample_rate;
    let revs = profile.revolutions_per_sample(fs, n);
    let omega_scale = 2.0 * PI * order / 60.0;

    let mut amplitude = Vec::with_capacity(grid.len());
    let mut valid = Vec::with_capacity(grid.len());
    for &r in &grid {
        let (amp, ok) = match profile.time_at_rpm(r) {
            Some(t_center) => {
                let f = order_frequency(order, r);
                let half_bw = bandwidth_orders * r / 60.0;
                let half_span = 1.0 / half_bw; // seconds, half the window
                let c = (t_center * fs).round() as i64;
                let h = (half_span * fs).round().max(1.0) as i64;
                let lo = (c - h).max(0) as usize;
                let hi = ((c + h) as usize).min(n - 1);
                let m = hi.saturating_sub(lo) + 1;
                let cycles = (m as f64 / fs) * f;
                if hi < lo || m < 8 || cycles < MIN_CYCLES {
                    (Complex64::default(), false)
                } else {
                    let mut acc = Complex64::default();
                    let mut wsum = 0.0;
                    for s in lo..=hi {
                        let w = 0.5 * (1.0 + (PI * (s as i64 - c) as f64 / h as f64).cos());
                        let phase = omega_scale * revs[s];
                        let (sin_p, cos_p) = phase.sin_cos();
                        let z = Complex64::new(cos_p, -sin_p);
                        acc += z.scale(w * signal.samples[s]);
                        wsum += w;
                    }
                    (acc.scale(2.0 / wsum), true)
                }
            }
            None => (Complex64::default(), false),
        };
        amplitude.push(amp);
        valid.push(ok);
    }

    let track = OrderTrack {
        order,
        rpm_grid: grid,
        amplitude,
        valid,
    };
    track.validate()?;
    Ok(track)
}

/// Fraction of a track's peak amplitude below which the engine-side
/// denominator is considered unexcited.
pub const AMPLITUDE_FLOOR_FRACTION: f64 = 1e-6;

/// Transmissibility of one order across one mount: the per-bin ratio of
/// body-side to engine-side complex order amplitude.
pub fn order_transmissibility(
    engine: &TimeSeries,
    body: &TimeSeries,
    profile: &RpmProfile,
    order: f64,
    rpm_step: f64,
) -> Result<OrderTransmissibility> {
    if engine.role != ChannelRole::EngineSide || body.role != ChannelRole::BodySide {
        return Err(Error::IncompatibleChannels(format!(
            "transmissibility needs engine_side and body_side channels, got {} and {}",
            engine.role, body.role
        )));
    }
    if engine.mount != body.mount || engine.direction != body.direction {
        return Err(Error::IncompatibleChannels(format!(
            "mount/direction mismatch: {:?} is {:?}:{:?}, {:?} is {:?}:{:?}",
            engine.channel_id,
            engine.mount,
            engine.direction,
            body.channel_id,
            body.mount,
            body.direction
        )));
    }
    let e = extract_order(engine, profile, order, rpm_step, DEFAULT_BANDWIDTH_ORDERS)?;
    let b = extract_order(body, profile, order, rpm_step, DEFAULT_BANDWIDTH_ORDERS)?;

    let eps_amp = AMPLITUDE_FLOOR_FRACTION * e.max_amplitude();
    let mut ratio = Vec::with_capacity(e.rpm_grid.len());
    let mut valid = Vec::with_capacity(e.rpm_grid.len());
    for k in 0..e.rpm_grid.len() {
        let ok = e.valid[k] && b.valid[k] && e.amplitude[k].norm() > eps_amp;
        ratio.push(if ok {
            b.amplitude[k] / e.amplitude[k]
        } else {
            Complex64::default()
        });
        valid.push(ok);
    }
    Ok(OrderTransmissibility {
        order,
        mount: engine.mount.expect("validated engine_side mount"),
        direction: engine.direction.expect("validated engine_side direction"),
        rpm_grid: e.rpm_grid,
        ratio,
        valid,
    })
}
