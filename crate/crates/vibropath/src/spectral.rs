//! Spectral estimation primitives: Welch-averaged auto/cross spectra,
//! H1 frequency response functions with coherence, and apparent mass.
//!
//! Invalid bins inside a [`Spectrum`] are stored as a NaN sentinel and
//! excluded from every downstream chain; use [`Spectrum::is_valid`] or
//! [`Spectrum::value_at`] rather than reading raw values.

use crate::error::{Error, Result};
use crate::signal::{ChannelRole, TimeSeries};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Windowing scheme for segment-averaged spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum WindowKind {
    /// Hann window with overlapped segments; for operational records.
    Hann,
    /// Impact-test windowing with one frame per detected hit: a boxcar
    /// over the leading `force_fraction` of the frame on the excitation
    /// channel, and an exponential decay to `exponential_final` at the
    /// frame end on the response channel. A final weight of 1.0 leaves
    /// the response unwindowed, which is the right choice when the
    /// response has fully decayed inside the frame.
    ForceExponential {
        force_fraction: f64,
        exponential_final: f64,
    },
}

impl WindowKind {
    pub fn force_exponential() -> WindowKind {
        WindowKind::ForceExponential {
            force_fraction: 0.05,
            exponential_final: 1.0,
        }
    }
}

/// Configuration for all spectral estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Frequency resolution in Hz.
    pub df: f64,
    /// Upper edge of the analysis band in Hz.
    pub f_max: f64,
    /// High-pass cutoff applied to recorded signals, Hz. Zero disables.
    pub highpass_cutoff: f64,
    pub window: WindowKind,
    /// Segment overlap for Hann windowing, in [0, 1).
    pub overlap_fraction: f64,
    /// FRF bins with coherence below this are masked invalid.
    pub coherence_threshold: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            df: 0.25,
            f_max: 800.0,
            highpass_cutoff: 7.0,
            window: WindowKind::Hann,
            overlap_fraction: 0.5,
            coherence_threshold: 0.7,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.df > 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "df must be positive, got {}",
                self.df
            )));
        }
        if !(self.highpass_cutoff >= 0.0 && self.f_max > self.highpass_cutoff) {
            return Err(Error::InvalidConfiguration(format!(
                "need f_max > highpass_cutoff >= 0, got f_max {} and cutoff {}",
                self.f_max, self.highpass_cutoff
            )));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::InvalidConfiguration(format!(
                "overlap_fraction must lie in [0, 1), got {}",
                self.overlap_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.coherence_threshold) {
            return Err(Error::InvalidConfiguration(format!(
                "coherence_threshold must lie in [0, 1], got {}",
                self.coherence_threshold
            )));
        }
        if let WindowKind::ForceExponential {
            force_fraction,
            exponential_final,
        } = self.window
        {
            if !(force_fraction > 0.0 && force_fraction <= 1.0) {
                return Err(Error::InvalidConfiguration(format!(
                    "force_fraction must lie in (0, 1], got {force_fraction}"
                )));
            }
            if !(exponential_final > 0.0 && exponential_final <= 1.0) {
                return Err(Error::InvalidConfiguration(format!(
                    "exponential_final must lie in (0, 1], got {exponential_final}"
                )));
            }
        }
        Ok(())
    }

    /// Segment length in samples for a given record rate.
    pub fn segment_len(&self, sample_rate: f64) -> usize {
        (sample_rate / self.df).round() as usize
    }

    pub fn with_window(mut self, window: WindowKind) -> Self {
        self.window = window;
        self
    }
}

/// A complex quantity on a uniform frequency grid. Invalid bins hold a
/// NaN sentinel; every other value is finite.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub unit: String,
}

pub(crate) const INVALID_BIN: Complex64 = Complex64::new(f64::NAN, f64::NAN);

impl Spectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>, unit: impl Into<String>) -> Result<Self> {
        let s = Spectrum {
            freqs,
            values,
            unit: unit.into(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.values.len() {
            return Err(Error::IncompatibleGrids(format!(
                "spectrum has {} freqs but {} values",
                self.freqs.len(),
                self.values.len()
            )));
        }
        if self.freqs.is_empty() {
            return Err(Error::EmptyResult("spectrum with no bins".into()));
        }
        if self.freqs.len() >= 2 {
            let df = self.freqs[1] - self.freqs[0];
            if !(df > 0.0) {
                return Err(Error::IncompatibleGrids(
                    "frequency grid must be strictly increasing".into(),
                ));
            }
            let scale = self.freqs.last().unwrap().abs().max(df);
            for k in 1..self.freqs.len() {
                let step = self.freqs[k] - self.freqs[k - 1];
                if (step - df).abs() > 1e-9 * scale {
                    return Err(Error::IncompatibleGrids(format!(
                        "non-uniform grid spacing at bin {k}: {step} vs {df}"
                    )));
                }
            }
        }
        // Infinities are always a bug; NaN is the validity sentinel.
        if self
            .values
            .iter()
            .any(|v| v.re.is_infinite() || v.im.is_infinite())
        {
            return Err(Error::InvalidConfiguration(
                "spectrum contains infinite values".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Grid spacing; zero for single-bin spectra.
    pub fn df(&self) -> f64 {
        if self.freqs.len() >= 2 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    pub fn is_valid(&self, bin: usize) -> bool {
        self.values
            .get(bin)
            .map(|v| v.re.is_finite() && v.im.is_finite())
            .unwrap_or(false)
    }

    pub fn valid_count(&self) -> usize {
        (0..self.values.len()).filter(|&k| self.is_valid(k)).count()
    }

    /// Complex value at an arbitrary frequency by linear interpolation of
    /// real and imaginary parts. `None` outside the grid or when either
    /// bracketing bin is invalid, so invalidity spreads to neighbours.
    pub fn value_at(&self, f: f64) -> Option<Complex64> {
        interp_complex(&self.freqs, &self.values, f)
    }
}

pub(crate) fn interp_complex(grid: &[f64], values: &[Complex64], x: f64) -> Option<Complex64> {
    if grid.is_empty() {
        return None;
    }
    let first = grid[0];
    let last = *grid.last().unwrap();
    if x < first || x > last {
        return None;
    }
    if grid.len() == 1 {
        let v = values[0];
        return (v.re.is_finite() && v.im.is_finite()).then_some(v);
    }
    let df = (last - first) / (grid.len() - 1) as f64;
    let pos = (x - first) / df;
    let i0 = (pos.floor() as usize).min(grid.len() - 2);
    let frac = pos - i0 as f64;
    let (a, b) = (values[i0], values[i0 + 1]);
    if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
        return None;
    }
    Some(a + (b - a).scale(frac))
}

/// An H1 frequency response function with its coherence track.
#[derive(Debug, Clone)]
pub struct CoherentFrf {
    pub frf: Spectrum,
    /// Coherence per bin, clamped to [0, 1].
    pub coherence: Vec<f64>,
    /// Number of averaged segments or impacts.
    pub n_averages: usize,
}

impl CoherentFrf {
    pub fn validate(&self) -> Result<()> {
        self.frf.validate()?;
        if self.coherence.len() != self.frf.len() {
            return Err(Error::IncompatibleGrids(
                "coherence track length differs from FRF grid".into(),
            ));
        }
        if self.coherence.iter().any(|&g| !(0.0..=1.0).contains(&g)) {
            return Err(Error::InvalidConfiguration(
                "coherence outside [0, 1]".into(),
            ));
        }
        if self.n_averages < 1 {
            return Err(Error::InvalidConfiguration("n_averages must be >= 1".into()));
        }
        Ok(())
    }

    pub fn is_valid(&self, bin: usize) -> bool {
        self.frf.is_valid(bin)
    }

    pub fn value_at(&self, f: f64) -> Option<Complex64> {
        self.frf.value_at(f)
    }

    /// Coherence at an arbitrary frequency (nearest bin).
    pub fn coherence_at(&self, f: f64) -> Option<f64> {
        if self.frf.freqs.is_empty() || self.frf.df() == 0.0 {
            return self.coherence.first().copied();
        }
        let pos = (f - self.frf.freqs[0]) / self.frf.df();
        if pos < -0.5 || pos > self.frf.len() as f64 - 0.5 {
            return None;
        }
        let k = pos.round().max(0.0) as usize;
        self.coherence.get(k.min(self.frf.len() - 1)).copied()
    }
}

/// The uniform one-sided frequency grid spectral estimates live on for a
/// record rate and config: spacing `sample_rate / round(sample_rate/df)`
/// from 0 up to at most `f_max` (clamped at Nyquist).
pub fn analysis_freq_grid(sample_rate: f64, df: f64, f_max: f64) -> Vec<f64> {
    let seg_len = (sample_rate / df).round().max(2.0) as usize;
    let df_actual = sample_rate / seg_len as f64;
    let kmax = (((f_max / df_actual) + 1e-9).floor() as usize).min(seg_len / 2);
    (0..=kmax).map(|k| k as f64 * df_actual).collect()
}

struct CrossSpectra {
    freqs: Vec<f64>,
    sxx: Vec<f64>,
    syy: Vec<f64>,
    sxy: Vec<Complex64>,
    n_averages: usize,
}

fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / len as f64).cos()))
        .collect()
}

/// Frame start indices for impact records: one frame per detected hit on
/// the excitation channel, starting a little ahead of the trigger.
fn impact_frames(x: &[f64], frame_len: usize) -> Result<Vec<usize>> {
    let peak = x.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
    if peak <= 0.0 {
        return Err(Error::InsufficientExcitation(
            "excitation channel is identically zero; no impact triggers found".into(),
        ));
    }
    let threshold = 0.2 * peak;
    let pretrigger = (0.01 * frame_len as f64).round() as usize;
    let mut frames = Vec::new();
    let mut i = 0;
    while i < x.len() {
        if x[i].abs() >= threshold {
            let start = i.saturating_sub(pretrigger);
            if start + frame_len <= x.len() {
                frames.push(start);
            }
            i = start + frame_len; // hold off one full frame
        } else {
            i += 1;
        }
    }
    if frames.is_empty() {
        return Err(Error::InsufficientData(
            "no complete impact frame fits the record".into(),
        ));
    }
    Ok(frames)
}

fn cross_spectra(x: &TimeSeries, y: &TimeSeries, cfg: &SpectralConfig) -> Result<CrossSpectra> {
    cfg.validate()?;
    x.compatible_with(y)?;
    let n = x.len();
    let seg_len = cfg.segment_len(x.sample_rate);
    if seg_len < 2 {
        return Err(Error::InvalidConfiguration(format!(
            "df {} too coarse for sample rate {}",
            cfg.df, x.sample_rate
        )));
    }
    if seg_len > n {
        return Err(Error::InsufficientData(format!(
            "record of {n} samples is shorter than one segment ({seg_len} samples at df {})",
            cfg.df
        )));
    }

    // Segment start indices and per-channel windows.
    let (starts, wx, wy): (Vec<usize>, Vec<f64>, Vec<f64>) = match cfg.window {
        WindowKind::Hann => {
            let hop = ((seg_len as f64) * (1.0 - cfg.overlap_fraction)).round().max(1.0) as usize;
            let mut starts = Vec::new();
            let mut s = 0;
            while s + seg_len <= n {
                starts.push(s);
                s += hop;
            }
            let w = hann_window(seg_len);
            (starts, w.clone(), w)
        }
        WindowKind::ForceExponential {
            force_fraction,
            exponential_final,
        } => {
            let starts = impact_frames(&x.samples, seg_len)?;
            let force_samples = ((force_fraction * seg_len as f64).round() as usize).max(1);
            let wf: Vec<f64> = (0..seg_len)
                .map(|k| if k < force_samples { 1.0 } else { 0.0 })
                .collect();
            let decay = exponential_final.ln() / (seg_len - 1) as f64;
            let we: Vec<f64> = (0..seg_len).map(|k| (decay * k as f64).exp()).collect();
            (starts, wf, we)
        }
    };
    let n_averages = starts.len();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(seg_len);
    let mut bx = vec![Complex64::default(); seg_len];
    let mut by = vec![Complex64::default(); seg_len];

    let freqs = analysis_freq_grid(x.sample_rate, cfg.df, cfg.f_max);
    let nyq_bin = seg_len / 2;
    let n_bins = freqs.len();

    let mut sxx = vec![0.0; n_bins];
    let mut syy = vec![0.0; n_bins];
    let mut sxy = vec![Complex64::default(); n_bins];

    for &s in &starts {
        for k in 0..seg_len {
            bx[k] = Complex64::new(x.samples[s + k] * wx[k], 0.0);
            by[k] = Complex64::new(y.samples[s + k] * wy[k], 0.0);
        }
        fft.process(&mut bx);
        fft.process(&mut by);
        for k in 0..n_bins {
            sxx[k] += bx[k].norm_sqr();
            syy[k] += by[k].norm_sqr();
            sxy[k] += bx[k].conj() * by[k];
        }
    }

    // One-sided power spectral density scaling. For mixed impact windows
    // the force-window power is used; ratios are unaffected either way.
    let w2: f64 = match cfg.window {
        WindowKind::Hann => wx.iter().map(|w| w * w).sum(),
        WindowKind::ForceExponential { .. } => seg_len as f64,
    };
    let base = 1.0 / (x.sample_rate * w2 * n_averages as f64);
    for k in 0..n_bins {
        let scale = if k == 0 || (seg_len % 2 == 0 && k == nyq_bin) {
            base
        } else {
            2.0 * base
        };
        sxx[k] *= scale;
        syy[k] *= scale;
        sxy[k] = sxy[k].scale(scale);
    }

    Ok(CrossSpectra {
        freqs,
        sxx,
        syy,
        sxy,
        n_averages,
    })
}

/// Welch-averaged cross spectral density S_xy on the grid `[0, f_max]`.
/// With `x` and `y` the same channel this is the (real, non-negative)
/// autospectrum.
pub fn welch_cross_spectrum(
    x: &TimeSeries,
    y: &TimeSeries,
    cfg: &SpectralConfig,
) -> Result<Spectrum> {
    let cs = cross_spectra(x, y, cfg)?;
    Spectrum::new(
        cs.freqs,
        cs.sxy,
        format!("({}*{})/Hz", x.unit, y.unit),
    )
}

/// Fraction of the largest excitation autospectrum value below which a
/// bin counts as unexcited.
pub const POWER_FLOOR_FRACTION: f64 = 1e-12;

/// H1 frequency response estimate S_xy / S_xx with coherence.
///
/// Bins whose excitation autospectrum falls below the power floor, whose
/// coherence falls below `cfg.coherence_threshold`, or bin 0 when a
/// high-pass cutoff is active, are masked invalid. For impact records use
/// the force/exponential window; frames are then triggered off the
/// excitation channel.
pub fn frf_h1(
    excitation: &TimeSeries,
    response: &TimeSeries,
    cfg: &SpectralConfig,
) -> Result<CoherentFrf> {
    let cs = cross_spectra(excitation, response, cfg)?;
    let sxx_max = cs.sxx.iter().fold(0.0_f64, |m, &v| m.max(v));
    let eps_power = POWER_FLOOR_FRACTION * sxx_max;

    let n_bins = cs.freqs.len();
    let mut values = vec![INVALID_BIN; n_bins];
    let mut coherence = vec![0.0; n_bins];
    for k in 0..n_bins {
        let dc_masked = k == 0 && cfg.highpass_cutoff > 0.0;
        if cs.sxx[k] <= eps_power || sxx_max == 0.0 {
            continue;
        }
        let denom = cs.sxx[k] * cs.syy[k];
        let gamma = if denom > 0.0 {
            (cs.sxy[k].norm_sqr() / denom).clamp(0.0, 1.0)
        } else {
            0.0
        };
        coherence[k] = gamma;
        if !dc_masked && gamma >= cfg.coherence_threshold {
            // Per-component division keeps frf_h1(x, x) exactly 1 + 0i.
            values[k] = Complex64::new(cs.sxy[k].re / cs.sxx[k], cs.sxy[k].im / cs.sxx[k]);
        }
    }

    let frf = Spectrum::new(
        cs.freqs,
        values,
        format!("{}/{}", response.unit, excitation.unit),
    )?;
    Ok(CoherentFrf {
        frf,
        coherence,
        n_averages: cs.n_averages,
    })
}

/// Apparent mass F/a at a driving point, from a hammer force channel and
/// the co-located body-side accelerometer.
///
/// Estimated as the per-bin reciprocal of the H1 accelerance a/F, since
/// the hammer force is the low-noise reference. Bins where the
/// accelerance magnitude vanishes are masked instead of divided.
pub fn apparent_mass(
    force: &TimeSeries,
    accel: &TimeSeries,
    cfg: &SpectralConfig,
) -> Result<CoherentFrf> {
    if force.role != ChannelRole::HammerForce {
        return Err(Error::IncompatibleChannels(format!(
            "apparent mass needs a hammer_force excitation, channel {:?} has role {}",
            force.channel_id, force.role
        )));
    }
    if accel.role != ChannelRole::BodySide {
        return Err(Error::IncompatibleChannels(format!(
            "apparent mass needs a body_side response, channel {:?} has role {}",
            accel.channel_id, accel.role
        )));
    }
    if force.mount != accel.mount {
        return Err(Error::IncompatibleChannels(format!(
            "apparent mass channels must be co-located: {:?} on {:?} vs {:?} on {:?}",
            force.channel_id, force.mount, accel.channel_id, accel.mount
        )));
    }

    let accelerance = frf_h1(force, accel, cfg)?;
    let mag_max = accelerance
        .frf
        .values
        .iter()
        .filter(|v| v.re.is_finite() && v.im.is_finite())
        .fold(0.0_f64, |m, v| m.max(v.norm()));
    if mag_max == 0.0 {
        return Err(Error::InsufficientExcitation(
            "no valid accelerance bins; excitation below the power floor everywhere".into(),
        ));
    }
    let eps_mag = 1e-9 * mag_max;

    let values: Vec<Complex64> = accelerance
        .frf
        .values
        .iter()
        .map(|v| {
            if v.re.is_finite() && v.im.is_finite() && v.norm() >= eps_mag {
                v.inv()
            } else {
                INVALID_BIN
            }
        })
        .collect();
    let frf = Spectrum::new(accelerance.frf.freqs.clone(), values, "kg")?;
    if frf.valid_count() == 0 {
        return Err(Error::InsufficientExcitation(
            "all apparent-mass bins masked".into(),
        ));
    }
    Ok(CoherentFrf {
        frf,
        coherence: accelerance.coherence,
        n_averages: accelerance.n_averages,
    })
}
