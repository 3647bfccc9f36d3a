//! Transfer-path assembly: per-path chains of mount transmissibility,
//! apparent mass and body FRF; path contributions at the target point;
//! total synthesis; path ranking and mount dynamic stiffness.
//!
//! Each path is one (mount, direction) pair treated as a scalar chain:
//! the target contribution of a path is the engine-side order amplitude
//! multiplied by the transmissibility across the mount, the apparent
//! mass at the body-side attachment, and the body FRF from that
//! attachment to the target. Frequency-domain factors are evaluated at
//! the order-mapped frequency `order * rpm / 60` by linear interpolation
//! of real and imaginary parts; a bin is valid only when every factor is.

use crate::error::{Error, Result};
use crate::order::{order_frequency, OrderTrack, OrderTransmissibility};
use crate::signal::{Direction, Mount};
use crate::spectral::{CoherentFrf, Spectrum, INVALID_BIN};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// One structure-borne transfer path: an engine mount and a principal
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PathId {
    pub mount: Mount,
    pub direction: Direction,
}

impl PathId {
    pub fn new(mount: Mount, direction: Direction) -> Self {
        PathId { mount, direction }
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.mount, self.direction)
    }
}

/// Full path set for a mount layout: the cartesian product of the given
/// mounts with the three principal directions, in mount order then X, Y, Z.
pub fn build_paths(mounts: &[Mount]) -> Result<Vec<PathId>> {
    if mounts.is_empty() {
        return Err(Error::InvalidConfiguration(
            "mount list must not be empty".into(),
        ));
    }
    for (i, m) in mounts.iter().enumerate() {
        if mounts[..i].contains(m) {
            return Err(Error::InvalidConfiguration(format!(
                "duplicate mount {m} in mount list"
            )));
        }
    }
    Ok(mounts
        .iter()
        .flat_map(|&m| Direction::ALL.iter().map(move |&d| PathId::new(m, d)))
        .collect())
}

/// The measured transfer chain of one path.
#[derive(Debug, Clone)]
pub struct PathChain {
    pub path: PathId,
    /// One transmissibility per tracked order, all on the same rpm grid.
    pub transmissibility: Vec<OrderTransmissibility>,
    /// Driving-point apparent mass at the body-side attachment, kg.
    pub apparent_mass: CoherentFrf,
    /// Body FRF from attachment force to target acceleration, (m/s^2)/N.
    pub body_frf: CoherentFrf,
}

fn grids_match(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            let scale = x.abs().max(y.abs()).max(1.0);
            (x - y).abs() <= 1e-9 * scale
        })
}

impl PathChain {
    pub fn new(
        path: PathId,
        transmissibility: Vec<OrderTransmissibility>,
        apparent_mass: CoherentFrf,
        body_frf: CoherentFrf,
    ) -> Result<Self> {
        for t in &transmissibility {
            if t.mount != path.mount || t.direction != path.direction {
                return Err(Error::IncompatibleChannels(format!(
                    "transmissibility for {}:{} attached to chain {}",
                    t.mount, t.direction, path
                )));
            }
        }
        if let Some(first) = transmissibility.first() {
            for t in &transmissibility[1..] {
                if !grids_match(&first.rpm_grid, &t.rpm_grid) {
                    return Err(Error::IncompatibleGrids(format!(
                        "transmissibility rpm grids differ within chain {path}"
                    )));
                }
            }
        }
        if !grids_match(&apparent_mass.frf.freqs, &body_frf.frf.freqs) {
            return Err(Error::IncompatibleGrids(format!(
                "apparent mass and body FRF grids differ for chain {path}"
            )));
        }
        Ok(PathChain {
            path,
            transmissibility,
            apparent_mass,
            body_frf,
        })
    }

    pub fn transmissibility_for(&self, order: f64) -> Option<&OrderTransmissibility> {
        self.transmissibility
            .iter()
            .find(|t| (t.order - order).abs() < 1e-9)
    }
}

/// What a contribution refers to: one path, or the synthesized total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathRef {
    Path(PathId),
    Total,
}

impl fmt::Display for PathRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathRef::Path(p) => p.fmt(f),
            PathRef::Total => f.write_str("ALL"),
        }
    }
}

/// Target-point acceleration from one path (or the total) at one order.
#[derive(Debug, Clone)]
pub struct Contribution {
    pub path: PathRef,
    pub order: f64,
    pub rpm_grid: Vec<f64>,
    pub value: Vec<Complex64>,
    pub valid: Vec<bool>,
}

impl Contribution {
    pub fn validate(&self) -> Result<()> {
        if self.value.len() != self.rpm_grid.len() || self.valid.len() != self.rpm_grid.len() {
            return Err(Error::IncompatibleGrids(
                "contribution arrays differ in length".into(),
            ));
        }
        for (k, (&ok, v)) in self.valid.iter().zip(&self.value).enumerate() {
            if ok && !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidConfiguration(format!(
                    "valid contribution bin {k} holds non-finite value"
                )));
            }
        }
        Ok(())
    }
}

/// Interface force at the body-side attachment: apparent mass evaluated
/// at the order-mapped frequency times the body-side acceleration track.
/// Bins mapping outside the apparent-mass grid are masked, not an error.
pub fn interface_force(apparent_mass: &CoherentFrf, body_accel: &OrderTrack) -> OrderTrack {
    let mut amplitude = Vec::with_capacity(body_accel.rpm_grid.len());
    let mut valid = Vec::with_capacity(body_accel.rpm_grid.len());
    for k in 0..body_accel.rpm_grid.len() {
        let f = order_frequency(body_accel.order, body_accel.rpm_grid[k]);
        match (body_accel.valid[k], apparent_mass.value_at(f)) {
            (true, Some(m)) => {
                amplitude.push(m * body_accel.amplitude[k]);
                valid.push(true);
            }
            _ => {
                amplitude.push(Complex64::default());
                valid.push(false);
            }
        }
    }
    OrderTrack {
        order: body_accel.order,
        rpm_grid: body_accel.rpm_grid.clone(),
        amplitude,
        valid,
    }
}

/// Target contribution of one path at the engine track's order:
/// engine amplitude x transmissibility x apparent mass x body FRF.
pub fn path_contribution(engine_track: &OrderTrack, chain: &PathChain) -> Result<Contribution> {
    let t = chain
        .transmissibility_for(engine_track.order)
        .ok_or_else(|| Error::MissingOrder {
            order: engine_track.order,
            path: chain.path.to_string(),
        })?;
    if !grids_match(&engine_track.rpm_grid, &t.rpm_grid) {
        return Err(Error::IncompatibleGrids(format!(
            "engine track and transmissibility grids differ for chain {}",
            chain.path
        )));
    }

    let n = engine_track.rpm_grid.len();
    let mut value = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for k in 0..n {
        let f = order_frequency(engine_track.order, engine_track.rpm_grid[k]);
        let factors = if engine_track.valid[k] && t.valid[k] {
            chain
                .apparent_mass
                .value_at(f)
                .zip(chain.body_frf.value_at(f))
        } else {
            None
        };
        match factors {
            Some((m, h)) => {
                value.push(((engine_track.amplitude[k] * t.ratio[k]) * m) * h);
                valid.push(true);
            }
            None => {
                value.push(Complex64::default());
                valid.push(false);
            }
        }
    }
    Ok(Contribution {
        path: PathRef::Path(chain.path),
        order: engine_track.order,
        rpm_grid: engine_track.rpm_grid.clone(),
        value,
        valid,
    })
}

/// How invalid bins combine when summing contributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// A total bin is valid only where every summand is valid.
    #[default]
    Strict,
    /// A total bin is valid where at least one summand is; invalid
    /// summands count as zero.
    Lenient,
}

/// Complex sum of contributions per bin under strict masking.
pub fn synthesize_target(contributions: &[Contribution]) -> Result<Contribution> {
    synthesize_target_with(contributions, MaskMode::Strict)
}

/// Complex sum of contributions per bin. All inputs must share order and
/// rpm grid. Summation order is the slice order, so results are
/// deterministic.
pub fn synthesize_target_with(
    contributions: &[Contribution],
    mode: MaskMode,
) -> Result<Contribution> {
    let first = contributions.first().ok_or_else(|| {
        Error::InvalidConfiguration("cannot synthesize from an empty contribution list".into())
    })?;
    for c in &contributions[1..] {
        if (c.order - first.order).abs() > 1e-9 {
            return Err(Error::IncompatibleGrids(format!(
                "contribution orders differ: {} vs {}",
                c.order, first.order
            )));
        }
        if !grids_match(&c.rpm_grid, &first.rpm_grid) {
            return Err(Error::IncompatibleGrids(
                "contribution rpm grids differ".into(),
            ));
        }
    }

    let n = first.rpm_grid.len();
    let mut value = vec![Complex64::default(); n];
    let mut valid = match mode {
        MaskMode::Strict => vec![true; n],
        MaskMode::Lenient => vec![false; n],
    };
    for c in contributions {
        for k in 0..n {
            match mode {
                MaskMode::Strict => {
                    valid[k] &= c.valid[k];
                    if c.valid[k] {
                        value[k] += c.value[k];
                    }
                }
                MaskMode::Lenient => {
                    if c.valid[k] {
                        valid[k] = true;
                        value[k] += c.value[k];
                    }
                }
            }
        }
    }
    for k in 0..n {
        if !valid[k] {
            value[k] = Complex64::default();
        }
    }
    Ok(Contribution {
        path: PathRef::Total,
        order: first.order,
        rpm_grid: first.rpm_grid.clone(),
        value,
        valid,
    })
}

/// RMS level at one speed across per-order totals:
/// `sqrt(sum_orders |y_o|^2 / 2)`, the RMS of a sum of sinusoids at
/// distinct frequencies. Orders invalid at that speed are skipped.
pub fn overall_level(per_order_totals: &[Contribution], rpm: f64) -> Result<f64> {
    let first = per_order_totals.first().ok_or_else(|| {
        Error::InvalidConfiguration("overall level of an empty total list".into())
    })?;
    for (i, c) in per_order_totals.iter().enumerate() {
        if !grids_match(&c.rpm_grid, &first.rpm_grid) {
            return Err(Error::IncompatibleGrids(
                "per-order totals live on different rpm grids".into(),
            ));
        }
        for other in &per_order_totals[..i] {
            if (other.order - c.order).abs() < 1e-9 {
                return Err(Error::InvalidConfiguration(format!(
                    "duplicate order {} in total list",
                    c.order
                )));
            }
        }
    }
    let grid = &first.rpm_grid;
    let step = if grid.len() >= 2 {
        grid[1] - grid[0]
    } else {
        f64::INFINITY
    };
    let k = grid
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - rpm).abs().partial_cmp(&(b.1 - rpm).abs()).unwrap()
        })
        .map(|(k, _)| k)
        .unwrap();
    if (grid[k] - rpm).abs() > 0.5 * step + 1e-9 {
        return Err(Error::InvalidConfiguration(format!(
            "rpm {rpm} lies outside the total grid [{}, {}]",
            grid[0],
            grid.last().unwrap()
        )));
    }
    let mut energy = 0.0;
    let mut any = false;
    for c in per_order_totals {
        if c.valid[k] {
            energy += c.value[k].norm_sqr() / 2.0;
            any = true;
        }
    }
    if !any {
        return Err(Error::EmptyResult(format!(
            "no order valid at {rpm} rpm"
        )));
    }
    Ok(energy.sqrt())
}

/// Overall level along the whole grid; a bin is valid where at least one
/// order is.
pub fn overall_level_curve(per_order_totals: &[Contribution]) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    let first = per_order_totals.first().ok_or_else(|| {
        Error::InvalidConfiguration("overall level of an empty total list".into())
    })?;
    let grid = first.rpm_grid.clone();
    let mut level = vec![0.0; grid.len()];
    let mut valid = vec![false; grid.len()];
    for c in per_order_totals {
        if !grids_match(&c.rpm_grid, &grid) {
            return Err(Error::IncompatibleGrids(
                "per-order totals live on different rpm grids".into(),
            ));
        }
        for k in 0..grid.len() {
            if c.valid[k] {
                level[k] += c.value[k].norm_sqr() / 2.0;
                valid[k] = true;
            }
        }
    }
    for l in &mut level {
        *l = l.sqrt();
    }
    Ok((grid, level, valid))
}

/// Unit convention for [`dynamic_stiffness`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StiffnessScaling {
    /// The raw transmissibility x apparent-mass product, kg.
    #[default]
    Product,
    /// Product multiplied by (2*pi*f)^2, N/m.
    OmegaSquared,
}

/// Mount dynamic stiffness: the transmissibility times the apparent mass
/// on the order-mapped frequency axis. With [`StiffnessScaling::OmegaSquared`]
/// the product is converted to N/m.
pub fn dynamic_stiffness(
    transmissibility: &OrderTransmissibility,
    apparent_mass: &CoherentFrf,
    scaling: StiffnessScaling,
) -> Result<Spectrum> {
    let mut freqs = Vec::with_capacity(transmissibility.rpm_grid.len());
    let mut values = Vec::with_capacity(transmissibility.rpm_grid.len());
    let mut any_valid = false;
    for k in 0..transmissibility.rpm_grid.len() {
        let f = order_frequency(transmissibility.order, transmissibility.rpm_grid[k]);
        freqs.push(f);
        let v = if transmissibility.valid[k] {
            apparent_mass.value_at(f).map(|m| {
                let product = transmissibility.ratio[k] * m;
                match scaling {
                    StiffnessScaling::Product => product,
                    StiffnessScaling::OmegaSquared => {
                        let w = 2.0 * std::f64::consts::PI * f;
                        product.scale(w * w)
                    }
                }
            })
        } else {
            None
        };
        match v {
            Some(value) => {
                values.push(value);
                any_valid = true;
            }
            None => values.push(INVALID_BIN),
        }
    }
    if !any_valid {
        return Err(Error::EmptyResult(
            "no overlapping valid region between transmissibility and apparent mass".into(),
        ));
    }
    Spectrum::new(
        freqs,
        values,
        match scaling {
            StiffnessScaling::Product => "kg",
            StiffnessScaling::OmegaSquared => "N/m",
        },
    )
}

/// Grouping granularity for [`rank_paths`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    Mount,
    Path,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingEntry {
    pub label: String,
    pub mount: Mount,
    pub direction: Option<Direction>,
    /// Band RMS of the group's target contribution, m/s^2.
    pub rms_level: f64,
    /// Fraction of the summed band energy, in [0, 1].
    pub share: f64,
}

/// Paths or mounts ordered by their share of the target vibration over
/// an rpm band.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingTable {
    pub group_by: GroupBy,
    pub rpm_range: (f64, f64),
    /// Sorted by rms_level descending; ties in fixed mount order
    /// (RH, LH, REAR) then direction (X, Y, Z).
    pub entries: Vec<RankingEntry>,
}

/// Rank per-path contributions by band energy over `rpm_range`:
/// `E_g = sum_orders sum_(rpm in range, valid) |y|^2 / 2`, with
/// `rms = sqrt(E_g / n_bins)` over the bins in range and
/// `share = E_g / sum E`.
pub fn rank_paths(
    contributions: &[Contribution],
    rpm_range: (f64, f64),
    group_by: GroupBy,
) -> Result<RankingTable> {
    let (lo, hi) = rpm_range;
    if !(lo < hi) {
        return Err(Error::InvalidConfiguration(format!(
            "rpm range must satisfy low < high, got ({lo}, {hi})"
        )));
    }
    let first = contributions.first().ok_or_else(|| {
        Error::InvalidConfiguration("cannot rank an empty contribution list".into())
    })?;
    let grid = &first.rpm_grid;
    for c in contributions {
        if !grids_match(&c.rpm_grid, grid) {
            return Err(Error::IncompatibleGrids(
                "contributions live on different rpm grids".into(),
            ));
        }
    }
    let bins: Vec<usize> = (0..grid.len())
        .filter(|&k| grid[k] >= lo - 1e-9 && grid[k] <= hi + 1e-9)
        .collect();
    if bins.is_empty() {
        return Err(Error::InvalidConfiguration(format!(
            "rpm range ({lo}, {hi}) covers no grid bins"
        )));
    }

    // Group keys in deterministic order of first appearance over the
    // fixed mount/direction ordering.
    let mut keys: Vec<(Mount, Option<Direction>)> = Vec::new();
    for c in contributions {
        let path = match c.path {
            PathRef::Path(p) => p,
            PathRef::Total => {
                return Err(Error::InvalidConfiguration(
                    "ranking requires per-path contributions, found a total".into(),
                ))
            }
        };
        let key = match group_by {
            GroupBy::Mount => (path.mount, None),
            GroupBy::Path => (path.mount, Some(path.direction)),
        };
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.sort();

    let mut energies = vec![0.0; keys.len()];
    for c in contributions {
        let path = match c.path {
            PathRef::Path(p) => p,
            PathRef::Total => unreachable!(),
        };
        let key = match group_by {
            GroupBy::Mount => (path.mount, None),
            GroupBy::Path => (path.mount, Some(path.direction)),
        };
        let g = keys.iter().position(|k| *k == key).unwrap();
        for &k in &bins {
            if c.valid[k] {
                energies[g] += c.value[k].norm_sqr() / 2.0;
            }
        }
    }

    let total: f64 = energies.iter().sum();
    let mut entries: Vec<RankingEntry> = keys
        .iter()
        .zip(&energies)
        .map(|(&(mount, direction), &e)| RankingEntry {
            label: match direction {
                Some(d) => format!("{mount}:{d}"),
                None => mount.to_string(),
            },
            mount,
            direction,
            rms_level: (e / bins.len() as f64).sqrt(),
            share: if total > 0.0 { e / total } else { 0.0 },
        })
        .collect();
    entries.sort_by(|a, b| {
        b.rms_level
            .partial_cmp(&a.rms_level)
            .unwrap()
            .then_with(|| (a.mount, a.direction).cmp(&(b.mount, b.direction)))
    });
    Ok(RankingTable {
        group_by,
        rpm_range,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_frf(f0: f64, df: f64, n: usize, value: Complex64, unit: &str) -> CoherentFrf {
        let freqs: Vec<f64> = (0..n).map(|k| f0 + k as f64 * df).collect();
        CoherentFrf {
            frf: Spectrum::new(freqs, vec![value; n], unit).unwrap(),
            coherence: vec![1.0; n],
            n_averages: 5,
        }
    }

    fn track(order: f64, grid: &[f64], amp: Complex64) -> OrderTrack {
        OrderTrack {
            order,
            rpm_grid: grid.to_vec(),
            amplitude: vec![amp; grid.len()],
            valid: vec![true; grid.len()],
        }
    }

    fn const_transmissibility(
        order: f64,
        grid: &[f64],
        mount: Mount,
        direction: Direction,
        ratio: Complex64,
    ) -> OrderTransmissibility {
        OrderTransmissibility {
            order,
            mount,
            direction,
            rpm_grid: grid.to_vec(),
            ratio: vec![ratio; grid.len()],
            valid: vec![true; grid.len()],
        }
    }

    fn grid() -> Vec<f64> {
        (0..11).map(|k| 1000.0 + 100.0 * k as f64).collect()
    }

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn three_mounts_give_nine_paths() {
        let paths = build_paths(&Mount::ALL).unwrap();
        assert_eq!(paths.len(), 9);
        let unique: std::collections::BTreeSet<_> = paths.iter().collect();
        assert_eq!(unique.len(), 9);
        assert_eq!(paths[0], PathId::new(Mount::Rh, Direction::X));
        assert_eq!(paths[8], PathId::new(Mount::Rear, Direction::Z));
    }

    #[test]
    fn one_mount_gives_three_paths() {
        let paths = build_paths(&[Mount::Rh]).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(paths.iter().all(|p| p.mount == Mount::Rh));
    }

    #[test]
    fn empty_or_duplicate_mounts_rejected() {
        assert!(matches!(
            build_paths(&[]),
            Err(Error::InvalidConfiguration(_))
        ));
        assert!(matches!(
            build_paths(&[Mount::Lh, Mount::Lh]),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn rigid_mass_interface_force() {
        let g = grid();
        let mass = 25.0;
        let m_app = const_frf(0.0, 5.0, 200, Complex64::new(mass, 0.0), "kg");
        let accel = track(2.0, &g, Complex64::new(0.3, 0.1));
        let force = interface_force(&m_app, &accel);
        for k in 0..g.len() {
            assert!(force.valid[k]);
            let expected = Complex64::new(0.3, 0.1).scale(mass);
            assert!((force.amplitude[k] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_accel_gives_zero_force() {
        let g = grid();
        let m_app = const_frf(0.0, 5.0, 200, Complex64::new(10.0, 0.0), "kg");
        let accel = track(2.0, &g, Complex64::default());
        let force = interface_force(&m_app, &accel);
        assert!(force.amplitude.iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn out_of_grid_frequency_masks_bin() {
        let g = grid(); // order 2 maps to 33.3..70 Hz
        let m_app = const_frf(0.0, 5.0, 10, one(), "kg"); // grid ends at 45 Hz
        let accel = track(2.0, &g, one());
        let force = interface_force(&m_app, &accel);
        assert!(force.valid[0]); // 33.3 Hz inside
        assert!(!force.valid[10]); // 70 Hz outside
    }

    fn identity_chain(path: PathId, g: &[f64]) -> PathChain {
        PathChain::new(
            path,
            vec![const_transmissibility(2.0, g, path.mount, path.direction, one())],
            const_frf(0.0, 5.0, 200, one(), "kg"),
            const_frf(0.0, 5.0, 200, one(), "(m/s^2)/N"),
        )
        .unwrap()
    }

    #[test]
    fn identity_chain_returns_engine_track() {
        let g = grid();
        let path = PathId::new(Mount::Rh, Direction::X);
        let chain = identity_chain(path, &g);
        let engine = track(2.0, &g, Complex64::new(0.4, -0.2));
        let c = path_contribution(&engine, &chain).unwrap();
        for k in 0..g.len() {
            assert!(c.valid[k]);
            assert_eq!(c.value[k], engine.amplitude[k]);
        }
    }

    #[test]
    fn zero_engine_track_gives_zero_contribution() {
        let g = grid();
        let chain = identity_chain(PathId::new(Mount::Lh, Direction::Z), &g);
        let engine = track(2.0, &g, Complex64::default());
        let c = path_contribution(&engine, &chain).unwrap();
        assert!(c.value.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn missing_order_is_reported() {
        let g = grid();
        let chain = identity_chain(PathId::new(Mount::Rh, Direction::X), &g);
        let engine = track(4.0, &g, one());
        let err = path_contribution(&engine, &chain).unwrap_err();
        assert!(matches!(err, Error::MissingOrder { .. }), "{err}");
    }

    #[test]
    fn single_contribution_synthesizes_to_itself() {
        let g = grid();
        let chain = identity_chain(PathId::new(Mount::Rh, Direction::X), &g);
        let engine = track(2.0, &g, Complex64::new(0.2, 0.7));
        let c = path_contribution(&engine, &chain).unwrap();
        let total = synthesize_target(std::slice::from_ref(&c)).unwrap();
        assert_eq!(total.value, c.value);
        assert_eq!(total.path, PathRef::Total);
    }

    #[test]
    fn opposite_contributions_cancel() {
        let g = grid();
        let c1 = Contribution {
            path: PathRef::Path(PathId::new(Mount::Rh, Direction::X)),
            order: 2.0,
            rpm_grid: g.clone(),
            value: vec![Complex64::new(1.0, 2.0); g.len()],
            valid: vec![true; g.len()],
        };
        let mut c2 = c1.clone();
        c2.path = PathRef::Path(PathId::new(Mount::Lh, Direction::X));
        c2.value = c2.value.iter().map(|v| -v).collect();
        let total = synthesize_target(&[c1, c2]).unwrap();
        assert!(total.value.iter().all(|v| v.norm() == 0.0));
        assert!(total.valid.iter().all(|&v| v));
    }

    #[test]
    fn strict_and_lenient_masking() {
        let g = grid();
        let mut c1 = Contribution {
            path: PathRef::Path(PathId::new(Mount::Rh, Direction::X)),
            order: 2.0,
            rpm_grid: g.clone(),
            value: vec![one(); g.len()],
            valid: vec![true; g.len()],
        };
        let c2 = c1.clone();
        c1.valid[3] = false;
        let strict = synthesize_target(&[c1.clone(), c2.clone()]).unwrap();
        assert!(!strict.valid[3]);
        let lenient = synthesize_target_with(&[c1, c2], MaskMode::Lenient).unwrap();
        assert!(lenient.valid[3]);
        assert_eq!(lenient.value[3], one()); // the invalid summand counted as 0
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = grid();
        let c1 = Contribution {
            path: PathRef::Path(PathId::new(Mount::Rh, Direction::X)),
            order: 2.0,
            rpm_grid: g.clone(),
            value: vec![one(); g.len()],
            valid: vec![true; g.len()],
        };
        let mut c2 = c1.clone();
        c2.rpm_grid[0] += 10.0;
        assert!(matches!(
            synthesize_target(&[c1, c2]),
            Err(Error::IncompatibleGrids(_))
        ));
    }

    #[test]
    fn overall_level_single_sine() {
        let g = grid();
        let total = Contribution {
            path: PathRef::Total,
            order: 2.0,
            rpm_grid: g.clone(),
            value: vec![one(); g.len()],
            valid: vec![true; g.len()],
        };
        let level = overall_level(&[total], 1500.0).unwrap();
        assert!((level - 0.707_106_781_186_547_5).abs() < 1e-12);
    }

    #[test]
    fn overall_level_pythagorean() {
        let g = grid();
        let make = |order: f64, amp: f64| Contribution {
            path: PathRef::Total,
            order,
            rpm_grid: g.clone(),
            value: vec![Complex64::new(amp, 0.0); g.len()],
            valid: vec![true; g.len()],
        };
        let level = overall_level(&[make(2.0, 3.0), make(4.0, 4.0)], 1200.0).unwrap();
        assert!((level - 5.0 / 2.0_f64.sqrt()).abs() < 1e-12, "{level}");
    }

    #[test]
    fn unit_transmissibility_times_mass_is_mass() {
        let g = grid();
        let mass = 8.5;
        let t = const_transmissibility(2.0, &g, Mount::Rh, Direction::X, one());
        let m = const_frf(0.0, 5.0, 200, Complex64::new(mass, 0.0), "kg");
        let k = dynamic_stiffness(&t, &m, StiffnessScaling::Product).unwrap();
        for bin in 0..k.len() {
            assert!(k.is_valid(bin));
            assert!((k.values[bin].norm() - mass).abs() < 1e-12);
            let f = order_frequency(2.0, g[bin]);
            assert!((k.freqs[bin] - f).abs() < 1e-9);
        }
        let kw = dynamic_stiffness(&t, &m, StiffnessScaling::OmegaSquared).unwrap();
        let w0 = 2.0 * std::f64::consts::PI * kw.freqs[0];
        assert!((kw.values[0].norm() - mass * w0 * w0).abs() < 1e-9);
    }

    #[test]
    fn all_invalid_transmissibility_is_empty_result() {
        let g = grid();
        let mut t = const_transmissibility(2.0, &g, Mount::Rh, Direction::X, one());
        t.valid.iter_mut().for_each(|v| *v = false);
        let m = const_frf(0.0, 5.0, 200, one(), "kg");
        assert!(matches!(
            dynamic_stiffness(&t, &m, StiffnessScaling::Product),
            Err(Error::EmptyResult(_))
        ));
    }

    fn contribution_for(path: PathId, g: &[f64], amp: Complex64) -> Contribution {
        Contribution {
            path: PathRef::Path(path),
            order: 2.0,
            rpm_grid: g.to_vec(),
            value: vec![amp; g.len()],
            valid: vec![true; g.len()],
        }
    }

    #[test]
    fn single_live_path_takes_full_share() {
        let g = grid();
        let mut contribs = Vec::new();
        for path in build_paths(&Mount::ALL).unwrap() {
            let amp = if path == PathId::new(Mount::Lh, Direction::Y) {
                Complex64::new(2.0, 0.0)
            } else {
                Complex64::default()
            };
            contribs.push(contribution_for(path, &g, amp));
        }
        let table = rank_paths(&contribs, (1000.0, 2000.0), GroupBy::Path).unwrap();
        assert_eq!(table.entries[0].label, "LH:Y");
        assert!((table.entries[0].share - 1.0).abs() < 1e-12);
        let by_mount = rank_paths(&contribs, (1000.0, 2000.0), GroupBy::Mount).unwrap();
        assert_eq!(by_mount.entries[0].label, "LH");
        assert_eq!(by_mount.entries.len(), 3);
    }

    #[test]
    fn ranking_invariant_under_common_scaling() {
        let g = grid();
        let paths = build_paths(&Mount::ALL).unwrap();
        let contribs: Vec<Contribution> = paths
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                contribution_for(p, &g, Complex64::new(0.1 + i as f64 * 0.05, 0.02 * i as f64))
            })
            .collect();
        let scaled: Vec<Contribution> = contribs
            .iter()
            .map(|c| {
                let mut s = c.clone();
                s.value = s.value.iter().map(|v| v.scale(2.0)).collect();
                s
            })
            .collect();
        let t1 = rank_paths(&contribs, (1000.0, 2000.0), GroupBy::Path).unwrap();
        let t2 = rank_paths(&scaled, (1000.0, 2000.0), GroupBy::Path).unwrap();
        for (a, b) in t1.entries.iter().zip(&t2.entries) {
            assert_eq!(a.label, b.label);
            assert!((a.share - b.share).abs() < 1e-12);
        }
        let sum: f64 = t1.entries.iter().map(|e| e.share).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_rpm_range_rejected() {
        let g = grid();
        let c = contribution_for(PathId::new(Mount::Rh, Direction::X), &g, one());
        assert!(matches!(
            rank_paths(&[c.clone()], (3000.0, 4000.0), GroupBy::Path),
            Err(Error::InvalidConfiguration(_))
        ));
        assert!(matches!(
            rank_paths(&[c], (2000.0, 1000.0), GroupBy::Path),
            Err(Error::InvalidConfiguration(_))
        ));
    }
}
