//! Datasets: groups of recorded channels, the JSON manifest that
//! describes them on disk, and CSV channel storage.
//!
//! On disk a dataset is one `manifest.json` plus CSV files. Channel CSVs
//! carry a header row, `time_s` as the first column and one column per
//! channel; floats are written with 17 significant digits so values
//! round-trip exactly.

use crate::error::{Error, Result};
use crate::signal::{ChannelRole, Direction, Mount, TachoKind, TimeSeries};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// What kind of test a recording captures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordingKind {
    Runup,
    Impact,
}

/// One test run: a named set of simultaneously recorded channels.
#[derive(Debug, Clone)]
pub struct Recording {
    pub name: String,
    pub kind: RecordingKind,
    pub channels: Vec<TimeSeries>,
    pub metadata: BTreeMap<String, String>,
}

impl Recording {
    pub fn find(&self, role: ChannelRole, mount: Mount, direction: Direction) -> Option<&TimeSeries> {
        self.channels
            .iter()
            .find(|c| c.role == role && c.mount == Some(mount) && c.direction == Some(direction))
    }

    pub fn find_role(&self, role: ChannelRole) -> Option<&TimeSeries> {
        self.channels.iter().find(|c| c.role == role)
    }
}

/// An immutable set of recordings sharing one sample rate.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sample_rate: f64,
    pub recordings: Vec<Recording>,
}

impl Dataset {
    /// The single run-up recording of the dataset.
    pub fn runup(&self) -> Result<&Recording> {
        let mut it = self
            .recordings
            .iter()
            .filter(|r| r.kind == RecordingKind::Runup);
        let first = it.next().ok_or_else(|| {
            Error::MissingInput("dataset holds no run-up recording".into())
        })?;
        if it.next().is_some() {
            return Err(Error::InvalidConfiguration(
                "dataset holds more than one run-up recording".into(),
            ));
        }
        Ok(first)
    }

    /// The impact recording containing the hammer channel for one path.
    pub fn impact(&self, mount: Mount, direction: Direction) -> Result<&Recording> {
        self.recordings
            .iter()
            .filter(|r| r.kind == RecordingKind::Impact)
            .find(|r| r.find(ChannelRole::HammerForce, mount, direction).is_some())
            .ok_or_else(|| {
                Error::MissingInput(format!(
                    "no impact recording with a {mount}:{direction} hammer channel"
                ))
            })
    }

    /// Mounts that appear on engine-side channels of the run-up, in
    /// fixed RH, LH, REAR order.
    pub fn mounts(&self) -> Result<Vec<Mount>> {
        let runup = self.runup()?;
        Ok(Mount::ALL
            .into_iter()
            .filter(|&m| {
                runup
                    .channels
                    .iter()
                    .any(|c| c.role == ChannelRole::EngineSide && c.mount == Some(m))
            })
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Manifest schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestChannel {
    pub id: String,
    pub role: ChannelRole,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mount: Option<Mount>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    pub unit: String,
    pub file: String,
    pub column: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tacho: Option<TachoKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecording {
    pub name: String,
    pub kind: RecordingKind,
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

/// The dataset description stored as `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub sample_rate: f64,
    pub channels: Vec<ManifestChannel>,
    pub recordings: Vec<ManifestRecording>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::SchemaViolation(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if self.channels[..i].iter().any(|c| c.id == ch.id) {
                return Err(Error::DuplicateChannelId(ch.id.clone()));
            }
            if matches!(ch.role, ChannelRole::EngineSide | ChannelRole::BodySide)
                && (ch.mount.is_none() || ch.direction.is_none())
            {
                return Err(Error::SchemaViolation(format!(
                    "channel {:?}: role {} requires mount and direction",
                    ch.id, ch.role
                )));
            }
            if let Some(expected) = ch.role.expected_unit() {
                if !expected.contains(&ch.unit.as_str()) {
                    return Err(Error::UnitMismatch {
                        channel: ch.id.clone(),
                        role: ch.role.to_string(),
                        got: ch.unit.clone(),
                        expected: expected.join(" or "),
                    });
                }
            }
        }
        for rec in &self.recordings {
            for file in &rec.files {
                if !self.channels.iter().any(|c| &c.file == file) {
                    return Err(Error::SchemaViolation(format!(
                        "recording {:?} references file {:?} that no channel uses",
                        rec.name, file
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Parse a manifest and load every channel it references.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|_| Error::MissingFile(manifest_path.to_path_buf()))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    manifest.validate()?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    load_dataset_from(&manifest, base)
}

fn load_dataset_from(manifest: &Manifest, base: &Path) -> Result<Dataset> {
    // Parse each referenced CSV once.
    let mut files: BTreeMap<String, CsvColumns> = BTreeMap::new();
    for ch in &manifest.channels {
        if !files.contains_key(&ch.file) {
            let path = base.join(&ch.file);
            if !path.is_file() {
                return Err(Error::MissingFile(path));
            }
            files.insert(ch.file.clone(), read_csv_columns(&path)?);
        }
    }

    let mut recordings = Vec::new();
    for rec in &manifest.recordings {
        let mut channels = Vec::new();
        for ch in manifest.channels.iter().filter(|c| rec.files.contains(&c.file)) {
            let table = &files[&ch.file];
            let samples = table.column(&ch.file, &ch.column)?.to_vec();
            check_time_column(&ch.file, table, manifest.sample_rate)?;
            let mut ts = TimeSeries::new(
                samples,
                manifest.sample_rate,
                ch.id.clone(),
                ch.role,
                ch.mount,
                ch.direction,
                ch.unit.clone(),
            )?;
            ts.tacho_kind = ch.tacho;
            channels.push(ts);
        }
        if channels.is_empty() {
            return Err(Error::SchemaViolation(format!(
                "recording {:?} has no channels",
                rec.name
            )));
        }
        recordings.push(Recording {
            name: rec.name.clone(),
            kind: rec.kind,
            channels,
            metadata: rec.metadata.clone(),
        });
    }
    Ok(Dataset {
        sample_rate: manifest.sample_rate,
        recordings,
    })
}

struct CsvColumns {
    headers: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl CsvColumns {
    fn column(&self, file: &str, name: &str) -> Result<&[f64]> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::BadColumn {
                file: file.to_string(),
                column: name.to_string(),
            })?;
        Ok(&self.columns[idx])
    }
}

fn read_csv_columns(path: &Path) -> Result<CsvColumns> {
    let file_name = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            file: file_name.clone(),
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            file: file_name.clone(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                file: file_name.clone(),
                message: format!(
                    "row {} has {} fields, header has {}",
                    row_idx + 2,
                    record.len(),
                    headers.len()
                ),
            });
        }
        for (i, field) in record.iter().enumerate() {
            let value = field.parse::<f64>().map_err(|_| Error::Parse {
                file: file_name.clone(),
                message: format!("row {}, column {:?}: bad float {field:?}", row_idx + 2, headers[i]),
            })?;
            columns[i].push(value);
        }
    }
    Ok(CsvColumns { headers, columns })
}

fn check_time_column(file: &str, table: &CsvColumns, sample_rate: f64) -> Result<()> {
    let time = table.column(file, "time_s")?;
    if time.len() >= 2 {
        let dt = 1.0 / sample_rate;
        for (i, pair) in time.windows(2).enumerate().take(64) {
            if ((pair[1] - pair[0]) - dt).abs() > 1e-6 * dt.max(1e-12) {
                return Err(Error::Parse {
                    file: file.to_string(),
                    message: format!(
                        "time_s step {} at row {} does not match sample rate {sample_rate}",
                        pair[1] - pair[0],
                        i + 2
                    ),
                });
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Writing
// ---------------------------------------------------------------------------

/// 17 significant digits: every f64 round-trips exactly.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Write a dataset as `manifest.json` plus one CSV per recording into
/// `dir`. Returns the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let mut channels = Vec::new();
    let mut recordings = Vec::new();
    for rec in &dataset.recordings {
        let file = format!("{}.csv", rec.name);
        write_recording_csv(rec, &dir.join(&file), dataset.sample_rate)?;
        for ch in &rec.channels {
            channels.push(ManifestChannel {
                id: ch.channel_id.clone(),
                role: ch.role,
                mount: ch.mount,
                direction: ch.direction,
                unit: ch.unit.clone(),
                file: file.clone(),
                column: ch.channel_id.clone(),
                tacho: ch.tacho_kind,
            });
        }
        recordings.push(ManifestRecording {
            name: rec.name.clone(),
            kind: rec.kind,
            files: vec![file],
            metadata: rec.metadata.clone(),
        });
    }
    let manifest = Manifest {
        sample_rate: dataset.sample_rate,
        channels,
        recordings,
    };
    manifest.validate()?;
    let path = dir.join("manifest.json");
    let mut out = serde_json::to_string_pretty(&manifest)?;
    out.push('\n');
    std::fs::write(&path, out)?;
    Ok(path)
}

fn write_recording_csv(rec: &Recording, path: &Path, sample_rate: f64) -> Result<()> {
    let n = rec
        .channels
        .iter()
        .map(|c| c.samples.len())
        .max()
        .unwrap_or(0);
    for c in &rec.channels {
        if c.samples.len() != n {
            return Err(Error::IncompatibleChannels(format!(
                "recording {:?}: channel lengths differ ({} vs {n})",
                rec.name,
                c.samples.len()
            )));
        }
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write!(w, "time_s")?;
    for c in &rec.channels {
        write!(w, ",{}", c.channel_id)?;
    }
    writeln!(w)?;
    for i in 0..n {
        write!(w, "{}", fmt_f64(i as f64 / sample_rate))?;
        for c in &rec.channels {
            write!(w, ",{}", fmt_f64(c.samples[i]))?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_dataset() -> Dataset {
        let rate = 64.0;
        let eng = TimeSeries::new(
            (0..64).map(|i| (i as f64 * 0.1).sin()).collect(),
            rate,
            "eng_RH_X",
            ChannelRole::EngineSide,
            Some(Mount::Rh),
            Some(Direction::X),
            "m/s^2",
        )
        .unwrap();
        let tacho = TimeSeries::new(
            vec![3000.0; 64],
            rate,
            "tacho",
            ChannelRole::Tacho,
            None,
            None,
            "rpm",
        )
        .unwrap()
        .with_tacho_kind(TachoKind::RpmTrace);
        Dataset {
            sample_rate: rate,
            recordings: vec![Recording {
                name: "runup".into(),
                kind: RecordingKind::Runup,
                channels: vec![eng, tacho],
                metadata: BTreeMap::from([("gear".to_string(), "3".to_string())]),
            }],
        }
    }

    #[test]
    fn dataset_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let ds = tiny_dataset();
        let manifest = write_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(&manifest).unwrap();
        assert_eq!(loaded.recordings.len(), 1);
        let rec = &loaded.recordings[0];
        assert_eq!(rec.metadata["gear"], "3");
        for (a, b) in rec.channels.iter().zip(&ds.recordings[0].channels) {
            assert_eq!(a.samples, b.samples, "channel {}", a.channel_id);
            assert_eq!(a.role, b.role);
            assert_eq!(a.tacho_kind, b.tacho_kind);
        }
    }

    #[test]
    fn write_is_deterministic() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let ds = tiny_dataset();
        write_dataset(&ds, d1.path()).unwrap();
        write_dataset(&ds, d2.path()).unwrap();
        for name in ["manifest.json", "runup.csv"] {
            let a = std::fs::read(d1.path().join(name)).unwrap();
            let b = std::fs::read(d2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
        }
    }

    #[test]
    fn missing_file_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest {
            sample_rate: 64.0,
            channels: vec![ManifestChannel {
                id: "t".into(),
                role: ChannelRole::Target,
                mount: None,
                direction: None,
                unit: "m/s^2".into(),
                file: "absent.csv".into(),
                column: "t".into(),
                tacho: None,
            }],
            recordings: vec![ManifestRecording {
                name: "runup".into(),
                kind: RecordingKind::Runup,
                files: vec!["absent.csv".into()],
                metadata: BTreeMap::new(),
            }],
        };
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();
        match load_dataset(&path) {
            Err(Error::MissingFile(p)) => assert!(p.ends_with("absent.csv")),
            other => panic!("expected MissingFile, got {other:?}"),
        }
    }

    #[test]
    fn engine_channel_without_mount_is_schema_violation() {
        let manifest = Manifest {
            sample_rate: 64.0,
            channels: vec![ManifestChannel {
                id: "e".into(),
                role: ChannelRole::EngineSide,
                mount: None,
                direction: Some(Direction::X),
                unit: "m/s^2".into(),
                file: "runup.csv".into(),
                column: "e".into(),
                tacho: None,
            }],
            recordings: vec![],
        };
        assert!(matches!(
            manifest.validate(),
            Err(Error::SchemaViolation(_))
        ));
    }

    #[test]
    fn duplicate_ids_and_bad_units_rejected() {
        let ch = ManifestChannel {
            id: "a".into(),
            role: ChannelRole::Target,
            mount: None,
            direction: None,
            unit: "m/s^2".into(),
            file: "runup.csv".into(),
            column: "a".into(),
            tacho: None,
        };
        let manifest = Manifest {
            sample_rate: 64.0,
            channels: vec![ch.clone(), ch.clone()],
            recordings: vec![],
        };
        assert!(matches!(
            manifest.validate(),
            Err(Error::DuplicateChannelId(_))
        ));

        let mut bad_unit = ch;
        bad_unit.unit = "mm/s^2".into();
        let manifest = Manifest {
            sample_rate: 64.0,
            channels: vec![bad_unit],
            recordings: vec![],
        };
        assert!(matches!(manifest.validate(), Err(Error::UnitMismatch { .. })));
    }

    #[test]
    fn bad_column_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("runup.csv"), "time_s,x\n0.0,1.0\n").unwrap();
        let manifest = Manifest {
            sample_rate: 64.0,
            channels: vec![ManifestChannel {
                id: "t".into(),
                role: ChannelRole::Target,
                mount: None,
                direction: None,
                unit: "m/s^2".into(),
                file: "runup.csv".into(),
                column: "missing".into(),
                tacho: None,
            }],
            recordings: vec![ManifestRecording {
                name: "runup".into(),
                kind: RecordingKind::Runup,
                files: vec!["runup.csv".into()],
                metadata: BTreeMap::new(),
            }],
        };
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, serde_json::to_string(&manifest).unwrap()).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(Error::BadColumn { .. })
        ));
    }
}
