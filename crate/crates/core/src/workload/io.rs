//! Profile CSV files.
//!
//! One row per (app, configuration index) for batch apps and per
//! (app, index, load grid point) for latency-critical apps. Lines starting
//! with `#` are comments. An optional trailing `training` column (0/1) marks
//! rows of the offline training database.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use super::{AppKind, AppProfile, LatencySurface};
use crate::config_space::Space;
use crate::error::{Error, Result};

const COLUMNS: [&str; 7] = ["app_id", "kind", "config_index", "bips", "watts", "latency_ms", "load"];

/// Written next to a profile file as `<stem>.summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub app_count: usize,
    pub space_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedProfiles {
    pub profiles: Vec<AppProfile>,
    /// Per profile: whether its rows carried `training=1`.
    pub training: Vec<bool>,
    /// Ids of apps whose data break the monotonicity invariants.
    pub non_monotone: Vec<String>,
}

pub fn save_profiles(profiles: &[AppProfile], space: &Space, path: &Path, header: Option<&str>) -> Result<ProfileSummary> {
    write(profiles, space, path, header, None)
}

/// Saves a training database: every row is flagged `training=1`.
pub fn save_training_db(profiles: &[AppProfile], space: &Space, path: &Path, header: Option<&str>) -> Result<ProfileSummary> {
    write(profiles, space, path, header, Some(true))
}

fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.json"))
}

fn write(profiles: &[AppProfile], space: &Space, path: &Path, header: Option<&str>, training: Option<bool>) -> Result<ProfileSummary> {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(out, "# {line}").expect("string write");
        }
    }
    out.push_str(&COLUMNS.join(","));
    if training.is_some() {
        out.push_str(",training");
    }
    out.push('\n');
    let flag = match training {
        Some(true) => ",1",
        Some(false) => ",0",
        None => "",
    };
    for app in profiles {
        app.validate(space)?;
        if app.id.contains([',', '"', '\n']) || app.id.starts_with('#') {
            return Err(Error::domain(format!("app id {:?} cannot be written to CSV", app.id)));
        }
        for i in 0..space.len() {
            let (bips, watts) = (app.bips(i), app.watts(space, i));
            match &app.latency {
                None => writeln!(out, "{},batch,{i},{bips},{watts},,{flag}", app.id),
                Some(lat) => lat.loads().iter().enumerate().try_for_each(|(l, load)| {
                    writeln!(
                        out,
                        "{},latency_critical,{i},{bips},{watts},{},{load}{flag}",
                        app.id,
                        lat.grid_value(i, l)
                    )
                }),
            }
            .expect("string write");
        }
    }
    fs::write(path, out)?;
    let summary = ProfileSummary {
        app_count: profiles.len(),
        space_hash: space.hash(),
    };
    fs::write(summary_path(path), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}

struct Pending {
    kind: AppKind,
    training: bool,
    bips: Vec<Option<f64>>,
    watts: Vec<Option<f64>>,
    /// (index, load, latency)
    latency: Vec<(usize, f64, f64)>,
    first_line: usize,
}

pub fn load_profiles(path: &Path, space: &Space) -> Result<LoadedProfiles> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let header_line = headers.position().map(|p| p.line() as usize).unwrap_or(1);
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = col(name).ok_or_else(|| Error::parse(header_line.max(1), format!("missing column `{name}`")))?;
    }
    let training_col = col("training");

    let mut order: Vec<String> = Vec::new();
    let mut apps: HashMap<String, Pending> = HashMap::new();
    let n = space.len();
    let m = space.core_count();

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            let v: f64 = field(k)
                .parse()
                .map_err(|_| Error::parse(line, format!("`{}` is not a number: {:?}", COLUMNS[k], field(k))))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::parse(line, format!("`{}` must be finite and non-negative", COLUMNS[k])));
            }
            Ok(v)
        };
        let id = field(0).to_string();
        if id.is_empty() {
            return Err(Error::parse(line, "empty app_id"));
        }
        let kind = AppKind::parse(field(1)).ok_or_else(|| Error::parse(line, format!("unknown kind {:?}", field(1))))?;
        let index: usize = field(2)
            .parse()
            .map_err(|_| Error::parse(line, format!("bad config_index {:?}", field(2))))?;
        if index >= n {
            return Err(Error::parse(line, format!("config_index {index} outside 0..{n}")));
        }
        let (bips, watts) = (num(3)?, num(4)?);
        let training = match training_col.map(|c| record.get(c).unwrap_or("")) {
            None | Some("") | Some("0") => false,
            Some("1") => true,
            Some(other) => return Err(Error::parse(line, format!("bad training flag {other:?}"))),
        };

        let entry = apps.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Pending {
                kind,
                training,
                bips: vec![None; n],
                watts: vec![None; m],
                latency: Vec::new(),
                first_line: line,
            }
        });
        if entry.kind != kind {
            return Err(Error::parse(line, format!("app {id} changes kind")));
        }
        let repeat_ok = kind == AppKind::LatencyCritical;
        match entry.bips[index] {
            Some(b) if !(repeat_ok && b == bips) => return Err(Error::parse(line, format!("duplicate row for app {id} index {index}"))),
            _ => entry.bips[index] = Some(bips),
        }
        let j = space.core_of(index);
        match entry.watts[j] {
            Some(w) if w != watts => {
                return Err(Error::parse(
                    line,
                    format!("app {id}: power differs across cache options of core config {j}"),
                ))
            }
            _ => entry.watts[j] = Some(watts),
        }
        match kind {
            AppKind::Batch => {
                if !field(5).is_empty() || !field(6).is_empty() {
                    return Err(Error::parse(line, "batch rows must leave latency_ms and load empty"));
                }
            }
            AppKind::LatencyCritical => entry.latency.push((index, num(6)?, num(5)?)),
        }
    }

    let mut out = LoadedProfiles {
        profiles: Vec::with_capacity(order.len()),
        training: Vec::with_capacity(order.len()),
        non_monotone: Vec::new(),
    };
    for id in order {
        let p = apps.remove(&id).expect("recorded");
        let line = p.first_line;
        let throughput: Vec<f64> = p
            .bips
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::parse(line, format!("app {id} has no row for index {i}"))))
            .collect::<Result<_>>()?;
        let power: Vec<f64> = p.watts.into_iter().map(|v| v.expect("every core covered")).collect();
        let latency = match p.kind {
            AppKind::Batch => None,
            AppKind::LatencyCritical => Some(assemble_latency(&id, line, n, p.latency)?),
        };
        let profile = AppProfile {
            id,
            kind: p.kind,
            throughput,
            power,
            latency,
        };
        if !profile.monotonicity_violations(space).is_empty() {
            warn!("app {} violates monotonicity; accepted as is", profile.id);
            out.non_monotone.push(profile.id.clone());
        }
        out.profiles.push(profile);
        out.training.push(p.training);
    }
    Ok(out)
}

fn assemble_latency(id: &str, line: usize, n: usize, mut rows: Vec<(usize, f64, f64)>) -> Result<LatencySurface> {
    let mut loads: Vec<f64> = rows.iter().filter(|r| r.0 == 0).map(|r| r.1).collect();
    loads.sort_by(f64::total_cmp);
    if loads.is_empty() || loads.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::parse(line, format!("app {id}: malformed load grid")));
    }
    if rows.len() != n * loads.len() {
        return Err(Error::parse(
            line,
            format!("app {id}: expected {} latency rows, found {}", n * loads.len(), rows.len()),
        ));
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut values = Vec::with_capacity(rows.len());
    for (r, (index, load, lat)) in rows.into_iter().enumerate() {
        if index != r / loads.len() || load != loads[r % loads.len()] {
            return Err(Error::parse(line, format!("app {id}: load grid differs at index {index}")));
        }
        values.push(lat);
    }
    LatencySurface::new(loads, values).map_err(|e| Error::parse(line, e.to_string()))
}
