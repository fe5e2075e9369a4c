//! Forecast scenarios and realizations as per-step scaling factors.
//!
//! Every profile multiplies a nominal quantity: PV factors scale the plant
//! capacities, load factors scale the nominal bus demand.
//!
//! Profile CSV files have a `time,value` header. `time` is either a step
//! index (cadence then comes from the manifest) or an ISO-8601 timestamp
//! (cadence inferred from consecutive stamps).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const RT_STEP_MINUTES: u32 = 15;
pub const MINUTES_PER_DAY: u32 = 24 * 60;
pub const DEFAULT_CLOUDINESS: f64 = 0.6;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{what}: expected {expected} steps, found {found}")]
    Ragged {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{what}: negative or non-finite factor {value} at step {step}")]
    InvalidFactor { what: String, step: usize, value: f64 },
    #[error("cannot resample from {from} to {to} minutes")]
    Cadence { from: u32, to: u32 },
    #[error("{0}")]
    Empty(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// One PV / active load / reactive load triple on a common time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub pv: Vec<f64>,
    pub load_p: Vec<f64>,
    pub load_q: Vec<f64>,
}

impl Profile {
    pub fn len(&self) -> usize {
        self.pv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pv.is_empty()
    }

    fn validate(&self, what: &str) -> Result<(), ScenarioError> {
        let n = self.pv.len();
        for (name, v) in [("pv", &self.pv), ("load_p", &self.load_p), ("load_q", &self.load_q)] {
            let label = format!("{what} {name}");
            if v.len() != n {
                return Err(ScenarioError::Ragged {
                    what: label,
                    expected: n,
                    found: v.len(),
                });
            }
            check_factors(&label, v)?;
        }
        Ok(())
    }

    pub fn resample(&self, from: u32, to: u32) -> Result<Profile, ScenarioError> {
        Ok(Profile {
            pv: resample(&self.pv, from, to)?,
            load_p: resample(&self.load_p, from, to)?,
            load_q: resample(&self.load_q, from, to)?,
        })
    }
}

fn check_factors(what: &str, v: &[f64]) -> Result<(), ScenarioError> {
    match v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
        Some(step) => Err(ScenarioError::InvalidFactor {
            what: what.to_string(),
            step,
            value: v[step],
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    /// Day-ahead forecast scenarios.
    pub scenarios: Vec<Profile>,
    /// Cadence of the scenarios, minutes.
    pub timestep_minutes: u32,
    /// What actually happens, at the real-time cadence.
    pub realization: Profile,
    pub realization_timestep_minutes: u32,
}

impl ScenarioSet {
    pub fn new(
        scenarios: Vec<Profile>,
        timestep_minutes: u32,
        realization: Profile,
        realization_timestep_minutes: u32,
    ) -> Result<Self, ScenarioError> {
        let set = Self {
            scenarios,
            timestep_minutes,
            realization,
            realization_timestep_minutes,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let first = self
            .scenarios
            .first()
            .ok_or_else(|| ScenarioError::Empty("no forecast scenarios".into()))?;
        for (i, s) in self.scenarios.iter().enumerate() {
            s.validate(&format!("scenario {}", i + 1))?;
            if s.len() != first.len() {
                return Err(ScenarioError::Ragged {
                    what: format!("scenario {}", i + 1),
                    expected: first.len(),
                    found: s.len(),
                });
            }
        }
        self.realization.validate("realization")?;
        for (what, len, cadence) in [
            ("scenarios", first.len(), self.timestep_minutes),
            ("realization", self.realization.len(), self.realization_timestep_minutes),
        ] {
            if cadence == 0 || len as u64 * cadence as u64 != MINUTES_PER_DAY as u64 {
                return Err(ScenarioError::Ragged {
                    what: format!("{what} at {cadence} min do not span one day"),
                    expected: if cadence == 0 { 0 } else { (MINUTES_PER_DAY / cadence) as usize },
                    found: len,
                });
            }
        }
        // Both grids must nest so that resampling is interval averaging.
        resample(&self.realization.pv, self.realization_timestep_minutes, self.timestep_minutes)?;
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.scenarios[0].len()
    }

    /// Realization averaged onto the day-ahead grid.
    pub fn realization_day_ahead(&self) -> Result<Profile, ScenarioError> {
        self.realization
            .resample(self.realization_timestep_minutes, self.timestep_minutes)
    }

    /// Pointwise mean of the scenarios, on the day-ahead grid.
    pub fn mean_scenario(&self) -> Profile {
        let k = self.scenarios.len() as f64;
        let mean = |f: fn(&Profile) -> &Vec<f64>| -> Vec<f64> {
            (0..self.horizon())
                .map(|t| self.scenarios.iter().map(|s| f(s)[t]).sum::<f64>() / k)
                .collect()
        };
        Profile {
            pv: mean(|s| &s.pv),
            load_p: mean(|s| &s.load_p),
            load_q: mean(|s| &s.load_q),
        }
    }
}

/// Interval-averages (coarser target) or repeats (finer target) a series.
/// The cadences must be integer multiples of each other.
pub fn resample(values: &[f64], from: u32, to: u32) -> Result<Vec<f64>, ScenarioError> {
    if from == 0 || to == 0 {
        return Err(ScenarioError::Cadence { from, to });
    }
    if from == to {
        Ok(values.to_vec())
    } else if to > from && to % from == 0 {
        let k = (to / from) as usize;
        if values.len() % k != 0 {
            return Err(ScenarioError::Cadence { from, to });
        }
        Ok(values
            .chunks(k)
            .map(|c| c.iter().sum::<f64>() / k as f64)
            .collect())
    } else if from > to && from % to == 0 {
        let k = (from / to) as usize;
        Ok(values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, k))
            .collect())
    } else {
        Err(ScenarioError::Cadence { from, to })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub values: Vec<f64>,
    /// Inferred from timestamps; `None` for step-indexed files.
    pub timestep_minutes: Option<u32>,
}

#[derive(Debug, Deserialize)]
struct SeriesRow {
    time: String,
    value: f64,
}

fn parse_stamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

/// Reads one `time,value` profile. `path` only labels errors.
pub fn read_series<R: Read>(input: R, path: &str) -> Result<Series, ScenarioError> {
    let err = |line: usize, message: String| ScenarioError::Parse {
        path: path.to_string(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time", "value"] {
        return Err(err(1, "expected header `time,value`".into()));
    }
    let mut values = Vec::new();
    let mut stamps = Vec::new();
    let mut indexed = None;
    for (i, row) in reader.deserialize::<SeriesRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| err(line, e.to_string()))?;
        let is_index = row.time.parse::<usize>().is_ok();
        if *indexed.get_or_insert(is_index) != is_index {
            return Err(err(line, "mixed step indices and timestamps".into()));
        }
        if is_index {
            if row.time.parse::<usize>().unwrap() != values.len() {
                return Err(err(line, format!("expected step {}", values.len())));
            }
        } else {
            let t = parse_stamp(&row.time)
                .ok_or_else(|| err(line, format!("bad timestamp `{}`", row.time)))?;
            stamps.push(t);
        }
        values.push(row.value);
    }
    check_factors(path, &values)?;
    let timestep_minutes = if stamps.len() >= 2 {
        let step = stamps[1] - stamps[0];
        for (i, w) in stamps.windows(2).enumerate() {
            if w[1] - w[0] != step {
                return Err(err(i + 3, "inconsistent cadence".into()));
            }
        }
        let minutes = step.num_minutes();
        if minutes <= 0 || step.num_seconds() % 60 != 0 {
            return Err(err(3, "cadence must be a positive whole number of minutes".into()));
        }
        Some(minutes as u32)
    } else {
        None
    };
    Ok(Series {
        values,
        timestep_minutes,
    })
}

pub fn write_series<W: Write>(out: W, values: &[f64]) -> Result<(), ScenarioError> {
    let io = |e: csv::Error| ScenarioError::Io {
        path: "<profile>".into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "value"]).map_err(io)?;
    for (t, v) in values.iter().enumerate() {
        w.write_record([t.to_string(), format!("{v:?}")]).map_err(io)?;
    }
    w.flush().map_err(|e| ScenarioError::Io {
        path: "<profile>".into(),
        message: e.to_string(),
    })
}

/// Files of one profile triple. A missing reactive file reuses the active one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFileSet {
    pub pv: PathBuf,
    pub load_p: PathBuf,
    #[serde(default)]
    pub load_q: Option<PathBuf>,
}

/// Manifest of a scenario directory, paths relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFiles {
    /// Cadence of step-indexed scenario files.
    #[serde(default)]
    pub timestep_minutes: Option<u32>,
    /// Cadence of step-indexed realization files.
    #[serde(default)]
    pub realization_timestep_minutes: Option<u32>,
    pub scenarios: Vec<ProfileFileSet>,
    pub realization: ProfileFileSet,
}

fn read_file(path: &Path) -> Result<Series, ScenarioError> {
    let label = path.display().to_string();
    let f = fs::File::open(path).map_err(|e| ScenarioError::Io {
        path: label.clone(),
        message: e.to_string(),
    })?;
    read_series(f, &label)
}

fn read_triple(
    files: &ProfileFileSet,
    base: &Path,
    declared: Option<u32>,
) -> Result<(Profile, u32), ScenarioError> {
    let pv = read_file(&base.join(&files.pv))?;
    let lp = read_file(&base.join(&files.load_p))?;
    let lq = match &files.load_q {
        Some(q) => read_file(&base.join(q))?,
        None => lp.clone(),
    };
    let mut cadence = declared;
    for s in [&pv, &lp, &lq] {
        if let Some(c) = s.timestep_minutes {
            match cadence {
                Some(d) if d != c => return Err(ScenarioError::Cadence { from: c, to: d }),
                _ => cadence = Some(c),
            }
        }
    }
    let cadence = cadence.or_else(|| Some(MINUTES_PER_DAY / pv.values.len().max(1) as u32));
    Ok((
        Profile {
            pv: pv.values,
            load_p: lp.values,
            load_q: lq.values,
        },
        cadence.unwrap(),
    ))
}

/// Loads and validates the scenario set described by `files`.
pub fn load_profiles(files: &ProfileFiles, base: &Path) -> Result<ScenarioSet, ScenarioError> {
    if files.scenarios.is_empty() {
        return Err(ScenarioError::Empty("manifest lists no scenarios".into()));
    }
    let mut scenarios = Vec::new();
    let mut cadence = files.timestep_minutes;
    for s in &files.scenarios {
        let (p, c) = read_triple(s, base, cadence)?;
        cadence = Some(c);
        scenarios.push(p);
    }
    let (realization, rc) = read_triple(&files.realization, base, files.realization_timestep_minutes)?;
    ScenarioSet::new(scenarios, cadence.unwrap(), realization, rc)
}

/// Reads a `profiles.toml` manifest and its files.
pub fn load_profile_manifest(path: &Path) -> Result<ScenarioSet, ScenarioError> {
    let label = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: label.clone(),
        message: e.to_string(),
    })?;
    let files: ProfileFiles = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: label,
        line: 0,
        message: e.to_string(),
    })?;
    load_profiles(&files, path.parent().unwrap_or_else(|| Path::new(".")))
}

/// Writes `set` as CSV files plus a `profiles.toml` manifest in `dir`.
pub fn write_profiles(set: &ScenarioSet, dir: &Path) -> Result<PathBuf, ScenarioError> {
    let io = |p: &Path, e: std::io::Error| ScenarioError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let write_triple = |p: &Profile, stem: &str| -> Result<ProfileFileSet, ScenarioError> {
        let mut names = Vec::new();
        for (kind, values) in [("pv", &p.pv), ("load_p", &p.load_p), ("load_q", &p.load_q)] {
            let name = PathBuf::from(format!("{stem}_{kind}.csv"));
            let path = dir.join(&name);
            let f = fs::File::create(&path).map_err(|e| io(&path, e))?;
            write_series(f, values)?;
            names.push(name);
        }
        Ok(ProfileFileSet {
            pv: names[0].clone(),
            load_p: names[1].clone(),
            load_q: Some(names[2].clone()),
        })
    };
    let mut scenarios = Vec::new();
    for (i, s) in set.scenarios.iter().enumerate() {
        scenarios.push(write_triple(s, &format!("scenario{}", i + 1))?);
    }
    let manifest = ProfileFiles {
        timestep_minutes: Some(set.timestep_minutes),
        realization_timestep_minutes: Some(set.realization_timestep_minutes),
        scenarios,
        realization: write_triple(&set.realization, "realization")?,
    };
    let path = dir.join("profiles.toml");
    let text = toml::to_string(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(path)
}

/// Crosses the extremes: the least-energy PV with the most-energy load,
/// and the most-energy PV with the least-energy load. Ties go to the
/// lowest index.
pub fn pair_extremes(
    pv: &[Vec<f64>],
    loads: &[(Vec<f64>, Vec<f64>)],
) -> Result<Vec<Profile>, ScenarioError> {
    if pv.is_empty() || loads.is_empty() {
        return Err(ScenarioError::Empty("no candidate profiles to pair".into()));
    }
    let energy = |v: &[f64]| v.iter().sum::<f64>();
    let pick = |scores: Vec<f64>, larger: bool| {
        let mut best = 0;
        for (i, &s) in scores.iter().enumerate() {
            if (larger && s > scores[best]) || (!larger && s < scores[best]) {
                best = i;
            }
        }
        best
    };
    let pv_e: Vec<f64> = pv.iter().map(|v| energy(v)).collect();
    let load_e: Vec<f64> = loads.iter().map(|(p, _)| energy(p)).collect();
    let (pv_lo, pv_hi) = (pick(pv_e.clone(), false), pick(pv_e, true));
    let (ld_lo, ld_hi) = (pick(load_e.clone(), false), pick(load_e, true));
    let make = |p: usize, l: usize| Profile {
        pv: pv[p].clone(),
        load_p: loads[l].0.clone(),
        load_q: loads[l].1.clone(),
    };
    Ok(vec![make(pv_lo, ld_hi), make(pv_hi, ld_lo)])
}

/// Clear-sky PV shape on the real-time grid: a half sine between 06:00
/// and 18:00 peaking at 1.0 at noon.
pub fn clear_sky(steps: usize) -> Vec<f64> {
    let dt = MINUTES_PER_DAY as f64 / steps as f64 / 60.0;
    (0..steps)
        .map(|t| {
            let h = (t as f64 + 0.5) * dt;
            if (6.0..18.0).contains(&h) {
                (std::f64::consts::PI * (h - 6.0) / 12.0).sin()
            } else {
                0.0
            }
        })
        .collect()
}

/// Base residential demand shape: morning and evening peaks, factors in
/// roughly [0.55, 1.0].
pub fn load_shape(steps: usize) -> Vec<f64> {
    let dt = MINUTES_PER_DAY as f64 / steps as f64 / 60.0;
    (0..steps)
        .map(|t| {
            let h = (t as f64 + 0.5) * dt;
            let bump = |c: f64, w: f64| (-((h - c) / w).powi(2)).exp();
            0.55 + 0.25 * bump(8.0, 1.5) + 0.45 * bump(19.5, 2.0)
        })
        .collect()
}

/// Seeded synthetic days on the 15-minute grid.
///
/// Each day draws a cloudiness factor `1 - cloudiness * U(0,1)` scaling the
/// clear-sky curve, plus intraday variability proportional to `cloudiness`;
/// loads follow [`load_shape`] with 3 % Gaussian noise. The two forecast
/// scenarios bracket the realization pointwise and are cross-paired as in
/// [`pair_extremes`]. `cloudiness = 0` gives the pure clear-sky curve.
pub fn synth_profiles(seed: u64, days: usize, cloudiness: f64) -> Vec<ScenarioSet> {
    let steps = (MINUTES_PER_DAY / RT_STEP_MINUTES) as usize;
    let sky = clear_sky(steps);
    let shape = load_shape(steps);
    let cloudiness = cloudiness.clamp(0.0, 1.0);
    let spread = 0.1 + 0.2 * cloudiness;
    let noise = Normal::<f64>::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..days)
        .map(|_| {
            let daily = 1.0 - cloudiness * rng.random::<f64>();
            let pv: Vec<f64> = sky
                .iter()
                .map(|&s| {
                    let jitter = 1.0 - 0.3 * cloudiness * noise.sample(&mut rng).abs();
                    (s * daily * jitter.max(0.0)).clamp(0.0, 1.0)
                })
                .collect();
            let load: Vec<f64> = shape
                .iter()
                .map(|&s| (s * (1.0 + 0.03 * noise.sample(&mut rng))).max(0.0))
                .collect();
            let lo = |v: &[f64], f: f64| v.iter().map(|x| x * f).collect::<Vec<_>>();
            let pv_low = lo(&pv, 1.0 - spread);
            let pv_high: Vec<f64> = pv.iter().map(|x| (x * (1.0 + spread)).min(1.0).max(*x)).collect();
            let load_low = lo(&load, 1.0 - 0.5 * spread);
            let load_high = lo(&load, 1.0 + 0.5 * spread);
            let scenarios = pair_extremes(
                &[pv_low, pv_high],
                &[(load_low.clone(), load_low), (load_high.clone(), load_high)],
            )
            .expect("two candidates each");
            ScenarioSet::new(
                scenarios,
                RT_STEP_MINUTES,
                Profile {
                    pv,
                    load_p: load.clone(),
                    load_q: load,
                },
                RT_STEP_MINUTES,
            )
            .expect("synthetic profiles are valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_csv(values: &[f64]) -> String {
        let mut buf = Vec::new();
        write_series(&mut buf, values).unwrap();
        String::from_utf8(buf).unwrap()
    }

    fn flat(n: usize, v: f64) -> Profile {
        Profile {
            pv: vec![v; n],
            load_p: vec![v; n],
            load_q: vec![v; n],
        }
    }

    #[test]
    fn step_indexed_file() {
        let values: Vec<f64> = (0..96).map(|t| t as f64 / 96.0).collect();
        let s = read_series(series_csv(&values).as_bytes(), "pv.csv").unwrap();
        assert_eq!(s.values, values);
        assert_eq!(s.timestep_minutes, None);
    }

    #[test]
    fn timestamped_file_gives_cadence() {
        let mut text = String::from("time,value\n");
        for t in 0..96 {
            text += &format!("2024-06-01T{:02}:{:02}:00,0.5\n", t / 4, (t % 4) * 15);
        }
        let s = read_series(text.as_bytes(), "pv.csv").unwrap();
        assert_eq!(s.values.len(), 96);
        assert_eq!(s.timestep_minutes, Some(15));
        let bad = "time,value\n2024-06-01T00:00:00,1\n2024-06-01T00:15:00,1\n2024-06-01T00:45:00,1\n";
        assert!(read_series(bad.as_bytes(), "x").is_err());
    }

    #[test]
    fn negative_factor_rejected() {
        let text = "time,value\n0,0.5\n1,-0.1\n";
        assert!(matches!(
            read_series(text.as_bytes(), "pv.csv"),
            Err(ScenarioError::InvalidFactor { step: 1, .. })
        ));
    }

    #[test]
    fn averaging_preserves_mean() {
        let fine: Vec<f64> = (0..96).map(|t| ((t * 37) % 11) as f64 / 10.0).collect();
        let coarse = resample(&fine, 15, 60).unwrap();
        assert_eq!(coarse.len(), 24);
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((m(&fine) - m(&coarse)).abs() < 1e-12);
        assert_eq!(resample(&coarse, 60, 15).unwrap().len(), 96);
        assert!(matches!(resample(&fine, 15, 40), Err(ScenarioError::Cadence { .. })));
    }

    #[test]
    fn set_validation() {
        assert!(ScenarioSet::new(vec![flat(24, 0.5)], 60, flat(96, 0.5), 15).is_ok());
        assert!(ScenarioSet::new(vec![flat(24, 0.5), flat(96, 0.5)], 60, flat(96, 0.5), 15).is_err());
        assert!(ScenarioSet::new(vec![], 60, flat(96, 0.5), 15).is_err());
        assert!(ScenarioSet::new(vec![flat(24, 0.5)], 60, flat(48, 0.5), 15).is_err());
        let mut ragged = flat(24, 0.5);
        ragged.load_q.pop();
        assert!(ScenarioSet::new(vec![ragged], 60, flat(96, 0.5), 15).is_err());
    }

    #[test]
    fn pairing_crosses_extremes() {
        let pv = vec![vec![0.2; 4], vec![0.8; 4]];
        let loads = vec![(vec![0.9; 4], vec![0.3; 4]), (vec![0.4; 4], vec![0.1; 4])];
        let s = pair_extremes(&pv, &loads).unwrap();
        assert_eq!(s[0].pv, pv[0]);
        assert_eq!(s[0].load_p, loads[0].0);
        assert_eq!(s[1].pv, pv[1]);
        assert_eq!(s[1].load_q, loads[1].1);

        let one = pair_extremes(&pv[..1], &loads[..1]).unwrap();
        assert_eq!(one[0], one[1]);

        let tied = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
        let s = pair_extremes(&tied, &loads).unwrap();
        assert_eq!(s[0].pv, tied[0]);
        assert_eq!(s[1].pv, tied[0]);
        assert!(pair_extremes(&[], &loads).is_err());
    }

    #[test]
    fn clear_sky_when_no_clouds() {
        let days = synth_profiles(3, 2, 0.0);
        let sky = clear_sky(96);
        for d in &days {
            assert_eq!(d.realization.pv, sky);
        }
        assert_eq!(sky[0], 0.0);
        assert_eq!(sky[95], 0.0);
        assert!((sky[47] - 1.0).abs() < 0.01);
    }

    #[test]
    fn synthetic_is_deterministic() {
        assert_eq!(synth_profiles(11, 3, 0.6), synth_profiles(11, 3, 0.6));
        assert_ne!(synth_profiles(11, 3, 0.6), synth_profiles(12, 3, 0.6));
    }

    #[test]
    fn synthetic_daily_energy_spread() {
        let days = synth_profiles(7, 30, DEFAULT_CLOUDINESS);
        let e: Vec<f64> = days.iter().map(|d| d.realization.pv.iter().sum()).collect();
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / e.len() as f64;
        let cv = var.sqrt() / mean;
        assert!((0.1..=0.5).contains(&cv), "cv {cv}");
    }

    #[test]
    fn synthetic_realization_between_scenarios() {
        for d in synth_profiles(5, 10, 0.8) {
            for t in 0..96 {
                let (a, b) = (&d.scenarios[0], &d.scenarios[1]);
                assert!(a.pv[t].min(b.pv[t]) <= d.realization.pv[t]);
                assert!(a.pv[t].max(b.pv[t]) >= d.realization.pv[t]);
                assert!(a.load_p[t].min(b.load_p[t]) <= d.realization.load_p[t]);
                assert!(a.load_p[t].max(b.load_p[t]) >= d.realization.load_p[t]);
            }
        }
    }

    #[test]
    fn write_then_load_is_identity() {
        let day = synth_profiles(1, 1, 0.5).remove(0);
        let set = ScenarioSet::new(
            day.scenarios
                .iter()
                .map(|s| s.resample(15, 60).unwrap())
                .collect(),
            60,
            day.realization.clone(),
            15,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_profiles(&set, dir.path()).unwrap();
        let back = load_profile_manifest(&manifest).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.realization_day_ahead().unwrap().pv.len(), 24);
    }

    #[test]
    fn mean_scenario_is_pointwise() {
        let set = ScenarioSet::new(vec![flat(24, 0.2), flat(24, 0.6)], 60, flat(96, 0.4), 15).unwrap();
        assert!(set.mean_scenario().pv.iter().all(|&x| (x - 0.4).abs() < 1e-15));
    }
}
