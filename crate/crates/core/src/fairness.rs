//! Curtailment bookkeeping and the weights that steer curtailment towards
//! plants that have so far been spared.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Floor applied to policies that would otherwise reach zero weight.
pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_HORIZON_DAYS: usize = 30;
pub const DEFAULT_ROLLING_WINDOW: usize = 15;

// Realized energy may overshoot the MPP by round-off from the solvers.
const ENERGY_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FairnessError {
    #[error("expected {expected} plants, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("day {day}, plant {plant}: {message}")]
    InvalidEntry {
        day: usize,
        plant: usize,
        message: String,
    },
    #[error("ledger holds {available} days, {requested} requested")]
    DayOutOfRange { requested: usize, available: usize },
    #[error("fairness index of an all-zero vector is undefined")]
    AllZero,
    #[error("unknown weight policy `{0}`")]
    UnknownPolicy(String),
    #[error("ledger CSV: {0}")]
    Csv(String),
}

/// Per-plant, per-day realized and available energy (p.u.·h).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurtailmentLedger {
    plants: usize,
    realized: Vec<Vec<f64>>,
    mpp: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LedgerRow {
    day: usize,
    plant: usize,
    realized: f64,
    mpp: f64,
}

impl CurtailmentLedger {
    pub fn new(plants: usize) -> Self {
        Self {
            plants,
            realized: Vec::new(),
            mpp: Vec::new(),
        }
    }

    pub fn plant_count(&self) -> usize {
        self.plants
    }

    pub fn day_count(&self) -> usize {
        self.mpp.len()
    }

    /// Appends the next day. Realized values within round-off of the MPP are clamped.
    pub fn push_day(&mut self, realized: &[f64], mpp: &[f64]) -> Result<(), FairnessError> {
        let day = self.day_count() + 1;
        for v in [realized, mpp] {
            if v.len() != self.plants {
                return Err(FairnessError::Dimension {
                    expected: self.plants,
                    found: v.len(),
                });
            }
        }
        let mut row = Vec::with_capacity(self.plants);
        for (plant, (&r, &m)) in realized.iter().zip(mpp).enumerate() {
            let bad = |message: &str| FairnessError::InvalidEntry {
                day,
                plant,
                message: message.to_string(),
            };
            if !(r.is_finite() && m.is_finite()) {
                return Err(bad("non-finite energy"));
            }
            if m < 0.0 || r < -ENERGY_SLACK {
                return Err(bad("negative energy"));
            }
            if r > m + ENERGY_SLACK * m.max(1.0) {
                return Err(bad("realized energy exceeds MPP energy"));
            }
            row.push(r.clamp(0.0, m));
        }
        self.realized.push(row);
        self.mpp.push(mpp.to_vec());
        Ok(())
    }

    /// 1-based day.
    pub fn realized(&self, day: usize, plant: usize) -> f64 {
        self.realized[day - 1][plant]
    }

    pub fn mpp(&self, day: usize, plant: usize) -> f64 {
        self.mpp[day - 1][plant]
    }

    /// Curtailed share of the available energy on one day, all plants together.
    pub fn day_curtailment(&self, day: usize) -> f64 {
        let m: f64 = self.mpp[day - 1].iter().sum();
        let r: f64 = self.realized[day - 1].iter().sum();
        if m > 0.0 {
            1.0 - r / m
        } else {
            0.0
        }
    }

    /// Curtailed share of all energy available over days `1..=day`.
    pub fn total_curtailment(&self, day: usize) -> f64 {
        let m: f64 = self.mpp[..day].iter().flatten().sum();
        let r: f64 = self.realized[..day].iter().flatten().sum();
        if m > 0.0 {
            1.0 - r / m
        } else {
            0.0
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FairnessError> {
        let mut w = csv::Writer::from_writer(out);
        for d in 0..self.day_count() {
            for l in 0..self.plants {
                w.serialize(LedgerRow {
                    day: d + 1,
                    plant: l,
                    realized: self.realized[d][l],
                    mpp: self.mpp[d][l],
                })
                .map_err(|e| FairnessError::Csv(e.to_string()))?;
            }
        }
        w.flush().map_err(|e| FairnessError::Csv(e.to_string()))
    }

    /// Reads `day,plant,realized,mpp` rows; days must be contiguous from 1.
    pub fn read_csv<R: Read>(input: R, plants: usize) -> Result<Self, FairnessError> {
        let mut rows: Vec<LedgerRow> = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize() {
            rows.push(row.map_err(|e: csv::Error| FairnessError::Csv(e.to_string()))?);
        }
        let days = rows.iter().map(|r| r.day).max().unwrap_or(0);
        let mut realized = vec![vec![f64::NAN; plants]; days];
        let mut mpp = vec![vec![f64::NAN; plants]; days];
        for r in rows {
            if r.day == 0 || r.plant >= plants {
                return Err(FairnessError::Csv(format!(
                    "row for day {} plant {} out of range",
                    r.day, r.plant
                )));
            }
            realized[r.day - 1][r.plant] = r.realized;
            mpp[r.day - 1][r.plant] = r.mpp;
        }
        let mut ledger = Self::new(plants);
        for (r, m) in realized.iter().zip(&mpp) {
            if r.iter().chain(m).any(|v| v.is_nan()) {
                return Err(FairnessError::Csv(format!(
                    "day {} is incomplete",
                    ledger.day_count() + 1
                )));
            }
            ledger.push_day(r, m)?;
        }
        Ok(ledger)
    }
}

/// Cumulative normalized generation over days `1..=day`, per plant.
/// Plants with no available energy count as uncurtailed.
pub fn cumulative_generation(ledger: &CurtailmentLedger, day: usize) -> Result<Vec<f64>, FairnessError> {
    if day > ledger.day_count() {
        return Err(FairnessError::DayOutOfRange {
            requested: day,
            available: ledger.day_count(),
        });
    }
    Ok((0..ledger.plants)
        .map(|l| {
            let m: f64 = ledger.mpp[..day].iter().map(|d| d[l]).sum();
            let r: f64 = ledger.realized[..day].iter().map(|d| d[l]).sum();
            if m > 0.0 {
                (r / m).clamp(0.0, 1.0)
            } else {
                1.0
            }
        })
        .collect())
}

/// Jain's fairness index.
pub fn jfi(g: &[f64]) -> Result<f64, FairnessError> {
    let sum: f64 = g.iter().sum();
    let sq: f64 = g.iter().map(|x| x * x).sum();
    if g.is_empty() || sq == 0.0 {
        return Err(FairnessError::AllZero);
    }
    Ok(sum * sum / (g.len() as f64 * sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightPolicy {
    /// No feedback: every plant weighs 1.
    Uniform,
    Inverse,
    Shrinking,
    Rolling,
    Logarithmic,
    Difference,
}

impl WeightPolicy {
    pub const ALL: [WeightPolicy; 6] = [
        WeightPolicy::Uniform,
        WeightPolicy::Inverse,
        WeightPolicy::Shrinking,
        WeightPolicy::Rolling,
        WeightPolicy::Logarithmic,
        WeightPolicy::Difference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightPolicy::Uniform => "uniform",
            WeightPolicy::Inverse => "inverse",
            WeightPolicy::Shrinking => "shrinking",
            WeightPolicy::Rolling => "rolling",
            WeightPolicy::Logarithmic => "logarithmic",
            WeightPolicy::Difference => "difference",
        }
    }
}

impl fmt::Display for WeightPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightPolicy {
    type Err = FairnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "uniform" | "none" => Ok(WeightPolicy::Uniform),
            "inverse" => Ok(WeightPolicy::Inverse),
            "shrinking" => Ok(WeightPolicy::Shrinking),
            "rolling" => Ok(WeightPolicy::Rolling),
            "logarithmic" | "log" => Ok(WeightPolicy::Logarithmic),
            "difference" | "diff" => Ok(WeightPolicy::Difference),
            _ => Err(FairnessError::UnknownPolicy(s)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightParams {
    pub epsilon: f64,
    /// Last day of the planning horizon (shrinking policy).
    pub horizon_days: usize,
    /// Look-ahead of the rolling policy, days.
    pub rolling_window: usize,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            horizon_days: DEFAULT_HORIZON_DAYS,
            rolling_window: DEFAULT_ROLLING_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessWeights {
    pub lambda: Vec<f64>,
    pub policy: WeightPolicy,
    pub params: WeightParams,
}

/// Weights for the day after `day`.
///
/// `future_mpp` is the per-plant daily MPP energy assumed for days not yet
/// seen; `None` repeats the last recorded day. Future days are assumed
/// uncurtailed.
pub fn compute_weights(
    policy: WeightPolicy,
    ledger: &CurtailmentLedger,
    day: usize,
    future_mpp: Option<&[f64]>,
    params: &WeightParams,
) -> Result<FairnessWeights, FairnessError> {
    let n = ledger.plant_count();
    let eps = params.epsilon;
    let done = |lambda: Vec<f64>| {
        Ok(FairnessWeights {
            lambda,
            policy,
            params: *params,
        })
    };
    if day == 0 || policy == WeightPolicy::Uniform {
        return done(vec![1.0; n]);
    }
    let g = cumulative_generation(ledger, day)?;
    let lambda = match policy {
        WeightPolicy::Uniform => unreachable!(),
        WeightPolicy::Inverse => g.iter().map(|&g| inverse(g, eps)).collect(),
        WeightPolicy::Logarithmic => g.iter().map(|&g| (-g.ln()).max(eps)).collect(),
        WeightPolicy::Difference => g.iter().map(|&g| (1.0 - g).max(eps)).collect(),
        WeightPolicy::Shrinking | WeightPolicy::Rolling => {
            let future: Vec<f64> = match future_mpp {
                Some(f) if f.len() == n => f.to_vec(),
                Some(f) => {
                    return Err(FairnessError::Dimension {
                        expected: n,
                        found: f.len(),
                    })
                }
                None => ledger.mpp[day - 1].clone(),
            };
            let last = params.horizon_days.max(day);
            // the window never reaches past the end of the horizon
            let ahead = if policy == WeightPolicy::Rolling && params.rolling_window <= day {
                params.rolling_window.min(last - day)
            } else {
                last - day
            };
            (0..n)
                .map(|l| {
                    let f = ahead as f64 * future[l];
                    let m: f64 = ledger.mpp[..day].iter().map(|d| d[l]).sum::<f64>() + f;
                    let r: f64 = ledger.realized[..day].iter().map(|d| d[l]).sum::<f64>() + f;
                    if m > 0.0 {
                        inverse(r / m, eps)
                    } else {
                        1.0
                    }
                })
                .collect()
        }
    };
    done(lambda)
}

// 1/g, capped at 1/eps for plants that have produced nothing yet.
fn inverse(g: f64, eps: f64) -> f64 {
    1.0 / g.max(eps)
}
