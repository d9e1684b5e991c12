use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Piecewise-linear gain curve in dB. Before the first breakpoint and after
/// the last one the gain holds constant; an envelope with no breakpoints is
/// unity (0 dB) everywhere.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct GainEnvelope {
    points: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for GainEnvelope {
    type Error = Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        GainEnvelope::new(points)
    }
}

impl From<GainEnvelope> for Vec<(f64, f64)> {
    fn from(e: GainEnvelope) -> Self {
        e.points
    }
}

impl GainEnvelope {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.iter().any(|(t, g)| !t.is_finite() || !g.is_finite()) {
            return Err(Error::invalid("gain envelope has non-finite breakpoints"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("gain envelope times must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn unity() -> Self {
        Self::default()
    }

    pub fn constant(gain_db: f64) -> Self {
        Self {
            points: vec![(0.0, gain_db)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn gain_db_at(&self, t: f64) -> f64 {
        let p = &self.points;
        match p.len() {
            0 => 0.0,
            _ if t <= p[0].0 => p[0].1,
            _ if t >= p[p.len() - 1].0 => p[p.len() - 1].1,
            _ => {
                // first breakpoint strictly after t
                let hi = p.partition_point(|&(pt, _)| pt <= t);
                let (t0, g0) = p[hi - 1];
                let (t1, g1) = p[hi];
                g0 + (g1 - g0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn linear_gain_at(&self, t: f64) -> f64 {
        db_to_linear(self.gain_db_at(t))
    }

    /// Adds `db` to every breakpoint.
    pub fn offset(&self, db: f64) -> GainEnvelope {
        if self.points.is_empty() {
            return GainEnvelope::constant(db);
        }
        GainEnvelope {
            points: self.points.iter().map(|&(t, g)| (t, g + db)).collect(),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
