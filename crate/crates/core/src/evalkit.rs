//! Viewer-rating arithmetic: per-record totals, per-method mean and median
//! tables, and best-method counts.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const METRICS: [&str; 3] = ["appropriateness", "attractiveness", "interest"];
pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub participant: String,
    pub movie: String,
    pub method: String,
    pub appropriateness: u8,
    pub attractiveness: u8,
    pub interest: u8,
}

impl RatingRecord {
    pub fn ratings(&self) -> [u8; 3] {
        [self.appropriateness, self.attractiveness, self.interest]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in METRICS.iter().zip(self.ratings()) {
            if !(MIN_RATING..=MAX_RATING).contains(&v) {
                return Err(Error::Eval(format!(
                    "{}/{}/{}: {name} = {v} outside {MIN_RATING}..={MAX_RATING}",
                    self.participant, self.movie, self.method
                )));
            }
        }
        Ok(())
    }
}

pub fn total_score(r: &RatingRecord) -> u32 {
    r.ratings().iter().map(|&v| v as u32).sum()
}

/// Reads `participant,movie,method,appropriateness,attractiveness,interest`
/// rows, validating each.
pub fn read_ratings(input: impl Read) -> Result<Vec<RatingRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::Eval(e.to_string()))?.clone();
    let want = ["participant", "movie", "method"].iter().chain(METRICS.iter());
    if !header.iter().eq(want.copied()) {
        return Err(Error::Eval(format!(
            "expected header participant,movie,method,{}; got {}",
            METRICS.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<RatingRecord>().enumerate() {
        let r = row.map_err(|e| Error::Eval(format!("row {}: {e}", i + 2)))?;
        r.validate()?;
        out.push(r);
    }
    Ok(out)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodStats {
    /// Unrounded, in [`METRICS`] order.
    pub mean: [f64; 3],
    pub median: [f64; 3],
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub participants: usize,
    pub movies: usize,
    pub methods: BTreeMap<String, MethodStats>,
    /// Participants crediting each method as best; tied methods all count.
    pub best_counts: BTreeMap<String, usize>,
}

pub fn aggregate(records: &[RatingRecord]) -> Result<Report> {
    if records.is_empty() {
        return Err(Error::Eval("no ratings".into()));
    }
    let mut seen = HashSet::new();
    for r in records {
        r.validate()?;
        if !seen.insert((&r.participant, &r.movie, &r.method)) {
            return Err(Error::Eval(format!(
                "duplicate rating for participant {}, movie {}, method {}",
                r.participant, r.movie, r.method
            )));
        }
    }
    let mut by_method: BTreeMap<&str, Vec<&RatingRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(&r.method).or_default().push(r);
    }
    let methods = by_method
        .iter()
        .map(|(&m, rs)| {
            let col = |k: usize| rs.iter().map(|r| r.ratings()[k] as f64).collect::<Vec<_>>();
            let cols = [col(0), col(1), col(2)];
            let stats = MethodStats {
                mean: [mean(&cols[0]), mean(&cols[1]), mean(&cols[2])],
                median: [median(&cols[0]), median(&cols[1]), median(&cols[2])],
                records: rs.len(),
            };
            (m.to_string(), stats)
        })
        .collect();

    let mut totals: BTreeMap<&str, BTreeMap<&str, u32>> = BTreeMap::new();
    for r in records {
        *totals.entry(&r.participant).or_default().entry(&r.method).or_default() += total_score(r);
    }
    let mut best_counts: BTreeMap<String, usize> = by_method.keys().map(|m| (m.to_string(), 0)).collect();
    for per_method in totals.values() {
        let top = per_method.values().copied().max().unwrap_or(0);
        for (m, _) in per_method.iter().filter(|(_, &t)| t == top) {
            *best_counts.get_mut(*m).expect("known method") += 1;
        }
    }
    let movies: HashSet<&str> = records.iter().map(|r| r.movie.as_str()).collect();
    Ok(Report {
        participants: totals.len(),
        movies: movies.len(),
        methods,
        best_counts,
    })
}

fn table(report: &Report, title: &str, decimals: usize, pick: impl Fn(&MethodStats) -> [f64; 3]) -> String {
    let width = report.methods.keys().map(|m| m.len()).max().unwrap_or(0).max("method".len());
    let mut s = format!("{title}\n");
    let _ = write!(s, "{:<width$}", "method");
    for m in METRICS {
        let _ = write!(s, "  {m:>15}");
    }
    s.push('\n');
    for (name, st) in &report.methods {
        let _ = write!(s, "{name:<width$}");
        for v in pick(st) {
            let _ = write!(s, "  {v:>15.decimals$}");
        }
        s.push('\n');
    }
    s
}

/// Mean and median tables (methods by metrics) followed by best counts.
pub fn render_tables(report: &Report) -> String {
    let mut s = table(report, "Average scores by method", 2, |st| st.mean);
    s.push('\n');
    s += &table(report, "Median scores by method", 1, |st| st.median);
    s.push('\n');
    s += "Participants rating each method best (ties credit every tied method)\n";
    for (m, n) in &report.best_counts {
        let _ = writeln!(s, "{m}  {n}");
    }
    s
}

/// JSON form with means rounded to two decimals and medians to one.
pub fn report_json(report: &Report) -> serde_json::Value {
    let r = |x: f64, d: i32| {
        let p = 10f64.powi(d);
        (x * p).round() / p
    };
    let methods: serde_json::Map<String, serde_json::Value> = report
        .methods
        .iter()
        .map(|(m, st)| {
            let metric = |k: usize| serde_json::json!({"mean": r(st.mean[k], 2), "median": r(st.median[k], 1)});
            let fields: serde_json::Map<String, serde_json::Value> =
                METRICS.iter().enumerate().map(|(k, name)| (name.to_string(), metric(k))).collect();
            (m.clone(), serde_json::Value::Object(fields))
        })
        .collect();
    serde_json::json!({
        "participants": report.participants,
        "movies": report.movies,
        "methods": methods,
        "best_counts": report.best_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(p: &str, mv: &str, m: &str, a: u8, b: u8, c: u8) -> RatingRecord {
        RatingRecord {
            participant: p.into(),
            movie: mv.into(),
            method: m.into(),
            appropriateness: a,
            attractiveness: b,
            interest: c,
        }
    }

    #[test]
    fn totals() {
        assert_eq!(total_score(&rec("p", "m", "A", 4, 3, 3)), 10);
        assert_eq!(total_score(&rec("p", "m", "A", 1, 1, 1)), 3);
        assert_eq!(total_score(&rec("p", "m", "A", 7, 7, 7)), 21);
        assert!(rec("p", "m", "A", 0, 3, 3).validate().is_err());
        assert!(rec("p", "m", "A", 8, 3, 3).validate().is_err());
    }

    #[test]
    fn mean_and_median() {
        let r = aggregate(&[rec("p1", "m1", "A", 3, 3, 3), rec("p2", "m1", "A", 4, 4, 4)]).unwrap();
        let st = &r.methods["A"];
        assert_eq!(st.mean[0], 3.5);
        assert_eq!(st.median[0], 3.5);
        let j = report_json(&r);
        assert_eq!(j["methods"]["A"]["appropriateness"]["mean"], 3.5);
    }

    #[test]
    fn ties_credit_all() {
        // totals A 30, B 30, C 12 over two movies
        let rows = [
            rec("p1", "m1", "A", 5, 5, 5),
            rec("p1", "m2", "A", 5, 5, 5),
            rec("p1", "m1", "B", 7, 4, 4),
            rec("p1", "m2", "B", 5, 5, 5),
            rec("p1", "m1", "C", 2, 2, 2),
            rec("p1", "m2", "C", 2, 2, 2),
        ];
        let r = aggregate(&rows).unwrap();
        assert_eq!(r.best_counts["A"], 1);
        assert_eq!(r.best_counts["B"], 1);
        assert_eq!(r.best_counts["C"], 0);
    }

    #[test]
    fn errors() {
        assert!(aggregate(&[]).is_err());
        let dup = [rec("p1", "m1", "A", 3, 3, 3), rec("p1", "m1", "A", 4, 4, 4)];
        assert!(matches!(aggregate(&dup), Err(Error::Eval(m)) if m.contains("duplicate")));
    }

    #[test]
    fn csv_parsing() {
        let text = "participant,movie,method,appropriateness,attractiveness,interest\np1, m1, A, 4, 3, 3\n";
        let rows = read_ratings(text.as_bytes()).unwrap();
        assert_eq!(rows, vec![rec("p1", "m1", "A", 4, 3, 3)]);
        assert!(read_ratings("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "participant,movie,method,appropriateness,attractiveness,interest\np1,m1,A,9,3,3\n";
        assert!(read_ratings(bad.as_bytes()).is_err());
    }

    #[test]
    fn layout_is_methods_by_metrics() {
        let rows: Vec<RatingRecord> = ["A", "B", "C"].iter().map(|m| rec("p1", "m1", m, 3, 4, 5)).collect();
        let text = render_tables(&aggregate(&rows).unwrap());
        let mean_block: Vec<&str> = text.lines().skip(1).take(4).collect();
        assert!(mean_block[0].contains("appropriateness") && mean_block[0].contains("interest"));
        assert!(mean_block[1].starts_with('A') && mean_block[1].contains("3.00"));
        assert_eq!(mean_block[3].split_whitespace().count(), 4);
    }
}
