//! Exhaustive sweep over small shapes: every canonical shape with at least
//! three factors and `prod(a_i+1) <= max_size`, every `1 <= k < k_c`.
//!
//! Balanced shapes go through the numeric tangency check; boundary and
//! unbalanced shapes are settled by the flattening corollary. A numeric
//! outcome that disagrees with the exceptions table is a divergence.
//!
//! Records stream to a line-delimited JSON file, one per `(shape, k)` in a
//! fixed order, followed by one summary line. Rerunning on a partial file
//! keeps the valid prefix and continues from there.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{exceptions_table_match, unbalanced_profile, Regime, Rule, Status};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::shape::SegreShape;
use crate::tangency::{tangency_check, CheckConfig, TangencyQuery};

pub const MAX_SURVEY_SIZE: u64 = 512;
const BATCH: usize = 64;

/// Canonical shapes with `q >= 3` and size at most `max_size`, in
/// lexicographic order of their ascending dimension lists.
pub fn enumerate_shapes(max_size: u64) -> Result<Vec<SegreShape>> {
    if max_size < 8 {
        return Err(Error::InvalidInput(format!(
            "max_size must be at least 8, got {max_size}"
        )));
    }
    let mut out = Vec::new();
    let mut current = Vec::new();
    grow(&mut current, 1, 1, max_size, &mut out);
    out.sort();
    out.into_iter().map(SegreShape::from_dims).collect()
}

fn grow(current: &mut Vec<u32>, min: u32, size: u64, max_size: u64, out: &mut Vec<Vec<u32>>) {
    if current.len() >= 3 {
        out.push(current.clone());
    }
    let mut a = min;
    while size * (u64::from(a) + 1) <= max_size {
        current.push(a);
        grow(current, a, size * (u64::from(a) + 1), max_size, out);
        current.pop();
        a += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Corunbal,
    Numeric,
    PerfectCase,
    OutOfMethod,
}

/// One `(shape, k)` pair to resolve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurveyTask {
    pub shape: SegreShape,
    pub k: u64,
    pub route: Route,
}

/// Tasks for every `1 <= k < k_c`, plus `k = k_c` when it is an integer
/// (reported without a numeric check, since the span then fills space).
pub fn plan_survey(max_size: u64) -> Result<Vec<SurveyTask>> {
    check_max_size(max_size)?;
    let mut tasks = Vec::new();
    for shape in enumerate_shapes(max_size)? {
        let regime = unbalanced_profile(&shape)?.regime;
        let kc = shape.critical_rank();
        let below = kc.max_strictly_below();
        let top: u64 = below.try_into().unwrap_or(0);
        for k in 1..=top {
            let route = if regime == Regime::Balanced {
                Route::Numeric
            } else {
                Route::Corunbal
            };
            tasks.push(SurveyTask {
                shape: shape.clone(),
                k,
                route,
            });
        }
        if kc.is_integer() {
            let k = top + 1;
            let route = match (regime, shape.dims()) {
                (Regime::Boundary | Regime::Unbalanced, _) => Route::Corunbal,
                (_, &[1, b, c]) if b == c => Route::PerfectCase,
                _ => Route::OutOfMethod,
            };
            tasks.push(SurveyTask {
                shape: shape.clone(),
                k,
                route,
            });
        }
    }
    Ok(tasks)
}

fn check_max_size(max_size: u64) -> Result<()> {
    if max_size > MAX_SURVEY_SIZE {
        return Err(Error::InvalidInput(format!(
            "max_size {max_size} exceeds the survey limit {MAX_SURVEY_SIZE}"
        )));
    }
    if max_size < 8 {
        return Err(Error::InvalidInput(format!(
            "max_size must be at least 8, got {max_size}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub dims: Vec<u32>,
    pub k: u64,
    pub route: Route,
    pub verdict: Status,
    pub rule: Rule,
    pub expected: Status,
    pub table_match: bool,
    pub divergent: bool,
    pub prime: Option<u64>,
    pub seed: Option<u64>,
    pub terracini_rank: Option<u64>,
    pub span_dim: Option<u64>,
    pub jacobian_rank: Option<u64>,
    pub trials: Option<u32>,
    pub elapsed_ms: u64,
}

impl SurveyRecord {
    pub fn certified(&self) -> bool {
        self.route == Route::Numeric && self.verdict == Status::Identifiable
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveySummary {
    pub max_size: u64,
    pub seed: u64,
    pub shapes: usize,
    pub total: usize,
    pub numeric: usize,
    pub certified: usize,
    pub table_hits: usize,
    pub non_certified: Vec<(Vec<u32>, u64)>,
    pub divergences: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: SurveySummary,
}

#[derive(Clone, Debug)]
pub struct SurveyResult {
    pub summary: SurveySummary,
    pub records: Vec<SurveyRecord>,
    pub divergences: Vec<SurveyRecord>,
    /// Records reused from an existing output file.
    pub resumed: usize,
}

impl SurveyResult {
    pub fn succeeded(&self) -> bool {
        self.divergences.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurveyConfig {
    /// Master seed, prime width and trials. Each task derives its own seed.
    pub check: CheckConfig,
    /// When false, elapsed times are written as zero so that two runs with
    /// the same seed give byte-identical files.
    pub record_timings: bool,
}

impl SurveyConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            check: CheckConfig::new(seed),
            record_timings: true,
        }
    }
}

pub fn task_seed(master: u64, shape: &SegreShape, k: u64) -> u64 {
    let mut parts = vec![shape.factors() as u64];
    parts.extend(shape.dims().iter().map(|&d| u64::from(d)));
    parts.push(k);
    derive_seed(master, &parts)
}

pub fn run_task(task: &SurveyTask, config: &SurveyConfig) -> Result<SurveyRecord> {
    let table_match = exceptions_table_match(&task.shape, task.k).is_some();
    let mut record = SurveyRecord {
        dims: task.shape.dims().to_vec(),
        k: task.k,
        route: task.route,
        verdict: Status::Unknown,
        rule: Rule::NoRule,
        expected: Status::Unknown,
        table_match,
        divergent: false,
        prime: None,
        seed: None,
        terracini_rank: None,
        span_dim: None,
        jacobian_rank: None,
        trials: None,
        elapsed_ms: 0,
    };
    match task.route {
        Route::Numeric => {
            let seed = task_seed(config.check.seed, &task.shape, task.k);
            let check = CheckConfig {
                seed,
                ..config.check
            };
            let report = tangency_check(&TangencyQuery::tangent_span(
                task.shape.clone(),
                task.k,
                check,
            ))?;
            let certified = report.certified();
            record.verdict = if certified {
                Status::Identifiable
            } else {
                Status::Unknown
            };
            record.rule = if certified {
                Rule::NumericCertificate
            } else {
                Rule::NumericInconclusive
            };
            record.expected = if table_match {
                Status::NotIdentifiable
            } else {
                Status::Identifiable
            };
            record.divergent = certified == table_match;
            record.prime = Some(report.prime);
            record.seed = Some(seed);
            record.terracini_rank = Some(report.terracini_rank);
            record.span_dim = Some(report.span_dim);
            record.jacobian_rank = Some(report.jacobian_rank);
            record.trials = Some(report.trials);
            if config.record_timings {
                record.elapsed_ms = report.elapsed_ms;
            }
        }
        Route::Corunbal => {
            let profile = unbalanced_profile(&task.shape)?;
            let status = if task.k <= profile.identifiable_up_to() {
                Status::Identifiable
            } else {
                Status::NotIdentifiable
            };
            record.verdict = status;
            record.expected = status;
            record.rule = Rule::UnbalancedCorollary;
        }
        Route::PerfectCase => {
            record.verdict = Status::Identifiable;
            record.expected = Status::Identifiable;
            record.rule = Rule::PerfectCase;
        }
        Route::OutOfMethod => {
            record.expected = Status::Unknown;
            record.rule = Rule::NoRule;
        }
    }
    Ok(record)
}

/// Parses the longest prefix of `path` whose records match `tasks` in
/// order, and returns them with the byte length of that prefix.
fn read_prefix(
    path: &Path,
    tasks: &[SurveyTask],
    config: &SurveyConfig,
) -> Result<(Vec<SurveyRecord>, u64)> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), 0)),
        Err(e) => return Err(e.into()),
    };
    let mut reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut offset = 0u64;
    let mut line = String::new();
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 || !line.ends_with('\n') || records.len() == tasks.len() {
            break;
        }
        let Ok(record) = serde_json::from_str::<SurveyRecord>(line.trim_end()) else {
            break;
        };
        let task = &tasks[records.len()];
        let expected_seed = (task.route == Route::Numeric)
            .then(|| task_seed(config.check.seed, &task.shape, task.k));
        if record.dims != task.shape.dims() || record.k != task.k || record.seed != expected_seed {
            break;
        }
        records.push(record);
        offset += read as u64;
    }
    Ok((records, offset))
}

pub fn run_survey(max_size: u64, config: &SurveyConfig, out: &Path) -> Result<SurveyResult> {
    config.check.validate()?;
    let tasks = plan_survey(max_size)?;
    let started = Instant::now();
    let (mut records, offset) = read_prefix(out, &tasks, config)?;
    let resumed = records.len();

    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .truncate(false)
        .open(out)?;
    file.set_len(offset)?;
    let mut writer = BufWriter::new(file);
    use std::io::Seek;
    writer.seek(std::io::SeekFrom::Start(offset))?;

    for chunk in tasks[resumed..].chunks(BATCH) {
        let batch: Vec<SurveyRecord> = chunk
            .par_iter()
            .map(|task| run_task(task, config))
            .collect::<Result<_>>()?;
        for record in batch {
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
            records.push(record);
        }
        writer.flush()?;
    }

    let divergences: Vec<SurveyRecord> = records.iter().filter(|r| r.divergent).cloned().collect();
    let numeric: Vec<&SurveyRecord> = records
        .iter()
        .filter(|r| r.route == Route::Numeric)
        .collect();
    let mut shapes: Vec<&[u32]> = records.iter().map(|r| r.dims.as_slice()).collect();
    shapes.dedup();
    let summary = SurveySummary {
        max_size,
        seed: config.check.seed,
        shapes: shapes.len(),
        total: records.len(),
        numeric: numeric.len(),
        certified: numeric.iter().filter(|r| r.certified()).count(),
        table_hits: records.iter().filter(|r| r.table_match).count(),
        non_certified: numeric
            .iter()
            .filter(|r| !r.certified())
            .map(|r| (r.dims.clone(), r.k))
            .collect(),
        divergences: divergences.len(),
        wall_ms: config
            .record_timings
            .then(|| started.elapsed().as_millis() as u64),
    };
    serde_json::to_writer(
        &mut writer,
        &SummaryLine {
            summary: summary.clone(),
        },
    )?;
    writer.write_all(b"\n")?;
    writer.flush()?;

    Ok(SurveyResult {
        summary,
        records,
        divergences,
        resumed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_survey_plan() {
        let tasks = plan_survey(8).unwrap();
        assert_eq!(tasks.len(), 2);
        assert_eq!((tasks[0].k, tasks[0].route), (1, Route::Numeric));
        // k_c = 2 for (1,1,1), reported under the perfect case.
        assert_eq!((tasks[1].k, tasks[1].route), (2, Route::PerfectCase));
    }

    #[test]
    fn size_guards() {
        assert!(enumerate_shapes(7).is_err());
        assert!(plan_survey(513).is_err());
    }

    #[test]
    fn enumeration_order_and_bounds() {
        let shapes = enumerate_shapes(16).unwrap();
        let dims: Vec<&[u32]> = shapes.iter().map(|s| s.dims()).collect();
        assert_eq!(
            dims,
            vec![&[1, 1, 1][..], &[1, 1, 1, 1], &[1, 1, 2], &[1, 1, 3]]
        );
    }
}
