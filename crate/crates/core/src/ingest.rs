//! JSONL generation logs.
//!
//! One JSON object per line with the fields `problem_id`, `strategy`, `unit`,
//! `correct`, and the optional `answer_key` and `meta`. Within one
//! `(problem_id, strategy)` group units are unique and contiguous from 1.
//! Emission is canonical: records sorted by `(problem_id, strategy, unit)`,
//! fields in declaration order, `meta` keys sorted, absent options omitted.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(
    Debug,
    Clone,
    Copy,
    PartialEq,
    Eq,
    PartialOrd,
    Ord,
    Hash,
    Serialize,
    Deserialize,
    clap::ValueEnum,
)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Parallel,
    Sequential,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Parallel => f.write_str("parallel"),
            Strategy::Sequential => f.write_str("sequential"),
        }
    }
}

/// One graded generation: a sampled candidate (parallel) or a rethink round (sequential).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationRecord {
    pub problem_id: String,
    pub strategy: Strategy,
    /// 1-based sample index or round number.
    pub unit: u32,
    pub correct: bool,
    /// Normalized final answer; needed for majority voting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_key: Option<String>,
    /// Free-form context such as model or benchmark name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<BTreeMap<String, String>>,
}

impl GenerationRecord {
    fn sort_key(&self) -> (&str, Strategy, u32) {
        (&self.problem_id, self.strategy, self.unit)
    }
}

/// A validated log in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordSet {
    records: Vec<GenerationRecord>,
}

/// All records of one `(problem_id, strategy)` group, ordered by unit.
#[derive(Debug, Clone, Copy)]
pub struct ProblemLog<'a> {
    pub problem_id: &'a str,
    pub strategy: Strategy,
    pub records: &'a [GenerationRecord],
}

impl<'a> ProblemLog<'a> {
    /// Number of units. Units are `1..=units()` by construction.
    pub fn units(&self) -> usize {
        self.records.len()
    }

    /// Unit index of the first correct record.
    pub fn first_correct(&self) -> Option<u32> {
        self.records.iter().find(|r| r.correct).map(|r| r.unit)
    }

    /// Records of units `1..=n`, or `None` if the log is shorter.
    pub fn prefix(&self, n: usize) -> Option<&'a [GenerationRecord]> {
        self.records.get(..n)
    }
}

impl RecordSet {
    /// Validates and canonicalizes an in-memory collection.
    pub fn new(records: Vec<GenerationRecord>) -> Result<Self> {
        let positions: Vec<usize> = (1..=records.len()).collect();
        validate(&records, &positions)
            .map_err(|(pos, reason)| Error::InvalidLog(format!("record {pos}: {reason}")))?;
        Ok(Self::from_validated(records))
    }

    fn from_validated(mut records: Vec<GenerationRecord>) -> Self {
        records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        Self { records }
    }

    pub fn records(&self) -> &[GenerationRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<GenerationRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Every `(problem_id, strategy)` group in canonical order.
    pub fn problems(&self) -> Vec<ProblemLog<'_>> {
        self.records
            .chunk_by(|a, b| a.problem_id == b.problem_id && a.strategy == b.strategy)
            .map(|chunk| ProblemLog {
                problem_id: &chunk[0].problem_id,
                strategy: chunk[0].strategy,
                records: chunk,
            })
            .collect()
    }

    /// Groups of a single strategy, ordered by problem id.
    pub fn problems_for(&self, strategy: Strategy) -> Vec<ProblemLog<'_>> {
        self.problems()
            .into_iter()
            .filter(|p| p.strategy == strategy)
            .collect()
    }

    /// Strategies present in the log, in canonical order.
    pub fn strategies(&self) -> Vec<Strategy> {
        let mut seen: Vec<Strategy> = self.records.iter().map(|r| r.strategy).collect();
        seen.sort();
        seen.dedup();
        seen
    }
}

/// Parses and validates a JSONL stream. Blank lines are ignored.
pub fn parse_log<R: BufRead>(reader: R) -> Result<RecordSet> {
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GenerationRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            reason: e.to_string(),
        })?;
        records.push(record);
        lines.push(line_no);
    }
    validate(&records, &lines).map_err(|(line, reason)| Error::Parse { line, reason })?;
    Ok(RecordSet::from_validated(records))
}

pub fn parse_str(text: &str) -> Result<RecordSet> {
    parse_log(text.as_bytes())
}

/// Writes the canonical JSONL form, one record per line.
pub fn emit_log<W: Write>(set: &RecordSet, mut writer: W) -> Result<()> {
    for record in &set.records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_string(set: &RecordSet) -> String {
    let mut buf = Vec::with_capacity(set.len() * 64);
    emit_log(set, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Checks field-level and group-level invariants. On failure returns the
/// position (line or record number) of the offending record and a reason.
fn validate(records: &[GenerationRecord], positions: &[usize]) -> Result<(), (usize, String)> {
    let mut seen: HashMap<(&str, Strategy, u32), usize> = HashMap::with_capacity(records.len());
    let mut groups: BTreeMap<(&str, Strategy), Vec<(u32, usize)>> = BTreeMap::new();

    for (record, &pos) in records.iter().zip(positions) {
        if record.problem_id.is_empty() {
            return Err((pos, "field `problem_id` must be non-empty".into()));
        }
        if record.unit == 0 {
            return Err((pos, "field `unit` must be >= 1".into()));
        }
        let key = (record.problem_id.as_str(), record.strategy, record.unit);
        if let Some(first) = seen.insert(key, pos) {
            return Err((
                pos,
                format!(
                    "duplicate unit {} for problem `{}` ({}), first seen at {}",
                    record.unit, record.problem_id, record.strategy, first
                ),
            ));
        }
        groups
            .entry((record.problem_id.as_str(), record.strategy))
            .or_default()
            .push((record.unit, pos));
    }

    for ((problem_id, strategy), mut units) in groups {
        units.sort_unstable();
        for (expected, &(unit, pos)) in (1u32..).zip(&units) {
            if unit != expected {
                return Err((
                    pos,
                    format!(
                        "field `unit`: problem `{problem_id}` ({strategy}) jumps to unit {unit}, unit {expected} is missing"
                    ),
                ));
            }
        }
    }
    Ok(())
}
