//! Line-delimited rollout logs.
//!
//! One JSON object per line, tagged by `record`: a `header`, one `step` per executed
//! action, and a closing `summary`. Wall-clock measurements never go in here so reruns
//! are byte-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ForesightKind;
use crate::error::{Error, Result};
use crate::planner::{PlannerConfig, RolloutStep};
use crate::proposal::ProposalResult;
use crate::simulator::{PickPlaceAction, SuccessTolerance};

pub const ROLLOUT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutHeader {
    pub schema_version: u32,
    pub task: String,
    pub seed: u64,
    pub method: String,
    pub foresight: ForesightKind,
    pub scorer: String,
    pub planner: Option<PlannerConfig>,
    pub block_count: usize,
    pub max_steps: usize,
    pub tolerance: SuccessTolerance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    pub action: PickPlaceAction,
    pub proposal: Option<ProposalResult>,
    pub node_values: Vec<f64>,
    pub node_depths: Vec<usize>,
    pub chosen_node: Option<usize>,
    pub success: bool,
    pub progress: f64,
    pub unstable: bool,
}

impl From<&RolloutStep> for StepRecord {
    fn from(s: &RolloutStep) -> Self {
        Self {
            index: s.index,
            action: s.action,
            proposal: s.trace.proposal.clone(),
            node_values: s.trace.node_values.clone(),
            node_depths: s.trace.node_depths.clone(),
            chosen_node: s.trace.chosen_node,
            success: s.success,
            progress: s.progress,
            unstable: s.unstable,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub success: bool,
    pub progress: f64,
    pub steps: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(RolloutHeader),
    Step(StepRecord),
    Summary(SummaryRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutLog {
    pub header: RolloutHeader,
    pub steps: Vec<StepRecord>,
    pub summary: SummaryRecord,
}

pub struct RolloutLogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RolloutLogWriter {
    pub fn create(path: &Path, header: RolloutHeader) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(f),
        };
        w.write(&Record::Header(header))?;
        Ok(w)
    }

    fn write(&mut self, r: &Record) -> Result<()> {
        let line = serde_json::to_string(r)?;
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn step(&mut self, s: StepRecord) -> Result<()> {
        self.write(&Record::Step(s))
    }

    pub fn finish(mut self, s: SummaryRecord) -> Result<()> {
        self.write(&Record::Summary(s))?;
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_rollout_log(path: &Path) -> Result<RolloutLog> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = None;
    let mut steps = Vec::new();
    let mut summary = None;
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Record>(&line)? {
            Record::Header(h) => {
                if h.schema_version != ROLLOUT_SCHEMA_VERSION {
                    return Err(Error::Log(format!(
                        "{}: unsupported schema version {}",
                        path.display(),
                        h.schema_version
                    )));
                }
                header = Some(h);
            }
            Record::Step(s) => steps.push(s),
            Record::Summary(s) => summary = Some(s),
        }
    }
    let missing = |what: &str| Error::Log(format!("{}: missing {what}", path.display()));
    Ok(RolloutLog {
        header: header.ok_or_else(|| missing("header"))?,
        steps,
        summary: summary.ok_or_else(|| missing("summary"))?,
    })
}
