//! Demonstrations and their JSONL storage.
//!
//! Line 1 is a header object; every following line is one demonstration.
//! Floats are written in shortest round-trip form, so loading a saved set
//! reproduces it value for value.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::CarcassSpec;
use crate::types::{Action, Observation};

pub const DEMO_FORMAT_VERSION: u32 = 1;
const DEMO_KIND: &str = "demoset";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    Scripted,
    Teleop,
}

/// Which controller produced a frame's action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Learned,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoMeta {
    pub seed: u64,
    pub exemplar_id: u8,
    pub source: Source,
    pub tick_rate: f64,
    /// Unix seconds.
    pub created_at: u64,
    pub format_version: u32,
    pub carcass: CarcassSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frame {
    pub tick: u64,
    pub obs: Observation,
    pub action: Action,
    /// Absent for frames with no controller handoff (e.g. teleoperation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
}

impl Frame {
    pub fn is_learnable(&self) -> bool {
        self.mode != Some(Mode::Scripted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demonstration {
    pub meta: DemoMeta,
    pub frames: Vec<Frame>,
}

impl Demonstration {
    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::Format(format!(
                "demonstration (seed {}) has {} frames, need at least 2",
                self.meta.seed,
                self.frames.len()
            )));
        }
        for w in self.frames.windows(2) {
            if w[1].tick != w[0].tick + 1 {
                return Err(Error::Format(format!(
                    "demonstration (seed {}) ticks jump from {} to {}",
                    self.meta.seed, w[0].tick, w[1].tick
                )));
            }
        }
        Ok(())
    }

    /// The prefix of frames a policy is trained on: everything before the
    /// scripted handoff.
    pub fn learnable(&self) -> &[Frame] {
        let end = self
            .frames
            .iter()
            .position(|f| !f.is_learnable())
            .unwrap_or(self.frames.len());
        &self.frames[..end]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemoSet {
    pub demos: Vec<Demonstration>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u32,
    kind: String,
    tick_rate: f64,
    count: usize,
}

impl DemoSet {
    pub fn new(demos: Vec<Demonstration>) -> Self {
        Self { demos }
    }

    pub fn len(&self) -> usize {
        self.demos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demos.is_empty()
    }

    pub fn tick_rate(&self) -> Option<f64> {
        self.demos.first().map(|d| d.meta.tick_rate)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            format_version: DEMO_FORMAT_VERSION,
            kind: DEMO_KIND.into(),
            tick_rate: self.tick_rate().unwrap_or(0.0),
            count: self.demos.len(),
        };
        let io = |e: std::io::Error| Error::Format(format!("write failed: {e}"));
        serde_json::to_writer(&mut w, &header).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(b"\n").map_err(io)?;
        for d in &self.demos {
            serde_json::to_writer(&mut w, d).map_err(|e| Error::Format(e.to_string()))?;
            w.write_all(b"\n").map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let first = first.map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
        if let Some(v) = raw.get("format_version").and_then(|v| v.as_u64()) {
            if v != DEMO_FORMAT_VERSION as u64 {
                return Err(Error::FormatVersion {
                    found: v as u32,
                    expected: DEMO_FORMAT_VERSION,
                });
            }
        }
        let header: Header = serde_json::from_value(raw).map_err(|e| Error::Parse {
            line: 1,
            msg: format!("bad header: {e}"),
        })?;
        if header.kind != DEMO_KIND {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected kind `{DEMO_KIND}`, found `{}`", header.kind),
            });
        }

        let mut demos = Vec::with_capacity(header.count);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let demo: Demonstration = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            demo.validate().map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
            demos.push(demo);
        }
        if demos.len() != header.count {
            return Err(Error::Parse {
                line: demos.len() + 2,
                msg: format!(
                    "header announces {} demonstrations, file holds {}",
                    header.count,
                    demos.len()
                ),
            });
        }
        Ok(Self { demos })
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(BufWriter::new(f))
    }

    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(BufReader::new(f))
    }
}
