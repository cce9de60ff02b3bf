//! Trajectory files: JSON Lines with a header object on the first line and
//! one [`TickRecord`] per following line.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{Config, GeometryFile};
use crate::error::{Error, Result};

use super::{Arm, Simulator, TickRecord};

pub const FORMAT: &str = "cdpr-trajectory";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub arms: Vec<Arm>,
    pub config: Config,
    pub geometry: GeometryFile,
}

impl RecordHeader {
    pub fn new(seed: u64, arms: Vec<Arm>, config: Config, geometry: GeometryFile) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            seed,
            arms,
            config,
            geometry,
        }
    }

    pub fn simulators(&self, seed: u64) -> Result<Vec<Simulator>> {
        let g = self.geometry.clone().into_geometry()?;
        self.arms
            .iter()
            .map(|&a| Simulator::new(self.config.clone(), g.clone(), a, seed))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub header: RecordHeader,
    pub ticks: Vec<TickRecord>,
}

fn to_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("record types serialize to JSON")
}

/// Streams a trajectory file.
pub struct RecordWriter<W: Write> {
    out: W,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W, header: &RecordHeader) -> std::io::Result<Self> {
        writeln!(out, "{}", to_line(header))?;
        Ok(Self { out })
    }

    pub fn write_tick(&mut self, t: &TickRecord) -> std::io::Result<()> {
        writeln!(self.out, "{}", to_line(t))
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl TrajectoryRecord {
    pub fn to_text(&self) -> String {
        let mut s = to_line(&self.header);
        s.push('\n');
        for t in &self.ticks {
            s.push_str(&to_line(t));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::read(text.as_bytes())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header: RecordHeader = match lines.next() {
            Some((_, line)) => serde_json::from_str(&line?).map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?,
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "missing header".into(),
                })
            }
        };
        if header.format != FORMAT || header.version != VERSION {
            return Err(Error::Parse {
                line: 1,
                message: format!("unsupported format {} v{}", header.format, header.version),
            });
        }
        let mut ticks = Vec::new();
        for (i, line) in lines {
            let t: TickRecord = serde_json::from_str(&line?).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if !header.arms.contains(&t.arm) {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("arm {} not declared in header", t.arm),
                });
            }
            ticks.push(t);
        }
        Ok(Self { header, ticks })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub record: TrajectoryRecord,
    /// Same seed as the original; otherwise outputs are not expected to
    /// match.
    pub comparable: bool,
    /// Every regenerated line equals the original.
    pub identical: bool,
    /// First differing tick line (1-based file line), if any.
    pub first_difference: Option<usize>,
}

/// Re-runs the recorded inputs headless, optionally with another seed.
pub fn replay(original: &TrajectoryRecord, seed: Option<u64>) -> Result<ReplayOutcome> {
    let seed = seed.unwrap_or(original.header.seed);
    let mut sims = original.header.simulators(seed)?;
    let mut header = original.header.clone();
    header.seed = seed;
    let mut ticks = Vec::with_capacity(original.ticks.len());
    let mut first_difference = None;
    for (k, t) in original.ticks.iter().enumerate() {
        let sim = sims
            .iter_mut()
            .find(|s| s.arm() == t.arm)
            .expect("arms were checked against the header");
        let out = sim.step(t.input.as_ref());
        if first_difference.is_none() && to_line(&out) != to_line(t) {
            first_difference = Some(k + 2);
        }
        ticks.push(out);
    }
    let comparable = seed == original.header.seed;
    let identical = first_difference.is_none() && to_line(&header) == to_line(&original.header);
    Ok(ReplayOutcome {
        record: TrajectoryRecord { header, ticks },
        comparable,
        identical,
        first_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{CdprGeometry, Vec3};
    use crate::sim::OperatorInput;

    fn recorded(seed: u64, noise: f64) -> TrajectoryRecord {
        let mut config = Config::default();
        config.sim.length_noise = noise;
        let g = CdprGeometry::default_rig();
        let header = RecordHeader::new(
            seed,
            vec![Arm::Left, Arm::Right],
            config,
            GeometryFile::from_geometry(&g),
        );
        let mut sims = header.simulators(seed).unwrap();
        let c = g.frame_center();
        let mut ticks = Vec::new();
        for k in 0..60 {
            for s in sims.iter_mut() {
                let input = (k % 10 == 0).then(|| OperatorInput {
                    drag_target: Some(c + Vec3::new(0.001 * k as f64, 0.0, 0.0)),
                    gimbal_targets: None,
                    pedal: k >= 10,
                    timestamp: k as f64 * 0.005,
                    mode: None,
                });
                ticks.push(s.step(input.as_ref()));
            }
        }
        TrajectoryRecord { header, ticks }
    }

    #[test]
    fn text_round_trip_is_identical() {
        let r = recorded(5, 1e-3);
        let text = r.to_text();
        let back = TrajectoryRecord::parse(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back, r);
    }

    #[test]
    fn replay_reproduces_bytes() {
        let r = recorded(5, 1e-3);
        let out = replay(&r, None).unwrap();
        assert!(out.comparable && out.identical);
        assert_eq!(out.record.to_text(), r.to_text());
    }

    #[test]
    fn replay_with_other_seed_differs_and_is_flagged() {
        let r = recorded(5, 1e-3);
        let out = replay(&r, Some(6)).unwrap();
        assert!(!out.comparable);
        assert!(!out.identical);
        assert_ne!(out.record.to_text(), r.to_text());
    }

    #[test]
    fn truncated_file_reports_line() {
        let text = recorded(5, 0.0).to_text();
        let lines: Vec<&str> = text.lines().collect();
        let mut cut = lines[..10].join("\n");
        cut.push('\n');
        cut.push_str(&lines[10][..lines[10].len() / 2]);
        match TrajectoryRecord::parse(&cut) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(TrajectoryRecord::parse(""), Err(Error::Parse { line: 1, .. })));
    }
}
