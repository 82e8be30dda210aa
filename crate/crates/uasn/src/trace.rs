//! Line-delimited JSON episode traces.
//!
//! A trace file holds one or more episodes. Each episode is a `header` line
//! followed by one `slot` line per simulated slot.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use uasn_core::env::SlotRecord;
use uasn_core::rollout::{EpisodeTrace, TraceHeader};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TraceLine {
    Header {
        version: u32,
        config_hash: String,
        /// Training or evaluation episode number, when known.
        episode: Option<u64>,
        header: TraceHeader,
    },
    Slot(SlotRecord),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("line {line}: slot record before any header")]
    Orphan { line: usize },
    #[error("line {line}: unsupported trace version {version}")]
    Version { line: usize, version: u32 },
}

/// One parsed episode with the 1-indexed file line of every entry.
#[derive(Debug, Clone)]
pub struct LoggedEpisode {
    pub header_line: usize,
    pub config_hash: String,
    pub episode: Option<u64>,
    pub header: TraceHeader,
    pub slots: Vec<(usize, SlotRecord)>,
}

pub fn write_episode<W: Write>(w: &mut W, trace: &EpisodeTrace, config_hash: &str, episode: Option<u64>) -> std::io::Result<()> {
    let header =
        TraceLine::Header { version: TRACE_VERSION, config_hash: config_hash.to_owned(), episode, header: trace.header.clone() };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for r in &trace.records {
        serde_json::to_writer(&mut *w, &TraceLine::Slot(r.clone()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_episode(path: &Path, trace: &EpisodeTrace, config_hash: &str, episode: Option<u64>) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_episode(&mut w, trace, config_hash, episode)?;
    w.flush()
}

/// Parses every episode; blank lines are skipped.
pub fn read_episodes<R: BufRead>(reader: R) -> Result<Vec<LoggedEpisode>, TraceError> {
    let mut episodes: Vec<LoggedEpisode> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(&line).map_err(|source| TraceError::Parse { line: line_no, source })?;
        match parsed {
            TraceLine::Header { version, config_hash, episode, header } => {
                if version != TRACE_VERSION {
                    return Err(TraceError::Version { line: line_no, version });
                }
                episodes.push(LoggedEpisode { header_line: line_no, config_hash, episode, header, slots: Vec::new() });
            }
            TraceLine::Slot(record) => match episodes.last_mut() {
                Some(ep) => ep.slots.push((line_no, record)),
                None => return Err(TraceError::Orphan { line: line_no }),
            },
        }
    }
    Ok(episodes)
}

pub fn load_episodes(path: &Path) -> Result<Vec<LoggedEpisode>, TraceError> {
    read_episodes(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use uasn_core::baselines::RandomPower;
    use uasn_core::env::{Env, EnvConfig};
    use uasn_core::rollout::run_episode;

    #[test]
    fn round_trip() {
        let mut env = Env::new(EnvConfig::default()).unwrap();
        let trace = run_episode(&mut env, &mut RandomPower::new(), 3, true).unwrap().into_trace();
        let mut buf = Vec::new();
        write_episode(&mut buf, &trace, "abc", Some(4)).unwrap();
        write_episode(&mut buf, &trace, "abc", Some(5)).unwrap();
        let eps = read_episodes(buf.as_slice()).unwrap();
        assert_eq!(eps.len(), 2);
        assert_eq!(eps[1].episode, Some(5));
        assert_eq!(eps[0].header, trace.header);
        assert_eq!(eps[0].slots.len(), trace.records.len());
        assert_eq!(eps[0].slots[0].0, 2);
        let recs: Vec<SlotRecord> = eps[0].slots.iter().map(|(_, r)| r.clone()).collect();
        for (a, b) in recs.iter().zip(&trace.records) {
            assert_eq!(a.delivered, b.delivered);
            assert!((a.reward - b.reward).abs() <= 1e-12 * b.reward.abs().max(1.0));
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(read_episodes("\n{oops".as_bytes()), Err(TraceError::Parse { line: 2, .. })));
        assert!(read_episodes("".as_bytes()).unwrap().is_empty());
    }
}
