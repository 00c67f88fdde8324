//! Trajectory files: line-delimited JSON.
//!
//! Line 1 is a header record with the config, initial opinions, and (for
//! BCM-G) the initial edge list; every following line is one interaction
//! event with fields `(step, participants, d, s_plus, s_minus, s_rewire)`.
//! Round-trips are bit-exact: floats are written in shortest round-trip
//! form and compared byte-for-byte in the determinism tests.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InteractionEvent, ModelConfig, Trajectory};
use crate::error::CoreError;
use crate::Result;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_edges: Option<Vec<(u32, u32)>>,
}

pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> Result<()> {
    let header = Header {
        config: traj.config.clone(),
        x0: traj.x0.clone(),
        initial_edges: traj.initial_edges.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for event in &traj.events {
        serde_json::to_writer(&mut w, event)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Trajectory> {
    let mut lines = BufReader::new(r).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| CoreError::Format("empty trajectory file".into()))??;
    let header: Header = serde_json::from_str(&header_line)
        .map_err(|e| CoreError::Format(format!("bad header record: {e}")))?;
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: InteractionEvent = serde_json::from_str(&line)
            .map_err(|e| CoreError::Format(format!("bad event record {}: {e}", i + 1)))?;
        events.push(event);
    }
    let mut last_step = 0;
    for e in &events {
        if e.step < last_step {
            return Err(CoreError::Format("event steps must be non-decreasing".into()));
        }
        last_step = e.step;
    }
    Ok(Trajectory {
        config: header.config,
        x0: header.x0,
        initial_edges: header.initial_edges,
        events,
    })
}

pub fn write_trajectory_file<P: AsRef<Path>>(path: P, traj: &Trajectory) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trajectory(std::io::BufWriter::new(file), traj)
}

pub fn read_trajectory_file<P: AsRef<Path>>(path: P) -> Result<Trajectory> {
    read_trajectory(std::fs::File::open(path)?)
}

/// Serialize to bytes; used by the determinism checks.
pub fn trajectory_bytes(traj: &Trajectory) -> Vec<u8> {
    let mut out = Vec::new();
    write_trajectory(&mut out, traj).expect("in-memory serialization cannot fail");
    out
}

#[cfg(test)]
mod tests {
    use super::super::{fixtures::small_instance, simulate, Variant};
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for variant in Variant::ALL {
            let (config, latents) = small_instance(variant, 123);
            let traj = simulate(&config, &latents).unwrap();
            let bytes = trajectory_bytes(&traj);
            let back = read_trajectory(&bytes[..]).unwrap();
            assert_eq!(back, traj, "{variant}: structural round-trip");
            assert_eq!(trajectory_bytes(&back), bytes, "{variant}: byte round-trip");
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_trajectory(&b""[..]).is_err());
        assert!(read_trajectory(&b"{\"not\": \"a header\"}\n"[..]).is_err());
    }
}
