//! Trajectory dumps.
//!
//! The binary stream starts with the 8-byte magic `FTLTRAJ\0`, a
//! little-endian `u32` format version and a `u32` column count (3), followed
//! by rows of three little-endian `f64`: time, vehicle index, position.

use std::io::{self, Read, Write};

use super::observables::{branch_x, ObservableTrace};
use super::state::WindowState;

pub const TRAJECTORY_MAGIC: &[u8; 8] = b"FTLTRAJ\0";
pub const TRAJECTORY_VERSION: u32 = 1;

pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        out.write_all(TRAJECTORY_MAGIC)?;
        out.write_all(&TRAJECTORY_VERSION.to_le_bytes())?;
        out.write_all(&3u32.to_le_bytes())?;
        Ok(Self { out })
    }

    pub fn write_state(&mut self, state: &WindowState) -> io::Result<()> {
        for (j, &u) in state.positions.iter().enumerate() {
            let i = (state.lo + j as i64) as f64;
            for v in [state.t, i, u] {
                self.out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads a binary trajectory back into `(t, i, U)` rows.
pub fn read_trajectory<R: Read>(mut input: R) -> io::Result<Vec<[f64; 3]>> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut head = [0u8; 16];
    input.read_exact(&mut head)?;
    if &head[..8] != TRAJECTORY_MAGIC {
        return Err(bad("not a trajectory stream"));
    }
    let version = u32::from_le_bytes(head[8..12].try_into().unwrap());
    let cols = u32::from_le_bytes(head[12..16].try_into().unwrap());
    if version != TRAJECTORY_VERSION || cols != 3 {
        return Err(bad("unsupported trajectory version"));
    }
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() % 24 != 0 {
        return Err(bad("truncated trajectory row"));
    }
    Ok(body
        .chunks_exact(24)
        .map(|row| {
            let f = |k: usize| f64::from_le_bytes(row[8 * k..8 * k + 8].try_into().unwrap());
            [f(0), f(1), f(2)]
        })
        .collect())
}

/// Positions as CSV rows `time,index,value`.
pub fn write_positions_csv<W: Write>(out: &mut W, states: &[WindowState]) -> io::Result<()> {
    writeln!(out, "time,index,value")?;
    for s in states {
        for (j, u) in s.positions.iter().enumerate() {
            writeln!(out, "{},{},{}", s.t, s.lo + j as i64, u)?;
        }
    }
    Ok(())
}

/// Scaled counts as CSV rows `time,road,x,value`.
pub fn write_nu_csv<W: Write>(out: &mut W, trace: &ObservableTrace) -> io::Result<()> {
    writeln!(out, "time,road,x,value")?;
    for f in &trace.frames {
        for (k, row) in f.nu.iter().enumerate() {
            for (d, v) in trace.distances.iter().zip(row) {
                writeln!(out, "{},{},{},{}", f.t, k, branch_x(k, *d), v)?;
            }
        }
    }
    Ok(())
}
