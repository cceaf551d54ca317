//! Trajectory export.
//!
//! CSV: header `n,winner,x_1..x_A,chi_1..chi_A`, one row per step
//! `n = 1..steps`, winners 1-based. Embedding export inserts `t_n` after `n`.
//!
//! Binary (little-endian):
//!
//! ```text
//! magic    4 bytes  "PURN"
//! version  u16      1
//! A        u16
//! A times  u32 byte length, UTF-8 feedback text
//! A times  u64 initial count
//! horizon  u64
//! seed     u64
//! n        u64      number of winners
//! n times  u16      0-based winner index
//! ```

use std::io::{Read, Write};

use super::{EmbeddingTrajectory, Trajectory, UrnConfig};
use crate::error::{Result, UrnError};
use crate::feedback::parse_feedback;

const MAGIC: &[u8; 4] = b"PURN";
const VERSION: u16 = 1;

fn header(a: usize, with_time: bool) -> String {
    let mut h = String::from("n");
    if with_time {
        h.push_str(",t_n");
    }
    h.push_str(",winner");
    for i in 1..=a {
        h.push_str(&format!(",x_{i}"));
    }
    for i in 1..=a {
        h.push_str(&format!(",chi_{i}"));
    }
    h
}

fn write_rows<W: Write>(out: &mut W, traj: &Trajectory, times: Option<&[f64]>) -> Result<()> {
    let a = traj.config.agents();
    writeln!(out, "{}", header(a, times.is_some()))?;
    let mut c = traj.config.initial_counts.clone();
    let mut total: u64 = c.iter().sum();
    for (n, w) in traj.winners.iter().enumerate() {
        c[*w as usize] += 1;
        total += 1;
        let mut line = format!("{}", n + 1);
        if let Some(t) = times {
            line.push_str(&format!(",{}", t[n]));
        }
        line.push_str(&format!(",{}", w + 1));
        for x in &c {
            line.push_str(&format!(",{x}"));
        }
        for x in &c {
            line.push_str(&format!(",{}", *x as f64 / total as f64));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(out: &mut W, traj: &Trajectory) -> Result<()> {
    write_rows(out, traj, None)
}

pub fn write_embedding_csv<W: Write>(out: &mut W, emb: &EmbeddingTrajectory) -> Result<()> {
    write_rows(out, &emb.to_trajectory(), Some(&emb.jump_times))
}

pub fn write_binary<W: Write>(out: &mut W, traj: &Trajectory) -> Result<()> {
    let c = &traj.config;
    let a = u16::try_from(c.agents()).map_err(|_| UrnError::Format("too many agents".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&a.to_le_bytes())?;
    for f in &c.feedbacks {
        let text = f.label.as_bytes();
        out.write_all(&(text.len() as u32).to_le_bytes())?;
        out.write_all(text)?;
    }
    for x in &c.initial_counts {
        out.write_all(&x.to_le_bytes())?;
    }
    out.write_all(&c.horizon.to_le_bytes())?;
    out.write_all(&c.seed.to_le_bytes())?;
    out.write_all(&(traj.winners.len() as u64).to_le_bytes())?;
    for w in &traj.winners {
        out.write_all(&(*w as u16).to_le_bytes())?;
    }
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| UrnError::Format(format!("truncated input: {e}")))?;
    Ok(b)
}

pub fn read_binary<R: Read>(r: &mut R) -> Result<Trajectory> {
    if &read_exact::<_, 4>(r)? != MAGIC {
        return Err(UrnError::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_exact(r)?);
    if version != VERSION {
        return Err(UrnError::Format(format!("unsupported version {version}")));
    }
    let a = u16::from_le_bytes(read_exact(r)?) as usize;
    let mut feedbacks = Vec::with_capacity(a);
    for _ in 0..a {
        let len = u32::from_le_bytes(read_exact(r)?) as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)
            .map_err(|e| UrnError::Format(format!("truncated input: {e}")))?;
        let text = String::from_utf8(buf).map_err(|e| UrnError::Format(e.to_string()))?;
        feedbacks.push(parse_feedback(&text)?);
    }
    let mut initial_counts = Vec::with_capacity(a);
    for _ in 0..a {
        initial_counts.push(u64::from_le_bytes(read_exact(r)?));
    }
    let horizon = u64::from_le_bytes(read_exact(r)?);
    let seed = u64::from_le_bytes(read_exact(r)?);
    let n = u64::from_le_bytes(read_exact(r)?);
    let mut winners = Vec::with_capacity(n.min(1 << 24) as usize);
    for _ in 0..n {
        let w = u16::from_le_bytes(read_exact(r)?) as u32;
        if w as usize >= a {
            return Err(UrnError::Format(format!("winner {w} out of range")));
        }
        winners.push(w);
    }
    let config = UrnConfig {
        feedbacks,
        initial_counts,
        horizon,
        seed,
    };
    config.validate().map_err(|e| UrnError::Format(e.to_string()))?;
    Ok(Trajectory { config, winners })
}
