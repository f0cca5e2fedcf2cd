//! Line-delimited trajectory files.
//!
//! ```text
//! <env_id>,<penalty_order>,<lambda>,<seed>
//! <state,...>|<action,...>|<env_reward>|<shaped_reward>|<penalty>|<done>
//! ...
//! ```
//!
//! Reals are written with 17 significant digits so `f64` values survive a
//! round-trip bit-for-bit. `done` is `true` or `false`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::types::{ActionVector, EnvState, Trajectory, Transition};

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

/// Writes `traj` to `path`, refusing trajectories with non-finite numbers.
pub fn save_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    traj.validate()?;
    for (i, t) in traj.transitions.iter().enumerate() {
        let all_finite = t.state.iter().chain(t.action.iter()).all(|v| v.is_finite())
            && [t.env_reward, t.shaped_reward, t.penalty]
                .iter()
                .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::invalid(format!(
                "transition {i} contains a non-finite value; refusing to write {}",
                path.display()
            )));
        }
    }
    if !traj.lambda.is_finite() {
        return Err(Error::invalid("non-finite lambda"));
    }

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(
            w,
            "{},{},{},{}",
            traj.env_id,
            traj.penalty_order,
            fmt_f64(traj.lambda),
            traj.seed
        )?;
        for t in &traj.transitions {
            writeln!(
                w,
                "{}|{}|{}|{}|{}|{}",
                join(&t.state),
                join(&t.action),
                fmt_f64(t.env_reward),
                fmt_f64(t.shaped_reward),
                fmt_f64(t.penalty),
                t.done
            )?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a trajectory file written by [`save_trajectory`].
pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(parse_err(1, "missing header line".into())),
    };
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 4 {
        return Err(parse_err(
            1,
            format!("header needs 4 fields (env_id,penalty_order,lambda,seed), got {}", fields.len()),
        ));
    }
    let env_id = fields[0].to_string();
    let penalty_order: u8 = fields[1]
        .parse()
        .map_err(|e| parse_err(1, format!("penalty_order: {e}")))?;
    let lambda: f64 = fields[2]
        .parse()
        .map_err(|e| parse_err(1, format!("lambda: {e}")))?;
    let seed: u64 = fields[3]
        .parse()
        .map_err(|e| parse_err(1, format!("seed: {e}")))?;

    let mut transitions = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let t = parse_transition(&line).map_err(|m| parse_err(lineno, m))?;
        transitions.push(t);
    }

    let traj = Trajectory {
        transitions,
        seed,
        env_id,
        penalty_order,
        lambda,
    };
    traj.validate()?;
    Ok(traj)
}

fn parse_section(section: &str, name: &str) -> Result<Vec<f64>, String> {
    if section.is_empty() {
        return Ok(Vec::new());
    }
    section
        .split(',')
        .map(|s| s.parse::<f64>().map_err(|e| format!("{name}: {e} ({s:?})")))
        .collect()
}

fn parse_scalar(section: &str, name: &str) -> Result<f64, String> {
    section
        .parse::<f64>()
        .map_err(|e| format!("{name}: {e} ({section:?})"))
}

fn parse_transition(line: &str) -> Result<Transition, String> {
    let sections: Vec<&str> = line.split('|').collect();
    if sections.len() != 6 {
        return Err(format!("expected 6 '|'-separated sections, got {}", sections.len()));
    }
    let state = parse_section(sections[0], "state")?;
    let action = parse_section(sections[1], "action")?;
    let env_reward = parse_scalar(sections[2], "env_reward")?;
    let shaped_reward = parse_scalar(sections[3], "shaped_reward")?;
    let penalty = parse_scalar(sections[4], "penalty")?;
    let done = match sections[5] {
        "true" | "1" => true,
        "false" | "0" => false,
        other => return Err(format!("done: expected true/false, got {other:?}")),
    };
    Ok(Transition {
        state: EnvState::new(state).map_err(|e| e.to_string())?,
        action: ActionVector::new(action).map_err(|e| e.to_string())?,
        env_reward,
        shaped_reward,
        penalty,
        done,
    })
}
