//! Plain-text policy/value checkpoints.
//!
//! ```text
//! smoothrl-checkpoint 1
//! policy_layout <in>,<h1>,...,<out>
//! value_layout <in>,<h1>,...,1
//! log_std_bounds <min>,<max>
//! params <policy_len>,<value_len>
//! <one value per line: policy mean net, log_std, value net>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt_f64;

use super::mlp::{MlpLayout, MlpParams};
use super::policy::{GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};

const MAGIC: &str = "smoothrl-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub policy: GaussianPolicy,
    pub value: MlpParams,
}

fn layout_str(l: &MlpLayout) -> String {
    l.sizes().iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let policy = ckpt.policy.flat();
    let value = ckpt.value.flat();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "policy_layout {}", layout_str(ckpt.policy.mean_net.layout()));
    let _ = writeln!(out, "value_layout {}", layout_str(ckpt.value.layout()));
    let _ = writeln!(out, "log_std_bounds {},{}", fmt_f64(LOG_STD_MIN), fmt_f64(LOG_STD_MAX));
    let _ = writeln!(out, "params {},{}", policy.len(), value.len());
    for v in policy.iter().chain(value) {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let mut header = |n: usize, key: &str| -> Result<String> {
        let l = lines.next().ok_or_else(|| err(n, "unexpected end of file".into()))?;
        if key.is_empty() {
            return Ok(l.to_string());
        }
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| err(n, format!("expected `{key} ...`")))
    };
    if header(1, "")? != MAGIC {
        return Err(err(1, "not a smoothrl checkpoint".into()));
    }
    let parse_layout = |s: String, n: usize| -> Result<MlpLayout> {
        let sizes = s
            .split(',')
            .map(|x| x.parse::<usize>().map_err(|e| err(n, format!("layout: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        MlpLayout::new(sizes)
    };
    let policy_layout = parse_layout(header(2, "policy_layout")?, 2)?;
    let value_layout = parse_layout(header(3, "value_layout")?, 3)?;
    let bounds = header(4, "log_std_bounds")?;
    let expected_bounds = format!("{},{}", fmt_f64(LOG_STD_MIN), fmt_f64(LOG_STD_MAX));
    if bounds != expected_bounds {
        return Err(err(4, format!("log_std bounds {bounds} differ from {expected_bounds}")));
    }
    let counts = header(5, "params")?;
    let (pl, vl) = counts
        .split_once(',')
        .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
        .ok_or_else(|| err(5, "params: expected `<policy_len>,<value_len>`".into()))?;
    let values = lines
        .enumerate()
        .map(|(i, l)| l.parse::<f64>().map_err(|e| err(i + 6, format!("{e}"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != pl + vl {
        return Err(err(6 + values.len(), format!("expected {} values, found {}", pl + vl, values.len())));
    }
    let mean_len = policy_layout.param_len();
    if pl != mean_len + policy_layout.out_dim() {
        return Err(err(5, "policy parameter count does not match its layout".into()));
    }
    let mean_net = MlpParams::from_flat(policy_layout, values[..mean_len].to_vec())?;
    let policy = GaussianPolicy::new(mean_net, values[mean_len..pl].to_vec())?;
    let value = MlpParams::from_flat(value_layout, values[pl..].to_vec())?;
    Ok(Checkpoint { policy, value })
}
