use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::envs::{make_env, EnvParams};
use crate::error::Result;
use crate::fmt_f64;
use crate::metrics::{report, SmoothnessReport};
use crate::trajectory::load_trajectory;

/// Reloads trajectory files and recomputes their smoothness statistics.
pub fn recompute_metrics<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<(PathBuf, SmoothnessReport)>> {
    let defaults = EnvParams::default();
    paths
        .iter()
        .map(|p| {
            let traj = load_trajectory(p)?;
            // equipment channels depend only on the env id
            let env = make_env(&traj.env_id, &defaults)?;
            Ok((p.as_ref().to_path_buf(), report(&traj, env.spec(), None)?))
        })
        .collect()
}

pub fn metrics_csv(rows: &[(PathBuf, SmoothnessReport)]) -> String {
    let mut s = String::from("file,jerk_std,total_variation,switching_count,episode_return_raw,episode_return_shaped\n");
    for (path, r) in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            path.display(),
            fmt_f64(r.jerk_std),
            fmt_f64(r.total_variation),
            r.switching_count,
            fmt_f64(r.episode_return_raw),
            fmt_f64(r.episode_return_shaped)
        );
    }
    s
}
