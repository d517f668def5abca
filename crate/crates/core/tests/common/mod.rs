#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use slfv::harness::{ExperimentConfig, Kind};

/// Mean first return time to equal heights of the two-column process,
/// from a direct linear solve of the hitting-time equations of the height
/// difference, truncated at difference `cap` (reflected there):
///
/// `h_d = 1/(d+2) + (h_{d+1} + 2 h_{d-1} + sum_{j <= d-2} h_j) / (d+2)`,
/// `h_0 = 0`, and the answer is `1/2 + h_1`.
pub fn return_time_oracle(cap: usize) -> f64 {
    // Unknowns h_1..h_cap; row for d reads
    // (d+2) h_d - h_{d+1} - 2 h_{d-1} - sum_{j=1}^{d-2} h_j = 1.
    let n = cap;
    let mut m = vec![vec![0.0f64; n + 1]; n];
    for d in 1..=cap {
        let r = &mut m[d - 1];
        r[d - 1] += (d + 2) as f64;
        let up = if d < cap { d + 1 } else { d };
        r[up - 1] -= 1.0;
        if d >= 2 {
            r[d - 2] -= 2.0;
        }
        for j in 1..d.saturating_sub(1) {
            r[j - 1] -= 1.0;
        }
        r[n] = 1.0;
    }
    // Gaussian elimination with partial pivoting.
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                if f != 0.0 {
                    for k in c..=n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    0.5 + m[0][n] / m[0][0]
}

/// Every CSV file in `dir`, sorted by name, with its bytes.
pub fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

/// The recipes checked into the repository, by file stem.
pub fn recipes() -> Vec<(String, ExperimentConfig)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../recipes");
    let mut v: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let cfg = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, cfg)
        })
        .collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

/// Same recipe at test size.
pub fn shrink(mut c: ExperimentConfig) -> ExperimentConfig {
    c.reps = c.reps.min(12);
    c.a_values.truncate(2);
    c.n_values.truncate(2);
    c.xs = c.xs.iter().map(|x| x / 4.0).collect();
    if c.kind == Kind::Express {
        c.t_end = 200.0;
    }
    if c.kind == Kind::ForwardFrames {
        c.t_end = 2.0;
        c.frames = vec![1.0, 2.0];
    }
    if c.kind == Kind::TwocolExact {
        c.schedule = vec![8, 16];
    }
    c
}

