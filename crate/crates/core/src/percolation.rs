//! First-passage percolation on the 8-neighbour lattice, the cell
//! discretisation of the unit-ball dual, and the domination suite linking
//! them.
//!
//! Edge passage times are i.i.d. `Exp(16/pi)`. Cell `(i, j)` is the square
//! `[4i - 1, 4i + 1] x [4j - 1, 4j + 1]`. A unit ball meets a cell with
//! positive area iff its centre is at distance less than 1 from the square,
//! and it can do so for at most one cell outside a null set of centres.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::ancestral::{AncestralSim, SimOptions};
use crate::error::{Error, Result};
use crate::events::ShapeLaw;
use crate::geometry::{Point, Rect};
use crate::region::Absorbed;
use crate::stats::{self, Estimate};

/// Rate of the edge passage times.
pub const EDGE_RATE: f64 = 16.0 / PI;

/// Strip half-height used when none is given.
pub fn default_half_height(n: usize) -> usize {
    2 * n + 8
}

/// Order in which a vertex's neighbours are relaxed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relaxation {
    Forward,
    Reverse,
}

/// Neighbour offsets: right, up, up-right, down-right, then their opposites.
const OFFSETS: [(i64, i64); 8] = [(1, 0), (0, 1), (1, 1), (1, -1), (-1, 0), (0, -1), (-1, -1), (-1, 1)];

/// Passage times on the strip `[0, n] x [-h, h]` of the 8-neighbour lattice.
///
/// Each vertex owns its four edges towards right, up, up-right and
/// down-right. Column `i` draws its weights from its own generator, visiting
/// rows in the order `0, 1, -1, 2, -2, ...`, so a strip with a larger `h`
/// extends a smaller one with identical weights.
#[derive(Debug, Clone)]
pub struct LatticeFPP {
    n: usize,
    h: usize,
    weights: Vec<[f64; 4]>,
}

impl LatticeFPP {
    pub fn new(n: usize, h: usize, seed: u64) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("lattice width must be at least 1"));
        }
        let rows = 2 * h + 1;
        let mut weights = vec![[0.0; 4]; (n + 1) * rows];
        let exp = Exp::new(EDGE_RATE).expect("positive rate");
        let tag = stats::stream_tag("fpp-column");
        for i in 0..=n {
            let mut rng = ChaCha8Rng::seed_from_u64(stats::replica_seed(seed, tag, i as u64));
            for k in 0..rows {
                let j = if k % 2 == 0 { -((k / 2) as i64) } else { (k / 2 + 1) as i64 };
                let idx = i * rows + (j + h as i64) as usize;
                for w in &mut weights[idx] {
                    *w = exp.sample(&mut rng);
                }
            }
        }
        Ok(LatticeFPP { n, h, weights })
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn half_height(&self) -> usize {
        self.h
    }

    fn rows(&self) -> usize {
        2 * self.h + 1
    }

    fn index(&self, i: i64, j: i64) -> Option<usize> {
        let h = self.h as i64;
        if i < 0 || i > self.n as i64 || j < -h || j > h {
            return None;
        }
        Some(i as usize * self.rows() + (j + h) as usize)
    }

    fn coords(&self, idx: usize) -> (i64, i64) {
        let rows = self.rows();
        ((idx / rows) as i64, (idx % rows) as i64 - self.h as i64)
    }

    /// Passage time of the edge between `(i, j)` and `(i + di, j + dj)`.
    pub fn edge(&self, i: i64, j: i64, di: i64, dj: i64) -> Option<f64> {
        let (owner, slot) = match (di, dj) {
            (1, 0) => ((i, j), 0),
            (0, 1) => ((i, j), 1),
            (1, 1) => ((i, j), 2),
            (1, -1) => ((i, j), 3),
            (-1, 0) => ((i - 1, j), 0),
            (0, -1) => ((i, j - 1), 1),
            (-1, -1) => ((i - 1, j - 1), 2),
            (-1, 1) => ((i - 1, j + 1), 3),
            _ => return None,
        };
        self.index(i + di, j + dj)?;
        let idx = self.index(owner.0, owner.1)?;
        Some(self.weights[idx][slot])
    }

    /// Dijkstra from `(0, 0)`. With `stop_at_column`, returns as soon as a
    /// vertex of that column is settled.
    fn dijkstra(&self, order: Relaxation, stop_at_column: Option<i64>) -> (Vec<f64>, Option<f64>) {
        let mut dist = vec![f64::INFINITY; self.weights.len()];
        let mut done = vec![false; self.weights.len()];
        let start = self.index(0, 0).expect("origin in strip");
        dist[start] = 0.0;
        // Non-negative floats order like their bit patterns.
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0.0_f64.to_bits(), start)));
        while let Some(Reverse((bits, v))) = heap.pop() {
            if done[v] {
                continue;
            }
            done[v] = true;
            let d = f64::from_bits(bits);
            let (i, j) = self.coords(v);
            if stop_at_column == Some(i) {
                return (dist, Some(d));
            }
            for k in 0..8 {
                let (di, dj) = match order {
                    Relaxation::Forward => OFFSETS[k],
                    Relaxation::Reverse => OFFSETS[7 - k],
                };
                let Some(w) = self.edge(i, j, di, dj) else { continue };
                let u = self.index(i + di, j + dj).expect("edge endpoint in strip");
                let nd = d + w;
                if nd < dist[u] {
                    dist[u] = nd;
                    heap.push(Reverse((nd.to_bits(), u)));
                }
            }
        }
        (dist, None)
    }

    /// First-passage times from `(0, 0)` to every vertex, indexed by
    /// `(i, j)` in column-major order with `j` from `-h` to `h`.
    pub fn distances(&self, order: Relaxation) -> Vec<f64> {
        self.dijkstra(order, None).0
    }

    pub fn distance(&self, dist: &[f64], i: i64, j: i64) -> Option<f64> {
        self.index(i, j).map(|k| dist[k])
    }

    /// First-passage time from `(0, 0)` to column `n`.
    pub fn hit_last_column(&self) -> f64 {
        self.dijkstra(Relaxation::Forward, Some(self.n as i64))
            .1
            .expect("strip is connected")
    }
}

/// First-passage time from `(0, 0)` to column `n` on the strip of half-height `h`.
///
/// ```
/// let t = slfv::percolation::fpp_hit(3, 14, 1).unwrap();
/// assert!(t > 0.0);
/// ```
pub fn fpp_hit(n: usize, h: usize, seed: u64) -> Result<f64> {
    Ok(LatticeFPP::new(n, h, seed)?.hit_last_column())
}

/// [`fpp_hit`] with the default half-height; also reports whether doubling
/// the strip (same weights on the shared part) changes the answer.
pub fn fpp_hit_checked(n: usize, seed: u64) -> Result<(f64, bool)> {
    let h = default_half_height(n);
    let base = fpp_hit(n, h, seed)?;
    let wide = fpp_hit(n, 2 * h, seed)?;
    Ok((base, base == wide))
}

/// The square of cell `(i, j)`.
pub fn cell(i: i64, j: i64) -> Rect {
    let (cx, cy) = (4.0 * i as f64, 4.0 * j as f64);
    Rect {
        min: Point::new(cx - 1.0, cy - 1.0),
        max: Point::new(cx + 1.0, cy + 1.0),
    }
}

/// Cells met with positive area by the unit ball centred at `z`.
pub fn cells_hit(z: Point) -> Vec<(i64, i64)> {
    let (ci, cj) = ((z.x / 4.0).round() as i64, (z.y / 4.0).round() as i64);
    let mut out = Vec::new();
    for i in ci - 1..=ci + 1 {
        for j in cj - 1..=cj + 1 {
            if cell(i, j).distance_to(z) < 1.0 {
                out.push((i, j));
            }
        }
    }
    out
}

/// First activation time and triggering event of each active cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellActivation {
    pub cells: BTreeMap<(i64, i64), Activation>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub time: f64,
    /// Index of the activating event in the trace.
    pub event: usize,
}

impl CellActivation {
    /// First time a cell of column `n` is active.
    pub fn column_time(&self, n: i64) -> Option<f64> {
        self.cells
            .iter()
            .filter(|((i, _), _)| *i == n)
            .map(|(_, a)| a.time)
            .min_by(f64::total_cmp)
    }
}

/// Activation times of the cells met by a trace of unit-ball events.
pub fn discretize_trace(trace: &[Absorbed]) -> Result<CellActivation> {
    let mut act = CellActivation::default();
    for (k, ev) in trace.iter().enumerate() {
        let e = ev.ellipse;
        if e.a() != 1.0 || e.b() != 1.0 {
            return Err(Error::contract("cell discretisation needs unit balls"));
        }
        let hit = cells_hit(e.center());
        if hit.len() > 1 {
            return Err(Error::contract(format!(
                "ball at ({}, {}) meets {} cells",
                e.center().x,
                e.center().y,
                hit.len()
            )));
        }
        if let Some(&c) = hit.first() {
            act.cells.entry(c).or_insert(Activation {
                time: ev.time,
                event: k,
            });
        }
    }
    Ok(act)
}

/// Coupled hitting times of one unit-ball dual trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledCells {
    pub tau_discr: f64,
    pub tau_4n: f64,
}

/// Runs the unit-ball dual until its reach is at least `4n + 1` and returns
/// the cell hitting time of column `n` alongside the hitting time of `4n`.
pub fn coupled_discretization(n: usize, seed: u64, options: &SimOptions) -> Result<(CoupledCells, CellActivation, Vec<Absorbed>)> {
    if n < 1 {
        return Err(Error::domain("column index must be at least 1"));
    }
    let law = ShapeLaw::unit_ball();
    let target = 4.0 * n as f64;
    let mut sim = AncestralSim::new(&law, Point::ORIGIN, seed, *options)?;
    let tau_4n = sim.run_until_reach(target)?;
    sim.run_until_reach(target + 1.0)?;
    let trace = sim.state().absorbed().to_vec();
    let act = discretize_trace(&trace)?;
    let tau_discr = act
        .column_time(n as i64)
        .ok_or_else(|| Error::contract(format!("column {n} never activated")))?;
    Ok((CoupledCells { tau_discr, tau_4n }, act, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationRow {
    pub n: usize,
    pub fpp: Estimate,
    pub discr: Estimate,
    pub tau_4n: Estimate,
    /// Paired differences `tau_4n - tau_discr` of the coupled runs.
    pub gap: Estimate,
    /// Replicas with `tau_discr <= tau_4n`.
    pub pointwise: usize,
    pub reps: usize,
}

impl DominationRow {
    /// Whether the mean ordering `fpp <= discr <= tau_4n` holds.
    pub fn ordered(&self) -> bool {
        self.fpp.mean <= self.discr.mean && self.discr.mean <= self.tau_4n.mean
    }

    /// Whether both inequalities are significant at one-sided level 5%: the
    /// independent lattice and discretised means have disjoint one-sided
    /// intervals, and the paired gap of the coupled runs has a positive lower
    /// bound.
    pub fn separated(&self) -> bool {
        let z = 1.645;
        self.fpp.mean + z * self.fpp.stderr() < self.discr.mean - z * self.discr.stderr()
            && self.gap.mean - z * self.gap.stderr() > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub rows: Vec<DominationRow>,
}

impl DominationReport {
    /// CSV with columns `n, mean_fpp, ci_fpp, mean_discr, ci_discr,
    /// mean_tau4n, ci_tau4n`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "mean_fpp", "ci_fpp", "mean_discr", "ci_discr", "mean_tau4n", "ci_tau4n"])
            .map_err(crate::region::csv_error)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.fpp.mean.to_string(),
                r.fpp.ci95.to_string(),
                r.discr.mean.to_string(),
                r.discr.ci95.to_string(),
                r.tau_4n.mean.to_string(),
                r.tau_4n.ci95.to_string(),
            ])
            .map_err(crate::region::csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Independent lattice hitting times and coupled dual/discretised hitting
/// times for every `n`.
pub fn domination_suite(n_values: &[usize], reps: usize, seed: u64, workers: usize, options: &SimOptions) -> Result<DominationReport> {
    let fpp_tag = stats::stream_tag("domination-fpp");
    let dual_tag = stats::stream_tag("domination-dual");
    let rows = n_values
        .iter()
        .map(|&n| {
            let fpp = stats::map_replicas(reps, workers, |i| {
                fpp_hit(n, default_half_height(n), stats::replica_seed(seed ^ n as u64, fpp_tag, i as u64))
            })?;
            let coupled = stats::map_replicas(reps, workers, |i| {
                coupled_discretization(n, stats::replica_seed(seed ^ n as u64, dual_tag, i as u64), options).map(|c| c.0)
            })?;
            let discr: Vec<f64> = coupled.iter().map(|c| c.tau_discr).collect();
            let tau: Vec<f64> = coupled.iter().map(|c| c.tau_4n).collect();
            let gap: Vec<f64> = coupled.iter().map(|c| c.tau_4n - c.tau_discr).collect();
            Ok(DominationRow {
                n,
                fpp: stats::estimate(&fpp)?,
                discr: stats::estimate(&discr)?,
                tau_4n: stats::estimate(&tau)?,
                gap: stats::estimate(&gap)?,
                pointwise: coupled.iter().filter(|c| c.tau_discr <= c.tau_4n).count(),
                reps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DominationReport { rows })
}
