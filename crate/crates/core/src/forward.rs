//! The forward process from a bounded region, occupancy rasters and the
//! Monte Carlo check of the duality relation.
//!
//! Started from a set of positive finite area, the occupied region absorbs
//! every event ellipse that overlaps it with positive area, exactly like the
//! dual started from a region. The duality relation says that the
//! probability that the forward process from `A` misses `B` at time `t`
//! equals the probability that the dual from `B` misses `A` at time `t`.
//!
//! ```
//! use slfv::events::ShapeLaw;
//! use slfv::forward::forward_run;
//! use slfv::region::Primitive;
//!
//! let seed: Primitive = "rect:-1,-1,0,1".parse().unwrap();
//! let run = forward_run(vec![seed], &ShapeLaw::unit_ball(), 2.0, 5, &Default::default()).unwrap();
//! assert!(run.union().reach() >= 0.0);
//! ```

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ancestral::{AncestralSim, SimOptions};
use crate::error::{Error, Result};
use crate::events::ShapeLaw;
use crate::geometry::{Point, Rect};
use crate::region::{Primitive, Union};
use crate::stats;

/// The occupied region at a given time.
#[derive(Debug, Clone)]
pub struct ForwardState {
    sim: AncestralSim,
}

impl ForwardState {
    pub fn new(seeds: Vec<Primitive>, law: &ShapeLaw, seed: u64, options: &SimOptions) -> Result<Self> {
        if seeds.iter().any(|p| !(p.area() > 0.0)) {
            return Err(Error::domain("seed primitives need positive area"));
        }
        Ok(ForwardState {
            sim: AncestralSim::from_region(law, seeds, seed, *options)?,
        })
    }

    /// Applies every event before `t_end`.
    pub fn run_until(&mut self, t_end: f64) -> Result<()> {
        self.sim.run_until(t_end)
    }

    pub fn union(&self) -> &Union {
        self.sim.state().union()
    }

    pub fn time(&self) -> f64 {
        self.sim.state().time()
    }

    pub fn window(&self) -> Rect {
        self.sim.window()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.union().contains(p)
    }
}

/// Runs the forward process from `seeds` until `t_end`.
pub fn forward_run(seeds: Vec<Primitive>, law: &ShapeLaw, t_end: f64, seed: u64, options: &SimOptions) -> Result<ForwardState> {
    if !(t_end >= 0.0) {
        return Err(Error::domain("end time must be non-negative"));
    }
    let mut s = ForwardState::new(seeds, law, seed, options)?;
    s.run_until(t_end)?;
    Ok(s)
}

/// Largest occupied abscissa at time `t`, read off the absorption history.
pub fn reach_at(union: &Union, t: f64) -> f64 {
    let seeds = union.seeds().iter().map(Primitive::max_x).fold(f64::NEG_INFINITY, f64::max);
    let absorbed = union.absorbed();
    let k = absorbed.partition_point(|a| a.time <= t);
    if k == 0 {
        seeds
    } else {
        seeds.max(absorbed[k - 1].reach)
    }
}

/// Which law the dual runs under when the forward process uses `law`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DualConvention {
    /// The dual uses the forward law itself.
    #[default]
    Same,
    /// The dual uses the law with every tilt negated.
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    /// Fraction of forward runs from `A` that miss `B`.
    pub p_forward: f64,
    /// Fraction of dual runs from `B` that miss `A`.
    pub p_dual: f64,
    pub z: f64,
    pub reps: usize,
}

/// Estimates both sides of the duality relation with independent replicas.
#[allow(clippy::too_many_arguments)]
pub fn duality_check(
    a: &[Primitive],
    b: &[Primitive],
    law: &ShapeLaw,
    t: f64,
    reps: usize,
    seed: u64,
    convention: DualConvention,
    workers: usize,
    options: &SimOptions,
) -> Result<DualityReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("both regions need at least one primitive"));
    }
    if reps == 0 {
        return Err(Error::domain("need at least one replica"));
    }
    let dual_law = match convention {
        DualConvention::Same => law.clone(),
        DualConvention::Mirrored => law.mirror(),
    };
    let ftag = stats::stream_tag("duality-forward");
    let dtag = stats::stream_tag("duality-dual");
    let forward = stats::map_replicas(reps, workers, |i| {
        let s = forward_run(a.to_vec(), law, t, stats::replica_seed(seed, ftag, i as u64), options)?;
        Ok(!s.union().overlaps_region(b))
    })?;
    let dual = stats::map_replicas(reps, workers, |i| {
        let s = forward_run(b.to_vec(), &dual_law, t, stats::replica_seed(seed, dtag, i as u64), options)?;
        Ok(!s.union().overlaps_region(a))
    })?;
    let frac = |v: &[bool]| v.iter().filter(|&&x| x).count() as f64 / v.len() as f64;
    let (pf, pd) = (frac(&forward), frac(&dual));
    Ok(DualityReport {
        p_forward: pf,
        p_dual: pd,
        z: stats::two_proportion_z(pf, reps, pd, reps),
        reps,
    })
}

/// An 8-bit greyscale image; 0 is occupied, 255 is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn occupied(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 0).count()
    }

    /// Writes a binary portable graymap.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        out.write_all(&self.pixels)?;
        Ok(())
    }
}

/// Occupancy images of `union` at each time in `times`, over `view` at
/// `px_per_unit` pixels per unit length. A pixel is occupied iff its centre
/// lies in a seed or in an ellipse absorbed no later than the frame time.
pub fn render_frames(union: &Union, view: &Rect, px_per_unit: f64, times: &[f64]) -> Result<Vec<Raster>> {
    if !(px_per_unit > 0.0) {
        return Err(Error::domain("resolution must be positive"));
    }
    let width = (view.width() * px_per_unit).round() as usize;
    let height = (view.height() * px_per_unit).round() as usize;
    if width == 0 || height == 0 {
        return Err(Error::domain("view is smaller than one pixel"));
    }
    let px = |i: usize, j: usize| {
        Point::new(
            view.min.x + (i as f64 + 0.5) / px_per_unit,
            view.max.y - (j as f64 + 0.5) / px_per_unit,
        )
    };
    let paint = |img: &mut [u8], prim: &Primitive| {
        let bb = prim.bbox();
        let i0 = ((bb.min.x - view.min.x) * px_per_unit - 0.5).floor().max(0.0) as usize;
        let i1 = (((bb.max.x - view.min.x) * px_per_unit - 0.5).ceil().max(0.0) as usize).min(width - 1);
        let j0 = ((view.max.y - bb.max.y) * px_per_unit - 0.5).floor().max(0.0) as usize;
        let j1 = (((view.max.y - bb.min.y) * px_per_unit - 0.5).ceil().max(0.0) as usize).min(height - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                if prim.contains(px(i, j)) {
                    img[j * width + i] = 0;
                }
            }
        }
    };
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&x, &y| times[x].total_cmp(&times[y]));
    let mut img = vec![255u8; width * height];
    for s in union.seeds() {
        paint(&mut img, s);
    }
    let mut frames = vec![None; times.len()];
    let mut next = 0;
    let absorbed = union.absorbed();
    for k in order {
        while next < absorbed.len() && absorbed[next].time <= times[k] {
            paint(&mut img, &Primitive::Ellipse(absorbed[next].ellipse));
            next += 1;
        }
        frames[k] = Some(Raster {
            width,
            height,
            pixels: img.clone(),
        });
    }
    Ok(frames.into_iter().map(|f| f.expect("every frame rendered")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::Atom;
    use crate::geometry::Ellipse;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disk(x: f64, y: f64, r: f64) -> Primitive {
        Primitive::Ellipse(Ellipse::disk(Point::new(x, y), r).unwrap())
    }

    #[test]
    fn zero_time_keeps_the_seed() {
        let seeds = vec![disk(0.0, 0.0, 1.0)];
        let s = forward_run(seeds.clone(), &ShapeLaw::unit_ball(), 0.0, 1, &SimOptions::default()).unwrap();
        assert_eq!(s.union().seeds(), &seeds[..]);
        assert!(s.union().absorbed().is_empty());
    }

    #[test]
    fn coverage_is_monotone() {
        let law = ShapeLaw::unit_rate(1.0, 0.6, 0.4).unwrap();
        let seed = Primitive::Rect(Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap());
        let mut s = ForwardState::new(vec![seed], &law, 4, &SimOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probes: Vec<Point> = (0..500)
            .map(|_| Point::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)))
            .collect();
        let mut covered = vec![false; probes.len()];
        for t in [0.5, 1.0, 2.0, 3.0, 4.0] {
            s.run_until(t).unwrap();
            for (c, p) in covered.iter_mut().zip(&probes) {
                let now = s.contains(*p);
                assert!(now || !*c);
                *c = now;
            }
        }
        assert!(covered.iter().any(|&c| c));
    }

    #[test]
    fn front_of_tall_seed_moves_linearly() {
        let seed = Primitive::Rect(Rect::new(-1.0, -30.0, 0.0, 30.0).unwrap());
        let s = forward_run(vec![seed], &ShapeLaw::unit_ball(), 40.0, 2, &SimOptions::default()).unwrap();
        let ts: Vec<f64> = (5..=40).map(f64::from).collect();
        let xs: Vec<f64> = ts.iter().map(|&t| reach_at(s.union(), t)).collect();
        let fit = stats::ols(&ts, &xs).unwrap();
        assert!(fit.r2 >= 0.97 && fit.slope > 0.0, "{fit:?}");
    }

    #[test]
    fn forward_and_dual_from_region_coincide() {
        let law = ShapeLaw::unit_ball();
        let seeds = vec![disk(0.0, 0.0, 1.0)];
        let f = forward_run(seeds.clone(), &law, 3.0, 11, &SimOptions::default()).unwrap();
        let mut d = AncestralSim::from_region(&law, seeds, 11, SimOptions::default()).unwrap();
        d.run_until(3.0).unwrap();
        assert_eq!(f.union().absorbed(), d.state().absorbed());
    }

    #[test]
    fn trivial_duality_cases() {
        let law = ShapeLaw::unit_ball();
        let opts = SimOptions::default();
        let a = [disk(0.0, 0.0, 1.0)];
        let far = [disk(4.0, 0.0, 1.0)];
        let r = duality_check(&a, &far, &law, 0.0, 50, 1, DualConvention::Same, 1, &opts).unwrap();
        assert_eq!((r.p_forward, r.p_dual, r.z), (1.0, 1.0, 0.0));
        let near = [disk(1.5, 0.0, 1.0)];
        let r = duality_check(&a, &near, &law, 0.0, 50, 1, DualConvention::Same, 1, &opts).unwrap();
        assert_eq!((r.p_forward, r.p_dual), (0.0, 0.0));
    }

    #[test]
    fn duality_needs_the_same_law_for_tilted_shapes() {
        // Needles along the diagonal: B sits up and to the right of A.
        let law = ShapeLaw::new(vec![Atom::unit_rate(2.0, 0.25, std::f64::consts::FRAC_PI_4).unwrap()]).unwrap();
        let opts = SimOptions::default();
        let a = [disk(0.0, 0.0, 0.5)];
        let b = [disk(2.5, 2.5, 0.5)];
        let same = duality_check(&a, &b, &law, 1.0, 3000, 3, DualConvention::Same, 1, &opts).unwrap();
        let mirrored = duality_check(&a, &b, &law, 1.0, 3000, 3, DualConvention::Mirrored, 1, &opts).unwrap();
        assert!(same.z.abs() <= 3.0, "{same:?}");
        assert!(mirrored.z.abs() > 3.0, "{mirrored:?}");
        // With an untilted law both conventions coincide.
        let sym = ShapeLaw::unit_rate(2.0, 0.25, 0.0).unwrap();
        assert_eq!(sym.mirror(), sym);
    }

    #[test]
    fn empty_frame_is_white_and_disk_area_matches() {
        let view = Rect::new(-2.0, -2.0, 2.0, 2.0).unwrap();
        let empty = Union::new(1.0);
        let f = render_frames(&empty, &view, 10.0, &[0.0]).unwrap();
        assert_eq!(f[0].occupied(), 0);
        let one = Union::with_seeds(vec![disk(0.0, 0.0, 1.0)], 1.0);
        let f = render_frames(&one, &view, 100.0, &[0.0]).unwrap();
        let expected = std::f64::consts::PI * 100.0 * 100.0;
        assert!((f[0].occupied() as f64 / expected - 1.0).abs() < 0.01);
        let mut buf = Vec::new();
        f[0].write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n400 400\n255\n"));
        assert_eq!(buf.len(), 15 + 400 * 400);
    }

    #[test]
    fn frames_grow_monotonically() {
        let seed = Primitive::Rect(Rect::new(-1.0, -3.0, 0.0, 3.0).unwrap());
        let s = forward_run(vec![seed], &ShapeLaw::unit_ball(), 4.0, 9, &SimOptions::default()).unwrap();
        let view = Rect::new(-12.0, -12.0, 12.0, 12.0).unwrap();
        let frames = render_frames(s.union(), &view, 10.0, &[4.0, 1.0, 2.0, 3.0]).unwrap();
        let order = [1, 2, 3, 0];
        for w in order.windows(2) {
            let (a, b) = (&frames[w[0]], &frames[w[1]]);
            assert!(a.pixels.iter().zip(&b.pixels).all(|(&x, &y)| x == 255 || y == 0));
        }
        assert!(frames[0].occupied() > frames[1].occupied());
    }
}
