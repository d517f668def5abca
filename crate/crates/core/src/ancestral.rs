//! The ancestral (dual) process started from a point, and its half-plane
//! hitting times.
//!
//! The process sits at its starting point until an event ellipse covers it;
//! from then on it is a union of ellipses that absorbs every event
//! overlapping it with positive area. Its hitting time of `{x' >= x}` is the
//! first time the largest abscissa of the union, its reach, is at least `x`.
//!
//! ```
//! use slfv::ancestral::{hit_halfplane, SimOptions};
//! use slfv::events::ShapeLaw;
//!
//! let law = ShapeLaw::unit_ball();
//! let hit = hit_halfplane(&law, 5.0, 7, &SimOptions::default()).unwrap();
//! assert!(hit.tau > 0.0 && hit.jumps > 0);
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, EventStream, ShapeLaw};
use crate::geometry::{Point, Rect};
use crate::region::{Absorbed, Primitive, Union};
use crate::stats::{self, Estimate, LinearFit};

/// Tuning of event generation and the runaway guard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Length of the time slabs events are generated in.
    pub slab: f64,
    /// Window growth margin, in units of `r_max`.
    pub margin: f64,
    /// Largest number of accepted jumps per trajectory.
    pub budget: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            slab: 1.0,
            margin: 8.0,
            budget: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Still the starting point.
    Point,
    /// A union of at least one ellipse or seed.
    Region,
}

/// State of the dual process.
#[derive(Debug, Clone)]
pub struct AncestralState {
    origin: Point,
    phase: Phase,
    union: Union,
    time: f64,
}

impl AncestralState {
    pub fn point(origin: Point, r_max: f64) -> Self {
        AncestralState {
            origin,
            phase: Phase::Point,
            union: Union::new(r_max),
            time: 0.0,
        }
    }

    /// A dual started from a region of positive area.
    pub fn region(seeds: Vec<Primitive>, r_max: f64) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::domain("a region start needs at least one primitive"));
        }
        let origin = seeds[0].bbox().min;
        Ok(AncestralState {
            origin,
            phase: Phase::Region,
            union: Union::with_seeds(seeds, r_max),
            time: 0.0,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Largest abscissa of the current set.
    pub fn reach(&self) -> f64 {
        match self.phase {
            Phase::Point => self.origin.x,
            Phase::Region => self.union.reach(),
        }
    }

    pub fn union(&self) -> &Union {
        &self.union
    }

    pub fn absorbed(&self) -> &[Absorbed] {
        self.union.absorbed()
    }

    /// Whether `p` belongs to the current set.
    pub fn contains(&self, p: Point) -> bool {
        match self.phase {
            Phase::Point => p == self.origin,
            Phase::Region => self.union.contains(p),
        }
    }

    /// Box outside of which no event of radius `r_max` can touch the set.
    pub fn influence_box(&self, r_max: f64) -> Rect {
        match (self.phase, self.union.bounds()) {
            (Phase::Region, Some(b)) => b.dilate(r_max),
            _ => Rect::around(self.origin, r_max),
        }
    }

    /// Applies one event and reports whether the set grew.
    pub fn apply_event(&mut self, ev: &Event) -> Result<bool> {
        if ev.time < self.time {
            return Err(Error::contract(format!(
                "event at time {} arrived after time {}",
                ev.time, self.time
            )));
        }
        self.time = ev.time;
        let e = ev.ellipse();
        let accepted = match self.phase {
            Phase::Point => e.contains(self.origin),
            Phase::Region => self.union.overlaps(&e),
        };
        if accepted {
            self.phase = Phase::Region;
            self.union.push(ev.time, e);
        }
        Ok(accepted)
    }
}

pub fn apply_event(state: &mut AncestralState, ev: &Event) -> Result<bool> {
    state.apply_event(ev)
}

/// Outcome of one consumed event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub event: Event,
    pub accepted: bool,
}

/// A dual process together with the event stream driving it.
#[derive(Debug, Clone)]
pub struct AncestralSim {
    state: AncestralState,
    stream: EventStream<ChaCha8Rng>,
    options: SimOptions,
    r_max: f64,
    jumps: u64,
}

impl AncestralSim {
    pub fn new(law: &ShapeLaw, origin: Point, seed: u64, options: SimOptions) -> Result<Self> {
        Self::from_state(law, AncestralState::point(origin, law.r_max()), seed, options)
    }

    pub fn from_region(law: &ShapeLaw, seeds: Vec<Primitive>, seed: u64, options: SimOptions) -> Result<Self> {
        Self::from_state(law, AncestralState::region(seeds, law.r_max())?, seed, options)
    }

    fn from_state(law: &ShapeLaw, state: AncestralState, seed: u64, options: SimOptions) -> Result<Self> {
        if !(options.margin >= 0.0) {
            return Err(Error::domain("window margin must be non-negative"));
        }
        let r_max = law.r_max();
        let window = state.influence_box(r_max).dilate(options.margin * r_max);
        let stream = EventStream::new(
            law.clone(),
            window,
            0.0,
            options.slab,
            ChaCha8Rng::seed_from_u64(seed),
        )?;
        Ok(AncestralSim {
            state,
            stream,
            options,
            r_max,
            jumps: 0,
        })
    }

    pub fn state(&self) -> &AncestralState {
        &self.state
    }

    pub fn window(&self) -> Rect {
        self.stream.window()
    }

    pub fn stream(&self) -> &EventStream<ChaCha8Rng> {
        &self.stream
    }

    pub fn jumps(&self) -> u64 {
        self.jumps
    }

    pub fn reach(&self) -> f64 {
        self.state.reach()
    }

    /// Consumes the next event.
    pub fn step(&mut self) -> Result<Step> {
        let event = self.stream.next_event();
        let accepted = self.state.apply_event(&event)?;
        if accepted {
            self.after_jump()?;
        }
        Ok(Step { event, accepted })
    }

    /// Consumes the next event strictly before `t_end`, if any.
    pub fn step_before(&mut self, t_end: f64) -> Result<Option<Step>> {
        let Some(event) = self.stream.next_event_before(t_end) else {
            return Ok(None);
        };
        let accepted = self.state.apply_event(&event)?;
        if accepted {
            self.after_jump()?;
        }
        Ok(Some(Step { event, accepted }))
    }

    fn after_jump(&mut self) -> Result<()> {
        self.jumps += 1;
        if self.jumps > self.options.budget {
            return Err(Error::Budget {
                cap: self.options.budget,
            });
        }
        let needed = self.state.influence_box(self.r_max);
        if !self.stream.window().contains_rect(&needed) {
            self.stream
                .expand_to(&needed.dilate(self.options.margin * self.r_max));
        }
        Ok(())
    }

    /// Runs until the reach is at least `x` and returns that time.
    pub fn run_until_reach(&mut self, x: f64) -> Result<f64> {
        while self.state.reach() < x {
            self.step()?;
        }
        Ok(self.state.time())
    }

    /// Runs all events before `t_end`.
    pub fn run_until(&mut self, t_end: f64) -> Result<()> {
        while self.step_before(t_end)?.is_some() {}
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub tau: f64,
    pub jumps: u64,
}

/// First time the dual from the origin reaches `{x' >= x}`.
pub fn hit_halfplane(law: &ShapeLaw, x: f64, seed: u64, options: &SimOptions) -> Result<Hit> {
    if !(x > 0.0) {
        return Err(Error::domain(format!("hitting abscissa must be positive, got {x}")));
    }
    let mut sim = AncestralSim::new(law, Point::ORIGIN, seed, *options)?;
    let tau = sim.run_until_reach(x)?;
    Ok(Hit {
        tau,
        jumps: sim.jumps(),
    })
}

/// Hitting times of every abscissa in `xs` along one trajectory.
pub fn hit_times(law: &ShapeLaw, xs: &[f64], seed: u64, options: &SimOptions) -> Result<Vec<f64>> {
    if xs.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::domain("hitting abscissae must be positive"));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut sim = AncestralSim::new(law, Point::ORIGIN, seed, *options)?;
    let mut out = vec![0.0; xs.len()];
    for i in order {
        out[i] = sim.run_until_reach(xs[i])?;
    }
    Ok(out)
}

/// Mean hitting time at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub x: f64,
    pub mean: f64,
    pub ci95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// Fitted time per unit length.
    pub nu: f64,
    /// `1 / nu`.
    pub speed: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: Vec<PointEstimate>,
}

/// Fits mean hitting time against `x` over `reps` independent trajectories.
/// Replica `i` uses seed `replica_seed(seed, tag("speed"), i)`.
pub fn estimate_speed(
    law: &ShapeLaw,
    xs: &[f64],
    reps: usize,
    seed: u64,
    workers: usize,
    options: &SimOptions,
) -> Result<SpeedEstimate> {
    let tag = stats::stream_tag("speed");
    let runs = stats::map_replicas(reps, workers, |i| {
        hit_times(law, xs, stats::replica_seed(seed, tag, i as u64), options)
    })?;
    speed_from_runs(xs, &runs)
}

/// Builds a [`SpeedEstimate`] from per-replica hitting times.
pub fn speed_from_runs(xs: &[f64], runs: &[Vec<f64>]) -> Result<SpeedEstimate> {
    let points = xs
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let col: Vec<f64> = runs.iter().map(|r| r[k]).collect();
            let Estimate { mean, ci95, .. } = stats::estimate(&col)?;
            Ok(PointEstimate { x, mean, ci95 })
        })
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let LinearFit { slope, intercept, r2 } = stats::ols(xs, &means)?;
    Ok(SpeedEstimate {
        nu: slope,
        speed: 1.0 / slope,
        intercept,
        r2,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::{poisson_window, Atom};
    use crate::geometry::{Ellipse, Shape};

    fn unit_event(t: f64, x: f64, y: f64) -> Event {
        Event {
            time: t,
            center: Point::new(x, y),
            shape: Shape::new(1.0, 1.0, 0.0).unwrap(),
        }
    }

    #[test]
    fn apply_event_examples() {
        let mut s = AncestralState::point(Point::ORIGIN, 1.0);
        assert!(!s.apply_event(&unit_event(0.1, 5.0, 0.0)).unwrap());
        assert_eq!(s.phase(), Phase::Point);
        assert_eq!(s.reach(), 0.0);
        assert!(s.apply_event(&unit_event(0.2, 0.5, 0.0)).unwrap());
        assert_eq!(s.phase(), Phase::Region);
        assert!((s.reach() - 1.5).abs() < 1e-15);

        let mut s = AncestralState::point(Point::ORIGIN, 1.0);
        s.apply_event(&unit_event(0.0, 0.0, 0.0)).unwrap();
        let next = unit_event(1.0, 1.9, 0.0);
        assert!(Ellipse::disk(Point::ORIGIN, 1.0)
            .unwrap()
            .intersects_positively(&next.ellipse()));
        assert!(s.apply_event(&next).unwrap());
        assert_eq!(s.absorbed().len(), 2);
        assert!((s.reach() - 2.9).abs() < 1e-12);
        assert!(matches!(
            s.apply_event(&unit_event(0.5, 0.0, 0.0)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn hit_requires_positive_abscissa() {
        assert!(hit_halfplane(&ShapeLaw::unit_ball(), 0.0, 1, &SimOptions::default()).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let opts = SimOptions {
            budget: 5,
            ..SimOptions::default()
        };
        let err = hit_halfplane(&ShapeLaw::unit_ball(), 50.0, 1, &opts).unwrap_err();
        assert!(matches!(err, Error::Budget { cap: 5 }));
    }

    #[test]
    fn small_abscissa_hits_quickly_on_average() {
        let law = ShapeLaw::unit_ball();
        let taus: Vec<f64> = (0..1000)
            .map(|i| hit_halfplane(&law, 0.5, 100 + i, &SimOptions::default()).unwrap().tau)
            .collect();
        let e = stats::estimate(&taus).unwrap();
        assert!(e.mean >= 0.5 && e.mean <= 3.0, "mean {}", e.mean);
    }

    #[test]
    fn first_covering_time_is_unit_exponential() {
        let law = ShapeLaw::unit_ball();
        let taus: Vec<f64> = (0..4000)
            .map(|i| hit_halfplane(&law, 1e-9, 5000 + i, &SimOptions::default()).unwrap().tau)
            .collect();
        let e = stats::estimate(&taus).unwrap();
        assert!((e.mean - 1.0).abs() < 1.5 * e.ci95, "mean {} ci {}", e.mean, e.ci95);
    }

    #[test]
    fn hitting_times_are_monotone_on_each_trajectory() {
        let law = ShapeLaw::unit_ball();
        for i in 0..100 {
            let t = hit_times(&law, &[10.0, 5.0], i, &SimOptions::default()).unwrap();
            assert!(t[1] <= t[0]);
        }
    }

    #[test]
    fn trajectories_are_deterministic() {
        let law = ShapeLaw::unit_rate(1.5, 0.5, 0.4).unwrap();
        let run = || {
            let mut sim = AncestralSim::new(&law, Point::ORIGIN, 99, SimOptions::default()).unwrap();
            sim.run_until_reach(8.0).unwrap();
            let mut buf = Vec::new();
            crate::region::write_trajectory(&mut buf, sim.state().absorbed()).unwrap();
            buf
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn audit_window_exactness_and_growth() {
        let law = ShapeLaw::new(vec![
            Atom::unit_rate(1.2, 0.4, 0.6).unwrap(),
            Atom::unit_rate(0.5, 0.5, 0.0).unwrap(),
        ])
        .unwrap();
        let r = law.r_max();
        for seed in 0..10 {
            let mut sim = AncestralSim::new(&law, Point::ORIGIN, seed, SimOptions::default()).unwrap();
            let mut reach = sim.reach();
            let mut count = 0;
            while sim.reach() < 12.0 {
                let influence = sim.state().influence_box(r);
                assert!(sim.window().contains_rect(&influence));
                let before = sim.state().union().clone();
                let was_point = sim.state().phase() == Phase::Point;
                let step = sim.step().unwrap();
                let e = step.event.ellipse();
                if !sim.window().contains(step.event.center) {
                    assert!(!influence.contains(step.event.center));
                }
                if step.accepted {
                    if was_point {
                        assert!(e.contains(Point::ORIGIN));
                    } else {
                        assert!(before.overlaps_brute_force(&e));
                    }
                    count += 1;
                } else if !was_point {
                    assert!(!before.overlaps_brute_force(&e));
                }
                assert!(sim.reach() >= reach);
                reach = sim.reach();
            }
            assert_eq!(sim.state().absorbed().len(), count);
        }
    }

    /// Oracle: the same dynamics driven by one huge static window generated
    /// up front.
    fn static_window_hit(law: &ShapeLaw, x: f64, seed: u64) -> f64 {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let window = Rect::new(-25.0, -25.0, 25.0, 25.0).unwrap();
        let mut state = AncestralState::point(Point::ORIGIN, law.r_max());
        let mut t0 = 0.0;
        loop {
            for ev in poisson_window(&window, t0, t0 + 1.0, law, &mut rng).unwrap() {
                state.apply_event(&ev).unwrap();
                if state.reach() >= x {
                    return ev.time;
                }
            }
            t0 += 1.0;
        }
    }

    #[test]
    fn lazy_window_matches_static_window_in_distribution() {
        let law = ShapeLaw::unit_ball();
        let n = 400;
        let lazy: Vec<f64> = (0..n)
            .map(|i| hit_halfplane(&law, 6.0, i, &SimOptions::default()).unwrap().tau)
            .collect();
        let fixed: Vec<f64> = (0..n).map(|i| static_window_hit(&law, 6.0, 10_000 + i)).collect();
        let (a, b) = (stats::estimate(&lazy).unwrap(), stats::estimate(&fixed).unwrap());
        let z = (a.mean - b.mean) / (a.stderr().powi(2) + b.stderr().powi(2)).sqrt();
        assert!(z.abs() < 3.5, "lazy {} static {}", a.mean, b.mean);
    }

    #[test]
    fn region_start_includes_seeds() {
        let law = ShapeLaw::unit_ball();
        let seed = Primitive::Rect(Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap());
        let mut sim = AncestralSim::from_region(&law, vec![seed], 3, SimOptions::default()).unwrap();
        assert_eq!(sim.reach(), 1.0);
        sim.run_until(1.0).unwrap();
        assert!(sim.state().contains(Point::ORIGIN));
        assert!(sim.state().time() < 1.0);
    }

    #[test]
    fn speed_fit_from_synthetic_runs() {
        let xs = [1.0, 2.0, 3.0];
        let runs = vec![vec![0.5, 1.0, 1.5], vec![0.7, 1.2, 1.7]];
        let est = speed_from_runs(&xs, &runs).unwrap();
        assert!((est.nu - 0.5).abs() < 1e-12);
        assert!((est.speed - 2.0).abs() < 1e-12);
        assert!(speed_from_runs(&[1.0, 1.0], &[vec![1.0, 2.0], vec![1.0, 2.0]]).is_err());
    }
}
