//! Shape laws and the Poisson stream of reproduction events.
//!
//! Events arrive as a Poisson point process on time x plane x shapes with
//! intensity `dt dz mu(da, db, dgamma)`, where `mu` is a finite atomic law.
//! [`EventStream`] delivers that process in time order on a window that can
//! grow while the stream is being consumed.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ellipse, Point, Rect, Shape};

/// One point mass of a shape law: events of this shape hit each unit of area
/// at rate `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub shape: Shape,
}

impl Atom {
    pub fn new(weight: f64, a: f64, b: f64, gamma: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::domain(format!("atom weight must be positive, got {weight}")));
        }
        Ok(Atom {
            weight,
            shape: Shape::new(a, b, gamma)?,
        })
    }

    /// Atom whose events cover any fixed point at rate 1.
    pub fn unit_rate(a: f64, b: f64, gamma: f64) -> Result<Self> {
        Self::new(1.0 / (std::f64::consts::PI * a * b), a, b, gamma)
    }
}

/// A finite mixture of shape atoms.
#[derive(Debug, Clone)]
pub struct ShapeLaw {
    atoms: Vec<Atom>,
    total_mass: f64,
    r_max: f64,
    by_weight: Option<WeightedIndex<f64>>,
    by_area: Option<WeightedIndex<f64>>,
}

impl PartialEq for ShapeLaw {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
    }
}

impl ShapeLaw {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("a shape law needs at least one atom"));
        }
        for atom in &atoms {
            Atom::new(atom.weight, atom.shape.a, atom.shape.b, atom.shape.gamma)?;
        }
        let total_mass = atoms.iter().map(|a| a.weight).sum();
        let r_max = atoms.iter().map(|a| a.shape.radius()).fold(0.0, f64::max);
        let (by_weight, by_area) = if atoms.len() > 1 {
            let w = WeightedIndex::new(atoms.iter().map(|a| a.weight))
                .map_err(|e| Error::domain(e.to_string()))?;
            let v = WeightedIndex::new(atoms.iter().map(|a| a.weight * a.shape.area()))
                .map_err(|e| Error::domain(e.to_string()))?;
            (Some(w), Some(v))
        } else {
            (None, None)
        };
        Ok(ShapeLaw {
            atoms,
            total_mass,
            r_max,
            by_weight,
            by_area,
        })
    }

    /// Single shape covering each point at rate 1.
    ///
    /// ```
    /// let law = slfv::events::ShapeLaw::unit_rate(2.0, 0.5, 0.0).unwrap();
    /// assert!((law.jump_mass() - 1.0).abs() < 1e-12);
    /// assert_eq!(law.r_max(), 2.0);
    /// ```
    pub fn unit_rate(a: f64, b: f64, gamma: f64) -> Result<Self> {
        Self::new(vec![Atom::unit_rate(a, b, gamma)?])
    }

    /// Radius-1 balls at unit covering rate.
    pub fn unit_ball() -> Self {
        Self::unit_rate(1.0, 1.0, 0.0).expect("valid shape")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Events per unit area per unit time.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Smallest radius bounding every atom.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Reflection through the vertical axis: every tilt is negated.
    pub fn mirror(&self) -> ShapeLaw {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                weight: a.weight,
                shape: a.shape.mirrored(),
            })
            .collect();
        ShapeLaw::new(atoms).expect("mirroring preserves validity")
    }

    /// Rate at which a fixed point is covered by some event.
    pub fn jump_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.shape.area()).sum()
    }

    /// Mean horizontal reach of the event covering a fixed point, that is
    /// weighted by `weight * area`.
    pub fn mean_extreme_offset(&self) -> f64 {
        let j = self.jump_mass();
        self.atoms
            .iter()
            .map(|a| a.weight * a.shape.area() / j * a.shape.reach())
            .sum()
    }

    /// Same event intensity with every shape replaced by the ball of radius
    /// `r_max`.
    pub fn covering_balls(&self) -> ShapeLaw {
        let r = self.r_max;
        ShapeLaw::new(vec![Atom {
            weight: self.total_mass,
            shape: Shape { a: r, b: r, gamma: 0.0 },
        }])
        .expect("valid ball law")
    }

    /// Draws a shape with probability proportional to its weight.
    pub fn sample_shape<R: Rng + ?Sized>(&self, rng: &mut R) -> Shape {
        match &self.by_weight {
            Some(w) => self.atoms[w.sample(rng)].shape,
            None => self.atoms[0].shape,
        }
    }

    /// Draws a shape with probability proportional to `weight * area`.
    pub fn sample_shape_area_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> Shape {
        match &self.by_area {
            Some(w) => self.atoms[w.sample(rng)].shape,
            None => self.atoms[0].shape,
        }
    }
}

pub fn mirror(law: &ShapeLaw) -> ShapeLaw {
    law.mirror()
}

pub fn jump_mass(law: &ShapeLaw) -> f64 {
    law.jump_mass()
}

pub fn mean_extreme_offset(law: &ShapeLaw) -> f64 {
    law.mean_extreme_offset()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub center: Point,
    pub shape: Shape,
}

impl Event {
    pub fn ellipse(&self) -> Ellipse {
        Ellipse::from_shape(self.center, self.shape)
    }
}

/// Events of the driving Poisson process in `rect x [t0, t1)`, sorted by time.
pub fn poisson_window<R: Rng + ?Sized>(
    rect: &Rect,
    t0: f64,
    t1: f64,
    law: &ShapeLaw,
    rng: &mut R,
) -> Result<Vec<Event>> {
    if !(t1 >= t0) {
        return Err(Error::domain(format!("window end {t1} precedes start {t0}")));
    }
    let mut out = Vec::new();
    append_events(rect, t0, t1, law, rng, &mut out);
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(out)
}

fn append_events<R: Rng + ?Sized>(
    rect: &Rect,
    t0: f64,
    t1: f64,
    law: &ShapeLaw,
    rng: &mut R,
    out: &mut Vec<Event>,
) {
    let mean = law.total_mass() * rect.area() * (t1 - t0);
    if !(mean > 0.0) {
        return;
    }
    let count = Poisson::new(mean).expect("finite positive mean").sample(rng) as usize;
    out.reserve(count);
    for _ in 0..count {
        let time = t0 + (t1 - t0) * rng.random::<f64>();
        let center = rect.sample_uniform(rng);
        let shape = law.sample_shape(rng);
        out.push(Event { time, center, shape });
    }
}

/// A recorded enlargement of an [`EventStream`] window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expansion {
    /// Time of the last delivered event when the window grew.
    pub time: f64,
    pub before: Rect,
    pub after: Rect,
}

/// Time-ordered events on a window that only grows.
///
/// Events are generated one time slab at a time. When the window grows at
/// time `t`, events in the added area are generated for the part of the
/// current slab after `t` only; earlier ones never existed as far as the
/// consumer is concerned. That is exact for a consumer that keeps the window
/// more than one event radius away from everything those events could touch.
#[derive(Debug, Clone)]
pub struct EventStream<R> {
    law: ShapeLaw,
    rng: R,
    window: Rect,
    slab: f64,
    slab_end: f64,
    now: f64,
    /// Pending events of the current slab, latest first.
    pending: Vec<Event>,
    expansions: Vec<Expansion>,
}

impl<R: Rng> EventStream<R> {
    pub fn new(law: ShapeLaw, window: Rect, start: f64, slab: f64, rng: R) -> Result<Self> {
        if !(slab > 0.0 && slab.is_finite()) {
            return Err(Error::domain(format!("time slab must be positive, got {slab}")));
        }
        if !(window.area() > 0.0) {
            return Err(Error::domain("event window must have positive area"));
        }
        Ok(EventStream {
            law,
            rng,
            window,
            slab,
            slab_end: start,
            now: start,
            pending: Vec::new(),
            expansions: Vec::new(),
        })
    }

    pub fn law(&self) -> &ShapeLaw {
        &self.law
    }

    pub fn window(&self) -> Rect {
        self.window
    }

    /// Time of the most recently delivered event, or the start time.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn expansions(&self) -> &[Expansion] {
        &self.expansions
    }

    /// Next event in time order. The stream never ends.
    pub fn next_event(&mut self) -> Event {
        loop {
            if let Some(ev) = self.pending.pop() {
                self.now = ev.time;
                return ev;
            }
            let t0 = self.slab_end;
            self.slab_end = t0 + self.slab;
            append_events(&self.window, t0, self.slab_end, &self.law, &mut self.rng, &mut self.pending);
            self.sort_pending();
        }
    }

    /// Next event strictly before `t_end`, leaving later events pending.
    pub fn next_event_before(&mut self, t_end: f64) -> Option<Event> {
        loop {
            if let Some(ev) = self.pending.last() {
                if ev.time >= t_end {
                    return None;
                }
                return Some(self.next_event());
            }
            if self.slab_end >= t_end {
                return None;
            }
            let t0 = self.slab_end;
            self.slab_end = t0 + self.slab;
            append_events(&self.window, t0, self.slab_end, &self.law, &mut self.rng, &mut self.pending);
            self.sort_pending();
        }
    }

    /// Grows the window to cover `target`, with the added area only carrying
    /// events later than [`EventStream::now`].
    pub fn expand_to(&mut self, target: &Rect) {
        if self.window.contains_rect(target) {
            return;
        }
        let old = self.window;
        let new = old.union(target);
        for piece in ring_pieces(&old, &new) {
            if self.slab_end > self.now {
                append_events(&piece, self.now, self.slab_end, &self.law, &mut self.rng, &mut self.pending);
            }
        }
        self.sort_pending();
        self.window = new;
        self.expansions.push(Expansion {
            time: self.now,
            before: old,
            after: new,
        });
    }

    fn sort_pending(&mut self) {
        self.pending.sort_by(|a, b| b.time.total_cmp(&a.time));
    }
}

/// Disjoint rectangles tiling `new` minus `old`, for `old` inside `new`.
fn ring_pieces(old: &Rect, new: &Rect) -> Vec<Rect> {
    let mut out = Vec::with_capacity(4);
    let mut push = |x0: f64, y0: f64, x1: f64, y1: f64| {
        if x1 > x0 && y1 > y0 {
            out.push(Rect {
                min: Point::new(x0, y0),
                max: Point::new(x1, y1),
            });
        }
    };
    push(new.min.x, new.min.y, old.min.x, new.max.y);
    push(old.max.x, new.min.y, new.max.x, new.max.y);
    push(old.min.x, new.min.y, old.max.x, old.min.y);
    push(old.min.x, old.max.y, old.max.x, new.max.y);
    out
}
