//! Growing unions of ellipses and seed primitives.
//!
//! Both the dual and the forward process keep a set that only grows by
//! absorbing event ellipses that overlap it with positive area. [`Union`]
//! stores seed primitives in a list and absorbed ellipses in a uniform
//! spatial hash keyed by ellipse centre, with cell side `2 r_max`. Two
//! ellipses of radius at most `r_max` can only overlap when their centres
//! are within `2 r_max`, so the 3x3 block around the event centre holds
//! every candidate.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Ellipse, Point, Rect, Shape};

/// A seed region component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Rect(Rect),
    Ellipse(Ellipse),
}

impl Primitive {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            Primitive::Rect(r) => r.contains(p),
            Primitive::Ellipse(e) => e.contains(p),
        }
    }

    pub fn overlaps_ellipse(&self, e: &Ellipse) -> bool {
        match self {
            Primitive::Rect(r) => e.overlaps_rect(r),
            Primitive::Ellipse(s) => s.intersects_positively(e),
        }
    }

    pub fn overlaps(&self, other: &Primitive) -> bool {
        match (self, other) {
            (Primitive::Rect(a), Primitive::Rect(b)) => a.overlaps(b),
            (p, Primitive::Ellipse(e)) | (Primitive::Ellipse(e), p) => p.overlaps_ellipse(e),
        }
    }

    pub fn bbox(&self) -> Rect {
        match self {
            Primitive::Rect(r) => *r,
            Primitive::Ellipse(e) => e.bbox(),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Primitive::Rect(r) => r.area(),
            Primitive::Ellipse(e) => e.area(),
        }
    }

    pub fn max_x(&self) -> f64 {
        match self {
            Primitive::Rect(r) => r.max.x,
            Primitive::Ellipse(e) => e.max_x(),
        }
    }

    /// Parses `disk:x,y,r`, `ellipse:x,y,a,b,gamma` or `rect:x0,y0,x1,y1`.
    ///
    /// ```
    /// use slfv::region::Primitive;
    /// let p: Primitive = "disk:4,0,1".parse().unwrap();
    /// assert!(p.contains(slfv::geometry::Point::new(4.5, 0.0)));
    /// assert_eq!(p.to_string(), "ellipse:4,0,1,1,0");
    /// ```
    pub fn parse(s: &str) -> Result<Self> {
        s.parse()
    }
}

impl std::str::FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::domain(format!("region `{s}` lacks a `kind:` prefix")))?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::domain(format!("region `{s}`: {e}")))?;
        let want = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(Error::domain(format!("region `{s}` needs {n} numbers")))
            }
        };
        match kind.trim() {
            "disk" => {
                want(3)?;
                Ok(Primitive::Ellipse(Ellipse::disk(Point::new(nums[0], nums[1]), nums[2])?))
            }
            "ellipse" => {
                want(5)?;
                Ok(Primitive::Ellipse(Ellipse::new(
                    Point::new(nums[0], nums[1]),
                    nums[2],
                    nums[3],
                    nums[4],
                )?))
            }
            "rect" => {
                want(4)?;
                Ok(Primitive::Rect(Rect::new(nums[0], nums[1], nums[2], nums[3])?))
            }
            other => Err(Error::domain(format!("unknown region kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for Primitive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Primitive::Rect(r) => write!(f, "rect:{},{},{},{}", r.min.x, r.min.y, r.max.x, r.max.y),
            Primitive::Ellipse(e) => {
                let c = e.center();
                write!(f, "ellipse:{},{},{},{},{}", c.x, c.y, e.a(), e.b(), e.gamma())
            }
        }
    }
}

impl Serialize for Primitive {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Primitive {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An ellipse absorbed into a union, with the time it joined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorbed {
    pub time: f64,
    pub ellipse: Ellipse,
    /// Reach of the union right after this ellipse joined.
    pub reach: f64,
}

/// A union of seed primitives and absorbed ellipses.
#[derive(Debug, Clone)]
pub struct Union {
    seeds: Vec<Primitive>,
    absorbed: Vec<Absorbed>,
    cell: f64,
    hash: FxHashMap<(i64, i64), Vec<u32>>,
    bounds: Option<Rect>,
    reach: f64,
}

impl Union {
    /// An empty union for events of radius at most `r_max`.
    pub fn new(r_max: f64) -> Self {
        Union {
            seeds: Vec::new(),
            absorbed: Vec::new(),
            cell: 2.0 * r_max,
            hash: FxHashMap::default(),
            bounds: None,
            reach: f64::NEG_INFINITY,
        }
    }

    pub fn with_seeds(seeds: Vec<Primitive>, r_max: f64) -> Self {
        let mut u = Union::new(r_max);
        for s in &seeds {
            u.grow_bounds(s.bbox());
            u.reach = u.reach.max(s.max_x());
        }
        u.seeds = seeds;
        u
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty() && self.absorbed.is_empty()
    }

    pub fn seeds(&self) -> &[Primitive] {
        &self.seeds
    }

    pub fn absorbed(&self) -> &[Absorbed] {
        &self.absorbed
    }

    /// Largest abscissa attained by the union.
    pub fn reach(&self) -> f64 {
        self.reach
    }

    /// Box containing every seed and the bounding ball of every ellipse.
    pub fn bounds(&self) -> Option<Rect> {
        self.bounds
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn grow_bounds(&mut self, r: Rect) {
        self.bounds = Some(match self.bounds {
            Some(b) => b.union(&r),
            None => r,
        });
    }

    /// Whether `e` overlaps the union with positive area. `e` must have
    /// radius at most the `r_max` given at construction.
    pub fn overlaps(&self, e: &Ellipse) -> bool {
        if self.seeds.iter().any(|s| s.overlaps_ellipse(e)) {
            return true;
        }
        let (kx, ky) = self.key(e.center());
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.hash.get(&(kx + dx, ky + dy)) {
                    for &i in ids {
                        if self.absorbed[i as usize].ellipse.intersects_positively(e) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Same answer as [`Union::overlaps`] by exhaustive search, for audits.
    pub fn overlaps_brute_force(&self, e: &Ellipse) -> bool {
        self.seeds.iter().any(|s| s.overlaps_ellipse(e))
            || self.absorbed.iter().any(|a| a.ellipse.intersects_positively(e))
    }

    pub fn push(&mut self, time: f64, e: Ellipse) {
        let idx = self.absorbed.len() as u32;
        let key = self.key(e.center());
        self.hash.entry(key).or_default().push(idx);
        self.grow_bounds(e.ball_box());
        self.reach = self.reach.max(e.max_x());
        self.absorbed.push(Absorbed {
            time,
            ellipse: e,
            reach: self.reach,
        });
    }

    pub fn contains(&self, p: Point) -> bool {
        self.seeds.iter().any(|s| s.contains(p)) || self.absorbed.iter().any(|a| a.ellipse.contains(p))
    }

    /// Whether the union overlaps `region` with positive area.
    pub fn overlaps_region(&self, region: &[Primitive]) -> bool {
        region.iter().any(|r| {
            self.seeds.iter().any(|s| s.overlaps(r))
                || self.absorbed.iter().any(|a| r.overlaps_ellipse(&a.ellipse))
        })
    }

    /// Every primitive of the union: seeds first, then absorbed ellipses in
    /// order of arrival.
    pub fn primitives(&self) -> impl Iterator<Item = Primitive> + '_ {
        self.seeds
            .iter()
            .copied()
            .chain(self.absorbed.iter().map(|a| Primitive::Ellipse(a.ellipse)))
    }
}

/// CSV row of an accepted event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub reach: f64,
}

impl From<&Absorbed> for TrajectoryRow {
    fn from(a: &Absorbed) -> Self {
        let c = a.ellipse.center();
        let s: Shape = a.ellipse.shape();
        TrajectoryRow {
            t: a.time,
            center_x: c.x,
            center_y: c.y,
            a: s.a,
            b: s.b,
            gamma: s.gamma,
            reach: a.reach,
        }
    }
}

/// Writes one row per absorbed ellipse with columns
/// `t, center_x, center_y, a, b, gamma, reach`.
pub fn write_trajectory<W: std::io::Write>(out: W, rows: &[Absorbed]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(TrajectoryRow::from(row)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory`].
pub fn read_trajectory<R: std::io::Read>(input: R) -> Result<Vec<Absorbed>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<TrajectoryRow>()
        .map(|row| {
            let row = row.map_err(csv_error)?;
            Ok(Absorbed {
                time: row.t,
                ellipse: Ellipse::new(Point::new(row.center_x, row.center_y), row.a, row.b, row.gamma)?,
                reach: row.reach,
            })
        })
        .collect()
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::domain(format!("csv: {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["rect:-1,-2,0.5,3", "ellipse:1,2,0.5,0.25,0.3"] {
            let p = Primitive::parse(s).unwrap();
            assert_eq!(p.to_string(), s);
            assert_eq!(Primitive::parse(&p.to_string()).unwrap(), p);
        }
        assert!(Primitive::parse("disk:1,2").is_err());
        assert!(Primitive::parse("blob:1,2,3").is_err());
        assert!(Primitive::parse("rect:1,1,0,2").is_err());
    }

    #[test]
    fn hashed_overlap_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r_max = 0.8;
        let mut u = Union::with_seeds(vec![Primitive::Rect(Rect::new(-0.5, -3.0, 0.0, 3.0).unwrap())], r_max);
        let draw = |rng: &mut ChaCha8Rng| {
            Ellipse::new(
                Point::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)),
                rng.random_range(0.1..r_max),
                rng.random_range(0.1..r_max),
                rng.random_range(-1.5..1.5),
            )
            .unwrap()
        };
        for k in 0..5000 {
            let e = draw(&mut rng);
            let fast = u.overlaps(&e);
            assert_eq!(fast, u.overlaps_brute_force(&e));
            if fast {
                u.push(k as f64, e);
            }
        }
        assert!(u.absorbed().len() > 50);
        let b = u.bounds().unwrap();
        assert!(u.absorbed().iter().all(|a| b.contains_rect(&a.ellipse.ball_box())));
        assert!(u.absorbed().windows(2).all(|w| w[0].reach <= w[1].reach));
    }

    #[test]
    fn trajectory_csv_round_trips() {
        let mut u = Union::new(1.0);
        u.push(0.5, Ellipse::new(Point::new(0.25, -1.0), 1.0, 0.5, 0.1).unwrap());
        u.push(1.5, Ellipse::disk(Point::new(1.0, 0.0), 1.0).unwrap());
        let mut buf = Vec::new();
        write_trajectory(&mut buf, u.absorbed()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,center_x,center_y,a,b,gamma,reach\n"));
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].reach, u.absorbed()[1].reach);
        assert_eq!(back[0].ellipse.center(), u.absorbed()[0].ellipse.center());
    }
}
