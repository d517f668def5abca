//! The express chain: a single point that, each time an event covers it,
//! jumps to the rightmost point of that event's ellipse.
//!
//! It always stays inside the dual process, so its horizontal speed
//! `J * E[D]` bounds the dual's speed from below. Here `J` is the rate at
//! which a fixed point is covered and `D` is the horizontal reach of the
//! covering ellipse.
//!
//! Standalone runs use the law of the next covering event directly. Events
//! covering `p` arrive at rate `J`, with shape drawn proportionally to
//! `weight * area` and centre uniform on the set of centres `z` whose
//! ellipse contains `p`. By central symmetry `p - z` lies in the ellipse
//! centred at the origin iff `z - p` does. That set is therefore the same
//! ellipse translated to `p`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::ancestral::{AncestralSim, SimOptions};
use crate::error::{Error, Result};
use crate::events::ShapeLaw;
use crate::geometry::{Ellipse, Point};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExpressState {
    pub position: Point,
    pub time: f64,
    pub jump_count: u64,
}

/// The event that triggered an express jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trigger {
    pub ellipse: Ellipse,
}

/// Advances the chain by one covering event.
pub fn express_jump<R: Rng + ?Sized>(state: &ExpressState, law: &ShapeLaw, rng: &mut R) -> (ExpressState, Trigger) {
    let clock = Exp::new(law.jump_mass()).expect("positive jump mass");
    let time = state.time + clock.sample(rng);
    let shape = law.sample_shape_area_biased(rng);
    let center = state.position + Ellipse::from_shape(Point::ORIGIN, shape).sample_uniform(rng);
    let ellipse = Ellipse::from_shape(center, shape);
    let next = ExpressState {
        position: ellipse.extreme_point(),
        time,
        jump_count: state.jump_count + 1,
    };
    (next, Trigger { ellipse })
}

/// `J * E[D]`, the express chain's horizontal speed.
///
/// ```
/// let law = slfv::events::ShapeLaw::unit_rate(3.0, 1.0 / 3.0, 0.0).unwrap();
/// assert!((slfv::express::lower_bound_speed(&law) - 3.0).abs() < 1e-12);
/// ```
pub fn lower_bound_speed(law: &ShapeLaw) -> f64 {
    law.jump_mass() * law.mean_extreme_offset()
}

/// First jump time with abscissa at least `x`; zero when `x <= 0`.
pub fn express_hit(law: &ShapeLaw, x: f64, seed: u64, budget: u64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ExpressState::default();
    while s.position.x < x {
        s = express_jump(&s, law, &mut rng).0;
        if s.jump_count > budget {
            return Err(Error::Budget { cap: budget });
        }
    }
    Ok(s.time)
}

/// `X_t / t` for one standalone trajectory.
pub fn long_run_speed(law: &ShapeLaw, horizon: f64, seed: u64) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ExpressState::default();
    loop {
        let (next, _) = express_jump(&s, law, &mut rng);
        if next.time > horizon {
            return Ok(s.position.x / horizon);
        }
        s = next;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledHit {
    pub dual_tau: f64,
    pub express_tau: f64,
    pub express_jumps: u64,
}

/// Runs the express chain on the dual's own event stream until both have
/// reached abscissa `x`. Every event covering the express position must be
/// absorbed by the dual; a violation is a contract error.
pub fn coupled_hit(law: &ShapeLaw, x: f64, seed: u64, options: &SimOptions) -> Result<CoupledHit> {
    if !(x > 0.0) {
        return Err(Error::domain("hitting abscissa must be positive"));
    }
    let mut sim = AncestralSim::new(law, Point::ORIGIN, seed, *options)?;
    let mut express = ExpressState::default();
    let mut dual_tau = None;
    while express.position.x < x {
        let step = sim.step()?;
        if dual_tau.is_none() && sim.reach() >= x {
            dual_tau = Some(step.event.time);
        }
        let e = step.event.ellipse();
        if e.contains(express.position) {
            if !step.accepted {
                return Err(Error::contract(format!(
                    "event at time {} covers the express chain but not the dual",
                    step.event.time
                )));
            }
            express = ExpressState {
                position: e.extreme_point(),
                time: step.event.time,
                jump_count: express.jump_count + 1,
            };
        }
    }
    let express_tau = express.time;
    let dual_tau = dual_tau.unwrap_or(express_tau);
    Ok(CoupledHit {
        dual_tau,
        express_tau,
        express_jumps: express.jump_count,
    })
}
