//! The two-column growth process and its discretisation.
//!
//! Two piles of cubes of heights `m <= M` grow as follows. From equal
//! heights one pile gains a cube at rate 2. With difference `d = M - m >= 1`
//! the higher pile gains a cube at rate 1, the lower one gains one cube at
//! rate 2, and for each `k` in `2..=d` it gains `k` cubes at rate 1. The
//! total rate is `d + 2`. `T` is the first return to equal heights and the
//! long-run growth speed is `E[M_T] / E[T] = 1 + 1 / (2 E[T])`.
//!
//! The difference chain, observed on a time grid of step `eps` and capped at
//! `N`, is a finite Markov chain whose invariant law has a closed form in
//! terms of an integer sequence `A_1..A_N`. That gives `E[T]` to high
//! accuracy:
//!
//! ```
//! let t = slfv::twocolumn::limit_return_time(40).unwrap();
//! assert!((t - 1.0759).abs() < 1e-4);
//! ```

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Heights of the two piles and the current time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwoColumnState {
    pub m: u64,
    #[serde(rename = "M")]
    pub big_m: u64,
    pub t: f64,
}

impl TwoColumnState {
    pub fn difference(&self) -> u64 {
        self.big_m - self.m
    }

    /// Performs one jump of the continuous process.
    pub fn jump<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let d = self.difference();
        let rate = (d + 2) as f64;
        self.t += Exp::new(rate).expect("positive rate").sample(rng);
        if d == 0 {
            self.big_m += 1;
            return;
        }
        // Weights: 1 for the higher pile, 2 for one cube on the lower pile,
        // 1 for each k in 2..=d cubes on the lower pile.
        let k = rng.random_range(0..d + 2);
        match k {
            0 => self.big_m += 1,
            1 | 2 => self.m += 1,
            _ => self.m += k - 1,
        }
    }
}

/// First return time to equal heights from `(0, 0)` and the common height
/// at that time.
pub fn simulate_return(seed: u64) -> (f64, u64) {
    simulate_return_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn simulate_return_with<R: Rng + ?Sized>(rng: &mut R) -> (f64, u64) {
    let mut s = TwoColumnState::default();
    loop {
        s.jump(rng);
        if s.difference() == 0 {
            return (s.t, s.big_m);
        }
    }
}

/// Whether the higher pile reaches `n` no later than `eps` after the first
/// return to equal heights.
pub fn reaches_before_return<R: Rng + ?Sized>(n: u64, eps: f64, rng: &mut R) -> bool {
    let mut s = TwoColumnState::default();
    let mut returned_at = None;
    loop {
        let before = s;
        s.jump(rng);
        if let Some(t) = returned_at {
            if s.t > t + eps {
                return before.big_m >= n;
            }
        }
        if s.big_m >= n {
            return true;
        }
        if returned_at.is_none() && s.difference() == 0 {
            returned_at = Some(s.t);
        }
    }
}

/// `(M_t / t, m_t / t)` at `t = horizon` along one trajectory.
pub fn long_run_speed_mc(horizon: f64, seed: u64) -> Result<(f64, f64)> {
    if !(horizon > 0.0) {
        return Err(Error::domain("horizon must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = TwoColumnState::default();
    loop {
        let before = s;
        s.jump(&mut rng);
        if s.t > horizon {
            return Ok((before.big_m as f64 / horizon, before.m as f64 / horizon));
        }
    }
}

/// `1 - exp(-rate * eps)`, computed without cancellation.
fn leave_prob(rate: f64, eps: f64) -> f64 {
    -(-rate * eps).exp_m1()
}

fn check_params(n: usize, eps: f64, min_n: usize) -> Result<()> {
    if n < min_n {
        return Err(Error::domain(format!("N must be at least {min_n}, got {n}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

/// The height-difference chain on `0..=N` with time step `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedChain {
    pub n: usize,
    pub eps: f64,
    pub accelerated: bool,
    /// Row-major `(N + 1) x (N + 1)` transition matrix.
    pub p: Vec<f64>,
}

impl DiscretizedChain {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * (self.n + 1) + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * (self.n + 1)..(i + 1) * (self.n + 1)]
    }

    /// `max_j |(v P)_j - v_j|`.
    pub fn residual(&self, v: &[f64]) -> f64 {
        let k = self.n + 1;
        (0..k)
            .map(|j| {
                let vp: f64 = (0..k).map(|i| v[i] * self.p[i * k + j]).sum();
                (vp - v[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Probability of leaving state `i` in one step.
    fn leave(&self, i: usize) -> f64 {
        1.0 - self.get(i, i)
    }
}

/// Transition matrix of the discretised difference chain.
pub fn build_chain(n: usize, eps: f64, accelerated: bool) -> Result<DiscretizedChain> {
    check_params(n, eps, 2)?;
    let k = n + 1;
    let mut p = vec![0.0; k * k];
    if accelerated {
        p[1] = 1.0;
    } else {
        let q = leave_prob(2.0, eps);
        p[0] = 1.0 - q;
        p[1] = q;
    }
    for i in 1..=n {
        let r = (i + 2) as f64;
        let q = leave_prob(r, eps);
        let row = &mut p[i * k..(i + 1) * k];
        row[i] = if i < n { 1.0 - q } else { 1.0 - (n as f64 + 1.0) * q / r };
        row[i - 1] = 2.0 * q / r;
        if i < n {
            row[i + 1] = q / r;
        }
        for v in row.iter_mut().take(i.saturating_sub(1)) {
            *v = q / r;
        }
    }
    Ok(DiscretizedChain { n, eps, accelerated, p })
}

/// The sequence `A_1..A_N` (exact integers) together with `A_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ASequence {
    pub n: usize,
    pub eps: f64,
    /// `A_i` at index `i`; index 0 holds zero.
    pub a: Vec<BigInt>,
    /// `2 A_1 + sum_{j >= 2} A_j`, so that `A_0 = b (1 - exp(-2 eps)) / 2`.
    pub b: BigInt,
}

impl ASequence {
    /// `A_0` as a float, when representable.
    pub fn a0(&self) -> f64 {
        0.5 * big_to_f64(&self.b) * leave_prob(2.0, self.eps)
    }

    /// `A_0 .. A_N` as floats, when representable.
    pub fn to_f64(&self) -> Vec<f64> {
        std::iter::once(self.a0())
            .chain(self.a[1..].iter().map(big_to_f64))
            .collect()
    }
}

fn big_to_f64(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// `num / den` for large integers, to double precision.
fn ratio(num: &BigInt, den: &BigInt) -> f64 {
    let bits = num.bits().max(den.bits());
    let shift = bits.saturating_sub(1000);
    let (a, b) = (num >> shift, den >> shift);
    big_to_f64(&a) / big_to_f64(&b)
}

/// Backward recursion `A_N = 1`, `A_{N-1} = N + 1`,
/// `A_{i-1} = (i + 2) A_i - 2 A_{i+1} - sum_{j >= i+2} A_j`.
pub fn a_sequence(n: usize, eps: f64) -> Result<ASequence> {
    check_params(n, eps, 3)?;
    let mut a = vec![BigInt::zero(); n + 1];
    a[n] = BigInt::one();
    a[n - 1] = BigInt::from(n + 1);
    // tail = sum_{j >= i+2} A_j
    let mut tail = BigInt::zero();
    for i in (2..n).rev() {
        let next = BigInt::from(i + 2) * &a[i] - BigInt::from(2) * &a[i + 1] - &tail;
        a[i - 1] = next;
        tail += &a[i + 1];
    }
    if a[1..].iter().any(|v| v <= &BigInt::zero()) {
        return Err(Error::contract(format!("A-sequence for N = {n} is not positive")));
    }
    let b = BigInt::from(2) * &a[1] + a[2..].iter().sum::<BigInt>();
    Ok(ASequence { n, eps, a, b })
}

/// Closed-form invariant law of the accelerated chain:
/// `p_0` proportional to `2 A_1 + sum_{j >= 2} A_j`, and `p_i` proportional
/// to `A_i (i + 2) / (1 - exp(-(i + 2) eps))` for `i >= 1`.
pub fn invariant_distribution(chain: &DiscretizedChain) -> Result<Vec<f64>> {
    if !chain.accelerated {
        return Err(Error::domain("the closed form applies to the accelerated chain"));
    }
    let seq = a_sequence(chain.n, chain.eps)?;
    let mut w = vec![1.0];
    for i in 1..=chain.n {
        let r = (i + 2) as f64;
        w.push(ratio(&seq.a[i], &seq.b) * r / leave_prob(r, chain.eps));
    }
    let total: f64 = w.iter().sum();
    let pi: Vec<f64> = w.into_iter().map(|v| v / total).collect();
    let res = chain.residual(&pi);
    if res > 1e-10 {
        return Err(Error::contract(format!("invariant residual {res:e} exceeds 1e-10")));
    }
    Ok(pi)
}

/// Expected number of steps of the discretised chain from 0 until it has
/// left 0 and come back: `1 / (1 - exp(-2 eps)) + S / B`, where
/// `S = sum_{i >= 1} (i + 2) A_i / (1 - exp(-(i + 2) eps))` and
/// `B = 2 A_1 + sum_{j >= 2} A_j`.
pub fn expected_return_time(n: usize, eps: f64) -> Result<f64> {
    let seq = a_sequence(n, eps)?;
    let s: f64 = (1..=n)
        .map(|i| {
            let r = (i + 2) as f64;
            r * ratio(&seq.a[i], &seq.b) / leave_prob(r, eps)
        })
        .sum();
    Ok(1.0 / leave_prob(2.0, eps) + s)
}

/// `lim_{eps -> 0} eps E[T]` at fixed `N`: `1/2 + S / (S + A_1)` with
/// `S = sum_{i >= 1} A_i`.
pub fn limit_return_time(n: usize) -> Result<f64> {
    let seq = a_sequence(n, 1.0)?;
    let s: BigInt = seq.a[1..].iter().sum();
    Ok(0.5 + ratio(&s, &(&s + &seq.a[1])))
}

/// Simulated exit-then-return time, in steps, of the non-accelerated chain.
pub fn simulate_discrete_return<R: Rng + ?Sized>(chain: &DiscretizedChain, rng: &mut R) -> u64 {
    let mut state = 0usize;
    let mut steps = 0u64;
    loop {
        let leave = chain.leave(state);
        // Steps spent in `state`, including the one that leaves it.
        steps += if leave >= 1.0 {
            1
        } else {
            Geometric::new(leave).expect("valid probability").sample(rng) + 1
        };
        state = if state == 0 {
            1
        } else {
            let up = usize::from(state < chain.n);
            let k = rng.random_range(0..(up + 2 + state - 1));
            if k < up {
                state + 1
            } else if k < up + 2 {
                state - 1
            } else {
                k - up - 2
            }
        };
        if state == 0 {
            return steps;
        }
    }
}

/// One row of the extrapolation table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulePoint {
    #[serde(rename = "N")]
    pub n: usize,
    pub epsilon: f64,
    pub expected_return_steps: f64,
    pub eps_times_steps: f64,
    pub speed_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub points: Vec<SchedulePoint>,
    /// Richardson estimate of `E[T]` from the last two points.
    pub t_square_limit: f64,
    /// `1 + 1 / (2 t_square_limit)`.
    pub speed: f64,
    pub warnings: Vec<String>,
}

impl Extrapolation {
    /// CSV with columns `N, epsilon, expected_return_steps, eps_times_steps,
    /// speed_estimate`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.points {
            w.serialize(p).map_err(crate::region::csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `N` in `{16, 32, 64, 128}` with `eps = N^-3`.
pub fn default_schedule() -> Vec<(usize, f64)> {
    [16usize, 32, 64, 128]
        .iter()
        .map(|&n| (n, (n as f64).powi(-3)))
        .collect()
}

/// Evaluates `eps E[T]` along the schedule and extrapolates to `eps = 0`,
/// assuming the error is linear in `eps`.
pub fn extrapolate(schedule: &[(usize, f64)]) -> Result<Extrapolation> {
    if schedule.len() < 2 {
        return Err(Error::Degenerate("extrapolation needs at least two points".into()));
    }
    let points = schedule
        .iter()
        .map(|&(n, eps)| {
            let steps = expected_return_time(n, eps)?;
            let v = eps * steps;
            Ok(SchedulePoint {
                n,
                epsilon: eps,
                expected_return_steps: steps,
                eps_times_steps: v,
                speed_estimate: 1.0 + 1.0 / (2.0 * v),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    for w in points.windows(3) {
        let (d1, d2) = (
            (w[1].eps_times_steps - w[0].eps_times_steps).abs(),
            (w[2].eps_times_steps - w[1].eps_times_steps).abs(),
        );
        if d2 > d1 {
            warnings.push(format!(
                "non-monotone convergence at N = {}: step {d2:e} exceeds previous {d1:e}",
                w[2].n
            ));
        }
    }
    let (p1, p2) = (&points[points.len() - 2], &points[points.len() - 1]);
    if p1.epsilon == p2.epsilon {
        return Err(Error::Degenerate("last two schedule points share epsilon".into()));
    }
    let limit = (p1.epsilon * p2.eps_times_steps - p2.epsilon * p1.eps_times_steps) / (p1.epsilon - p2.epsilon);
    Ok(Extrapolation {
        points,
        t_square_limit: limit,
        speed: 1.0 + 1.0 / (2.0 * limit),
        warnings,
    })
}

/// Why a coupled replay of the discretised chain stopped agreeing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingEnd {
    /// The continuous process jumped twice within one step.
    DoubleJump,
    /// The difference reached the cap `N`.
    ReachedCap,
    /// Both returned to 0 together.
    Returned,
}

/// Outcome of [`coupled_replay`].
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    /// Differences of the continuous process at times `k eps`.
    pub continuous: Vec<u64>,
    /// States of the discretised chain at steps `k`.
    pub discrete: Vec<u64>,
    pub end: CouplingEnd,
}

/// Drives the discretised chain with a continuous trajectory: in each step
/// the chain copies the continuous process when it jumped at most once.
pub fn coupled_replay<R: Rng + ?Sized>(n: u64, eps: f64, rng: &mut R) -> Replay {
    let mut s = TwoColumnState::default();
    let mut next = s;
    next.jump(rng);
    let mut continuous = vec![0];
    let mut discrete = vec![0];
    let mut k = 0u64;
    loop {
        let end = (k + 1) as f64 * eps;
        let mut jumps = 0;
        while next.t < end {
            s = next;
            next.jump(rng);
            jumps += 1;
        }
        k += 1;
        continuous.push(s.difference());
        if jumps > 1 {
            return Replay { continuous, discrete, end: CouplingEnd::DoubleJump };
        }
        discrete.push(s.difference());
        if s.difference() >= n {
            return Replay { continuous, discrete, end: CouplingEnd::ReachedCap };
        }
        if jumps == 1 && s.difference() == 0 {
            return Replay { continuous, discrete, end: CouplingEnd::Returned };
        }
    }
}

/// `(T, M_T)` for `reps` independent returns; replica `i` uses seed
/// `replica_seed(seed, tag("twocol-mc"), i)`.
pub fn return_samples(reps: usize, seed: u64, workers: usize) -> Result<Vec<(f64, u64)>> {
    let tag = stats::stream_tag("twocol-mc");
    stats::map_replicas(reps, workers, |i| Ok(simulate_return(stats::replica_seed(seed, tag, i as u64))))
}

/// Mean `T` and `M_T` over `reps` independent returns.
pub fn return_statistics(reps: usize, seed: u64, workers: usize) -> Result<(stats::Estimate, stats::Estimate)> {
    let runs = return_samples(reps, seed, workers)?;
    let t: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let m: Vec<f64> = runs.iter().map(|r| r.1 as f64).collect();
    Ok((stats::estimate(&t)?, stats::estimate(&m)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn rows_sum_to_one() {
        for acc in [false, true] {
            let c = build_chain(10, 0.01, acc).unwrap();
            for i in 0..=10 {
                let s: f64 = c.row(i).iter().sum();
                assert!((s - 1.0).abs() < 1e-12, "row {i} sums to {s}");
                assert!(c.row(i).iter().all(|&p| p >= 0.0));
            }
        }
    }

    #[test]
    fn chain_entries() {
        let eps = 0.01;
        let c = build_chain(10, eps, false).unwrap();
        assert!((c.get(0, 1) - (1.0 - (-2.0 * eps).exp())).abs() < 1e-15);
        let a = build_chain(10, eps, true).unwrap();
        assert_eq!((a.get(0, 0), a.get(0, 1)), (0.0, 1.0));
        let i = 4;
        let q = 1.0 - (-(6.0) * eps).exp();
        assert!((c.get(i, i) - (-6.0 * eps).exp()).abs() < 1e-15);
        assert!((c.get(i, 3) - 2.0 * q / 6.0).abs() < 1e-15);
        assert!((c.get(i, 5) - q / 6.0).abs() < 1e-15);
        assert!((c.get(i, 0) - q / 6.0).abs() < 1e-15);
        assert_eq!(c.get(i, 6), 0.0);
        let qn = 1.0 - (-12.0 * eps).exp();
        assert!((c.get(10, 10) - (1.0 - 11.0 / 12.0 * qn)).abs() < 1e-15);
        assert!(build_chain(1, eps, false).is_err());
        assert!(build_chain(5, 0.0, false).is_err());
    }

    #[test]
    fn a_sequence_small_case() {
        let s = a_sequence(3, 0.1).unwrap();
        assert_eq!(s.a[3], BigInt::from(1));
        assert_eq!(s.a[2], BigInt::from(4));
        assert_eq!(s.a[1], BigInt::from(14));
        // A_0 = (2 * 14 + 4 + 1) (1 - e^{-0.2}) / 2
        assert!((s.a0() - 16.5 * (1.0 - (-0.2f64).exp())).abs() < 1e-12);
        assert!(a_sequence(2, 0.1).is_err());
    }

    #[test]
    fn a_sequence_positive_and_eps_free() {
        for n in 3..=200 {
            a_sequence(n, 1e-3).unwrap();
        }
        let (x, y) = (a_sequence(30, 1e-2).unwrap(), a_sequence(30, 1e-5).unwrap());
        assert_eq!(x.a, y.a);
        let f = |s: &ASequence| s.a0() / (1.0 - (-2.0 * s.eps).exp());
        assert!((f(&x) / f(&y) - 1.0).abs() < 1e-12);
        assert_eq!(a_sequence(128, 1e-3).unwrap().a[1].to_string().len(), 219);
    }

    /// Fixed point of `P` by power iteration.
    fn power_iteration(c: &DiscretizedChain) -> Vec<f64> {
        let k = c.n + 1;
        let mut v = vec![1.0 / k as f64; k];
        // Lazy chain avoids the period-2 oscillation of the accelerated chain.
        for _ in 0..2_000_000 {
            let mut w = vec![0.0; k];
            for i in 0..k {
                for j in 0..k {
                    w[j] += v[i] * c.get(i, j);
                }
            }
            let mut diff = 0.0f64;
            for j in 0..k {
                let nv = 0.5 * (v[j] + w[j]);
                diff = diff.max((nv - v[j]).abs());
                v[j] = nv;
            }
            if diff < 1e-15 {
                break;
            }
        }
        v
    }

    #[test]
    fn invariant_law_matches_power_iteration() {
        let c = build_chain(10, 1e-2, true).unwrap();
        let pi = invariant_distribution(&c).unwrap();
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(c.residual(&pi) <= 1e-10);
        let oracle = power_iteration(&c);
        for (a, b) in pi.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        for (n, eps) in [(40, 1e-3), (80, 1e-4)] {
            let c = build_chain(n, eps, true).unwrap();
            assert!(c.residual(&invariant_distribution(&c).unwrap()) <= 1e-10);
        }
        assert!(invariant_distribution(&build_chain(10, 1e-2, false).unwrap()).is_err());
    }

    #[test]
    fn invariant_law_matches_occupation_frequencies() {
        let c = build_chain(6, 0.05, true).unwrap();
        let pi = invariant_distribution(&c).unwrap();
        let mut g = rng(4);
        let steps = 10_000_000u64;
        let mut counts = vec![0u64; 7];
        let mut state = 0;
        let cum: Vec<Vec<f64>> = (0..7)
            .map(|i| c.row(i).iter().scan(0.0, |s, &p| { *s += p; Some(*s) }).collect())
            .collect();
        for _ in 0..steps {
            counts[state] += 1;
            let u: f64 = g.random();
            state = cum[state].iter().position(|&s| u < s).unwrap_or(6);
        }
        // Correlated samples: allow 3 sigma of a generous effective size.
        for (i, &n) in counts.iter().enumerate() {
            let f = n as f64 / steps as f64;
            let sigma = (pi[i] * (1.0 - pi[i]) / (steps as f64 / 50.0)).sqrt();
            assert!((f - pi[i]).abs() < 3.0 * sigma, "state {i}: {f} vs {}", pi[i]);
        }
    }

    #[test]
    fn closed_form_matches_invariant_law() {
        for (n, eps) in [(10, 1e-2), (20, 1e-3), (40, 1e-4)] {
            let c = build_chain(n, eps, true).unwrap();
            let pi = invariant_distribution(&c).unwrap();
            let via_pi = 1.0 / pi[0] - 1.0 + 1.0 / (1.0 - (-2.0 * eps).exp());
            let closed = expected_return_time(n, eps).unwrap();
            assert!((via_pi / closed - 1.0).abs() < 1e-10);
            assert!(eps * closed >= 0.5);
        }
        assert!((expected_return_time(10, 1e-2).unwrap() - 109.0578523727).abs() < 1e-8);
    }

    #[test]
    fn closed_form_decreases_in_eps() {
        for n in [8, 16, 32] {
            let eps = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
            let vals: Vec<f64> = eps.iter().map(|&e| expected_return_time(n, e).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[0] < w[1]));
            assert!(eps.iter().zip(&vals).all(|(e, v)| e * v >= 0.5));
        }
    }

    #[test]
    fn discrete_simulation_matches_closed_form() {
        let c = build_chain(10, 1e-2, false).unwrap();
        let mut g = rng(8);
        let xs: Vec<f64> = (0..40_000).map(|_| simulate_discrete_return(&c, &mut g) as f64).collect();
        let e = stats::estimate(&xs).unwrap();
        let exact = expected_return_time(10, 1e-2).unwrap();
        assert!((e.mean - exact).abs() < 1.5 * e.ci95, "{} vs {exact}", e.mean);
    }

    #[test]
    fn fixed_n_limit_and_extrapolation() {
        let lim = limit_return_time(64).unwrap();
        assert!((lim - 1.0759203213682218).abs() < 1e-12);
        let ex = extrapolate(&default_schedule()).unwrap();
        assert!((ex.t_square_limit - lim).abs() < 1e-6);
        assert!((ex.speed - 1.4647184276286946).abs() < 1e-5);
        assert!(ex.points.iter().all(|p| p.speed_estimate > 4.0 / 3.0 && p.speed_estimate < 2.0));
        let mut buf = Vec::new();
        ex.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("N,epsilon,expected_return_steps,eps_times_steps,speed_estimate\n"));
        assert!(extrapolate(&[(16, 1e-3)]).is_err());
    }

    #[test]
    fn extrapolation_flags_non_monotone_steps() {
        let ex = extrapolate(&[(16, 1e-3), (32, 1e-3 - 1e-9), (64, 1e-5)]).unwrap();
        assert_eq!(ex.warnings.len(), 1);
    }

    #[test]
    fn holding_rate_is_difference_plus_two() {
        use statrs::distribution::{ContinuousCDF, Exp as SExp};
        let mut g = rng(2);
        for d in [1u64, 3, 6] {
            let mut hold = Vec::new();
            while hold.len() < 5000 {
                let mut s = TwoColumnState { m: 10, big_m: 10 + d, t: 0.0 };
                s.jump(&mut g);
                hold.push(s.t);
            }
            hold.sort_by(f64::total_cmp);
            let law = SExp::new((d + 2) as f64).unwrap();
            let n = hold.len() as f64;
            let ks = hold
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let f = law.cdf(x);
                    (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
                })
                .fold(0.0, f64::max);
            // Kolmogorov critical value at p = 0.01.
            assert!(ks < 1.628 / n.sqrt(), "d = {d}: ks {ks}");
        }
    }

    #[test]
    fn replay_agrees_until_coupling_breaks() {
        let mut g = rng(3);
        let eps = 1e-3;
        let mut ends = [0usize; 3];
        for _ in 0..10_000 {
            let r = coupled_replay(10, eps, &mut g);
            let agreed = r.discrete.len();
            assert_eq!(&r.continuous[..agreed], &r.discrete[..]);
            ends[r.end as usize] += 1;
        }
        assert!(ends[CouplingEnd::Returned as usize] > 9_500);
    }

    #[test]
    fn replay_one_step_law_matches_chain() {
        // From difference 2 the replayed chain's first move follows row 2.
        let n = 10;
        let eps = 0.05;
        let c = build_chain(n, eps, false).unwrap();
        let mut g = rng(6);
        let mut counts = [0usize; 4];
        let mut total = 0;
        while total < 50_000 {
            let mut s = TwoColumnState { m: 0, big_m: 2, t: 0.0 };
            let mut next = s;
            next.jump(&mut g);
            let mut jumps = 0;
            let mut first = None;
            while next.t < eps {
                s = next;
                next.jump(&mut g);
                jumps += 1;
                first.get_or_insert(s.difference());
            }
            let target = first.unwrap_or(2) as usize;
            let _ = jumps;
            counts[target] += 1;
            total += 1;
        }
        for (j, &k) in counts.iter().enumerate() {
            let p = c.get(2, j);
            let f = k as f64 / total as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / total as f64).sqrt() + 1e-12, "to {j}: {f} vs {p}");
        }
    }

    #[test]
    fn long_run_speeds_agree() {
        let (big, small) = long_run_speed_mc(1e5, 1).unwrap();
        assert!(big > 4.0 / 3.0 && big < 2.0);
        assert!((big - small).abs() / big < 0.01);
        let (long, _) = long_run_speed_mc(1e6, 2).unwrap();
        assert!((long - 1.46).abs() < 0.02, "{long}");
    }

    #[test]
    fn exceeding_the_cap_is_rare() {
        let mut g = rng(5);
        let eps = 1e-3;
        let n = 200_000;
        let hits = (0..n).filter(|_| reaches_before_return(10, eps, &mut g)).count();
        let bound = 2.0 * eps.exp() / 512.0;
        assert!((hits as f64 / n as f64) < bound, "{hits}");
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(n in 2usize..60, log_eps in -8.0..-0.5f64, acc: bool) {
            let c = build_chain(n, 10f64.powf(log_eps), acc).unwrap();
            for i in 0..=n {
                let s: f64 = c.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn heights_never_decrease(seed: u64) {
            let mut g = rng(seed);
            let mut s = TwoColumnState::default();
            for _ in 0..200 {
                let before = s;
                s.jump(&mut g);
                prop_assert!(s.m >= before.m && s.big_m >= before.big_m && s.m <= s.big_m);
                prop_assert!(s.t > before.t);
            }
        }
    }
}
