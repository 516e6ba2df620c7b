//! Seeded generators for scripted lane-change traffic and for ground-truth
//! HMM feature sequences.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::VehicleState;
use crate::error::{Error, Result};
use crate::ingest::Track;

/// Minimum longitudinal gap between two vehicles starting in one lane.
pub const MIN_START_GAP: f64 = 5.0;

/// Bound of a vehicle's acceleration deviation from its lane profile, m/s^2.
const INDIVIDUAL_ACCEL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelPhase {
    pub start: usize,
    pub ax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeCmd {
    pub start: usize,
    pub duration: usize,
    /// +1 moves one lane to the left (towards +y), -1 to the right.
    pub direction: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleScript {
    pub id: i64,
    pub lane: i64,
    pub x0: f64,
    pub vx0: f64,
    /// Piecewise-constant longitudinal acceleration; zero before the first phase.
    #[serde(default)]
    pub accel: Vec<AccelPhase>,
    #[serde(default)]
    pub lane_change: Option<LaneChangeCmd>,
}

impl VehicleScript {
    fn ax_at(&self, frame: usize) -> f64 {
        self.accel
            .iter()
            .filter(|p| p.start <= frame)
            .max_by_key(|p| p.start)
            .map_or(0.0, |p| p.ax)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub lane_count: i64,
    pub lane_width: f64,
    pub vehicles: Vec<VehicleScript>,
    pub duration: usize,
    pub rate_hz: f64,
    /// Standard deviation of Gaussian noise added to positions, meters.
    #[serde(default)]
    pub position_noise: f64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.lane_count) {
            return Err(Error::SpecError("lane_count must be 2 or 3".into()));
        }
        if !(self.lane_width > 0.0) || !(self.rate_hz > 0.0) || self.duration == 0 {
            return Err(Error::SpecError(
                "lane width, rate and duration must be positive".into(),
            ));
        }
        if !(self.position_noise >= 0.0) {
            return Err(Error::SpecError("position noise must be >= 0".into()));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            if !(1..=self.lane_count).contains(&v.lane) {
                return Err(Error::SpecError(format!("vehicle {} starts off-road", v.id)));
            }
            if let Some(lc) = v.lane_change {
                let target = v.lane + lc.direction as i64;
                if lc.duration == 0 || lc.direction.abs() != 1 {
                    return Err(Error::SpecError(format!("vehicle {} has an invalid lane change", v.id)));
                }
                if !(1..=self.lane_count).contains(&target) {
                    return Err(Error::SpecError(format!(
                        "vehicle {} changes into a lane outside the road",
                        v.id
                    )));
                }
            }
            for w in &self.vehicles[i + 1..] {
                if w.id == v.id {
                    return Err(Error::SpecError(format!("vehicle id {} used twice", v.id)));
                }
                if w.lane == v.lane && (w.x0 - v.x0).abs() < MIN_START_GAP {
                    return Err(Error::SpecError(format!(
                        "vehicles {} and {} overlap in lane {}",
                        v.id, w.id, v.lane
                    )));
                }
            }
        }
        Ok(())
    }

    fn lane_center(&self, lane: i64) -> f64 {
        (lane as f64 - 0.5) * self.lane_width
    }

    fn lane_of(&self, y: f64) -> i64 {
        ((y / self.lane_width).floor() as i64 + 1).clamp(1, self.lane_count)
    }
}

/// Integrates every script with explicit Euler steps at the spec rate.
///
/// Output is in the normalized frame: traffic moves towards +x and +y
/// points to the left of the direction of travel.
pub fn gen_scenario(spec: &ScenarioSpec, seed: u64) -> Result<Vec<Track>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 1.0 / spec.rate_hz;
    let noise =
        Normal::new(0.0, spec.position_noise.max(f64::MIN_POSITIVE)).map_err(|e| Error::SpecError(e.to_string()))?;

    let mut tracks = Vec::with_capacity(spec.vehicles.len());
    for v in &spec.vehicles {
        let y0 = spec.lane_center(v.lane);
        let (mut x, mut vx) = (v.x0, v.vx0);
        let mut states = Vec::with_capacity(spec.duration);
        for f in 0..spec.duration {
            let ax = v.ax_at(f);
            let (mut y, mut vy, mut ay) = (y0, 0.0, 0.0);
            if let Some(lc) = v.lane_change {
                let dir = lc.direction as f64;
                let span = lc.duration as f64 * dt;
                let s = ((f as f64 - lc.start as f64) / lc.duration as f64).clamp(0.0, 1.0);
                y = y0 + dir * spec.lane_width * (1.0 - (PI * s).cos()) / 2.0;
                if s > 0.0 && s < 1.0 {
                    vy = dir * spec.lane_width * PI / (2.0 * span) * (PI * s).sin();
                    ay = dir * spec.lane_width * PI * PI / (2.0 * span * span) * (PI * s).cos();
                }
            }
            let (mut px, mut py) = (x, y);
            if spec.position_noise > 0.0 {
                px += noise.sample(&mut rng);
                py += noise.sample(&mut rng);
            }
            states.push(VehicleState {
                vehicle_id: v.id,
                frame: f as i64,
                x: px,
                y: py,
                vx,
                vy,
                ax,
                ay,
                lane_id: spec.lane_of(y),
            });
            x += vx * dt;
            vx += ax * dt;
        }
        tracks.push(Track { id: v.id, states });
    }
    Ok(tracks)
}

/// Converts normalized tracks to the highD convention (lateral axis
/// pointing down), the inverse of the axis flip applied on ingestion.
pub fn to_highd_axes(tracks: &[Track]) -> Vec<Track> {
    tracks
        .iter()
        .map(|t| Track {
            id: t.id,
            states: t
                .states
                .iter()
                .map(|s| VehicleState {
                    y: -s.y,
                    vy: -s.vy,
                    ay: -s.ay,
                    ..*s
                })
                .collect(),
        })
        .collect()
}

/// Parameters for randomly scripted multi-lane traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    pub lane_count: i64,
    pub lane_width: f64,
    pub vehicles_per_lane: usize,
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Fraction of vehicles that perform one lane change.
    pub lane_change_fraction: f64,
    pub scenarios: usize,
    /// Smallest bumper-to-bumper distance allowed between vehicles sharing a
    /// lane at any frame; scenarios violating it are redrawn.
    pub min_gap: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            lane_count: 3,
            lane_width: 4.0,
            vehicles_per_lane: 6,
            duration_s: 24.0,
            rate_hz: 25.0,
            lane_change_fraction: 0.3,
            scenarios: 4,
            min_gap: 10.0,
        }
    }
}

fn lane_speed(lane: i64) -> f64 {
    23.0 + 1.5 * lane as f64
}

/// Draws a random scenario. Traffic follows one shared random acceleration
/// profile, each lane has its own cruising speed and every vehicle adds a
/// small individual deviation. A lane changer accelerates during the
/// manoeuvre to the cruising speed of its target lane.
pub fn random_traffic<R: Rng>(cfg: &TrafficConfig, id_offset: i64, rng: &mut R) -> ScenarioSpec {
    let duration = (cfg.duration_s * cfg.rate_hz).round().max(1.0) as usize;
    let mut profile = Vec::new();
    let mut start = 0usize;
    while start < duration {
        profile.push((start, rng.random_range(-1.0..1.0)));
        start += (rng.random_range(2.0..5.0) * cfg.rate_hz) as usize;
    }
    let mut vehicles = Vec::new();
    let mut id = id_offset;
    for lane in 1..=cfg.lane_count {
        let mut x = rng.random_range(-40.0..0.0);
        for _ in 0..cfg.vehicles_per_lane {
            id += 1;
            let deviation: Vec<f64> = profile
                .iter()
                .map(|_| rng.random_range(-INDIVIDUAL_ACCEL..INDIVIDUAL_ACCEL))
                .collect();
            let lane_change = (rng.random::<f64>() < cfg.lane_change_fraction).then(|| {
                let direction = if lane == 1 {
                    1
                } else if lane == cfg.lane_count {
                    -1
                } else if rng.random::<bool>() {
                    1
                } else {
                    -1
                };
                let dur = (rng.random_range(4.0..6.0) * cfg.rate_hz) as usize;
                let lo = duration / 4;
                let hi = (duration * 3 / 4).saturating_sub(dur).max(lo + 1);
                LaneChangeCmd {
                    start: rng.random_range(lo..hi),
                    duration: dur,
                    direction,
                }
            });
            let mut cuts: Vec<usize> = profile.iter().map(|p| p.0).collect();
            let mut boost = 0.0;
            if let Some(lc) = lane_change {
                cuts.extend([lc.start, lc.start + lc.duration]);
                let target = lane + lc.direction as i64;
                boost = (lane_speed(target) - lane_speed(lane)) * cfg.rate_hz / lc.duration as f64;
            }
            cuts.sort_unstable();
            cuts.dedup();
            let accel = cuts
                .into_iter()
                .map(|start| {
                    let k = profile.iter().rposition(|p| p.0 <= start).unwrap_or(0);
                    let in_change = lane_change.is_some_and(|lc| (lc.start..lc.start + lc.duration).contains(&start));
                    AccelPhase {
                        start,
                        ax: profile[k].1 + deviation[k] + if in_change { boost } else { 0.0 },
                    }
                })
                .collect();
            vehicles.push(VehicleScript {
                id,
                lane,
                x0: x,
                vx0: lane_speed(lane) + rng.random_range(-0.5..0.5),
                accel,
                lane_change,
            });
            x += rng.random_range(25.0..60.0);
        }
    }
    ScenarioSpec {
        lane_count: cfg.lane_count,
        lane_width: cfg.lane_width,
        vehicles,
        duration,
        rate_hz: cfg.rate_hz,
        position_noise: 0.0,
    }
}

/// Scenario draws tried per recording before giving up.
pub const MAX_TRAFFIC_DRAWS: usize = 1000;

/// Smallest longitudinal distance between two vehicles less than half a
/// lane apart laterally, over all frames.
pub fn min_same_lane_gap(tracks: &[Track], lane_width: f64) -> f64 {
    let frames = tracks.iter().map(Track::len).min().unwrap_or(0);
    let mut gap = f64::INFINITY;
    for f in 0..frames {
        for (i, a) in tracks.iter().enumerate() {
            for b in &tracks[i + 1..] {
                let (sa, sb) = (&a.states[f], &b.states[f]);
                if (sa.y - sb.y).abs() < lane_width / 2.0 {
                    gap = gap.min((sa.x - sb.x).abs());
                }
            }
        }
    }
    gap
}

/// Generates `cfg.scenarios` random scenarios with disjoint vehicle ids,
/// redrawing any scenario whose vehicles come closer than `cfg.min_gap`.
pub fn gen_traffic(cfg: &TrafficConfig, seed: u64) -> Result<Vec<Vec<Track>>> {
    if !(cfg.min_gap >= 0.0) {
        return Err(Error::SpecError("min_gap must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stride = (cfg.lane_count as usize * cfg.vehicles_per_lane + 1) as i64;
    (0..cfg.scenarios)
        .map(|i| {
            for _ in 0..MAX_TRAFFIC_DRAWS {
                let spec = random_traffic(cfg, i as i64 * stride, &mut rng);
                let tracks = gen_scenario(&spec, rng.random())?;
                if min_same_lane_gap(&tracks, cfg.lane_width) >= cfg.min_gap {
                    return Ok(tracks);
                }
            }
            Err(Error::SpecError(format!(
                "no scenario with gaps of at least {} m in {MAX_TRAFFIC_DRAWS} draws",
                cfg.min_gap
            )))
        })
        .collect()
}

/// Ground-truth sticky Markov chain with zero-mean Gaussian emissions.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmSpec {
    pub k: usize,
    pub t: usize,
    pub self_prob: f64,
    pub covariances: Vec<DMatrix<f64>>,
    pub seed: u64,
}

impl HmmSpec {
    /// `k` states whose covariances inflate distinct coordinates: state `s`
    /// has variance 6 on coordinates `i` with `i % k == s % dim`, 0.5 elsewhere.
    pub fn separated(k: usize, t: usize, self_prob: f64, dim: usize, seed: u64) -> Self {
        Self::contrast(k, t, self_prob, dim, 6.0, 0.5, seed)
    }

    /// As [`HmmSpec::separated`] with variance `high` on the inflated
    /// coordinates and `low` elsewhere.
    pub fn contrast(k: usize, t: usize, self_prob: f64, dim: usize, high: f64, low: f64, seed: u64) -> Self {
        let covariances = (0..k)
            .map(|s| {
                DMatrix::from_fn(dim, dim, |i, j| {
                    if i != j {
                        0.0
                    } else if i % k == s % dim {
                        high
                    } else {
                        low
                    }
                })
            })
            .collect();
        Self {
            k,
            t,
            self_prob,
            covariances,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.covariances.len() != self.k {
            return Err(Error::InvalidConfig("need one covariance per state".into()));
        }
        if !(self.self_prob > 0.0 && self.self_prob < 1.0) {
            return Err(Error::InvalidConfig("self_prob must lie in (0, 1)".into()));
        }
        let d = self.covariances[0].nrows();
        for c in &self.covariances {
            if c.nrows() != d || c.ncols() != d || c.clone().cholesky().is_none() {
                return Err(Error::InvalidConfig(
                    "covariances must be square, equal-sized and positive definite".into(),
                ));
            }
        }
        Ok(())
    }

    /// The transition matrix the generator samples from.
    pub fn transition_matrix(&self) -> DMatrix<f64> {
        if self.k == 1 {
            return DMatrix::from_element(1, 1, 1.0);
        }
        let off = (1.0 - self.self_prob) / (self.k - 1) as f64;
        DMatrix::from_fn(self.k, self.k, |i, j| if i == j { self.self_prob } else { off })
    }
}

/// Samples labels from the chain (uniform initial state) and one zero-mean
/// Gaussian feature row per label. Returns `T x D` features and labels.
pub fn gen_hmm_sequence(spec: &HmmSpec) -> Result<(DMatrix<f64>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.covariances[0].nrows();
    let factors: Vec<DMatrix<f64>> = spec
        .covariances
        .iter()
        .map(|c| c.clone().cholesky().expect("validated").l())
        .collect();

    let mut labels = Vec::with_capacity(spec.t);
    let mut z = rng.random_range(0..spec.k);
    for t in 0..spec.t {
        if t > 0 && spec.k > 1 && rng.random::<f64>() >= spec.self_prob {
            let hop = rng.random_range(0..spec.k - 1);
            z = if hop >= z { hop + 1 } else { hop };
        }
        labels.push(z);
    }

    let mut features = DMatrix::zeros(spec.t, d);
    let mut eps = vec![0.0; d];
    for (t, &z) in labels.iter().enumerate() {
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        let l = &factors[z];
        for i in 0..d {
            features[(t, i)] = (0..=i).map(|j| l[(i, j)] * eps[j]).sum();
        }
    }
    Ok((features, labels))
}
