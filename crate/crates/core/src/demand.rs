//! Stochastic vehicle arrival generation.
//!
//! Headways (seconds between consecutive arrivals of one movement stream) are
//! drawn by inverse-CDF sampling from an Inverse Weibull distribution for
//! turning traffic and a Burr (Type XII) distribution for through traffic,
//! then rescaled so each stream hits its configured hourly flow rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::seeds::derive_seed;
use crate::sim::{Approach, LaneId, Movement, LANE_COUNT};

/// Flow band (veh/h) served by the Inverse Weibull turning distribution.
pub const TURNING_FLOW_BAND: (f64, f64) = (0.0, 150.0);
/// Flow band (veh/h) served by the Burr through distribution.
pub const THROUGH_FLOW_BAND: (f64, f64) = (250.0, 450.0);

/// Shape parameters of the turning-traffic headway distribution.
pub const TURNING_PARAMS: (f64, f64) = (0.65, 5.8);
/// Shape parameters of the through-traffic headway distribution.
pub const THROUGH_PARAMS: (f64, f64) = (1.4, 5.9);

#[derive(Debug, Error, PartialEq)]
pub enum DemandError {
    #[error("uniform variate {0} outside (0, 1)")]
    BadUniform(f64),
    #[error("non-positive flow rate {0}")]
    BadFlow(f64),
    #[error("{movement:?} flow {flow} veh/h outside the supported band {lo}..={hi}")]
    FlowOutOfBand {
        movement: Movement,
        flow: f64,
        lo: f64,
        hi: f64,
    },
    #[error("non-positive distribution parameter")]
    BadParam,
}

/// Family of a headway distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadwayKind {
    InverseWeibull,
    Burr,
}

/// A two-parameter headway distribution plus a post-hoc scale factor.
///
/// Inverse Weibull CDF: `F(x) = exp(-(beta/x)^alpha)`.
/// Burr Type XII CDF: `F(x) = 1 - (1 + x^alpha)^(-beta)`.
/// Samples are the inverse CDF evaluated at a uniform variate, times `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadwayDist {
    pub kind: HeadwayKind,
    pub alpha: f64,
    pub beta: f64,
    pub scale: f64,
}

impl HeadwayDist {
    pub fn new(kind: HeadwayKind, alpha: f64, beta: f64) -> Result<HeadwayDist, DemandError> {
        if alpha <= 0.0 || beta <= 0.0 {
            return Err(DemandError::BadParam);
        }
        Ok(HeadwayDist {
            kind,
            alpha,
            beta,
            scale: 1.0,
        })
    }

    pub fn inverse_weibull(alpha: f64, beta: f64) -> Result<HeadwayDist, DemandError> {
        Self::new(HeadwayKind::InverseWeibull, alpha, beta)
    }

    pub fn burr(alpha: f64, beta: f64) -> Result<HeadwayDist, DemandError> {
        Self::new(HeadwayKind::Burr, alpha, beta)
    }

    pub fn with_scale(mut self, scale: f64) -> HeadwayDist {
        assert!(scale > 0.0);
        self.scale = scale;
        self
    }

    /// Inverse-CDF sample (seconds) at uniform variate `u` in (0, 1).
    pub fn sample_headway(&self, u: f64) -> Result<f64, DemandError> {
        if !(u > 0.0 && u < 1.0) {
            return Err(DemandError::BadUniform(u));
        }
        let x = match self.kind {
            // F(x) = exp(-(b/x)^a)  =>  x = b * (-ln u)^(-1/a)
            HeadwayKind::InverseWeibull => self.beta * (-u.ln()).powf(-1.0 / self.alpha),
            // F(x) = 1 - (1+x^a)^(-b)  =>  x = ((1-u)^(-1/b) - 1)^(1/a)
            HeadwayKind::Burr => ((1.0 - u).powf(-1.0 / self.beta) - 1.0).powf(1.0 / self.alpha),
        };
        Ok(x * self.scale)
    }

    /// CDF of the scaled distribution, for goodness-of-fit checks.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let z = x / self.scale;
        match self.kind {
            HeadwayKind::InverseWeibull => (-(self.beta / z).powf(self.alpha)).exp(),
            HeadwayKind::Burr => 1.0 - (1.0 + z.powf(self.alpha)).powf(-self.beta),
        }
    }

    /// Median of the unscaled distribution.
    pub fn raw_median(&self) -> f64 {
        match self.kind {
            HeadwayKind::InverseWeibull => {
                self.beta * std::f64::consts::LN_2.powf(-1.0 / self.alpha)
            }
            HeadwayKind::Burr => (2f64.powf(1.0 / self.beta) - 1.0).powf(1.0 / self.alpha),
        }
    }

    /// Mean of the unscaled distribution, when it exists.
    pub fn raw_mean(&self) -> Option<f64> {
        match self.kind {
            // E[X] = beta * Gamma(1 - 1/alpha), finite only for alpha > 1.
            HeadwayKind::InverseWeibull => (self.alpha > 1.0)
                .then(|| self.beta * ln_gamma(1.0 - 1.0 / self.alpha).exp()),
            // E[X] = beta * B(beta - 1/alpha, 1 + 1/alpha), finite for
            // alpha * beta > 1.
            HeadwayKind::Burr => (self.alpha * self.beta > 1.0).then(|| {
                let a = self.beta - 1.0 / self.alpha;
                let b = 1.0 + 1.0 / self.alpha;
                self.beta * (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
            }),
        }
    }

    /// Scale factor matching this distribution to `target_flow` veh/h.
    ///
    /// When the mean exists it is matched to `3600 / flow`; otherwise
    /// (Inverse Weibull with `alpha <= 1`) the median is matched to the
    /// median headway of a Poisson stream at the same flow.
    pub fn calibrate_scale(&self, target_flow: f64) -> Result<f64, DemandError> {
        if !(target_flow > 0.0) || !target_flow.is_finite() {
            return Err(DemandError::BadFlow(target_flow));
        }
        let scale = match self.raw_mean() {
            Some(mean) => (3600.0 / target_flow) / mean,
            None => (3600.0 * std::f64::consts::LN_2 / target_flow) / self.raw_median(),
        };
        Ok(scale)
    }

    /// Calibrated copy of this distribution.
    pub fn calibrated(&self, target_flow: f64) -> Result<HeadwayDist, DemandError> {
        Ok(self.clone().with_scale(self.calibrate_scale(target_flow)?))
    }
}

/// One arrival stream: hourly flow plus its calibrated headway distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub flow: f64,
    pub dist: HeadwayDist,
}

/// Arrival demand for every (approach, movement) stream.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    streams: [[StreamSpec; 3]; 4],
}

impl DemandProfile {
    /// Identical flows on all four approaches: `through` veh/h of Burr
    /// through traffic, `left`/`right` veh/h of Inverse Weibull turning
    /// traffic, each stream calibrated to its flow.
    pub fn symmetric(through: f64, left: f64, right: f64) -> Result<DemandProfile, DemandError> {
        check_band(Movement::Through, through, THROUGH_FLOW_BAND)?;
        check_band(Movement::Left, left, TURNING_FLOW_BAND)?;
        check_band(Movement::Right, right, TURNING_FLOW_BAND)?;
        let turning = HeadwayDist::inverse_weibull(TURNING_PARAMS.0, TURNING_PARAMS.1)?;
        let through_dist = HeadwayDist::burr(THROUGH_PARAMS.0, THROUGH_PARAMS.1)?;
        let make = |movement: Movement| -> Result<StreamSpec, DemandError> {
            let (flow, dist) = match movement {
                Movement::Left => (left, &turning),
                Movement::Through => (through, &through_dist),
                Movement::Right => (right, &turning),
            };
            Ok(StreamSpec {
                flow,
                dist: dist.calibrated(flow)?,
            })
        };
        let row = [
            make(Movement::Left)?,
            make(Movement::Through)?,
            make(Movement::Right)?,
        ];
        Ok(DemandProfile {
            streams: [row.clone(), row.clone(), row.clone(), row],
        })
    }

    pub fn stream(&self, approach: Approach, movement: Movement) -> &StreamSpec {
        &self.streams[approach.index()][movement.index()]
    }
}

fn check_band(movement: Movement, flow: f64, band: (f64, f64)) -> Result<(), DemandError> {
    if !(flow > 0.0) || !flow.is_finite() {
        return Err(DemandError::BadFlow(flow));
    }
    if flow < band.0 || flow > band.1 {
        return Err(DemandError::FlowOutOfBand {
            movement,
            flow,
            lo: band.0,
            hi: band.1,
        });
    }
    Ok(())
}

/// One scheduled lane entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub movement: Movement,
}

/// Per-lane arrival times, strictly increasing within each lane.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArrivalSchedule {
    pub per_lane: [Vec<Arrival>; LANE_COUNT],
}

impl ArrivalSchedule {
    pub fn total(&self) -> usize {
        self.per_lane.iter().map(Vec::len).sum()
    }
}

/// Samples every stream's headways over `horizon` seconds and assigns lanes:
/// left turns to lane 0, right turns to lane 3, through traffic uniformly to
/// lanes 1..=3. Deterministic in `seed`.
pub fn schedule_arrivals(profile: &DemandProfile, horizon: f64, seed: u64) -> ArrivalSchedule {
    let mut schedule = ArrivalSchedule::default();
    if horizon <= 0.0 {
        return schedule;
    }
    for approach in Approach::ALL {
        for movement in Movement::ALL {
            let spec = profile.stream(approach, movement);
            let stream_tag = (approach.index() * 3 + movement.index()) as u64;
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, &[stream_tag]));
            let mut t = 0.0;
            loop {
                let u = open_unit(&mut rng);
                t += spec.dist.sample_headway(u).expect("u in (0,1)");
                if t > horizon {
                    break;
                }
                let lane_index: u8 = match movement {
                    Movement::Left => 0,
                    Movement::Right => 3,
                    Movement::Through => rng.random_range(1..=3),
                };
                let lane = LaneId::new(approach, lane_index);
                schedule.per_lane[lane.flat()].push(Arrival { time: t, movement });
            }
        }
    }
    for lane_arrivals in &mut schedule.per_lane {
        lane_arrivals.sort_by(|a, b| a.time.total_cmp(&b.time));
        for i in 1..lane_arrivals.len() {
            if lane_arrivals[i].time <= lane_arrivals[i - 1].time {
                lane_arrivals[i].time = lane_arrivals[i - 1].time.next_up();
            }
        }
    }
    schedule
}

/// Uniform variate strictly inside (0, 1).
fn open_unit(rng: &mut impl Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}
