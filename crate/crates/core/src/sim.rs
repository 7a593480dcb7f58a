//! Discrete-time (1 s step) microscopic simulation of one isolated
//! four-approach intersection.
//!
//! Each approach has four 750 m lanes ending at a stop line at position 0;
//! vehicle positions are meters upstream of the stop line and decrease as
//! vehicles advance. The car-following rule is a minimal collision-free
//! Krauss core: a vehicle never drives faster than the speed from which a
//! full stop is still reachable within its free distance at comfortable
//! deceleration. Crossing the stop line is instantaneous; outgoing lanes are
//! not modeled.

use thiserror::Error;

use crate::demand::ArrivalSchedule;
use crate::signal::{indication, Indication, Phase};

/// Compass approaches, in the fixed lane-row order used everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Approach {
    North,
    South,
    East,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::North, Approach::South, Approach::East, Approach::West];

    pub fn index(self) -> usize {
        match self {
            Approach::North => 0,
            Approach::South => 1,
            Approach::East => 2,
            Approach::West => 3,
        }
    }
}

/// Turning movement a vehicle performs at the intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Movement {
    Left,
    Through,
    Right,
}

impl Movement {
    pub const ALL: [Movement; 3] = [Movement::Left, Movement::Through, Movement::Right];

    pub fn index(self) -> usize {
        match self {
            Movement::Left => 0,
            Movement::Through => 1,
            Movement::Right => 2,
        }
    }
}

/// Number of lanes per approach.
pub const LANES_PER_APPROACH: usize = 4;
/// Total lane count at the intersection.
pub const LANE_COUNT: usize = 16;
/// Lane length in meters, vehicle origin to stop line.
pub const LANE_LENGTH_M: f64 = 750.0;
/// Speed below which a vehicle counts as queued (m/s).
pub const QUEUE_SPEED_THRESHOLD: f64 = 0.5;

/// One of the sixteen approach lanes. Index 0 is the innermost (left-turn)
/// lane, 1 and 2 are through lanes, 3 is the outer through/right lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LaneId {
    pub approach: Approach,
    pub index: u8,
}

impl LaneId {
    pub fn new(approach: Approach, index: u8) -> LaneId {
        assert!((index as usize) < LANES_PER_APPROACH);
        LaneId { approach, index }
    }

    /// Flat row index in `[N0..N3, S0..S3, E0..E3, W0..W3]` order.
    pub fn flat(self) -> usize {
        self.approach.index() * LANES_PER_APPROACH + self.index as usize
    }

    pub fn from_flat(flat: usize) -> LaneId {
        assert!(flat < LANE_COUNT);
        LaneId {
            approach: Approach::ALL[flat / LANES_PER_APPROACH],
            index: (flat % LANES_PER_APPROACH) as u8,
        }
    }

    pub fn allows(self, movement: Movement) -> bool {
        match (self.index, movement) {
            (0, Movement::Left) => true,
            (1 | 2, Movement::Through) => true,
            (3, Movement::Through | Movement::Right) => true,
            _ => false,
        }
    }
}

/// One simulated car.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: u64,
    pub lane: LaneId,
    pub movement: Movement,
    /// Meters upstream of the stop line; decreases toward 0.
    pub pos: f64,
    /// m/s, in `[0, v_max]`.
    pub speed: f64,
    pub entry_time: u32,
    pub exit_time: Option<u32>,
    /// Seconds spent below the delay speed threshold so far.
    pub delay_accum: f64,
}

impl Vehicle {
    pub fn travel_time(&self) -> Option<u32> {
        self.exit_time.map(|t| t - self.entry_time)
    }
}

/// Physical constants of the vehicle model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    /// Step length, fixed at 1 s.
    pub dt: f64,
    /// Speed limit, m/s.
    pub v_max: f64,
    /// Maximum acceleration, m/s^2.
    pub accel: f64,
    /// Comfortable deceleration, m/s^2.
    pub decel: f64,
    /// Vehicle length, m.
    pub vehicle_length: f64,
    /// Minimum bumper-to-bumper gap at standstill, m.
    pub min_gap: f64,
    /// Speed below which a vehicle accrues delay, m/s.
    pub delay_speed_threshold: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        let v_max = 13.89;
        SimParams {
            dt: 1.0,
            v_max,
            accel: 2.6,
            decel: 4.5,
            vehicle_length: 5.0,
            min_gap: 2.5,
            delay_speed_threshold: 0.1 * v_max,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("accel", self.accel),
            ("decel", self.decel),
            ("vehicle_length", self.vehicle_length),
            ("min_gap", self.min_gap),
            ("delay_speed_threshold", self.delay_speed_threshold),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SimError::BadParam(name));
            }
        }
        Ok(())
    }
}

/// An arrival that reached the lane entrance but could not yet be inserted.
#[derive(Debug, Clone)]
struct PendingArrival {
    time: f64,
    movement: Movement,
}

/// Vehicles that crossed the stop line during one step.
#[derive(Debug, Default)]
pub struct StepEvents {
    pub exited: Vec<Vehicle>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("inconsistent simulation state: {0}")]
    Inconsistent(String),
    #[error("non-positive simulation parameter `{0}`")]
    BadParam(&'static str),
}

/// Full state of the intersection at one time step.
///
/// Vehicles are stored per lane, ordered by position ascending (closest to
/// the stop line first).
#[derive(Debug, Clone)]
pub struct SimState {
    pub time: u32,
    lanes: [Vec<Vehicle>; LANE_COUNT],
    pub active_phase: Phase,
    pub spawned: u64,
    pub exited: u64,
    pending: [std::collections::VecDeque<PendingArrival>; LANE_COUNT],
    next_id: u64,
}

impl SimState {
    pub fn new(initial_phase: Phase) -> SimState {
        SimState {
            time: 0,
            lanes: Default::default(),
            active_phase: initial_phase,
            spawned: 0,
            exited: 0,
            pending: Default::default(),
            next_id: 0,
        }
    }

    /// Loads a demand schedule; arrivals enter their lane at the scheduled
    /// second, or at the first later step with room at the entrance.
    pub fn load_arrivals(&mut self, schedule: &ArrivalSchedule) {
        for (flat, lane_arrivals) in schedule.per_lane.iter().enumerate() {
            for a in lane_arrivals {
                self.pending[flat].push_back(PendingArrival {
                    time: a.time,
                    movement: a.movement,
                });
            }
        }
    }

    pub fn lane(&self, lane: LaneId) -> &[Vehicle] {
        &self.lanes[lane.flat()]
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.lanes.iter().flatten()
    }

    pub fn in_network(&self) -> usize {
        self.lanes.iter().map(Vec::len).sum()
    }

    /// Test hook: places a vehicle directly, keeping per-lane position order.
    pub fn insert_vehicle(&mut self, lane: LaneId, movement: Movement, pos: f64, speed: f64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let v = Vehicle {
            id,
            lane,
            movement,
            pos,
            speed,
            entry_time: self.time,
            exit_time: None,
            delay_accum: 0.0,
        };
        let row = &mut self.lanes[lane.flat()];
        let at = row.partition_point(|o| o.pos < pos);
        row.insert(at, v);
        self.spawned += 1;
        id
    }

    /// Bumper-to-bumper distance to the next vehicle downstream, or the
    /// distance to the stop line when the signal requires stopping, or
    /// infinity on an open road with no leader.
    pub fn leader_gap(&self, lane: LaneId, vehicle_idx: usize, params: &SimParams) -> f64 {
        let row = &self.lanes[lane.flat()];
        let v = &row[vehicle_idx];
        if vehicle_idx > 0 {
            let leader = &row[vehicle_idx - 1];
            return v.pos - leader.pos - params.vehicle_length;
        }
        match stop_line_rule(self.active_phase, v, params) {
            StopLineRule::Obstacle => v.pos,
            StopLineRule::Open => f64::INFINITY,
        }
    }

    /// Number of vehicles moving slower than 0.5 m/s, optionally restricted
    /// to one approach.
    pub fn queue_length(&self, approach: Option<Approach>) -> usize {
        self.vehicles()
            .filter(|v| approach.is_none_or(|a| v.lane.approach == a))
            .filter(|v| v.speed < QUEUE_SPEED_THRESHOLD)
            .count()
    }

    /// Sum of accumulated delay over all vehicles currently in the network.
    pub fn cumulative_delay(&self) -> f64 {
        self.vehicles().map(|v| v.delay_accum).sum()
    }

    /// Checks the ordering, spacing and bounds invariants.
    pub fn validate(&self, params: &SimParams) -> Result<(), SimError> {
        for row in &self.lanes {
            for pair in row.windows(2) {
                let gap = pair[1].pos - pair[0].pos - params.vehicle_length;
                if pair[1].pos <= pair[0].pos {
                    return Err(SimError::Inconsistent(format!(
                        "vehicles {} and {} out of order",
                        pair[0].id, pair[1].id
                    )));
                }
                if gap < 0.0 {
                    return Err(SimError::Inconsistent(format!(
                        "vehicles {} and {} overlap (gap {gap:.3})",
                        pair[0].id, pair[1].id
                    )));
                }
            }
            for v in row {
                if !(0.0..=LANE_LENGTH_M).contains(&v.pos) {
                    return Err(SimError::Inconsistent(format!(
                        "vehicle {} out of lane bounds (pos {:.3})",
                        v.id, v.pos
                    )));
                }
                if !(0.0..=params.v_max).contains(&v.speed) {
                    return Err(SimError::Inconsistent(format!(
                        "vehicle {} speed out of bounds ({:.3})",
                        v.id, v.speed
                    )));
                }
            }
        }
        if self.spawned != self.exited + self.in_network() as u64 {
            return Err(SimError::Inconsistent(format!(
                "conservation broken: spawned {} != exited {} + present {}",
                self.spawned,
                self.exited,
                self.in_network()
            )));
        }
        Ok(())
    }

    /// Advances the simulation by one step of `params.dt` seconds.
    ///
    /// Pending arrivals whose time has come are inserted at the lane
    /// entrance, every vehicle is updated leader-first, vehicles crossing the
    /// stop line under a permissive signal exit, and slow vehicles accrue
    /// delay. Returns the exit events of the step.
    pub fn step(&mut self, params: &SimParams) -> Result<StepEvents, SimError> {
        self.validate(params)?;
        self.insert_due_arrivals(params);

        let mut events = StepEvents::default();
        for flat in 0..LANE_COUNT {
            let row = &mut self.lanes[flat];
            if row.is_empty() {
                continue;
            }
            let mut updated: Vec<Vehicle> = Vec::with_capacity(row.len());
            for mut v in row.drain(..) {
                let ind = indication(self.active_phase, v.lane.approach, v.movement);
                let line = stop_line_rule_ind(ind, &v, params);
                // Free driving distance and, with it, the hard position floor.
                let (free, floor) = match updated.last() {
                    Some(leader) => {
                        let limit = leader.pos + params.vehicle_length + params.min_gap;
                        ((v.pos - limit).max(0.0), Some(limit))
                    }
                    None => match line {
                        StopLineRule::Obstacle => (v.pos, Some(0.0)),
                        StopLineRule::Open => (f64::INFINITY, None),
                    },
                };
                let v_next = (v.speed + params.accel * params.dt)
                    .min(params.v_max)
                    .min(safe_speed(free, params.decel, params.dt));
                let mut pos_next = v.pos - v_next * params.dt;
                if let Some(limit) = floor {
                    pos_next = pos_next.max(limit);
                }
                v.speed = v_next;
                v.pos = pos_next;
                let may_cross = line == StopLineRule::Open && updated.is_empty() && floor.is_none();
                if pos_next <= 0.0 && may_cross {
                    v.exit_time = Some(self.time + 1);
                    self.exited += 1;
                    events.exited.push(v);
                } else {
                    if v.speed < params.delay_speed_threshold {
                        v.delay_accum += params.dt;
                    }
                    updated.push(v);
                }
            }
            *row = updated;
        }
        self.time += 1;
        Ok(events)
    }

    fn insert_due_arrivals(&mut self, params: &SimParams) {
        let now = self.time as f64;
        for flat in 0..LANE_COUNT {
            while let Some(head) = self.pending[flat].front() {
                if head.time > now {
                    break;
                }
                let lane = LaneId::from_flat(flat);
                let entry_free = match self.lanes[flat].last() {
                    Some(tail) => {
                        LANE_LENGTH_M - (tail.pos + params.vehicle_length + params.min_gap)
                    }
                    None => f64::INFINITY,
                };
                if entry_free < 0.0 {
                    break; // entrance blocked; retry next step, FIFO preserved
                }
                let movement = head.movement;
                self.pending[flat].pop_front();
                let speed = params
                    .v_max
                    .min(safe_speed(entry_free, params.decel, params.dt));
                let id = self.next_id;
                self.next_id += 1;
                self.lanes[flat].push(Vehicle {
                    id,
                    lane,
                    movement,
                    pos: LANE_LENGTH_M,
                    speed,
                    entry_time: self.time,
                    exit_time: None,
                    delay_accum: 0.0,
                });
                self.spawned += 1;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StopLineRule {
    /// The stop line must be treated as an obstacle.
    Obstacle,
    /// The vehicle may pass the stop line.
    Open,
}

fn stop_line_rule(phase: Phase, v: &Vehicle, params: &SimParams) -> StopLineRule {
    stop_line_rule_ind(indication(phase, v.lane.approach, v.movement), v, params)
}

/// Red always stops. Yellow stops exactly the vehicles that can still stop
/// before the line by braking from this step on; the rest are committed and
/// may cross.
fn stop_line_rule_ind(ind: Indication, v: &Vehicle, params: &SimParams) -> StopLineRule {
    match ind {
        Indication::Green => StopLineRule::Open,
        Indication::Red => StopLineRule::Obstacle,
        Indication::Yellow => {
            if braking_distance(v.speed, params.decel, params.dt) <= v.pos {
                StopLineRule::Obstacle
            } else {
                StopLineRule::Open
            }
        }
    }
}

/// Meters covered while braking `decel * dt` per step from `speed` down to a
/// stop, the braking starting with the next position update.
pub fn braking_distance(speed: f64, decel: f64, dt: f64) -> f64 {
    let mut dist = 0.0;
    let mut v = speed - decel * dt;
    while v > 0.0 {
        dist += v * dt;
        v -= decel * dt;
    }
    dist
}

/// Largest speed from which a full stop fits inside `free` meters, braking
/// `decel * dt` per step after first covering one step at the chosen speed.
///
/// Monotone in `free`; `safe_speed(0) = 0` and unbounded for infinite `free`.
pub fn safe_speed(free: f64, decel: f64, dt: f64) -> f64 {
    if free == f64::INFINITY {
        return f64::INFINITY;
    }
    let free = free.max(0.0);
    let drop = decel * dt; // speed lost per braking step
    // Steps m such that braking from v in (m*drop, (m+1)*drop] covers
    // drop*m(m+1)/2 * dt meters after the first step.
    let m = ((-1.0 + (1.0 + 8.0 * free / (drop * dt)).sqrt()) / 2.0).floor().max(0.0);
    free / ((m + 1.0) * dt) + drop * m / 2.0
}
