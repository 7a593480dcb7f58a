//! Grid encoding of the traffic state for the deep agent: per-lane cell
//! occupancy, speed-limit-normalized cell speeds over the 75 m nearest the
//! stop line, and a one-hot of the most recently selected signal action.

use thiserror::Error;

use crate::signal::ActionId;
use crate::sim::{SimParams, SimState, LANE_COUNT};

/// Meters of approach covered by the encoding, measured from the stop line.
pub const RANGE_M: f64 = 75.0;
/// Cell length in meters.
pub const CELL_M: f64 = 5.0;
/// Cells per lane row.
pub const CELLS: usize = (RANGE_M / CELL_M) as usize;
/// Lane rows, in `[N0..N3, S0..S3, E0..E3, W0..W3]` order.
pub const LANES: usize = LANE_COUNT;
/// Flattened grid size.
pub const GRID: usize = LANES * CELLS;

#[derive(Debug, Error, PartialEq)]
pub enum DtseError {
    #[error("negative position {0}")]
    NegativePosition(f64),
}

/// The discrete traffic state: one boolean occupancy grid, one normalized
/// speed grid of the same shape, and the last-action one-hot.
///
/// `speed` is zero wherever `occupancy` is false, and in `[0, 1]` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtse {
    pub occupancy: [bool; GRID],
    pub speed: [f32; GRID],
    pub phase_onehot: [bool; ActionId::COUNT],
}

impl Dtse {
    pub fn empty(last_action: ActionId) -> Dtse {
        let mut phase_onehot = [false; ActionId::COUNT];
        phase_onehot[last_action.index()] = true;
        Dtse {
            occupancy: [false; GRID],
            speed: [0.0; GRID],
            phase_onehot,
        }
    }

    pub fn cell(&self, lane_row: usize, cell: usize) -> (bool, f32) {
        let i = lane_row * CELLS + cell;
        (self.occupancy[i], self.speed[i])
    }
}

/// Cell index for a position `pos` meters upstream of the stop line, or
/// `None` when the position lies outside the encoded window.
pub fn cell_assign(pos: f64) -> Result<Option<usize>, DtseError> {
    if pos < 0.0 {
        return Err(DtseError::NegativePosition(pos));
    }
    if pos >= RANGE_M {
        return Ok(None);
    }
    Ok(Some((pos / CELL_M) as usize))
}

/// Encodes the current simulator state.
///
/// Every vehicle within the window marks the cell under its front bumper;
/// when two vehicles transiently map to one cell the one nearer the stop
/// line wins both grids. Pure in its inputs.
pub fn encode(state: &SimState, last_action: ActionId, params: &SimParams) -> Dtse {
    let mut dtse = Dtse::empty(last_action);
    for flat in 0..LANE_COUNT {
        let lane = crate::sim::LaneId::from_flat(flat);
        // Rows are sorted by position ascending, so the first writer of a
        // cell is the vehicle nearest the stop line.
        for v in state.lane(lane) {
            let Some(cell) = cell_assign(v.pos).expect("positions are non-negative") else {
                break; // ordered by pos: everything after is outside too
            };
            let i = flat * CELLS + cell;
            if !dtse.occupancy[i] {
                dtse.occupancy[i] = true;
                dtse.speed[i] = (v.speed / params.v_max).clamp(0.0, 1.0) as f32;
            }
        }
    }
    dtse
}
