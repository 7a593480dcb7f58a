//! Signal phase state machine: the four agent-selectable green phases, the
//! non-selectable yellow/all-red transition phases, the fixed transition
//! sequences between greens, and per-movement signal indications.

use std::fmt;

use thiserror::Error;

use crate::sim::{Approach, Movement};

/// Seconds a selected green phase is held before the agent decides again.
pub const GREEN_DURATION_S: u32 = 2;
/// Seconds each intermediate yellow/all-red phase lasts.
pub const TRANSITION_DURATION_S: u32 = 5;

/// One configuration of every signal head at the intersection.
///
/// Green phases are the agent's actions; yellow and all-red phases occur only
/// inside transition sequences and can never be selected directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    NsGreen,
    EwGreen,
    NsLeftGreen,
    EwLeftGreen,
    NsYellow,
    EwYellow,
    AllRed,
}

impl Phase {
    pub fn is_green(self) -> bool {
        matches!(
            self,
            Phase::NsGreen | Phase::EwGreen | Phase::NsLeftGreen | Phase::EwLeftGreen
        )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::NsGreen => "NSG",
            Phase::EwGreen => "EWG",
            Phase::NsLeftGreen => "NSLG",
            Phase::EwLeftGreen => "EWLG",
            Phase::NsYellow => "NSY",
            Phase::EwYellow => "EWY",
            Phase::AllRed => "R",
        };
        f.write_str(s)
    }
}

/// Index into the four-element action set, 0..=3 mapping to
/// `[NsGreen, EwGreen, NsLeftGreen, EwLeftGreen]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionId(u8);

impl ActionId {
    pub const COUNT: usize = 4;
    pub const ALL: [ActionId; 4] = [ActionId(0), ActionId(1), ActionId(2), ActionId(3)];

    pub fn new(index: usize) -> Option<ActionId> {
        (index < Self::COUNT).then_some(ActionId(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn green_phase(self) -> Phase {
        match self.0 {
            0 => Phase::NsGreen,
            1 => Phase::EwGreen,
            2 => Phase::NsLeftGreen,
            _ => Phase::EwLeftGreen,
        }
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.green_phase())
    }
}

/// What a signal head shows for one (approach, movement) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indication {
    Green,
    Yellow,
    Red,
}

/// A timed sequence of phases realizing one selected action: zero or more
/// 5 s transition phases followed by the selected green held for 2 s.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhasePlan {
    pub phases: Vec<(Phase, u32)>,
}

impl PhasePlan {
    pub fn total_duration(&self) -> u32 {
        self.phases.iter().map(|&(_, d)| d).sum()
    }

    /// The green phase the plan ends in.
    pub fn final_phase(&self) -> Phase {
        self.phases.last().expect("plan is never empty").0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignalError {
    #[error("transition requested from non-green phase {0}")]
    NotAGreenPhase(Phase),
}

/// The intermediate phases required to move from `current` to the selected
/// action's green phase, then the green itself.
///
/// The map is intentionally asymmetric where the underlying control table is
/// (e.g. `NSLG -> NSG` is direct while `NSG -> NSLG` passes through `NSY`).
pub fn transition_sequence(current: Phase, selected: ActionId) -> Result<PhasePlan, SignalError> {
    use Phase::*;
    let target = selected.green_phase();
    let intermediates: &[Phase] = match (current, target) {
        (NsGreen, NsGreen) => &[],
        (NsGreen, EwGreen) => &[NsYellow, AllRed],
        (NsGreen, NsLeftGreen) => &[NsYellow],
        (NsGreen, EwLeftGreen) => &[NsYellow, AllRed],
        (EwGreen, NsGreen) => &[EwYellow, AllRed],
        (EwGreen, EwGreen) => &[],
        (EwGreen, NsLeftGreen) => &[EwYellow, AllRed],
        (EwGreen, EwLeftGreen) => &[EwYellow],
        (NsLeftGreen, NsGreen) => &[],
        (NsLeftGreen, EwGreen) => &[NsYellow, AllRed],
        (NsLeftGreen, NsLeftGreen) => &[],
        (NsLeftGreen, EwLeftGreen) => &[NsYellow, AllRed],
        (EwLeftGreen, NsGreen) => &[EwYellow],
        (EwLeftGreen, EwGreen) => &[],
        (EwLeftGreen, NsLeftGreen) => &[EwYellow, AllRed],
        (EwLeftGreen, EwLeftGreen) => &[],
        (p, _) => return Err(SignalError::NotAGreenPhase(p)),
    };
    let mut phases: Vec<(Phase, u32)> = intermediates
        .iter()
        .map(|&p| (p, TRANSITION_DURATION_S))
        .collect();
    phases.push((target, GREEN_DURATION_S));
    Ok(PhasePlan { phases })
}

/// Signal indication for one movement on one approach under `phase`.
///
/// Yellow applies to the whole compass pair of the departing green; everything
/// not explicitly green or yellow is red.
pub fn indication(phase: Phase, approach: Approach, movement: Movement) -> Indication {
    use Approach::*;
    let ns = matches!(approach, North | South);
    let ew = matches!(approach, East | West);
    match phase {
        Phase::NsGreen if ns && movement != Movement::Left => Indication::Green,
        Phase::EwGreen if ew && movement != Movement::Left => Indication::Green,
        Phase::NsLeftGreen if ns && movement == Movement::Left => Indication::Green,
        Phase::EwLeftGreen if ew && movement == Movement::Left => Indication::Green,
        Phase::NsYellow if ns => Indication::Yellow,
        Phase::EwYellow if ew => Indication::Yellow,
        _ => Indication::Red,
    }
}

/// True when `movement` on `approach` may proceed freely under `phase`.
pub fn movement_green(phase: Phase, approach: Approach, movement: Movement) -> bool {
    indication(phase, approach, movement) == Indication::Green
}

#[cfg(test)]
mod tests {
    use super::*;
    use Phase::*;

    fn plan(phases: &[(Phase, u32)]) -> PhasePlan {
        PhasePlan {
            phases: phases.to_vec(),
        }
    }

    #[test]
    fn transition_table_is_exact() {
        let a = |i: usize| ActionId::new(i).unwrap();
        // Row NSG.
        assert_eq!(transition_sequence(NsGreen, a(0)).unwrap(), plan(&[(NsGreen, 2)]));
        assert_eq!(
            transition_sequence(NsGreen, a(1)).unwrap(),
            plan(&[(NsYellow, 5), (AllRed, 5), (EwGreen, 2)])
        );
        assert_eq!(
            transition_sequence(NsGreen, a(2)).unwrap(),
            plan(&[(NsYellow, 5), (NsLeftGreen, 2)])
        );
        assert_eq!(
            transition_sequence(NsGreen, a(3)).unwrap(),
            plan(&[(NsYellow, 5), (AllRed, 5), (EwLeftGreen, 2)])
        );
        // Row EWG.
        assert_eq!(
            transition_sequence(EwGreen, a(0)).unwrap(),
            plan(&[(EwYellow, 5), (AllRed, 5), (NsGreen, 2)])
        );
        assert_eq!(transition_sequence(EwGreen, a(1)).unwrap(), plan(&[(EwGreen, 2)]));
        assert_eq!(
            transition_sequence(EwGreen, a(2)).unwrap(),
            plan(&[(EwYellow, 5), (AllRed, 5), (NsLeftGreen, 2)])
        );
        assert_eq!(
            transition_sequence(EwGreen, a(3)).unwrap(),
            plan(&[(EwYellow, 5), (EwLeftGreen, 2)])
        );
        // Row NSLG: direct to NSG, no yellow.
        assert_eq!(transition_sequence(NsLeftGreen, a(0)).unwrap(), plan(&[(NsGreen, 2)]));
        assert_eq!(
            transition_sequence(NsLeftGreen, a(1)).unwrap(),
            plan(&[(NsYellow, 5), (AllRed, 5), (EwGreen, 2)])
        );
        assert_eq!(
            transition_sequence(NsLeftGreen, a(2)).unwrap(),
            plan(&[(NsLeftGreen, 2)])
        );
        assert_eq!(
            transition_sequence(NsLeftGreen, a(3)).unwrap(),
            plan(&[(NsYellow, 5), (AllRed, 5), (EwLeftGreen, 2)])
        );
        // Row EWLG: direct to EWG, no yellow.
        assert_eq!(
            transition_sequence(EwLeftGreen, a(0)).unwrap(),
            plan(&[(EwYellow, 5), (NsGreen, 2)])
        );
        assert_eq!(transition_sequence(EwLeftGreen, a(1)).unwrap(), plan(&[(EwGreen, 2)]));
        assert_eq!(
            transition_sequence(EwLeftGreen, a(2)).unwrap(),
            plan(&[(EwYellow, 5), (AllRed, 5), (NsLeftGreen, 2)])
        );
        assert_eq!(
            transition_sequence(EwLeftGreen, a(3)).unwrap(),
            plan(&[(EwLeftGreen, 2)])
        );
    }

    #[test]
    fn transition_from_non_green_is_rejected() {
        for p in [NsYellow, EwYellow, AllRed] {
            assert_eq!(
                transition_sequence(p, ActionId::new(0).unwrap()),
                Err(SignalError::NotAGreenPhase(p))
            );
        }
    }

    #[test]
    fn every_plan_ends_in_selected_green() {
        for current in [NsGreen, EwGreen, NsLeftGreen, EwLeftGreen] {
            for action in ActionId::ALL {
                let plan = transition_sequence(current, action).unwrap();
                assert_eq!(plan.final_phase(), action.green_phase());
                let (last, dur) = *plan.phases.last().unwrap();
                assert_eq!((last, dur), (action.green_phase(), GREEN_DURATION_S));
                for &(p, d) in &plan.phases[..plan.phases.len() - 1] {
                    assert!(matches!(p, NsYellow | EwYellow | AllRed));
                    assert_eq!(d, TRANSITION_DURATION_S);
                }
            }
        }
    }

    #[test]
    fn movement_permissions() {
        use crate::sim::{Approach::*, Movement::*};
        assert!(movement_green(NsGreen, North, Through));
        assert!(movement_green(NsGreen, South, Right));
        assert!(!movement_green(NsGreen, North, Left));
        assert!(!movement_green(NsGreen, East, Through));
        assert!(movement_green(NsLeftGreen, North, Left));
        assert!(!movement_green(NsLeftGreen, North, Through));
        assert!(movement_green(EwGreen, East, Through));
        assert!(movement_green(EwLeftGreen, West, Left));
        for ap in [North, South, East, West] {
            for mv in [Left, Through, Right] {
                assert!(!movement_green(AllRed, ap, mv));
            }
        }
        assert_eq!(indication(NsYellow, North, Through), Indication::Yellow);
        assert_eq!(indication(NsYellow, East, Through), Indication::Red);
        assert_eq!(indication(EwYellow, West, Left), Indication::Yellow);
    }

    #[test]
    fn no_phase_greens_conflicting_movements() {
        use crate::sim::{Approach::*, Movement::*};
        let all_phases = [NsGreen, EwGreen, NsLeftGreen, EwLeftGreen, NsYellow, EwYellow, AllRed];
        for p in all_phases {
            let ns_through = movement_green(p, North, Through) || movement_green(p, South, Through);
            let ew_through = movement_green(p, East, Through) || movement_green(p, West, Through);
            assert!(!(ns_through && ew_through), "{p}: crossing through conflict");
            // A green left never faces an opposing green through.
            let ns_left = movement_green(p, North, Left) || movement_green(p, South, Left);
            let ew_left = movement_green(p, East, Left) || movement_green(p, West, Left);
            assert!(!(ns_left && ns_through), "{p}: left vs opposing through");
            assert!(!(ew_left && ew_through), "{p}: left vs opposing through");
            assert!(!(ns_left && ew_through), "{p}: left vs crossing through");
            assert!(!(ew_left && ns_through), "{p}: left vs crossing through");
        }
    }
}
