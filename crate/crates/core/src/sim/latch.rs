use serde::{Deserialize, Serialize};

/// Sim time in integer nanoseconds, so dwell timers compare exactly.
pub type Nanos = u64;

pub fn secs_to_nanos(secs: f64) -> Nanos {
    (secs * 1e9).round() as Nanos
}

/// Vacuum-gripper grasp state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum GripperLatch {
    #[default]
    Free,
    Arming { since: Nanos },
    Locked,
    Releasing { since: Nanos },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatchParams {
    /// Metres.
    pub distance_threshold: f64,
    pub grasp_time: Nanos,
    pub release_time: Nanos,
}

impl Default for LatchParams {
    fn default() -> Self {
        Self {
            distance_threshold: 0.005,
            grasp_time: secs_to_nanos(0.5),
            release_time: secs_to_nanos(0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatchEvent {
    Armed,
    Disarmed,
    Locked,
    ReleaseStarted,
    Relocked,
    Released,
}

impl GripperLatch {
    pub fn name(&self) -> &'static str {
        match self {
            GripperLatch::Free => "Free",
            GripperLatch::Arming { .. } => "Arming",
            GripperLatch::Locked => "Locked",
            GripperLatch::Releasing { .. } => "Releasing",
        }
    }

    pub fn is_locked(&self) -> bool {
        matches!(self, GripperLatch::Locked)
    }

    /// Joint is engaged: locked or counting down to release.
    pub fn holds_object(&self) -> bool {
        matches!(self, GripperLatch::Locked | GripperLatch::Releasing { .. })
    }

    /// Advances the machine by one observation at `now`. At most one
    /// transition happens per call.
    pub fn update(
        &mut self,
        now: Nanos,
        gripper_on: bool,
        distance: f64,
        params: &LatchParams,
    ) -> Option<LatchEvent> {
        let near = distance < params.distance_threshold;
        let (next, event) = match *self {
            GripperLatch::Free if gripper_on && near => {
                (GripperLatch::Arming { since: now }, LatchEvent::Armed)
            }
            GripperLatch::Free => return None,
            GripperLatch::Arming { .. } if !gripper_on || !near => {
                (GripperLatch::Free, LatchEvent::Disarmed)
            }
            GripperLatch::Arming { since } if now.saturating_sub(since) >= params.grasp_time => {
                (GripperLatch::Locked, LatchEvent::Locked)
            }
            GripperLatch::Arming { .. } => return None,
            GripperLatch::Locked if !gripper_on => {
                (GripperLatch::Releasing { since: now }, LatchEvent::ReleaseStarted)
            }
            GripperLatch::Locked => return None,
            GripperLatch::Releasing { .. } if gripper_on => (GripperLatch::Locked, LatchEvent::Relocked),
            GripperLatch::Releasing { since }
                if now.saturating_sub(since) >= params.release_time =>
            {
                (GripperLatch::Free, LatchEvent::Released)
            }
            GripperLatch::Releasing { .. } => return None,
        };
        *self = next;
        Some(event)
    }
}
