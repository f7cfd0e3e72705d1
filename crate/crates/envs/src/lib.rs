//! Deterministic gridworlds for representation-learning experiments.
//!
//! Both environments render an egocentric one-dimensional view: rays fanned
//! across the forward half-plane report the first non-empty cell they hit.
//! Anything behind the agent or occluded is invisible, so the agent must
//! remember what it saw. Ground truth (object position, hidden task id) is
//! only reachable through [`Environment::ground_truth`], never through an
//! [`Observation`].

mod cube_room;
mod error;
mod grid;
mod key_door;
mod observation;
mod policy;
mod trajectory;

pub use cube_room::{CubeRoom, CubeRoomConfig};
pub use error::{EnvError, Result};
pub use grid::{Action, CellType, Facing, Pos, NUM_ACTIONS, NUM_CHANNELS, NOOP_ACTION};
pub use key_door::{KeyDoor, KeyDoorConfig, KeyDoorTask, Token, EXIT_REWARD, KEY_REWARD, VOCAB_SIZE};
pub use observation::Observation;
pub use policy::{scripted_optimal_action, uniform_random_policy};
pub use trajectory::{TrajectoryRecorder, TrajectoryRow};

/// Outcome of one environment step.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub reward: f64,
    /// `false` once the episode has ended; the next call must be `reset`.
    pub cont: bool,
}

/// Privileged state, for probes and tests only.
#[derive(Clone, Debug, PartialEq)]
pub enum GroundTruth {
    CubeRoom {
        agent: Pos,
        facing: Facing,
        object: Pos,
        /// Row-major index of `object` in the `G x G` grid.
        object_cell: usize,
        object_visible: bool,
        /// Steps since the object was last in view; `None` if never seen.
        steps_since_seen: Option<usize>,
    },
    KeyDoor {
        agent: Pos,
        facing: Facing,
        key: Pos,
        door: Pos,
        goal: Pos,
        has_key: bool,
        task_id: usize,
    },
}

impl GroundTruth {
    pub fn task_id(&self) -> usize {
        match self {
            GroundTruth::CubeRoom { .. } => 0,
            GroundTruth::KeyDoor { task_id, .. } => *task_id,
        }
    }

    /// `(name, value)` columns for trajectory dumps.
    pub fn fields(&self) -> Vec<(&'static str, String)> {
        match self {
            GroundTruth::CubeRoom {
                agent,
                facing,
                object,
                object_cell,
                object_visible,
                steps_since_seen,
            } => vec![
                ("agent_x", agent.x.to_string()),
                ("agent_y", agent.y.to_string()),
                ("facing", facing.index().to_string()),
                ("object_x", object.x.to_string()),
                ("object_y", object.y.to_string()),
                ("object_cell", object_cell.to_string()),
                ("object_visible", u8::from(*object_visible).to_string()),
                (
                    "steps_since_seen",
                    steps_since_seen.map_or_else(String::new, |s| s.to_string()),
                ),
            ],
            GroundTruth::KeyDoor {
                agent,
                facing,
                key,
                door,
                goal,
                has_key,
                task_id,
            } => vec![
                ("agent_x", agent.x.to_string()),
                ("agent_y", agent.y.to_string()),
                ("facing", facing.index().to_string()),
                ("key_x", key.x.to_string()),
                ("key_y", key.y.to_string()),
                ("door_x", door.x.to_string()),
                ("door_y", door.y.to_string()),
                ("goal_x", goal.x.to_string()),
                ("goal_y", goal.y.to_string()),
                ("has_key", u8::from(*has_key).to_string()),
                ("task_id", task_id.to_string()),
            ],
        }
    }
}

/// Common interface of the gridworlds.
pub trait Environment: Send {
    /// Starts a fresh episode; the whole episode is a function of `seed`
    /// and the actions taken.
    fn reset(&mut self, seed: u64) -> Observation;
    fn step(&mut self, action: usize) -> Result<Step>;
    fn ground_truth(&self) -> GroundTruth;
    fn grid_size(&self) -> usize;
    fn view_len(&self) -> usize;
    fn num_tasks(&self) -> usize;
    fn episode_limit(&self) -> usize;
}
