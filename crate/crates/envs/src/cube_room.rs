use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{EnvError, Result};
use crate::grid::{cast_view, Action, CellType, Facing, Pos, NOOP_ACTION};
use crate::observation::Observation;
use crate::{Environment, GroundTruth, Step};

#[derive(Clone, Debug, PartialEq)]
pub struct CubeRoomConfig {
    pub grid: usize,
    pub episode_limit: usize,
    /// Draw the agent's cell and facing at reset. Otherwise every episode
    /// starts in the centre cell facing north, so the agent can know its
    /// own pose by integrating its actions.
    pub random_start: bool,
}

impl Default for CubeRoomConfig {
    fn default() -> Self {
        Self {
            grid: 7,
            episode_limit: 60,
            random_start: false,
        }
    }
}

impl CubeRoomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(EnvError::Config(format!("grid must be >= 2, got {}", self.grid)));
        }
        if self.episode_limit == 0 {
            return Err(EnvError::Config("episode_limit must be positive".into()));
        }
        Ok(())
    }

    pub fn view_len(&self) -> usize {
        2 * self.grid - 1
    }
}

/// Empty walled room with one cube at a random cell. There is no reward;
/// the room exists to test whether a representation tracks the cube.
#[derive(Clone, Debug)]
pub struct CubeRoom {
    cfg: CubeRoomConfig,
    rng: ChaCha8Rng,
    agent: Pos,
    facing: Facing,
    object: Pos,
    steps: usize,
    last_seen: Option<usize>,
    object_visible: bool,
    done: bool,
}

impl CubeRoom {
    pub fn new(cfg: CubeRoomConfig) -> Result<Self> {
        cfg.validate()?;
        let mut env = Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(0),
            agent: Pos::new(0, 0),
            facing: Facing::North,
            object: Pos::new(1, 0),
            steps: 0,
            last_seen: None,
            object_visible: false,
            done: true,
        };
        env.reset(0);
        Ok(env)
    }

    /// Places agent and cube directly, for constructing test scenarios.
    pub fn place(&mut self, agent: Pos, facing: Facing, object: Pos) -> Observation {
        assert_ne!(agent, object, "agent and cube must occupy different cells");
        self.agent = agent;
        self.facing = facing;
        self.object = object;
        self.steps = 0;
        self.last_seen = None;
        self.done = false;
        self.observe(NOOP_ACTION, 0.0)
    }

    fn cell_at(&self, x: i64, y: i64) -> CellType {
        let g = self.cfg.grid as i64;
        if x < 0 || y < 0 || x >= g || y >= g {
            CellType::Wall
        } else if (x as usize, y as usize) == (self.object.x, self.object.y) {
            CellType::Object
        } else {
            CellType::Empty
        }
    }

    fn observe(&mut self, prev_action: usize, reward: f64) -> Observation {
        let view = cast_view(self.agent, self.facing, self.cfg.view_len(), |x, y| {
            self.cell_at(x, y)
        });
        self.object_visible = view.hits.contains(&CellType::Object);
        if self.object_visible {
            self.last_seen = Some(self.steps);
        }
        Observation {
            view: view.data,
            view_len: self.cfg.view_len(),
            instruction: Vec::new(),
            prev_action,
            reward,
        }
    }
}

impl Environment for CubeRoom {
    fn reset(&mut self, seed: u64) -> Observation {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = self.cfg.grid * self.cfg.grid;
        let centre = Pos::new(self.cfg.grid / 2, self.cfg.grid / 2).index(self.cfg.grid);
        let agent = if self.cfg.random_start {
            self.rng.gen_range(0..cells)
        } else {
            centre
        };
        // uniform over the remaining cells
        let mut object = self.rng.gen_range(0..cells - 1);
        if object >= agent {
            object += 1;
        }
        let facing = if self.cfg.random_start {
            Facing::from_index(self.rng.gen_range(0..4))
        } else {
            Facing::North
        };
        self.place(
            Pos::from_index(agent, self.cfg.grid),
            facing,
            Pos::from_index(object, self.cfg.grid),
        )
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        let act = Action::from_index(action).ok_or(EnvError::InvalidAction(action))?;
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        match act {
            Action::Forward => {
                if let Some(next) = self.agent.ahead(self.facing, self.cfg.grid) {
                    if next != self.object {
                        self.agent = next;
                    }
                }
            }
            Action::TurnLeft => self.facing = self.facing.left(),
            Action::TurnRight => self.facing = self.facing.right(),
            Action::Interact => {}
        }
        self.steps += 1;
        self.done = self.steps >= self.cfg.episode_limit;
        Ok(Step {
            observation: self.observe(action, 0.0),
            reward: 0.0,
            cont: !self.done,
        })
    }

    fn ground_truth(&self) -> GroundTruth {
        GroundTruth::CubeRoom {
            agent: self.agent,
            facing: self.facing,
            object: self.object,
            object_cell: self.object.index(self.cfg.grid),
            object_visible: self.object_visible,
            steps_since_seen: self.last_seen.map(|s| self.steps - s),
        }
    }

    fn grid_size(&self) -> usize {
        self.cfg.grid
    }

    fn view_len(&self) -> usize {
        self.cfg.view_len()
    }

    fn num_tasks(&self) -> usize {
        1
    }

    fn episode_limit(&self) -> usize {
        self.cfg.episode_limit
    }
}
