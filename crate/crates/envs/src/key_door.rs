use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{EnvError, Result};
use crate::grid::{cast_view, Action, CellType, Facing, Pos, NOOP_ACTION};
use crate::observation::Observation;
use crate::{Environment, GroundTruth, Step};

/// Size of the instruction vocabulary shared with the observation encoder.
pub const VOCAB_SIZE: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Token {
    Get = 1,
    Key = 2,
    Then = 3,
    Reach = 4,
    Goal = 5,
    Open = 6,
    Door = 7,
}

pub const KEY_REWARD: f64 = 0.5;
pub const EXIT_REWARD: f64 = 1.0;

/// Which cell pays out once the key is held. The variant is hidden from
/// the agent unless instructions are enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyDoorTask {
    /// Stepping onto the goal while holding the key ends the episode.
    Goal,
    /// Stepping through the door (only possible with the key) ends it.
    Door,
}

impl KeyDoorTask {
    pub fn name(self) -> &'static str {
        match self {
            KeyDoorTask::Goal => "goal",
            KeyDoorTask::Door => "door",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "goal" => Some(KeyDoorTask::Goal),
            "door" => Some(KeyDoorTask::Door),
            _ => None,
        }
    }

    fn instruction(self) -> Vec<usize> {
        let last = match self {
            KeyDoorTask::Goal => [Token::Reach, Token::Goal],
            KeyDoorTask::Door => [Token::Open, Token::Door],
        };
        [Token::Get, Token::Key, Token::Then, last[0], last[1]]
            .iter()
            .map(|t| *t as usize)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeyDoorConfig {
    pub grid: usize,
    pub episode_limit: usize,
    /// Task variants; one is drawn uniformly at every reset.
    pub tasks: Vec<KeyDoorTask>,
    /// Emit an instruction naming the target cell.
    pub instructions: bool,
}

impl Default for KeyDoorConfig {
    fn default() -> Self {
        Self {
            grid: 5,
            episode_limit: 40,
            tasks: vec![KeyDoorTask::Goal, KeyDoorTask::Door],
            instructions: false,
        }
    }
}

impl KeyDoorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 3 {
            return Err(EnvError::Config(format!("key-door grid must be >= 3, got {}", self.grid)));
        }
        if self.episode_limit == 0 {
            return Err(EnvError::Config("episode_limit must be positive".into()));
        }
        if self.tasks.is_empty() {
            return Err(EnvError::Config("at least one key-door task is required".into()));
        }
        Ok(())
    }

    pub fn view_len(&self) -> usize {
        2 * self.grid - 1
    }

    pub fn key(&self) -> Pos {
        Pos::new(0, self.grid - 1)
    }

    pub fn door(&self) -> Pos {
        Pos::new(0, 0)
    }

    pub fn goal(&self) -> Pos {
        Pos::new(self.grid - 1, 0)
    }
}

/// Room with a key, a locked door and a goal. Walking onto the key picks
/// it up; the door only opens for a key holder.
#[derive(Clone, Debug)]
pub struct KeyDoor {
    cfg: KeyDoorConfig,
    rng: ChaCha8Rng,
    agent: Pos,
    facing: Facing,
    has_key: bool,
    task_id: usize,
    steps: usize,
    done: bool,
}

impl KeyDoor {
    pub fn new(cfg: KeyDoorConfig) -> Result<Self> {
        cfg.validate()?;
        let mut env = Self {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(0),
            agent: Pos::new(1, 1),
            facing: Facing::North,
            has_key: false,
            task_id: 0,
            steps: 0,
            done: true,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn config(&self) -> &KeyDoorConfig {
        &self.cfg
    }

    pub fn task(&self) -> KeyDoorTask {
        self.cfg.tasks[self.task_id]
    }

    /// Like `reset` but with the task variant chosen by the caller. The
    /// start position is drawn exactly as in `reset`.
    pub fn reset_with_task(&mut self, seed: u64, task_id: usize) -> Observation {
        assert!(task_id < self.cfg.tasks.len());
        self.start(seed);
        self.task_id = task_id;
        self.observe(NOOP_ACTION, 0.0)
    }

    fn start(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.cfg.grid;
        let reserved = [self.cfg.key(), self.cfg.door(), self.cfg.goal()];
        let free: Vec<Pos> = (0..g * g)
            .map(|i| Pos::from_index(i, g))
            .filter(|p| !reserved.contains(p))
            .collect();
        self.agent = free[self.rng.gen_range(0..free.len())];
        self.facing = Facing::from_index(self.rng.gen_range(0..4));
        self.has_key = false;
        self.steps = 0;
        self.done = false;
    }

    pub(crate) fn cell(&self, p: Pos) -> CellType {
        if p == self.cfg.door() {
            CellType::Door
        } else if p == self.cfg.goal() {
            CellType::Goal
        } else if p == self.cfg.key() && !self.has_key {
            CellType::Key
        } else {
            CellType::Empty
        }
    }

    pub(crate) fn passable(&self, p: Pos, has_key: bool) -> bool {
        p != self.cfg.door() || has_key
    }

    fn observe(&self, prev_action: usize, reward: f64) -> Observation {
        let g = self.cfg.grid as i64;
        let view = cast_view(self.agent, self.facing, self.cfg.view_len(), |x, y| {
            if x < 0 || y < 0 || x >= g || y >= g {
                CellType::Wall
            } else {
                self.cell(Pos::new(x as usize, y as usize))
            }
        });
        Observation {
            view: view.data,
            view_len: self.cfg.view_len(),
            instruction: if self.cfg.instructions {
                self.task().instruction()
            } else {
                Vec::new()
            },
            prev_action,
            reward,
        }
    }
}

impl Environment for KeyDoor {
    fn reset(&mut self, seed: u64) -> Observation {
        self.start(seed);
        self.task_id = self.rng.gen_range(0..self.cfg.tasks.len());
        self.observe(NOOP_ACTION, 0.0)
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        let act = Action::from_index(action).ok_or(EnvError::InvalidAction(action))?;
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let mut reward = 0.0;
        match act {
            Action::Forward => {
                if let Some(next) = self.agent.ahead(self.facing, self.cfg.grid) {
                    if self.passable(next, self.has_key) {
                        self.agent = next;
                        if next == self.cfg.key() && !self.has_key {
                            self.has_key = true;
                            reward = KEY_REWARD;
                        } else if self.has_key {
                            let exit = match self.task() {
                                KeyDoorTask::Goal => self.cfg.goal(),
                                KeyDoorTask::Door => self.cfg.door(),
                            };
                            if next == exit {
                                reward = EXIT_REWARD;
                                self.done = true;
                            }
                        }
                    }
                }
            }
            Action::TurnLeft => self.facing = self.facing.left(),
            Action::TurnRight => self.facing = self.facing.right(),
            Action::Interact => {}
        }
        self.steps += 1;
        if self.steps >= self.cfg.episode_limit {
            self.done = true;
        }
        Ok(Step {
            observation: self.observe(action, reward),
            reward,
            cont: !self.done,
        })
    }

    fn ground_truth(&self) -> GroundTruth {
        GroundTruth::KeyDoor {
            agent: self.agent,
            facing: self.facing,
            key: self.cfg.key(),
            door: self.cfg.door(),
            goal: self.cfg.goal(),
            has_key: self.has_key,
            task_id: self.task_id,
        }
    }

    fn grid_size(&self) -> usize {
        self.cfg.grid
    }

    fn view_len(&self) -> usize {
        self.cfg.view_len()
    }

    fn num_tasks(&self) -> usize {
        self.cfg.tasks.len()
    }

    fn episode_limit(&self) -> usize {
        self.cfg.episode_limit
    }
}
