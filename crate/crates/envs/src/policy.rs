use std::collections::VecDeque;

use rand::Rng;

use crate::grid::{Action, Facing, Pos, NUM_ACTIONS};
use crate::key_door::{KeyDoor, KeyDoorTask};
use crate::{Environment, GroundTruth};

/// Uniform draw over the action set; ignores observations entirely.
pub fn uniform_random_policy<R: Rng + ?Sized>(rng: &mut R) -> usize {
    rng.gen_range(0..NUM_ACTIONS)
}

/// Shortest-path policy with full knowledge of the layout and the hidden
/// task: fetch the key, then head for the paying exit.
pub fn scripted_optimal_action(env: &KeyDoor) -> usize {
    let GroundTruth::KeyDoor {
        agent,
        facing,
        key,
        door,
        goal,
        has_key,
        ..
    } = env.ground_truth()
    else {
        unreachable!("key-door ground truth");
    };
    let target = if !has_key {
        key
    } else {
        match env.task() {
            KeyDoorTask::Goal => goal,
            KeyDoorTask::Door => door,
        }
    };
    first_action_towards(env, agent, facing, target, has_key)
        .unwrap_or(Action::TurnLeft as usize)
}

fn first_action_towards(
    env: &KeyDoor,
    start: Pos,
    facing: Facing,
    target: Pos,
    has_key: bool,
) -> Option<usize> {
    let g = env.grid_size();
    let idx = |p: Pos, f: Facing| p.index(g) * 4 + f.index();
    let mut first: Vec<Option<usize>> = vec![None; g * g * 4];
    let mut seen = vec![false; g * g * 4];
    let mut queue = VecDeque::new();
    seen[idx(start, facing)] = true;
    queue.push_back((start, facing));
    while let Some((p, f)) = queue.pop_front() {
        for action in [Action::Forward, Action::TurnLeft, Action::TurnRight] {
            let (np, nf) = match action {
                Action::Forward => match p.ahead(f, g) {
                    Some(n) if env.passable(n, has_key) => (n, f),
                    _ => continue,
                },
                Action::TurnLeft => (p, f.left()),
                _ => (p, f.right()),
            };
            let i = idx(np, nf);
            if seen[i] {
                continue;
            }
            seen[i] = true;
            let via = first[idx(p, f)].or(Some(action as usize));
            first[i] = via;
            if np == target {
                return via;
            }
            queue.push_back((np, nf));
        }
    }
    None
}
