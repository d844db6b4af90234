use serde::{Deserialize, Serialize};

use super::{clip, EnvSpec, Environment, StepResult};
use crate::error::{check_dim, Error, Result};

pub const START: [f64; 2] = [0.1, 0.1];
pub const GOAL: [f64; 2] = [0.9, 0.9];
pub const GOAL_RADIUS: f64 = 0.05;
pub const MAX_MOVE: f64 = 0.05;
pub const MAX_STEPS: usize = 200;

/// Agents halt this far short of a wall they would otherwise hit.
const CONTACT_GAP: f64 = 1e-9;

/// Axis-aligned wall segment, serialized as `[x0, y0, x1, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Wall {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<[f64; 4]> for Wall {
    fn from(v: [f64; 4]) -> Self {
        Wall {
            x0: v[0],
            y0: v[1],
            x1: v[2],
            y1: v[3],
        }
    }
}

impl From<Wall> for [f64; 4] {
    fn from(w: Wall) -> Self {
        [w.x0, w.y0, w.x1, w.y1]
    }
}

impl Wall {
    pub fn is_axis_aligned(&self) -> bool {
        self.x0 == self.x1 || self.y0 == self.y1
    }

    /// Fraction `t ∈ [0, 1]` along `p → p + d` where the motion first touches
    /// this wall, if it does.
    fn hit_fraction(&self, p: [f64; 2], d: [f64; 2]) -> Option<f64> {
        let e = [self.x1 - self.x0, self.y1 - self.y0];
        let denom = d[0] * e[1] - d[1] * e[0];
        let w = [self.x0 - p[0], self.y0 - p[1]];
        if denom == 0.0 {
            // parallel: only a collinear overlap counts
            let cross = w[0] * d[1] - w[1] * d[0];
            if cross != 0.0 {
                return None;
            }
            let dd = d[0] * d[0] + d[1] * d[1];
            if dd == 0.0 {
                return None;
            }
            let ta = (w[0] * d[0] + w[1] * d[1]) / dd;
            let tb = ((self.x1 - p[0]) * d[0] + (self.y1 - p[1]) * d[1]) / dd;
            let (lo, hi) = (ta.min(tb), ta.max(tb));
            if hi < 0.0 || lo > 1.0 {
                return None;
            }
            return Some(lo.max(0.0));
        }
        let t = (w[0] * e[1] - w[1] * e[0]) / denom;
        let u = (w[0] * d[1] - w[1] * d[0]) / denom;
        ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some(t)
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        let (xl, xh) = (self.x0.min(self.x1), self.x0.max(self.x1));
        let (yl, yh) = (self.y0.min(self.y1), self.y0.max(self.y1));
        (xl..=xh).contains(&p[0]) && (yl..=yh).contains(&p[1])
    }
}

/// Point mass in the unit square with an S-shaped corridor and a sparse goal.
#[derive(Debug, Clone)]
pub struct PointMaze {
    walls: Vec<Wall>,
    pos: [f64; 2],
    steps: usize,
    done: bool,
}

impl PointMaze {
    /// Two horizontal walls forcing right → up → left → up → right.
    pub fn default_walls() -> Vec<Wall> {
        vec![
            Wall::from([0.0, 0.35, 0.7, 0.35]),
            Wall::from([0.3, 0.65, 1.0, 0.65]),
        ]
    }

    pub fn new(walls: Vec<Wall>) -> Result<Self> {
        for w in &walls {
            if !w.is_axis_aligned() {
                return Err(Error::config(format!("maze wall {w:?} is not axis-aligned")));
            }
            if [w.x0, w.y0, w.x1, w.y1].iter().any(|v| !v.is_finite()) {
                return Err(Error::config("maze wall coordinates must be finite"));
            }
            if w.contains(START) {
                return Err(Error::config(format!("maze wall {w:?} covers the start position")));
            }
        }
        Ok(PointMaze {
            walls,
            pos: START,
            steps: 0,
            done: true,
        })
    }

    /// A live episode at `pos` (must not lie on a wall).
    pub fn with_position(walls: Vec<Wall>, pos: [f64; 2]) -> Result<Self> {
        let mut m = Self::new(walls)?;
        if m.walls.iter().any(|w| w.contains(pos)) {
            return Err(Error::config("position lies on a wall"));
        }
        m.pos = pos;
        m.done = false;
        Ok(m)
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn walls(&self) -> &[Wall] {
        &self.walls
    }

    fn in_goal(p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - GOAL[0], p[1] - GOAL[1]);
        dx * dx + dy * dy <= GOAL_RADIUS * GOAL_RADIUS
    }

    fn advance(&self, action: [f64; 2]) -> [f64; 2] {
        let p = self.pos;
        let target = [
            (p[0] + action[0]).clamp(0.0, 1.0),
            (p[1] + action[1]).clamp(0.0, 1.0),
        ];
        let d = [target[0] - p[0], target[1] - p[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if len == 0.0 {
            return p;
        }
        let hit = self
            .walls
            .iter()
            .filter_map(|w| w.hit_fraction(p, d))
            .fold(f64::INFINITY, f64::min);
        if hit.is_infinite() {
            return target;
        }
        let t = (hit - CONTACT_GAP / len).max(0.0);
        [p[0] + d[0] * t, p[1] + d[1] * t]
    }
}

impl Environment for PointMaze {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 2,
            act_dim: 2,
            act_bound: MAX_MOVE,
            max_episode_steps: MAX_STEPS,
        }
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.pos = START;
        self.steps = 0;
        self.done = false;
        self.pos.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        check_dim("point-mass action", 2, action.len())?;
        self.pos = self.advance([clip(action[0], MAX_MOVE), clip(action[1], MAX_MOVE)]);
        self.steps += 1;
        let reached = Self::in_goal(self.pos);
        let truncated = !reached && self.steps >= MAX_STEPS;
        self.done = reached || truncated;
        Ok(StepResult {
            next_obs: self.pos.to_vec(),
            reward: if reached { 1.0 } else { 0.0 },
            done: self.done,
            truncated,
        })
    }

    fn coverage_point(&self) -> Vec<f64> {
        self.pos.to_vec()
    }

    fn coverage_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0), (0.0, 1.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reset_to_fixed_start() {
        let mut m = PointMaze::new(PointMaze::default_walls()).unwrap();
        assert_eq!(m.reset(1), vec![0.1, 0.1]);
        assert_eq!(m.reset(99), vec![0.1, 0.1]);
    }

    #[test]
    fn free_motion() {
        let mut m = PointMaze::with_position(PointMaze::default_walls(), [0.5, 0.5]).unwrap();
        let r = m.step(&[0.05, 0.0]).unwrap();
        assert_eq!(r.next_obs, vec![0.55, 0.5]);
        assert_eq!(r.reward, 0.0);
        assert!(!r.done);
    }

    #[test]
    fn actions_are_clipped() {
        let mut m = PointMaze::with_position(vec![], [0.5, 0.5]).unwrap();
        let r = m.step(&[1.0, -1.0]).unwrap();
        assert_eq!(r.next_obs, vec![0.55, 0.45]);
    }

    #[test]
    fn wall_blocks_motion_at_contact() {
        let mut m = PointMaze::with_position(PointMaze::default_walls(), [0.2, 0.33]).unwrap();
        let r = m.step(&[0.0, 0.05]).unwrap();
        assert!(r.next_obs[1] < 0.35);
        assert!(r.next_obs[1] > 0.35 - 1e-6);
        // pushing again does not tunnel through
        let r = m.step(&[0.0, 0.05]).unwrap();
        assert!(r.next_obs[1] < 0.35);
    }

    #[test]
    fn gap_lets_agent_through() {
        let mut m = PointMaze::with_position(PointMaze::default_walls(), [0.8, 0.33]).unwrap();
        let r = m.step(&[0.0, 0.05]).unwrap();
        assert!((r.next_obs[1] - 0.38).abs() < 1e-12);
    }

    #[test]
    fn goal_terminates_with_reward() {
        let mut m = PointMaze::with_position(PointMaze::default_walls(), [0.82, 0.9]).unwrap();
        let r = m.step(&[0.05, 0.0]).unwrap();
        assert_eq!(r.reward, 1.0);
        assert!(r.done && r.terminated());
        assert!(matches!(m.step(&[0.0, 0.0]), Err(Error::EpisodeOver)));
    }

    #[test]
    fn goal_out_of_single_step_reach_from_start() {
        let d = ((GOAL[0] - START[0]).powi(2) + (GOAL[1] - START[1]).powi(2)).sqrt();
        assert!(d - GOAL_RADIUS > MAX_MOVE * 2f64.sqrt());
    }

    #[test]
    fn truncation_after_limit() {
        let mut m = PointMaze::new(PointMaze::default_walls()).unwrap();
        m.reset(0);
        for i in 0..MAX_STEPS {
            let r = m.step(&[-0.05, -0.05]).unwrap();
            assert_eq!(r.done, i + 1 == MAX_STEPS);
            assert!(!r.terminated());
        }
    }

    #[test]
    fn rejects_diagonal_wall() {
        assert!(PointMaze::new(vec![Wall::from([0.0, 0.0, 1.0, 1.0])]).is_err());
    }

    #[test]
    fn wall_serializes_as_array() {
        let w = Wall::from([0.0, 0.35, 0.7, 0.35]);
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, "[0.0,0.35,0.7,0.35]");
        assert_eq!(serde_json::from_str::<Wall>(&s).unwrap(), w);
    }

    fn crosses_wall(a: [f64; 2], b: [f64; 2], w: &Wall) -> bool {
        // horizontal walls only in the default layout
        let y = w.y0;
        let (xl, xh) = (w.x0.min(w.x1), w.x0.max(w.x1));
        if (a[1] - y) * (b[1] - y) > 0.0 {
            return false;
        }
        if a[1] == b[1] {
            return a[1] == y && a[0].max(b[0]) >= xl && a[0].min(b[0]) <= xh;
        }
        let t = (y - a[1]) / (b[1] - a[1]);
        let x = a[0] + t * (b[0] - a[0]);
        (xl..=xh).contains(&x)
    }

    proptest! {
        #[test]
        fn stays_in_square_and_off_walls(actions in proptest::collection::vec((-0.1f64..0.1, -0.1f64..0.1), 1..200)) {
            let walls = PointMaze::default_walls();
            let mut m = PointMaze::new(walls.clone()).unwrap();
            m.reset(0);
            let mut prev = m.position();
            for (ax, ay) in actions {
                let r = match m.step(&[ax, ay]) { Ok(r) => r, Err(_) => break };
                let p = [r.next_obs[0], r.next_obs[1]];
                prop_assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
                for w in &walls {
                    prop_assert!(!w.contains(p));
                    prop_assert!(!crosses_wall(prev, p, w));
                }
                prev = p;
                if r.done { break; }
            }
        }
    }
}
