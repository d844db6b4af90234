use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::ActorLayout;
use crate::error::{check_dim, Error, Result};
use crate::numerics::{AdamState, Matrix, NetConfig, NetworkParams};

/// Indicator vector of length `k` with a one at `z`.
pub fn one_hot(z: usize, k: usize) -> Result<Vec<f64>> {
    if z >= k {
        return Err(Error::OutOfRange {
            what: "skill label",
            index: z,
            limit: k,
        });
    }
    let mut v = vec![0.0; k];
    v[z] = 1.0;
    Ok(v)
}

/// Deterministic policy `π(s, z)` over `styles` skills.
///
/// Centralized: one network fed `[s | one_hot(z)]`. Separate: network `z`
/// fed `s` alone. Both use a `tanh` head scaled to the action bound.
#[derive(Debug, Clone)]
pub struct Actor {
    layout: ActorLayout,
    styles: usize,
    obs_dim: usize,
    act_dim: usize,
    act_bound: f64,
    pub nets: Vec<NetworkParams>,
    pub targets: Vec<NetworkParams>,
    pub(crate) opts: Vec<AdamState>,
}

impl Actor {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        layout: ActorLayout,
        styles: usize,
        obs_dim: usize,
        act_dim: usize,
        act_bound: f64,
        hidden: &[usize],
        seed_for: impl Fn(usize) -> u64,
    ) -> Result<Self> {
        if styles == 0 {
            return Err(Error::config("an actor needs at least one style"));
        }
        let (input, count) = match layout {
            ActorLayout::Centralized => (obs_dim + styles, 1),
            ActorLayout::Separate => (obs_dim, styles),
        };
        let cfg = NetConfig::bounded_head(input, hidden, act_dim, act_bound)?;
        let nets = (0..count)
            .map(|j| NetworkParams::init(&cfg, seed_for(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Actor {
            layout,
            styles,
            obs_dim,
            act_dim,
            act_bound,
            targets: nets.clone(),
            opts: nets.iter().map(AdamState::new).collect(),
            nets,
        })
    }

    pub fn layout(&self) -> ActorLayout {
        self.layout
    }

    pub fn styles(&self) -> usize {
        self.styles
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    pub fn act_bound(&self) -> f64 {
        self.act_bound
    }

    /// Network index and input row for one `(s, z)`.
    pub(crate) fn network_input(&self, s: &[f64], z: usize) -> Result<(usize, Vec<f64>)> {
        check_dim("actor state", self.obs_dim, s.len())?;
        match self.layout {
            ActorLayout::Centralized => {
                let mut x = s.to_vec();
                x.extend(one_hot(z, self.styles)?);
                Ok((0, x))
            }
            ActorLayout::Separate => {
                one_hot(z, self.styles)?;
                Ok((z, s.to_vec()))
            }
        }
    }

    /// Input matrix for running every row of `states` under style `z`.
    pub(crate) fn style_inputs(&self, states: &Matrix, z: usize) -> Result<(usize, Matrix)> {
        check_dim("actor state width", self.obs_dim, states.cols())?;
        match self.layout {
            ActorLayout::Centralized => {
                let code = one_hot(z, self.styles)?;
                let mut tag = Matrix::zeros(states.rows(), self.styles);
                for r in 0..states.rows() {
                    tag.row_mut(r).copy_from_slice(&code);
                }
                Ok((0, states.hcat(&tag)?))
            }
            ActorLayout::Separate => {
                one_hot(z, self.styles)?;
                Ok((z, states.clone()))
            }
        }
    }

    /// Noiseless action from the online policy.
    pub fn act(&self, s: &[f64], z: usize) -> Result<Vec<f64>> {
        let (net, x) = self.network_input(s, z)?;
        Ok(self.nets[net].forward(&x)?.0)
    }

    /// One action per row, row `r` using skill `zs[r]`.
    pub fn act_batch(&self, states: &Matrix, zs: &[usize], use_target: bool) -> Result<Matrix> {
        check_dim("skill labels", states.rows(), zs.len())?;
        let nets = if use_target { &self.targets } else { &self.nets };
        let mut out = Matrix::zeros(states.rows(), self.act_dim);
        match self.layout {
            ActorLayout::Centralized => {
                let mut tags = Matrix::zeros(states.rows(), self.styles);
                for (r, &z) in zs.iter().enumerate() {
                    tags.row_mut(r).copy_from_slice(&one_hot(z, self.styles)?);
                }
                out = nets[0].predict_batch(&states.hcat(&tags)?)?;
            }
            ActorLayout::Separate => {
                if let Some(&bad) = zs.iter().find(|&&z| z >= self.styles) {
                    return Err(Error::OutOfRange {
                        what: "skill label",
                        index: bad,
                        limit: self.styles,
                    });
                }
                for j in 0..self.styles {
                    let rows: Vec<usize> = (0..zs.len()).filter(|&r| zs[r] == j).collect();
                    if rows.is_empty() {
                        continue;
                    }
                    let sub = Matrix::from_rows(&rows.iter().map(|&r| states.row(r)).collect::<Vec<_>>())?;
                    let acts = nets[j].predict_batch(&sub)?;
                    for (k, &r) in rows.iter().enumerate() {
                        out.row_mut(r).copy_from_slice(acts.row(k));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// `π(s, z)` plus Gaussian noise of std `noise_std` per dimension, clipped
/// to `[-act_bound, act_bound]`.
pub fn select_action<R: Rng + ?Sized>(
    actor: &Actor,
    s: &[f64],
    z: usize,
    noise_std: f64,
    rng: &mut R,
    act_bound: f64,
) -> Result<Vec<f64>> {
    let mut a = actor.act(s, z)?;
    if noise_std > 0.0 {
        let normal = Normal::new(0.0, noise_std).map_err(|e| Error::config(e.to_string()))?;
        for v in a.iter_mut() {
            *v += normal.sample(rng);
        }
    }
    for v in a.iter_mut() {
        *v = v.clamp(-act_bound, act_bound);
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_hot_cases() {
        assert_eq!(one_hot(2, 4).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(one_hot(0, 4).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!(one_hot(4, 4).is_err());
        for z in 0..4 {
            assert_eq!(one_hot(z, 4).unwrap().iter().sum::<f64>(), 1.0);
        }
    }

    fn actor(layout: ActorLayout) -> Actor {
        Actor::new(layout, 4, 3, 2, 1.5, &[8, 8], |j| 100 + j as u64).unwrap()
    }

    #[test]
    fn noiseless_action_is_policy_output() {
        let a = actor(ActorLayout::Centralized);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = [0.1, -0.2, 0.3];
        assert_eq!(select_action(&a, &s, 2, 0.0, &mut rng, 1.5).unwrap(), a.act(&s, 2).unwrap());
    }

    #[test]
    fn huge_noise_still_in_bounds_and_reproducible() {
        let a = actor(ActorLayout::Centralized);
        let s = [0.1, -0.2, 0.3];
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            select_action(&a, &s, 1, 1e6, &mut rng, 1.5).unwrap()
        };
        let x = draw(4);
        assert!(x.iter().all(|v| v.abs() <= 1.5));
        assert_eq!(x, draw(4));
    }

    #[test]
    fn batch_matches_single_for_both_layouts() {
        for layout in [ActorLayout::Centralized, ActorLayout::Separate] {
            let a = actor(layout);
            let states = Matrix::from_rows(&[[0.1, 0.2, 0.3], [-0.5, 0.0, 0.9], [1.0, 1.0, -1.0]]).unwrap();
            let zs = [3, 0, 3];
            let batch = a.act_batch(&states, &zs, false).unwrap();
            for r in 0..3 {
                let single = a.act(states.row(r), zs[r]).unwrap();
                for (x, y) in batch.row(r).iter().zip(&single) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
            assert!(a.act_batch(&states, &[0, 4, 1], false).is_err());
        }
    }

    #[test]
    fn separate_layout_has_one_net_per_style() {
        let a = actor(ActorLayout::Separate);
        assert_eq!(a.nets.len(), 4);
        assert_eq!(a.nets[0].input_dim(), 3);
        let c = actor(ActorLayout::Centralized);
        assert_eq!(c.nets.len(), 1);
        assert_eq!(c.nets[0].input_dim(), 7);
    }

    proptest! {
        #[test]
        fn actions_within_bound(s in proptest::collection::vec(-50.0f64..50.0, 3), z in 0usize..4) {
            let a = actor(ActorLayout::Centralized);
            for v in a.act(&s, z).unwrap() {
                prop_assert!(v.abs() <= 1.5);
            }
        }
    }
}
