use crate::error::{check_dim, Error, Result};
use crate::numerics::{AdamState, ForwardCache, Matrix, NetConfig, NetworkParams};

/// Which network of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticId {
    First,
    Second,
}

impl CriticId {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(CriticId::First),
            2 => Ok(CriticId::Second),
            _ => Err(Error::OutOfRange {
                what: "critic index",
                index: i,
                limit: 2,
            }),
        }
    }
}

/// The four styled estimators built from a critic pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    First,
    Second,
    /// Radical: the larger of the two.
    Max,
    /// Conservative: the smaller of the two.
    Min,
}

impl Style {
    pub fn from_index(j: usize) -> Result<Self> {
        match j {
            0 => Ok(Style::First),
            1 => Ok(Style::Second),
            2 => Ok(Style::Max),
            3 => Ok(Style::Min),
            _ => Err(Error::OutOfRange {
                what: "style",
                index: j,
                limit: 4,
            }),
        }
    }

    /// Which network a style reads for one sample; ties go to the first.
    pub fn select(self, q1: f64, q2: f64) -> CriticId {
        match self {
            Style::First => CriticId::First,
            Style::Second => CriticId::Second,
            Style::Max if q1 >= q2 => CriticId::First,
            Style::Min if q1 <= q2 => CriticId::First,
            Style::Max | Style::Min => CriticId::Second,
        }
    }

    pub fn needs_second(self) -> bool {
        self != Style::First
    }
}

/// Twin Q-networks with target copies. With `negate_second`, the second
/// network's raw output is negated, so the network itself regresses toward the
/// opposite of every target.
#[derive(Debug, Clone)]
pub struct CriticEnsemble {
    pub net1: NetworkParams,
    pub net2: NetworkParams,
    pub target1: NetworkParams,
    pub target2: NetworkParams,
    pub(crate) opt1: AdamState,
    pub(crate) opt2: AdamState,
    negate_second: bool,
    twin: bool,
    obs_dim: usize,
    act_dim: usize,
}

impl CriticEnsemble {
    pub fn new(
        obs_dim: usize,
        act_dim: usize,
        hidden: &[usize],
        negate_second: bool,
        twin: bool,
        seeds: (u64, u64),
    ) -> Result<Self> {
        let cfg = NetConfig::linear_head(obs_dim + act_dim, hidden, 1)?;
        let net1 = NetworkParams::init(&cfg, seeds.0)?;
        let net2 = NetworkParams::init(&cfg, seeds.1)?;
        Self::from_nets(net1, net2, negate_second, twin, obs_dim)
    }

    pub fn from_nets(
        net1: NetworkParams,
        net2: NetworkParams,
        negate_second: bool,
        twin: bool,
        obs_dim: usize,
    ) -> Result<Self> {
        if !net1.same_shape(&net2) || net1.output_dim() != 1 || net1.input_dim() <= obs_dim {
            return Err(Error::config("critics must share a shape with a scalar output"));
        }
        let act_dim = net1.input_dim() - obs_dim;
        Ok(CriticEnsemble {
            opt1: AdamState::new(&net1),
            opt2: AdamState::new(&net2),
            target1: net1.clone(),
            target2: net2.clone(),
            net1,
            net2,
            negate_second,
            twin,
            obs_dim,
            act_dim,
        })
    }

    pub fn negate_second(&self) -> bool {
        self.negate_second
    }

    pub fn set_negate_second(&mut self, on: bool) {
        self.negate_second = on;
    }

    pub fn is_twin(&self) -> bool {
        self.twin
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Output sign applied to network `id`.
    pub fn sign(&self, id: CriticId) -> f64 {
        match id {
            CriticId::Second if self.negate_second => -1.0,
            _ => 1.0,
        }
    }

    pub fn net(&self, id: CriticId, use_target: bool) -> &NetworkParams {
        match (id, use_target) {
            (CriticId::First, false) => &self.net1,
            (CriticId::First, true) => &self.target1,
            (CriticId::Second, false) => &self.net2,
            (CriticId::Second, true) => &self.target2,
        }
    }

    fn concat(&self, s: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        check_dim("critic state", self.obs_dim, s.len())?;
        check_dim("critic action", self.act_dim, a.len())?;
        Ok(s.iter().chain(a).copied().collect())
    }

    /// Post-negation value of network `i ∈ {1, 2}` at `(s, a)`.
    pub fn critic_raw(&self, i: usize, s: &[f64], a: &[f64], use_target: bool) -> Result<f64> {
        let id = CriticId::from_index(i)?;
        let x = self.concat(s, a)?;
        let (out, _) = self.net(id, use_target).forward(&x)?;
        Ok(self.sign(id) * out[0])
    }

    /// Post-negation values of one network on `[s | a]` rows, with the cache.
    pub fn q_batch(&self, id: CriticId, sa: &Matrix, use_target: bool) -> Result<(Vec<f64>, ForwardCache)> {
        let (out, cache) = self.net(id, use_target).forward_batch(sa)?;
        let sign = self.sign(id);
        Ok((out.data().iter().map(|q| sign * q).collect(), cache))
    }

    /// Styled value `Q^j(s, a)` for `j ∈ {0, 1, 2, 3}` on the online networks.
    pub fn styled_q(&self, j: usize, s: &[f64], a: &[f64]) -> Result<f64> {
        let style = Style::from_index(j)?;
        let q1 = self.critic_raw(1, s, a, false)?;
        if !style.needs_second() {
            return Ok(q1);
        }
        self.require_twin()?;
        let q2 = self.critic_raw(2, s, a, false)?;
        Ok(match style.select(q1, q2) {
            CriticId::First => q1,
            CriticId::Second => q2,
        })
    }

    pub(crate) fn require_twin(&self) -> Result<()> {
        if self.twin {
            Ok(())
        } else {
            Err(Error::config("styles beyond the first need twin critics"))
        }
    }

    pub fn target_params_max_abs_gap(&self) -> f64 {
        let gap = |a: &NetworkParams, b: &NetworkParams| {
            a.values()
                .zip(b.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        gap(&self.net1, &self.target1).max(gap(&self.net2, &self.target2))
    }
}
