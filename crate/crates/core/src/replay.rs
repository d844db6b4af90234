//! Fixed-capacity ring buffer of skill-labeled transitions.

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    /// Skill that produced `a`.
    pub z: usize,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    /// Skill used at the following step.
    pub z_next: usize,
    /// True only for genuine termination; time-limit cuts stay `false`.
    pub done: bool,
}

/// Column-oriented minibatch, one transition per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub s: Matrix,
    pub z: Vec<usize>,
    pub a: Matrix,
    pub r: Vec<f64>,
    pub s_next: Matrix,
    pub z_next: Vec<usize>,
    pub done: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn from_transitions(ts: &[Transition]) -> Result<Batch> {
        let rows = |f: fn(&Transition) -> &Vec<f64>| {
            Matrix::from_rows(&ts.iter().map(f).collect::<Vec<_>>())
        };
        Ok(Batch {
            s: rows(|t| &t.s)?,
            z: ts.iter().map(|t| t.z).collect(),
            a: rows(|t| &t.a)?,
            r: ts.iter().map(|t| t.r).collect(),
            s_next: rows(|t| &t.s_next)?,
            z_next: ts.iter().map(|t| t.z_next).collect(),
            done: ts.iter().map(|t| t.done).collect(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    dims: Option<(usize, usize)>,
    obs: Vec<f64>,
    act: Vec<f64>,
    next_obs: Vec<f64>,
    rew: Vec<f64>,
    z: Vec<usize>,
    z_next: Vec<usize>,
    done: Vec<bool>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be at least 1"));
        }
        Ok(ReplayBuffer {
            capacity,
            dims: None,
            obs: Vec::new(),
            act: Vec::new(),
            next_obs: Vec::new(),
            rew: Vec::new(),
            z: Vec::new(),
            z_next: Vec::new(),
            done: Vec::new(),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.rew.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rew.is_empty()
    }

    /// Appends `t`, overwriting the oldest entry once full.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        let (od, ad) = *self.dims.get_or_insert((t.s.len(), t.a.len()));
        check_dim("transition state", od, t.s.len())?;
        check_dim("transition next state", od, t.s_next.len())?;
        check_dim("transition action", ad, t.a.len())?;
        if self.len() < self.capacity {
            self.obs.extend_from_slice(&t.s);
            self.act.extend_from_slice(&t.a);
            self.next_obs.extend_from_slice(&t.s_next);
            self.rew.push(t.r);
            self.z.push(t.z);
            self.z_next.push(t.z_next);
            self.done.push(t.done);
        } else {
            let i = self.cursor;
            self.obs[i * od..(i + 1) * od].copy_from_slice(&t.s);
            self.act[i * ad..(i + 1) * ad].copy_from_slice(&t.a);
            self.next_obs[i * od..(i + 1) * od].copy_from_slice(&t.s_next);
            self.rew[i] = t.r;
            self.z[i] = t.z;
            self.z_next[i] = t.z_next;
            self.done[i] = t.done;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Transition at storage slot `i`.
    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.len() {
            return None;
        }
        let (od, ad) = self.dims?;
        Some(Transition {
            s: self.obs[i * od..(i + 1) * od].to_vec(),
            z: self.z[i],
            a: self.act[i * ad..(i + 1) * ad].to_vec(),
            r: self.rew[i],
            s_next: self.next_obs[i * od..(i + 1) * od].to_vec(),
            z_next: self.z_next[i],
            done: self.done[i],
        })
    }

    /// Contents from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = Transition> + '_ {
        let start = if self.len() < self.capacity { 0 } else { self.cursor };
        (0..self.len()).map(move |k| self.get((start + k) % self.len()).unwrap())
    }

    /// `batch_size` uniform draws with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let n = self.len();
        Ok((0..batch_size).map(|_| rng.gen_range(0..n)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        Ok(self
            .sample_indices(batch_size, rng)?
            .into_iter()
            .map(|i| self.get(i).unwrap())
            .collect())
    }

    /// Same draws as [`sample`](Self::sample), gathered straight into matrices.
    pub fn sample_batch<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch> {
        let idx = self.sample_indices(batch_size, rng)?;
        let (od, ad) = self.dims.expect("non-empty buffer has dims");
        let gather = |src: &[f64], d: usize| {
            let mut out = Vec::with_capacity(idx.len() * d);
            for &i in &idx {
                out.extend_from_slice(&src[i * d..(i + 1) * d]);
            }
            Matrix::from_vec(idx.len(), d, out)
        };
        Ok(Batch {
            s: gather(&self.obs, od)?,
            z: idx.iter().map(|&i| self.z[i]).collect(),
            a: gather(&self.act, ad)?,
            r: idx.iter().map(|&i| self.rew[i]).collect(),
            s_next: gather(&self.next_obs, od)?,
            z_next: idx.iter().map(|&i| self.z_next[i]).collect(),
            done: idx.iter().map(|&i| self.done[i]).collect(),
        })
    }
}
