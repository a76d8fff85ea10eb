//! Deterministic batch construction.
//!
//! Single-task paradigms shuffle once per epoch and chunk. MTL draws half a
//! batch from each of two independently shuffled per-task streams; the
//! shorter stream recycles (reshuffling each cycle) until the longer stream
//! is exhausted. Stream shuffles derive only from (epoch seed, task, cycle),
//! so an MTL run and a single-task run with the same seed walk the same
//! stance-instance order.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{Paradigm, TaskTag, TrainingInstance};
use crate::util::derive_seed;

use super::{TrainConfig, TrainError};

/// Indices into the instance list for one optimizer step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Batch {
    /// ST-FT / ST-CoT: one homogeneous chunk.
    Single(Vec<usize>),
    /// MTL: half stance, half rationale.
    Mixed {
        stance: Vec<usize>,
        rationale: Vec<usize>,
    },
}

impl Batch {
    pub fn len(&self) -> usize {
        match self {
            Batch::Single(v) => v.len(),
            Batch::Mixed { stance, rationale } => stance.len() + rationale.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn task_tag_name(task: TaskTag) -> &'static str {
    match task {
        TaskTag::StanceTask => "stance",
        TaskTag::RationaleTask => "rationale",
    }
}

fn shuffled(indices: &[usize], epoch_seed: u64, task: TaskTag, cycle: usize) -> Vec<usize> {
    let mut order = indices.to_vec();
    let seed = derive_seed(epoch_seed, &[task_tag_name(task), &cycle.to_string()]);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// A per-task index stream that optionally recycles with reshuffling.
struct Stream {
    base: Vec<usize>,
    order: Vec<usize>,
    pos: usize,
    cycle: usize,
    epoch_seed: u64,
    task: TaskTag,
}

impl Stream {
    fn new(base: Vec<usize>, epoch_seed: u64, task: TaskTag) -> Self {
        let order = shuffled(&base, epoch_seed, task, 0);
        Stream {
            base,
            order,
            pos: 0,
            cycle: 0,
            epoch_seed,
            task,
        }
    }

    fn remaining(&self) -> usize {
        self.order.len() - self.pos
    }

    /// Take up to `want`; recycling reshuffles and continues.
    fn take(&mut self, want: usize, recycle: bool) -> Vec<usize> {
        let mut out = Vec::with_capacity(want);
        while out.len() < want {
            if self.pos == self.order.len() {
                if !recycle {
                    break;
                }
                self.cycle += 1;
                self.order = shuffled(&self.base, self.epoch_seed, self.task, self.cycle);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Build the batch sequence for one epoch.
pub fn build_batches(
    instances: &[TrainingInstance],
    config: &TrainConfig,
    epoch_seed: u64,
) -> Result<Vec<Batch>, TrainError> {
    if instances.is_empty() {
        return Err(TrainError::EmptyInstanceList);
    }
    let batch_size = config.batch_size.max(1);
    match config.paradigm {
        Paradigm::StFt | Paradigm::StCot => {
            let indices: Vec<usize> = (0..instances.len()).collect();
            let order = shuffled(&indices, epoch_seed, TaskTag::StanceTask, 0);
            Ok(order
                .chunks(batch_size)
                .map(|chunk| Batch::Single(chunk.to_vec()))
                .collect())
        }
        Paradigm::Mtl => {
            if !batch_size.is_multiple_of(2) {
                return Err(TrainError::OddMtlBatchSize(batch_size));
            }
            let half = batch_size / 2;
            let mut stance_base = Vec::new();
            let mut rationale_base = Vec::new();
            for (idx, instance) in instances.iter().enumerate() {
                match instance.task {
                    TaskTag::StanceTask => stance_base.push(idx),
                    TaskTag::RationaleTask => rationale_base.push(idx),
                }
            }
            if stance_base.is_empty() {
                return Err(TrainError::EmptyTaskStream(TaskTag::StanceTask));
            }
            if rationale_base.is_empty() {
                return Err(TrainError::EmptyTaskStream(TaskTag::RationaleTask));
            }

            // only a strictly shorter stream recycles; equal-length streams
            // drain in lockstep so a partial final batch stays balanced
            let stance_recycles = stance_base.len() < rationale_base.len();
            let rationale_recycles = rationale_base.len() < stance_base.len();
            let longer_len = stance_base.len().max(rationale_base.len());
            let steps = longer_len.div_ceil(half);

            let mut stance = Stream::new(stance_base, epoch_seed, TaskTag::StanceTask);
            let mut rationale = Stream::new(rationale_base, epoch_seed, TaskTag::RationaleTask);

            let mut batches = Vec::with_capacity(steps);
            for _ in 0..steps {
                let stance_take = if stance_recycles {
                    half
                } else {
                    stance.remaining().min(half)
                };
                let rationale_take = if rationale_recycles {
                    half
                } else {
                    rationale.remaining().min(half)
                };
                batches.push(Batch::Mixed {
                    stance: stance.take(stance_take, stance_recycles),
                    rationale: rationale.take(rationale_take, rationale_recycles),
                });
            }
            Ok(batches)
        }
    }
}
