//! Counter-based random streams.
//!
//! Every `(trial, stage, iteration)` triple maps to its own ChaCha stream: the
//! key comes from the base seed, the 64-bit stream id from `(trial, stage)`
//! and the block counter starts at an offset derived from the iteration. Any
//! stream can be opened directly without replaying the others, which keeps
//! runs bit-identical under any scheduling of trials onto workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stage index reserved for drawing the problem instance of a trial.
pub const SETUP_STAGE: u32 = u32::MAX;
/// Stage index reserved for calibration probes.
pub const PROBE_STAGE: u32 = u32::MAX - 1;

/// Words reserved per iteration inside one `(trial, stage)` stream.
const ITERATION_SHIFT: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self, trial: u32) -> TrialStreams {
        TrialStreams {
            seed: self.seed,
            trial,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialStreams {
    seed: u64,
    trial: u32,
}

impl TrialStreams {
    pub fn trial_index(&self) -> u32 {
        self.trial
    }

    pub fn stage(&self, stage: u32) -> RunStreams {
        RunStreams {
            seed: self.seed,
            trial: self.trial,
            stage,
        }
    }

    pub fn setup(&self) -> StreamRng {
        self.stage(SETUP_STAGE).iteration(0)
    }

    pub fn probe(&self) -> StreamRng {
        self.stage(PROBE_STAGE).iteration(0)
    }
}

/// Streams for one run of a single-stage method; one generator per iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunStreams {
    seed: u64,
    trial: u32,
    stage: u32,
}

impl RunStreams {
    /// Shorthand for trial 0, stage 0 of `seed`.
    pub fn from_seed(seed: u64) -> Self {
        Streams::new(seed).trial(0).stage(0)
    }

    pub fn stage_index(&self) -> u32 {
        self.stage
    }

    pub fn with_stage(&self, stage: u32) -> Self {
        RunStreams { stage, ..*self }
    }

    pub fn iteration(&self, iteration: usize) -> StreamRng {
        let mut rng = StreamRng::seed_from_u64(self.seed);
        rng.set_stream((u64::from(self.trial) << 32) | u64::from(self.stage));
        rng.set_word_pos((iteration as u128) << ITERATION_SHIFT);
        rng
    }
}
