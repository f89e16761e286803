use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Rule, StepChoice};
use crate::names::Pid;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("schedule script ended at step {step} with {enabled} step(s) still enabled")]
    Exhausted { step: usize, enabled: usize },
    #[error("schedule script picks index {index} at step {step}, but only {enabled} step(s) are enabled")]
    OutOfRange { step: usize, index: usize, enabled: usize },
    #[error("step {step}: `{choice}` is not enabled")]
    NotEnabled { step: usize, choice: String },
    #[error("line {line}: `{text}` is not a step index")]
    Parse { line: usize, text: String },
}

/// Picks one of the enabled steps. `enabled` is never empty.
pub trait Scheduler {
    fn choose(&mut self, step: usize, enabled: &[StepChoice]) -> Result<usize, ScheduleError>;
}

/// Uniform choice from a seeded ChaCha stream.
#[derive(Debug, Clone)]
pub struct RandomScheduler {
    rng: ChaCha8Rng,
}

impl RandomScheduler {
    pub fn new(seed: u64) -> Self {
        RandomScheduler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for RandomScheduler {
    fn choose(&mut self, _step: usize, enabled: &[StepChoice]) -> Result<usize, ScheduleError> {
        Ok(self.rng.gen_range(0..enabled.len()))
    }
}

/// Replays a fixed list of indices into the enabled-step list.
#[derive(Debug, Clone, Default)]
pub struct ScriptedScheduler {
    indices: Vec<usize>,
    pos: usize,
}

impl ScriptedScheduler {
    pub fn new(indices: Vec<usize>) -> Self {
        ScriptedScheduler { indices, pos: 0 }
    }

    /// Whitespace-separated indices; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ScheduleError> {
        let mut indices = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            for word in raw.split('#').next().unwrap_or("").split_whitespace() {
                let index = word.parse().map_err(|_| ScheduleError::Parse {
                    line: i + 1,
                    text: word.to_string(),
                })?;
                indices.push(index);
            }
        }
        Ok(Self::new(indices))
    }

    pub fn render(indices: &[usize]) -> String {
        indices.iter().map(|i| format!("{i}\n")).collect()
    }
}

impl Scheduler for ScriptedScheduler {
    fn choose(&mut self, step: usize, enabled: &[StepChoice]) -> Result<usize, ScheduleError> {
        let Some(&index) = self.indices.get(self.pos) else {
            return Err(ScheduleError::Exhausted {
                step,
                enabled: enabled.len(),
            });
        };
        if index >= enabled.len() {
            return Err(ScheduleError::OutOfRange {
                step,
                index,
                enabled: enabled.len(),
            });
        }
        self.pos += 1;
        Ok(index)
    }
}

/// Follows a script while it lasts, then always takes the first step.
#[derive(Debug, Clone, Default)]
pub struct PrefixScheduler {
    pub prefix: Vec<usize>,
}

impl Scheduler for PrefixScheduler {
    fn choose(&mut self, step: usize, enabled: &[StepChoice]) -> Result<usize, ScheduleError> {
        match self.prefix.get(step) {
            Some(&index) if index < enabled.len() => Ok(index),
            Some(&index) => Err(ScheduleError::OutOfRange {
                step,
                index,
                enabled: enabled.len(),
            }),
            None => Ok(0),
        }
    }
}

/// Follows a list of (thread, rule) pairs, taking the first enabled step
/// that matches each. Handy for writing down a schedule by hand.
#[derive(Debug, Clone, Default)]
pub struct RuleScript {
    steps: Vec<(Pid, Rule)>,
}

impl RuleScript {
    pub fn new(steps: impl IntoIterator<Item = (Pid, Rule)>) -> Self {
        RuleScript {
            steps: steps.into_iter().collect(),
        }
    }
}

impl Scheduler for RuleScript {
    fn choose(&mut self, step: usize, enabled: &[StepChoice]) -> Result<usize, ScheduleError> {
        let Some((pid, rule)) = self.steps.get(step) else {
            return Err(ScheduleError::Exhausted {
                step,
                enabled: enabled.len(),
            });
        };
        enabled
            .iter()
            .position(|c| &c.pid == pid && c.rule == *rule)
            .ok_or_else(|| ScheduleError::NotEnabled {
                step,
                choice: format!("{pid} {rule:?}"),
            })
    }
}

/// Replays recorded [`StepChoice`]s by value rather than by index.
#[derive(Debug, Clone, Default)]
pub struct ChoiceScheduler {
    choices: Vec<StepChoice>,
}

impl ChoiceScheduler {
    pub fn new(choices: Vec<StepChoice>) -> Self {
        ChoiceScheduler { choices }
    }
}

impl Scheduler for ChoiceScheduler {
    fn choose(&mut self, step: usize, enabled: &[StepChoice]) -> Result<usize, ScheduleError> {
        let Some(choice) = self.choices.get(step) else {
            return Err(ScheduleError::Exhausted {
                step,
                enabled: enabled.len(),
            });
        };
        enabled
            .iter()
            .position(|c| c == choice)
            .ok_or_else(|| ScheduleError::NotEnabled {
                step,
                choice: choice.to_string(),
            })
    }
}
