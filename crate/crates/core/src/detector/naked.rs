use std::collections::BTreeMap;

use super::{Detector, LabelSource, Violation};
use crate::names::{Label, Name, Pid};

/// The plain semantics: no metadata, never reports.
///
/// Used wherever configurations are compared across schedules, since
/// detector bookkeeping (fresh read labels, clock increments) would make
/// otherwise commuting steps look dependent.
#[derive(Clone, Copy, Debug, Default)]
pub struct Undecorated;

impl Detector for Undecorated {
    type Knowledge = ();
    type Record = ();

    fn name(&self) -> &'static str {
        "none"
    }

    fn initial(&self, vars: &[Name], _labels: &mut LabelSource<'_>) -> ((), Vec<()>) {
        ((), vec![(); vars.len()])
    }

    fn empty(&self) {}

    fn read(&self, _: &Name, _: &mut (), _: &mut (), _: &mut LabelSource<'_>) -> Result<Option<Label>, Violation> {
        Ok(None)
    }

    fn write(&self, _: &Name, _: &mut (), _: &mut (), _: &mut LabelSource<'_>) -> Result<Option<Label>, Violation> {
        Ok(None)
    }

    fn publish(&self, _: &Pid, _: &mut ()) {}

    fn learn(&self, _: &mut (), _: &()) {}

    fn spawn(&self, _: &Pid, _: &mut (), _: &Pid) {}

    fn rendezvous(&self, _: (&Pid, &mut ()), _: (&Pid, &mut ())) {}

    fn collect(&self, _: &mut (), _: &BTreeMap<Name, ()>) {}

    fn knowledge_size(&self, _: &()) -> usize {
        0
    }

    fn record_size(&self, _: &()) -> usize {
        0
    }
}
