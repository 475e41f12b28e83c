//! The asynchronous algorithm over a self-stabilizing data link. Runs may
//! start from an arbitrary configuration: garbage in the channels and
//! scrambled node and link state.

mod engine;
mod fault;
mod link;

pub use engine::{run_selfstab, SelfStabConfig, SelfStabRun, SelfStabVerdict, StabError, StabilizationReport};
pub use fault::{FaultModel, InjectedFaults};
pub use link::{DataFrame, Delivery, Link, LinkReceiver, LinkSender, MicroReport, Origin, Payload, SenderEvent, Tag};
