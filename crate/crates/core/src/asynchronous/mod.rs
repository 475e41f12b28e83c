//! Asynchronous execution: nodes exchange load queries, proposals and acks
//! over per-edge FIFO channels, one atomic step at a time.

mod engine;
mod message;
mod node;
mod schedule;

pub use engine::{
    run_async, AsyncConfig, AsyncError, AsyncRun, AsyncVerdict, DealRecord, StepTrace,
    MAX_RECORDED_VIOLATIONS,
};
pub(crate) use engine::{deal_budget, DirectedEdges, Protocol, StepMonitor};
pub use message::{AsyncMessage, MessageKind, Outgoing};
pub use node::{node_start_cycle, rr_proposal, Acceptance, AsyncNodeState, NodeError, Phase};
pub use schedule::{ChannelView, SchedulePolicy, Scheduler};
