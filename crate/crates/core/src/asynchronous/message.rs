use std::fmt;

use crate::graph::NodeId;

/// Protocol vocabulary of the asynchronous algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    LoadQuery,
    LoadReply { load: i64 },
    Proposal { amount: i64, tentative_load: i64 },
    Ack { deal: i64 },
}

impl MessageKind {
    pub fn name(&self) -> &'static str {
        match self {
            MessageKind::LoadQuery => "query",
            MessageKind::LoadReply { .. } => "reply",
            MessageKind::Proposal { .. } => "proposal",
            MessageKind::Ack { .. } => "ack",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MessageKind::LoadQuery => write!(f, "query"),
            MessageKind::LoadReply { load } => write!(f, "reply({load})"),
            MessageKind::Proposal { amount, tentative_load } => {
                write!(f, "proposal({amount}, {tentative_load})")
            }
            MessageKind::Ack { deal } => write!(f, "ack({deal})"),
        }
    }
}

/// A message on a directed edge. `seq` increases per directed edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AsyncMessage {
    pub kind: MessageKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub seq: u64,
}

/// A message a node handler wants sent; the engine stamps source and sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outgoing {
    pub to: NodeId,
    pub kind: MessageKind,
}
