//! Alternating-bit data link over a k-bounded lossless FIFO channel.
//!
//! Each payload goes out in two phases, `<m,0>` then `<m,1>`, and the
//! sender moves on after `2k+1` acks per phase. The receiver acks every
//! frame, delivers on a 0 to 1 transition and then swallows the next `k`
//! frames.

use std::collections::VecDeque;

use rand::Rng;

use crate::asynchronous::AsyncMessage;

/// What a frame carries. A blob is a frame that does not parse as a
/// protocol message; the receiver drops it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    Message(AsyncMessage),
    Blob(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataFrame {
    pub payload: Payload,
    pub bit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderEvent {
    /// No payload in hand; the ack is dropped.
    Ignored,
    Counted,
    /// Phase 0 finished; now sending `<m,1>`.
    Flipped,
    /// Both phases finished.
    Completed(Payload),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkSender {
    pub k: usize,
    pub current: Option<Payload>,
    pub bit: bool,
    pub ack_count: usize,
}

impl LinkSender {
    pub fn new(k: usize) -> Self {
        LinkSender { k, current: None, bit: false, ack_count: 0 }
    }

    pub fn required_acks(&self) -> usize {
        2 * self.k + 1
    }

    pub fn load(&mut self, payload: Payload) {
        self.current = Some(payload);
        self.bit = false;
        self.ack_count = 0;
    }

    /// The frame to (re)transmit, if any.
    pub fn frame(&self) -> Option<DataFrame> {
        self.current.map(|payload| DataFrame { payload, bit: self.bit })
    }

    pub fn on_ack(&mut self) -> SenderEvent {
        let Some(payload) = self.current else {
            return SenderEvent::Ignored;
        };
        self.ack_count += 1;
        if self.ack_count < self.required_acks() {
            return SenderEvent::Counted;
        }
        self.ack_count = 0;
        if !self.bit {
            self.bit = true;
            return SenderEvent::Flipped;
        }
        self.current = None;
        self.bit = false;
        SenderEvent::Completed(payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkReceiver {
    pub k: usize,
    pub last_bit: bool,
    pub swallow: usize,
}

impl LinkReceiver {
    pub fn new(k: usize) -> Self {
        // Starting on 1 means a lone <m,1> is never taken for a fresh payload.
        LinkReceiver { k, last_bit: true, swallow: 0 }
    }

    /// Consumes a frame; returns the payload to deliver upward, if any.
    /// The caller acks every frame.
    pub fn on_frame(&mut self, frame: &DataFrame) -> Option<Payload> {
        if self.swallow > 0 {
            self.swallow -= 1;
            return None;
        }
        let deliver = !self.last_bit && frame.bit;
        self.last_bit = frame.bit;
        if deliver {
            self.swallow = self.k;
            Some(frame.payload)
        } else {
            None
        }
    }
}

/// Where an item came from. Only the harness looks at this.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Fault,
    Sent(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tag {
    pub origin: Origin,
    pub enqueued: u64,
}

/// How a delivered payload relates to what the sender meant to send.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    /// First delivery of the sender's current payload.
    Legit,
    /// A payload that was delivered or given up on before.
    Stale,
    /// Never sent by the protocol.
    Garbage,
}

/// Result of running a link until it delivers something or goes quiet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MicroReport {
    pub delivered: Option<(Payload, Delivery)>,
    /// Payloads the sender finished without the receiver ever taking them.
    pub lost: Vec<Payload>,
    pub frames_sent: u64,
    pub acks_sent: u64,
    /// Garbage frames or acks consumed, stale deliveries and losses.
    pub fault_events: u64,
    pub actions: u64,
    /// The action cap was hit before delivery or quiet.
    pub exhausted: bool,
}

/// One direction of an edge: the sender end at `src`, the receiver end at
/// `dst`, the data queue and the returning ack queue.
#[derive(Debug, Clone)]
pub struct Link {
    pub capacity: usize,
    pub outbox: VecDeque<(Payload, Tag)>,
    pub sender: LinkSender,
    pub sender_tag: Option<Tag>,
    pub current_delivered: bool,
    pub data: VecDeque<(DataFrame, Origin)>,
    pub receiver: LinkReceiver,
    pub acks: VecDeque<Origin>,
    pub max_occupancy: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Transmit,
    Receive,
    Ack,
}

impl Link {
    /// A clean link for bound `k`. Queues hold at most `max(k, 1)` items.
    pub fn new(k: usize) -> Self {
        Link {
            capacity: k.max(1),
            outbox: VecDeque::new(),
            sender: LinkSender::new(k),
            sender_tag: None,
            current_delivered: false,
            data: VecDeque::new(),
            receiver: LinkReceiver::new(k),
            acks: VecDeque::new(),
            max_occupancy: 0,
        }
    }

    pub fn push(&mut self, payload: Payload, tag: Tag) {
        self.outbox.push_back((payload, tag));
    }

    fn current_pending(&self) -> bool {
        matches!(self.sender_tag, Some(Tag { origin: Origin::Sent(_), .. })) && !self.current_delivered
    }

    /// Protocol payloads not yet handed to the receiver's upper layer.
    pub fn pending(&self) -> usize {
        self.outbox.len() + usize::from(self.current_pending())
    }

    /// Protocol messages not yet handed to the receiver's upper layer.
    pub fn pending_messages(&self) -> impl Iterator<Item = &AsyncMessage> + '_ {
        self.current_message().into_iter().chain(self.outbox.iter().filter_map(|(p, _)| match p {
            Payload::Message(m) => Some(m),
            Payload::Blob(_) => None,
        }))
    }

    fn current_message(&self) -> Option<&AsyncMessage> {
        match &self.sender.current {
            Some(Payload::Message(m)) if self.current_pending() => Some(m),
            _ => None,
        }
    }

    /// Items injected by faults that are still around.
    pub fn garbage(&self) -> usize {
        let sender = usize::from(matches!(self.sender_tag, Some(Tag { origin: Origin::Fault, .. })));
        sender
            + self.data.iter().filter(|(_, o)| *o == Origin::Fault).count()
            + self.acks.iter().filter(|&&o| o == Origin::Fault).count()
    }

    /// Work the scheduler should see: pending payloads plus garbage.
    pub fn work(&self) -> usize {
        self.pending() + self.garbage()
    }

    pub fn oldest(&self) -> Option<u64> {
        let mut oldest = if self.garbage() > 0 { Some(0) } else { None };
        if self.current_pending() {
            oldest = oldest.or(self.sender_tag.map(|t| t.enqueued));
        }
        oldest.or(self.outbox.front().map(|(_, t)| t.enqueued))
    }

    fn enabled(&self) -> Vec<Action> {
        let mut out = Vec::with_capacity(3);
        let has_payload = self.sender.current.is_some() || !self.outbox.is_empty();
        if has_payload && self.data.len() + self.acks.len() < self.capacity {
            out.push(Action::Transmit);
        }
        if !self.data.is_empty() && self.acks.len() < self.capacity {
            out.push(Action::Receive);
        }
        if !self.acks.is_empty() {
            out.push(Action::Ack);
        }
        out
    }

    /// Runs random link actions until one payload reaches the upper layer,
    /// nothing is enabled, or `max_actions` is spent.
    pub fn run_micro<R: Rng>(&mut self, rng: &mut R, max_actions: u64) -> MicroReport {
        let mut report = MicroReport::default();
        while report.actions < max_actions {
            let enabled = self.enabled();
            if enabled.is_empty() {
                return report;
            }
            report.actions += 1;
            match enabled[rng.random_range(0..enabled.len())] {
                Action::Transmit => {
                    if self.sender.current.is_none() {
                        let (payload, tag) = self.outbox.pop_front().expect("transmit needs a payload");
                        self.sender.load(payload);
                        self.sender_tag = Some(tag);
                        self.current_delivered = false;
                    }
                    let frame = self.sender.frame().expect("sender holds a payload");
                    let origin = self.sender_tag.map_or(Origin::Fault, |t| t.origin);
                    self.data.push_back((frame, origin));
                    report.frames_sent += 1;
                }
                Action::Receive => {
                    let (frame, origin) = self.data.pop_front().expect("receive needs a frame");
                    if origin == Origin::Fault {
                        report.fault_events += 1;
                    }
                    self.acks.push_back(origin);
                    report.acks_sent += 1;
                    if let Some(payload) = self.receiver.on_frame(&frame) {
                        let kind = self.classify(origin);
                        if kind == Delivery::Legit {
                            self.current_delivered = true;
                        } else {
                            report.fault_events += 1;
                        }
                        report.delivered = Some((payload, kind));
                    }
                }
                Action::Ack => {
                    let origin = self.acks.pop_front().expect("ack action needs an ack");
                    if origin == Origin::Fault {
                        report.fault_events += 1;
                    }
                    if let SenderEvent::Completed(payload) = self.sender.on_ack() {
                        let tag = self.sender_tag.take();
                        let sent = matches!(tag, Some(Tag { origin: Origin::Sent(_), .. }));
                        if sent && !self.current_delivered {
                            report.lost.push(payload);
                            report.fault_events += 1;
                        }
                        self.current_delivered = false;
                    }
                }
            }
            self.max_occupancy = self.max_occupancy.max(self.data.len()).max(self.acks.len());
            if report.delivered.is_some() {
                return report;
            }
        }
        report.exhausted = true;
        report
    }

    fn classify(&self, origin: Origin) -> Delivery {
        match (origin, self.sender_tag) {
            (Origin::Fault, _) => Delivery::Garbage,
            (Origin::Sent(id), Some(Tag { origin: Origin::Sent(cur), .. })) if id == cur && !self.current_delivered => {
                Delivery::Legit
            }
            (Origin::Sent(_), _) => Delivery::Stale,
        }
    }
}
