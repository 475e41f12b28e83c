//! Delivery schedulers. A scheduler picks which non-empty channel delivers
//! next; every policy is subject to the same age cap so no message waits
//! forever.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchedulePolicy {
    /// Cycles through channels in a fixed order.
    RoundRobinFair,
    /// Uniformly random non-empty channel.
    RandomFair { seed: u64 },
    /// Longest queue first (random tie-break), starving short queues up to the age cap.
    AdversarialLongestQueue { seed: u64 },
}

impl SchedulePolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulePolicy::RoundRobinFair => "round-robin",
            SchedulePolicy::RandomFair { .. } => "random",
            SchedulePolicy::AdversarialLongestQueue { .. } => "adversarial",
        }
    }
}

/// What the scheduler may see of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelView {
    pub len: usize,
    /// Decisions since the head message was enqueued.
    pub head_age: u64,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulePolicy,
    rng: ChaCha8Rng,
    cursor: usize,
    node_count: usize,
    /// Decisions made so far.
    pub step_counter: u64,
}

impl Scheduler {
    pub fn new(policy: SchedulePolicy, node_count: usize) -> Self {
        let seed = match policy {
            SchedulePolicy::RoundRobinFair => 0,
            SchedulePolicy::RandomFair { seed } | SchedulePolicy::AdversarialLongestQueue { seed } => seed,
        };
        Scheduler {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cursor: 0,
            node_count,
            step_counter: 0,
        }
    }

    pub fn policy(&self) -> SchedulePolicy {
        self.policy
    }

    /// Largest head age any policy tolerates for the given total backlog.
    pub fn age_cap(&self, queue_total: usize) -> u64 {
        (self.node_count.max(1) * queue_total.max(1)) as u64
    }

    /// Picks a non-empty channel, or `None` if all are empty.
    pub fn choose(&mut self, channels: &[ChannelView]) -> Option<usize> {
        let queue_total: usize = channels.iter().map(|c| c.len).sum();
        if queue_total == 0 {
            return None;
        }
        self.step_counter += 1;

        let cap = self.age_cap(queue_total);
        let overdue = channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len > 0 && c.head_age > cap)
            .max_by_key(|&(i, c)| (c.head_age, std::cmp::Reverse(i)));
        if let Some((i, _)) = overdue {
            return Some(i);
        }

        let non_empty: Vec<usize> = (0..channels.len()).filter(|&i| channels[i].len > 0).collect();
        let pick = match self.policy {
            SchedulePolicy::RoundRobinFair => {
                let n = channels.len();
                let pick = (0..n)
                    .map(|k| (self.cursor + k) % n)
                    .find(|&i| channels[i].len > 0)
                    .expect("some channel is non-empty");
                self.cursor = (pick + 1) % n;
                pick
            }
            SchedulePolicy::RandomFair { .. } => non_empty[self.rng.random_range(0..non_empty.len())],
            SchedulePolicy::AdversarialLongestQueue { .. } => {
                let longest = non_empty.iter().map(|&i| channels[i].len).max().expect("non-empty");
                let ties: Vec<usize> = non_empty.into_iter().filter(|&i| channels[i].len == longest).collect();
                ties[self.rng.random_range(0..ties.len())]
            }
        };
        Some(pick)
    }

    /// Draws from the scheduler's stream (used for secondary choices that
    /// must stay reproducible).
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn views(lens: &[usize]) -> Vec<ChannelView> {
        lens.iter().map(|&len| ChannelView { len, head_age: 0 }).collect()
    }

    #[test]
    fn round_robin_cycles() {
        let mut s = Scheduler::new(SchedulePolicy::RoundRobinFair, 3);
        let v = views(&[1, 0, 2]);
        assert_eq!(s.choose(&v), Some(0));
        assert_eq!(s.choose(&v), Some(2));
        assert_eq!(s.choose(&v), Some(0));
        assert_eq!(s.choose(&views(&[0, 0, 0])), None);
    }

    #[test]
    fn adversary_prefers_long_queues_until_the_cap() {
        let mut s = Scheduler::new(SchedulePolicy::AdversarialLongestQueue { seed: 1 }, 2);
        assert_eq!(s.choose(&views(&[1, 3])), Some(1));
        let mut v = views(&[1, 3]);
        v[0].head_age = 100;
        assert_eq!(s.choose(&v), Some(0));
    }

    #[test]
    fn random_is_seeded() {
        let run = |seed| {
            let mut s = Scheduler::new(SchedulePolicy::RandomFair { seed }, 4);
            (0..20).map(|_| s.choose(&views(&[1, 1, 1, 1])).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }
}
