use std::collections::{BTreeMap, HashMap};

use crate::Micros;

/// Handle to a scheduled event, valid until it fires or is cancelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(u64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClockError {
    #[error("cannot run backwards: now={now} us, requested {requested} us")]
    Backwards { now: Micros, requested: Micros },
}

/// Discrete-event clock.
///
/// Events fire in timestamp order; equal timestamps fire in the order they
/// were first scheduled. Time never decreases: an event scheduled in the past
/// fires at the current time.
#[derive(Debug, Clone)]
pub struct VirtualClock<E> {
    now: Micros,
    next_id: u64,
    queue: BTreeMap<(Micros, u64), E>,
    due: HashMap<u64, Micros>,
}

impl<E> Default for VirtualClock<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> VirtualClock<E> {
    pub fn new() -> Self {
        Self { now: 0, next_id: 0, queue: BTreeMap::new(), due: HashMap::new() }
    }

    pub fn now(&self) -> Micros {
        self.now
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn schedule(&mut self, at: Micros, event: E) -> EventId {
        let at = at.max(self.now);
        let id = self.next_id;
        self.next_id += 1;
        self.queue.insert((at, id), event);
        self.due.insert(id, at);
        EventId(id)
    }

    /// Due time of a pending event.
    pub fn due_time(&self, id: EventId) -> Option<Micros> {
        self.due.get(&id.0).copied()
    }

    pub fn cancel(&mut self, id: EventId) -> Option<E> {
        let at = self.due.remove(&id.0)?;
        self.queue.remove(&(at, id.0))
    }

    /// Moves a pending event to a new time. Its tie-break rank is kept.
    pub fn reschedule(&mut self, id: EventId, at: Micros) -> bool {
        let Some(old) = self.due.get(&id.0).copied() else {
            return false;
        };
        let at = at.max(self.now);
        let event = self.queue.remove(&(old, id.0)).expect("queue and index agree");
        self.queue.insert((at, id.0), event);
        self.due.insert(id.0, at);
        true
    }

    pub fn peek_time(&self) -> Option<Micros> {
        self.queue.keys().next().map(|&(t, _)| t)
    }

    /// Fires the earliest event if it is due at or before `t_end`, moving the
    /// clock to its timestamp.
    pub fn pop_until(&mut self, t_end: Micros) -> Option<(Micros, E)> {
        let entry = self.queue.first_entry()?;
        let (at, id) = *entry.key();
        if at > t_end {
            return None;
        }
        let event = entry.remove();
        self.due.remove(&id);
        self.now = self.now.max(at);
        Some((at, event))
    }

    pub fn advance_to(&mut self, t: Micros) -> Result<(), ClockError> {
        if t < self.now {
            return Err(ClockError::Backwards { now: self.now, requested: t });
        }
        self.now = t;
        Ok(())
    }

    /// Fires every event due at or before `t_end`, then sets the clock to
    /// `t_end`.
    pub fn run_until(&mut self, t_end: Micros) -> Result<Vec<(Micros, E)>, ClockError> {
        if t_end < self.now {
            return Err(ClockError::Backwards { now: self.now, requested: t_end });
        }
        let mut fired = Vec::new();
        while let Some(ev) = self.pop_until(t_end) {
            fired.push(ev);
        }
        self.now = t_end;
        Ok(fired)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_queue_just_advances() {
        let mut c: VirtualClock<()> = VirtualClock::new();
        assert!(c.run_until(1_000).unwrap().is_empty());
        assert_eq!(c.now(), 1_000);
    }

    #[test]
    fn equal_timestamps_fire_in_insertion_order() {
        let mut c = VirtualClock::new();
        c.schedule(10, "a");
        c.schedule(5, "x");
        c.schedule(10, "b");
        c.schedule(10, "c");
        let order: Vec<_> = c.run_until(20).unwrap().into_iter().map(|(_, e)| e).collect();
        assert_eq!(order, ["x", "a", "b", "c"]);
    }

    #[test]
    fn run_until_is_inclusive_and_stops() {
        let mut c = VirtualClock::new();
        c.schedule(10, 1);
        c.schedule(11, 2);
        assert_eq!(c.run_until(10).unwrap(), vec![(10, 1)]);
        assert_eq!(c.len(), 1);
        assert!(c.run_until(9).is_err());
    }

    #[test]
    fn past_events_fire_now() {
        let mut c = VirtualClock::new();
        c.run_until(100).unwrap();
        let id = c.schedule(50, ());
        assert_eq!(c.due_time(id), Some(100));
    }

    #[test]
    fn cancel_and_reschedule() {
        let mut c = VirtualClock::new();
        let a = c.schedule(10, "a");
        let b = c.schedule(20, "b");
        assert!(c.reschedule(b, 5));
        assert_eq!(c.cancel(a), Some("a"));
        assert_eq!(c.cancel(a), None);
        assert!(!c.reschedule(a, 1));
        assert_eq!(c.run_until(30).unwrap(), vec![(5, "b")]);
    }

    #[test]
    fn time_never_decreases() {
        let mut c = VirtualClock::new();
        for t in [30, 10, 20, 10, 0] {
            c.schedule(t, t);
        }
        let mut last = 0;
        while let Some((t, _)) = c.pop_until(u64::MAX) {
            assert!(t >= last);
            assert_eq!(c.now(), t);
            last = t;
        }
    }
}
