//! Virtual stigmergy: a per-robot replicated key-value table reconciled over
//! a simulated lossy broadcast medium.
//!
//! Entries are ordered by `(lamport, writer_id)`. A local write over an
//! existing key stores the mean of the old and new values under a fresh
//! Lamport time; remote entries are adopted only when they are newer. Reads
//! re-broadcast the local entry and receivers answer stale entries with their
//! own, which repairs replicas that missed a dropped message.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::rng::{self, RandomStream};
use crate::world::CellCoord;

pub type RobotId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StigmergyEntry {
    pub key: CellCoord,
    pub value: f64,
    pub lamport: u64,
    pub writer_id: RobotId,
}

impl StigmergyEntry {
    /// Total order used for conflict resolution.
    pub fn version(&self) -> (u64, RobotId) {
        (self.lamport, self.writer_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    WriteUpdate,
    ReadQuery,
    ReadReply,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub sender: RobotId,
    pub entry: StigmergyEntry,
    pub kind: MessageKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpCounters {
    pub reads: u64,
    pub writes: u64,
    pub messages_sent: u64,
    pub bytes_sent: u64,
}

impl OpCounters {
    pub fn accesses(&self) -> u64 {
        self.reads + self.writes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StigmergyReplica {
    pub robot_id: RobotId,
    table: BTreeMap<CellCoord, StigmergyEntry>,
    clock: u64,
    counters: OpCounters,
}

impl StigmergyReplica {
    pub fn new(robot_id: RobotId) -> Self {
        StigmergyReplica {
            robot_id,
            table: BTreeMap::new(),
            clock: 0,
            counters: OpCounters::default(),
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn table(&self) -> &BTreeMap<CellCoord, StigmergyEntry> {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn contains(&self, key: CellCoord) -> bool {
        self.table.contains_key(&key)
    }

    /// Local lookup that neither counts as a stigmergy read nor broadcasts.
    pub fn peek(&self, key: CellCoord) -> Option<f64> {
        self.table.get(&key).map(|e| e.value)
    }

    pub fn counters(&self) -> OpCounters {
        self.counters
    }

    pub fn vput(&mut self, key: CellCoord, value: f64, bus: &mut BroadcastBus) {
        self.clock += 1;
        let merged = match self.table.get(&key) {
            Some(old) => 0.5 * (old.value + value),
            None => value,
        };
        let entry = StigmergyEntry {
            key,
            value: merged,
            lamport: self.clock,
            writer_id: self.robot_id,
        };
        self.table.insert(key, entry);
        self.counters.writes += 1;
        bus.broadcast(self.robot_id, entry, MessageKind::WriteUpdate);
    }

    pub fn vget(&mut self, key: CellCoord, bus: &mut BroadcastBus) -> Option<f64> {
        self.counters.reads += 1;
        let entry = *self.table.get(&key)?;
        bus.broadcast(self.robot_id, entry, MessageKind::ReadQuery);
        Some(entry.value)
    }

    pub fn on_message(&mut self, entry: &StigmergyEntry, bus: &mut BroadcastBus) {
        self.clock = self.clock.max(entry.lamport);
        match self.table.get(&entry.key) {
            Some(local) if local.version() > entry.version() => {
                let local = *local;
                bus.broadcast(self.robot_id, local, MessageKind::ReadReply);
            }
            Some(local) if local.version() == entry.version() => {}
            _ => {
                self.table.insert(entry.key, *entry);
            }
        }
    }

    /// Returns the counters accumulated since the last call and resets them.
    pub fn account(&mut self) -> OpCounters {
        std::mem::take(&mut self.counters)
    }

    pub fn to_csv(&self) -> String {
        entries_to_csv(self.table.values())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DeliveryReport {
    /// Per-recipient deliveries.
    pub delivered: u64,
    /// Transmissions lost on the medium.
    pub dropped: u64,
    pub bytes: u64,
    pub transmissions: u64,
    pub rounds: usize,
    /// Messages still pending when the round budget ran out; discarded.
    pub truncated: u64,
}

#[derive(Debug, Clone)]
pub struct BroadcastBus {
    pending: VecDeque<Message>,
    pub drop_probability: f64,
    pub message_bytes: u64,
    pub max_rounds: usize,
}

impl BroadcastBus {
    pub fn new(drop_probability: f64, message_bytes: u64, max_rounds: usize) -> Self {
        BroadcastBus {
            pending: VecDeque::new(),
            drop_probability,
            message_bytes,
            max_rounds,
        }
    }

    /// Queues a message. An anti-entropy reply identical to one already
    /// queued is suppressed: every receiver overhears the first one.
    pub fn broadcast(&mut self, sender: RobotId, entry: StigmergyEntry, kind: MessageKind) {
        if kind == MessageKind::ReadReply
            && self
                .pending
                .iter()
                .any(|m| m.kind == MessageKind::ReadReply && m.entry == entry)
        {
            return;
        }
        self.pending.push_back(Message {
            sender,
            entry,
            kind,
        });
    }

    pub fn pending(&self) -> impl Iterator<Item = &Message> {
        self.pending.iter()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn take_pending(&mut self) -> Vec<Message> {
        self.pending.drain(..).collect()
    }

    /// Delivers pending traffic to `replicas` (indexed by robot id).
    ///
    /// Each transmission is charged `message_bytes` to its sender and lost
    /// with `drop_probability` (one RNG draw per transmission); survivors
    /// reach every other active replica for which `link(sender, receiver)`
    /// holds. Replies generated during delivery are sent in the next round,
    /// up to `max_rounds`. Messages from inactive senders are discarded
    /// without cost.
    pub fn flush(
        &mut self,
        replicas: &mut [StigmergyReplica],
        active: &[bool],
        link: &dyn Fn(usize, usize) -> bool,
        rng: &mut RandomStream,
    ) -> DeliveryReport {
        debug_assert_eq!(replicas.len(), active.len());
        debug_assert!(replicas
            .iter()
            .enumerate()
            .all(|(i, r)| r.robot_id as usize == i));
        let mut report = DeliveryReport::default();
        while !self.pending.is_empty() && report.rounds < self.max_rounds {
            report.rounds += 1;
            let batch: Vec<Message> = self.pending.drain(..).collect();
            for msg in batch {
                let s = msg.sender as usize;
                if !active[s] {
                    continue;
                }
                let sender = &mut replicas[s].counters;
                sender.messages_sent += 1;
                sender.bytes_sent += self.message_bytes;
                report.transmissions += 1;
                report.bytes += self.message_bytes;
                if rng::unit(rng) < self.drop_probability {
                    report.dropped += 1;
                    continue;
                }
                for r in 0..replicas.len() {
                    if r == s || !active[r] || !link(s, r) {
                        continue;
                    }
                    replicas[r].on_message(&msg.entry, self);
                    report.delivered += 1;
                }
            }
        }
        report.truncated = self.pending.len() as u64;
        self.pending.clear();
        report
    }
}

/// Union of several replicas, keeping the newest entry per key.
pub fn merged_view<'a>(
    replicas: impl IntoIterator<Item = &'a StigmergyReplica>,
) -> BTreeMap<CellCoord, StigmergyEntry> {
    let mut out: BTreeMap<CellCoord, StigmergyEntry> = BTreeMap::new();
    for r in replicas {
        for e in r.table.values() {
            match out.get(&e.key) {
                Some(cur) if cur.version() >= e.version() => {}
                _ => {
                    out.insert(e.key, *e);
                }
            }
        }
    }
    out
}

pub const BELIEF_CSV_HEADER: &str = "key_x,key_y,value,lamport,writer_id";

pub fn entries_to_csv<'a>(entries: impl IntoIterator<Item = &'a StigmergyEntry>) -> String {
    let mut out = String::from(BELIEF_CSV_HEADER);
    out.push('\n');
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.key.x, e.key.y, e.value, e.lamport, e.writer_id
        );
    }
    out
}

/// Parses a belief dump; lines starting with `#` are skipped.
pub fn parse_belief_csv(text: &str) -> Result<Vec<StigmergyEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let expected: Vec<&str> = BELIEF_CSV_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            reason: format!("expected header `{BELIEF_CSV_HEADER}`"),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| Error::Parse {
            line,
            reason: format!("bad {what}"),
        };
        let key = CellCoord::new(
            rec[0].parse().map_err(|_| bad("key_x"))?,
            rec[1].parse().map_err(|_| bad("key_y"))?,
        );
        let value: f64 = rec[2].parse().map_err(|_| bad("value"))?;
        if !value.is_finite() {
            return Err(bad("value"));
        }
        out.push(StigmergyEntry {
            key,
            value,
            lamport: rec[3].parse().map_err(|_| bad("lamport"))?,
            writer_id: rec[4].parse().map_err(|_| bad("writer_id"))?,
        });
    }
    Ok(out)
}
