use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    ToCp,
    ToServer,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::ToCp => "server->cp",
            Direction::ToServer => "cp->server",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    /// Partial squared column norms, d reals.
    ColNorms,
    /// Partial ‖·‖_{1,1} and ‖·‖_F² of the server's rows, 2 reals.
    ScalarPartials,
    /// Global column norms plus ‖M‖_F² and ‖M‖_{1,1}, d + 2 reals.
    StatsBroadcast,
    /// Touched-column list, one entry per column.
    ColLists,
    InitYBlock,
    InitYPartial,
    /// Locally solved U rows; never transmitted.
    URowsLocal,
    ZAndB,
    VRowsBlock,
}

impl MessageKind {
    pub const ALL: [MessageKind; 9] = [
        MessageKind::ColNorms,
        MessageKind::ScalarPartials,
        MessageKind::StatsBroadcast,
        MessageKind::ColLists,
        MessageKind::InitYBlock,
        MessageKind::InitYPartial,
        MessageKind::URowsLocal,
        MessageKind::ZAndB,
        MessageKind::VRowsBlock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::ColNorms => "col-norms",
            MessageKind::ScalarPartials => "scalar-partials",
            MessageKind::StatsBroadcast => "stats-broadcast",
            MessageKind::ColLists => "col-lists",
            MessageKind::InitYBlock => "init-Y-block",
            MessageKind::InitYPartial => "init-Y-partial",
            MessageKind::URowsLocal => "U-rows-local",
            MessageKind::ZAndB => "z-and-B",
            MessageKind::VRowsBlock => "V-rows-block",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub round: usize,
    pub direction: Direction,
    pub kind: MessageKind,
    pub server: usize,
    pub payload_reals: u64,
}

/// Append-only record of every real number exchanged.
#[derive(Debug, Clone, Default)]
pub struct CommLedger {
    messages: Vec<Message>,
    local: Vec<Message>,
    by_kind: BTreeMap<MessageKind, u64>,
    by_round: BTreeMap<usize, u64>,
    total: u64,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record a transfer; empty payloads are not messages and are skipped.
    pub fn record(&mut self, round: usize, direction: Direction, kind: MessageKind, server: usize, payload_reals: u64) {
        if payload_reals == 0 {
            return;
        }
        let msg = Message { round, direction, kind, server, payload_reals };
        if kind == MessageKind::URowsLocal {
            self.local.push(msg);
            return;
        }
        self.messages.push(msg);
        *self.by_kind.entry(kind).or_default() += payload_reals;
        *self.by_round.entry(round).or_default() += payload_reals;
        self.total += payload_reals;
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    /// Server-local results kept for audit; excluded from every total.
    pub fn local_audit(&self) -> &[Message] {
        &self.local
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn total_for_kind(&self, kind: MessageKind) -> u64 {
        self.by_kind.get(&kind).copied().unwrap_or(0)
    }

    pub fn total_for_round(&self, round: usize) -> u64 {
        self.by_round.get(&round).copied().unwrap_or(0)
    }

    pub fn rounds(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.by_round.iter().map(|(r, t)| (*r, *t))
    }

    /// Recompute all running totals from the message list.
    pub fn verify_totals(&self) -> bool {
        let mut kind: BTreeMap<MessageKind, u64> = BTreeMap::new();
        let mut round: BTreeMap<usize, u64> = BTreeMap::new();
        let mut total = 0;
        for m in &self.messages {
            *kind.entry(m.kind).or_default() += m.payload_reals;
            *round.entry(m.round).or_default() += m.payload_reals;
            total += m.payload_reals;
        }
        kind == self.by_kind && round == self.by_round && total == self.total
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["round", "direction", "kind", "reals"])?;
        for m in &self.messages {
            w.write_record([m.round.to_string(), m.direction.to_string(), m.kind.to_string(), m.payload_reals.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

/// Audit constant of the communication bound.
pub const AUDIT_CONSTANT: f64 = 3.0;

/// `C·(d·s + |Ω|·r²) + init_rounds·2·|Ω|·r`.
pub fn communication_bound(d: usize, s: usize, omega: usize, r: usize, init_rounds: usize) -> f64 {
    let (d, s, omega, r, init) = (d as f64, s as f64, omega as f64, r as f64, init_rounds as f64);
    AUDIT_CONSTANT * (d * s + omega * r * r) + init * 2.0 * omega * r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_skips() {
        let mut l = CommLedger::new();
        l.record(0, Direction::ToCp, MessageKind::ColNorms, 0, 5);
        l.record(0, Direction::ToCp, MessageKind::ColNorms, 1, 0);
        l.record(1, Direction::ToServer, MessageKind::InitYBlock, 1, 7);
        l.record(1, Direction::ToCp, MessageKind::URowsLocal, 1, 9);
        assert_eq!(l.messages().len(), 2);
        assert_eq!(l.local_audit().len(), 1);
        assert_eq!(l.total(), 12);
        assert_eq!(l.total_for_round(1), 7);
        assert_eq!(l.total_for_kind(MessageKind::ColNorms), 5);
        assert!(l.verify_totals());
        assert_eq!(l.to_csv().unwrap(), "round,direction,kind,reals\n0,server->cp,col-norms,5\n1,cp->server,init-Y-block,7\n");
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(communication_bound(10, 2, 100, 3, 4), 3.0 * (20.0 + 900.0) + 2400.0);
    }
}
