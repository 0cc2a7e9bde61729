use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Number of ciphertexts needed to carry a `dim`-long vector.
pub fn chunk_count(dim: usize, slot_count: usize) -> Result<usize> {
    if dim == 0 || slot_count == 0 {
        return Err(Error::contract(format!(
            "chunk_count needs positive arguments (dim {dim}, slots {slot_count})"
        )));
    }
    Ok(dim.div_ceil(slot_count))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Client(u32),
    Server,
    KeyHolder,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Client(i) => write!(f, "client{i}"),
            Role::Server => f.write_str("server"),
            Role::KeyHolder => f.write_str("keyholder"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PayloadKind {
    ClsToken,
    GradientVector,
    Head,
    AggregateMean,
    Predictions,
}

impl PayloadKind {
    pub fn name(self) -> &'static str {
        match self {
            PayloadKind::ClsToken => "cls_token",
            PayloadKind::GradientVector => "gradient_vector",
            PayloadKind::Head => "head",
            PayloadKind::AggregateMean => "aggregate_mean",
            PayloadKind::Predictions => "predictions",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub sender: Role,
    pub receiver: Role,
    pub kind: PayloadKind,
    pub bytes: u64,
    pub chunks: u32,
}

/// Append-only record of every payload sent in a round.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommLedger {
    messages: Vec<Message>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LedgerSummary {
    pub messages: usize,
    pub total_bytes: u64,
    pub total_chunks: u64,
    pub bytes_by_sender: BTreeMap<Role, u64>,
    pub bytes_by_kind: BTreeMap<PayloadKind, u64>,
    pub chunks_by_kind: BTreeMap<PayloadKind, u64>,
}

impl LedgerSummary {
    /// Gradient-path bytes over CLS-path bytes; `None` when nothing was sent on the CLS path.
    pub fn gradient_to_cls_ratio(&self) -> Option<f64> {
        let cls = *self.bytes_by_kind.get(&PayloadKind::ClsToken)?;
        let grad = self
            .bytes_by_kind
            .get(&PayloadKind::GradientVector)
            .copied()
            .unwrap_or(0);
        (cls > 0).then(|| grad as f64 / cls as f64)
    }
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, sender: Role, receiver: Role, kind: PayloadKind, bytes: usize, chunks: usize) {
        self.messages.push(Message {
            sender,
            receiver,
            kind,
            bytes: bytes as u64,
            chunks: chunks as u32,
        });
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn summary(&self) -> LedgerSummary {
        let mut s = LedgerSummary {
            messages: self.messages.len(),
            ..Default::default()
        };
        for m in &self.messages {
            s.total_bytes += m.bytes;
            s.total_chunks += u64::from(m.chunks);
            *s.bytes_by_sender.entry(m.sender).or_default() += m.bytes;
            *s.bytes_by_kind.entry(m.kind).or_default() += m.bytes;
            *s.chunks_by_kind.entry(m.kind).or_default() += u64::from(m.chunks);
        }
        s
    }
}
