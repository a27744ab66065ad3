//! Communication-cost accounting.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    UserToMap,
    MapToReduce,
    CallSignal,
    UserToReduceFetch,
    InterCluster,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::UserToMap,
        Channel::MapToReduce,
        Channel::CallSignal,
        Channel::UserToReduceFetch,
        Channel::InterCluster,
    ];

    fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::UserToMap => "user_to_map",
            Channel::MapToReduce => "map_to_reduce",
            Channel::CallSignal => "call_signal",
            Channel::UserToReduceFetch => "user_to_reduce_fetch",
            Channel::InterCluster => "inter_cluster",
        }
    }
}

/// What a charge moved: metadata (including call signals) or original data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    Metadata,
    Data,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelCosts {
    metadata: [u64; 5],
    data: [u64; 5],
}

impl ChannelCosts {
    pub fn add(&mut self, channel: Channel, payload: Payload, amount: u64) {
        let slot = match payload {
            Payload::Metadata => &mut self.metadata[channel.slot()],
            Payload::Data => &mut self.data[channel.slot()],
        };
        *slot = slot.checked_add(amount).expect("ledger counter overflow");
    }

    pub fn channel(&self, channel: Channel) -> u64 {
        self.metadata[channel.slot()] + self.data[channel.slot()]
    }

    pub fn metadata(&self, channel: Channel) -> u64 {
        self.metadata[channel.slot()]
    }

    pub fn data(&self, channel: Channel) -> u64 {
        self.data[channel.slot()]
    }

    pub fn total(&self) -> u64 {
        Channel::ALL.iter().map(|&c| self.channel(c)).sum()
    }

    pub fn metadata_total(&self) -> u64 {
        self.metadata.iter().sum()
    }

    pub fn data_total(&self) -> u64 {
        self.data.iter().sum()
    }
}

impl AddAssign<&ChannelCosts> for ChannelCosts {
    fn add_assign(&mut self, rhs: &ChannelCosts) {
        for i in 0..5 {
            self.metadata[i] += rhs.metadata[i];
            self.data[i] += rhs.data[i];
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundCost {
    pub label: String,
    pub costs: ChannelCosts,
}

/// Per-channel cost of a run, with a per-round breakdown.
///
/// `map_to_reduce_participating` is the part of the map-to-reduce channel
/// that carried records of tuples appearing in the final output. Record and
/// signal counts are kept alongside so that a unit-cost run, where metadata
/// is priced at zero, can still report how much metadata moved.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    totals: ChannelCosts,
    rounds: Vec<RoundCost>,
    map_to_reduce_participating: u64,
    metadata_records: u64,
    signals: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens a new round and returns its index.
    pub fn begin_round(&mut self, label: impl Into<String>) -> usize {
        self.rounds.push(RoundCost {
            label: label.into(),
            costs: ChannelCosts::default(),
        });
        self.rounds.len() - 1
    }

    pub fn charge(&mut self, round: usize, channel: Channel, payload: Payload, amount: u64) {
        self.rounds[round].costs.add(channel, payload, amount);
        self.totals.add(channel, payload, amount);
    }

    /// Folds costs accumulated elsewhere (e.g. by a parallel task) into a round.
    pub fn merge(&mut self, round: usize, costs: &ChannelCosts) {
        self.rounds[round].costs += costs;
        self.totals += costs;
    }

    pub fn count_metadata_records(&mut self, n: u64) {
        self.metadata_records += n;
    }

    pub fn count_signals(&mut self, n: u64) {
        self.signals += n;
    }

    pub(crate) fn set_map_to_reduce_participating(&mut self, amount: u64) {
        self.map_to_reduce_participating = amount;
    }

    pub fn channel(&self, channel: Channel) -> u64 {
        self.totals.channel(channel)
    }

    pub fn costs(&self) -> &ChannelCosts {
        &self.totals
    }

    pub fn rounds(&self) -> &[RoundCost] {
        &self.rounds
    }

    pub fn total(&self) -> u64 {
        self.totals.total()
    }

    pub fn metadata_total(&self) -> u64 {
        self.totals.metadata_total()
    }

    pub fn data_total(&self) -> u64 {
        self.totals.data_total()
    }

    pub fn map_to_reduce_participating(&self) -> u64 {
        self.map_to_reduce_participating
    }

    pub fn metadata_records(&self) -> u64 {
        self.metadata_records
    }

    pub fn signals(&self) -> u64 {
        self.signals
    }

    /// The part of the ledger the closed-form bounds price: metadata upload,
    /// the participating share of the shuffle, and every fetch or
    /// inter-cluster transfer. Call signalling is left out.
    pub fn theorem_relevant(&self) -> u64 {
        self.channel(Channel::UserToMap)
            + self.map_to_reduce_participating
            + self.channel(Channel::UserToReduceFetch)
            + self.channel(Channel::InterCluster)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_are_sum_of_channels_and_rounds() {
        let mut l = CostLedger::new();
        let r0 = l.begin_round("one");
        let r1 = l.begin_round("two");
        l.charge(r0, Channel::UserToMap, Payload::Metadata, 5);
        l.charge(r1, Channel::MapToReduce, Payload::Data, 7);
        let mut extra = ChannelCosts::default();
        extra.add(Channel::CallSignal, Payload::Metadata, 2);
        l.merge(r1, &extra);
        assert_eq!(l.total(), 14);
        assert_eq!(l.metadata_total(), 7);
        assert_eq!(l.data_total(), 7);
        let by_round: u64 = l.rounds().iter().map(|r| r.costs.total()).sum();
        assert_eq!(by_round, l.total());
        assert_eq!(l.theorem_relevant(), 5);
    }
}
