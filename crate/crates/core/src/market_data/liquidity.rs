use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ChainRecord, Exclusion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LiquidityLabel {
    Liquid,
    Illiquid,
}

impl LiquidityLabel {
    /// Band of maximum per-bar NA counts admitted by the label.
    pub fn band(self) -> (u32, u32) {
        match self {
            LiquidityLabel::Liquid => (0, 1),
            LiquidityLabel::Illiquid => (3, 7),
        }
    }

    fn classify(max_na: u32) -> Option<Self> {
        [LiquidityLabel::Liquid, LiquidityLabel::Illiquid]
            .into_iter()
            .find(|l| {
                let (lo, hi) = l.band();
                (lo..=hi).contains(&max_na)
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiquidityBucket {
    pub label: LiquidityLabel,
    /// Contract identifiers in lexicographic order.
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiquiditySplit {
    pub buckets: BTreeMap<LiquidityLabel, LiquidityBucket>,
    pub exclusions: Vec<Exclusion>,
}

impl LiquiditySplit {
    pub fn members(&self, label: LiquidityLabel) -> &[String] {
        self.buckets
            .get(&label)
            .map(|b| b.members.as_slice())
            .unwrap_or(&[])
    }
}

/// A contract's label is decided by the worst bar it has.
pub fn bucket_by_liquidity(records: &[ChainRecord]) -> LiquiditySplit {
    let mut worst: BTreeMap<&str, u32> = BTreeMap::new();
    for (contract, bar) in records {
        let e = worst.entry(contract.ric.as_str()).or_insert(0);
        *e = (*e).max(bar.na_count);
    }

    let mut buckets: BTreeMap<LiquidityLabel, LiquidityBucket> =
        [LiquidityLabel::Liquid, LiquidityLabel::Illiquid]
            .into_iter()
            .map(|label| {
                (
                    label,
                    LiquidityBucket {
                        label,
                        members: Vec::new(),
                    },
                )
            })
            .collect();
    let mut exclusions = Vec::new();
    for (ric, max_na) in worst {
        match LiquidityLabel::classify(max_na) {
            Some(label) => buckets
                .get_mut(&label)
                .expect("both labels present")
                .members
                .push(ric.to_string()),
            None => exclusions.push(Exclusion::new(
                ric,
                "LiquidityGap",
                format!("max na_count {max_na} outside the 0-1 and 3-7 bands"),
            )),
        }
    }
    LiquiditySplit {
        buckets,
        exclusions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{MarketBar, OptionContract};
    use crate::pricing::ContractType;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn record(ric: &str, na: u32) -> ChainRecord {
        (
            OptionContract {
                ric: ric.into(),
                root: "SPY".into(),
                contract_type: ContractType::Call,
                strike: 100.0,
                maturity: NaiveDate::from_ymd_opt(2024, 1, 19).unwrap(),
            },
            MarketBar {
                na_count: na,
                ..MarketBar::default()
            },
        )
    }

    #[test]
    fn bands() {
        let split = bucket_by_liquidity(&[
            record("A", 0),
            record("A", 0),
            record("B", 0),
            record("B", 5),
            record("C", 2),
            record("D", 1),
            record("E", 8),
        ]);
        assert_eq!(split.members(LiquidityLabel::Liquid), ["A", "D"]);
        assert_eq!(split.members(LiquidityLabel::Illiquid), ["B"]);
        let excluded: Vec<_> = split.exclusions.iter().map(|e| e.ric.as_str()).collect();
        assert_eq!(excluded, ["C", "E"]);
        assert!(split.exclusions.iter().all(|e| e.reason == "LiquidityGap"));
    }

    proptest! {
        #[test]
        fn partition(nas in prop::collection::vec((0usize..12, 0u32..12), 0..60)) {
            let records: Vec<_> = nas.iter().map(|(c, na)| record(&format!("R{c}"), *na)).collect();
            let split = bucket_by_liquidity(&records);
            let liquid = split.members(LiquidityLabel::Liquid);
            let illiquid = split.members(LiquidityLabel::Illiquid);
            prop_assert!(liquid.iter().all(|r| !illiquid.contains(r)));
            let distinct: std::collections::BTreeSet<_> = nas.iter().map(|(c, _)| *c).collect();
            prop_assert_eq!(liquid.len() + illiquid.len() + split.exclusions.len(), distinct.len());
        }
    }
}
