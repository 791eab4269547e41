use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};

use super::{ChainRecord, DataError, Exclusion, MarketBar, OptionContract};
use crate::pricing::ContractType;

/// Header of the chain file, in file order.
pub const CHAIN_COLUMNS: [&str; 26] = [
    "#RIC",
    "Domain",
    "Date-Time",
    "Type",
    "Open",
    "High",
    "Low",
    "Last",
    "Volume",
    "No. Trades",
    "Open Bid",
    "High Bid",
    "Low Bid",
    "Close Bid",
    "No. Bids",
    "Open Ask",
    "High Ask",
    "Low Ask",
    "Close Ask",
    "No. Asks",
    "Mid Open",
    "Mid Close",
    "Root",
    "Strike Price",
    "Maturity",
    "Contract Type",
];

const RIC: usize = 0;
const DOMAIN: usize = 1;
const DATE_TIME: usize = 2;
const TYPE: usize = 3;
const FIRST_NUMERIC: usize = 4;
const ROOT: usize = 22;
const STRIKE: usize = 23;
const MATURITY: usize = 24;
const CONTRACT_TYPE: usize = 25;

/// Maps each canonical column to the header name used in a particular file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSchema {
    names: Vec<String>,
}

impl Default for ChainSchema {
    fn default() -> Self {
        Self {
            names: CHAIN_COLUMNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ChainSchema {
    /// Renames a canonical column; unknown canonical names are ignored.
    pub fn rename(mut self, canonical: &str, actual: &str) -> Self {
        if let Some(i) = CHAIN_COLUMNS.iter().position(|c| *c == canonical) {
            self.names[i] = actual.to_string();
        }
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    pub rows_read: usize,
    pub rows_parsed: usize,
    pub issues: Vec<Exclusion>,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedChain {
    pub records: Vec<ChainRecord>,
    pub report: ParseReport,
}

pub fn parse_option_chain(path: &Path, schema: &ChainSchema) -> Result<ParsedChain, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_option_chain_reader(file, schema)
}

pub fn parse_option_chain_reader<R: Read>(
    reader: R,
    schema: &ChainSchema,
) -> Result<ParsedChain, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut index = Vec::with_capacity(CHAIN_COLUMNS.len());
    for name in &schema.names {
        match header.iter().position(|h| h == name) {
            Some(i) => index.push(i),
            None => return Err(DataError::MissingColumn(name.clone())),
        }
    }

    let mut out = ParsedChain::default();
    for (row_no, row) in rdr.records().enumerate() {
        let row = row?;
        out.report.rows_read += 1;
        let line = row
            .position()
            .map(|p| p.line())
            .unwrap_or(row_no as u64 + 2);
        let ric = row.get(index[RIC]).unwrap_or("").to_string();
        if row.len() != header.len() {
            out.report.issues.push(Exclusion::new(
                ric,
                "MalformedRow",
                format!(
                    "line {line}: {} fields, expected {}",
                    row.len(),
                    header.len()
                ),
            ));
            continue;
        }
        let cell = |col: usize| row.get(index[col]).unwrap_or("");
        match parse_row(&cell) {
            Ok(record) => {
                out.report.rows_parsed += 1;
                out.records.push(record);
            }
            Err((reason, detail)) => {
                out.report.issues.push(Exclusion::new(
                    ric,
                    reason,
                    format!("line {line}: {detail}"),
                ));
            }
        }
    }
    Ok(out)
}

fn parse_row<'a>(cell: &dyn Fn(usize) -> &'a str) -> Result<ChainRecord, (&'static str, String)> {
    let timestamp = parse_timestamp(cell(DATE_TIME)).ok_or((
        "BadTimestamp",
        format!("unparseable Date-Time `{}`", cell(DATE_TIME)),
    ))?;
    let strike = cell(STRIKE)
        .parse::<f64>()
        .ok()
        .filter(|k| k.is_finite() && *k > 0.0)
        .ok_or((
            "BadContract",
            format!("strike `{}` must be a positive number", cell(STRIKE)),
        ))?;
    let maturity = parse_date(cell(MATURITY)).ok_or((
        "BadContract",
        format!("unparseable Maturity `{}`", cell(MATURITY)),
    ))?;
    let contract_type = ContractType::parse(cell(CONTRACT_TYPE)).ok_or((
        "BadContract",
        format!("unknown Contract Type `{}`", cell(CONTRACT_TYPE)),
    ))?;

    let contract = OptionContract {
        ric: cell(RIC).to_string(),
        root: cell(ROOT).to_string(),
        contract_type,
        strike,
        maturity,
    };
    let mut bar = MarketBar {
        timestamp,
        domain: cell(DOMAIN).to_string(),
        bar_type: cell(TYPE).to_string(),
        ..MarketBar::default()
    };
    for (k, slot) in bar.numeric_fields_mut().into_iter().enumerate() {
        *slot = cell(FIRST_NUMERIC + k)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite());
    }
    bar.recount_na();
    if let Some(why) = bar.inconsistency() {
        return Err(("InconsistentBar", why));
    }
    Ok((contract, bar))
}

/// ISO-8601 with or without offset; naive values are taken as UTC.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(ndt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(ndt.and_utc());
        }
    }
    parse_date(raw).map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc())
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(raw, "%Y%m%d"))
        .ok()
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn format_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records with the canonical header.
pub fn write_option_chain(path: &Path, records: &[ChainRecord]) -> std::io::Result<()> {
    crate::output::write_csv(
        path,
        &CHAIN_COLUMNS,
        records.iter().map(|(c, b)| {
            let mut row = Vec::with_capacity(CHAIN_COLUMNS.len());
            row.push(c.ric.clone());
            row.push(b.domain.clone());
            row.push(format_timestamp(&b.timestamp));
            row.push(b.bar_type.clone());
            row.extend(b.numeric_fields().iter().map(|v| format_opt(*v)));
            row.push(c.root.clone());
            row.push(c.strike.to_string());
            row.push(c.maturity.format("%Y-%m-%d").to_string());
            row.push(c.contract_type.code().to_string());
            row
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> String {
        CHAIN_COLUMNS.join(",")
    }

    fn full_row(ric: &str) -> String {
        format!(
            "{ric},OPT,2023-10-02T14:00:00Z,Intraday 1Hr,1.1,1.4,1.0,1.25,120,14,1.15,1.3,1.1,1.20,9,1.2,1.35,1.15,1.30,11,1.175,1.25,SPY,430,2023-11-17,C"
        )
    }

    #[test]
    fn full_row_has_no_missing_values() {
        let csv = format!("{}\n{}\n", header(), full_row("SPYA"));
        let parsed = parse_option_chain_reader(csv.as_bytes(), &ChainSchema::default()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let (c, b) = &parsed.records[0];
        assert_eq!(b.na_count, 0);
        assert_eq!(b.close_bid, Some(1.20));
        assert_eq!(b.close_ask, Some(1.30));
        assert_eq!(c.contract_type, ContractType::Call);
        assert_eq!(c.strike, 430.0);
        assert!(parsed.report.issues.is_empty());
    }

    #[test]
    fn empty_open_high_low_counts_three() {
        let row = full_row("SPYA").replacen(",1.1,1.4,1.0,", ",,,,", 1);
        let csv = format!("{}\n{}\n", header(), row);
        let parsed = parse_option_chain_reader(csv.as_bytes(), &ChainSchema::default()).unwrap();
        assert_eq!(parsed.records[0].1.na_count, 3);
    }

    #[test]
    fn unparseable_numeric_is_absent() {
        let row = full_row("SPYA").replacen(",120,", ",n/a,", 1);
        let csv = format!("{}\n{}\n", header(), row);
        let parsed = parse_option_chain_reader(csv.as_bytes(), &ChainSchema::default()).unwrap();
        assert_eq!(parsed.records[0].1.volume, None);
        assert_eq!(parsed.records[0].1.na_count, 1);
    }

    #[test]
    fn header_only_is_empty() {
        let csv = format!("{}\n", header());
        let parsed = parse_option_chain_reader(csv.as_bytes(), &ChainSchema::default()).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.report.rows_read, 0);
    }

    #[test]
    fn missing_column_named() {
        let csv = header().replace(",Maturity", "");
        let err = parse_option_chain_reader(csv.as_bytes(), &ChainSchema::default()).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(ref c) if c == "Maturity"));
    }

    #[test]
    fn malformed_row_skipped_and_reported() {
        let csv = format!(
            "{}\n{}\nSPYB,OPT,oops\n{}\n",
            header(),
            full_row("SPYA"),
            full_row("SPYC")
        );
        let parsed = parse_option_chain_reader(csv.as_bytes(), &ChainSchema::default()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[0].0.ric, "SPYA");
        assert_eq!(parsed.records[1].0.ric, "SPYC");
        assert_eq!(parsed.report.rows_read, 3);
        assert_eq!(parsed.report.issues.len(), 1);
        assert_eq!(parsed.report.issues[0].reason, "MalformedRow");
    }

    #[test]
    fn renamed_schema() {
        let csv = format!(
            "{}\n{}\n",
            header().replace("#RIC", "Instrument"),
            full_row("SPYA")
        );
        let schema = ChainSchema::default().rename("#RIC", "Instrument");
        let parsed = parse_option_chain_reader(csv.as_bytes(), &schema).unwrap();
        assert_eq!(parsed.records[0].0.ric, "SPYA");
    }

    #[test]
    fn crossed_quote_rejected() {
        let row = full_row("SPYA").replacen(",1.20,9,", ",1.50,9,", 1);
        let csv = format!("{}\n{}\n", header(), row);
        let parsed = parse_option_chain_reader(csv.as_bytes(), &ChainSchema::default()).unwrap();
        assert!(parsed.records.is_empty());
        assert_eq!(parsed.report.issues[0].reason, "InconsistentBar");
    }

    #[test]
    fn timestamp_formats() {
        let a = parse_timestamp("2023-10-02T14:00:00Z").unwrap();
        assert_eq!(parse_timestamp("2023-10-02 14:00:00").unwrap(), a);
        assert_eq!(parse_timestamp("2023-10-02T16:00:00+02:00").unwrap(), a);
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn contract_type_words_accepted() {
        let row = full_row("SPYA").replace(",C", ",put");
        let csv = format!("{}\n{}\n", header(), row);
        let parsed = parse_option_chain_reader(csv.as_bytes(), &ChainSchema::default()).unwrap();
        assert_eq!(parsed.records[0].0.contract_type, ContractType::Put);
    }
}
