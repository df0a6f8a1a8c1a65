//! Delimited transaction-log ingestion.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::clustering::{PriceLevel, ProductLine};
use crate::error::{Error, Result};

/// One product line of one receipt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub basket_id: String,
    /// `None` marks an unmonitored receipt.
    pub customer_id: Option<String>,
    pub product_id: String,
    pub unit_price: f64,
    pub quantity: u32,
    pub price_level: PriceLevel,
    pub children_flag: bool,
    pub timestamp: Option<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    pub delimiter: u8,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { delimiter: b',' }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejection>,
    pub baskets: usize,
    pub monitored_baskets: usize,
    /// Fraction of baskets linked to a customer.
    pub monitored_share: f64,
    pub customers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub records: Vec<TransactionRecord>,
    pub summary: IngestSummary,
}

/// One receipt with its product lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basket {
    pub basket_id: String,
    pub customer_id: Option<String>,
    /// Earliest timestamp among the lines, if any carries one.
    pub date: Option<NaiveDate>,
    pub lines: Vec<ProductLine>,
}

impl Basket {
    pub fn is_monitored(&self) -> bool {
        self.customer_id.is_some()
    }
}

const REQUIRED: [&str; 5] = ["basket_id", "product_id", "unit_price", "quantity", "price_level"];

struct Columns {
    basket_id: usize,
    customer_id: Option<usize>,
    product_id: usize,
    unit_price: usize,
    quantity: usize,
    price_level: usize,
    children_flag: Option<usize>,
    timestamp: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
        if let Some(missing) = REQUIRED.iter().find(|c| find(c).is_none()) {
            return Err(Error::Parse {
                line: 1,
                message: format!("missing mandatory column `{missing}`"),
            });
        }
        Ok(Columns {
            basket_id: find("basket_id").unwrap_or_default(),
            customer_id: find("customer_id"),
            product_id: find("product_id").unwrap_or_default(),
            unit_price: find("unit_price").unwrap_or_default(),
            quantity: find("quantity").unwrap_or_default(),
            price_level: find("price_level").unwrap_or_default(),
            children_flag: find("children_flag"),
            timestamp: find("timestamp"),
        })
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .or_else(|| DateTime::parse_from_rfc3339(s).ok().map(|d| d.date_naive()))
        .or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f").ok().map(|d| d.date()))
        .or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f").ok().map(|d| d.date()))
}

fn parse_flag(s: &str) -> std::result::Result<bool, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" | "0" | "false" | "no" | "n" => Ok(false),
        "1" | "true" | "yes" | "y" => Ok(true),
        other => Err(format!("children_flag `{other}` is not a boolean")),
    }
}

fn parse_row(row: &csv::StringRecord, cols: &Columns) -> std::result::Result<TransactionRecord, String> {
    let field = |i: usize| row.get(i).unwrap_or("").trim();
    let opt = |i: Option<usize>| i.map(field).filter(|v| !v.is_empty());
    let basket_id = field(cols.basket_id);
    if basket_id.is_empty() {
        return Err("empty basket_id".into());
    }
    let product_id = field(cols.product_id);
    if product_id.is_empty() {
        return Err("empty product_id".into());
    }
    let unit_price: f64 = field(cols.unit_price)
        .parse()
        .map_err(|_| format!("unit_price `{}` is not a number", field(cols.unit_price)))?;
    if !unit_price.is_finite() || unit_price < 0.0 {
        return Err(format!("unit_price {unit_price} must be a non-negative amount"));
    }
    let quantity: u32 = field(cols.quantity)
        .parse()
        .map_err(|_| format!("quantity `{}` is not a positive integer", field(cols.quantity)))?;
    if quantity == 0 {
        return Err("quantity must be at least 1".into());
    }
    let price_level = field(cols.price_level).parse::<PriceLevel>().map_err(|e| e.to_string())?;
    let children_flag = match opt(cols.children_flag) {
        Some(v) => parse_flag(v)?,
        None => false,
    };
    let timestamp = match opt(cols.timestamp) {
        Some(v) => Some(parse_date(v).ok_or_else(|| format!("timestamp `{v}` is not an ISO-8601 date"))?),
        None => None,
    };
    Ok(TransactionRecord {
        basket_id: basket_id.to_string(),
        customer_id: opt(cols.customer_id).map(str::to_string),
        product_id: product_id.to_string(),
        unit_price,
        quantity,
        price_level,
        children_flag,
        timestamp,
    })
}

/// Reads and validates a transaction log.
///
/// Malformed rows are skipped and listed in the summary. A missing mandatory
/// column, an empty input and a receipt split across customers are hard errors.
pub fn ingest_reader<R: Read>(reader: R, options: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptySample("transaction log is empty".into()));
    }
    let cols = Columns::from_header(&header)?;
    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut owner: HashMap<String, (Option<String>, usize)> = HashMap::new();
    let mut rows = 0;
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line() as usize;
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                rows += 1;
                rejected.push(Rejection { line, reason: e.to_string() });
                continue;
            }
        }
        let line = row.position().map_or(line, |p| p.line() as usize);
        rows += 1;
        match parse_row(&row, &cols) {
            Ok(rec) => {
                match owner.get(&rec.basket_id) {
                    Some((cust, first)) if *cust != rec.customer_id => {
                        return Err(Error::Parse {
                            line,
                            message: format!(
                                "basket {} mixes customer ids (first seen at line {first})",
                                rec.basket_id
                            ),
                        });
                    }
                    Some(_) => {}
                    None => {
                        owner.insert(rec.basket_id.clone(), (rec.customer_id.clone(), line));
                    }
                }
                records.push(rec);
            }
            Err(reason) => rejected.push(Rejection { line, reason }),
        }
    }
    if rows == 0 {
        return Err(Error::EmptySample("transaction log has no data rows".into()));
    }
    let baskets = owner.len();
    let monitored_baskets = owner.values().filter(|(c, _)| c.is_some()).count();
    let mut customers: Vec<&str> = owner.values().filter_map(|(c, _)| c.as_deref()).collect();
    customers.sort_unstable();
    customers.dedup();
    let summary = IngestSummary {
        rows,
        accepted: records.len(),
        rejected,
        baskets,
        monitored_baskets,
        monitored_share: if baskets > 0 { monitored_baskets as f64 / baskets as f64 } else { 0.0 },
        customers: customers.len(),
    };
    Ok(Ingested { records, summary })
}

pub fn ingest_path(path: &Path, options: &IngestOptions) -> Result<Ingested> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_reader(std::io::BufReader::new(file), options)
}

/// Groups product lines into receipts in order of first appearance.
pub fn group_baskets(records: &[TransactionRecord]) -> Result<Vec<Basket>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut baskets: Vec<Basket> = Vec::new();
    for rec in records {
        let line = ProductLine {
            product_id: rec.product_id.clone(),
            unit_price: rec.unit_price,
            quantity: rec.quantity,
            price_level: rec.price_level,
            children: rec.children_flag,
        };
        match index.get(rec.basket_id.as_str()) {
            Some(&k) => {
                let b = &mut baskets[k];
                if b.customer_id != rec.customer_id {
                    return Err(Error::input(format!("basket {} mixes customer ids", rec.basket_id)));
                }
                b.date = match (b.date, rec.timestamp) {
                    (Some(a), Some(t)) => Some(a.min(t)),
                    (a, t) => a.or(t),
                };
                b.lines.push(line);
            }
            None => {
                index.insert(&rec.basket_id, baskets.len());
                baskets.push(Basket {
                    basket_id: rec.basket_id.clone(),
                    customer_id: rec.customer_id.clone(),
                    date: rec.timestamp,
                    lines: vec![line],
                });
            }
        }
    }
    Ok(baskets)
}
