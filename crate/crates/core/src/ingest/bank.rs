use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::calendar::YearMonth;
use crate::error::{Error, Result};
use crate::money::Money;

/// Months of card history following issue.
pub const ARREARS_MONTHS: usize = 12;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sociodemographics {
    pub age: Option<u32>,
    pub marital_status: Option<String>,
    pub postcode: Option<String>,
}

/// A card holder joined across the account, debit and card extracts.
///
/// Monthly sequences are indexed from the issue month: entry `k` covers the
/// calendar month `issue + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BankRecord {
    pub customer_id: String,
    pub sociodemographics: Sociodemographics,
    pub debit_transactions: Vec<(NaiveDate, Money)>,
    pub card_issue_date: NaiveDate,
    pub credit_limit: Money,
    pub monthly_drawn: Vec<Money>,
    pub monthly_arrears: Vec<bool>,
}

impl BankRecord {
    pub fn issue_month(&self) -> YearMonth {
        YearMonth::of(self.card_issue_date)
    }

    pub fn late_payments(&self) -> usize {
        self.monthly_arrears.iter().filter(|&&a| a).count()
    }

    /// Three or more late payments within the observed year.
    pub fn is_default(&self) -> bool {
        self.late_payments() >= 3
    }

    /// Index of the month of the third late payment.
    pub fn default_month(&self) -> Option<usize> {
        self.monthly_arrears
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .nth(2)
            .map(|(i, _)| i)
    }

    /// Drawn balance in the month the customer defaulted.
    pub fn exposure_at_default(&self) -> Option<Money> {
        self.default_month().map(|m| self.monthly_drawn[m])
    }

    /// Delinquency level (0..=3, 3 meaning three or more) counting only the
    /// card months that ended before `as_of` begins.
    pub fn delinquency_level_before(&self, as_of: YearMonth) -> u8 {
        let observed = self.issue_month().months_until(as_of).clamp(0, ARREARS_MONTHS as i32) as usize;
        let late = self.monthly_arrears[..observed].iter().filter(|&&a| a).count();
        late.min(3) as u8
    }

    /// Debit transactions dated inside the calendar month before the card.
    pub fn transactions_in_month_before_card(&self) -> impl Iterator<Item = &(NaiveDate, Money)> {
        let month = self.issue_month().plus(-1);
        self.debit_transactions
            .iter()
            .filter(move |(d, _)| YearMonth::of(*d) == month)
    }

    fn validate(&self, row: usize) -> Result<()> {
        let fail = |reason: String| Err(Error::Parse { row, reason });
        if self.credit_limit <= Money::ZERO {
            return fail(format!("{}: credit limit must be positive", self.customer_id));
        }
        if self.monthly_drawn.len() != ARREARS_MONTHS || self.monthly_arrears.len() != ARREARS_MONTHS {
            return fail(format!("{}: card history must cover {ARREARS_MONTHS} months", self.customer_id));
        }
        if let Some(m) = self
            .monthly_drawn
            .iter()
            .position(|&d| d < Money::ZERO || d > self.credit_limit)
        {
            return fail(format!(
                "{}: drawn amount in month {} outside [0, credit limit]",
                self.customer_id,
                m + 1
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct BankData {
    /// Card holders, sorted by customer id.
    pub records: Vec<BankRecord>,
    /// Account holders without card activity (bank customers, no card).
    pub cardless_customers: Vec<String>,
    /// `(row, customer_id)` of transactions whose account does not exist.
    pub orphan_transactions: Vec<(usize, String)>,
    /// `(row, customer_id)` of card rows whose account does not exist.
    pub orphan_cards: Vec<(usize, String)>,
}

impl BankData {
    pub fn is_customer(&self, id: &str) -> bool {
        self.records.binary_search_by(|r| r.customer_id.as_str().cmp(id)).is_ok()
            || self.cardless_customers.binary_search_by(|c| c.as_str().cmp(id)).is_ok()
    }

    pub fn get(&self, id: &str) -> Option<&BankRecord> {
        self.records
            .binary_search_by(|r| r.customer_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }
}

#[derive(Debug, Deserialize)]
struct AccountRow {
    customer_id: String,
    age: Option<u32>,
    marital_status: Option<String>,
    postcode: Option<String>,
}

#[derive(Debug, Deserialize)]
struct TransactionRow {
    customer_id: String,
    date: NaiveDate,
    amount: String,
}

fn non_empty(s: Option<String>) -> Option<String> {
    s.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

fn parse_money(s: &str, row: usize, what: &str) -> Result<Money> {
    s.parse().map_err(|e| Error::Parse {
        row,
        reason: format!("{what}: {e}"),
    })
}

/// Joins the three bank extracts on `customer_id`.
///
/// * accounts: `customer_id,age,marital_status,postcode`
/// * transactions: `customer_id,date,amount` (ISO dates)
/// * card activity: `customer_id,issue_date,credit_limit,drawn_1..drawn_12,arrears_1..arrears_12`
///
/// Row numbers in errors count the header as row 1.
pub fn ingest_bank<A: Read, T: Read, C: Read>(accounts: A, transactions: T, cards: C) -> Result<BankData> {
    let mut acct: BTreeMap<String, Sociodemographics> = BTreeMap::new();
    for (i, row) in csv::Reader::from_reader(accounts).deserialize::<AccountRow>().enumerate() {
        let row = row?;
        let id = row.customer_id.trim().to_string();
        let sd = Sociodemographics {
            age: row.age,
            marital_status: non_empty(row.marital_status),
            postcode: non_empty(row.postcode),
        };
        if acct.insert(id.clone(), sd).is_some() {
            log::warn!("accounts row {}: duplicate customer id {id}", i + 2);
            return Err(Error::DuplicateKey(id));
        }
    }

    let mut out = BankData::default();
    let mut debits: HashMap<String, Vec<(NaiveDate, Money)>> = HashMap::new();
    for (i, row) in csv::Reader::from_reader(transactions)
        .deserialize::<TransactionRow>()
        .enumerate()
    {
        let row = row?;
        let id = row.customer_id.trim().to_string();
        let amount = parse_money(&row.amount, i + 2, "amount")?;
        if acct.contains_key(&id) {
            debits.entry(id).or_default().push((row.date, amount));
        } else {
            out.orphan_transactions.push((i + 2, id));
        }
    }
    if !out.orphan_transactions.is_empty() {
        log::warn!(
            "{} transactions reference unknown accounts",
            out.orphan_transactions.len()
        );
    }

    let mut cards_by_id: BTreeMap<String, BankRecord> = BTreeMap::new();
    let mut reader = csv::Reader::from_reader(cards);
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let expected = 3 + 2 * ARREARS_MONTHS;
        if rec.len() != expected {
            return Err(Error::Parse {
                row,
                reason: format!("card activity needs {expected} fields, found {}", rec.len()),
            });
        }
        let id = rec[0].trim().to_string();
        let issue: NaiveDate = rec[1].trim().parse().map_err(|_| Error::Parse {
            row,
            reason: format!("invalid issue date `{}`", &rec[1]),
        })?;
        let limit = parse_money(&rec[2], row, "credit_limit")?;
        let drawn = (0..ARREARS_MONTHS)
            .map(|k| parse_money(&rec[3 + k], row, "drawn"))
            .collect::<Result<Vec<_>>>()?;
        let arrears = (0..ARREARS_MONTHS)
            .map(|k| match rec[3 + ARREARS_MONTHS + k].trim() {
                "0" | "false" => Ok(false),
                "1" | "true" => Ok(true),
                other => Err(Error::Parse {
                    row,
                    reason: format!("invalid arrears flag `{other}`"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        if cards_by_id.contains_key(&id) {
            return Err(Error::DuplicateKey(id));
        }
        let Some(sd) = acct.get(&id) else {
            out.orphan_cards.push((row, id));
            continue;
        };
        let mut debit = debits.remove(&id).unwrap_or_default();
        debit.sort();
        let record = BankRecord {
            customer_id: id.clone(),
            sociodemographics: sd.clone(),
            debit_transactions: debit,
            card_issue_date: issue,
            credit_limit: limit,
            monthly_drawn: drawn,
            monthly_arrears: arrears,
        };
        record.validate(row)?;
        cards_by_id.insert(id, record);
    }

    out.cardless_customers = acct
        .keys()
        .filter(|id| !cards_by_id.contains_key(*id))
        .cloned()
        .collect();
    if !out.cardless_customers.is_empty() {
        log::info!("{} accounts without card activity excluded", out.cardless_customers.len());
    }
    out.records = cards_by_id.into_values().collect();
    Ok(out)
}

/// Writes the three extracts in the layout [`ingest_bank`] reads.
///
/// `extra_accounts` are account holders without card activity.
pub fn write_bank<A: Write, T: Write, C: Write>(
    records: &[BankRecord],
    extra_accounts: &[(String, Sociodemographics)],
    accounts: A,
    transactions: T,
    cards: C,
) -> Result<()> {
    let mut a = csv::Writer::from_writer(accounts);
    a.write_record(["customer_id", "age", "marital_status", "postcode"])?;
    let sd_row = |id: &str, sd: &Sociodemographics| {
        vec![
            id.to_string(),
            sd.age.map(|a| a.to_string()).unwrap_or_default(),
            sd.marital_status.clone().unwrap_or_default(),
            sd.postcode.clone().unwrap_or_default(),
        ]
    };
    for r in records {
        a.write_record(sd_row(&r.customer_id, &r.sociodemographics))?;
    }
    for (id, sd) in extra_accounts {
        a.write_record(sd_row(id, sd))?;
    }
    a.flush().map_err(|e| Error::io("<accounts>", e))?;

    let mut t = csv::Writer::from_writer(transactions);
    t.write_record(["customer_id", "date", "amount"])?;
    for r in records {
        for (d, amt) in &r.debit_transactions {
            t.write_record([r.customer_id.clone(), d.to_string(), amt.to_string()])?;
        }
    }
    t.flush().map_err(|e| Error::io("<transactions>", e))?;

    let mut c = csv::Writer::from_writer(cards);
    let mut header = vec!["customer_id".to_string(), "issue_date".into(), "credit_limit".into()];
    header.extend((1..=ARREARS_MONTHS).map(|k| format!("drawn_{k}")));
    header.extend((1..=ARREARS_MONTHS).map(|k| format!("arrears_{k}")));
    c.write_record(&header)?;
    for r in records {
        let mut row = vec![r.customer_id.clone(), r.card_issue_date.to_string(), r.credit_limit.to_string()];
        row.extend(r.monthly_drawn.iter().map(Money::to_string));
        row.extend(r.monthly_arrears.iter().map(|&a| if a { "1" } else { "0" }.to_string()));
        c.write_record(&row)?;
    }
    c.flush().map_err(|e| Error::io("<card activity>", e))?;
    Ok(())
}
