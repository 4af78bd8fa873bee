//! Loan outcomes of scored subjects.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BankRecord;
use crate::money::Money;

/// Principal (credit limit) and realised exposure of one loan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoanOutcome {
    pub principal: Money,
    /// Drawn balance at default; zero for performing loans.
    pub ead: Money,
    pub is_defaulter: bool,
}

impl LoanOutcome {
    pub fn new(principal: Money, ead: Money, is_defaulter: bool) -> Result<Self> {
        if principal <= Money::ZERO {
            return Err(Error::invalid(format!("loan principal must be positive, got {principal}")));
        }
        if ead < Money::ZERO || ead > principal {
            return Err(Error::invalid(format!("EAD {ead} outside [0, {principal}]")));
        }
        Ok(LoanOutcome {
            principal,
            ead,
            is_defaulter,
        })
    }

    pub fn from_record(rec: &BankRecord) -> Self {
        LoanOutcome {
            principal: rec.credit_limit,
            ead: rec.exposure_at_default().unwrap_or(Money::ZERO),
            is_defaulter: rec.is_default(),
        }
    }

    /// Fraction of the principal lost: `LGD · EAD / A`.
    pub fn loss_fraction(&self, lgd: f64) -> f64 {
        lgd * self.ead.as_f64() / self.principal.as_f64()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LoanRow {
    row_id: String,
    credit_limit: Money,
    ead: Money,
    default: u8,
}

pub fn write_loans<W: Write>(row_ids: &[String], loans: &[LoanOutcome], w: W) -> Result<()> {
    if row_ids.len() != loans.len() {
        return Err(Error::invalid("row ids and loans differ in length"));
    }
    let mut out = csv::Writer::from_writer(w);
    for (id, l) in row_ids.iter().zip(loans) {
        out.serialize(LoanRow {
            row_id: id.clone(),
            credit_limit: l.principal,
            ead: l.ead,
            default: u8::from(l.is_defaulter),
        })?;
    }
    out.flush().map_err(|e| Error::io("<loans>", e))?;
    Ok(())
}

pub fn read_loans<R: Read>(r: R) -> Result<(Vec<String>, Vec<LoanOutcome>)> {
    let mut ids = Vec::new();
    let mut loans = Vec::new();
    for (k, row) in csv::Reader::from_reader(r).deserialize::<LoanRow>().enumerate() {
        let row = row?;
        let loan = LoanOutcome::new(row.credit_limit, row.ead, row.default != 0).map_err(|e| Error::Parse {
            row: k + 2,
            reason: e.to_string(),
        })?;
        ids.push(row.row_id);
        loans.push(loan);
    }
    Ok((ids, loans))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_and_round_trip() {
        assert!(LoanOutcome::new(Money(0), Money(0), false).is_err());
        assert!(LoanOutcome::new(Money(100), Money(101), true).is_err());
        let a = LoanOutcome::new(Money(10_000), Money(8_000), true).unwrap();
        assert!((a.loss_fraction(0.8) - 0.64).abs() < 1e-12);
        let b = LoanOutcome::new(Money(5_000), Money(0), false).unwrap();
        let ids = vec!["t1:a".to_string(), "t1:b".to_string()];
        let mut buf = Vec::new();
        write_loans(&ids, &[a, b], &mut buf).unwrap();
        let (ids2, loans) = read_loans(buf.as_slice()).unwrap();
        assert_eq!(ids2, ids);
        assert_eq!(loans, vec![a, b]);
    }
}
