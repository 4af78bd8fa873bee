//! Typed ingestion of call-detail records and bank extracts.

mod bank;
mod cdr;

pub use bank::{ingest_bank, write_bank, BankData, BankRecord, Sociodemographics, ARREARS_MONTHS};
pub use cdr::{
    ingest_cdr, parse_cdr_line, write_cdr, CdrIngest, CdrRecord, IngestOptions, IngestStats,
    RejectReason, Rejection,
};
