use std::path::Path;

use super::{ErrorRow, ErrorTable};
use crate::cost::CostLedger;
use crate::error::{Error, Result};
use crate::schemes::SchemeId;

pub const CSV_HEADER: [&str; 13] = [
    "scheme",
    "N",
    "K",
    "M",
    "paths",
    "rmse",
    "mc_stderr",
    "cost_scalar",
    "f_evals",
    "b_evals",
    "bprime_evals",
    "gauss_draws",
    "wall_ms",
];

/// `x` rounded to 10 significant digits, printed in shortest form.
fn sig10(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.9e}").parse().expect("formatted float reparses");
    rounded.to_string()
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Write `table` to `path`, rows sorted by scheme and then `M`.
pub fn emit_csv(table: &ErrorTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    w.write_record(CSV_HEADER).map_err(io)?;
    let mut rows: Vec<&ErrorRow> = table.rows.iter().collect();
    rows.sort_by_key(|r| (r.scheme as u8, r.m, r.n, r.k));
    for r in rows {
        let l = &r.ledger;
        w.write_record([
            r.scheme.name().to_string(),
            r.n.to_string(),
            r.k.to_string(),
            r.m.to_string(),
            r.paths.to_string(),
            sig10(r.rmse),
            sig10(r.mc_stderr),
            sig10(l.scalar()),
            l.f_evals.to_string(),
            l.b_evals.to_string(),
            l.bprime_evals.to_string(),
            l.gauss_draws.to_string(),
            sig10(r.wall_ms),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Read a file written by [`emit_csv`]. The unit cost of each ledger is
/// recovered from `cost_scalar`.
pub fn parse_csv(path: impl AsRef<Path>) -> Result<ErrorTable> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(io)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Io(format!(
            "{}: unexpected header `{}`",
            path.display(),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut table = ErrorTable::default();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(io)?;
        let bad = |col: usize| {
            Error::Io(format!(
                "{}: row {}: bad `{}` value",
                path.display(),
                line + 1,
                CSV_HEADER[col]
            ))
        };
        let int = |col: usize| record[col].parse::<u64>().map_err(|_| bad(col));
        let float = |col: usize| record[col].parse::<f64>().map_err(|_| bad(col));
        let scheme: SchemeId = record[0].parse().map_err(|_| bad(0))?;
        let mut ledger = CostLedger::counts(int(8)?, int(9)?, int(10)?, int(11)?);
        let functional = ledger.functional_evals();
        if functional > 0 {
            ledger.unit_cost = (float(7)? - ledger.gauss_draws as f64) / functional as f64;
        }
        table.rows.push(ErrorRow {
            scheme,
            n: int(1)? as usize,
            k: int(2)? as usize,
            m: int(3)? as usize,
            paths: int(4)? as usize,
            rmse: float(5)?,
            mc_stderr: float(6)?,
            ledger,
            wall_ms: float(12)?,
        });
    }
    Ok(table)
}
