//! Tabular data, the binding expression language and binding evaluation.

mod binding;
mod eval;
mod expr;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{Issue, IssueCode};

pub use binding::{
    apply_bindings, binding_order, check_binding, Binding, BindingError, BindingOutput,
    BindingTarget,
};
pub use eval::{evaluate, EvalContext, EvalError, Scope};
pub use expr::{parse_expression, BinOp, Expr, ExprError, Expression, Func, Ref};

/// Name of the column that switches a table to time-indexed cursoring.
pub const TIME_COLUMN: &str = "t";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    pub name: String,
    pub columns: Vec<Column>,
    pub row_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataError {
    #[error("input has no header or no data rows")]
    EmptyInput,
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: cell is not a finite decimal")]
    NonNumericCell { row: usize, column: String },
    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column selection is empty")]
    EmptySelection,
}

/// Named subset of a table's columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSelection {
    pub table: String,
    pub names: Vec<String>,
}

impl DataTable {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Value of `column` at `row`.
    pub fn value(&self, column: &str, row: usize) -> Option<f64> {
        self.column(column).and_then(|c| c.values.get(row).copied())
    }

    /// Keeps only the selected columns, in selection order.
    pub fn project(&self, selection: &ColumnSelection) -> Result<DataTable, DataError> {
        let columns = selection
            .names
            .iter()
            .map(|n| {
                self.column(n)
                    .cloned()
                    .ok_or_else(|| DataError::UnknownColumn(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DataTable {
            name: self.name.clone(),
            columns,
            row_count: self.row_count,
        })
    }

    /// Row the data cursor points at for a session at `tick_index` / `clock`.
    ///
    /// Tables with a `t` column are time-indexed: the cursor is the last row
    /// whose `t` does not exceed the clock (row 0 before the first sample,
    /// the final row after the last). Other tables advance one row per tick
    /// and hold the final row.
    pub fn cursor(&self, tick_index: u64, clock: f64) -> usize {
        let last = self.row_count.saturating_sub(1);
        match self.column(TIME_COLUMN) {
            Some(t) => t
                .values
                .iter()
                .enumerate()
                .rev()
                .find(|(_, v)| **v <= clock)
                .map(|(i, _)| i)
                .unwrap_or(0),
            None => usize::try_from(tick_index).unwrap_or(usize::MAX).min(last),
        }
    }
}

/// Reads an RFC 4180 CSV with a mandatory header row and decimal cells.
pub fn import_table(name: &str, csv: &[u8]) -> Result<DataTable, DataError> {
    let records = read_records(csv)?;
    let mut rows = records.into_iter();
    let header: Vec<String> = rows.next().ok_or(DataError::EmptyInput)?;
    if header.iter().all(|h| h.is_empty()) {
        return Err(DataError::EmptyInput);
    }
    let mut seen = BTreeSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(DataError::DuplicateColumn(h.clone()));
        }
    }

    let mut columns: Vec<Column> = header
        .iter()
        .map(|h| Column {
            name: h.clone(),
            values: Vec::new(),
        })
        .collect();
    let mut row_count = 0;
    for (i, record) in rows.enumerate() {
        let row = i + 1;
        if record.len() != header.len() {
            return Err(DataError::RaggedRows {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (cell, col) in record.iter().zip(columns.iter_mut()) {
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::NonNumericCell {
                    row,
                    column: col.name.clone(),
                })?;
            col.values.push(v);
        }
        row_count += 1;
    }
    if row_count == 0 {
        return Err(DataError::EmptyInput);
    }
    Ok(DataTable {
        name: String::from(name),
        columns,
        row_count,
    })
}

fn read_records(csv: &[u8]) -> Result<Vec<Vec<String>>, DataError> {
    let mut reader = csv_core::Reader::new();
    let mut input = csv;
    let mut buf = [0u8; 1024];
    let mut field: Vec<u8> = Vec::new();
    let mut record: Vec<String> = Vec::new();
    let mut records = Vec::new();
    loop {
        let (result, read, written) = reader.read_field(input, &mut buf);
        input = &input[read..];
        field.extend_from_slice(&buf[..written]);
        match result {
            csv_core::ReadFieldResult::InputEmpty | csv_core::ReadFieldResult::OutputFull => {}
            csv_core::ReadFieldResult::Field { record_end } => {
                let text = core::str::from_utf8(&field).map_err(|_| DataError::InvalidUtf8)?;
                record.push(text.trim().to_string());
                field.clear();
                if record_end {
                    records.push(core::mem::take(&mut record));
                }
            }
            csv_core::ReadFieldResult::End => break,
        }
    }
    Ok(records)
}

pub fn select_columns(table: &DataTable, names: &[&str]) -> Result<ColumnSelection, DataError> {
    if names.is_empty() {
        return Err(DataError::EmptySelection);
    }
    for n in names {
        if table.column(n).is_none() {
            return Err(DataError::UnknownColumn(String::from(*n)));
        }
    }
    Ok(ColumnSelection {
        table: table.name.clone(),
        names: names.iter().map(|n| String::from(*n)).collect(),
    })
}

pub(crate) fn check_table(table: &DataTable) -> Vec<Issue> {
    let path = format!("tables[{}]", table.name);
    let mut out = Vec::new();
    if table.row_count == 0 {
        out.push(Issue::error(
            IssueCode::InvalidTable,
            &path,
            "table has no rows",
        ));
    }
    if table.name.contains('.') {
        out.push(Issue::error(
            IssueCode::InvalidTable,
            &path,
            "table name must not contain '.'",
        ));
    }
    let mut names = BTreeSet::new();
    for col in &table.columns {
        let cpath = format!("{path}.columns[{}]", col.name);
        if !names.insert(col.name.as_str()) {
            out.push(Issue::error(
                IssueCode::InvalidTable,
                &cpath,
                "column name is not unique",
            ));
        }
        if col.values.len() != table.row_count {
            out.push(Issue::error(
                IssueCode::InvalidTable,
                &cpath,
                format!(
                    "column has {} values, table has {} rows",
                    col.values.len(),
                    table.row_count
                ),
            ));
        }
        if col.values.iter().any(|v| !v.is_finite()) {
            out.push(Issue::error(
                IssueCode::InvalidTable,
                &cpath,
                "column holds non-finite values",
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imports_header_and_rows() {
        let t = import_table("run", b"t,speed\n0,0\n1,100").unwrap();
        assert_eq!(t.columns.len(), 2);
        assert_eq!(t.row_count, 2);
        assert_eq!(t.value("speed", 1), Some(100.0));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert_eq!(
            import_table("x", b"a,b\n1"),
            Err(DataError::RaggedRows {
                row: 1,
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn non_numeric_cell_reports_row_and_column() {
        assert_eq!(
            import_table("x", b"a\nx"),
            Err(DataError::NonNumericCell {
                row: 1,
                column: "a".into()
            })
        );
        assert!(matches!(
            import_table("x", b"a\ninf"),
            Err(DataError::NonNumericCell { .. })
        ));
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(import_table("x", b""), Err(DataError::EmptyInput));
        assert_eq!(import_table("x", b"a,b\n"), Err(DataError::EmptyInput));
    }

    #[test]
    fn quoted_fields_and_crlf() {
        let t = import_table("q", b"\"a\",\"b c\"\r\n\"1.5\",2\r\n").unwrap();
        assert_eq!(t.column("b c").unwrap().values, vec![2.0]);
        assert_eq!(t.value("a", 0), Some(1.5));
    }

    #[test]
    fn column_selection() {
        let t = import_table("five", b"a,b,c,d,speed\n1,2,3,4,5").unwrap();
        assert_eq!(select_columns(&t, &["speed"]).unwrap().names.len(), 1);
        assert_eq!(select_columns(&t, &["a", "b", "c"]).unwrap().names.len(), 3);
        assert_eq!(
            select_columns(&t, &["nope"]),
            Err(DataError::UnknownColumn("nope".into()))
        );
        assert_eq!(select_columns(&t, &[]), Err(DataError::EmptySelection));
        let p = t
            .project(&select_columns(&t, &["speed", "a"]).unwrap())
            .unwrap();
        assert_eq!(p.columns[0].name, "speed");
        assert_eq!(p.columns[1].values, vec![1.0]);
    }

    #[test]
    fn time_indexed_cursor_holds_last_row() {
        let t = import_table("d", b"t,v\n0,0\n1,10\n2,20").unwrap();
        assert_eq!(t.cursor(0, 0.0), 0);
        assert_eq!(t.cursor(9, 0.9), 0);
        assert_eq!(t.cursor(10, 1.0), 1);
        assert_eq!(t.cursor(25, 2.5), 2);
        assert_eq!(t.cursor(1000, 100.0), 2);
    }

    #[test]
    fn tick_indexed_cursor_clamps() {
        let t = import_table("d", b"v\n0\n10\n20").unwrap();
        assert_eq!(t.cursor(1, 0.1), 1);
        assert_eq!(t.cursor(7, 0.7), 2);
    }
}
