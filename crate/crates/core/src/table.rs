//! Plot-ready numeric tables: whitespace-delimited `.dat` files with a
//! `#`-prefixed header row, or comma-separated `.csv` files.

use std::io::{self, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Dat,
    Csv,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Dat => "dat",
            TableFormat::Csv => "csv",
        }
    }

    fn separator(self) -> &'static str {
        match self {
            TableFormat::Dat => " ",
            TableFormat::Csv => ",",
        }
    }

    pub fn write_header<W: Write>(self, w: &mut W, columns: &[&str]) -> io::Result<()> {
        match self {
            TableFormat::Dat => writeln!(w, "# {}", columns.join(" ")),
            TableFormat::Csv => writeln!(w, "{}", columns.join(",")),
        }
    }

    pub fn write_row<W: Write>(self, w: &mut W, cells: &[String]) -> io::Result<()> {
        writeln!(w, "{}", cells.join(self.separator()))
    }
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dat" => Ok(TableFormat::Dat),
            "csv" => Ok(TableFormat::Csv),
            other => Err(Error::Parse(format!(
                "unknown table format `{other}` (expected dat or csv)"
            ))),
        }
    }
}

impl std::fmt::Display for TableFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.extension())
    }
}

/// `{:e}` formatting, `nan` for missing values.
pub fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:e}"))
}
