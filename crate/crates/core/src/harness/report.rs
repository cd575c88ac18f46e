use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    JsonLines,
}

/// Writes rows as CSV with a header line, or as one JSON object per line.
pub fn write_rows<T: Serialize, W: Write>(out: W, rows: &[T], format: Format) -> Result<()> {
    let transport = |e: std::io::Error| Error::Transport(format!("writing report: {e}"));
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in rows {
                w.serialize(r)
                    .map_err(|e| Error::Transport(format!("writing report: {e}")))?;
            }
            w.flush().map_err(transport)
        }
        Format::JsonLines => {
            let mut out = out;
            for r in rows {
                serde_json::to_writer(&mut out, r)
                    .map_err(|e| Error::Transport(format!("writing report: {e}")))?;
                out.write_all(b"\n").map_err(transport)?;
            }
            out.flush().map_err(transport)
        }
    }
}
