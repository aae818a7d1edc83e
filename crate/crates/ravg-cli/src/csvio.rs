//! Streaming CSV ingestion: numeric rows of `p` features followed by the
//! response. An optional header row is detected by a non-numeric first line.

use std::io::BufRead;

use ravg::{Error, Result};

/// Parse rows and hand `(features, y)` to `sink`. The feature width is fixed
/// by the first data row; ragged rows fail with their line number.
pub fn for_each_row<R: BufRead>(
    reader: R,
    mut sink: impl FnMut(&[f64], f64) -> Result<()>,
) -> Result<usize> {
    let mut width: Option<usize> = None;
    let mut buf: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse { line: lineno, reason: e.to_string() })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        buf.clear();
        let mut bad_field: Option<String> = None;
        for field in trimmed.split(',') {
            match field.trim().parse::<f64>() {
                Ok(v) => buf.push(v),
                Err(_) => {
                    bad_field = Some(field.trim().to_string());
                    break;
                }
            }
        }
        if let Some(field) = bad_field {
            // a non-numeric first row is a header
            if rows == 0 && width.is_none() {
                continue;
            }
            return Err(Error::Parse {
                line: lineno,
                reason: format!("non-numeric field {field:?}"),
            });
        }
        if buf.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                reason: format!("need at least one feature and a response, found {} values", buf.len()),
            });
        }
        match width {
            None => width = Some(buf.len()),
            Some(w) if w != buf.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    reason: format!("row has {} values, expected {w}", buf.len()),
                })
            }
            _ => {}
        }
        let y = buf[buf.len() - 1];
        sink(&buf[..buf.len() - 1], y)?;
        rows += 1;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detected_and_rows_parsed() {
        let text = "x1,x2,y\n1,2,3\n4,5,6\n";
        let mut seen = Vec::new();
        let n = for_each_row(text.as_bytes(), |x, y| {
            seen.push((x.to_vec(), y));
            Ok(())
        })
        .unwrap();
        assert_eq!(n, 2);
        assert_eq!(seen[0], (vec![1.0, 2.0], 3.0));
    }

    #[test]
    fn ragged_row_cites_line() {
        let text = "1,2,3\n4,5\n";
        let err = for_each_row(text.as_bytes(), |_, _| Ok(())).unwrap_err();
        match err {
            Error::Parse { line: 2, .. } => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_mid_file_rejected() {
        let text = "1,2,3\n4,oops,6\n";
        let err = for_each_row(text.as_bytes(), |_, _| Ok(())).unwrap_err();
        match err {
            Error::Parse { line: 2, .. } => {}
            other => panic!("{other:?}"),
        }
    }
}
