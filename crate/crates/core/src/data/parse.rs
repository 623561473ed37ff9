use std::io::BufRead;

use chrono::DateTime;

use super::{DataError, RawInteraction};

/// Parses MovieLens `UserID::MovieID::Rating::Timestamp` lines. The rating
/// is discarded; any rating counts as an interaction.
pub fn parse_movielens<R: BufRead>(reader: R) -> Result<Vec<RawInteraction>, DataError> {
    parse_lines(reader, |line| {
        let fields: Vec<&str> = line.split("::").collect();
        if fields.len() != 4 {
            return Err(format!("expected 4 '::'-separated fields, found {}", fields.len()));
        }
        let timestamp = parse_timestamp(fields[3])?;
        Ok(RawInteraction { user_key: fields[0].to_string(), item_key: fields[1].to_string(), timestamp })
    })
}

/// Parses Gowalla check-ins: `user \t ISO-8601 time \t lat \t lon \t location`.
/// Coordinates are discarded; the location id is the item.
pub fn parse_gowalla<R: BufRead>(reader: R) -> Result<Vec<RawInteraction>, DataError> {
    parse_lines(reader, |line| {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(format!("expected 5 tab-separated fields, found {}", fields.len()));
        }
        let time = DateTime::parse_from_rfc3339(fields[1].trim())
            .map_err(|e| format!("bad check-in time {:?}: {e}", fields[1]))?;
        let timestamp = time.timestamp();
        if timestamp < 0 {
            return Err(format!("check-in time {:?} precedes the epoch", fields[1]));
        }
        Ok(RawInteraction { user_key: fields[0].trim().to_string(), item_key: fields[4].trim().to_string(), timestamp })
    })
}

fn parse_timestamp(field: &str) -> Result<i64, String> {
    let ts: i64 = field.trim().parse().map_err(|_| format!("bad timestamp {field:?}"))?;
    if ts < 0 {
        return Err(format!("negative timestamp {ts}"));
    }
    Ok(ts)
}

fn parse_lines<R: BufRead>(
    reader: R,
    mut parse: impl FnMut(&str) -> Result<RawInteraction, String>,
) -> Result<Vec<RawInteraction>, DataError> {
    let mut out = Vec::new();
    for (idx, chunk) in reader.split(b'\n').enumerate() {
        let bytes = chunk?;
        let line = String::from_utf8_lossy(&bytes);
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(line).map_err(|msg| DataError::Parse { line: idx + 1, msg })?);
    }
    Ok(out)
}
