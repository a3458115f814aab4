//! Event file formats.
//!
//! Text: one event per line, `t x y p` separated by spaces, `p` is `-1` or `1`.
//! Blank lines and lines starting with `#` are ignored.
//!
//! Binary (little-endian): a 16-byte header `"EVT1"`, `u16` width, `u16`
//! height, `u32` record count, 4 reserved zero bytes; then 13-byte records of
//! `f64` t, `u16` x, `u16` y, `i8` p.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::types::{validate_record, Dims, EventRecord, EventStream};

pub const BINARY_MAGIC: &[u8; 4] = b"EVT1";
pub const BINARY_HEADER_LEN: usize = 16;
pub const BINARY_RECORD_LEN: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Text,
    Binary,
}

impl FromStr for EventFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(EventFormat::Text),
            "bin" | "binary" => Ok(EventFormat::Binary),
            other => Err(Error::config(format!("unknown event format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Sensor size for text input; inferred from the largest coordinates if absent.
    /// Ignored for binary input, which carries its own header.
    pub dims: Option<Dims>,
    /// Sort out-of-order input instead of rejecting it.
    pub sort: bool,
}

pub fn read_events(
    path: impl AsRef<Path>,
    format: EventFormat,
    opts: ReadOptions,
) -> Result<EventStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_events_from(BufReader::new(file), format, opts).map_err(|e| e.in_file(path))
}

pub fn read_events_from<R: BufRead>(
    reader: R,
    format: EventFormat,
    opts: ReadOptions,
) -> Result<EventStream> {
    let (dims, records) = match format {
        EventFormat::Text => read_text(reader, opts.dims)?,
        EventFormat::Binary => read_binary(reader)?,
    };
    if opts.sort {
        EventStream::from_unsorted(dims, records)
    } else {
        EventStream::new(dims, records)
    }
}

pub fn write_events(
    stream: &EventStream,
    path: impl AsRef<Path>,
    format: EventFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    let mut w = BufWriter::new(file);
    write_events_to(stream, &mut w, format)?;
    w.flush()?;
    Ok(())
}

pub fn write_events_to<W: Write>(
    stream: &EventStream,
    w: &mut W,
    format: EventFormat,
) -> Result<()> {
    match format {
        EventFormat::Text => {
            for r in stream.records() {
                // `{}` on f64 prints the shortest string that parses back exactly
                writeln!(w, "{} {} {} {}", r.t, r.x, r.y, r.p)?;
            }
        }
        EventFormat::Binary => {
            let dims = stream.dims();
            let (width, height) = header_dims(dims)?;
            let count = u32::try_from(stream.len())
                .map_err(|_| Error::data("too many events for a binary event file"))?;
            let mut header = [0u8; BINARY_HEADER_LEN];
            header[0..4].copy_from_slice(BINARY_MAGIC);
            header[4..6].copy_from_slice(&width.to_le_bytes());
            header[6..8].copy_from_slice(&height.to_le_bytes());
            header[8..12].copy_from_slice(&count.to_le_bytes());
            w.write_all(&header)?;
            let mut rec = [0u8; BINARY_RECORD_LEN];
            for r in stream.records() {
                rec[0..8].copy_from_slice(&r.t.to_le_bytes());
                rec[8..10].copy_from_slice(&r.x.to_le_bytes());
                rec[10..12].copy_from_slice(&r.y.to_le_bytes());
                rec[12] = r.p as u8;
                w.write_all(&rec)?;
            }
        }
    }
    Ok(())
}

fn header_dims(dims: Dims) -> Result<(u16, u16)> {
    let w = u16::try_from(dims.width);
    let h = u16::try_from(dims.height);
    match (w, h) {
        (Ok(w), Ok(h)) => Ok((w, h)),
        _ => Err(Error::data(format!(
            "{dims} does not fit the binary event header"
        ))),
    }
}

fn read_text<R: BufRead>(reader: R, dims: Option<Dims>) -> Result<(Dims, Vec<EventRecord>)> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let location = || format!("line {}", i + 1);
        let mut fields = trimmed.split_whitespace();
        let mut next = |name: &str| {
            fields
                .next()
                .ok_or_else(|| Error::parse(location(), format!("missing field {name}")))
        };
        let t_s = next("t")?;
        let x_s = next("x")?;
        let y_s = next("y")?;
        let p_s = next("p")?;
        if fields.next().is_some() {
            return Err(Error::parse(location(), "expected 4 fields"));
        }
        let t: f64 = t_s
            .parse()
            .map_err(|_| Error::parse(location(), format!("bad timestamp {t_s:?}")))?;
        let x: u16 = x_s
            .parse()
            .map_err(|_| Error::parse(location(), format!("bad x coordinate {x_s:?}")))?;
        let y: u16 = y_s
            .parse()
            .map_err(|_| Error::parse(location(), format!("bad y coordinate {y_s:?}")))?;
        let p: i8 = match p_s {
            "1" => 1,
            "-1" => -1,
            other => {
                return Err(Error::parse(
                    location(),
                    format!("polarity must be -1 or 1, got {other:?}"),
                ))
            }
        };
        let rec = EventRecord::new(t, x, y, p);
        if let Some(d) = dims {
            validate_record(d, &rec).map_err(|m| Error::parse(location(), m))?;
        } else if !t.is_finite() {
            return Err(Error::parse(
                location(),
                format!("non-finite timestamp {t}"),
            ));
        }
        records.push(rec);
    }
    let dims = match dims {
        Some(d) => d,
        None => {
            let w = records.iter().map(|r| r.x as usize + 1).max().unwrap_or(1);
            let h = records.iter().map(|r| r.y as usize + 1).max().unwrap_or(1);
            Dims::new(w, h)?
        }
    };
    Ok((dims, records))
}

fn read_binary<R: Read>(mut reader: R) -> Result<(Dims, Vec<EventRecord>)> {
    let mut header = [0u8; BINARY_HEADER_LEN];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::parse("header", "truncated binary event header"))?;
    if &header[0..4] != BINARY_MAGIC {
        return Err(Error::parse("header", "missing EVT1 magic"));
    }
    let width = u16::from_le_bytes([header[4], header[5]]) as usize;
    let height = u16::from_le_bytes([header[6], header[7]]) as usize;
    let count = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let dims = Dims::new(width, height).map_err(|e| Error::parse("header", e.to_string()))?;
    let mut records = Vec::with_capacity(count.min(1 << 24));
    let mut rec = [0u8; BINARY_RECORD_LEN];
    for i in 0..count {
        reader.read_exact(&mut rec).map_err(|_| {
            Error::parse(
                format!("record {i}"),
                format!("truncated: header declares {count} records"),
            )
        })?;
        let r = EventRecord::new(
            f64::from_le_bytes(rec[0..8].try_into().unwrap()),
            u16::from_le_bytes([rec[8], rec[9]]),
            u16::from_le_bytes([rec[10], rec[11]]),
            rec[12] as i8,
        );
        validate_record(dims, &r).map_err(|m| Error::parse(format!("record {i}"), m))?;
        records.push(r);
    }
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(Error::parse(
            format!("record {count}"),
            "trailing bytes after declared records",
        ));
    }
    Ok((dims, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse_text(s: &str) -> Result<EventStream> {
        read_events_from(
            s.as_bytes(),
            EventFormat::Text,
            ReadOptions {
                dims: Some(Dims::new(16, 16).unwrap()),
                sort: false,
            },
        )
    }

    #[test]
    fn text_line_decodes() {
        let s = parse_text("0.5 3 7 -1\n").unwrap();
        assert_eq!(s.records(), &[EventRecord::new(0.5, 3, 7, -1)]);
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let err = parse_text("0.1 0 0 1\n0.2 1 1 2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_text("0.1 0 0 1\n\n0.2 99 1 1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_text("inf 0 0 1\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(parse_text("0.1 0 0\n").is_err());
    }

    #[test]
    fn unsorted_input_needs_sort_flag() {
        let text = "0.5 0 0 1\n0.2 0 0 1\n";
        assert!(parse_text(text).is_err());
        let s = read_events_from(
            text.as_bytes(),
            EventFormat::Text,
            ReadOptions {
                dims: None,
                sort: true,
            },
        )
        .unwrap();
        assert_eq!(s.records()[0].t, 0.2);
        assert_eq!(s.dims(), Dims::new(1, 1).unwrap());
    }

    #[test]
    fn binary_record_layout() {
        let s = EventStream::new(
            Dims::new(8, 9).unwrap(),
            vec![EventRecord::new(0.5, 3, 7, -1)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_events_to(&s, &mut buf, EventFormat::Binary).unwrap();
        assert_eq!(buf.len(), BINARY_HEADER_LEN + BINARY_RECORD_LEN);
        assert_eq!(&buf[0..4], b"EVT1");
        assert_eq!(&buf[4..8], &[8, 0, 9, 0]);
        assert_eq!(&buf[8..16], &[1, 0, 0, 0, 0, 0, 0, 0]);
        let rec = &buf[16..];
        assert_eq!(&rec[0..8], &0.5f64.to_le_bytes());
        assert_eq!(&rec[8..13], &[3, 0, 7, 0, 0xff]);
        let back = read_events_from(&buf[..], EventFormat::Binary, ReadOptions::default()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn binary_truncation_and_magic() {
        let s = EventStream::new(
            Dims::new(4, 4).unwrap(),
            vec![EventRecord::new(0.1, 1, 1, 1); 3],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_events_to(&s, &mut buf, EventFormat::Binary).unwrap();
        let err = read_events_from(
            &buf[..buf.len() - 1],
            EventFormat::Binary,
            ReadOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("record 2"), "{err}");
        buf[0] = b'X';
        assert!(read_events_from(&buf[..], EventFormat::Binary, ReadOptions::default()).is_err());
    }

    fn arb_stream() -> impl Strategy<Value = EventStream> {
        (1usize..40, 1usize..40).prop_flat_map(|(w, h)| {
            prop::collection::vec(
                (-1e6f64..1e6, 0..w as u16, 0..h as u16, prop::bool::ANY),
                0..64,
            )
            .prop_map(move |recs| {
                let recs = recs
                    .into_iter()
                    .map(|(t, x, y, pos)| EventRecord::new(t, x, y, if pos { 1 } else { -1 }))
                    .collect();
                EventStream::from_unsorted(Dims::new(w, h).unwrap(), recs).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn round_trip_both_formats(s in arb_stream()) {
            for format in [EventFormat::Text, EventFormat::Binary] {
                let mut buf = Vec::new();
                write_events_to(&s, &mut buf, format).unwrap();
                let opts = ReadOptions { dims: Some(s.dims()), sort: false };
                let back = read_events_from(&buf[..], format, opts).unwrap();
                prop_assert_eq!(&back, &s);
            }
        }
    }
}
