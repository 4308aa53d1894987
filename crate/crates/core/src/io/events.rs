//! The `IONE` event container: a 24-byte header followed by fixed-width
//! little-endian records, or a CSV equivalent selected by a `.csv`
//! extension.
//!
//! Header layout: magic `IONE`, version `u16`, record kind `u8`, one pad
//! byte, `tick_ns: f64`, record count `u64`.

use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use super::atomic::AtomicFile;
use crate::pixel::PixelHit;
use crate::sim::{PhotonEvent, SourceKind, Truth};
use crate::units::TICK_NS;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"IONE";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 24;
const COUNT_OFFSET: u64 = 16;
const NO_TRUTH_KIND: u8 = u8::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKind {
    PixelHit = 0,
    Photon = 1,
}

impl RecordKind {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(RecordKind::PixelHit),
            1 => Some(RecordKind::Photon),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::PixelHit => "pixel hit",
            RecordKind::Photon => "photon",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileFormat {
    Binary,
    Csv,
}

impl FileFormat {
    pub fn of(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => FileFormat::Csv,
            _ => FileFormat::Binary,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            FileFormat::Binary => "ione",
            FileFormat::Csv => "csv",
        }
    }
}

/// A record type that can live in an event file.
pub trait EventRecord: Sized {
    const KIND: RecordKind;
    const SIZE: usize;
    const CSV_HEADER: &'static [&'static str];
    fn toa_ticks(&self) -> u64;
    fn encode(&self, out: &mut Vec<u8>);
    fn decode(bytes: &[u8]) -> std::result::Result<Self, String>;
    fn csv_fields(&self) -> Vec<String>;
    fn from_csv(rec: &csv::StringRecord) -> std::result::Result<Self, String>;
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    i: usize,
    name: &str,
) -> std::result::Result<T, String> {
    let s = rec.get(i).ok_or_else(|| format!("missing column {name}"))?;
    s.trim()
        .parse()
        .map_err(|_| format!("bad {name} value {s:?}"))
}

impl EventRecord for PixelHit {
    const KIND: RecordKind = RecordKind::PixelHit;
    const SIZE: usize = 16;
    const CSV_HEADER: &'static [&'static str] = &["toa_ticks", "col", "row", "tot"];

    fn toa_ticks(&self) -> u64 {
        self.toa_ticks
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.toa_ticks.to_le_bytes());
        out.extend_from_slice(&self.col.to_le_bytes());
        out.extend_from_slice(&self.row.to_le_bytes());
        out.extend_from_slice(&self.tot.to_le_bytes());
        out.extend_from_slice(&[0, 0]);
    }

    fn decode(b: &[u8]) -> std::result::Result<Self, String> {
        let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
        Ok(PixelHit {
            toa_ticks: u64::from_le_bytes(b[0..8].try_into().unwrap()),
            col: u16_at(8),
            row: u16_at(10),
            tot: u16_at(12),
        })
    }

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.toa_ticks.to_string(),
            self.col.to_string(),
            self.row.to_string(),
            self.tot.to_string(),
        ]
    }

    fn from_csv(rec: &csv::StringRecord) -> std::result::Result<Self, String> {
        Ok(PixelHit {
            toa_ticks: field(rec, 0, "toa_ticks")?,
            col: field(rec, 1, "col")?,
            row: field(rec, 2, "row")?,
            tot: field(rec, 3, "tot")?,
        })
    }
}

fn truth_from_raw(ion: i16, kind: u8) -> std::result::Result<Option<Truth>, String> {
    if ion < 0 {
        return Ok(None);
    }
    let kind = SourceKind::from_u8(kind).ok_or_else(|| format!("unknown truth kind {kind}"))?;
    Ok(Some(Truth {
        source_ion: ion as u16,
        kind,
    }))
}

fn truth_to_raw(t: Option<Truth>) -> (i16, u8) {
    match t {
        Some(t) => (t.source_ion as i16, t.kind as u8),
        None => (-1, NO_TRUTH_KIND),
    }
}

impl EventRecord for PhotonEvent {
    const KIND: RecordKind = RecordKind::Photon;
    const SIZE: usize = 20;
    const CSV_HEADER: &'static [&'static str] = &["toa_ticks", "x", "y", "truth_ion", "truth_kind"];

    fn toa_ticks(&self) -> u64 {
        self.t_ticks
    }

    fn encode(&self, out: &mut Vec<u8>) {
        let (ion, kind) = truth_to_raw(self.truth);
        out.extend_from_slice(&self.t_ticks.to_le_bytes());
        out.extend_from_slice(&self.x.to_le_bytes());
        out.extend_from_slice(&self.y.to_le_bytes());
        out.extend_from_slice(&ion.to_le_bytes());
        out.extend_from_slice(&[kind, 0]);
    }

    fn decode(b: &[u8]) -> std::result::Result<Self, String> {
        let f32_at = |i: usize| f32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        Ok(PhotonEvent {
            t_ticks: u64::from_le_bytes(b[0..8].try_into().unwrap()),
            x: f32_at(8),
            y: f32_at(12),
            truth: truth_from_raw(i16::from_le_bytes([b[16], b[17]]), b[18])?,
        })
    }

    fn csv_fields(&self) -> Vec<String> {
        let (ion, kind) = truth_to_raw(self.truth);
        vec![
            self.t_ticks.to_string(),
            self.x.to_string(),
            self.y.to_string(),
            ion.to_string(),
            kind.to_string(),
        ]
    }

    fn from_csv(rec: &csv::StringRecord) -> std::result::Result<Self, String> {
        Ok(PhotonEvent {
            t_ticks: field(rec, 0, "toa_ticks")?,
            x: field(rec, 1, "x")?,
            y: field(rec, 2, "y")?,
            truth: truth_from_raw(field(rec, 3, "truth_ion")?, field(rec, 4, "truth_kind")?)?,
        })
    }
}

enum Sink {
    Binary(AtomicFile),
    Csv(csv::Writer<AtomicFile>),
}

/// Streaming writer; records must arrive sorted by time. Nothing appears at
/// the destination until [`finish`](EventWriter::finish).
pub struct EventWriter<R: EventRecord> {
    path: PathBuf,
    sink: Sink,
    count: u64,
    last: u64,
    buf: Vec<u8>,
    _kind: PhantomData<R>,
}

impl<R: EventRecord> EventWriter<R> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut file = AtomicFile::create(&path)?;
        let sink = match FileFormat::of(&path) {
            FileFormat::Binary => {
                let mut h = Vec::with_capacity(HEADER_LEN as usize);
                h.extend_from_slice(&MAGIC);
                h.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
                h.extend_from_slice(&[R::KIND as u8, 0]);
                h.extend_from_slice(&TICK_NS.to_le_bytes());
                h.extend_from_slice(&0u64.to_le_bytes());
                file.write_all(&h).map_err(|e| Error::io(&path, e))?;
                Sink::Binary(file)
            }
            FileFormat::Csv => {
                let mut w = csv::Writer::from_writer(file);
                w.write_record(R::CSV_HEADER)
                    .map_err(|e| csv_io(&path, e))?;
                Sink::Csv(w)
            }
        };
        Ok(Self {
            path,
            sink,
            count: 0,
            last: 0,
            buf: Vec::with_capacity(R::SIZE),
            _kind: PhantomData,
        })
    }

    pub fn push(&mut self, r: &R) -> Result<()> {
        let t = r.toa_ticks();
        if t < self.last {
            return Err(Error::Unsorted {
                index: self.count as usize,
            });
        }
        self.last = t;
        match &mut self.sink {
            Sink::Binary(f) => {
                self.buf.clear();
                r.encode(&mut self.buf);
                f.write_all(&self.buf)
                    .map_err(|e| Error::io(&self.path, e))?;
            }
            Sink::Csv(w) => w
                .write_record(r.csv_fields())
                .map_err(|e| csv_io(&self.path, e))?,
        }
        self.count += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<u64> {
        let path = self.path;
        match self.sink {
            Sink::Binary(mut f) => {
                let w = f.writer();
                w.flush().map_err(|e| Error::io(&path, e))?;
                let file = w.get_mut();
                file.seek(SeekFrom::Start(COUNT_OFFSET))
                    .map_err(|e| Error::io(&path, e))?;
                file.write_all(&self.count.to_le_bytes())
                    .map_err(|e| Error::io(&path, e))?;
                f.commit()?;
            }
            Sink::Csv(w) => {
                let f = w
                    .into_inner()
                    .map_err(|e| Error::io(&path, e.into_error()))?;
                f.commit()?;
            }
        }
        Ok(self.count)
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

pub fn write_events<R: EventRecord>(path: impl AsRef<Path>, records: &[R]) -> Result<()> {
    let mut w = EventWriter::create(path)?;
    for r in records {
        w.push(r)?;
    }
    w.finish().map(|_| ())
}

enum Source {
    Binary {
        reader: BufReader<File>,
        remaining: u64,
        offset: u64,
    },
    Csv(csv::StringRecordsIntoIter<File>),
}

/// Streaming reader over the records of one kind.
pub struct EventReader<R: EventRecord> {
    path: PathBuf,
    source: Source,
    index: usize,
    last: u64,
    buf: Vec<u8>,
    failed: bool,
    len: Option<u64>,
    _kind: PhantomData<R>,
}

fn format_err(path: &Path, offset: u64, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        reason: reason.into(),
    }
}

struct Header {
    kind: RecordKind,
    count: u64,
}

fn read_header(path: &Path, r: &mut impl Read) -> Result<Header> {
    let mut h = [0u8; HEADER_LEN as usize];
    let mut got = 0;
    while got < h.len() {
        match r.read(&mut h[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    if got < 4 || h[0..4] != MAGIC {
        return Err(format_err(path, 0, "bad magic, not an IONE event file"));
    }
    if got < HEADER_LEN as usize {
        return Err(format_err(path, got as u64, "truncated header"));
    }
    let version = u16::from_le_bytes([h[4], h[5]]);
    if version != FORMAT_VERSION {
        return Err(format_err(
            path,
            4,
            format!("unsupported format version {version}"),
        ));
    }
    let kind = RecordKind::from_u8(h[6])
        .ok_or_else(|| format_err(path, 6, format!("unknown record kind {}", h[6])))?;
    let tick = f64::from_le_bytes(h[8..16].try_into().unwrap());
    if tick != TICK_NS {
        return Err(format_err(
            path,
            8,
            format!("tick length {tick} ns, expected {TICK_NS}"),
        ));
    }
    let count = u64::from_le_bytes(h[16..24].try_into().unwrap());
    Ok(Header { kind, count })
}

/// Record kind stored in an event file.
pub fn peek_kind(path: impl AsRef<Path>) -> Result<RecordKind> {
    let path = path.as_ref();
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    match FileFormat::of(path) {
        FileFormat::Binary => Ok(read_header(path, &mut f)?.kind),
        FileFormat::Csv => {
            let mut r = csv::Reader::from_reader(f);
            let h = r.headers().map_err(|e| csv_parse(path, &e))?;
            let cols: Vec<&str> = h.iter().collect();
            if cols == PixelHit::CSV_HEADER {
                Ok(RecordKind::PixelHit)
            } else if cols == PhotonEvent::CSV_HEADER {
                Ok(RecordKind::Photon)
            } else {
                Err(parse_err(path, 1, format!("unrecognised header {cols:?}")))
            }
        }
    }
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn csv_parse(path: &Path, e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(path, line, e.to_string())
}

impl<R: EventRecord> EventReader<R> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let (source, len) = match FileFormat::of(&path) {
            FileFormat::Binary => {
                let file_len = file.metadata().map_err(|e| Error::io(&path, e))?.len();
                let mut reader = BufReader::with_capacity(1 << 20, file);
                let h = read_header(&path, &mut reader)?;
                if h.kind != R::KIND {
                    return Err(format_err(
                        &path,
                        6,
                        format!(
                            "file holds {} records, expected {}",
                            h.kind.as_str(),
                            R::KIND.as_str()
                        ),
                    ));
                }
                let expected = HEADER_LEN + h.count * R::SIZE as u64;
                if file_len < expected {
                    let whole = (file_len - HEADER_LEN) / R::SIZE as u64;
                    return Err(format_err(
                        &path,
                        HEADER_LEN + whole * R::SIZE as u64,
                        format!(
                            "truncated: header declares {} records, file holds {whole}",
                            h.count
                        ),
                    ));
                }
                if file_len > expected {
                    return Err(format_err(
                        &path,
                        expected,
                        "trailing bytes after last record",
                    ));
                }
                (
                    Source::Binary {
                        reader,
                        remaining: h.count,
                        offset: HEADER_LEN,
                    },
                    Some(h.count),
                )
            }
            FileFormat::Csv => {
                let mut r = csv::Reader::from_reader(file);
                let h = r.headers().map_err(|e| csv_parse(&path, &e))?;
                if h.iter().ne(R::CSV_HEADER.iter().copied()) {
                    return Err(parse_err(
                        &path,
                        1,
                        format!("expected header {}", R::CSV_HEADER.join(",")),
                    ));
                }
                (Source::Csv(r.into_records()), None)
            }
        };
        Ok(Self {
            path,
            source,
            index: 0,
            last: 0,
            buf: vec![0; R::SIZE],
            failed: false,
            len,
            _kind: PhantomData,
        })
    }

    /// Declared record count (binary files only).
    pub fn declared_len(&self) -> Option<u64> {
        self.len
    }

    fn next_record(&mut self) -> Option<Result<R>> {
        let (rec, at) = match &mut self.source {
            Source::Binary {
                reader,
                remaining,
                offset,
            } => {
                if *remaining == 0 {
                    return None;
                }
                let at = *offset;
                if let Err(e) = reader.read_exact(&mut self.buf) {
                    return Some(Err(format_err(&self.path, at, format!("read failed: {e}"))));
                }
                *remaining -= 1;
                *offset += R::SIZE as u64;
                match R::decode(&self.buf) {
                    Ok(r) => (r, Err(at)),
                    Err(reason) => return Some(Err(format_err(&self.path, at, reason))),
                }
            }
            Source::Csv(records) => {
                let rec = match records.next()? {
                    Ok(r) => r,
                    Err(e) => return Some(Err(csv_parse(&self.path, &e))),
                };
                let line = rec.position().map_or(0, |p| p.line() as usize);
                match R::from_csv(&rec) {
                    Ok(r) => (r, Ok(line)),
                    Err(reason) => return Some(Err(parse_err(&self.path, line, reason))),
                }
            }
        };
        let t = rec.toa_ticks();
        if t < self.last {
            let reason = format!("record {} is earlier than its predecessor", self.index);
            return Some(Err(match at {
                Err(offset) => format_err(&self.path, offset, reason),
                Ok(line) => parse_err(&self.path, line, reason),
            }));
        }
        self.last = t;
        self.index += 1;
        Some(Ok(rec))
    }
}

impl<R: EventRecord> Iterator for EventReader<R> {
    type Item = Result<R>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let r = self.next_record();
        if matches!(r, Some(Err(_))) {
            self.failed = true;
        }
        r
    }
}

pub fn read_events<R: EventRecord>(path: impl AsRef<Path>) -> Result<Vec<R>> {
    let reader = EventReader::<R>::open(path)?;
    let mut out = Vec::with_capacity(reader.declared_len().unwrap_or(0).min(1 << 28) as usize);
    for r in reader {
        out.push(r?);
    }
    Ok(out)
}
