//! ECG records and beat annotation lists, with their CSV formats.
//!
//! Signal files start with `fs=<Hz>`, optionally followed by `gain=<units/mV>`,
//! then one line per sample. A sample line may hold several comma separated
//! channels; one of them is selected at load time.
//!
//! Annotation files are `time_ms,label` CSV with a header row.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::interval::TimePoint;

pub const DEFAULT_GAIN: f64 = 200.0;
pub const DEFAULT_LABEL: &str = "N";

#[derive(Debug, thiserror::Error)]
pub enum SignalError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("the signal file is empty")]
    Empty,
    #[error("missing `fs=<Hz>` header")]
    MissingHeader,
    #[error("sampling rate must be positive, got {0}")]
    BadRate(f64),
    #[error("window [{begin}, {end}) ms is outside the record (0..{duration} ms)")]
    OutOfRange { begin: i64, end: i64, duration: i64 },
    #[error("negative annotation time {0} ms")]
    NegativeTime(i64),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SignalError + '_ {
    move |source| SignalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A single-channel sampled ECG.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRecord {
    sampling_rate: f64,
    samples: Vec<i32>,
    gain: f64,
}

impl SignalRecord {
    pub fn new(sampling_rate: f64, samples: Vec<i32>) -> Result<Self, SignalError> {
        if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
            return Err(SignalError::BadRate(sampling_rate));
        }
        Ok(SignalRecord {
            sampling_rate,
            samples,
            gain: DEFAULT_GAIN,
        })
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn samples(&self) -> &[i32] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ms(&self) -> i64 {
        (self.samples.len() as f64 * 1000.0 / self.sampling_rate).round() as i64
    }

    /// Nearest sample index for a time, not clamped.
    pub fn index_of(&self, t: TimePoint) -> i64 {
        (t.ms() as f64 * self.sampling_rate / 1000.0).round() as i64
    }

    pub fn time_of(&self, index: usize) -> TimePoint {
        TimePoint((index as f64 * 1000.0 / self.sampling_rate).round() as i64)
    }

    /// Samples in the half-open window `[begin, end)`.
    pub fn slice(&self, begin: TimePoint, end: TimePoint) -> Result<&[i32], SignalError> {
        let duration = self.duration_ms();
        if begin.ms() < 0 || begin > end || end.ms() > duration {
            return Err(SignalError::OutOfRange {
                begin: begin.ms(),
                end: end.ms(),
                duration,
            });
        }
        let lo = (self.index_of(begin) as usize).min(self.samples.len());
        let hi = (self.index_of(end) as usize).min(self.samples.len());
        Ok(&self.samples[lo..hi])
    }

    pub fn read_csv(path: &Path, channel: usize) -> Result<Self, SignalError> {
        let file = File::open(path).map_err(io_err(path))?;
        Self::parse_csv(BufReader::new(file), channel)
    }

    pub fn parse_csv(reader: impl BufRead, channel: usize) -> Result<Self, SignalError> {
        let mut rate = None;
        let mut gain = None;
        let mut samples = Vec::new();
        let mut saw_any = false;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| SignalError::Parse {
                line: lineno,
                reason: e.to_string(),
            })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            saw_any = true;
            if let Some(v) = line.strip_prefix("fs=") {
                let fs: f64 = v.trim().parse().map_err(|_| SignalError::Parse {
                    line: lineno,
                    reason: format!("bad sampling rate `{v}`"),
                })?;
                rate = Some(fs);
                continue;
            }
            if let Some(v) = line.strip_prefix("gain=") {
                gain = Some(v.trim().parse::<f64>().map_err(|_| SignalError::Parse {
                    line: lineno,
                    reason: format!("bad gain `{v}`"),
                })?);
                continue;
            }
            if rate.is_none() {
                return Err(SignalError::MissingHeader);
            }
            let field = line.split(',').nth(channel).ok_or_else(|| SignalError::Parse {
                line: lineno,
                reason: format!("no channel {channel}"),
            })?;
            let v: i32 = field.trim().parse().map_err(|_| SignalError::Parse {
                line: lineno,
                reason: format!("non-numeric sample `{}`", field.trim()),
            })?;
            samples.push(v);
        }
        if !saw_any {
            return Err(SignalError::Empty);
        }
        let rate = rate.ok_or(SignalError::MissingHeader)?;
        let rec = SignalRecord::new(rate, samples)?;
        Ok(match gain {
            Some(g) => rec.with_gain(g),
            None => rec,
        })
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "fs={}", self.sampling_rate)?;
        writeln!(out, "gain={}", self.gain)?;
        for s in &self.samples {
            writeln!(out, "{s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Annotation {
    pub time: TimePoint,
    pub label: String,
}

impl Annotation {
    pub fn beat(t: i64) -> Self {
        Annotation {
            time: TimePoint(t),
            label: DEFAULT_LABEL.to_string(),
        }
    }
}

/// Beat annotations in non-decreasing time order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationList {
    entries: Vec<Annotation>,
}

impl AnnotationList {
    /// Sorts the input; logs a warning when it had to.
    pub fn new(mut entries: Vec<Annotation>) -> Self {
        if entries.windows(2).any(|w| w[0].time > w[1].time) {
            log::warn!("annotations were not in time order; sorting");
            entries.sort_by(|a, b| a.time.cmp(&b.time).then_with(|| a.label.cmp(&b.label)));
        }
        AnnotationList { entries }
    }

    pub fn from_times(times: impl IntoIterator<Item = i64>) -> Self {
        Self::new(times.into_iter().map(Annotation::beat).collect())
    }

    pub fn entries(&self) -> &[Annotation] {
        &self.entries
    }

    pub fn times(&self) -> Vec<i64> {
        self.entries.iter().map(|a| a.time.ms()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sorted by (time, label) with exact duplicates removed.
    pub fn canonical(&self) -> AnnotationList {
        let mut entries = self.entries.clone();
        entries.sort();
        entries.dedup();
        AnnotationList { entries }
    }

    pub fn read(path: &Path) -> Result<Self, SignalError> {
        let file = File::open(path).map_err(io_err(path))?;
        Self::parse(file)
    }

    pub fn parse(reader: impl Read) -> Result<Self, SignalError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut entries = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let t = rec.get(0).unwrap_or("");
            let t: i64 = t.parse().map_err(|_| SignalError::Parse {
                line,
                reason: format!("bad time `{t}`"),
            })?;
            if t < 0 {
                return Err(SignalError::NegativeTime(t));
            }
            let label = match rec.get(1) {
                Some(l) if !l.is_empty() => l.to_string(),
                _ => DEFAULT_LABEL.to_string(),
            };
            entries.push(Annotation {
                time: TimePoint(t),
                label,
            });
        }
        Ok(Self::new(entries))
    }

    /// Writes the canonical form.
    pub fn write(&self, path: &Path) -> Result<(), SignalError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w).map_err(io_err(path))?;
        w.flush().map_err(io_err(path))
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_ms", "label"])?;
        for a in &self.canonical().entries {
            w.write_record([a.time.ms().to_string(), a.label.clone()])?;
        }
        w.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_rows() {
        let text = format!("fs=250\n{}", "0\n".repeat(250));
        let rec = SignalRecord::parse_csv(text.as_bytes(), 0).unwrap();
        assert_eq!(rec.duration_ms(), 1000);
        assert_eq!(rec.gain(), DEFAULT_GAIN);
    }

    #[test]
    fn bad_row_reports_its_line() {
        let text = "fs=250\ngain=100\n1\n2\n3\n4\nabc\n";
        match SignalRecord::parse_csv(text.as_bytes(), 0) {
            Err(SignalError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            SignalRecord::parse_csv("".as_bytes(), 0),
            Err(SignalError::Empty)
        ));
        assert!(matches!(
            SignalRecord::parse_csv("1\n2\n".as_bytes(), 0),
            Err(SignalError::MissingHeader)
        ));
    }

    #[test]
    fn channel_selection() {
        let rec = SignalRecord::parse_csv("fs=360\n1,10\n2,20\n".as_bytes(), 1).unwrap();
        assert_eq!(rec.samples(), &[10, 20]);
    }

    #[test]
    fn mit_bih_geometry() {
        let rec = SignalRecord::new(360.0, vec![0; 650_000]).unwrap();
        assert_eq!(rec.duration_ms(), 1_805_556);
    }

    #[test]
    fn slicing() {
        let rec = SignalRecord::new(250.0, vec![0; 2500]).unwrap();
        assert_eq!(rec.slice(TimePoint(0), TimePoint(1000)).unwrap().len(), 250);
        assert!(rec.slice(TimePoint(300), TimePoint(300)).unwrap().is_empty());
        assert!(rec.slice(TimePoint(0), TimePoint(20_000)).is_err());
        let rec = SignalRecord::new(360.0, vec![0; 3600]).unwrap();
        assert_eq!(rec.slice(TimePoint(0), TimePoint(1000)).unwrap().len(), 360);
    }

    #[test]
    fn annotations_parse_sort_and_dedup() {
        let list = AnnotationList::parse("time_ms,label\n0,N\n800,N\n".as_bytes()).unwrap();
        assert_eq!(list.times(), vec![0, 800]);

        let unsorted = AnnotationList::parse("time_ms,label\n800,N\n0,N\n".as_bytes()).unwrap();
        assert_eq!(unsorted.times(), vec![0, 800]);

        assert!(matches!(
            AnnotationList::parse("time_ms,label\n-5,N\n".as_bytes()),
            Err(SignalError::NegativeTime(-5))
        ));

        let dup = AnnotationList::from_times([800, 800]);
        let mut out = Vec::new();
        dup.write_to(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "time_ms,label\n800,N\n");
    }

    proptest! {
        #[test]
        fn time_index_round_trip(fs in 100.0f64..1000.0, t in 0i64..3_600_000) {
            let rec = SignalRecord::new(fs, vec![]).unwrap();
            let back = rec.time_of(rec.index_of(TimePoint(t)) as usize);
            prop_assert!(((back.ms() - t) as f64).abs() < 1000.0 / fs + 1.0);
        }

        #[test]
        fn annotation_io_is_bijective_on_canonical_lists(
            raw in proptest::collection::vec((0i64..100_000, "[A-Z]{1,2}"), 0..40)
        ) {
            let list = AnnotationList::new(raw.into_iter()
                .map(|(t, l)| Annotation { time: TimePoint(t), label: l })
                .collect()).canonical();
            let mut bytes = Vec::new();
            list.write_to(&mut bytes).unwrap();
            let back = AnnotationList::parse(bytes.as_slice()).unwrap();
            prop_assert_eq!(&back, &list);
            let mut again = Vec::new();
            back.write_to(&mut again).unwrap();
            prop_assert_eq!(bytes, again);
        }
    }
}
