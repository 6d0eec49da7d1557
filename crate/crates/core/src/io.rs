//! CSV interchange.
//!
//! Every file starts with `# key = value` metadata lines (seed, experiment,
//! fringe period, ...) followed by a header row and data. Floats are written
//! in shortest round-trip form, so reading a file back gives bit-identical
//! values.

use std::path::Path;

use crate::analysis::FringeFit;
use crate::coincidence::CountTable;
use crate::event_timeline::{Detector, PhotonEvent};
use crate::experiment::{BeamBlockResult, ChshAngles, ChshResult, ScanRow};
use crate::{Error, Result};

pub const SCAN_HEADER: &str =
    "actuator_um,delta_phi_rad,n_AB,n_ApB,n_ABp,n_ApBp,singles_A,singles_Ap,singles_B,singles_Bp,dwell_s";
pub const EVENT_HEADER: &str = "detector,time_ps";
pub const CHSH_HEADER: &str = "setting,a_deg,b_deg,n_AB,n_ApB,n_ABp,n_ApBp,E,sigma_E";
pub const BEAM_BLOCK_HEADER: &str = "n_HH_blocked,n_HH_unblocked,ratio,ratio_sigma";
pub const FIT_HEADER: &str =
    "label,offset,amplitude,phase,period,visibility,visibility_sigma,phase_sigma,residual_rms";

pub type Metadata = Vec<(String, String)>;

fn write_metadata(out: &mut String, metadata: &[(String, String)]) {
    for (k, v) in metadata {
        out.push_str(&format!("# {k} = {v}\n"));
    }
}

fn table_fields(t: &CountTable) -> String {
    format!("{},{},{},{}", t.n_ab, t.n_apb, t.n_abp, t.n_apbp)
}

pub fn scan_csv(metadata: &[(String, String)], rows: &[ScanRow]) -> String {
    let mut out = String::new();
    write_metadata(&mut out, metadata);
    out.push_str(SCAN_HEADER);
    out.push('\n');
    for r in rows {
        let s = r.counts.singles;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.actuator_um,
            r.delta_phi_rad,
            table_fields(&r.counts),
            s[0],
            s[1],
            s[2],
            s[3],
            r.counts.interval_s
        ));
    }
    out
}

/// Splits leading `#` metadata from the CSV body.
fn split_metadata(text: &str) -> Result<(Metadata, &str)> {
    let mut metadata = Vec::new();
    let mut rest = text;
    while rest.starts_with('#') {
        let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        let body = line.trim_start_matches('#').trim();
        if let Some((k, v)) = body.split_once('=') {
            metadata.push((k.trim().to_string(), v.trim().to_string()));
        } else if !body.is_empty() {
            return Err(Error::Parse {
                line: metadata.len() + 1,
                column: 1,
                message: format!("metadata line without `=`: {line}"),
            });
        }
        rest = tail;
    }
    Ok((metadata, rest))
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = record.get(i).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse {
        line,
        column: i + 1,
        message: format!("cannot parse `{raw}`"),
    })
}

fn body_reader<'a>(body: &'a str, header: &str, line_offset: usize) -> Result<csv::Reader<&'a [u8]>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let found = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if found != header {
        return Err(Error::Parse {
            line: line_offset + 1,
            column: 1,
            message: format!("expected header `{header}`, found `{found}`"),
        });
    }
    Ok(reader)
}

pub fn parse_scan_csv(text: &str) -> Result<(Metadata, Vec<ScanRow>)> {
    let (metadata, body) = split_metadata(text)?;
    let offset = metadata.len();
    let mut reader = body_reader(body, SCAN_HEADER, offset)?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = offset + k + 2;
        if record.len() != 11 {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("expected 11 fields, found {}", record.len()),
            });
        }
        rows.push(ScanRow {
            actuator_um: field(&record, 0, line)?,
            delta_phi_rad: field(&record, 1, line)?,
            counts: CountTable {
                n_ab: field(&record, 2, line)?,
                n_apb: field(&record, 3, line)?,
                n_abp: field(&record, 4, line)?,
                n_apbp: field(&record, 5, line)?,
                singles: [
                    field(&record, 6, line)?,
                    field(&record, 7, line)?,
                    field(&record, 8, line)?,
                    field(&record, 9, line)?,
                ],
                interval_s: field(&record, 10, line)?,
            },
        });
    }
    Ok((metadata, rows))
}

pub fn read_scan_csv(path: &Path) -> Result<(Metadata, Vec<ScanRow>)> {
    parse_scan_csv(&std::fs::read_to_string(path)?)
}

/// Looks up a metadata value.
pub fn metadata_value<'a>(metadata: &'a [(String, String)], key: &str) -> Option<&'a str> {
    metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

/// Raw detector events, merged in time order.
pub fn events_csv(metadata: &[(String, String)], events: &[PhotonEvent]) -> String {
    let mut out = String::new();
    write_metadata(&mut out, metadata);
    out.push_str(EVENT_HEADER);
    out.push('\n');
    for e in events {
        out.push_str(&format!("{},{}\n", e.detector.label(), e.time_ps));
    }
    out
}

pub fn parse_events_csv(text: &str) -> Result<(Metadata, Vec<PhotonEvent>)> {
    let (metadata, body) = split_metadata(text)?;
    let offset = metadata.len();
    let mut reader = body_reader(body, EVENT_HEADER, offset)?;
    let mut events = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = offset + k + 2;
        let label = record.get(0).unwrap_or("");
        let detector = Detector::from_label(label).ok_or_else(|| Error::Parse {
            line,
            column: 1,
            message: format!("unknown detector `{label}`"),
        })?;
        events.push(PhotonEvent {
            detector,
            time_ps: field(&record, 1, line)?,
        });
    }
    Ok((metadata, events))
}

pub fn chsh_csv(metadata: &[(String, String)], angles: &ChshAngles, result: &ChshResult) -> String {
    let mut out = String::new();
    write_metadata(&mut out, metadata);
    out.push_str(&format!("# S = {}\n# sigma_S = {}\n", result.s, result.sigma_s));
    out.push_str(CHSH_HEADER);
    out.push('\n');
    let names = ["a_b", "a_bp", "ap_b", "ap_bp"];
    for (k, (a, b)) in angles.settings().iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            names[k],
            a,
            b,
            table_fields(&result.tables[k]),
            result.correlations[k],
            result.correlation_sigmas[k]
        ));
    }
    out
}

pub fn beam_block_csv(metadata: &[(String, String)], result: &BeamBlockResult) -> Result<String> {
    let mut out = String::new();
    write_metadata(&mut out, metadata);
    out.push_str(BEAM_BLOCK_HEADER);
    out.push('\n');
    out.push_str(&format!(
        "{},{},{},{}\n",
        result.n_hh_blocked,
        result.n_hh_unblocked,
        result.ratio()?,
        result.ratio_sigma()?
    ));
    Ok(out)
}

pub fn fit_csv(metadata: &[(String, String)], fits: &[(String, FringeFit)]) -> String {
    let mut out = String::new();
    write_metadata(&mut out, metadata);
    out.push_str(FIT_HEADER);
    out.push('\n');
    for (label, f) in fits {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            label,
            f.offset,
            f.amplitude,
            f.phase,
            f.period,
            f.visibility,
            f.visibility_sigma,
            f.phase_sigma,
            f.residual_rms
        ));
    }
    out
}
