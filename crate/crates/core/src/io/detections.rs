//! Detection tables (`frame,x,y,w,h,s_det,s_cls,s_loc`) and the binary
//! embedding sidecar.
//!
//! Sidecar layout, all little-endian: magic `LGEB`, `u32` version (1),
//! `u32` dimension `D`, then one record of `D` `f32` values per CSV row in
//! file order. The sidecar lives next to the CSV as `<stem>.emb`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::detection::{group_by_frame, ConfidenceTriple, Detection, FrameDetections};
use crate::embedding::Embedding;
use crate::error::{Error, Result};
use crate::geometry::BBox;

pub const DETECTION_HEADER: [&str; 8] = ["frame", "x", "y", "w", "h", "s_det", "s_cls", "s_loc"];
pub const SIDECAR_MAGIC: &[u8; 4] = b"LGEB";
pub const SIDECAR_VERSION: u32 = 1;

/// Decimal places written for box coordinates.
pub const BOX_DECIMALS: usize = 4;
/// Decimal places written for confidences.
pub const CONF_DECIMALS: usize = 6;

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("emb")
}

/// Rounds `v` to `decimals` places the same way the writers format it.
pub fn quantize(v: f64, decimals: usize) -> f64 {
    let s = format!("{v:.decimals$}");
    s.parse().expect("formatted float parses")
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn sidecar_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Sidecar {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Reads a detection table and, when present, its embedding sidecar.
pub fn read_detections(path: &Path) -> Result<Vec<FrameDetections>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;

    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h.map_err(|e| csv_err(path, e))?,
        None => return Err(parse_err(path, 1, "missing header")),
    };
    if header.iter().ne(DETECTION_HEADER.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            format!("expected header {:?}", DETECTION_HEADER.join(",")),
        ));
    }

    let mut dets = Vec::new();
    let mut last_frame = 0u32;
    for record in rows {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != DETECTION_HEADER.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", DETECTION_HEADER.len(), record.len()),
            ));
        }
        let frame: u32 = record[0]
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad frame {:?}", &record[0])))?;
        if frame == 0 {
            return Err(parse_err(path, line, "frame numbers start at 1"));
        }
        if frame < last_frame {
            return Err(parse_err(
                path,
                line,
                format!("frame {frame} after frame {last_frame}: rows must be sorted by frame"),
            ));
        }
        last_frame = frame;
        let mut v = [0.0f64; 7];
        for (k, slot) in v.iter_mut().enumerate() {
            let field = &record[k + 1];
            *slot = field.parse().map_err(|_| {
                parse_err(path, line, format!("bad {} value {field:?}", DETECTION_HEADER[k + 1]))
            })?;
        }
        let bbox = BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| parse_err(path, line, e.to_string()))?;
        let conf = ConfidenceTriple::new(v[4], v[5], v[6]).map_err(|e| parse_err(path, line, e.to_string()))?;
        dets.push(Detection {
            frame,
            bbox,
            conf,
            embedding: None,
        });
    }

    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let embeddings = read_sidecar(&sidecar)?;
        if embeddings.len() != dets.len() {
            return Err(sidecar_err(
                &sidecar,
                format!("{} records for {} detection rows", embeddings.len(), dets.len()),
            ));
        }
        for (d, e) in dets.iter_mut().zip(embeddings) {
            d.embedding = Some(e);
        }
    }
    Ok(group_by_frame(dets))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(path, line, format!("{other:?}")),
    }
}

/// Reads every record of an `LGEB` sidecar, normalizing each to unit length.
pub fn read_sidecar(path: &Path) -> Result<Vec<Embedding>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() < 12 {
        return Err(sidecar_err(path, "truncated header"));
    }
    if &bytes[0..4] != SIDECAR_MAGIC {
        return Err(sidecar_err(path, "bad magic (expected LGEB)"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != SIDECAR_VERSION {
        return Err(sidecar_err(path, format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dim == 0 {
        return Err(sidecar_err(path, "dimension 0"));
    }
    let body = &bytes[12..];
    let record_len = dim * 4;
    if body.len() % record_len != 0 {
        return Err(sidecar_err(
            path,
            format!("{} payload bytes is not a whole number of {dim}-float records", body.len()),
        ));
    }
    body.chunks_exact(record_len)
        .enumerate()
        .map(|(k, rec)| {
            let values: Vec<f64> = rec
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
                .collect();
            Embedding::from_unit_or_normalize(values)
                .map_err(|e| sidecar_err(path, format!("record {k}: {e}")))
        })
        .collect()
}

pub fn write_sidecar(path: &Path, embeddings: &[&Embedding]) -> Result<()> {
    let dim = embeddings.first().map_or(0, |e| e.dim());
    if dim == 0 {
        return Err(sidecar_err(path, "no embeddings to write"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SIDECAR_MAGIC)?;
    w.write_all(&SIDECAR_VERSION.to_le_bytes())?;
    w.write_all(&(dim as u32).to_le_bytes())?;
    for e in embeddings {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.dim(),
            });
        }
        for &v in e.as_slice() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a detection table and, if every detection has an embedding, its
/// sidecar. Mixed presence is rejected since the sidecar is positional.
pub fn write_detections(path: &Path, stream: &[FrameDetections]) -> Result<()> {
    let all: Vec<&Detection> = stream.iter().flat_map(|f| f.detections.iter()).collect();
    let with_emb = all.iter().filter(|d| d.embedding.is_some()).count();
    if with_emb != 0 && with_emb != all.len() {
        return Err(Error::InvalidConfig(
            "either all detections or none must carry an embedding".into(),
        ));
    }

    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", DETECTION_HEADER.join(","))?;
    for d in &all {
        let b = d.bbox;
        let c = d.conf;
        writeln!(
            w,
            "{},{:.bd$},{:.bd$},{:.bd$},{:.bd$},{:.cd$},{:.cd$},{:.cd$}",
            d.frame,
            b.x,
            b.y,
            b.w,
            b.h,
            c.s_det,
            c.s_cls,
            c.s_loc,
            bd = BOX_DECIMALS,
            cd = CONF_DECIMALS
        )?;
    }
    w.flush()?;

    let sidecar = sidecar_path(path);
    if with_emb > 0 {
        let embs: Vec<&Embedding> = all.iter().filter_map(|d| d.embedding.as_ref()).collect();
        write_sidecar(&sidecar, &embs)?;
    } else if sidecar.exists() {
        std::fs::remove_file(&sidecar)?;
    }
    Ok(())
}
