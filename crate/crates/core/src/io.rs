//! File formats.
//!
//! * Features: CSV with header `label,clip_id,f1,...,fd`, one frame per row.
//!   An empty `label` field marks an unlabeled frame.
//! * Codes: text, header `# SOMCODES1 m=<bits>`, then one line per frame:
//!   `<clip_id> <label|-> <hex>` where `<hex>` is the code packed LSB-first
//!   into bytes (bit `k` is `+1` when set, in byte `k / 8` at position `k % 8`).
//! * Models: `SOMMODEL1\n`, one line of JSON metadata, then little-endian
//!   binary payload: `W` (`d × m`, row-major `f64`), `m` biases (`f64`), and
//!   the gallery codes, `ceil(m / 8)` bytes per frame in the same packing.

use crate::codes::CodeMatrix;
use crate::error::{Result, SomError};
use crate::features::FeatureMatrix;
use crate::filters::{BitTrainMeta, FilterBank, HyperParams};
use crate::linalg::DenseMatrix;
use crate::structures::StructureFamily;
use crate::trainer::{OuterRecord, TrainedModel};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const CODES_MAGIC: &str = "SOMCODES1";
pub const MODEL_MAGIC: &str = "SOMMODEL1";

fn parse_err(line: usize, msg: impl Into<String>) -> SomError {
    SomError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn write_features<W: Write>(mut out: W, x: &FeatureMatrix) -> Result<()> {
    let mut header = String::from("label,clip_id");
    for k in 1..=x.dim() {
        write!(header, ",f{k}").unwrap();
    }
    writeln!(out, "{header}")?;
    let mut line = String::new();
    for j in 0..x.len() {
        line.clear();
        if let Some(l) = x.labels() {
            write!(line, "{}", l[j]).unwrap();
        }
        write!(line, ",{}", x.clip_ids().map_or(0, |c| c[j])).unwrap();
        for v in x.frame(j) {
            // shortest representation that parses back to the same f64
            write!(line, ",{v:?}").unwrap();
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_features<R: BufRead>(input: R) -> Result<FeatureMatrix> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(parse_err(1, "missing header")),
    };
    let cols: Vec<&str> = header.trim_end().split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "label" || cols[1] != "clip_id" {
        return Err(parse_err(1, "header must start with `label,clip_id,` followed by features"));
    }
    let dim = cols.len() - 2;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut unlabeled = 0usize;
    let mut clip_ids = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let last_good = lineno - 1;
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != dim + 2 {
            return Err(parse_err(
                lineno,
                format!(
                    "expected {} fields, found {} (last good line {last_good})",
                    dim + 2,
                    fields.len()
                ),
            ));
        }
        let label = fields[0].trim();
        if label.is_empty() {
            unlabeled += 1;
        } else {
            labels.push(label.parse::<usize>().map_err(|_| {
                parse_err(lineno, format!("bad label `{label}` (last good line {last_good})"))
            })?);
        }
        clip_ids.push(fields[1].trim().parse::<u64>().map_err(|_| {
            parse_err(
                lineno,
                format!("bad clip id `{}` (last good line {last_good})", fields[1]),
            )
        })?);
        for f in &fields[2..] {
            let v: f64 = f.trim().parse().map_err(|_| {
                parse_err(lineno, format!("bad value `{f}` (last good line {last_good})"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(lineno, "non-finite feature value"));
            }
            data.push(v);
        }
    }
    if unlabeled > 0 && !labels.is_empty() {
        return Err(parse_err(0, "either every row or no row may carry a label"));
    }
    if clip_ids.is_empty() {
        return Err(parse_err(2, "no frames"));
    }
    let mut x = FeatureMatrix::from_frames(dim, data)?.with_clip_ids(clip_ids)?;
    if unlabeled == 0 {
        x = x.with_labels(labels)?;
    }
    Ok(x)
}

pub fn save_features(path: impl AsRef<Path>, x: &FeatureMatrix) -> Result<()> {
    write_features(BufWriter::new(File::create(path)?), x)
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    read_features(BufReader::new(File::open(path)?))
}

/// Frame codes with their clip ids and optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSet {
    pub codes: CodeMatrix,
    pub clip_ids: Vec<u64>,
    pub labels: Option<Vec<usize>>,
}

impl CodeSet {
    pub fn new(codes: CodeMatrix, clip_ids: Vec<u64>, labels: Option<Vec<usize>>) -> Result<Self> {
        let n = codes.cols();
        if clip_ids.len() != n || labels.as_ref().is_some_and(|l| l.len() != n) {
            return Err(SomError::ShapeMismatch(format!(
                "{n} codes need {n} clip ids and labels"
            )));
        }
        Ok(Self {
            codes,
            clip_ids,
            labels,
        })
    }
}

pub fn write_codes<W: Write>(mut out: W, set: &CodeSet) -> Result<()> {
    writeln!(out, "# {CODES_MAGIC} m={}", set.codes.bits())?;
    let mut line = String::new();
    for j in 0..set.codes.cols() {
        line.clear();
        write!(line, "{} ", set.clip_ids[j]).unwrap();
        match &set.labels {
            Some(l) => write!(line, "{} ", l[j]).unwrap(),
            None => line.push_str("- "),
        }
        for b in set.codes.column_bytes(j) {
            write!(line, "{b:02x}").unwrap();
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_codes<R: BufRead>(input: R) -> Result<CodeSet> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(parse_err(1, "missing header")),
    };
    let rest = header
        .strip_prefix("# ")
        .ok_or_else(|| parse_err(1, "header must start with `# SOMCODES1`"))?;
    let mut parts = rest.split_whitespace();
    let magic = parts.next().unwrap_or("");
    if magic != CODES_MAGIC {
        return Err(SomError::VersionMismatch {
            expected: CODES_MAGIC.into(),
            found: magic.into(),
        });
    }
    let bits: usize = parts
        .next()
        .and_then(|p| p.strip_prefix("m="))
        .and_then(|v| v.parse().ok())
        .filter(|&m| m > 0)
        .ok_or_else(|| parse_err(1, "header needs `m=<bits>`"))?;
    let nbytes = bits.div_ceil(8);

    let mut columns: Vec<Vec<u8>> = Vec::new();
    let mut clip_ids = Vec::new();
    let mut labels = Vec::new();
    let mut unlabeled = 0usize;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let last_good = lineno - 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(
                lineno,
                format!("expected `clip label hex` (last good line {last_good})"),
            ));
        }
        clip_ids.push(
            fields[0]
                .parse::<u64>()
                .map_err(|_| parse_err(lineno, format!("bad clip id (last good line {last_good})")))?,
        );
        if fields[1] == "-" {
            unlabeled += 1;
        } else {
            labels.push(
                fields[1]
                    .parse::<usize>()
                    .map_err(|_| parse_err(lineno, format!("bad label (last good line {last_good})")))?,
            );
        }
        let hex = fields[2];
        if hex.len() != 2 * nbytes {
            return Err(parse_err(
                lineno,
                format!(
                    "expected {} hex digits, found {} (last good line {last_good})",
                    2 * nbytes,
                    hex.len()
                ),
            ));
        }
        let bytes = (0..nbytes)
            .map(|b| u8::from_str_radix(&hex[2 * b..2 * b + 2], 16))
            .collect::<std::result::Result<Vec<u8>, _>>()
            .map_err(|_| parse_err(lineno, format!("bad hex (last good line {last_good})")))?;
        columns.push(bytes);
    }
    if unlabeled > 0 && !labels.is_empty() {
        return Err(parse_err(0, "either every line or no line may carry a label"));
    }
    let mut codes = CodeMatrix::new(bits, columns.len());
    for (j, bytes) in columns.iter().enumerate() {
        codes
            .set_column_bytes(j, bytes)
            .map_err(|e| parse_err(j + 2, e.to_string()))?;
    }
    let labels = (unlabeled == 0 && !columns.is_empty()).then_some(labels);
    CodeSet::new(codes, clip_ids, labels)
}

pub fn save_codes(path: impl AsRef<Path>, set: &CodeSet) -> Result<()> {
    write_codes(BufWriter::new(File::create(path)?), set)
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<CodeSet> {
    read_codes(BufReader::new(File::open(path)?))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelHeader {
    dim: usize,
    bits: usize,
    frames: usize,
    family: StructureFamily,
    converged: bool,
    hp: HyperParams,
    labels: Vec<usize>,
    bit_meta: Vec<BitTrainMeta>,
    diagnostics: Vec<OuterRecord>,
}

pub fn write_model<W: Write>(mut out: W, model: &TrainedModel) -> Result<()> {
    let bank = &model.bank;
    let header = ModelHeader {
        dim: bank.dim(),
        bits: bank.bits(),
        frames: model.gallery_codes.cols(),
        family: model.family,
        converged: model.converged,
        hp: model.hp.clone(),
        labels: model.gallery_labels.clone(),
        bit_meta: bank.train_meta.clone(),
        diagnostics: model.diagnostics.clone(),
    };
    let json = serde_json::to_string(&header).map_err(|e| SomError::Io(e.to_string()))?;
    writeln!(out, "{MODEL_MAGIC}")?;
    writeln!(out, "{json}")?;
    for v in bank.weights().data() {
        out.write_all(&v.to_le_bytes())?;
    }
    for v in bank.biases() {
        out.write_all(&v.to_le_bytes())?;
    }
    for j in 0..model.gallery_codes.cols() {
        out.write_all(&model.gallery_codes.column_bytes(j))?;
    }
    out.flush()?;
    Ok(())
}

fn read_line_bytes<R: BufRead>(input: &mut R, line: usize) -> Result<String> {
    let mut buf = Vec::new();
    input.read_until(b'\n', &mut buf)?;
    if buf.last() != Some(&b'\n') {
        return Err(parse_err(line, "truncated model header"));
    }
    buf.pop();
    String::from_utf8(buf).map_err(|_| parse_err(line, "header is not UTF-8"))
}

fn read_f64s<R: Read>(input: &mut R, count: usize, what: &str) -> Result<Vec<f64>> {
    let mut raw = vec![0u8; count * 8];
    input
        .read_exact(&mut raw)
        .map_err(|_| parse_err(3, format!("truncated model payload ({what})")))?;
    let vals: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(vals)
}

pub fn read_model<R: BufRead>(mut input: R) -> Result<TrainedModel> {
    let magic = read_line_bytes(&mut input, 1)?;
    if magic != MODEL_MAGIC {
        return Err(SomError::VersionMismatch {
            expected: MODEL_MAGIC.into(),
            found: magic,
        });
    }
    let json = read_line_bytes(&mut input, 2)?;
    let header: ModelHeader =
        serde_json::from_str(&json).map_err(|e| parse_err(2, e.to_string()))?;
    if header.labels.len() != header.frames {
        return Err(parse_err(2, "label count differs from frame count"));
    }
    let (d, m, n) = (header.dim, header.bits, header.frames);
    let weights = DenseMatrix::new(d, m, read_f64s(&mut input, d * m, "filters")?)?;
    let biases = read_f64s(&mut input, m, "biases")?;
    let mut bank = FilterBank::new(&weights, biases)?;
    bank.train_meta = header.bit_meta;

    let nbytes = m.div_ceil(8);
    let mut codes = CodeMatrix::new(m, n);
    let mut col = vec![0u8; nbytes];
    for j in 0..n {
        input
            .read_exact(&mut col)
            .map_err(|_| parse_err(3, format!("truncated model payload (code {j})")))?;
        codes.set_column_bytes(j, &col)?;
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(parse_err(3, "trailing bytes after model payload"));
    }
    Ok(TrainedModel {
        bank,
        gallery_codes: codes,
        gallery_labels: header.labels,
        hp: header.hp,
        family: header.family,
        converged: header.converged,
        diagnostics: header.diagnostics,
    })
}

pub fn model_to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_model(&mut buf, model)?;
    Ok(buf)
}

pub fn save_model(path: impl AsRef<Path>, model: &TrainedModel) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    read_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_round_trip() {
        let x = FeatureMatrix::from_frames(3, vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0, 1e300, -0.0])
            .unwrap()
            .with_labels(vec![4, 1])
            .unwrap()
            .with_clip_ids(vec![10, 11])
            .unwrap();
        let mut buf = Vec::new();
        write_features(&mut buf, &x).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("label,clip_id,f1,f2,f3\n"));
        let back = read_features(&buf[..]).unwrap();
        assert_eq!(back.labels(), x.labels());
        assert_eq!(back.clip_ids(), x.clip_ids());
        for (a, b) in back.frames_data().iter().zip(x.frames_data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_features_name_last_good_line() {
        let text = "label,clip_id,f1,f2\n0,1,0.5,0.25\n1,1,0.5";
        match read_features(text.as_bytes()).unwrap_err() {
            SomError::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("last good line 2"), "{msg}");
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            read_features("f1,f2\n".as_bytes()),
            Err(SomError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn codes_format_is_lsb_first_hex() {
        let mut col = vec![-1i8; 12];
        col[0] = 1;
        col[11] = 1;
        let codes = CodeMatrix::from_columns(&[col]).unwrap();
        let set = CodeSet::new(codes, vec![3], Some(vec![2])).unwrap();
        let mut buf = Vec::new();
        write_codes(&mut buf, &set).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "# SOMCODES1 m=12\n3 2 0108\n");
        assert_eq!(read_codes(&buf[..]).unwrap(), set);
    }

    #[test]
    fn codes_header_checks() {
        assert!(matches!(
            read_codes("# SOMCODES2 m=4\n".as_bytes()),
            Err(SomError::VersionMismatch { .. })
        ));
        assert!(matches!(
            read_codes("# SOMCODES1 m=4\n0 - 0\n".as_bytes()),
            Err(SomError::Parse { line: 2, .. })
        ));
        let unlabeled = read_codes("# SOMCODES1 m=4\n0 - 0f\n0 - 01\n".as_bytes()).unwrap();
        assert_eq!(unlabeled.labels, None);
        assert_eq!(unlabeled.codes.column(0), vec![1, 1, 1, 1]);
    }

    #[test]
    fn model_magic_checked() {
        assert!(matches!(
            read_model("SOMMODEL0\n{}\n".as_bytes()),
            Err(SomError::VersionMismatch { .. })
        ));
    }
}
