//! Curvature rasters on disk.
//!
//! 2-D fields are PFM grayscale images (`Pf`, little-endian, rows bottom to
//! top); 3-D fields are raw little-endian `f32` volumes, x fastest. Both get
//! a JSON sidecar at `<path>.json` with the dimensions, grid bounds and
//! run-length encoded statuses. Values are stored as `f32`, NaN where the
//! status is not `Ok`.

use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tcf_core::{CurvatureField, GridSpec, Status};

use crate::error::{CliError, Result};

/// A curvature field of either dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyCurvature {
    D2(CurvatureField<2>),
    D3(CurvatureField<3>),
}

impl AnyCurvature {
    pub fn dim(&self) -> usize {
        match self {
            AnyCurvature::D2(_) => 2,
            AnyCurvature::D3(_) => 3,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            AnyCurvature::D2(f) => &f.values,
            AnyCurvature::D3(f) => &f.values,
        }
    }

    pub fn status(&self) -> &[Status] {
        match self {
            AnyCurvature::D2(f) => &f.status,
            AnyCurvature::D3(f) => &f.status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: Vec<usize>,
    /// `[lower, upper]` per axis.
    pub bounds: Vec<[f64; 2]>,
    pub dtype: String,
    pub order: String,
    /// `[status code, run length]` pairs in flat index order.
    pub statuses: Vec<[u64; 2]>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode_statuses(status: &[Status]) -> Vec<[u64; 2]> {
    let mut runs: Vec<[u64; 2]> = Vec::new();
    for s in status {
        match runs.last_mut() {
            Some(run) if run[0] == u64::from(s.code()) => run[1] += 1,
            _ => runs.push([u64::from(s.code()), 1]),
        }
    }
    runs
}

pub fn decode_statuses(runs: &[[u64; 2]], len: usize) -> std::result::Result<Vec<Status>, String> {
    let mut out = Vec::with_capacity(len);
    for &[code, count] in runs {
        let s = u8::try_from(code)
            .ok()
            .and_then(Status::from_code)
            .ok_or_else(|| format!("unknown status code {code}"))?;
        if out.len() as u64 + count > len as u64 {
            return Err(format!("status runs cover more than {len} points"));
        }
        out.extend(std::iter::repeat_n(s, count as usize));
    }
    if out.len() != len {
        return Err(format!("status runs cover {} of {len} points", out.len()));
    }
    Ok(out)
}

fn sidecar_of<const N: usize>(field: &CurvatureField<N>, order: &str) -> Sidecar {
    Sidecar {
        dims: field.grid.counts.to_vec(),
        bounds: (0..N).map(|a| [field.grid.lower[a], field.grid.upper[a]]).collect(),
        dtype: "float32".into(),
        order: order.into(),
        statuses: encode_statuses(&field.status),
    }
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<()> {
    let side = sidecar_path(path);
    let text = serde_json::to_string(sidecar).map_err(|e| CliError::io(&side, e))?;
    std::fs::write(&side, text + "\n").map_err(|e| CliError::io(&side, e))
}

fn read_sidecar(path: &Path) -> Result<Option<Sidecar>> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&side).map_err(|e| CliError::io(&side, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| CliError::io(&side, format!("bad sidecar: {e}")))
}

fn stored(v: f64, s: Status) -> f32 {
    if s.is_ok() {
        v as f32
    } else {
        f32::NAN
    }
}

/// PFM bytes of a 2-D field.
pub fn pfm_bytes(field: &CurvatureField<2>) -> Vec<u8> {
    let [w, h] = field.grid.counts;
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for row in (0..h).rev() {
        for col in 0..w {
            let i = row * w + col;
            out.extend_from_slice(&stored(field.values[i], field.status[i]).to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(field: &CurvatureField<2>, path: &Path) -> Result<()> {
    std::fs::write(path, pfm_bytes(field)).map_err(|e| CliError::io(path, e))?;
    write_sidecar(path, &sidecar_of(field, "pfm"))
}

fn header_line(reader: &mut impl BufRead, path: &Path, what: &str) -> Result<String> {
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| CliError::io(path, e))?;
    if line.is_empty() {
        return Err(CliError::io(path, format!("missing {what} line")));
    }
    Ok(line.trim().to_string())
}

fn grid_from<const N: usize>(path: &Path, dims: [usize; N], sidecar: Option<&Sidecar>) -> Result<GridSpec<N>> {
    let (lower, upper) = match sidecar {
        Some(s) => {
            if s.dims != dims || s.bounds.len() != N {
                return Err(CliError::io(path, "sidecar dimensions disagree with the data"));
            }
            (
                std::array::from_fn(|a| s.bounds[a][0]),
                std::array::from_fn(|a| s.bounds[a][1]),
            )
        }
        None => ([0.0; N], std::array::from_fn(|a| (dims[a] - 1) as f64)),
    };
    GridSpec::new(dims, lower, upper).map_err(|e| CliError::io(path, e))
}

fn statuses_from(path: &Path, values: &[f64], sidecar: Option<&Sidecar>) -> Result<Vec<Status>> {
    match sidecar {
        Some(s) => {
            let status = decode_statuses(&s.statuses, values.len()).map_err(|e| CliError::io(sidecar_path(path), e))?;
            if status.iter().zip(values).any(|(s, v)| s.is_ok() == v.is_nan()) {
                return Err(CliError::io(path, "statuses disagree with NaN entries"));
            }
            Ok(status)
        }
        None => Ok(values
            .iter()
            .map(|v| if v.is_nan() { Status::MaskedLowIntensity } else { Status::Ok })
            .collect()),
    }
}

fn f32_values(bytes: &[u8], little_endian: bool) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            f64::from(if little_endian { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) })
        })
        .collect()
}

/// Reads a grayscale PFM and, when present, its sidecar.
pub fn read_pfm(path: &Path) -> Result<CurvatureField<2>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let magic = header_line(&mut reader, path, "magic")?;
    if magic != "Pf" {
        return Err(CliError::io(path, format!("expected grayscale 'Pf' header, found '{magic}'")));
    }
    let dims_line = header_line(&mut reader, path, "dimension")?;
    let dims: Vec<usize> = dims_line
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::io(path, format!("bad dimensions '{dims_line}'")))?;
    let [w, h] = dims[..] else {
        return Err(CliError::io(path, format!("bad dimensions '{dims_line}'")));
    };
    if w < 2 || h < 2 {
        return Err(CliError::io(path, format!("{w}x{h} image is smaller than 2x2")));
    }
    let scale_line = header_line(&mut reader, path, "scale")?;
    let scale: f64 = scale_line
        .parse()
        .map_err(|_| CliError::io(path, format!("bad scale '{scale_line}'")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(CliError::io(path, format!("bad scale '{scale_line}'")));
    }
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload).map_err(|e| CliError::io(path, e))?;
    if payload.len() != 4 * w * h {
        return Err(CliError::io(
            path,
            format!("{} payload bytes for a {w}x{h} image", payload.len()),
        ));
    }
    let file_rows = f32_values(&payload, scale < 0.0);
    let mut values = vec![0.0; w * h];
    for (k, row) in file_rows.chunks_exact(w.max(1)).enumerate() {
        let r = h - 1 - k;
        values[r * w..(r + 1) * w].copy_from_slice(row);
    }
    let sidecar = read_sidecar(path)?;
    let grid = grid_from(path, [w, h], sidecar.as_ref())?;
    let status = statuses_from(path, &values, sidecar.as_ref())?;
    Ok(CurvatureField {
        grid,
        values,
        accel: None,
        status,
    })
}

pub fn write_raw(field: &CurvatureField<3>, path: &Path) -> Result<()> {
    let bytes: Vec<u8> = field
        .values
        .iter()
        .zip(&field.status)
        .flat_map(|(v, s)| stored(*v, *s).to_le_bytes())
        .collect();
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
    write_sidecar(path, &sidecar_of(field, "x-fastest"))
}

/// Reads a raw 3-D field; the sidecar is required.
pub fn read_raw(path: &Path) -> Result<CurvatureField<3>> {
    let sidecar = read_sidecar(path)?.ok_or_else(|| CliError::io(sidecar_path(path), "missing sidecar"))?;
    let dims: [usize; 3] = sidecar
        .dims
        .as_slice()
        .try_into()
        .map_err(|_| CliError::io(sidecar_path(path), "raw curvature needs three dimensions"))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    if bytes.len() != 4 * dims.iter().product::<usize>() {
        return Err(CliError::io(path, format!("{} bytes for dims {dims:?}", bytes.len())));
    }
    let values = f32_values(&bytes, true);
    let grid = grid_from(path, dims, Some(&sidecar))?;
    let status = statuses_from(path, &values, Some(&sidecar))?;
    Ok(CurvatureField {
        grid,
        values,
        accel: None,
        status,
    })
}

pub fn write_curvature(field: &AnyCurvature, path: &Path) -> Result<()> {
    match field {
        AnyCurvature::D2(f) => write_pfm(f, path),
        AnyCurvature::D3(f) => write_raw(f, path),
    }
}

/// Reads a `.pfm` as 2-D and anything else as a raw 3-D field.
pub fn read_curvature(path: &Path) -> Result<AnyCurvature> {
    let is_pfm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pfm"));
    if is_pfm {
        read_pfm(path).map(AnyCurvature::D2)
    } else {
        read_raw(path).map(AnyCurvature::D3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field2(w: usize, h: usize) -> CurvatureField<2> {
        let grid = GridSpec::new([w, h], [-1.0, 0.5], [2.0, 3.25]).unwrap();
        let n = w * h;
        let status: Vec<Status> = (0..n)
            .map(|i| match i % 7 {
                3 => Status::MaskedLowIntensity,
                5 => Status::Degenerate,
                _ => Status::Ok,
            })
            .collect();
        let values = (0..n)
            .map(|i| if status[i].is_ok() { f64::from(0.37f32 * i as f32) } else { f64::NAN })
            .collect();
        CurvatureField {
            grid,
            values,
            accel: None,
            status,
        }
    }

    #[test]
    fn pfm_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pfm");
        let f = field2(4, 4);
        write_pfm(&f, &path).unwrap();
        let back = read_pfm(&path).unwrap();
        assert_eq!(back.grid, f.grid);
        assert_eq!(back.status, f.status);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.values), bits(&f.values));
        let path2 = dir.path().join("d.pfm");
        write_pfm(&back, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn pfm_header_and_row_order() {
        let f = field2(64, 64);
        let bytes = pfm_bytes(&f);
        assert!(bytes.starts_with(b"Pf\n64 64\n-1.0\n"));
        let f = field2(3, 2);
        let bytes = pfm_bytes(&f);
        let body = &bytes[b"Pf\n3 2\n-1.0\n".len()..];
        // First stored row is the top grid row (y index 1).
        let second = f32::from_le_bytes(body[4..8].try_into().unwrap());
        assert_eq!(f64::from(second), f.values[4]);
        assert!(f32::from_le_bytes(body[0..4].try_into().unwrap()).is_nan());
    }

    #[test]
    fn masked_points_are_nan() {
        let f = field2(4, 4);
        let bytes = pfm_bytes(&f);
        let body = &bytes[b"Pf\n4 4\n-1.0\n".len()..];
        // Flat index 3 (row 0) is masked; row 0 is stored last.
        let at = (3 * 4 + 3) * 4;
        assert!(f32::from_le_bytes(body[at..at + 4].try_into().unwrap()).is_nan());
    }

    #[test]
    fn pfm_without_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plain.pfm");
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        for v in [1.5, f32::NAN, 0.5, 0.25] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        let f = read_pfm(&path).unwrap();
        assert_eq!(f.values[..2], [0.5, 0.25]);
        assert_eq!(f.values[2], 1.5);
        assert_eq!(f.status[3], Status::MaskedLowIntensity);
        assert_eq!(f.grid.upper, [1.0, 1.0]);
    }

    #[test]
    fn big_endian_pfm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("be.pfm");
        let mut bytes = b"Pf\n2 2\n1.0\n".to_vec();
        for v in [2.0f32, 2.5, 3.0, 3.5] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        std::fs::write(&path, bytes).unwrap();
        // Bottom row first.
        assert_eq!(read_pfm(&path).unwrap().values, vec![3.0, 3.5, 2.0, 2.5]);
    }

    #[test]
    fn malformed_pfm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pfm");
        for bytes in [&b"PF\n1 1\n-1.0\n\0\0\0\0"[..], b"Pf\n1\n-1.0\n", b"Pf\n0 0\n-1.0\n", b"Pf\n1 1\n-1.0\n\0\0", b"Pf\n1 1\n"] {
            std::fs::write(&path, bytes).unwrap();
            assert!(matches!(read_pfm(&path), Err(CliError::Io { .. })));
        }
    }

    #[test]
    fn raw_round_trip_keeps_statuses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.raw");
        let grid = GridSpec::new([3, 2, 2], [0.0; 3], [1.0, 2.0, 3.0]).unwrap();
        let status: Vec<Status> = (0..12)
            .map(|i| if i < 4 { Status::MaskedLowIntensity } else { Status::Ok })
            .collect();
        let values = (0..12).map(|i| if i < 4 { f64::NAN } else { f64::from(i as f32 * 0.25) }).collect();
        let f = CurvatureField {
            grid,
            values,
            accel: None,
            status,
        };
        write_raw(&f, &path).unwrap();
        let back = read_raw(&path).unwrap();
        assert_eq!(back.status, f.status);
        assert_eq!(back.grid, f.grid);
        assert!(back.values[..4].iter().all(|v| v.is_nan()));
        assert_eq!(back.values[4..], f.values[4..]);
        let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side.statuses, vec![[2, 4], [0, 8]]);
    }

    #[test]
    fn status_runs() {
        let s = [Status::Ok, Status::Ok, Status::Degenerate, Status::Ok];
        let runs = encode_statuses(&s);
        assert_eq!(runs, vec![[0, 2], [1, 1], [0, 1]]);
        assert_eq!(decode_statuses(&runs, 4).unwrap(), s);
        assert!(decode_statuses(&runs, 5).is_err());
        assert!(decode_statuses(&[[9, 1]], 1).is_err());
    }
}
