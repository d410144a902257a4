//! The imu/gnss/truth CSV formats and the filter output tables.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::filter::{EpochRecord, GnssFix};
use crate::kinematics::ImuSample;
use crate::liegroup::{FrameTag, GroupElement, Mat3, Rotation, Vec3};
use crate::sim::TruthPoint;

use super::CliError;

pub const IMU_HEADER: [&str; 7] = ["t", "gx", "gy", "gz", "ax", "ay", "az"];
pub const GNSS_HEADER: [&str; 10] = ["t", "x", "y", "z", "sxx", "syy", "szz", "sxy", "sxz", "syz"];
pub const TRUTH_HEADER: [&str; 16] = ["t", "c11", "c12", "c13", "c21", "c22", "c23", "c31", "c32", "c33", "vx", "vy", "vz", "x", "y", "z"];

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// The output directory must already exist.
pub fn require_dir(dir: &Path) -> Result<(), CliError> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Io { path: dir.to_path_buf(), source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist") })
    }
}

/// Writes a header and rows of preformatted fields.
pub fn write_table<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| CliError::Io { path: path.to_path_buf(), source: e.into() };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.into_error() })?.flush().map_err(io_err(path))
}

/// Reads a numeric table with exactly `header`; every field must be a finite
/// number. Returns each row with its 1-based file line.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<f64>)>, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file);
    let parse = |line: u64, msg: String| CliError::Parse { path: path.to_path_buf(), line, msg };
    let mut records = rdr.records();
    let first = match records.next() {
        None => return Err(parse(1, format!("missing header, expected {}", header.join(",")))),
        Some(r) => r.map_err(|e| parse(csv_line(&e), e.to_string()))?,
    };
    if first.iter().ne(header.iter().copied()) {
        return Err(parse(1, format!("header {:?} does not match expected {}", first.iter().collect::<Vec<_>>().join(","), header.join(","))));
    }
    let mut out = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse(csv_line(&e), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(parse(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let mut row = Vec::with_capacity(header.len());
        for (field, name) in rec.iter().zip(header) {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => return Err(parse(line, format!("column {name}: {field:?} is not a finite number"))),
            }
        }
        out.push((line, row));
    }
    Ok(out)
}

fn csv_line(e: &csv::Error) -> u64 {
    e.position().map_or(0, |p| p.line())
}

fn v3(row: &[f64], i: usize) -> Vec3 {
    Vec3::new(row[i], row[i + 1], row[i + 2])
}

pub fn write_imu(path: &Path, imu: &[ImuSample]) -> Result<(), CliError> {
    write_table(path, &IMU_HEADER, imu.iter().map(|s| [s.t, s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z].map(fmt).to_vec()))
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuSample>, CliError> {
    Ok(read_table(path, &IMU_HEADER)?.into_iter().map(|(_, r)| ImuSample { t: r[0], gyro: v3(&r, 1), accel: v3(&r, 4) }).collect())
}

pub fn write_gnss(path: &Path, fixes: &[GnssFix]) -> Result<(), CliError> {
    write_table(
        path,
        &GNSS_HEADER,
        fixes.iter().map(|f| {
            let c = &f.cov;
            [f.t, f.pos.x, f.pos.y, f.pos.z, c[(0, 0)], c[(1, 1)], c[(2, 2)], c[(0, 1)], c[(0, 2)], c[(1, 2)]].map(fmt).to_vec()
        }),
    )
}

pub fn read_gnss(path: &Path) -> Result<Vec<GnssFix>, CliError> {
    read_table(path, &GNSS_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let cov = Mat3::new(r[4], r[7], r[8], r[7], r[5], r[9], r[8], r[9], r[6]);
            if r[4] < 0.0 || r[5] < 0.0 || r[6] < 0.0 {
                return Err(CliError::Parse { path: path.to_path_buf(), line, msg: "negative variance".into() });
            }
            Ok(GnssFix { t: r[0], pos: v3(&r, 1), cov })
        })
        .collect()
}

fn state_fields(t: f64, x: &GroupElement) -> Vec<f64> {
    let c = x.rot.mat();
    let mut row = vec![t];
    for i in 0..3 {
        for j in 0..3 {
            row.push(c[(i, j)]);
        }
    }
    row.extend(x.vel.iter().chain(x.pos.iter()));
    row
}

pub fn write_truth(path: &Path, truth: &[TruthPoint]) -> Result<(), CliError> {
    write_table(path, &TRUTH_HEADER, truth.iter().map(|p| state_fields(p.t, &p.x).into_iter().map(fmt).collect()))
}

/// Reads ECEF_IB truth states; rotations must be orthonormal.
pub fn read_truth(path: &Path) -> Result<Vec<(f64, GroupElement)>, CliError> {
    read_table(path, &TRUTH_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let c = Mat3::from_row_slice(&r[1..10]);
            let rot = Rotation::new(c).map_err(|e| CliError::Parse { path: path.to_path_buf(), line, msg: e.to_string() })?;
            Ok((r[0], GroupElement { rot, vel: v3(&r, 10), pos: v3(&r, 13), frame: FrameTag::EcefIb }))
        })
        .collect()
}

pub fn nav_header() -> Vec<String> {
    let mut h: Vec<String> = TRUTH_HEADER.iter().map(|s| s.to_string()).collect();
    h.extend(["bgx", "bgy", "bgz", "bax", "bay", "baz"].map(String::from));
    h.extend((0..15).map(|i| format!("p{i}")));
    h.push("nis".into());
    h
}

/// One row per epoch: state, biases, covariance diagonal and the NIS of
/// the update applied there (blank when none).
pub fn write_nav(path: &Path, records: &[EpochRecord]) -> Result<(), CliError> {
    let header = nav_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(
        path,
        &header,
        records.iter().map(|r| {
            let mut row = state_fields(r.t, &r.x);
            row.extend(r.biases.gyro.iter().chain(r.biases.accel.iter()));
            row.extend(r.p_diag.iter());
            let mut fields: Vec<String> = row.into_iter().map(fmt).collect();
            fields.push(r.update.map(|u| fmt(u.nis)).unwrap_or_default());
            fields
        }),
    )
}

pub const ERR_HEADER: [&str; 19] = [
    "t", "phi_x", "phi_y", "phi_z", "rho_v_x", "rho_v_y", "rho_v_z", "rho_r_x", "rho_r_y", "rho_r_z", "dbg_x", "dbg_y", "dbg_z", "dba_x", "dba_y", "dba_z",
    "nees", "nees_dof", "nis",
];

/// Invariant error against truth at each epoch that has it.
pub fn write_err(path: &Path, records: &[EpochRecord]) -> Result<(), CliError> {
    write_table(
        path,
        &ERR_HEADER,
        records.iter().filter_map(|r| {
            let e = r.error?;
            let mut fields = vec![fmt(r.t)];
            fields.extend(e.to_vector().iter().map(|&v| fmt(v)));
            fields.push(r.nees.map(fmt).unwrap_or_default());
            fields.push(r.nees_dof.to_string());
            fields.push(r.update.map(|u| fmt(u.nis)).unwrap_or_default());
            Some(fields)
        }),
    )
}
