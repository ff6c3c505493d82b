//! Plot-ready CSV output. Floats are written with 17 significant digits so
//! every value parses back to the identical `f64`.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::Trajectory;
use crate::error::HarnessError;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn phase_header(dof: usize) -> String {
    let mut cols = vec!["t".to_string()];
    if dof == 1 {
        cols.extend(["q".to_string(), "p".to_string()]);
    } else {
        cols.extend((1..=dof).map(|i| format!("q{i}")));
        cols.extend((1..=dof).map(|i| format!("p{i}")));
    }
    cols.join(",")
}

#[inline]
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Phase-portrait CSV: `t, q…, p…`.
pub fn write_phase_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", phase_header(traj.dof))?;
    for (t, y) in traj.times.iter().zip(&traj.states) {
        let mut line = fmt_f64(*t);
        for v in y {
            line.push(',');
            line.push_str(&fmt_f64(*v));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

/// Energy-error CSV: `t, H_error`.
pub fn write_energy_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "t,H_error")?;
    for (t, e) in traj.times.iter().zip(&traj.energy_error) {
        writeln!(w, "{},{}", fmt_f64(*t), fmt_f64(*e))?;
    }
    w.flush()
}

pub fn emit_csv(traj: &Trajectory, path: &Path) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(io_err(path))?;
    write_phase_csv(traj, BufWriter::new(f)).map_err(io_err(path))
}

pub fn emit_energy_csv(traj: &Trajectory, path: &Path) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(io_err(path))?;
    write_energy_csv(traj, BufWriter::new(f)).map_err(io_err(path))
}

fn read_rows(path: &Path) -> Result<(String, Vec<Vec<f64>>), HarnessError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(f).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(io_err(path))?,
        None => {
            return Err(io_err(path)(io::Error::new(
                io::ErrorKind::InvalidData,
                "missing header",
            )))
        }
    };
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| {
                io_err(path)(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("line {}: {e}", n + 2),
                ))
            })?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Parses a phase CSV back into `(times, states)`.
pub fn read_phase_csv(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>), HarnessError> {
    let (_, rows) = read_rows(path)?;
    Ok(rows
        .into_iter()
        .map(|mut r| {
            let t = r.remove(0);
            (t, r)
        })
        .unzip())
}

/// Parses an energy CSV back into `(times, errors)`.
pub fn read_energy_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
    let (_, rows) = read_rows(path)?;
    Ok(rows.into_iter().map(|r| (r[0], r[1])).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> Trajectory {
        Trajectory {
            dof: 1,
            times: (0..n).map(|i| i as f64 * 0.1).collect(),
            states: (0..n)
                .map(|i| vec![(i as f64).sin() / 3.0, 1.0 / (i as f64 + 7.0)])
                .collect(),
            energy_error: (0..n).map(|i| i as f64 * 1e-17).collect(),
            step_stats: Vec::new(),
        }
    }

    #[test]
    fn empty_trajectory_header_only() {
        let mut buf = Vec::new();
        write_phase_csv(&sample(0), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,q,p\n");
        let mut buf = Vec::new();
        write_energy_csv(&sample(0), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,H_error\n");
    }

    #[test]
    fn line_count() {
        let mut buf = Vec::new();
        write_phase_csv(&sample(3), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn multi_dof_header() {
        assert_eq!(phase_header(2), "t,q1,q2,p1,p2");
    }

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let traj = sample(25);
        let p = dir.path().join("phase.csv");
        let e = dir.path().join("energy.csv");
        emit_csv(&traj, &p).unwrap();
        emit_energy_csv(&traj, &e).unwrap();
        let (t, y) = read_phase_csv(&p).unwrap();
        assert_eq!(t, traj.times);
        assert_eq!(y, traj.states);
        let (t, err) = read_energy_csv(&e).unwrap();
        assert_eq!(t, traj.times);
        assert_eq!(err, traj.energy_error);
    }

    #[test]
    fn io_error_has_path() {
        let err = emit_csv(&sample(1), Path::new("/nonexistent/dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.csv"));
    }
}
