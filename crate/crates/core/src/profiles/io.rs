use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::grid::DiscreteProfile;
use super::pwl::PiecewiseLinearFn;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Profile(#[from] super::ProfileError),
}

/// Writes nodes as `x,y` rows in round-trippable scientific notation.
pub fn write_pwl_csv<W: Write>(f: &PiecewiseLinearFn, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y"])?;
    for (x, y) in f.nodes() {
        w.write_record([format!("{x:.16e}"), format!("{y:.16e}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pwl_csv<R: Read>(input: R) -> Result<PiecewiseLinearFn, IoError> {
    let mut r = csv::Reader::from_reader(input);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in r.deserialize() {
        let (x, y): (f64, f64) = row?;
        xs.push(x);
        ys.push(y);
    }
    Ok(PiecewiseLinearFn::new(xs, ys)?)
}

pub fn save_pwl_csv(f: &PiecewiseLinearFn, path: &Path) -> Result<(), IoError> {
    write_pwl_csv(f, File::create(path)?)
}

pub fn load_pwl_csv(path: &Path) -> Result<PiecewiseLinearFn, IoError> {
    read_pwl_csv(File::open(path)?)
}

pub fn save_discrete_json(u: &DiscreteProfile, path: &Path) -> Result<(), IoError> {
    let file = File::create(path)?;
    serde_json::to_writer(file, u)?;
    Ok(())
}

pub fn load_discrete_json(path: &Path) -> Result<DiscreteProfile, IoError> {
    let u: DiscreteProfile = serde_json::from_reader(File::open(path)?)?;
    if u.values.len() != u.grid.len() {
        return Err(super::ProfileError::LengthMismatch {
            xs: u.grid.len(),
            ys: u.values.len(),
        }
        .into());
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::grid::GridSpec;

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let f =
            PiecewiseLinearFn::from_nodes(&[(-0.1, 0.0), (1.0 / 3.0, 2.0f64.sqrt()), (0.7, 0.0)])
                .unwrap();
        let mut buf = Vec::new();
        write_pwl_csv(&f, &mut buf).unwrap();
        let g = read_pwl_csv(buf.as_slice()).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_rejects_unsorted_nodes() {
        let text = "x,y\n1.0,0.0\n0.0,1.0\n";
        assert!(matches!(
            read_pwl_csv(text.as_bytes()),
            Err(IoError::Profile(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.json");
        let g = GridSpec::new(0.1, 0.05, -2, 2, 3).unwrap();
        let u = DiscreteProfile::from_values(g, vec![0.0, 0.1, 1.0 / 7.0, -0.3, 0.0]).unwrap();
        save_discrete_json(&u, &path).unwrap();
        assert_eq!(load_discrete_json(&path).unwrap(), u);
    }
}
