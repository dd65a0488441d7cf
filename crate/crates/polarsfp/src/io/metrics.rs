//! CSV table of evaluation metrics, one row per (scene, mode) evaluation.

use std::fs;
use std::path::Path;

use super::IoFormatError;

/// Fixed header; float fields are printed with 17 significant digits and a
/// locale-independent decimal point.
pub const METRICS_HEADER: &str = "scene,mode,normal_mse,angular_err_deg,index_mae,diffuse_rel_err";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scene: String,
    pub mode: String,
    pub normal_mse: f64,
    pub angular_err_deg: f64,
    /// NaN when the mode does not estimate a refractive index.
    pub index_mae: f64,
    pub diffuse_rel_err: f64,
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes the header plus one row per entry.
pub fn write_metrics_csv(rows: &[MetricsRow], path: impl AsRef<Path>) -> Result<(), IoFormatError> {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.scene,
            r.mode,
            fmt(r.normal_mse),
            fmt(r.angular_err_deg),
            fmt(r.index_mae),
            fmt(r.diffuse_rel_err)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses a metrics CSV written by [`write_metrics_csv`].
pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>, IoFormatError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_HEADER => {}
        other => {
            return Err(IoFormatError::Csv(format!(
                "bad header {:?}, expected {METRICS_HEADER:?}",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(IoFormatError::Csv(format!(
                "line {}: expected 6 columns, got {}",
                lineno + 2,
                cols.len()
            )));
        }
        let num = |s: &str| -> Result<f64, IoFormatError> {
            s.parse()
                .map_err(|_| IoFormatError::Csv(format!("line {}: bad float {s:?}", lineno + 2)))
        };
        rows.push(MetricsRow {
            scene: cols[0].to_string(),
            mode: cols[1].to_string(),
            normal_mse: num(cols[2])?,
            angular_err_deg: num(cols[3])?,
            index_mae: num(cols[4])?,
            diffuse_rel_err: num(cols[5])?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn known_byte_string() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![MetricsRow {
            scene: "sphere".into(),
            mode: "corrected-mixed".into(),
            normal_mse: 0.03,
            angular_err_deg: 5.0,
            index_mae: 0.01,
            diffuse_rel_err: 0.02,
        }];
        write_metrics_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "scene,mode,normal_mse,angular_err_deg,index_mae,diffuse_rel_err\n\
             sphere,corrected-mixed,2.9999999999999999e-2,5.0000000000000000e0,1.0000000000000000e-2,2.0000000000000000e-2\n"
        );
    }

    #[test]
    fn empty_list_writes_header_only() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_metrics_csv(&[], &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            format!("{METRICS_HEADER}\n")
        );
        assert!(read_metrics_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn round_trip_to_printed_precision() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rt.csv");
        let rows = vec![MetricsRow {
            scene: "s".into(),
            mode: "m".into(),
            normal_mse: std::f64::consts::PI * 1e-3,
            angular_err_deg: 1.0 / 3.0,
            index_mae: f64::NAN,
            diffuse_rel_err: 7.25e-9,
        }];
        write_metrics_csv(&rows, &path).unwrap();
        let back = read_metrics_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        // 17 significant digits round-trip f64 exactly.
        assert_eq!(back[0].normal_mse, rows[0].normal_mse);
        assert_eq!(back[0].angular_err_deg, rows[0].angular_err_deg);
        assert_eq!(back[0].diffuse_rel_err, rows[0].diffuse_rel_err);
        assert!(back[0].index_mae.is_nan());
    }
}
