//! CSV and JSON writers. Floats are written with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::observables::{BandDensities, ObservableSeries};

/// `t,P_plus,P_minus` rows.
pub fn series_csv(series: &ObservableSeries) -> String {
    let mut s = String::from("t,P_plus,P_minus\n");
    for k in 0..series.len() {
        s.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            series.times[k], series.p_plus[k], series.p_minus[k]
        ));
    }
    s
}

/// Spatial band densities on their grid: `x[,y],rho_plus,rho_minus`.
pub fn densities_csv(d: &BandDensities) -> String {
    let names = ["x", "y"];
    let dim = d.axes.len();
    let mut s = names[..dim].join(",");
    s.push_str(",rho_plus,rho_minus\n");
    let inner = if dim == 2 { d.axes[1].n } else { 1 };
    for k in 0..d.rho_plus.len() {
        let x = d.axes[0].center(k / inner);
        s.push_str(&format!("{x:.16e},"));
        if dim == 2 {
            s.push_str(&format!("{:.16e},", d.axes[1].center(k % inner)));
        }
        s.push_str(&format!("{:.16e},{:.16e}\n", d.rho_plus[k], d.rho_minus[k]));
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use crate::observables::{ObservableRecord, SeriesSource};

    #[test]
    fn series_rows_round_trip() {
        let mut s = ObservableSeries::new(SeriesSource::Liouville);
        s.push(0.0, ObservableRecord { p_plus: 1.0, p_minus: 0.0 }).unwrap();
        s.push(0.1, ObservableRecord { p_plus: 0.1 + 0.2, p_minus: 0.7 }).unwrap();
        let text = series_csv(&s);
        let row: Vec<f64> = text.lines().nth(2).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row, vec![0.1, 0.1 + 0.2, 0.7]);
        assert_eq!(text.lines().next(), Some("t,P_plus,P_minus"));
    }

    #[test]
    fn density_layout_2d() {
        let d = BandDensities {
            axes: vec![Axis::new(0.0, 1.0, 2).unwrap(), Axis::new(0.0, 1.0, 3).unwrap()],
            rho_plus: (0..6).map(f64::from).collect(),
            rho_minus: vec![0.0; 6],
            current: vec![],
        };
        let text = densities_csv(&d);
        let row: Vec<f64> = text.lines().nth(5).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[0], 0.75);
        assert!((row[1] - 0.5).abs() < 1e-15);
        assert_eq!(row[2], 4.0);
    }
}
