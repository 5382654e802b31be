//! gnuplot scripts for loss and accuracy curves.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::export::write_file;

/// One line on the plot, read from a comma-separated file with a header.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    /// Path relative to the script's directory.
    pub csv: PathBuf,
    pub loss_column: usize,
    pub accuracy_column: Option<usize>,
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

pub fn plot_script(curves: &[Curve], image: &str) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::Empty("plot curves"));
    }
    let with_accuracy: Vec<&Curve> = curves
        .iter()
        .filter(|c| c.accuracy_column.is_some())
        .collect();
    let panels = if with_accuracy.is_empty() { 1 } else { 2 };
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile missing ''");
    let _ = writeln!(s, "set terminal pngcairo size {},480", 640 * panels);
    let _ = writeln!(s, "set output {}", quote(image));
    let _ = writeln!(s, "set key outside bottom center horizontal");
    let _ = writeln!(s, "set multiplot layout 1,{panels}");
    let _ = writeln!(s, "set xlabel 'round'");
    let _ = writeln!(s, "set title 'global training loss'");
    let _ = writeln!(s, "set logscale y");
    let lines: Vec<String> = curves
        .iter()
        .map(|c| {
            format!(
                "{} using 1:{} skip 1 with lines title {}",
                quote(&c.csv.to_string_lossy()),
                c.loss_column,
                quote(&c.label)
            )
        })
        .collect();
    let _ = writeln!(s, "plot {}", lines.join(", \\\n     "));
    if !with_accuracy.is_empty() {
        let _ = writeln!(s, "unset logscale y");
        let _ = writeln!(s, "set title 'test accuracy'");
        let _ = writeln!(s, "set yrange [0:1]");
        let lines: Vec<String> = with_accuracy
            .iter()
            .map(|c| {
                format!(
                    "{} using 1:{} skip 1 with lines title {}",
                    quote(&c.csv.to_string_lossy()),
                    c.accuracy_column.unwrap_or(0),
                    quote(&c.label)
                )
            })
            .collect();
        let _ = writeln!(s, "plot {}", lines.join(", \\\n     "));
    }
    let _ = writeln!(s, "unset multiplot");
    Ok(s)
}

pub fn emit_plot_script(curves: &[Curve], image: &str, path: &Path) -> Result<()> {
    write_file(path, &plot_script(curves, image)?)
}
