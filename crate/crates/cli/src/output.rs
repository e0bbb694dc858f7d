//! Run directories: CSV tables, SVG files and the manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use quintic_core::grid::fmt_real;
use quintic_core::spectrum::SpectralData;

use crate::config::RunConfig;
use crate::svg::Plot;

/// Cell formatting shared by every table.
pub fn real(x: f64) -> String {
    fmt_real(x)
}

/// Collects the files of one run inside its output directory.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Comma-separated, header row, LF line endings.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(self.root.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn svg(&mut self, name: &str, plot: &Plot) -> io::Result<()> {
        fs::write(self.root.join(name), plot.render())?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.txt`: the code version, the spectral certificate and
    /// the file list as comments, followed by the resolved configuration, so
    /// the manifest itself is a valid config for rerunning.
    pub fn manifest(mut self, command: &str, cfg: &RunConfig, sd: &SpectralData) -> io::Result<Vec<String>> {
        self.files.push("manifest.txt".into());
        let mut text = String::new();
        text.push_str(&format!("# quintic {}\n", env!("CARGO_PKG_VERSION")));
        text.push_str(&format!("# command: {command}\n"));
        text.push_str(&format!("# k0: {}\n", real(sd.k0)));
        text.push_str(&format!("# eigen_residual: {}\n", real(sd.residual_eig)));
        text.push_str(&format!("# resonance_residual: {}\n", real(sd.residual_res)));
        text.push_str(&format!("# negative_eigenvalues: {}\n", sd.negative_count));
        text.push_str(&format!("# spectral_method: {:?}\n", sd.method));
        for f in &self.files {
            text.push_str(&format!("# file: {f}\n"));
        }
        text.push('\n');
        text.push_str(&cfg.to_text());
        fs::write(self.root.join("manifest.txt"), text)?;
        Ok(self.files)
    }
}
