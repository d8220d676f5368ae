use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::EvalResult;
use crate::training::RoundRecord;

/// Recorded in every report so numbers are only compared like for like.
pub const SHAVE_CONVENTION: &str =
    "Y channel; shave = scale px per border; output clamped to [0,1]; PSNR peak 1, cap 100 dB; SSIM 11x11 gaussian sigma 1.5, valid windows";

pub const CSV_FILE: &str = "eval.csv";
pub const JSON_FILE: &str = "eval.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Label of the run that produced the evaluated checkpoint.
    pub run: String,
    pub scheme: String,
    pub config_hash: String,
    pub checkpoint_digest: String,
    pub convention: String,
    pub result: EvalResult,
    /// Per-round validation series of an AIL run, if any.
    #[serde(default)]
    pub rounds: Vec<RoundRecord>,
}

impl EvalReport {
    /// Writes `eval.csv` (id, psnr, ssim) and `eval.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(CSV_FILE);
        let csv_err = |e: csv::Error| Error::Data(format!("{}: {e}", csv_path.display()));
        let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
        w.write_record(["id", "psnr", "ssim"]).map_err(csv_err)?;
        for s in &self.result.images {
            w.write_record([
                s.id.as_str(),
                &format!("{:.6}", s.psnr),
                &format!("{:.6}", s.ssim),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join(JSON_FILE);
        fs::write(&json_path, serde_json::to_vec_pretty(self)?)
            .map_err(|e| Error::io(&json_path, e))
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(JSON_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub run: String,
    pub scheme: String,
    pub dataset: String,
    pub scale: u32,
    pub psnr: f64,
    pub ssim: f64,
    /// Differences against the first report.
    pub delta_psnr: f64,
    pub delta_ssim: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

/// Deltas of every report against the first one. All reports must cover the
/// same images of the same dataset at the same scale under the same
/// convention.
pub fn compare_reports(reports: &[EvalReport]) -> Result<Comparison> {
    let Some(base) = reports.first() else {
        return Err(Error::InvalidConfig("nothing to compare".into()));
    };
    let ids = |r: &EvalReport| {
        r.result
            .images
            .iter()
            .map(|s| s.id.clone())
            .collect::<Vec<_>>()
    };
    let rows = reports
        .iter()
        .map(|r| {
            let same = r.result.dataset == base.result.dataset
                && r.result.scale == base.result.scale
                && r.result.shave == base.result.shave
                && r.convention == base.convention
                && ids(r) == ids(base);
            if !same {
                return Err(Error::Data(format!(
                    "run {} was evaluated on {} x{} and cannot be compared with {} on {} x{}",
                    r.run,
                    r.result.dataset,
                    r.result.scale,
                    base.run,
                    base.result.dataset,
                    base.result.scale
                )));
            }
            Ok(ComparisonRow {
                run: r.run.clone(),
                scheme: r.scheme.clone(),
                dataset: r.result.dataset.clone(),
                scale: r.result.scale,
                psnr: r.result.mean_psnr,
                ssim: r.result.mean_ssim,
                delta_psnr: r.result.mean_psnr - base.result.mean_psnr,
                delta_ssim: r.result.mean_ssim - base.result.mean_ssim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        baseline: base.run.clone(),
        rows,
    })
}

fn arrow(delta: f64, digits: usize) -> String {
    let mag = format!("{:.*}", digits, delta.abs());
    if mag.trim_start_matches(['0', '.']).is_empty() {
        format!("={mag}")
    } else if delta > 0.0 {
        format!("↑{mag}")
    } else {
        format!("↓{mag}")
    }
}

impl Comparison {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Data(e.to_string());
        w.write_record([
            "run",
            "scheme",
            "dataset",
            "scale",
            "psnr",
            "ssim",
            "delta_psnr",
            "delta_ssim",
        ])
        .map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.run.clone(),
                r.scheme.clone(),
                r.dataset.clone(),
                r.scale.to_string(),
                format!("{:.4}", r.psnr),
                format!("{:.4}", r.ssim),
                format!("{:.4}", r.delta_psnr),
                format!("{:.4}", r.delta_ssim),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned table in the `PSNR/SSIM  ↑ΔPSNR/↑ΔSSIM` style.
    pub fn to_text(&self) -> String {
        let cells: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.run.clone(),
                    format!("{} x{}", r.dataset, r.scale),
                    format!("{:.2}/{:.4}", r.psnr, r.ssim),
                    format!("{}/{}", arrow(r.delta_psnr, 2), arrow(r.delta_ssim, 4)),
                ]
            })
            .collect();
        let header = [
            "run".to_string(),
            "set".into(),
            "PSNR/SSIM".into(),
            format!("vs {}", self.baseline),
        ];
        let mut widths = header.clone().map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |row: &[String; 4]| {
            let parts: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&header);
        for row in &cells {
            out.push_str(&line(row));
        }
        out
    }
}
