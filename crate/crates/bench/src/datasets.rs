//! Named benchmark datasets: where they come from, where they live locally,
//! and their reference settings (`d`, `n`, `γ₁`, sketch rank).

use std::fs::{self, File};
use std::io::{self, BufWriter, Read};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bzip2::read::BzDecoder;

use curvlasso::data::{load_libsvm, Problem};

pub const DATA_ENV: &str = "CURVLASSO_DATA";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetInfo {
    pub name: &'static str,
    /// File name inside the data directory.
    pub file: &'static str,
    pub d: usize,
    pub n: usize,
    pub gamma1: f64,
    pub rank: usize,
    /// Download location; `None` means the file must be placed by hand.
    pub url: Option<&'static str>,
}

const LIBSVM_BINARY: &str = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary";

pub const DATASETS: &[DatasetInfo] = &[
    DatasetInfo {
        name: "gisette-scale",
        file: "gisette_scale",
        d: 5000,
        n: 6000,
        gamma1: 1e-3,
        rank: 40,
        url: Some("gisette_scale.bz2"),
    },
    DatasetInfo {
        name: "australian",
        file: "australian",
        d: 14,
        n: 690,
        gamma1: 1e-3,
        rank: 5,
        url: Some("australian"),
    },
    DatasetInfo {
        name: "cina0",
        file: "cina0",
        d: 132,
        n: 16033,
        gamma1: 1e-4,
        rank: 20,
        url: None,
    },
    DatasetInfo {
        name: "real-sim",
        file: "real-sim",
        d: 20958,
        n: 72309,
        gamma1: 1e-4,
        rank: 50,
        url: Some("real-sim.bz2"),
    },
];

pub fn lookup(name: &str) -> Option<&'static DatasetInfo> {
    let key = name.to_ascii_lowercase().replace('_', "-");
    let key = match key.as_str() {
        "gisette" => "gisette-scale",
        "realsim" => "real-sim",
        other => other,
    }
    .to_string();
    DATASETS.iter().find(|d| d.name == key)
}

/// `$CURVLASSO_DATA`, or `./data`.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

impl DatasetInfo {
    pub fn path_in(&self, dir: &Path) -> PathBuf {
        dir.join(self.file)
    }

    pub fn download_url(&self) -> Option<String> {
        self.url.map(|u| format!("{LIBSVM_BINARY}/{u}"))
    }

    pub fn manual_instructions(&self, dir: &Path) -> String {
        format!(
            "{} has no known direct download. Obtain it in LIBSVM format and save it as {}",
            self.name,
            self.path_in(dir).display()
        )
    }
}

/// Loads a named dataset from `dir`, widening it to the reference `d`.
pub fn load_named(info: &DatasetInfo, dir: &Path) -> Result<(curvlasso::SparseMatrix, curvlasso::DenseVector)> {
    let path = info.path_in(dir);
    if !path.exists() {
        bail!(
            "{} not found at {}; run `curvlasso fetch {}` (data directory is ${DATA_ENV}, default ./data)",
            info.name,
            path.display(),
            info.name
        );
    }
    load_libsvm(&path, Some(info.d)).with_context(|| format!("loading {}", path.display()))
}

/// Loads a dataset given either a registry name or a file path.
pub fn load_any(name_or_path: &str, dir: &Path, min_cols: Option<usize>) -> Result<(curvlasso::SparseMatrix, curvlasso::DenseVector)> {
    if let Some(info) = lookup(name_or_path) {
        return load_named(info, dir);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_libsvm(path, min_cols).with_context(|| format!("loading {}", path.display()));
    }
    bail!("unknown dataset {name_or_path:?}: not a registered name and no such file")
}

pub fn problem_from(name_or_path: &str, dir: &Path, gamma1: f64, gamma2: f64) -> Result<Problem> {
    let (a, b) = load_any(name_or_path, dir, None)?;
    Ok(Problem::new(a, b, gamma1, gamma2)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    Downloaded(PathBuf),
    AlreadyPresent(PathBuf),
    Manual(String),
}

/// Downloads (and bunzips) a dataset into `dir` unless it is already there.
pub fn fetch(info: &DatasetInfo, dir: &Path, force: bool) -> Result<FetchOutcome> {
    let dest = info.path_in(dir);
    if dest.exists() && !force {
        return Ok(FetchOutcome::AlreadyPresent(dest));
    }
    let Some(url) = info.download_url() else {
        return Ok(FetchOutcome::Manual(info.manual_instructions(dir)));
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    log::info!("downloading {url}");
    let resp = ureq::get(&url).call().with_context(|| format!("GET {url}"))?;
    let reader: Box<dyn Read> = if url.ends_with(".bz2") {
        Box::new(BzDecoder::new(resp.into_reader()))
    } else {
        resp.into_reader()
    };
    let tmp = dest.with_extension("part");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        let mut reader = reader;
        io::copy(&mut reader, &mut out).with_context(|| format!("writing {}", tmp.display()))?;
    }
    fs::rename(&tmp, &dest)?;
    Ok(FetchOutcome::Downloaded(dest))
}
