//! Dispersion branches, their labels and CSV form.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Polarization family of a root, from its surface displacements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeClass {
    /// Lamb wave, antisymmetric about the midplane.
    Antisymmetric,
    /// Lamb wave, symmetric about the midplane.
    Symmetric,
    AntisymmetricSh,
    SymmetricSh,
    /// No clear family, e.g. at a crossing of two branches.
    Mixed,
}

/// Branch name. Fundamental branches carry index 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeLabel {
    A(u32),
    S(u32),
    Ash(u32),
    Ssh(u32),
    Unlabeled(u32),
}

impl ModeLabel {
    pub const A0: ModeLabel = ModeLabel::A(0);
    pub const S0: ModeLabel = ModeLabel::S(0);

    pub fn class(&self) -> Option<ModeClass> {
        match self {
            ModeLabel::A(_) => Some(ModeClass::Antisymmetric),
            ModeLabel::S(_) => Some(ModeClass::Symmetric),
            ModeLabel::Ash(_) => Some(ModeClass::AntisymmetricSh),
            ModeLabel::Ssh(_) => Some(ModeClass::SymmetricSh),
            ModeLabel::Unlabeled(_) => None,
        }
    }

    pub fn is_sh(&self) -> bool {
        matches!(self, ModeLabel::Ash(_) | ModeLabel::Ssh(_))
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::A(n) => write!(f, "A{n}"),
            ModeLabel::S(n) => write!(f, "S{n}"),
            ModeLabel::Ash(n) => write!(f, "ASH{n}"),
            ModeLabel::Ssh(n) => write!(f, "SSH{n}"),
            ModeLabel::Unlabeled(n) => write!(f, "U{n}"),
        }
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unknown mode label `{s}`"));
        let upper = s.to_ascii_uppercase();
        let (ctor, rest): (fn(u32) -> ModeLabel, &str) = if let Some(r) = upper.strip_prefix("ASH")
        {
            (ModeLabel::Ash, r)
        } else if let Some(r) = upper.strip_prefix("SSH") {
            (ModeLabel::Ssh, r)
        } else if let Some(r) = upper.strip_prefix('A') {
            (ModeLabel::A, r)
        } else if let Some(r) = upper.strip_prefix('S') {
            (ModeLabel::S, r)
        } else if let Some(r) = upper.strip_prefix('U') {
            (ModeLabel::Unlabeled, r)
        } else {
            return Err(bad());
        };
        rest.parse::<u32>().map(ctor).map_err(|_| bad())
    }
}

impl Serialize for ModeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModeLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub f: f64,
    pub k: f64,
    pub c_p: f64,
}

impl BranchPoint {
    pub fn new(f: f64, k: f64) -> Self {
        Self {
            f,
            k,
            c_p: TWO_PI * f / k,
        }
    }

    /// Spatial frequency `k / 2 pi` in 1/m.
    pub fn nu(&self) -> f64 {
        self.k / TWO_PI
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionBranch {
    pub label: ModeLabel,
    pub points: Vec<BranchPoint>,
    /// Mean normalized `(|u1|, |u2|, |u3|)` at the outer surfaces.
    pub polarization_signature: [f64; 3],
}

impl DispersionBranch {
    /// Builds a branch, checking that frequencies strictly increase.
    pub fn new(label: ModeLabel, points: Vec<BranchPoint>, signature: [f64; 3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain(format!("branch {label} has no points")));
        }
        if points.windows(2).any(|w| !(w[1].f > w[0].f)) {
            return Err(Error::Domain(format!(
                "branch {label}: frequencies must be strictly increasing"
            )));
        }
        Ok(Self {
            label,
            points,
            polarization_signature: signature,
        })
    }

    pub fn f_min(&self) -> f64 {
        self.points[0].f
    }

    pub fn f_max(&self) -> f64 {
        self.points[self.points.len() - 1].f
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.f).collect()
    }

    pub fn phase_velocities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.c_p).collect()
    }
}

/// Branch as `(f d` in MHz mm, `c_p` in m/s`)` pairs for a plate of
/// thickness `d_mm`.
pub fn phase_velocity(branch: &DispersionBranch, d_mm: f64) -> Vec<(f64, f64)> {
    branch
        .points
        .iter()
        .map(|p| (p.f * d_mm * 1e-6, TWO_PI * p.f / p.k))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Row {
    mode: ModeLabel,
    f_hz: f64,
    fd_mhzmm: f64,
    k_radpm: f64,
    nu_1pm: f64,
    cp_mps: f64,
}

/// Writes branches as CSV with columns
/// `mode,f_hz,fd_mhzmm,k_radpm,nu_1pm,cp_mps`.
pub fn write_branches_csv<W: Write>(w: W, branches: &[DispersionBranch], d_mm: f64) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for b in branches {
        for p in &b.points {
            wtr.serialize(Row {
                mode: b.label,
                f_hz: p.f,
                fd_mhzmm: p.f * d_mm * 1e-6,
                k_radpm: p.k,
                nu_1pm: p.nu(),
                cp_mps: p.c_p,
            })
            .map_err(csv_error)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<branch csv>", e))?;
    Ok(())
}

/// Reads branches written by [`write_branches_csv`]. Rows are grouped by
/// mode in order of first appearance and sorted by frequency.
pub fn read_branches_csv<R: Read>(r: R) -> Result<Vec<DispersionBranch>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    for col in ["mode", "f_hz", "k_radpm"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::MissingColumn(col.into()));
        }
    }
    let mut groups: Vec<(ModeLabel, Vec<BranchPoint>)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let get = |name: &str| -> Result<&str> {
            headers
                .iter()
                .position(|h| h == name)
                .and_then(|i| rec.get(i))
                .ok_or_else(|| Error::MissingColumn(name.into()))
        };
        let parse_err = |message: String| Error::Parse {
            source_name: "branch csv".into(),
            location: format!("record {}", line + 1),
            message,
        };
        let mode: ModeLabel = get("mode")?
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        let num = |name: &str| -> Result<f64> {
            get(name)?
                .parse::<f64>()
                .map_err(|e| parse_err(format!("{name}: {e}")))
        };
        let point = BranchPoint::new(num("f_hz")?, num("k_radpm")?);
        match groups.iter_mut().find(|(m, _)| *m == mode) {
            Some((_, pts)) => pts.push(point),
            None => groups.push((mode, vec![point])),
        }
    }
    groups
        .into_iter()
        .map(|(label, mut pts)| {
            pts.sort_by(|a, b| a.f.total_cmp(&b.f));
            DispersionBranch::new(label, pts, [0.0; 3])
        })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    let location = e
        .position()
        .map(|p| format!("line {}", p.line()))
        .unwrap_or_else(|| "?".into());
    Error::Parse {
        source_name: "csv".into(),
        location,
        message: e.to_string(),
    }
}
