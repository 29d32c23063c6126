use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{file_error, IoError};
use crate::analysis::{PredictiveBand, SensitivityOutcome};
use crate::compartmental::SlirTrajectory;
use crate::sampler::{summarize, ChainSet, ParameterSummary};
use crate::stats::{to_constrained, ObservedData, UnconstrainedParams, N_PARAMS, PARAM_NAMES};

pub const CHAINS_HEADER: [&str; 10] = [
    "chain",
    "iter",
    "R0",
    "gamma",
    "a",
    "b",
    "phi1",
    "phi2",
    "log_posterior",
    "divergent",
];

fn create(path: &Path) -> Result<BufWriter<File>, IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(file_error(dir))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(file_error(path))?,
    ))
}

fn date_label(start: Option<NaiveDate>, day: usize) -> String {
    start
        .map(|s| (s + chrono::Days::new(day as u64)).to_string())
        .unwrap_or_default()
}

macro_rules! out {
    ($path:expr, $w:expr, $($arg:tt)*) => {
        writeln!($w, $($arg)*).map_err(file_error($path))?
    };
}

/// One chain's post-warmup draws on the constrained scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRows {
    pub first_iter: usize,
    pub draws: Vec<[f64; N_PARAMS]>,
    pub log_posterior: Vec<f64>,
    pub divergent: Vec<bool>,
}

/// The content of a chains CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainsTable {
    pub chains: Vec<ChainRows>,
}

impl ChainsTable {
    pub fn from_chain_set(set: &ChainSet, n_warmup: usize) -> Self {
        let chains = set
            .chains
            .iter()
            .map(|c| ChainRows {
                first_iter: n_warmup,
                draws: c
                    .draws
                    .iter()
                    .map(|u| to_constrained(&UnconstrainedParams::from_slice(u)).to_array())
                    .collect(),
                log_posterior: c.log_density.clone(),
                divergent: c.divergent.clone(),
            })
            .collect();
        Self { chains }
    }

    /// Draws as `[parameter][chain][draw]`.
    pub fn by_parameter(&self) -> Vec<Vec<Vec<f64>>> {
        (0..N_PARAMS)
            .map(|p| {
                self.chains
                    .iter()
                    .map(|c| c.draws.iter().map(|d| d[p]).collect())
                    .collect()
            })
            .collect()
    }

    pub fn n_divergent(&self) -> usize {
        self.chains
            .iter()
            .map(|c| c.divergent.iter().filter(|d| **d).count())
            .sum()
    }
}

/// Per-parameter posterior summary plus run shape, written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub parameters: Vec<ParameterSummary>,
    pub n_chains: usize,
    pub n_draws_per_chain: usize,
    pub n_divergent: usize,
}

impl FitSummary {
    pub fn from_table(table: &ChainsTable) -> Result<Self, crate::sampler::DiagnosticsError> {
        Ok(Self {
            parameters: summarize(&PARAM_NAMES, &table.by_parameter())?,
            n_chains: table.chains.len(),
            n_draws_per_chain: table.chains.first().map_or(0, |c| c.draws.len()),
            n_divergent: table.n_divergent(),
        })
    }

    pub fn max_rhat(&self) -> f64 {
        self.parameters
            .iter()
            .map(|p| p.rhat)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One row per post-warmup draw. Floats use the shortest representation that
/// parses back to the same value.
pub fn write_chains_csv(path: &Path, table: &ChainsTable) -> Result<(), IoError> {
    let mut w = create(path)?;
    out!(path, w, "{}", CHAINS_HEADER.join(","));
    for (c, chain) in table.chains.iter().enumerate() {
        for (k, draw) in chain.draws.iter().enumerate() {
            let values: Vec<String> = draw.iter().map(|v| v.to_string()).collect();
            out!(
                path,
                w,
                "{c},{},{},{},{}",
                chain.first_iter + k,
                values.join(","),
                chain.log_posterior[k],
                chain.divergent[k] as u8
            );
        }
    }
    w.flush().map_err(file_error(path))
}

pub fn read_chains_csv(path: &Path) -> Result<ChainsTable, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let format_err = |line: u64, message: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| format_err(1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != CHAINS_HEADER {
        return Err(format_err(
            1,
            format!("expected header `{}`", CHAINS_HEADER.join(",")),
        ));
    }
    let mut chains: Vec<ChainRows> = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| format_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or_default();
        let chain: usize = field(0)
            .parse()
            .map_err(|_| format_err(line, format!("bad chain index `{}`", field(0))))?;
        let iter: usize = field(1)
            .parse()
            .map_err(|_| format_err(line, format!("bad iteration `{}`", field(1))))?;
        let mut numbers = [0.0; N_PARAMS + 1];
        for (k, slot) in numbers.iter_mut().enumerate() {
            *slot = field(2 + k)
                .parse()
                .map_err(|_| format_err(line, format!("bad number `{}`", field(2 + k))))?;
        }
        let divergent = match field(9) {
            "0" => false,
            "1" => true,
            other => return Err(format_err(line, format!("bad divergent flag `{other}`"))),
        };
        if chain == chains.len() {
            chains.push(ChainRows {
                first_iter: iter,
                draws: Vec::new(),
                log_posterior: Vec::new(),
                divergent: Vec::new(),
            });
        } else if chain + 1 != chains.len() {
            return Err(format_err(line, format!("chain {chain} out of order")));
        }
        let rows = chains.last_mut().expect("pushed above");
        if iter != rows.first_iter + rows.draws.len() {
            return Err(format_err(
                line,
                format!("iteration {iter} out of order in chain {chain}"),
            ));
        }
        let mut draw = [0.0; N_PARAMS];
        draw.copy_from_slice(&numbers[..N_PARAMS]);
        rows.draws.push(draw);
        rows.log_posterior.push(numbers[N_PARAMS]);
        rows.divergent.push(divergent);
    }
    if chains.is_empty() {
        return Err(IoError::Format {
            path: path.to_path_buf(),
            message: "no draws".into(),
        });
    }
    Ok(ChainsTable { chains })
}

/// `day,date,S,L,I,R` per output day.
pub fn write_trajectory_csv(
    path: &Path,
    traj: &SlirTrajectory<f64>,
    start: Option<NaiveDate>,
) -> Result<(), IoError> {
    let mut w = create(path)?;
    out!(path, w, "day,date,S,L,I,R");
    for (day, x) in traj.states.iter().enumerate() {
        out!(
            path,
            w,
            "{day},{},{},{},{},{}",
            date_label(start, day),
            x.s,
            x.l,
            x.i,
            x.r
        );
    }
    w.flush().map_err(file_error(path))
}

/// `day,date,mobility,cases` per observed day.
pub fn write_observed_csv(path: &Path, data: &ObservedData) -> Result<(), IoError> {
    let mut w = create(path)?;
    out!(path, w, "day,date,mobility,cases");
    for day in 0..data.days() {
        out!(
            path,
            w,
            "{day},{},{},{}",
            date_label(data.start_date, day),
            data.mobility[day],
            data.cases[day]
        );
    }
    w.flush().map_err(file_error(path))
}

/// Reads the `day,date,mobility,cases` layout written by [`write_observed_csv`].
pub fn read_observed_csv(
    path: &Path,
    population: f64,
    i0: Option<f64>,
) -> Result<ObservedData, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| IoError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let parse_err = |line: u64, message: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["day", "date", "mobility", "cases"] {
        return Err(parse_err(
            1,
            "expected header `day,date,mobility,cases`".into(),
        ));
    }
    let (mut mobility, mut cases, mut start) = (Vec::new(), Vec::new(), None);
    for record in reader.records() {
        let record =
            record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or_default();
        let day: usize = field(0)
            .parse()
            .map_err(|_| parse_err(line, format!("bad day `{}`", field(0))))?;
        if day != cases.len() {
            return Err(parse_err(
                line,
                format!("expected day {}, found {day}", cases.len()),
            ));
        }
        if day == 0 && !field(1).is_empty() {
            start = Some(
                NaiveDate::parse_from_str(field(1), "%Y-%m-%d")
                    .map_err(|e| parse_err(line, e.to_string()))?,
            );
        }
        mobility.push(
            field(2)
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad mobility `{}`", field(2))))?,
        );
        cases.push(
            field(3)
                .parse::<u64>()
                .map_err(|_| parse_err(line, format!("bad count `{}`", field(3))))?,
        );
    }
    let i0 = match i0 {
        Some(v) => v,
        None => super::I0Policy::FirstCase.resolve(&cases)?,
    };
    let mut data =
        ObservedData::new(mobility, cases, population, i0).map_err(|e| IoError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    data.start_date = start;
    Ok(data)
}

/// Long layout `day,date,series,kind,median,lower,upper,observed,role`.
///
/// `observed` holds the data value when `data` covers the day; `role` marks it
/// as `train` (used in the fit), `held_out` or empty.
pub fn write_band_csv(
    path: &Path,
    band: &PredictiveBand,
    data: Option<&ObservedData>,
    train_days: Option<usize>,
) -> Result<(), IoError> {
    let mut w = create(path)?;
    let kind = match band.kind {
        crate::analysis::BandKind::Prior => "prior",
        crate::analysis::BandKind::Posterior => "posterior",
    };
    let start = data.and_then(|d| d.start_date);
    out!(
        path,
        w,
        "day,date,series,kind,median,lower,upper,observed,role"
    );
    for (series, points) in [("mobility", &band.mobility), ("cases", &band.cases)] {
        for (day, p) in points.iter().enumerate() {
            let observed = data.filter(|d| day < d.days()).map(|d| match series {
                "mobility" => d.mobility[day].to_string(),
                _ => d.cases[day].to_string(),
            });
            let role = match (observed.is_some(), train_days) {
                (true, Some(t)) if day < t => "train",
                (true, Some(_)) => "held_out",
                (true, None) => "train",
                (false, _) => "",
            };
            out!(
                path,
                w,
                "{day},{},{series},{kind},{},{},{},{},{role}",
                date_label(start, day),
                p.median,
                p.lower,
                p.upper,
                observed.unwrap_or_default()
            );
        }
    }
    w.flush().map_err(file_error(path))
}

/// `target_decline,peak_decline,a,attack_rate,saturated,error`.
pub fn write_sensitivity_csv(path: &Path, rows: &[SensitivityOutcome]) -> Result<(), IoError> {
    let mut w = create(path)?;
    out!(
        path,
        w,
        "target_decline,peak_decline,a,attack_rate,saturated,error"
    );
    for outcome in rows {
        match &outcome.row {
            Ok(r) => out!(
                path,
                w,
                "{},{},{},{},{},",
                r.target_decline,
                r.peak_decline,
                r.a,
                r.attack_rate,
                r.saturated
            ),
            Err(e) => out!(
                path,
                w,
                "{},,,,,\"{}\"",
                outcome.target,
                e.to_string().replace('"', "'")
            ),
        }
    }
    w.flush().map_err(file_error(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ChainsTable {
        let chain = |shift: f64| ChainRows {
            first_iter: 10,
            draws: (0..20)
                .map(|k| {
                    let x = (k as f64 * 0.37 + shift).sin();
                    [
                        5.0 + x,
                        0.1 + 0.01 * x,
                        0.05,
                        0.02 + 1e-3 * x,
                        100.0 / 3.0 + x,
                        10.0 + x,
                    ]
                })
                .collect(),
            log_posterior: (0..20).map(|k| -1234.5678901234 + k as f64 / 7.0).collect(),
            divergent: (0..20).map(|k| k == 3).collect(),
        };
        ChainsTable {
            chains: vec![chain(0.0), chain(1.0)],
        }
    }

    #[test]
    fn chains_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chains.csv");
        let t = table();
        write_chains_csv(&path, &t).unwrap();
        let back = read_chains_csv(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(FitSummary::from_table(&back), FitSummary::from_table(&t));
        assert_eq!(back.n_divergent(), 2);
    }

    #[test]
    fn chains_reader_rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "chain,iter,x\n0,1,2\n").unwrap();
        assert!(read_chains_csv(&path).is_err());
        std::fs::write(
            &path,
            format!("{}\n0,5,1,0.1,0.1,0.1,1,1,-3,2\n", CHAINS_HEADER.join(",")),
        )
        .unwrap();
        assert!(matches!(
            read_chains_csv(&path),
            Err(IoError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn observed_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/observed.csv");
        let data = ObservedData::new(vec![0.5, 0.25], vec![3, 4], 100.0, 3.0)
            .unwrap()
            .with_start_date("2020-03-08".parse().unwrap());
        write_observed_csv(&path, &data).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "day,date,mobility,cases\n0,2020-03-08,0.5,3\n1,2020-03-09,0.25,4\n"
        );
        assert_eq!(read_observed_csv(&path, 100.0, None).unwrap(), data);
    }
}
