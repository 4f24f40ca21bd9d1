//! Registry CSV parsing. Headers are matched case- and punctuation-insensitively,
//! so both `Batch Size` and `batch_size` work.

use std::path::Path;

use super::ExperimentRow;
use crate::error::{Error, Result};
use crate::federation::DEFAULT_MU;

pub const CONFIG_HEADER: &str =
    "DL Model,FL Algorithm,Epochs,Clients,Batch Size,C-Fraction,Skewness,Client Epochs,Small Skew,seed,mu";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Model,
    Algorithm,
    Rounds,
    Clients,
    BatchSize,
    CFraction,
    Skewness,
    ClientEpochs,
    SmallSkew,
    Seed,
    Mu,
}

fn column(header: &str) -> Option<Column> {
    let key: String = header
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    Some(match key.as_str() {
        "dlmodel" | "model" => Column::Model,
        "flalgorithm" | "algorithm" => Column::Algorithm,
        "epochs" | "rounds" => Column::Rounds,
        "clients" => Column::Clients,
        "batchsize" => Column::BatchSize,
        "cfraction" => Column::CFraction,
        "skewness" => Column::Skewness,
        "clientepochs" => Column::ClientEpochs,
        "smallskew" => Column::SmallSkew,
        "seed" => Column::Seed,
        "mu" => Column::Mu,
        _ => return None,
    })
}

const REQUIRED: [Column; 4] = [
    Column::Model,
    Column::Algorithm,
    Column::Rounds,
    Column::BatchSize,
];

fn is_na(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na")
}

fn parse_opt<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<Option<T>, String> {
    if is_na(s) {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| format!("cannot parse {what} from {s:?}"))
}

fn parse_bool(s: &str) -> std::result::Result<Option<bool>, String> {
    if is_na(s) {
        return Ok(None);
    }
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(Some(true)),
        "false" | "0" | "no" => Ok(Some(false)),
        _ => Err(format!("cannot parse small_skew from {s:?}")),
    }
}

/// Parses registry rows. Row numbers in errors count the header as row 1.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut columns = Vec::with_capacity(headers.len());
    for h in &headers {
        let c = column(h).ok_or_else(|| Error::Config {
            row: 1,
            reason: format!("unknown column {h:?}"),
        })?;
        if columns.contains(&Some(c)) {
            return Err(Error::Config {
                row: 1,
                reason: format!("duplicate column {h:?}"),
            });
        }
        columns.push(Some(c));
    }
    for req in REQUIRED {
        if !columns.contains(&Some(req)) {
            return Err(Error::Config {
                row: 1,
                reason: format!("missing required column {req:?}"),
            });
        }
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 2;
        let record = record?;
        let fail = |reason: String| Error::Config { row: row_no, reason };
        let mut model = None;
        let mut algorithm = None;
        let mut rounds = None;
        let mut batch_size = None;
        let mut row = ExperimentRow::new("", crate::federation::Algorithm::Centralized);
        row.mu = DEFAULT_MU;
        for (col, field) in columns.iter().zip(record.iter()) {
            match col.expect("columns resolved above") {
                Column::Model => model = Some(field.to_string()),
                Column::Algorithm => algorithm = Some(field.parse().map_err(|e: Error| fail(e.to_string()))?),
                Column::Rounds => rounds = parse_opt::<usize>(field, "rounds").map_err(fail)?,
                Column::BatchSize => batch_size = parse_opt::<usize>(field, "batch size").map_err(fail)?,
                Column::Clients => row.clients = parse_opt(field, "clients").map_err(fail)?,
                Column::CFraction => row.c_fraction = parse_opt(field, "c_fraction").map_err(fail)?,
                Column::Skewness => row.skewness = parse_opt(field, "skewness").map_err(fail)?,
                Column::ClientEpochs => row.client_epochs = parse_opt(field, "client epochs").map_err(fail)?,
                Column::SmallSkew => row.small_skew = parse_bool(field).map_err(fail)?,
                Column::Seed => row.seed = parse_opt(field, "seed").map_err(fail)?.unwrap_or(0),
                Column::Mu => row.mu = parse_opt(field, "mu").map_err(fail)?.unwrap_or(DEFAULT_MU),
            }
        }
        row.model = model.filter(|m| !is_na(m)).ok_or_else(|| fail("model is required".into()))?;
        row.algorithm = algorithm.ok_or_else(|| fail("algorithm is required".into()))?;
        row.rounds = rounds.ok_or_else(|| fail("rounds is required".into()))?;
        row.batch_size = batch_size.ok_or_else(|| fail("batch size is required".into()))?;
        row.architecture().map_err(|e| fail(e.to_string()))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_config(path: &Path) -> Result<Vec<ExperimentRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::federation::Algorithm;

    #[test]
    fn parses_registry_row_with_na() {
        let text = format!("{CONFIG_HEADER}\nLeNet,Centralized,100,NA,4,NA,NA,NA,NA,3,0.01\n");
        let rows = parse_config(&text).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!(r.algorithm, Algorithm::Centralized);
        assert_eq!(r.clients, None);
        assert_eq!(r.small_skew, None);
        assert_eq!(r.seed, 3);
    }

    #[test]
    fn seed_and_mu_columns_are_optional() {
        let text = "model,algorithm,rounds,clients,batch_size,c_fraction,skewness,client_epochs,small_skew\n\
                    lenet,FedAvg,10,8,4,0.75,40,5,TRUE\n";
        let rows = parse_config(text).unwrap();
        assert_eq!(rows[0].seed, 0);
        assert_eq!(rows[0].mu, DEFAULT_MU);
        assert_eq!(rows[0].small_skew, Some(true));
        assert_eq!(rows[0].c_fraction, Some(0.75));
    }

    #[test]
    fn bad_values_report_their_row() {
        let text = format!("{CONFIG_HEADER}\nLeNet,FedAvg,100,8,4,0.5,40,5,TRUE,0,0.01\nLeNet,FedAvg,x,8,4,0.5,40,5,TRUE,0,0.01\n");
        match parse_config(&text) {
            Err(Error::Config { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_model_and_columns_rejected() {
        let text = format!("{CONFIG_HEADER}\nVGG,FedAvg,100,8,4,0.5,40,5,TRUE,0,0.01\n");
        assert!(parse_config(&text).is_err());
        assert!(parse_config("model,algorithm,rounds,batch_size,colour\n").is_err());
        assert!(parse_config("model,algorithm,rounds\n").is_err());
    }

    #[test]
    fn canonical_round_trips_through_the_parser() {
        let text = format!("{CONFIG_HEADER}\nAlexNet,BSP,100,8,4,0.5,40,5,TRUE,9,0.5\n");
        let row = parse_config(&text).unwrap().remove(0);
        let again = parse_config(&format!("{CONFIG_HEADER}\n{}\n", row.canonical()))
            .unwrap()
            .remove(0);
        assert_eq!(row, again);
    }
}
