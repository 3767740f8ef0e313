//! Reading observations from CSV with header `y,z,v` or `y,z,v1,...,vd`.

use std::path::Path;

use ibounds::data::Sample;

use crate::error::{CliError, Result};

fn covariate_columns(headers: &[String]) -> Result<usize> {
    let bad = || {
        CliError::Data(format!(
            "header must be 'y,z,v' or 'y,z,v1,...,vd', got '{}'",
            headers.join(",")
        ))
    };
    if headers.len() < 3 || headers[0] != "y" || headers[1] != "z" {
        return Err(bad());
    }
    let rest = &headers[2..];
    if rest == ["v"] {
        return Ok(1);
    }
    for (j, h) in rest.iter().enumerate() {
        if *h != format!("v{}", j + 1) {
            return Err(bad());
        }
    }
    Ok(rest.len())
}

pub fn read_sample_from<R: std::io::Read>(reader: R) -> Result<Sample> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let d = covariate_columns(&headers)?;
    let (mut y, mut z, mut v) = (Vec::new(), Vec::new(), Vec::new());
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(CliError::Data(format!(
                "row {row}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        for (j, field) in record.iter().enumerate() {
            let x: f64 = field.parse().map_err(|_| {
                CliError::Data(format!("row {row}, column '{}': cannot parse '{field}' as a number", headers[j]))
            })?;
            if !x.is_finite() {
                return Err(CliError::Data(format!("row {row}, column '{}': value is not finite", headers[j])));
            }
            match j {
                0 => y.push(x),
                1 => z.push(x),
                _ => v.push(x),
            }
        }
    }
    if y.is_empty() {
        return Err(CliError::Data("no data rows".into()));
    }
    Ok(Sample::new(y, z, v, d)?)
}

pub fn read_sample(path: &Path) -> Result<Sample> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_sample_from(std::io::BufReader::new(file))
}
