//! Saved curve and influence weights, reloadable for critical-value
//! diagnostics.
//!
//! Layout: `# key = value` metadata lines, then CSV with columns
//! `v1..vd,theta_hat,se,in_set,w1..wr`.

use std::path::Path;

use ibounds::argmin::ArgminSet;
use ibounds::data::{BoundCurve, EstimatorKind, EvaluationGrid, InfluenceWeights, Side, Smoothing};
use ibounds::nalgebra::DMatrix;

use crate::error::{CliError, Result};
use crate::output::num;

pub struct Artifact {
    pub curve: BoundCurve,
    pub weights: InfluenceWeights,
    pub set: ArgminSet,
}

fn kind_str(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::Discrete => "discrete",
        EstimatorKind::Series => "series",
        EstimatorKind::LocalLinear => "local-linear",
    }
}

fn smoothing_str(s: Smoothing) -> String {
    match s {
        Smoothing::None => "none".into(),
        Smoothing::Terms(k) => format!("terms:{k}"),
        Smoothing::Bandwidth(h) => format!("bandwidth:{h}"),
    }
}

pub fn render(curve: &BoundCurve, weights: &InfluenceWeights, set: &ArgminSet) -> String {
    let grid = &curve.grid;
    let grid_kind = if curve.kind == EstimatorKind::Discrete { "discrete" } else { "uniform" };
    let mut out = String::new();
    out.push_str(&format!("# side = {}\n", curve.side.as_str()));
    out.push_str(&format!("# n = {}\n", curve.n));
    out.push_str(&format!("# estimator = {}\n", kind_str(curve.kind)));
    out.push_str(&format!("# smoothing = {}\n", smoothing_str(curve.smoothing)));
    out.push_str(&format!("# scale = {}\n", weights.scale));
    out.push_str(&format!("# grid = {grid_kind}\n"));
    let d = grid.dim();
    let mut header: Vec<String> = (1..=d).map(|j| format!("v{j}")).collect();
    header.extend(["theta_hat", "se", "in_set"].map(String::from));
    header.extend((1..=weights.dim()).map(|j| format!("w{j}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..curve.len() {
        let mut row: Vec<String> = grid.point(i).iter().map(|&x| num(Some(x))).collect();
        row.push(num(Some(curve.theta_hat[i])));
        row.push(num(Some(curve.se[i])));
        row.push(if set.contains(i) { "1".into() } else { "0".into() });
        row.extend(weights.vectors.row(i).iter().map(|&x| num(Some(x))));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn meta<'a>(pairs: &'a [(String, String)], key: &str) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| CliError::Data(format!("artifact is missing '# {key} = ...'")))
}

fn bad(what: &str) -> CliError {
    CliError::Data(format!("artifact has an invalid {what}"))
}

pub fn parse(text: &str) -> Result<Artifact> {
    let mut pairs = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let side = match meta(&pairs, "side")? {
        "lower" => Side::Lower,
        "upper" => Side::Upper,
        _ => return Err(bad("side")),
    };
    let n: usize = meta(&pairs, "n")?.parse().map_err(|_| bad("n"))?;
    let kind = match meta(&pairs, "estimator")? {
        "discrete" => EstimatorKind::Discrete,
        "series" => EstimatorKind::Series,
        "local-linear" => EstimatorKind::LocalLinear,
        _ => return Err(bad("estimator")),
    };
    let smoothing = match meta(&pairs, "smoothing")?.split_once(':') {
        None => Smoothing::None,
        Some(("terms", k)) => Smoothing::Terms(k.parse().map_err(|_| bad("smoothing"))?),
        Some(("bandwidth", h)) => Smoothing::Bandwidth(h.parse().map_err(|_| bad("smoothing"))?),
        Some(_) => return Err(bad("smoothing")),
    };
    let scale: f64 = meta(&pairs, "scale")?.parse().map_err(|_| bad("scale"))?;
    let grid_kind = meta(&pairs, "grid")?;

    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let headers: Vec<String> = rdr.headers().map_err(|e| CliError::Data(e.to_string()))?.iter().map(String::from).collect();
    let d = headers.iter().take_while(|h| h.starts_with('v')).count();
    let r = headers.len().saturating_sub(d + 3);
    if d == 0 || r == 0 || headers.get(d).map(String::as_str) != Some("theta_hat") {
        return Err(bad("header"));
    }
    let (mut points, mut theta, mut se, mut members, mut w) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("artifact row {}: {e}", i + 1)))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| CliError::Data(format!("artifact row {}: non-numeric field", i + 1)))?;
        points.push(vals[..d].to_vec());
        theta.push(vals[d]);
        se.push(vals[d + 1]);
        if vals[d + 2] != 0.0 {
            members.push(i);
        }
        w.extend_from_slice(&vals[d + 3..]);
    }
    let g = theta.len();
    let grid = match grid_kind {
        "discrete" => EvaluationGrid::discrete(points)?,
        "uniform" if d == 1 && g >= 2 => EvaluationGrid::uniform(points[0][0], points[g - 1][0], g)?,
        _ => return Err(bad("grid")),
    };
    let curve = BoundCurve::new(grid, theta, se, side, n, smoothing, kind)?;
    let weights = InfluenceWeights::new(DMatrix::from_row_slice(g, r, &w), scale);
    weights.validate(&curve)?;
    let mut set = ArgminSet::full(&curve);
    if members.is_empty() {
        return Err(CliError::Data("artifact marks no grid point as a set member".into()));
    }
    set.indices = members;
    Ok(Artifact { curve, weights, set })
}

pub fn load(path: &Path) -> Result<Artifact> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let grid = EvaluationGrid::uniform(0.0, 1.0, 3).unwrap();
        let curve = BoundCurve::new(
            grid,
            vec![1.0, 0.5, 0.25],
            vec![0.1, 0.2, 0.3],
            Side::Upper,
            40,
            Smoothing::Bandwidth(0.3),
            EstimatorKind::LocalLinear,
        )
        .unwrap();
        let weights = InfluenceWeights::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 2.0]), 3.5);
        let mut set = ArgminSet::full(&curve);
        set.indices = vec![1, 2];
        let back = parse(&render(&curve, &weights, &set)).unwrap();
        assert_eq!(back.curve, curve);
        assert_eq!(back.weights, weights);
        assert_eq!(back.set.indices, vec![1, 2]);
    }
}
