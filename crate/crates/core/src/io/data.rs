//! Delimited data files and spatial supports named by a configuration.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::Mesh;
use crate::graph::GraphSupport;
use crate::models::{Dataset, Locations, SpatialSupport};

use super::config::{DataConfig, LocationColumns, SupportConfig};

/// Records and, when configured, the cross-validation group of each record.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub data: Dataset,
    pub groups: Option<Vec<usize>>,
}

pub fn load_support(cfg: &SupportConfig) -> Result<SpatialSupport> {
    Ok(match cfg {
        SupportConfig::Graph { adjacency, n_nodes, order } => SpatialSupport::Graph {
            graph: GraphSupport::read(adjacency, *n_nodes)?,
            k: *order,
        },
        SupportConfig::Mesh { path, alpha } => SpatialSupport::Mesh {
            mesh: Mesh::read(path)?,
            alpha: *alpha,
        },
    })
}

/// Tab-delimited when the header line holds a tab, comma-delimited otherwise.
fn delimiter(text: &str) -> u8 {
    match text.lines().next() {
        Some(h) if h.contains('\t') => b'\t',
        _ => b',',
    }
}

/// Reads the columns named in `cfg`. Values are checked for being numeric
/// here; family-specific checks happen when the model is built.
pub fn load_dataset(cfg: &DataConfig) -> Result<LoadedData> {
    let text = std::fs::read_to_string(&cfg.path).map_err(|e| Error::io(&cfg.path, e))?;
    parse_dataset(&text, cfg, &cfg.path)
}

pub fn parse_dataset(text: &str, cfg: &DataConfig, path: &Path) -> Result<LoadedData> {
    let parse_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter(text))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(parse_err)?.iter().map(String::from).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };

    let y_col = col(&cfg.response)?;
    let x_cols = cfg.covariates.iter().map(|c| col(c)).collect::<Result<Vec<_>>>()?;
    let loc_cols = match &cfg.locations {
        LocationColumns::Node { column, .. } => vec![col(column)?],
        LocationColumns::Coordinates { x, y } => vec![col(x)?, col(y)?],
    };
    let offset_col = cfg.offset.as_deref().map(col).transpose()?;
    let group_col = cfg.group.as_deref().map(col).transpose()?;

    let (mut y, mut x, mut nodes, mut points, mut offset) = (vec![], vec![], vec![], vec![], vec![]);
    let mut group_keys: HashMap<String, usize> = HashMap::new();
    let mut groups = vec![];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(parse_err)?;
        let row = r + 1;
        let num = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::NonNumeric {
                row,
                column: header[c].clone(),
                value: s.to_string(),
            })
        };
        y.push(num(y_col)?);
        let mut xr = Vec::with_capacity(x_cols.len() + 1);
        if cfg.intercept {
            xr.push(1.0);
        }
        for &c in &x_cols {
            xr.push(num(c)?);
        }
        x.push(xr);
        match &cfg.locations {
            LocationColumns::Node { base, .. } => {
                let c = loc_cols[0];
                let v = num(c)?;
                if v.fract() != 0.0 || v < *base as f64 {
                    return Err(Error::NonNumeric {
                        row,
                        column: header[c].clone(),
                        value: format!("{v} (expected a node index from {base})"),
                    });
                }
                nodes.push(v as usize - base);
            }
            LocationColumns::Coordinates { .. } => points.push([num(loc_cols[0])?, num(loc_cols[1])?]),
        }
        if let Some(c) = offset_col {
            offset.push(num(c)?);
        }
        if let Some(c) = group_col {
            let key = rec.get(c).unwrap_or("").to_string();
            let next = group_keys.len();
            groups.push(*group_keys.entry(key).or_insert(next));
        }
    }

    let mut covariates: Vec<String> = cfg.intercept.then(|| "intercept".to_string()).into_iter().collect();
    covariates.extend(cfg.covariates.iter().cloned());
    let locations = match cfg.locations {
        LocationColumns::Node { .. } => Locations::Nodes(nodes),
        LocationColumns::Coordinates { .. } => Locations::Points(points),
    };
    Ok(LoadedData {
        data: Dataset {
            y,
            x,
            covariates,
            locations,
            offset: offset_col.map(|_| offset),
        },
        groups: group_col.map(|_| groups),
    })
}
