use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::space::FeatureSpace;

use super::{digest, Predictor, TableRow};

/// Lookup model over a fully categorical input space.
#[derive(Debug, Clone, PartialEq)]
pub struct TableModel {
    cardinalities: Vec<usize>,
    n_outputs: usize,
    table: HashMap<Vec<usize>, Vec<f64>>,
}

impl TableModel {
    /// Builds a table from level codes. The table must be total over the
    /// product of `cardinalities`.
    pub fn new(cardinalities: Vec<usize>, entries: Vec<(Vec<usize>, Vec<f64>)>) -> Result<Self> {
        let n_outputs = entries.first().map(|(_, out)| out.len()).unwrap_or(0);
        if n_outputs == 0 {
            return Err(Error::ModelSpec("table model needs rows with outputs".into()));
        }
        let mut table = HashMap::with_capacity(entries.len());
        for (key, out) in entries {
            if key.len() != cardinalities.len()
                || key.iter().zip(&cardinalities).any(|(k, n)| k >= n)
            {
                return Err(Error::ModelSpec(format!("table key {key:?} is outside the space")));
            }
            if out.len() != n_outputs || out.iter().any(|v| !v.is_finite()) {
                return Err(Error::ModelSpec(format!(
                    "table row {key:?} must have {n_outputs} finite outputs"
                )));
            }
            if table.insert(key.clone(), out).is_some() {
                return Err(Error::ModelSpec(format!("duplicate table row {key:?}")));
            }
        }
        let total: usize = cardinalities.iter().product();
        if table.len() != total {
            let missing = first_missing(&cardinalities, &table);
            return Err(Error::ModelSpec(format!(
                "table is not total: {} of {total} input tuples defined, missing {missing:?}",
                table.len()
            )));
        }
        Ok(Self {
            cardinalities,
            n_outputs,
            table,
        })
    }

    /// Builds a table from rows keyed by level names.
    pub fn from_rows(space: &FeatureSpace, rows: &[TableRow]) -> Result<Self> {
        let cardinalities = space.categorical_cardinalities().ok_or_else(|| {
            Error::ModelSpec("table models require every feature to be categorical".into())
        })?;
        let entries = rows
            .iter()
            .map(|row| {
                if row.inputs.len() != space.len() {
                    return Err(Error::ModelSpec(format!(
                        "table row {:?} has {} inputs, space has {}",
                        row.inputs,
                        row.inputs.len(),
                        space.len()
                    )));
                }
                let key = row
                    .inputs
                    .iter()
                    .enumerate()
                    .map(|(i, level)| {
                        let feature = space.feature(i);
                        feature
                            .levels()
                            .and_then(|ls| ls.iter().position(|l| l == level))
                            .ok_or_else(|| Error::UnknownLevel {
                                feature: feature.name().to_string(),
                                level: level.clone(),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((key, row.outputs.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(cardinalities, entries)
    }

    fn key(&self, position: usize, x: &[f64]) -> Result<Vec<usize>> {
        x.iter()
            .zip(&self.cardinalities)
            .map(|(v, n)| {
                if v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < *n {
                    Ok(*v as usize)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "table model input {position} has invalid level code {v}"
                    )))
                }
            })
            .collect()
    }
}

fn first_missing(cardinalities: &[usize], table: &HashMap<Vec<usize>, Vec<f64>>) -> Vec<usize> {
    let mut key = vec![0; cardinalities.len()];
    loop {
        if !table.contains_key(&key) {
            return key;
        }
        let mut pos = key.len();
        loop {
            if pos == 0 {
                return Vec::new();
            }
            pos -= 1;
            key[pos] += 1;
            if key[pos] < cardinalities[pos] {
                break;
            }
            key[pos] = 0;
        }
    }
}

impl Predictor for TableModel {
    fn n_inputs(&self) -> usize {
        self.cardinalities.len()
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        inputs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let key = self.key(i, x)?;
                Ok(self.table[&key].clone())
            })
            .collect()
    }

    fn fingerprint(&self) -> String {
        let mut rows: Vec<String> = self
            .table
            .iter()
            .map(|(k, v)| format!("{k:?}={v:?}"))
            .collect();
        rows.sort();
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        format!("table-{}", digest(&refs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::batch_predict;
    use crate::space::FeatureDescriptor;

    fn color_space() -> FeatureSpace {
        FeatureSpace::new(vec![FeatureDescriptor::categorical("color", ["red", "blue"]).unwrap()])
            .unwrap()
    }

    fn row(inputs: &[&str], outputs: &[f64]) -> TableRow {
        TableRow {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs: outputs.to_vec(),
        }
    }

    #[test]
    fn lookup() {
        let m = TableModel::from_rows(
            &color_space(),
            &[row(&["red"], &[0.2]), row(&["blue"], &[0.9])],
        )
        .unwrap();
        assert_eq!(batch_predict(&m, &[vec![1.0]]).unwrap(), vec![vec![0.9]]);
    }

    #[test]
    fn totality_is_enforced() {
        let err = TableModel::from_rows(&color_space(), &[row(&["red"], &[0.2])]).unwrap_err();
        assert!(err.to_string().contains("not total"), "{err}");
        assert!(err.to_string().contains("[1]"), "{err}");
    }

    #[test]
    fn duplicate_and_unknown_rows() {
        let dup = TableModel::from_rows(
            &color_space(),
            &[row(&["red"], &[0.2]), row(&["red"], &[0.3]), row(&["blue"], &[0.9])],
        );
        assert!(dup.is_err());
        let unknown = TableModel::from_rows(&color_space(), &[row(&["green"], &[0.2])]);
        assert!(matches!(unknown, Err(Error::UnknownLevel { .. })));
    }

    #[test]
    fn continuous_space_rejected() {
        let space =
            FeatureSpace::new(vec![FeatureDescriptor::continuous("x", 0.0, 1.0).unwrap()]).unwrap();
        assert!(TableModel::from_rows(&space, &[]).is_err());
    }

    #[test]
    fn bad_codes_are_errors() {
        let m = TableModel::new(vec![2], vec![(vec![0], vec![0.0]), (vec![1], vec![1.0])]).unwrap();
        assert!(batch_predict(&m, &[vec![0.5]]).is_err());
        assert!(batch_predict(&m, &[vec![2.0]]).is_err());
    }
}
