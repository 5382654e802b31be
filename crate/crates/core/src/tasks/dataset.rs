use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::param::check_finite;

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Unlabeled samples (quadratic tasks read only the features).
    None,
    Real(Vec<f64>),
    Class {
        labels: Vec<usize>,
        num_classes: usize,
    },
}

/// Row-major `M x p` feature matrix with per-row targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    num_features: usize,
    num_samples: usize,
    targets: Targets,
}

impl Dataset {
    pub fn new(features: Vec<f64>, num_features: usize, targets: Targets) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::invalid("num_features", "must be positive"));
        }
        if !features.len().is_multiple_of(num_features) {
            return Err(Error::invalid(
                "features",
                format!(
                    "{} values do not form rows of {num_features}",
                    features.len()
                ),
            ));
        }
        check_finite(&features)?;
        let num_samples = features.len() / num_features;
        match &targets {
            Targets::None => {}
            Targets::Real(y) => {
                if y.len() != num_samples {
                    return Err(Error::DimensionMismatch {
                        expected: num_samples,
                        found: y.len(),
                    });
                }
                check_finite(y)?;
            }
            Targets::Class {
                labels,
                num_classes,
            } => {
                if labels.len() != num_samples {
                    return Err(Error::DimensionMismatch {
                        expected: num_samples,
                        found: labels.len(),
                    });
                }
                if *num_classes == 0 {
                    return Err(Error::invalid("num_classes", "must be positive"));
                }
                if let Some(bad) = labels.iter().find(|&&l| l >= *num_classes) {
                    return Err(Error::invalid(
                        "label",
                        format!("{bad} out of range for {num_classes} classes"),
                    ));
                }
            }
        }
        Ok(Self {
            features,
            num_features,
            num_samples,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.num_samples
    }

    pub fn is_empty(&self) -> bool {
        self.num_samples == 0
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Class { labels, .. } => Some(labels),
            _ => None,
        }
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Class { num_classes, .. } => Some(*num_classes),
            _ => None,
        }
    }

    pub fn real_target(&self, i: usize) -> f64 {
        match &self.targets {
            Targets::Real(y) => y[i],
            _ => 0.0,
        }
    }

    /// Largest absolute feature value, 0 for an empty dataset.
    pub fn max_abs_feature(&self) -> f64 {
        self.features.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Copy of the dataset with a constant-1 column appended.
    pub fn with_bias_column(&self) -> Self {
        let p = self.num_features;
        let mut features = Vec::with_capacity(self.num_samples * (p + 1));
        for i in 0..self.num_samples {
            features.extend_from_slice(self.row(i));
            features.push(1.0);
        }
        Self {
            features,
            num_features: p + 1,
            num_samples: self.num_samples,
            targets: self.targets.clone(),
        }
    }
}

/// Parameters of the synthetic Gaussian-mixture classification generator.
#[derive(Debug, Clone, Copy)]
pub struct MixtureSpec {
    pub num_classes: usize,
    pub num_features: usize,
    pub train_size: usize,
    pub test_size: usize,
    /// Standard deviation of each class-mean coordinate.
    pub separation: f64,
    /// Within-class standard deviation.
    pub noise: f64,
    pub bias: bool,
}

/// Balanced Gaussian-mixture classification data: `(train, test)`, both drawn
/// from the same class means.
pub fn gaussian_mixture<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    if spec.num_classes < 2 {
        return Err(Error::invalid("num_classes", "need at least 2 classes"));
    }
    let p = spec.num_features;
    let means: Vec<f64> = (0..spec.num_classes * p)
        .map(|_| spec.separation * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let draw = |size: usize, rng: &mut R| -> Result<Dataset> {
        let mut labels: Vec<usize> = (0..size).map(|i| i % spec.num_classes).collect();
        labels.shuffle(rng);
        let mut features = Vec::with_capacity(size * p);
        for &y in &labels {
            for j in 0..p {
                features.push(means[y * p + j] + spec.noise * rng.sample::<f64, _>(StandardNormal));
            }
        }
        let ds = Dataset::new(
            features,
            p,
            Targets::Class {
                labels,
                num_classes: spec.num_classes,
            },
        )?;
        Ok(if spec.bias { ds.with_bias_column() } else { ds })
    };
    let train = draw(spec.train_size, rng)?;
    let test = draw(spec.test_size, rng)?;
    Ok((train, test))
}

/// `y = <w*, x> + noise * z` with `w*`, `x` standard normal.
pub fn linear_regression<R: Rng + ?Sized>(
    num_features: usize,
    size: usize,
    noise: f64,
    rng: &mut R,
) -> Result<Dataset> {
    let truth: Vec<f64> = (0..num_features)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let mut features = Vec::with_capacity(size * num_features);
    let mut y = Vec::with_capacity(size);
    for _ in 0..size {
        let row: Vec<f64> = (0..num_features)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        let z: f64 = rng.sample(StandardNormal);
        y.push(row.iter().zip(&truth).map(|(a, b)| a * b).sum::<f64>() + noise * z);
        features.extend(row);
    }
    Dataset::new(features, num_features, Targets::Real(y))
}

/// Unlabeled centers `c_i ~ Normal(0, spread^2 I)` for quadratic objectives.
pub fn quadratic_centers<R: Rng + ?Sized>(
    dim: usize,
    size: usize,
    spread: f64,
    rng: &mut R,
) -> Result<Dataset> {
    let features = (0..dim * size)
        .map(|_| spread * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::new(features, dim, Targets::None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    Class,
    Real,
}

/// Reads a UTF-8 CSV with a header row, one sample per row, label in the last
/// column. Class labels must be nonnegative integers; the class count is
/// `max label + 1` unless `num_classes` is given.
pub fn load_csv(
    path: &Path,
    label_kind: LabelKind,
    num_classes: Option<usize>,
    feature_scale: f64,
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Config(format!("{}: {other:?}", path.display())),
        })?;
    let width = reader.headers()?.len();
    if width < 2 {
        return Err(Error::Config(format!(
            "{}: need at least one feature column and a label column",
            path.display()
        )));
    }
    let num_features = width - 1;
    let mut features = Vec::new();
    let mut real = Vec::new();
    let mut classes = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| {
                Error::Config(format!(
                    "{}: row {}: bad number {s:?}",
                    path.display(),
                    line + 2
                ))
            })
        };
        for field in record.iter().take(num_features) {
            features.push(parse(field)? * feature_scale);
        }
        let label = &record[num_features];
        match label_kind {
            LabelKind::Real => real.push(parse(label)?),
            LabelKind::Class => classes.push(label.trim().parse::<usize>().map_err(|_| {
                Error::Config(format!(
                    "{}: row {}: class label {label:?} is not a nonnegative integer",
                    path.display(),
                    line + 2
                ))
            })?),
        }
    }
    let targets = match label_kind {
        LabelKind::Real => Targets::Real(real),
        LabelKind::Class => {
            let k = num_classes.unwrap_or_else(|| classes.iter().max().map_or(0, |m| m + 1));
            Targets::Class {
                labels: classes,
                num_classes: k.max(1),
            }
        }
    };
    Dataset::new(features, num_features, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], 2, Targets::None).is_err());
        assert!(Dataset::new(vec![1.0, f64::INFINITY], 2, Targets::None).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], 2, Targets::Real(vec![])).is_err());
        assert!(Dataset::new(
            vec![1.0, 2.0],
            2,
            Targets::Class {
                labels: vec![3],
                num_classes: 2
            }
        )
        .is_err());
    }

    #[test]
    fn mixture_is_balanced_and_biased() {
        let spec = MixtureSpec {
            num_classes: 4,
            num_features: 3,
            train_size: 40,
            test_size: 8,
            separation: 1.0,
            noise: 0.5,
            bias: true,
        };
        let (train, test) = gaussian_mixture(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(train.num_features(), 4);
        assert_eq!(train.len(), 40);
        assert_eq!(test.len(), 8);
        let mut counts = [0; 4];
        for &l in train.labels().unwrap() {
            counts[l] += 1;
        }
        assert_eq!(counts, [10; 4]);
        assert!((0..40).all(|i| train.row(i)[3] == 1.0));
    }

    #[test]
    fn csv_loader_reads_final_column_as_label() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,b,label").unwrap();
        writeln!(f, "1.5,2,0").unwrap();
        writeln!(f, "-3,4e-1,2").unwrap();
        let ds = load_csv(f.path(), LabelKind::Class, None, 0.5).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.row(1), &[-1.5, 0.2]);
        assert_eq!(ds.labels().unwrap(), &[0, 2]);
        assert_eq!(ds.num_classes(), Some(3));

        let ds = load_csv(f.path(), LabelKind::Real, None, 1.0).unwrap();
        assert_eq!(ds.real_target(1), 2.0);
    }

    #[test]
    fn csv_loader_rejects_bad_rows() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "a,label").unwrap();
        writeln!(f, "x,1").unwrap();
        assert!(matches!(
            load_csv(f.path(), LabelKind::Class, None, 1.0),
            Err(Error::Config(_))
        ));
        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "a,label").unwrap();
        writeln!(g, "1,-1").unwrap();
        assert!(load_csv(g.path(), LabelKind::Class, None, 1.0).is_err());
    }
}
