use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::tasks::dataset::Dataset;

/// Retry budget for redrawing class proportions when a client ends up empty.
pub const MAX_PARTITION_RETRIES: usize = 100;

/// Disjoint per-client sample index lists covering a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    assignments: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates that the lists are nonempty, disjoint, and cover `0..num_samples`.
    pub fn new(assignments: Vec<Vec<usize>>, num_samples: usize) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::Empty("partition"));
        }
        let mut seen = vec![false; num_samples];
        for (n, list) in assignments.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::invalid(
                    "partition",
                    format!("client {n} has no samples"),
                ));
            }
            for &i in list {
                if i >= num_samples {
                    return Err(Error::invalid(
                        "partition",
                        format!("index {i} out of range"),
                    ));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::invalid(
                        "partition",
                        format!("index {i} assigned twice"),
                    ));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid("partition", format!("index {i} unassigned")));
        }
        Ok(Self { assignments })
    }

    pub fn num_clients(&self) -> usize {
        self.assignments.len()
    }

    pub fn client(&self, n: usize) -> &[usize] {
        &self.assignments[n]
    }

    pub fn clients(&self) -> &[Vec<usize>] {
        &self.assignments
    }
}

/// Shuffled near-equal split.
pub fn iid_partition<R: Rng + ?Sized>(
    num_samples: usize,
    n_clients: usize,
    rng: &mut R,
) -> Result<Partition> {
    check_counts(num_samples, n_clients)?;
    let mut idx: Vec<usize> = (0..num_samples).collect();
    idx.shuffle(rng);
    let base = num_samples / n_clients;
    let extra = num_samples % n_clients;
    let mut out = Vec::with_capacity(n_clients);
    let mut start = 0;
    for n in 0..n_clients {
        let len = base + usize::from(n < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Partition::new(out, num_samples)
}

fn check_counts(num_samples: usize, n_clients: usize) -> Result<()> {
    if num_samples == 0 {
        return Err(Error::Empty("dataset"));
    }
    if n_clients == 0 {
        return Err(Error::invalid("n_clients", "must be at least 1"));
    }
    if n_clients > num_samples {
        return Err(Error::invalid(
            "n_clients",
            format!("{n_clients} clients exceed {num_samples} samples"),
        ));
    }
    Ok(())
}

fn draw_proportions<R: Rng + ?Sized>(gamma: &Gamma<f64>, n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let s: f64 = g.iter().sum();
        if s > 0.0 && s.is_finite() {
            return g.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Splits `count` items by cumulative rounding of `props`.
fn allocate(count: usize, props: &[f64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(props.len());
    let mut cum = 0.0;
    let mut prev = 0usize;
    for (k, p) in props.iter().enumerate() {
        cum += p;
        let boundary = if k + 1 == props.len() {
            count
        } else {
            ((cum * count as f64).round() as usize).min(count)
        };
        let boundary = boundary.max(prev);
        out.push(boundary - prev);
        prev = boundary;
    }
    out
}

/// Label-skewed split: each class is divided among clients by an independent
/// symmetric Dirichlet(`concentration`) draw.
///
/// If some client receives no samples at all, the proportions of a randomly
/// chosen class are redrawn, up to [`MAX_PARTITION_RETRIES`] times.
pub fn dirichlet_partition<R: Rng + ?Sized>(
    dataset: &Dataset,
    n_clients: usize,
    concentration: f64,
    rng: &mut R,
) -> Result<Partition> {
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::invalid("dataset", "dirichlet partition needs class labels"))?;
    let num_classes = dataset.num_classes().unwrap_or(0);
    check_counts(dataset.len(), n_clients)?;
    if !(concentration.is_finite() && concentration > 0.0) {
        return Err(Error::invalid(
            "concentration",
            format!("{concentration} must be > 0"),
        ));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for members in &mut by_class {
        members.shuffle(rng);
    }

    if n_clients == 1 {
        return Partition::new(vec![(0..dataset.len()).collect()], dataset.len());
    }

    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::invalid("concentration", e.to_string()))?;
    let mut counts: Vec<Vec<usize>> = by_class
        .iter()
        .map(|members| allocate(members.len(), &draw_proportions(&gamma, n_clients, rng)))
        .collect();

    let populated: Vec<usize> = (0..num_classes)
        .filter(|&k| !by_class[k].is_empty())
        .collect();
    let client_total = |counts: &[Vec<usize>], n: usize| counts.iter().map(|c| c[n]).sum::<usize>();
    let mut retries = 0;
    while (0..n_clients).any(|n| client_total(&counts, n) == 0) {
        if retries == MAX_PARTITION_RETRIES {
            return Err(Error::PartitionFailed { retries });
        }
        retries += 1;
        let k = populated[rng.gen_range(0..populated.len())];
        counts[k] = allocate(by_class[k].len(), &draw_proportions(&gamma, n_clients, rng));
    }

    let mut out = vec![Vec::new(); n_clients];
    for (members, class_counts) in by_class.iter().zip(&counts) {
        let mut start = 0;
        for (n, &c) in class_counts.iter().enumerate() {
            out[n].extend_from_slice(&members[start..start + c]);
            start += c;
        }
    }
    for list in &mut out {
        list.sort_unstable();
    }
    Partition::new(out, dataset.len())
}

/// Per-client label histograms normalized to distributions.
pub fn client_label_distributions(dataset: &Dataset, partition: &Partition) -> Vec<Vec<f64>> {
    let labels = dataset.labels().unwrap_or(&[]);
    let k = dataset.num_classes().unwrap_or(0);
    partition
        .clients()
        .iter()
        .map(|idx| {
            let mut h = vec![0.0; k];
            for &i in idx {
                h[labels[i]] += 1.0;
            }
            let total = idx.len() as f64;
            h.iter_mut().for_each(|x| *x /= total);
            h
        })
        .collect()
}
