use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::rng::{derive_seed, XorShift64Star};

/// The eight ODIR categories, in label order.
pub const ODIR_CLASSES: [&str; 8] = ["N", "D", "G", "C", "A", "H", "M", "O"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Eye {
    Left,
    Right,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl Split {
    pub const ASSIGNED: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "" | "unassigned" => Ok(Split::Unassigned),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

impl Eye {
    pub fn as_str(self) -> &'static str {
        match self {
            Eye::Left => "left",
            Eye::Right => "right",
            Eye::Unknown => "unknown",
        }
    }
}

impl FromStr for Eye {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Eye::Left),
            "right" | "r" => Ok(Eye::Right),
            "" | "unknown" => Ok(Eye::Unknown),
            other => Err(format!("unknown eye `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub image_path: String,
    pub eye: Eye,
    pub label: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(class_names: Vec<String>) -> Self {
        Self { samples: Vec::new(), class_names }
    }

    /// An empty dataset over the eight ODIR classes.
    pub fn odir() -> Self {
        Self::new(ODIR_CLASSES.iter().map(|s| s.to_string()).collect())
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_index(&self, token: &str) -> Option<usize> {
        let token = token.trim();
        self.class_names.iter().position(|c| c.eq_ignore_ascii_case(token))
    }

    /// Appends a sample given as manifest fields; `row` is used in errors.
    pub fn push_row(&mut self, row: usize, image_path: &str, eye: &str, label: &str, split: Option<&str>) -> Result<(), DataError> {
        if image_path.trim().is_empty() {
            return Err(DataError::BadRow { row, detail: "empty image_path".to_string() });
        }
        let label = self.class_index(label).ok_or_else(|| DataError::UnknownClass { row, token: label.to_string() })?;
        let eye = eye.parse().map_err(|detail| DataError::BadRow { row, detail })?;
        let split = split.unwrap_or("").parse().map_err(|detail| DataError::BadRow { row, detail })?;
        self.samples.push(Sample { image_path: image_path.trim().to_string(), eye, label, split });
        Ok(())
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_classes()];
        for s in &self.samples {
            c[s.label] += 1;
        }
        c
    }

    pub fn split_counts(&self, split: Split) -> Vec<usize> {
        let mut c = vec![0; self.num_classes()];
        for s in self.samples.iter().filter(|s| s.split == split) {
            c[s.label] += 1;
        }
        c
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }
}

/// Splits `n` items by `ratios`: floors first, then hands the leftover items
/// one each to the largest fractional parts, ties going to the earlier split.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact = ratios.map(|r| r * n as f64);
    let mut sizes = exact.map(|e| libm::floor(e + 1e-9) as usize);
    let assigned: usize = sizes.iter().sum();
    let mut order = [0usize, 1, 2];
    let frac = |i: usize| exact[i] - sizes[i] as f64;
    order.sort_by(|&a, &b| frac(b).partial_cmp(&frac(a)).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

fn check_ratios(ratios: [f64; 3]) -> Result<(), DataError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(DataError::BadRatios(ratios));
    }
    Ok(())
}

/// Assigns train/val/test splits deterministically.
///
/// Without stratification all samples are shuffled with `seed` and cut by
/// [`split_sizes`]. With stratification each class, in label order, is
/// shuffled with a seed derived from `(seed, class)` and cut on its own.
pub fn split_dataset(ds: &Dataset, ratios: [f64; 3], seed: u64, stratify: bool) -> Result<Dataset, DataError> {
    check_ratios(ratios)?;
    let mut out = ds.clone();
    let mut assign = |idx: &mut Vec<usize>, stream: u64| {
        XorShift64Star::new(derive_seed(seed, stream)).shuffle(idx);
        let sizes = split_sizes(idx.len(), ratios);
        let mut cursor = 0;
        for (split, size) in Split::ASSIGNED.iter().zip(sizes) {
            for &i in &idx[cursor..cursor + size] {
                out.samples[i].split = *split;
            }
            cursor += size;
        }
    };
    if stratify {
        let splits = ratios.iter().filter(|r| **r > 0.0).count();
        for class in 0..ds.num_classes() {
            let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples[i].label == class).collect();
            if !idx.is_empty() && idx.len() < splits {
                return Err(DataError::ClassTooSmall { class: ds.class_names[class].clone(), count: idx.len(), splits });
            }
            assign(&mut idx, class as u64);
        }
    } else {
        let mut idx: Vec<usize> = (0..ds.len()).collect();
        assign(&mut idx, u64::MAX);
    }
    Ok(out)
}

/// Keeps samples whose class is in either set and relabels them 1 (positive)
/// or 0 (negative). Class names become the `+`-joined member names.
pub fn binary_task_filter(ds: &Dataset, positive: &[usize], negative: &[usize]) -> Result<Dataset, DataError> {
    if positive.is_empty() || negative.is_empty() {
        return Err(DataError::EmptyClassSet);
    }
    let name = |c: usize| ds.class_names.get(c).cloned().unwrap_or_else(|| format!("#{c}"));
    for &c in positive.iter().chain(negative) {
        if c >= ds.num_classes() {
            return Err(DataError::Config(format!("class index {c} out of range")));
        }
    }
    if let Some(&c) = positive.iter().find(|c| negative.contains(c)) {
        return Err(DataError::OverlappingClasses(name(c)));
    }
    let join = |set: &[usize]| set.iter().map(|&c| name(c)).collect::<Vec<_>>().join("+");
    let samples = ds
        .samples
        .iter()
        .filter_map(|s| {
            let label = if positive.contains(&s.label) {
                1
            } else if negative.contains(&s.label) {
                0
            } else {
                return None;
            };
            Some(Sample { label, ..s.clone() })
        })
        .collect();
    Ok(Dataset { samples, class_names: vec![join(negative), join(positive)] })
}
