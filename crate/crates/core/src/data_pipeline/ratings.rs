//! Ratings ingestion, count filtering and per-item historical scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{RATING_MAX, RATING_MIN};
use crate::error::{Error, Result};

/// Users and items with fewer ratings are dropped.
pub const MIN_RATINGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub timestamp: i64,
}

/// Maps a source file's columns onto `user_id,item_id,rating,timestamp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub user: String,
    pub item: String,
    pub rating: String,
    /// Missing timestamps are read as 0.
    pub timestamp: Option<String>,
    pub delimiter: char,
    /// Source rating scale, mapped linearly onto `[0, 5]`.
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            user: "user_id".into(),
            item: "item_id".into(),
            rating: "rating".into(),
            timestamp: Some("timestamp".into()),
            delimiter: ',',
            scale_min: RATING_MIN,
            scale_max: RATING_MAX,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingsDataset {
    pub ratings: Vec<Rating>,
}

impl RatingsDataset {
    pub fn new(ratings: Vec<Rating>) -> Self {
        Self { ratings }
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn user_counts(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for r in &self.ratings {
            *m.entry(r.user_id.as_str()).or_insert(0) += 1;
        }
        m
    }

    pub fn item_counts(&self) -> BTreeMap<&str, usize> {
        let mut m = BTreeMap::new();
        for r in &self.ratings {
            *m.entry(r.item_id.as_str()).or_insert(0) += 1;
        }
        m
    }

    pub fn read_csv(path: &Path, columns: &ColumnMap) -> Result<Self> {
        let parse_err = |detail: String| Error::Parse {
            path: path.to_path_buf(),
            detail,
        };
        if !(columns.scale_max > columns.scale_min) {
            return Err(Error::config("scale_max", "must exceed scale_min"));
        }
        let delimiter = u8::try_from(columns.delimiter)
            .map_err(|_| Error::config("delimiter", "must be a single-byte character"))?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| parse_err(e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| {
                parse_err(format!(
                    "missing column `{name}` (header: {})",
                    headers.iter().collect::<Vec<_>>().join(",")
                ))
            })
        };
        let (cu, ci, cr) = (
            col(&columns.user)?,
            col(&columns.item)?,
            col(&columns.rating)?,
        );
        let ct = columns.timestamp.as_deref().map(col).transpose()?;
        let span = columns.scale_max - columns.scale_min;

        let mut ratings = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| parse_err(format!("line {line}: {e}")))?;
            let field = |c: usize| {
                row.get(c)
                    .ok_or_else(|| parse_err(format!("line {line}: too few fields")))
            };
            let raw: f64 = field(cr)?.parse().map_err(|_| {
                parse_err(format!(
                    "line {line}: rating `{}` is not a number",
                    &row[cr]
                ))
            })?;
            if !(columns.scale_min..=columns.scale_max).contains(&raw) {
                return Err(parse_err(format!(
                    "line {line}: rating {raw} outside [{}, {}]",
                    columns.scale_min, columns.scale_max
                )));
            }
            let timestamp = match ct {
                Some(c) => field(c)?.parse().map_err(|_| {
                    parse_err(format!(
                        "line {line}: timestamp `{}` is not an integer",
                        &row[c]
                    ))
                })?,
                None => 0,
            };
            ratings.push(Rating {
                user_id: field(cu)?.to_string(),
                item_id: field(ci)?.to_string(),
                rating: RATING_MIN + (raw - columns.scale_min) / span * (RATING_MAX - RATING_MIN),
                timestamp,
            });
        }
        Ok(Self { ratings })
    }

    /// Writes the canonical `user_id,item_id,rating,timestamp` form.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file);
        let csv_err = |e: csv::Error| Error::Parse {
            path: path.to_path_buf(),
            detail: e.to_string(),
        };
        for r in &self.ratings {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Repeatedly drops users and items with fewer than `min_count` ratings until
/// nothing changes.
pub fn filter_dataset(raw: &RatingsDataset, min_count: usize) -> Result<RatingsDataset> {
    let mut current = raw.ratings.clone();
    loop {
        let data = RatingsDataset { ratings: current };
        let users: BTreeSet<String> = data
            .user_counts()
            .into_iter()
            .filter(|(_, n)| *n < min_count)
            .map(|(u, _)| u.to_string())
            .collect();
        let items: BTreeSet<String> = data
            .item_counts()
            .into_iter()
            .filter(|(_, n)| *n < min_count)
            .map(|(i, _)| i.to_string())
            .collect();
        current = data.ratings;
        if users.is_empty() && items.is_empty() {
            break;
        }
        current.retain(|r| !users.contains(&r.user_id) && !items.contains(&r.item_id));
    }
    if current.is_empty() {
        return Err(Error::EmptyDataset { min_count });
    }
    Ok(RatingsDataset { ratings: current })
}

/// Mean rating per item, `r*_a`.
pub fn historical_scores(data: &RatingsDataset) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in &data.ratings {
        let e = sums.entry(r.item_id.clone()).or_insert((0.0, 0));
        e.0 += r.rating;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub min_count: usize,
    pub raw_ratings: usize,
    pub raw_users: usize,
    pub raw_items: usize,
    pub ratings: usize,
    pub users: usize,
    pub items: usize,
}

impl FilterReport {
    pub fn new(raw: &RatingsDataset, filtered: &RatingsDataset, min_count: usize) -> Self {
        Self {
            min_count,
            raw_ratings: raw.len(),
            raw_users: raw.user_counts().len(),
            raw_items: raw.item_counts().len(),
            ratings: filtered.len(),
            users: filtered.user_counts().len(),
            items: filtered.item_counts().len(),
        }
    }
}
