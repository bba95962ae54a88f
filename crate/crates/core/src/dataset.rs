//! Multivariate time series containers, file formats, and dataset transforms.
//!
//! A dataset holds `n` series, each a `d x T` grid of values where `T` may
//! differ between series. Missing values are `f64::NAN` everywhere in this
//! crate; [`is_missing`] is the only sanctioned test for them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Marker used for missing values.
pub const MISSING: f64 = f64::NAN;

/// True when `v` is the missing-value marker.
#[inline]
pub fn is_missing(v: f64) -> bool {
    v.is_nan()
}

// ---------------------------------------------------------------------------
// Core containers
// ---------------------------------------------------------------------------

/// One multivariate time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    /// Unique integer id within its dataset.
    pub id: i64,
    /// `values[dim][t]`; all dimensions share one length.
    pub values: Vec<Vec<f64>>,
    /// Class index into the dataset's `class_names`; `None` for unlabeled data.
    pub label: Option<usize>,
}

impl Series {
    /// Number of timestamps.
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A collection of series sharing a dimension count and class dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MTSDataset {
    pub series: Vec<Series>,
    /// Class names; series labels index into this list.
    pub class_names: Vec<String>,
    pub n_dims: usize,
}

impl MTSDataset {
    /// Validates the dataset invariants: at least one dimension, equal
    /// dimension lengths within each series, unique ids, labels in range.
    pub fn new(series: Vec<Series>, class_names: Vec<String>, n_dims: usize) -> Result<Self> {
        if n_dims == 0 {
            return Err(Error::invalid("dataset must have at least one dimension"));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &series {
            if !seen.insert(s.id) {
                return Err(Error::invalid(format!("duplicate series id {}", s.id)));
            }
            if s.values.len() != n_dims {
                return Err(Error::dims(format!(
                    "series {} has {} dimensions, expected {}",
                    s.id,
                    s.values.len(),
                    n_dims
                )));
            }
            let t = s.len();
            if t == 0 {
                return Err(Error::invalid(format!("series {} is empty", s.id)));
            }
            if s.values.iter().any(|dim| dim.len() != t) {
                return Err(Error::invalid(format!(
                    "series {} has dimensions of unequal length",
                    s.id
                )));
            }
            if let Some(l) = s.label {
                if l >= class_names.len() {
                    return Err(Error::invalid(format!(
                        "series {} has label {} but only {} classes are declared",
                        s.id,
                        l,
                        class_names.len()
                    )));
                }
            }
        }
        Ok(MTSDataset { series, class_names, n_dims })
    }

    /// Longest series length.
    pub fn max_length(&self) -> usize {
        self.series.iter().map(Series::len).max().unwrap_or(0)
    }

    /// Labels of all series; errors if any series is unlabeled.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.series
            .iter()
            .map(|s| {
                s.label
                    .ok_or_else(|| Error::invalid(format!("series {} has no class label", s.id)))
            })
            .collect()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Flat window table produced by [`transform_windows`].
///
/// Row `r` is one window: column `dim * w + t` holds dimension `dim` at
/// offset `t` from the window start (attribute-major layout). Every row
/// carries the id, start, and label of its source series.
#[derive(Debug, Clone)]
pub struct WindowTable {
    pub table: Matrix,
    pub mts_ids: Vec<i64>,
    pub window_starts: Vec<usize>,
    pub labels: Vec<Option<usize>>,
    pub w: usize,
    pub n_dims: usize,
}

impl WindowTable {
    pub fn n_rows(&self) -> usize {
        self.table.n_rows()
    }

    /// Labels of all rows; errors if any source series was unlabeled.
    pub fn labels_required(&self) -> Result<Vec<usize>> {
        self.labels
            .iter()
            .enumerate()
            .map(|(r, l)| {
                l.ok_or_else(|| {
                    Error::invalid(format!("window row {r} comes from an unlabeled series"))
                })
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Window transform
// ---------------------------------------------------------------------------

/// Slides a length-`w` window over every series and stacks the windows into
/// a flat table.
///
/// A series of length `T >= w` yields `T - w + 1` rows (stride 1). A shorter
/// series yields a single row, zero-padded past its end; missing markers
/// inside the observed range are preserved. Rows are ordered by series id,
/// then window start.
pub fn transform_windows(data: &MTSDataset, w: usize) -> Result<WindowTable> {
    if w == 0 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    let mut order: Vec<usize> = (0..data.series.len()).collect();
    order.sort_by_key(|&i| data.series[i].id);

    let d = data.n_dims;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut mts_ids = Vec::new();
    let mut window_starts = Vec::new();
    let mut labels = Vec::new();

    for &i in &order {
        let s = &data.series[i];
        let t_len = s.len();
        let n_windows = if t_len >= w { t_len - w + 1 } else { 1 };
        for start in 0..n_windows {
            let mut row = vec![0.0; d * w];
            for (dim, dim_values) in s.values.iter().enumerate() {
                for t in 0..w {
                    let src = start + t;
                    row[dim * w + t] = if src < t_len { dim_values[src] } else { 0.0 };
                }
            }
            rows.push(row);
            mts_ids.push(s.id);
            window_starts.push(start);
            labels.push(s.label);
        }
    }

    Ok(WindowTable {
        table: Matrix::from_rows(&rows),
        mts_ids,
        window_starts,
        labels,
        w,
        n_dims: d,
    })
}

// ---------------------------------------------------------------------------
// UEA .ts format
// ---------------------------------------------------------------------------

/// Parses the `.ts` time-series format: `@`-prefixed header directives
/// followed by `@data`, one series per line, dimensions separated by `:`,
/// values comma-separated, `?` for missing. With `@classLabel true <names>`
/// the last `:`-section of each line is the class label.
pub fn parse_ts(content: &str) -> Result<MTSDataset> {
    let mut n_dims: Option<usize> = None;
    let mut class_names: Option<Vec<String>> = None;
    let mut labeled = false;
    let mut in_data = false;

    let mut series = Vec::new();

    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_data {
            if let Some(rest) = line.strip_prefix('@') {
                let mut parts = rest.split_whitespace();
                let directive = parts.next().unwrap_or("").to_ascii_lowercase();
                match directive.as_str() {
                    "data" => in_data = true,
                    "dimensions" => {
                        let v = parts
                            .next()
                            .ok_or_else(|| Error::parse(line_no, "@dimensions needs a value"))?;
                        let d: usize = v.parse().map_err(|_| {
                            Error::parse(line_no, format!("@dimensions is not an integer: {v}"))
                        })?;
                        if d == 0 {
                            return Err(Error::parse(line_no, "@dimensions must be at least 1"));
                        }
                        n_dims = Some(d);
                    }
                    "classlabel" => {
                        let flag = parts
                            .next()
                            .ok_or_else(|| Error::parse(line_no, "@classLabel needs true/false"))?;
                        match flag.to_ascii_lowercase().as_str() {
                            "true" => {
                                labeled = true;
                                let names: Vec<String> =
                                    parts.map(str::to_string).collect();
                                if names.is_empty() {
                                    return Err(Error::parse(
                                        line_no,
                                        "@classLabel true requires class names",
                                    ));
                                }
                                class_names = Some(names);
                            }
                            "false" => {
                                labeled = false;
                                class_names = Some(Vec::new());
                            }
                            other => {
                                return Err(Error::parse(
                                    line_no,
                                    format!("@classLabel must be true or false, got {other}"),
                                ))
                            }
                        }
                    }
                    // Other directives (problemName, equalLength, ...) carry no
                    // information this loader needs.
                    _ => {}
                }
            } else {
                return Err(Error::parse(line_no, "expected @ directive before @data"));
            }
            continue;
        }

        // Data line.
        let d = n_dims.ok_or_else(|| Error::parse(line_no, "missing @dimensions header"))?;
        let names = class_names
            .as_ref()
            .ok_or_else(|| Error::parse(line_no, "missing @classLabel header"))?;
        let sections: Vec<&str> = line.split(':').collect();
        let expected = if labeled { d + 1 } else { d };
        if sections.len() != expected {
            return Err(Error::parse(
                line_no,
                format!("expected {expected} ':'-separated sections, found {}", sections.len()),
            ));
        }
        let label = if labeled {
            let name = sections[d].trim();
            let idx = names.iter().position(|n| n == name).ok_or_else(|| {
                Error::parse(line_no, format!("unknown class label: {name}"))
            })?;
            Some(idx)
        } else {
            None
        };
        let mut values = Vec::with_capacity(d);
        for section in &sections[..d] {
            let dim: Vec<f64> = section
                .split(',')
                .map(|tok| parse_value(tok.trim(), line_no))
                .collect::<Result<_>>()?;
            values.push(dim);
        }
        let t = values[0].len();
        if values.iter().any(|v| v.len() != t) {
            return Err(Error::parse(line_no, "dimensions have unequal lengths"));
        }
        series.push(Series { id: series.len() as i64, values, label });
    }

    if !in_data {
        return Err(Error::parse(content.lines().count(), "missing @data section"));
    }
    let d = n_dims.ok_or_else(|| Error::parse(1, "missing @dimensions header"))?;
    let names =
        class_names.ok_or_else(|| Error::parse(1, "missing @classLabel header"))?;
    MTSDataset::new(series, names, d)
}

fn parse_value(token: &str, line_no: usize) -> Result<f64> {
    if token == "?" {
        return Ok(MISSING);
    }
    token
        .parse::<f64>()
        .map_err(|_| Error::parse(line_no, format!("not a number: {token}")))
}

// ---------------------------------------------------------------------------
// Long CSV format
// ---------------------------------------------------------------------------

/// Parses the long CSV layout: header `MTS_ID,Timestamp,Attribute1..AttributeD,Class`,
/// one row per timestamp, empty attribute cells for missing values, empty
/// class cells for unlabeled series. Timestamps must be strictly increasing
/// within each MTS_ID; class names are indexed in order of first appearance.
/// A file with only the header parses as an empty dataset.
pub fn parse_long_csv(content: &str) -> Result<MTSDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(content.as_bytes());

    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| Error::parse(1, e.to_string()))?,
        None => return Err(Error::parse(1, "empty file")),
    };
    let width = header.len();
    if width < 4 || &header[0] != "MTS_ID" || &header[1] != "Timestamp" || &header[width - 1] != "Class"
    {
        return Err(Error::parse(
            1,
            "header must be MTS_ID,Timestamp,Attribute1..AttributeD,Class",
        ));
    }
    let n_dims = width - 3;
    for dim in 0..n_dims {
        let expected = format!("Attribute{}", dim + 1);
        if &header[2 + dim] != expected.as_str() {
            return Err(Error::parse(
                1,
                format!("attribute column {} must be named {expected}", dim + 3),
            ));
        }
    }

    struct Block {
        id: i64,
        last_ts: i64,
        class_cell: String,
        values: Vec<Vec<f64>>,
    }
    let mut order: Vec<i64> = Vec::new();
    let mut blocks: std::collections::HashMap<i64, Block> = std::collections::HashMap::new();
    let mut class_names: Vec<String> = Vec::new();

    for (idx, rec) in records.enumerate() {
        let line_no = idx + 2;
        let rec = rec.map_err(|e| Error::parse(line_no, e.to_string()))?;
        if rec.len() != width {
            return Err(Error::parse(
                line_no,
                format!("expected {width} columns, found {}", rec.len()),
            ));
        }
        let id: i64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::parse(line_no, format!("MTS_ID is not an integer: {}", &rec[0])))?;
        let ts: i64 = rec[1].trim().parse().map_err(|_| {
            Error::parse(line_no, format!("Timestamp is not an integer: {}", &rec[1]))
        })?;
        let class_cell = rec[width - 1].to_string();

        let block = blocks.entry(id).or_insert_with(|| {
            order.push(id);
            Block { id, last_ts: i64::MIN, class_cell: class_cell.clone(), values: vec![Vec::new(); n_dims] }
        });
        if ts == block.last_ts {
            return Err(Error::parse(
                line_no,
                format!("duplicate timestamp {ts} for MTS_ID {id}"),
            ));
        }
        if ts < block.last_ts {
            return Err(Error::parse(
                line_no,
                format!("timestamps for MTS_ID {id} are not strictly increasing"),
            ));
        }
        block.last_ts = ts;
        if block.class_cell != class_cell {
            return Err(Error::parse(
                line_no,
                format!(
                    "inconsistent class label for MTS_ID {id}: {:?} vs {:?}",
                    block.class_cell, class_cell
                ),
            ));
        }
        for dim in 0..n_dims {
            let cell = rec[2 + dim].trim();
            let v = if cell.is_empty() {
                MISSING
            } else {
                cell.parse::<f64>().map_err(|_| {
                    Error::parse(line_no, format!("not a number: {cell}"))
                })?
            };
            block.values[dim].push(v);
        }
        let _ = block.id;
    }

    let mut series = Vec::with_capacity(order.len());
    for id in order {
        let block = blocks.remove(&id).expect("block recorded in order list");
        let label = if block.class_cell.is_empty() {
            None
        } else {
            let name = block.class_cell;
            let idx = match class_names.iter().position(|n| *n == name) {
                Some(i) => i,
                None => {
                    class_names.push(name);
                    class_names.len() - 1
                }
            };
            Some(idx)
        };
        series.push(Series { id, values: block.values, label });
    }
    MTSDataset::new(series, class_names, n_dims)
}

/// Writes the long CSV layout read by [`parse_long_csv`]. Timestamps are the
/// 0-based positions; values use the shortest representation that parses back
/// bit-equal; missing values become empty cells.
pub fn write_long_csv(data: &MTSDataset) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["MTS_ID".to_string(), "Timestamp".to_string()];
    for dim in 0..data.n_dims {
        header.push(format!("Attribute{}", dim + 1));
    }
    header.push("Class".to_string());
    writer.write_record(&header).expect("in-memory write");

    for s in &data.series {
        let class_cell = match s.label {
            Some(l) => data.class_names[l].clone(),
            None => String::new(),
        };
        for t in 0..s.len() {
            let mut record = vec![s.id.to_string(), t.to_string()];
            for dim in 0..data.n_dims {
                let v = s.values[dim][t];
                record.push(if is_missing(v) { String::new() } else { format!("{v}") });
            }
            record.push(class_cell.clone());
            writer.write_record(&record).expect("in-memory write");
        }
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

/// Configuration for [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    /// Series per class; the dataset holds `2 * n_per_class` series.
    pub n_per_class: usize,
    /// Series length.
    pub length: usize,
    /// Start of the (first) square signal.
    pub square_start: usize,
    /// Square length.
    pub square_len: usize,
    /// 1 or 2. With one square each positive series is an exact twin of one
    /// negative series plus the square, so the square is the only difference
    /// between the classes. With two squares every series is drawn
    /// independently, the positive class carries both squares and each
    /// negative carries exactly one of them, alternating between the two
    /// placements, so single-square window contents occur in both classes
    /// and only a window spanning both squares tells the classes apart.
    pub n_squares: usize,
    /// Start of the second square (required when `n_squares == 2`).
    pub second_square_start: Option<usize>,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(
        n_per_class: usize,
        length: usize,
        square_start: usize,
        square_len: usize,
        n_squares: usize,
        second_square_start: Option<usize>,
        seed: u64,
    ) -> Self {
        SyntheticConfig {
            n_per_class,
            length,
            square_start,
            square_len,
            n_squares,
            second_square_start,
            seed,
        }
    }
}

/// Generates the two-class sine/square benchmark.
///
/// Both dimensions of every series are amplitude-1 sine waves spanning two
/// full periods, with a per-series-per-dimension phase jitter and a small
/// downward jitter on every sample, all drawn from the seed. Square signals
/// are constant 1.0 stretches that replace the sine on dimension 1 over
/// `[start, start + square_len)`; the sample jitter never reaches 1.0, so
/// the squares stay the only exact-1.0 content.
///
/// Class 0 is named "negative" and class 1 "positive"; ids are `0..2n`, the
/// negatives first.
///
/// With one square the jitter stays within an eighth of a sample step around
/// a base phase that centers sample points between sine peaks, so no sine
/// sample comes within a fixed margin of 1.0 at any seed. With two squares
/// the phase is drawn from the full cycle instead: window contents must not
/// encode absolute time, otherwise small windows could separate the classes
/// through phase alone.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<MTSDataset> {
    if cfg.n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be at least 1"));
    }
    if cfg.length == 0 {
        return Err(Error::invalid("length must be at least 1"));
    }
    if cfg.square_len == 0 {
        return Err(Error::invalid("square length must be at least 1"));
    }
    if cfg.square_start + cfg.square_len > cfg.length {
        return Err(Error::invalid("square extends past the end of the series"));
    }
    let second = match cfg.n_squares {
        1 => None,
        2 => {
            let s = cfg.second_square_start.ok_or_else(|| {
                Error::invalid("two squares requested but no second square start given")
            })?;
            if s + cfg.square_len > cfg.length {
                return Err(Error::invalid("second square extends past the end of the series"));
            }
            Some(s)
        }
        n => return Err(Error::invalid(format!("n_squares must be 1 or 2, got {n}"))),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let delta = 4.0 * std::f64::consts::PI / cfg.length as f64;
    let base_phase = std::f64::consts::FRAC_PI_2 - delta / 2.0;
    // Downward-only sample jitter: keeps every sine sample strictly below the
    // square's exact 1.0 while stopping trees from telling series apart by
    // their phase (clean curves are unique per series and memorizable).
    let noise_amp = 0.1;

    let n = cfg.n_per_class;
    let mut base: Vec<Vec<Vec<f64>>> = Vec::with_capacity(2 * n);
    for _ in 0..2 * n {
        let mut values = Vec::with_capacity(2);
        for _dim in 0..2 {
            let u: f64 = rng.random();
            let phase = if cfg.n_squares == 1 {
                base_phase + (u - 0.5) * delta / 4.0
            } else {
                u * 2.0 * std::f64::consts::PI
            };
            let dim_values: Vec<f64> = (0..cfg.length)
                .map(|t| {
                    let dip = (1.0 - rng.random::<f64>()) * noise_amp;
                    (delta * t as f64 + phase).sin() - dip
                })
                .collect();
            values.push(dim_values);
        }
        base.push(values);
    }
    if cfg.n_squares == 1 {
        // Each positive is its negative's exact twin plus the square, so
        // sine-only window contents occur identically in both classes and
        // only the square separates them. Independent curves would each be
        // unique, and trees would tell the classes apart by curve identity
        // rather than by the square.
        for i in 0..n {
            base[n + i] = base[i].clone();
        }
    }

    let mut series = Vec::with_capacity(2 * n);
    for (i, mut values) in base.into_iter().enumerate() {
        let positive = i >= n;
        let squares: Vec<usize> = match (cfg.n_squares, positive) {
            (1, false) => vec![],
            (1, true) => vec![cfg.square_start],
            // Alternate the single square of each negative between the two
            // placements; the even split keeps either placement equally
            // frequent in both halves of a train/test split.
            (2, false) if i % 2 == 0 => vec![cfg.square_start],
            (2, false) => vec![second.expect("validated above")],
            (2, true) => vec![cfg.square_start, second.expect("validated above")],
            _ => unreachable!(),
        };
        for &start in &squares {
            for v in values[0].iter_mut().skip(start).take(cfg.square_len) {
                *v = 1.0;
            }
        }
        series.push(Series {
            id: i as i64,
            values,
            label: Some(usize::from(positive)),
        });
    }

    MTSDataset::new(series, vec!["negative".to_string(), "positive".to_string()], 2)
}

/// Splits a labeled dataset into train/test halves, per class: the first
/// `ceil(m/2)` series of each class (in dataset order) go to train.
pub fn split_train_test(data: &MTSDataset) -> Result<(MTSDataset, MTSDataset)> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); data.n_classes()];
    for (i, s) in data.series.iter().enumerate() {
        let l = s
            .label
            .ok_or_else(|| Error::invalid(format!("series {} has no class label", s.id)))?;
        per_class[l].push(i);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for members in &per_class {
        let cut = members.len().div_ceil(2);
        train_idx.extend_from_slice(&members[..cut]);
        test_idx.extend_from_slice(&members[cut..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize]| -> Result<MTSDataset> {
        MTSDataset::new(
            idx.iter().map(|&i| data.series[i].clone()).collect(),
            data.class_names.clone(),
            data.n_dims,
        )
    };
    Ok((pick(&train_idx)?, pick(&test_idx)?))
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

/// Marks `floor(fraction * T)` entries missing in every dimension of every
/// series, positions chosen uniformly without replacement from the seed.
pub fn inject_missing(data: &MTSDataset, fraction: f64, seed: u64) -> Result<MTSDataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(format!("fraction must be in [0,1], got {fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for s in &mut out.series {
        let t_len = s.len();
        let count = (fraction * t_len as f64).floor() as usize;
        for dim_values in &mut s.values {
            // Partial Fisher-Yates: the first `count` slots end up holding a
            // uniform sample without replacement.
            let mut positions: Vec<usize> = (0..t_len).collect();
            for i in 0..count {
                let j = rng.random_range(i..t_len);
                positions.swap(i, j);
            }
            for &p in &positions[..count] {
                dim_values[p] = MISSING;
            }
        }
    }
    Ok(out)
}

/// Adds Gaussian noise `N(0, sigma^2)` to every non-missing value. Missing
/// entries stay missing and consume no random draws.
pub fn inject_noise(data: &MTSDataset, sigma: f64, seed: u64) -> Result<MTSDataset> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::invalid(format!("invalid noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for s in &mut out.series {
        for dim_values in &mut s.values {
            for v in dim_values.iter_mut() {
                if !is_missing(*v) {
                    *v += normal.sample(&mut rng);
                }
            }
        }
    }
    Ok(out)
}

/// Z-normalizes each dimension of each series over its non-missing values
/// (population standard deviation). A zero-variance dimension becomes all
/// zeros; missing values are untouched.
pub fn znormalize(data: &MTSDataset) -> Result<MTSDataset> {
    let mut out = data.clone();
    for s in &mut out.series {
        for (dim, dim_values) in s.values.iter_mut().enumerate() {
            let observed: Vec<f64> = dim_values.iter().copied().filter(|v| !is_missing(*v)).collect();
            if observed.is_empty() {
                return Err(Error::invalid(format!(
                    "series {} dimension {dim} has no observed values",
                    s.id
                )));
            }
            let n = observed.len() as f64;
            let mean = observed.iter().sum::<f64>() / n;
            let var = observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            for v in dim_values.iter_mut() {
                if !is_missing(*v) {
                    *v = if std == 0.0 { 0.0 } else { (*v - mean) / std };
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
