//! Document-term data: raw counts, word frequencies and synthetic ground truth.

mod io;
mod synth;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GplsiError, Result};

pub use io::{
    load_counts, load_graph, read_dense_csv, save_counts_csv, save_counts_matrix_market, save_graph,
    write_dense_csv, CountFormat,
};
pub use synth::{generate_synthetic, kmeans, SyntheticConfig, SyntheticCorpus};

/// Word counts `D` with per-document lengths `N_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    counts: DMatrix<u64>,
    doc_lengths: Vec<u64>,
}

impl CountMatrix {
    /// Counts with document lengths taken from the row sums.
    pub fn from_counts(counts: DMatrix<u64>) -> Result<Self> {
        let doc_lengths = counts.row_iter().map(|r| r.iter().sum()).collect();
        Self::new(counts, doc_lengths)
    }

    /// Counts with explicitly declared document lengths.
    ///
    /// Only shapes are checked here; [`validate_frequency`] checks the lengths
    /// against the row sums.
    pub fn new(counts: DMatrix<u64>, doc_lengths: Vec<u64>) -> Result<Self> {
        if counts.nrows() == 0 || counts.ncols() == 0 {
            return Err(GplsiError::DimensionMismatch(format!(
                "count matrix must be non-empty, got {}x{}",
                counts.nrows(),
                counts.ncols()
            )));
        }
        if doc_lengths.len() != counts.nrows() {
            return Err(GplsiError::DimensionMismatch(format!(
                "{} document lengths for {} documents",
                doc_lengths.len(),
                counts.nrows()
            )));
        }
        Ok(CountMatrix { counts, doc_lengths })
    }

    pub fn counts(&self) -> &DMatrix<u64> {
        &self.counts
    }

    pub fn doc_lengths(&self) -> &[u64] {
        &self.doc_lengths
    }

    pub fn n_docs(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_words(&self) -> usize {
        self.counts.ncols()
    }
}

/// Row-stochastic word-frequency matrix `X = diag(1/N_i) D`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix {
    freqs: DMatrix<f64>,
    doc_lengths: Vec<u64>,
}

impl FrequencyMatrix {
    pub fn freqs(&self) -> &DMatrix<f64> {
        &self.freqs
    }

    pub fn doc_lengths(&self) -> &[u64] {
        &self.doc_lengths
    }

    pub fn n_docs(&self) -> usize {
        self.freqs.nrows()
    }

    pub fn n_words(&self) -> usize {
        self.freqs.ncols()
    }

    /// Average document length, used wherever a single `N` is needed.
    pub fn mean_doc_length(&self) -> f64 {
        self.doc_lengths.iter().map(|&n| n as f64).sum::<f64>() / self.doc_lengths.len() as f64
    }

    /// Wraps an already row-stochastic matrix, e.g. a noiseless `M = WA`.
    ///
    /// Rows must be nonnegative and sum to one within `1e-9`; they are
    /// renormalized exactly.
    pub fn from_probabilities(mut freqs: DMatrix<f64>, doc_lengths: Vec<u64>) -> Result<Self> {
        if doc_lengths.len() != freqs.nrows() {
            return Err(GplsiError::DimensionMismatch(format!(
                "{} document lengths for {} documents",
                doc_lengths.len(),
                freqs.nrows()
            )));
        }
        for (i, mut row) in freqs.row_iter_mut().enumerate() {
            if doc_lengths[i] == 0 {
                return Err(GplsiError::ZeroLengthDocument { row: i });
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(GplsiError::InvalidParameter(format!("row {i} is not a probability vector")));
            }
            row /= sum;
        }
        Ok(FrequencyMatrix { freqs, doc_lengths })
    }
}

pub fn validate_frequency(counts: &CountMatrix) -> Result<FrequencyMatrix> {
    let d = counts.counts();
    for (i, &len) in counts.doc_lengths().iter().enumerate() {
        if len == 0 {
            return Err(GplsiError::ZeroLengthDocument { row: i });
        }
        let row_sum: u64 = d.row(i).iter().sum();
        if row_sum != len {
            return Err(GplsiError::DimensionMismatch(format!(
                "row {i} sums to {row_sum} but its declared length is {len}"
            )));
        }
    }
    let freqs = DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| {
        d[(i, j)] as f64 / counts.doc_lengths()[i] as f64
    });
    Ok(FrequencyMatrix {
        freqs,
        doc_lengths: counts.doc_lengths().to_vec(),
    })
}

/// Parameters a synthetic corpus was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// `n × K` mixture weights.
    #[serde(skip)]
    pub w: DMatrix<f64>,
    /// `K × p` topic-word distributions.
    #[serde(skip)]
    pub a: DMatrix<f64>,
    pub coords: Vec<[f64; 2]>,
    /// Spatial cluster of each document.
    pub group_ids: Vec<usize>,
    /// Dominant topic of each spatial cluster.
    pub group_topics: Vec<usize>,
    /// `anchor_docs[k]` has `W` row `e_k`.
    pub anchor_docs: Vec<usize>,
    /// `anchor_words[k]` has nonzero `A` entries only in row `k`.
    pub anchor_words: Vec<usize>,
}

impl GroundTruth {
    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    /// Noiseless expected frequencies `M = WA`.
    pub fn expected_frequencies(&self) -> DMatrix<f64> {
        &self.w * &self.a
    }
}
