//! Per-square class probabilities and the classifier backends that produce them.

mod baseline;
mod file;

pub use baseline::{baseline_classifier, square_features, BaselineBackend, BaselineParams, SquareFeatures, Template};
pub use file::{load_probability_file, parse_probability_text, write_probability_text, FileBackend};

use std::fmt;

use thiserror::Error;

use crate::raster::Image;

pub const NUM_CLASSES: usize = 13;
pub const NUM_SQUARES: usize = 64;

/// Tolerance on the sum of an emitted probability vector.
pub const SUM_TOLERANCE: f64 = 1e-6;
/// Backend outputs whose sum is off by at most this much are rescaled.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("expected 64 square images, got {0}")]
    SquareCount(usize),
    #[error("square {index} is {got:?}, expected {want:?}")]
    NonUniformSquares {
        index: usize,
        got: (usize, usize),
        want: (usize, usize),
    },
    #[error("backend {backend} failed: {message}")]
    Backend { backend: String, message: String },
    #[error("backend returned {0} vectors, expected 64")]
    VectorCount(usize),
    #[error("square {square}: {reason}")]
    BadVector { square: usize, reason: VectorError },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("probability file has {0} rows, expected 64")]
    RowCount(usize),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("non-finite entry at class {0}")]
    NonFinite(usize),
    #[error("negative entry {value} at class {class}")]
    Negative { class: usize, value: f64 },
    #[error("sum {0} is not normalizable")]
    Sum(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub fn index(self) -> usize {
        match self {
            Color::White => 0,
            Color::Black => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PieceKind {
    King,
    Queen,
    Rook,
    Bishop,
    Knight,
    Pawn,
}

impl PieceKind {
    pub const ALL: [PieceKind; 6] = [
        PieceKind::King,
        PieceKind::Queen,
        PieceKind::Rook,
        PieceKind::Bishop,
        PieceKind::Knight,
        PieceKind::Pawn,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Label of one square. The declaration order is the class ordinal used in
/// probability vectors and files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PieceClass {
    WhiteKing,
    WhiteQueen,
    WhiteRook,
    WhiteBishop,
    WhiteKnight,
    WhitePawn,
    BlackKing,
    BlackQueen,
    BlackRook,
    BlackBishop,
    BlackKnight,
    BlackPawn,
    Empty,
}

impl PieceClass {
    pub const ALL: [PieceClass; NUM_CLASSES] = [
        PieceClass::WhiteKing,
        PieceClass::WhiteQueen,
        PieceClass::WhiteRook,
        PieceClass::WhiteBishop,
        PieceClass::WhiteKnight,
        PieceClass::WhitePawn,
        PieceClass::BlackKing,
        PieceClass::BlackQueen,
        PieceClass::BlackRook,
        PieceClass::BlackBishop,
        PieceClass::BlackKnight,
        PieceClass::BlackPawn,
        PieceClass::Empty,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn piece(color: Color, kind: PieceKind) -> Self {
        Self::ALL[color.index() * 6 + kind.index()]
    }

    pub fn color(self) -> Option<Color> {
        match self.ordinal() {
            0..=5 => Some(Color::White),
            6..=11 => Some(Color::Black),
            _ => None,
        }
    }

    pub fn kind(self) -> Option<PieceKind> {
        (self != PieceClass::Empty).then(|| PieceKind::ALL[self.ordinal() % 6])
    }

    pub fn is_empty(self) -> bool {
        self == PieceClass::Empty
    }

    /// `KQRBNPkqrbnp`, and `_` for an empty square.
    pub fn symbol(self) -> char {
        b"KQRBNPkqrbnp_"[self.ordinal()] as char
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        "KQRBNPkqrbnp_".find(c).map(|i| Self::ALL[i])
    }
}

impl fmt::Display for PieceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Normalized 13-way distribution for one square, indexed by class ordinal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareProbabilities([f64; NUM_CLASSES]);

impl SquareProbabilities {
    /// Validates an already-normalized vector.
    pub fn new(probs: [f64; NUM_CLASSES]) -> Result<Self, VectorError> {
        check_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE || probs.iter().any(|&p| p > 1.0) {
            return Err(VectorError::Sum(sum));
        }
        Ok(Self(probs))
    }

    /// Accepts vectors within [`RENORMALIZE_TOLERANCE`] of unit sum and
    /// rescales them to sum to one.
    pub fn normalize(raw: [f64; NUM_CLASSES]) -> Result<Self, VectorError> {
        check_entries(&raw)?;
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOLERANCE {
            return Err(VectorError::Sum(sum));
        }
        if (sum - 1.0).abs() <= SUM_TOLERANCE {
            return Ok(Self(raw));
        }
        Ok(Self(raw.map(|p| p / sum)))
    }

    pub fn one_hot(class: PieceClass) -> Self {
        let mut v = [0.0; NUM_CLASSES];
        v[class.ordinal()] = 1.0;
        Self(v)
    }

    pub fn uniform() -> Self {
        Self([1.0 / NUM_CLASSES as f64; NUM_CLASSES])
    }

    pub fn get(&self, class: PieceClass) -> f64 {
        self.0[class.ordinal()]
    }

    pub fn as_array(&self) -> &[f64; NUM_CLASSES] {
        &self.0
    }

    /// Most probable class; ties go to the lowest ordinal.
    pub fn argmax(&self) -> PieceClass {
        let mut best = 0;
        for i in 1..NUM_CLASSES {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        PieceClass::ALL[best]
    }
}

fn check_entries(v: &[f64; NUM_CLASSES]) -> Result<(), VectorError> {
    for (class, &value) in v.iter().enumerate() {
        if !value.is_finite() {
            return Err(VectorError::NonFinite(class));
        }
        if value < 0.0 {
            return Err(VectorError::Negative { class, value });
        }
    }
    Ok(())
}

/// One distribution per square, in square-index order (0 = a8, 63 = h1).
#[derive(Debug, Clone, PartialEq)]
pub struct BoardProbabilities(Vec<SquareProbabilities>);

impl BoardProbabilities {
    pub fn new(squares: Vec<SquareProbabilities>) -> Result<Self, ClassifyError> {
        if squares.len() != NUM_SQUARES {
            return Err(ClassifyError::VectorCount(squares.len()));
        }
        Ok(Self(squares))
    }

    pub fn one_hot(labels: &[PieceClass; NUM_SQUARES]) -> Self {
        Self(labels.iter().map(|&c| SquareProbabilities::one_hot(c)).collect())
    }

    pub fn square(&self, index: usize) -> &SquareProbabilities {
        &self.0[index]
    }

    pub fn squares(&self) -> &[SquareProbabilities] {
        &self.0
    }

    /// Reindexes squares: output square `i` takes input square `map(i)`.
    pub fn permuted(&self, map: impl Fn(usize) -> usize) -> Self {
        Self((0..NUM_SQUARES).map(|i| self.0[map(i)]).collect())
    }
}

/// A source of 13-way class scores for a batch of 64 square images.
///
/// Implementations must be safe to call concurrently on distinct boards.
pub trait ClassifierBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Raw scores for each square, in input order. They should sum to one.
    fn classify_batch(&self, squares: &[Image]) -> Result<Vec<[f64; NUM_CLASSES]>, String>;
}

/// Runs `backend` once over the 64 squares and validates its output.
pub fn classify_squares(backend: &dyn ClassifierBackend, squares: &[Image]) -> Result<BoardProbabilities, ClassifyError> {
    if squares.len() != NUM_SQUARES {
        return Err(ClassifyError::SquareCount(squares.len()));
    }
    let want = (squares[0].width(), squares[0].height());
    for (index, sq) in squares.iter().enumerate() {
        let got = (sq.width(), sq.height());
        if got != want {
            return Err(ClassifyError::NonUniformSquares { index, got, want });
        }
    }
    let raw = backend.classify_batch(squares).map_err(|message| ClassifyError::Backend {
        backend: backend.name().to_string(),
        message,
    })?;
    if raw.len() != NUM_SQUARES {
        return Err(ClassifyError::VectorCount(raw.len()));
    }
    let vectors = raw
        .into_iter()
        .enumerate()
        .map(|(square, v)| SquareProbabilities::normalize(v).map_err(|reason| ClassifyError::BadVector { square, reason }))
        .collect::<Result<Vec<_>, _>>()?;
    BoardProbabilities::new(vectors)
}
