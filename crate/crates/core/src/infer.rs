//! Position inference from per-square class probabilities under chess
//! census rules.
//!
//! Kings are placed first (one per color), then every square whose most
//! probable class is empty, then the remaining squares greedily: the ten
//! non-king piece classes each keep a list of candidate squares sorted by
//! probability, and the globally most probable list head is assigned whenever
//! the square is still free and the piece census allows it.

use crate::classify::{BoardProbabilities, Color, PieceClass, PieceKind, NUM_SQUARES};

/// Maximum pieces of each kind per color, and of all kinds together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CensusLimits {
    per_kind: [u8; 6],
    pub max_total: u8,
}

impl Default for CensusLimits {
    /// Standard material with every untracked promotion assumed to be a queen.
    fn default() -> Self {
        Self {
            per_kind: [1, 9, 2, 2, 2, 8],
            max_total: 16,
        }
    }
}

impl CensusLimits {
    pub fn limit(&self, kind: PieceKind) -> u8 {
        self.per_kind[kind.index()]
    }

    /// Overrides one limit. The king limit is fixed at one.
    pub fn with_limit(mut self, kind: PieceKind, limit: u8) -> Self {
        if kind != PieceKind::King {
            self.per_kind[kind.index()] = limit;
        }
        self
    }

    pub fn with_max_total(mut self, max_total: u8) -> Self {
        self.max_total = max_total;
        self
    }
}

/// Light squares are those with even `row + col`, rows counted from the top
/// of the rectified board.
pub fn square_is_light(index: usize) -> bool {
    (index / 8 + index % 8).is_multiple_of(2)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    KingCount { color: Color, count: usize },
    Census { class: PieceClass, count: usize, limit: u8 },
    Total { color: Color, count: usize, limit: u8 },
    BishopsSameColor { color: Color },
}

/// 64 square labels, index 0 = a8 through 63 = h1.
///
/// Nothing is enforced at construction; [`BoardPosition::violations`] reports
/// census problems. Positions from [`infer_position`] never have any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoardPosition([PieceClass; NUM_SQUARES]);

impl BoardPosition {
    pub fn new(squares: [PieceClass; NUM_SQUARES]) -> Self {
        Self(squares)
    }

    pub fn square(&self, index: usize) -> PieceClass {
        self.0[index]
    }

    pub fn squares(&self) -> &[PieceClass; NUM_SQUARES] {
        &self.0
    }

    pub fn count(&self, class: PieceClass) -> usize {
        self.0.iter().filter(|&&c| c == class).count()
    }

    pub fn violations(&self, limits: &CensusLimits) -> Vec<Violation> {
        let mut out = Vec::new();
        for color in [Color::White, Color::Black] {
            let kings = self.count(PieceClass::piece(color, PieceKind::King));
            if kings != 1 {
                out.push(Violation::KingCount { color, count: kings });
            }
            for kind in PieceKind::ALL.into_iter().skip(1) {
                let class = PieceClass::piece(color, kind);
                let count = self.count(class);
                if count > limits.limit(kind) as usize {
                    out.push(Violation::Census {
                        class,
                        count,
                        limit: limits.limit(kind),
                    });
                }
            }
            let total = self.0.iter().filter(|c| c.color() == Some(color)).count();
            if total > limits.max_total as usize {
                out.push(Violation::Total {
                    color,
                    count: total,
                    limit: limits.max_total,
                });
            }
            let bishop = PieceClass::piece(color, PieceKind::Bishop);
            let shades: Vec<bool> = (0..NUM_SQUARES)
                .filter(|&i| self.0[i] == bishop)
                .map(square_is_light)
                .collect();
            if shades.len() == 2 && shades[0] == shades[1] {
                out.push(Violation::BishopsSameColor { color });
            }
        }
        out
    }

    /// Fraction of squares equal to `truth`.
    pub fn accuracy(&self, truth: &BoardPosition) -> f64 {
        let hits = self.0.iter().zip(truth.0.iter()).filter(|(a, b)| a == b).count();
        hits as f64 / NUM_SQUARES as f64
    }
}

/// A board under construction; `None` marks a square not yet decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialBoard([Option<PieceClass>; NUM_SQUARES]);

impl Default for PartialBoard {
    fn default() -> Self {
        Self([None; NUM_SQUARES])
    }
}

impl PartialBoard {
    pub fn get(&self, index: usize) -> Option<PieceClass> {
        self.0[index]
    }

    pub fn set(&mut self, index: usize, class: PieceClass) {
        self.0[index] = Some(class);
    }

    pub fn unfilled(&self) -> usize {
        self.0.iter().filter(|s| s.is_none()).count()
    }
}

/// Candidate squares for one class, most probable first.
#[derive(Debug, Clone)]
pub struct ClassQueue {
    pub class: PieceClass,
    entries: Vec<(usize, f64)>,
    cursor: usize,
}

impl ClassQueue {
    fn build(class: PieceClass, probs: &BoardProbabilities, board: &PartialBoard) -> Self {
        let mut entries: Vec<(usize, f64)> = (0..NUM_SQUARES)
            .filter(|&i| board.get(i).is_none())
            .map(|i| (i, probs.square(i).get(class)))
            .collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self {
            class,
            entries,
            cursor: 0,
        }
    }

    pub fn head(&self) -> Option<(usize, f64)> {
        self.entries.get(self.cursor).copied()
    }

    fn advance(&mut self) {
        self.cursor += 1;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The ten classes that go through the greedy stage, in ordinal order.
pub const QUEUED_CLASSES: [PieceClass; 10] = [
    PieceClass::WhiteQueen,
    PieceClass::WhiteRook,
    PieceClass::WhiteBishop,
    PieceClass::WhiteKnight,
    PieceClass::WhitePawn,
    PieceClass::BlackQueen,
    PieceClass::BlackRook,
    PieceClass::BlackBishop,
    PieceClass::BlackKnight,
    PieceClass::BlackPawn,
];

/// Head probability of each queue; `None` once a queue is exhausted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopsVector(pub [Option<f64>; 10]);

impl TopsVector {
    pub fn from_queues(queues: &[ClassQueue]) -> Self {
        Self(std::array::from_fn(|i| queues[i].head().map(|(_, p)| p)))
    }

    /// Queue with the highest head; the lower class ordinal wins ties.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, top) in self.0.iter().enumerate() {
            if let Some(p) = *top {
                if best.is_none_or(|(_, bp)| p > bp) {
                    best = Some((i, p));
                }
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Index of the largest value; lowest index on ties.
fn best_two(values: impl Iterator<Item = f64>) -> (usize, Option<usize>) {
    let mut first: Option<(usize, f64)> = None;
    let mut second: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        match first {
            Some((_, fv)) if v <= fv => {
                if second.is_none_or(|(_, sv)| v > sv) {
                    second = Some((i, v));
                }
            }
            _ => {
                second = first;
                first = Some((i, v));
            }
        }
    }
    (first.expect("at least one square").0, second.map(|s| s.0))
}

/// Squares of the white and black king.
///
/// Each king goes to its most probable square. If both want the same square,
/// the color that loses less probability by moving to its runner-up square
/// moves; black moves on a tie.
pub fn place_kings(probs: &BoardProbabilities) -> (usize, usize) {
    let p_white = |i: usize| probs.square(i).get(PieceClass::WhiteKing);
    let p_black = |i: usize| probs.square(i).get(PieceClass::BlackKing);
    let (w1, w2) = best_two((0..NUM_SQUARES).map(p_white));
    let (b1, b2) = best_two((0..NUM_SQUARES).map(p_black));
    if w1 != b1 {
        return (w1, b1);
    }
    let (w2, b2) = (w2.expect("64 squares"), b2.expect("64 squares"));
    let white_loss = p_white(w1) - p_white(w2);
    let black_loss = p_black(b1) - p_black(b2);
    if white_loss < black_loss {
        (w2, b1)
    } else {
        (w1, b2)
    }
}

/// Marks every undecided square whose most probable class is empty.
pub fn place_empties(probs: &BoardProbabilities, mut board: PartialBoard) -> PartialBoard {
    for i in 0..NUM_SQUARES {
        if board.get(i).is_none() && probs.square(i).argmax() == PieceClass::Empty {
            board.set(i, PieceClass::Empty);
        }
    }
    board
}

pub fn greedy_fill(probs: &BoardProbabilities, board: PartialBoard, limits: &CensusLimits) -> BoardPosition {
    greedy_fill_traced(probs, board, limits, |_, _| {})
}

/// As [`greedy_fill`], calling `on_assign(square, class)` for each
/// assignment in the order made.
pub fn greedy_fill_traced(
    probs: &BoardProbabilities,
    mut board: PartialBoard,
    limits: &CensusLimits,
    mut on_assign: impl FnMut(usize, PieceClass),
) -> BoardPosition {
    let mut counts = [[0u8; 6]; 2];
    let mut totals = [0u8; 2];
    let mut bishop_shade: [Option<bool>; 2] = [None; 2];
    for i in 0..NUM_SQUARES {
        if let Some(class) = board.get(i) {
            if let (Some(color), Some(kind)) = (class.color(), class.kind()) {
                counts[color.index()][kind.index()] += 1;
                totals[color.index()] += 1;
                if kind == PieceKind::Bishop {
                    bishop_shade[color.index()] = Some(square_is_light(i));
                }
            }
        }
    }

    let mut queues: Vec<ClassQueue> = QUEUED_CLASSES
        .iter()
        .map(|&c| ClassQueue::build(c, probs, &board))
        .collect();
    let mut to_fill = board.unfilled();

    while to_fill > 0 {
        let Some(q) = TopsVector::from_queues(&queues).best() else {
            break;
        };
        let (square, _) = queues[q].head().expect("best queue has a head");
        queues[q].advance();

        let class = queues[q].class;
        let color = class.color().expect("queued classes are pieces").index();
        let kind = class.kind().expect("queued classes are pieces");
        if board.get(square).is_some()
            || counts[color][kind.index()] >= limits.limit(kind)
            || totals[color] >= limits.max_total
        {
            continue;
        }
        if kind == PieceKind::Bishop
            && counts[color][kind.index()] == 1
            && bishop_shade[color] == Some(square_is_light(square))
        {
            continue;
        }
        board.set(square, class);
        counts[color][kind.index()] += 1;
        totals[color] += 1;
        if kind == PieceKind::Bishop {
            bishop_shade[color] = Some(square_is_light(square));
        }
        to_fill -= 1;
        on_assign(square, class);
    }

    BoardPosition(std::array::from_fn(|i| board.get(i).unwrap_or(PieceClass::Empty)))
}

/// Kings, then empties, then the greedy constrained fill.
pub fn infer_position(probs: &BoardProbabilities, limits: &CensusLimits) -> BoardPosition {
    let (white, black) = place_kings(probs);
    let mut board = PartialBoard::default();
    board.set(white, PieceClass::WhiteKing);
    board.set(black, PieceClass::BlackKing);
    let board = place_empties(probs, board);
    greedy_fill(probs, board, limits)
}

/// Per-square most probable class with no global constraints.
pub fn argmax_position(probs: &BoardProbabilities) -> BoardPosition {
    BoardPosition(std::array::from_fn(|i| probs.square(i).argmax()))
}
