//! Placement-only FEN: the first field of a FEN record, and nothing else.

use std::fmt;

use thiserror::Error;

use crate::classify::PieceClass;
use crate::infer::{BoardPosition, CensusLimits, Violation};

pub const STARTING_PLACEMENT: &str = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FenError {
    #[error("offset {offset}: unexpected character {ch:?}")]
    BadChar { offset: usize, ch: char },
    #[error("offset {offset}: rank {rank} describes {squares} squares, expected 8")]
    RankLength { offset: usize, rank: usize, squares: usize },
    #[error("offset {offset}: {blocks} rank blocks, expected 8")]
    BlockCount { offset: usize, blocks: usize },
    #[error("offset {offset}: adjacent digits")]
    AdjacentDigits { offset: usize },
    #[error("placement violates piece census: {0:?}")]
    Census(Vec<Violation>),
}

/// A canonical placement string: 8 rank blocks, maximal digit runs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize)]
pub struct FenPlacement(String);

impl FenPlacement {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FenPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FenOptions {
    /// Reject non-maximal digit runs such as `44`.
    pub strict: bool,
    /// When set, the decoded position must satisfy these limits.
    pub census: Option<CensusLimits>,
}

impl Default for FenOptions {
    fn default() -> Self {
        Self {
            strict: true,
            census: None,
        }
    }
}

pub fn encode_fen(pos: &BoardPosition) -> FenPlacement {
    let mut out = String::with_capacity(71);
    for rank in 0..8 {
        if rank > 0 {
            out.push('/');
        }
        let mut run = 0u8;
        for file in 0..8 {
            let class = pos.square(rank * 8 + file);
            if class.is_empty() {
                run += 1;
            } else {
                if run > 0 {
                    out.push((b'0' + run) as char);
                    run = 0;
                }
                out.push(class.symbol());
            }
        }
        if run > 0 {
            out.push((b'0' + run) as char);
        }
    }
    FenPlacement(out)
}

/// Strict decode without census checks.
pub fn decode_fen(text: &str) -> Result<BoardPosition, FenError> {
    decode_fen_with(text, FenOptions::default())
}

pub fn decode_fen_with(text: &str, options: FenOptions) -> Result<BoardPosition, FenError> {
    let mut squares = [PieceClass::Empty; 64];
    let mut rank = 0usize;
    let mut file = 0usize;
    let mut rank_start = 0usize;
    let mut prev_digit = false;

    for (offset, ch) in text.char_indices() {
        match ch {
            '/' => {
                if file != 8 {
                    return Err(FenError::RankLength {
                        offset,
                        rank,
                        squares: file,
                    });
                }
                rank += 1;
                if rank >= 8 {
                    return Err(FenError::BlockCount {
                        offset,
                        blocks: rank + 1,
                    });
                }
                file = 0;
                rank_start = offset + 1;
                prev_digit = false;
            }
            '1'..='9' => {
                if prev_digit && options.strict {
                    return Err(FenError::AdjacentDigits { offset });
                }
                file += ch as usize - '0' as usize;
                if file > 8 {
                    return Err(FenError::RankLength {
                        offset: rank_start,
                        rank,
                        squares: file,
                    });
                }
                prev_digit = true;
            }
            _ => {
                let class = PieceClass::from_symbol(ch)
                    .filter(|c| !c.is_empty())
                    .ok_or(FenError::BadChar { offset, ch })?;
                if file >= 8 {
                    return Err(FenError::RankLength {
                        offset: rank_start,
                        rank,
                        squares: file + 1,
                    });
                }
                squares[rank * 8 + file] = class;
                file += 1;
                prev_digit = false;
            }
        }
    }
    if rank != 7 {
        return Err(FenError::BlockCount {
            offset: text.len(),
            blocks: rank + 1,
        });
    }
    if file != 8 {
        return Err(FenError::RankLength {
            offset: rank_start,
            rank,
            squares: file,
        });
    }
    let pos = BoardPosition::new(squares);
    if let Some(limits) = options.census {
        let v = pos.violations(&limits);
        if !v.is_empty() {
            return Err(FenError::Census(v));
        }
    }
    Ok(pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn starting_position() {
        let pos = decode_fen(STARTING_PLACEMENT).unwrap();
        assert_eq!(pos.square(0), PieceClass::BlackRook);
        assert_eq!(pos.square(4), PieceClass::BlackKing);
        assert_eq!(pos.square(60), PieceClass::WhiteKing);
        assert_eq!(encode_fen(&pos).as_str(), STARTING_PLACEMENT);
    }

    #[test]
    fn empty_board() {
        let pos = BoardPosition::new([PieceClass::Empty; 64]);
        assert_eq!(encode_fen(&pos).as_str(), "8/8/8/8/8/8/8/8");
        assert_eq!(decode_fen("8/8/8/8/8/8/8/8").unwrap(), pos);
    }

    #[test]
    fn lone_king_index_36() {
        let mut sq = [PieceClass::Empty; 64];
        sq[36] = PieceClass::WhiteKing;
        let fen = encode_fen(&BoardPosition::new(sq));
        assert_eq!(fen.as_str(), "8/8/8/8/4K3/8/8/8");
        assert_eq!(decode_fen(fen.as_str()).unwrap().square(36), PieceClass::WhiteKing);
    }

    #[test]
    fn malformed_strings() {
        assert!(matches!(decode_fen("9/8/8/8/8/8/8/8"), Err(FenError::RankLength { rank: 0, squares: 9, .. })));
        assert!(matches!(decode_fen("44/8/8/8/8/8/8/8"), Err(FenError::AdjacentDigits { offset: 1 })));
        assert!(decode_fen_with("44/8/8/8/8/8/8/8", FenOptions { strict: false, census: None }).is_ok());
        assert!(matches!(decode_fen("8/8/8/8/8/8/8"), Err(FenError::BlockCount { blocks: 7, .. })));
        assert!(matches!(decode_fen("8/8/8/8/8/8/8/8/8"), Err(FenError::BlockCount { .. })));
        assert!(matches!(decode_fen("7/8/8/8/8/8/8/8"), Err(FenError::RankLength { squares: 7, .. })));
        assert!(matches!(decode_fen("8/8/8/8/8/8/8/PPPPPPPPP"), Err(FenError::RankLength { .. })));
        assert!(matches!(decode_fen("8/8/8/8/8/8/8/7x"), Err(FenError::BadChar { ch: 'x', .. })));
        assert!(matches!(decode_fen("8/8/8/8/8/8/8/7_"), Err(FenError::BadChar { ch: '_', .. })));
    }

    #[test]
    fn census_enforced_on_request() {
        let opts = FenOptions {
            strict: true,
            census: Some(CensusLimits::default()),
        };
        assert!(decode_fen_with(STARTING_PLACEMENT, opts).is_ok());
        assert!(matches!(decode_fen_with("8/8/8/8/8/8/8/8", opts), Err(FenError::Census(_))));
    }

    fn class_strategy() -> impl Strategy<Value = PieceClass> {
        prop_oneof![
            3 => Just(PieceClass::Empty),
            1 => (0usize..12).prop_map(|i| PieceClass::ALL[i]),
        ]
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(sq in proptest::collection::vec(class_strategy(), 64)) {
            let pos = BoardPosition::new(sq.try_into().unwrap());
            let fen = encode_fen(&pos);
            prop_assert!(fen.as_str().len() <= 71);
            prop_assert!(fen.as_str().chars().all(|c| "KQRBNPkqrbnp12345678/".contains(c)));
            let back = decode_fen(fen.as_str()).unwrap();
            prop_assert_eq!(&back, &pos);
            prop_assert_eq!(encode_fen(&back), fen);
        }
    }
}
