//! Chessboard image digitization.
//!
//! An image goes through board localization ([`board_detect`]), square
//! splitting, per-square class scoring ([`classify`]), constrained position
//! inference ([`infer`]) and finally a FEN placement string ([`fen`]).
//! [`pipeline`] strings the stages together and times them.

pub mod board_detect;
pub mod classify;
pub mod fen;
pub mod geometry;
pub mod infer;
pub mod pipeline;
pub mod raster;
pub mod synth;

pub use classify::{BoardProbabilities, PieceClass, SquareProbabilities};
pub use fen::{decode_fen, encode_fen, FenPlacement};
pub use geometry::{Homography, Point2, Segment2};
pub use infer::{infer_position, BoardPosition, CensusLimits};
pub use raster::Image;
