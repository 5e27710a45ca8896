use thiserror::Error;

use crate::overlay::PeerId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("peer {0} is already part of the overlay")]
    DuplicatePeer(PeerId),
    #[error("peer {0} is not part of the overlay")]
    UnknownPeer(PeerId),
    #[error("the source peer cannot leave the overlay")]
    SourceLeave,
    #[error("overlay must keep at least 2 peers (currently {0})")]
    TooFewPeers(usize),
    #[error("invalid overlay: {0}")]
    InvalidOverlay(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid stream configuration: {0}")]
    InvalidConfig(String),
    #[error("color {color} is out of range 1..={max}")]
    ColorOutOfRange { color: u32, max: u32 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
