use thiserror::Error;

use crate::Key;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("key {0} is outside the user key domain (i64::MIN, i64::MAX)")]
    KeyOutOfRange(Key),
    #[error("self-loop on key {0} is not supported")]
    SelfLoop(Key),
    #[error("scan cap must be at least 1")]
    ZeroScanCap,
    #[error("thread registry is full ({capacity} slots)")]
    RegistryFull { capacity: usize },
    #[error("this thread is already registered with the graph")]
    AlreadyRegistered,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
