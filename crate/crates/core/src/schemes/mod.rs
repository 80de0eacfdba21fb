//! Assembled transmission schemes.
