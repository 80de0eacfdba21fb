//! Synthetic multi-view datasets, feature I/O, annotations.
