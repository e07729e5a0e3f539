//! Std side of the lip-reading trainer: file formats, adapters, the
//! generation runner, the session store and the HTTP service.

pub mod adapters;
pub mod api;
pub mod audio;
pub mod cli;
pub mod fsutil;
pub mod lexfiles;
pub mod media;
pub mod report;
pub mod runner;
pub mod store;
pub mod track;
