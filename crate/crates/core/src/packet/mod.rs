//! Byte-exact packet format: construction, processing, replies, tagging.

pub mod params;
pub mod header;
pub mod payload;
pub mod onion;
pub mod vectors;

pub use header::{build_header, build_padding, Header, Route};
pub use onion::{
    form_onion, form_reply, header_valid, proc_onion, recognize_onion, tag_payload, BasicView, FailCode, NoReplay, Onion,
    OnionMaterial, OnionSpec, PathHop, ProcResult, ProcView, ReplyExpectation,
};
pub use params::{Address, FillerMode, FormatParams};
pub use payload::{build_payload_forward, build_payload_reply, ReplyInfo};

#[cfg(test)]
mod tests;
