//! TOML scenario files.
//!
//! ```toml
//! name = "demo"
//! seed = 7
//! expect = ["got-reply"]
//!
//! [topology]
//! relays = ["r0", "r1", "r2"]
//! corrupted = ["r1"]
//! senders = ["s0"]
//! receivers = ["bob"]
//!
//! [[workload]]
//! sender = "s0"
//! receiver = "bob"
//! message = "hello"
//! path = ["r0", "r1"]
//! reply_path = ["r2", "s0"]
//! reply = "hi back"
//!
//! [[script]]
//! rule = "observe"
//! ```

use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFile {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(flatten)]
    pub scenario: Scenario,
}

pub fn parse_config(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}
