//! Deep-sea optical link toolkit: channel losses, BCH coding, OOK/4-PPM
//! modem, receiver gain control, link simulation and range planning.

pub mod agc;
pub mod channel;
pub mod fec;
pub mod link;
pub mod modem;
pub mod planner;
pub mod presets;
pub mod report;
pub mod scenario;
