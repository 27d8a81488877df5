//! Signal-processing primitives shared by the preprocessing stages: FIR
//! design with Kaiser windows for polyphase resampling, and Butterworth
//! second-order sections with bi-directional (zero-phase) application.

pub mod fir;
pub mod sos;
