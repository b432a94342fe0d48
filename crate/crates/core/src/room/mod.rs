//! Room acoustics and spatialised mixture synthesis.

pub mod mixture;
pub mod rir;
pub mod synth;

pub use mixture::{
    add_noise_at_snr, measure_levels, planned_speaker_count, scale_noise_to_snr, scale_to_sir, simulate_mixture, MixtureExample,
    MixtureMetadata, Placement,
};
pub use rir::{
    apply_rir, auto_max_order, fft_convolve, highpass_rir, rir_length, room_response, schroeder_t60, simulate_rir,
    t60_to_reflectivity, RoomSpec, ShoeboxRoom,
};
