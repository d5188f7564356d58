//! Physical constants and unit conversions (Hartree atomic units).

pub const SPEED_OF_LIGHT: f64 = 137.035999;
pub const HBAR: f64 = 1.0;
pub const ELECTRON_MASS: f64 = 1.0;
/// Electron charge q = -e.
pub const ELECTRON_CHARGE: f64 = -1.0;

/// Atomic units of time per femtosecond.
pub const AU_PER_FS: f64 = 41.341_373_335_18;
pub const AU_PER_AS: f64 = AU_PER_FS / 1000.0;
pub const EV_PER_HARTREE: f64 = 27.211_386_245_988;
pub const BOHR_PER_ANGSTROM: f64 = 1.0 / 0.529_177_210_903;
/// Electron masses per unified atomic mass unit.
pub const ELECTRON_MASSES_PER_AMU: f64 = 1822.888_486_209;
/// Boltzmann constant in hartree per kelvin.
pub const BOLTZMANN: f64 = 3.166_811_563e-6;
/// Peak intensity (W/cm²) of a field with amplitude 1 a.u.
pub const INTENSITY_AU_WCM2: f64 = 3.509_447_5e16;

pub fn fs_to_au(t: f64) -> f64 {
    t * AU_PER_FS
}

pub fn au_to_fs(t: f64) -> f64 {
    t / AU_PER_FS
}

pub fn ev_to_hartree(e: f64) -> f64 {
    e / EV_PER_HARTREE
}

/// Peak field amplitude for a peak cycle-averaged intensity, E₀ = √(2I/(ε₀c)).
pub fn field_amplitude_from_intensity(intensity_wcm2: f64) -> f64 {
    (intensity_wcm2 / INTENSITY_AU_WCM2).sqrt()
}
