"""Two-photon Fock pulses scattering off a chirally coupled two-level emitter."""
__version__ = "0.1.0"
