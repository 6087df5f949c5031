"""Overlapped ("meta") multiplexing simulation toolkit.

Builds the artificial convolution channel of the overlap scheme, evaluates
its parallel-channel capacity (waterfilling and equal power), runs calibrated
AWGN link simulations with exact Viterbi or particle decoding, and measures
occupied bandwidth of the shaping pulses.
"""

from .capacity import (
    AllocationMode,
    CapacityReport,
    PowerAllocation,
    capacity,
    capacity_ebn0,
    equal_power,
    pulse_spectrum,
    required_ebn0,
    spectral_efficiency,
    waterfill,
)
from .channel import (
    InterfererParams,
    NoiseCalibration,
    awgn,
    calibrate_noise,
    demod_qam,
    make_qam_interferer,
    sharing_preset,
    superpose,
)
from .decoder import (
    DecodeResult,
    ParticleEnsemble,
    SmcConfig,
    effective_particle_count,
    joint_decode,
    smc_decode,
    systematic_resample,
    viterbi_decode,
)
from .harness import (
    BerRecord,
    ConfigError,
    ExperimentConfig,
    WaveformSpec,
    run_ber_sweep,
    run_capacity_sweep,
    run_sharing_experiment,
    run_spectrum_report,
)
from .mux import (
    Alphabet,
    ChannelMatrix,
    Frame,
    SingularSpectrum,
    build_channel_matrix,
    complex_bpsk,
    demap_symbols,
    encode,
    make_frame,
    map_bits,
    singular_spectrum,
    square_qam,
)
from .waveform import (
    BandwidthExceedsGrid,
    BandwidthReport,
    PulseKind,
    PulseShape,
    SpectrumEstimate,
    bandwidth_report,
    bounded_psd_bandwidth,
    fpcb_bandwidth,
    magnitude_spectrum,
    make_pulse,
    welch_psd,
)

__version__ = "0.1.0"
