"""wearsim: full-system simulator of a wearable multi-biosignal acquisition
and edge-processing platform (synthetic signals, AFE models, device runtime,
radio link, host controller)."""

from .signals import (AnalogTrace, EyeState, SignalKind, SsvepSession,
                      SsvepStimulus, gen_alpha_eeg, gen_alpha_transition,
                      gen_background, gen_ppg, gen_ssvep_session)
from .dsp import (Psd, Spectrum, SpectrogramGrid, SsvepBinReport, classify_ssvep,
                  integrated_rms_noise, irfft, ppg_filter, psd, rfft, rfft_array,
                  spectrogram, ssvep_bin_power)
from .afe import (AfeMode, ExgAfe, ExgAfeConfig, ImpedanceChecker, PpgConfig,
                  PpgSensor, QuantizedFrame, exg_power, imu_double_tap,
                  load_power_table)
from .device import (ClusterCostModel, CommandKind, CycleReport, Device,
                     DeviceConfig, DeviceMode, HostCommand, PayloadMode,
                     fft_size_for_rate, task_efficiency_mflops_per_mw)
from .energy import (EnergyLedger, PowerCalibration, PowerDomain,
                     battery_lifetime_h, energy_per_sample_uj)
from .link import (ChannelModel, Dongle, Link, Packet, PacketType, RingBuffer,
                   command_roundtrip_us, reduction_ratio, required_throughput)
from .host import SessionLog, classify_trials, compare_modes, mode_table_text
from .scenario import (Scenario, ScenarioError, ScenarioRunner, load_scenario,
                       parse_scenario, run_scenario)

__version__ = "0.1.0"
