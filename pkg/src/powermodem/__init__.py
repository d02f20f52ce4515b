"""Software modem and channel simulator for CPU-load keyed power-line signals."""

from .channel import ChannelProfile, Waveform, apply_channel, preset
from .framing import Frame, crc8, decode_frame, encode_frame, packetize
from .modplan import ModulationPlan, SymbolStream, bandwidth, bit_rate, bits_to_symbols, plan_bfsk, plan_mfsk
from .rx import SyncEstimate, acquire_sync, carrier_energy, demodulate, recover_frames

__version__ = "0.1.0"
