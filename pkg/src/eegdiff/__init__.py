"""Actor-critic guided diffusion for synthetic motor-imagery EEG."""

from eegdiff.signal_core import EegEpoch, EpochSet, synth_mi_epoch, synth_dataset

__all__ = ["EegEpoch", "EpochSet", "synth_mi_epoch", "synth_dataset"]
__version__ = "0.1.0"
