"""lorarffi: a desk-scale LoRa radio-frequency fingerprinting testbed.

Synthesizes chirp-spread-spectrum packets from simulated devices with
distinct hardware impairments, runs a CFO-compensating receiver chain,
builds IQ / FFT / spectrogram representations, and trains small CNN
classifiers with an optional CFO-gated hybrid decision stage.
"""

from .phy import (
    ComplexSignal,
    LoRaParams,
    basic_chirp,
    instantaneous_frequency,
    preamble_sequence,
    symbol_length,
)
from .devices import (
    CaptureSchedule,
    DeviceProfile,
    EmissionContext,
    PacketRecord,
    apply_impairments,
    cfo_at,
    emit_packet,
    sample_profiles,
)
from .receiver import (
    CfoEstimate,
    SyncResult,
    coarse_cfo,
    compensate,
    estimate_and_compensate,
    fine_cfo,
    fine_cfo_limit,
    normalize,
    synchronize,
)
from .representations import (
    FftMatrix,
    IqMatrix,
    SpectrogramMatrix,
    represent,
    to_fft,
    to_iq,
    to_spectrogram,
)
from .cnn import Cnn, build_model, gradient_check, softmax
from .classify import (
    CfoDatabase,
    HybridPrediction,
    TrainConfig,
    forward,
    predict_cnn,
    predict_hybrid,
    train,
)
from .dataset import DatasetReader, generate_dataset
from .checkpoint import load_checkpoint, save_checkpoint
from .pipeline import (
    build_features,
    evaluate,
    process_packet,
    test_selection,
    train_on_dataset,
    training_selection,
)
from .report import EvalReport

__version__ = "0.1.0"
