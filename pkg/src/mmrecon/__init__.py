"""Multi-matrix LDPC belief-propagation reconciliation for QKD post-processing."""

from .bits import BitBlock
from .channel import (
    ChannelModel,
    FrameSet,
    binary_entropy,
    bsc_corrupt,
    efficiency,
    generate_key,
    join_frames,
    split_key,
)
from .decoder import (
    DecodeResult,
    DecoderConfig,
    DecoderWorkspace,
    compute_syndrome,
    decode,
    init_priors,
)
from .matrix import (
    ConstructionError,
    DegreeProfile,
    MatrixEnsemble,
    ParityCheckMatrix,
    build_ensemble,
    code_rate,
    peg_construct,
)
from .alist import AlistParseError, load_alist, save_alist
from .session import (
    SessionAborted,
    SessionConfig,
    SessionReport,
    alice_run,
    bob_run,
    disclosed_information,
    run_local_session,
)
from .bench import SweepSpec, SweepRow, gen_matrix_cmd, load_ensemble_dir, measure_throughput, run_sweep

__version__ = "0.1.0"
