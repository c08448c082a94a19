"""Sampling and identification of band-limited operators with weighted delta trains."""

from .errors import (BudgetExceededError, ConfigError, DomainCoverageError, GridError,
                     InfeasibleCoverError, OPWSError, PreconditionError, SingularSystemError,
                     UnderdeterminedError)
from .geometry import CellCover, Rect, SupportSet, content, jordan_content, normalize_support, rectify
from .model import (BSpline, DeltaTrain, DiscreteOperator, GroundTruthOperator, RaisedCosine,
                    SampledSignal, SpreadingAtom, apply, apply_train, discrete_apply, eval_spreading,
                    hs_norm, impulse_response, kernel, kn_symbol)
from .transforms import Window, build_window, dft, idft, stft_mixed_norm, symplectic_dft2, zak
from .gabor import (CellPattern, GaborIdentifier, check_glp, finite_apply, finite_identify,
                    gabor_matrix, search_identifier, tf_shift)
from .identify import (ReconstructionReport, build_unmixing, conditioning_sweep, identify_convolution,
                       identify_function, reconstruct_lattice, reconstruct_multicell, reconstruct_rect)

__version__ = "0.1.0"
