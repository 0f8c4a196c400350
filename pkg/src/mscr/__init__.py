"""Minimum-storage cooperative regenerating code for n = 2k nodes.

Exact-arithmetic implementation over GF(2^m): encoding, MDS collection,
two-phase cooperative repair of multi-node failures with optimal bandwidth,
and a deterministic storage-cluster simulator with a CLI.
"""

from .galois import (DivisionByZero, FieldElement, FieldMismatch, FieldSpec,
                     NotEnoughElements)
from .linalg import (CauchySpec, DimensionMismatch, DuplicateGenerators,
                     Matrix, SingularMatrix, TooLarge, cauchy, cauchy_inverse,
                     is_super_regular)
from .params import (CodeParams, DegenerateConstants, GenerationExhausted,
                     Violation, generate, solve_dual_constants, validate)
from .codec import (DuplicateNodes, InconsistentContents, IndexOutOfRange,
                    NodeContent, ParityBlock, SourceBlock, collect,
                    dual_encode, encode, z_column)
from .repair import (BandwidthReport, FailurePattern, InvalidRegime,
                     MissingMessage, NonsingularityFailure, Phase1Message,
                     Phase2Message, RepairPlan, SolveFailure,
                     UnsupportedPattern, apply_repair, check_mixed_matrix,
                     optimal_bandwidth, phase1_symbol, plan_repair,
                     repair_mixed_pair, repair_parity_group,
                     repair_systematic_group)
from .cluster import (AlreadyFailed, Cluster, NotEnoughLiveNodes, Scenario,
                      TooManyFailures, VerificationFailure, run_scenario)

__version__ = "0.1.0"
