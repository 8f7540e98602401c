"""Exact simulation of d-boxes from other no-signaling boxes via wirings."""

from .core import (BoxError, DBoxSpec, NoSignalingReport, NsBox, Party, SignalingError,
                   Violation, check_no_signaling, conditional_on_partner, is_d_box,
                   is_no_signaling, make_d_box, marginal, rat, reduce_outputs,
                   relabel_outputs)
from .wiring import (LookupMap, RoundTable, Wiring, WiringError, effective_box,
                     evaluate_exact, identity_wiring, passthrough, round_table, validate)
from .analysis import (BoxEquivalence, CycleStructure, OutputPermutation, boxes_equivalent,
                       cycle_structure, cycles, derive_relabeling, extract_permutation,
                       fixed_points, total_variation)
from .protocols import (CoincidenceError, ConversionPlan, ConversionStep, ProtocolError,
                        RoundProtocol, condition_on_success, execute_plan,
                        expected_boxes_theorem1, plan_consumption, plan_conversion,
                        protocol1_wiring, protocol2_box, protocol3_box, protocol4_round,
                        protocol4_round_wiring, variant_threshold_round,
                        variant_threshold_wiring, variant_two_zero_round,
                        variant_two_zero_wiring)
from .simulate import (RandomSource, Schedule, audit_failure_flags, empirical_distribution,
                       estimate_expected_boxes, run_repeat_until_success, sample_round)
from .serdes import ParseError, parse_box, parse_wiring, read_box, read_wiring, write_box, write_wiring

__version__ = "0.1.0"
