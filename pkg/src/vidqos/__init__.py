"""Statistical-delay-aware bandwidth allocation for real-time video users.

Core flow: describe each user by a delay target, an SNR distribution and a
rate-quality curve; solve the per-user QoS constants; schedule a maximal
servable subset; split the band under the sum-quality or fairness policy;
and validate the promised delay guarantees with a block-fading queue
simulator.
"""

from .allocator import (
    AllocationResult,
    UserAllocation,
    UserProfile,
    allocate_fairness,
    allocate_sum_quality,
    kkt_residual,
    make_profile,
    verify_profile,
)
from .cellsim import (
    CellScenario,
    DmosMap,
    PlacedUser,
    QosClass,
    SimReport,
    draw_users,
    mean_snr_db,
    run_comparison,
    service_boundary_snr,
)
from .errors import (
    AllocationError,
    BoundaryNotInGridError,
    CurveDomainError,
    CurveError,
    DistributionError,
    InfeasibleAllocationError,
    IntegrationError,
    MomentOrderError,
    QosInfeasibleError,
    ScenarioError,
    VidqosError,
)
from .fading import (
    MAX_MOMENT_ORDER,
    EmpiricalSamples,
    FadingDistribution,
    Rayleigh,
    exponential_integral,
    fractional_moment,
    rayleigh_moment_closed_form,
)
from .qos import (
    DEFAULT_COHERENCE_TIME_S,
    QosDerived,
    QosTarget,
    derive_qos,
    max_rate,
    moment_target,
    qos_exponent_for_rate,
)
from .queuesim import (
    DelayViolationEstimate,
    QueueSimConfig,
    simulate_delay_violation,
    tail_exponent_fit,
    validate_allocation,
)
from .ratequality import (
    LogCurve,
    RateQualityCurve,
    ShiftedPowerCurve,
    TabulatedCurve,
)
from .scenario import Scenario, load_scenario
from .scheduler import (
    AdmissionDecision,
    ScheduleResult,
    admit_fairness,
    admit_sum_quality,
    brute_force_fairness_prefix,
    brute_force_max_subset,
    min_bandwidth,
    schedule_fairness,
    schedule_sum_quality,
)

__version__ = "0.1.0"
