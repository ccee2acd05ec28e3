from app.verify.checkers import run_checker  # noqa F401
from app.verify.continuous import (  # noqa F401
    verify_continuous, verify_nonconvex, verify_polyhedral, verify_special_w1,
    verify_special_w2
)
from app.verify.discrete import verify_discrete  # noqa F401
from app.verify.report import (  # noqa F401
    ConditionRow, SamplingReport, Tolerances, VerificationReport
)
from app.verify.sampling import SamplerConfig, sufficiency_sampling_test  # noqa F401
