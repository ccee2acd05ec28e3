from enum import Enum


class FnKind(str, Enum):
    AFFINE = 'affine'
    CONVEX_QUADRATIC = 'convex_quadratic'
    SMOOTH_BLACK_BOX = 'smooth_black_box'
    MAX_OF_AFFINE = 'max_of_affine'


class Block(str, Enum):
    """Argument blocks of a constraint function W(x, v1, v2)."""
    X = 'x'
    V1 = 'v1'
    V2 = 'v2'


BLOCK_ORDER = (Block.X, Block.V1, Block.V2)


class Flavor(str, Enum):
    FULL = 'FullSSDFI'
    W1 = 'W1-reduced'
    W2 = 'W2-reduced'
    POLYHEDRAL = 'Polyhedral'


class TheoremId(str, Enum):
    T3_1 = 'T3.1'
    T4_1 = 'T4.1'
    T4_2 = 'T4.2'
    T4_3 = 'T4.3'
    T5_1 = 'T5.1'
    C5_1 = 'C5.1'
    T5_2 = 'T5.2'
    C5_2 = 'C5.2'
    C5_3 = 'C5.3'
    T5_3 = 'T5.3'


class InnerMethod(str, Enum):
    LBFGS = 'lbfgs'
    DESCENT = 'descent'


# Certificate flavors each checker accepts.
THEOREM_FLAVORS = {
    TheoremId.T3_1: {Flavor.FULL, Flavor.POLYHEDRAL},
    TheoremId.T4_1: {Flavor.FULL, Flavor.POLYHEDRAL},
    TheoremId.T4_2: {Flavor.W1},
    TheoremId.T4_3: {Flavor.W2},
    TheoremId.T5_1: {Flavor.FULL, Flavor.POLYHEDRAL},
    TheoremId.C5_1: {Flavor.W1},
    TheoremId.T5_2: {Flavor.W2},
    TheoremId.C5_2: {Flavor.FULL, Flavor.POLYHEDRAL},
    TheoremId.C5_3: {Flavor.POLYHEDRAL},
    TheoremId.T5_3: {Flavor.FULL},
}

# Discrete checker used for each flavor when no theorem is named.
DISCRETE_THEOREM = {
    Flavor.FULL: TheoremId.T4_1,
    Flavor.POLYHEDRAL: TheoremId.T4_1,
    Flavor.W1: TheoremId.T4_2,
    Flavor.W2: TheoremId.T4_3,
}

# Exit codes of the command line tools.
EXIT_PASS = 0
EXIT_VERIFY_FAIL = 1
EXIT_INPUT_ERROR = 2
EXIT_SOLVER_FAIL = 3


class SamplingStatus(str, Enum):
    OK = 'ok'
    VIOLATION = 'violation'
    SAMPLING_FAILURE = 'sampling_failure'
