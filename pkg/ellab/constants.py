# constants.py
# Central location for all lab-wide defaults

import os

from dotenv import load_dotenv

load_dotenv()


def _env_int(name, default):
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    return int(value, 0)


# Working precision (bits) and the guard bits carried on top of it
DEFAULT_BITS = _env_int("ELLAB_BITS", 128)
DEFAULT_GUARD_BITS = _env_int("ELLAB_GUARD_BITS", 32)
MIN_BITS = 53

# Point counting
EXHAUSTIVE_THRESHOLD = 65537
BSGS_POINT_BUDGET = 40
BSGS_TWIST_RETRIES = 3
DEFAULT_SEED = _env_int("ELLAB_SEED", 0x11A)

# Singular points are searched exhaustively up to this prime, gcd-based above
SINGULAR_SEARCH_LIMIT = 10007

# Dirichlet series
# d(n) <= DIVISOR_CUBE_ROOT_BOUND * n^(1/3) for every n >= 1
DIVISOR_CUBE_ROOT_BOUND = 3.53
EULER_REGION_MIN = 1.6
ROOT_NUMBER_SPLITS = (1, 1.1)
# Off-axis test points for the sign search (u-plane)
ROOT_NUMBER_TEST_POINTS = ((1.1, 0.13), (0.83, 0.29), (1.37, -0.41))

# Li coefficients
DEFAULT_N_MAX = 50
DEFAULT_RADIUS = 0.5
ALTERNATE_RADIUS = 0.4
MIN_SAMPLES = 256

# DFT sizes up to this length use the direct transform
DIRECT_DFT_MAX = 4096

# Canonical heights
DEFAULT_HEIGHT_TOL = 1e-6
DEFAULT_N_CAP = 9
MIN_DOUBLINGS = 4
COORDINATE_BIT_BUDGET = 2 ** 24
# Mazur: rational torsion orders never exceed 12
TORSION_ORDER_LIMIT = 12

# Iteration budget for series and continued fractions, per 53 bits of precision
ITERATION_BUDGET = 4000

# Cache
CACHE_DIR = os.path.expanduser(os.getenv("ELLAB_CACHE_DIR", os.path.join("~", ".cache", "ellab")))
CACHE_MAGIC = b"ELAB"
CACHE_FORMAT_VERSION = 1

# Workers: "auto" sizes the pool from the physical core count
DEFAULT_WORKERS = os.getenv("ELLAB_WORKERS", "1")
LOG_LEVEL = os.getenv("ELLAB_LOG_LEVEL", "WARNING")
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
