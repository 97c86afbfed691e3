# Significance level used by every statistical check
SIGNIFICANCE_LEVEL = 0.01
# Significance level of the Spearman trend test on convergence curves
TREND_SIGNIFICANCE_LEVEL = 0.05
# Number of standard errors allowed by equality checks
EQUALITY_N_STDERR = 3.0
# Number of standard errors allowed by one-sided checks
ONE_SIDED_N_STDERR = 2.0

# Maximum number of grid points of one simulated path
MAX_PATH_LENGTH = 50_000_000
# Number of grid steps simulated per block by the incremental simulators
STEP_BLOCK = 4096
# Number of replicates per chunk, the unit of parallel work and of seed derivation
REPLICATE_CHUNK = 256
# Largest number of matrix cells (replicates x steps) held in memory by batch simulation
MAX_BATCH_CELLS = 1 << 23

# Default level grid for h: 0 followed by 2^-6, 2^-5, ..., 2^3
DEFAULT_LEVEL_EXPONENTS = tuple(range(-6, 4))
# Ladder counting: an excursion above the running minimum older than this (time units) is cut
LADDER_EXCURSION_CAP = 200.0
# Ladder counting: warn when the fraction of cut excursions among all ladder epochs exceeds this
LADDER_TRUNCATION_THRESHOLD = 0.01

# Rejection sampler: default maximal number of consecutive rejections
MAX_REJECTIONS = 100_000
# Rejection sampler: warn when the measured acceptance rate falls below this
ACCEPTANCE_FLOOR = 0.001
# Default epsilon schedule of the exponential clock
EPSILON_SCHEDULE = (0.1, 0.03, 0.01)

# Creep event tolerance, in units of the one-step displacement scale
CREEP_TOLERANCE_FACTOR = 3.0
# Largest shift of a creep probability under dt refinement before contamination is reported
CREEP_REFINEMENT_SHIFT = 0.05
# Factor by which dt is divided in refinement checks
DT_REFINEMENT_FACTOR = 4

# Largest sample size used by the O(n^2) distance correlation
DCOR_MAX_SAMPLES = 2000
# Number of permutations of permutation tests
N_PERMUTATIONS = 199

# Largest tolerated fraction of censored last passages
MAX_CENSORED_FRACTION = 0.01
# Relative residual tolerated by the excursion identity after fitting k
EXCURSION_RESIDUAL_TOLERANCE = 0.10
# Relative spread of k across t values tolerated by the excursion identity
EXCURSION_K_STABILITY = 0.10
# Tolerance of the entrance asymptotics ratio at the smallest x
ENTRANCE_RATIO_TOLERANCE = 0.15
# Tolerance of the normalized creeping product at the smallest x
CREEPING_PRODUCT_TOLERANCE = 0.10
# Threshold of the in-proof probabilities P(m > eta) and P(sup before m - x > eta)
IN_PROOF_THRESHOLD = 0.05
# Default eta; both probabilities are O(x / eta) as x tends to 0
IN_PROOF_ETA = 2.0
# Lower bound of the creep probability for creeping models
CREEP_PROBABILITY_FLOOR = 0.95
# Upper bound of the creep probability for models that do not creep
NO_CREEP_PROBABILITY_CEILING = 0.05

# Smallest pass rate of a statistical test on null data
NULL_PASS_RATE = 0.95
# Sample size of the distance-correlation null calibration
DCOR_CALIBRATION_SIZE = 200

# Expected overshoot of a Gaussian random walk above a level, in units of sigma * sqrt(dt)
GAUSSIAN_OVERSHOOT_CONSTANT = 0.5826
