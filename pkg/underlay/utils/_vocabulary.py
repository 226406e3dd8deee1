# shared names and numeric constants

# CSV
CSV_HEADER = ("policy", "q", "mt", "mr", "n0", "pmax", "samples", "seed", "lambda",
              "rate_bits", "rate_stderr", "interference", "interference_stderr", "saturated")
FLOAT_FORMAT = "%.9g"

# reporter keys
RATE = "rate_bits"
INTERFERENCE = "interference"

# channel generation
BLOCK_SIZE = 1024
EIGEN_NEGATIVE_TOLERANCE = 1e-10

# root finding on the power
RESIDUAL_REL_TOL = 1e-9
MAX_POWER_ITERATIONS = 200

# multiplier calibration
DEFAULT_REL_TOL = 1e-4
MAX_BRACKET_STEPS = 200
MAX_BISECTIONS = 200

# exit codes of the command line runner
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_CALIBRATION = 3
