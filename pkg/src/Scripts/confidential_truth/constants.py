import os
########################################################################################################################
# USER SETTINGS:

# Ring width (bits) and number of fractional bits of the fixed-point encoding.
# Both servers must use the same values; they are compared during the connection handshake.
RING_BITS = 60  # default: 60
FRAC_BITS = 20  # default: 20

# How products are rescaled after a multiplication.
# 'dealer': exact probabilistic truncation using masked pairs from the dealer (one extra round per product).
# 'local': each server shifts its own share. Free, but fails with probability about |x| / 2^RING_BITS per element.
TRUNCATION_MODE = 'dealer'  # default: 'dealer'

# Newton-Raphson settings used when a caller does not give a tighter public domain.
# The domain is (NEWTON_LOWER, NEWTON_INV_BOUND) for the reciprocal and (NEWTON_LOWER, NEWTON_SQRT_BOUND) for the
# inverse square root. With a power-of-two start point the residual after i iterations is (1 - lo/hi)^(2^i),
# so a 2^24 ratio needs about 28 iterations.
NEWTON_INV_ITERS = 30  # default: 30
NEWTON_SQRT_ITERS = 30  # default: 30
NEWTON_INV_BOUND = 2 ** 12  # default: 2 ** 12
NEWTON_SQRT_BOUND = 2 ** 12  # default: 2 ** 12
NEWTON_LOWER = 2 ** -12  # default: 2 ** -12

# Target residual when iteration counts are derived from a caller's domain.
NEWTON_TARGET_RESIDUAL = 2 ** -24

# Dyadic public constants c = m / 2^s with s at most this many bits are applied by a local shift of the shares.
# Anything else goes through a truncation step.
LOCAL_SHIFT_MAX_BITS = 2

# Truth-finding defaults
DEFAULT_ITERS = 20  # public iteration count T
THETA_INIT = 0.4  # 3-Estimates untrustworthiness of every source before the first iteration
DELTA_INIT = 0.1  # 3-Estimates difficulty of every fact before the first iteration
COSINE_ETA = 0.2  # Cosine trust smoothing
# Fast Cosine divides by the signed trust sum D of the sources answering a fact. It is only valid while
# |D| >= max(COSINE_DEN_LOWER, S / COSINE_FAST_Y_BOUND), S being the sum of |trust| over the same sources.
# That keeps |y| <= COSINE_FAST_Y_BOUND, which sizes the public Newton domains. Outside it the results are meaningless.
COSINE_FAST_Y_BOUND = 8  # default: 8
COSINE_DEN_LOWER = 2 ** -8  # default: 2 ** -8
SQUEEZE_EPS = 0.05  # min-max normalized values are squeezed into [eps, 1 - eps]
H_SLOPE = 0.5  # h(x) = H_SLOPE * x + H_OFFSET
H_OFFSET = 0.25
TIE_MARGIN = 1e-3  # labels closer than this to the threshold are not counted as flips

# Networking. Party 1 listens, party 2 connects.
PARTY_HOST = '127.0.0.1'
PARTY_PORT = 3457
CONNECT_RETRIES = 50
CONNECT_RETRY_DELAY = 0.2  # seconds
RECV_TIMEOUT = 600.0  # seconds; a lost peer raises instead of hanging forever

# Client endpoint that collects the output shares from both servers
RELEASE_HOST = '127.0.0.1'
RELEASE_PORT = 3456

# Environment variable holding the log level (DEBUG, INFO, WARNING, ERROR)
LOG_ENV_VAR = 'VMPC_LOG'
LOG_LEVEL = os.environ.get(LOG_ENV_VAR, 'WARNING').upper()

# Optional path to the Hubdub files (answers + truth). Tests that need them are skipped if unset.
HUBDUB_DIR = os.environ.get('VMPC_HUBDUB_DIR', '')

########################################################################################################################
# File formats. Don't change these unless you change both servers and every staged file.
SHARE_FILE_MAGIC = b'VMPC1'
DEALER_FILE_MAGIC = b'VMPCDLR\x00'
WIRE_MAGIC = 0x564D5043  # 'VMPC'
WIRE_VERSION = 1

# Record tags in dealer files
TAG_TRIPLE = 1
TAG_TRUNC = 2
TAG_MASK = 3

# Chunk size (records) used when writing dealer files
DEALER_CHUNK = 1 << 16
